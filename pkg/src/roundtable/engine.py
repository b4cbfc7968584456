"""The session state machine.

One engine instance runs one room. The legal phase order is

    Home -> Registration* -> Home -> SessionSelection
         -> TopicCollection (one turn per active participant, seat order)
         -> Preparation (skipped when no prep duration is configured)
         -> Speaking (slot per participant) -> QAPreparation
         -> QA (slot per participant) -> Closing -> (finish) -> Home

Every accepted mutation emits at least one SessionEvent with a gapless
per-session sequence number, appended to the session's log file. Rejections
raise typed errors and leave the state untouched, with one documented
exception: a topic whose image lookup fails is held pending retry or a
manual image (the fail-safe path), which is itself a recorded event.

Timer rule: a tick that crosses a deadline emits the transition stamped at
the scheduled boundary, not at the tick's arrival time, and a single tick
may emit several transitions. That is what makes every speaking slot last
exactly the configured duration in the event trace — the equal-time
guarantee the whole protocol is built around.

The engine is intentionally not thread-safe: the service funnels all
mutations through a single writer lock and hands out snapshots for reads.
"""

from __future__ import annotations

import logging
import uuid
from dataclasses import dataclass, field

from .clock import Clock, WallClock
from .errors import (
    ClockWentBackwards,
    DuplicateActiveName,
    EmptyName,
    EmptyRoster,
    EmptyUtterance,
    ImageUnavailable,
    InactiveTheme,
    NoSourceImages,
    OutOfTurn,
    ProviderError,
    SessionInProgress,
    UnknownParticipant,
    UnknownSession,
    UnknownTheme,
    WrongPhase,
)
from .eventlog import (
    KIND_ATTEMPT,
    KIND_TIMER,
    KIND_TRANSITION,
    EventJournal,
    SessionEvent,
)
from .grammar import normalize
from .images import ImageService
from .memory import build_memory_task, score_memory_task, submit_guess
from .metrics import AttemptRecord, Feature, Outcome, attempts_from_events
from .model import (
    SUPPORTED_LOCALES,
    InputSource,
    MemoryTask,
    Participant,
    Phase,
    Round,
    SessionConfig,
    SessionRecord,
    Theme,
    Topic,
)

logger = logging.getLogger(__name__)

# Phases the facilitator may reconfigure or edit the roster in.
_IDLE_PHASES = (Phase.HOME, Phase.REGISTRATION, Phase.SESSION_SELECTION)


@dataclass
class PendingRegistration:
    name: str
    via: InputSource


@dataclass
class PendingTopic:
    participant_id: str
    keyword: str
    source: InputSource
    held_reason: str  # provider error code that held it


@dataclass
class EngineState:
    """Everything the fuzzer snapshots; plain data, deep-copyable."""

    session_id: str
    phase: Phase = Phase.HOME
    theme_id: str | None = None
    slot_index: int = 0
    phase_entered_at: float = 0.0
    roster: list[str] = field(default_factory=list)  # frozen at session selection
    topics: dict[str, Topic] = field(default_factory=dict)
    pending_registration: PendingRegistration | None = None
    pending_topic: PendingTopic | None = None


class SessionEngine:
    def __init__(
        self,
        clock: Clock | None = None,
        image_service: ImageService | None = None,
        journal: EventJournal | None = None,
        config: SessionConfig | None = None,
    ):
        self.clock = clock or WallClock()
        self.images = image_service
        self.journal = journal
        self.config = config or SessionConfig()
        self.config.validate()

        self.participants: dict[str, Participant] = {}
        self.themes: dict[str, Theme] = {}
        self.completed_sessions: list[SessionRecord] = []
        self.memory_task: MemoryTask | None = None

        self._participant_counter = 0
        self._theme_counter = 0
        self._session_counter = 0
        self._confirm_tokens: dict[str, str] = {}  # idempotency token -> participant id
        self._last_tick_at: float | None = None

        self._history: dict[str, list[SessionEvent]] = {}
        self._next_seq: dict[str, int] = {}
        self._listeners: list = []

        self.state = EngineState(session_id=self._new_session_id())
        self.state.phase_entered_at = self.clock.now()
        self._touch_session_dir()

    # -- identity and event plumbing -----------------------------------------

    def _new_session_id(self) -> str:
        self._session_counter += 1
        return f"s{self._session_counter:03d}-{uuid.uuid4().hex[:8]}"

    def _touch_session_dir(self) -> None:
        if self.journal is not None:
            self.journal.session_dir(self.state.session_id).mkdir(parents=True, exist_ok=True)

    def add_listener(self, callback) -> None:
        """callback(session_id, event) fires after the event is durable."""
        self._listeners.append(callback)

    def _emit(self, kind: str, name: str, payload: dict, at: float | None = None,
              session_id: str | None = None) -> SessionEvent:
        sid = session_id or self.state.session_id
        seq = self._next_seq.get(sid, 1)
        event = SessionEvent(
            seq=seq,
            at=self.clock.now() if at is None else at,
            kind=kind,
            name=name,
            payload=payload,
        )
        self._next_seq[sid] = seq + 1
        self._history.setdefault(sid, []).append(event)
        if self.journal is not None:
            self.journal.append(sid, event)
        for callback in self._listeners:
            callback(sid, event)
        return event

    def events_for(self, session_id: str) -> list[SessionEvent]:
        if session_id not in self._history and not self._knows_session(session_id):
            raise UnknownSession(f"no such session {session_id!r}")
        return list(self._history.get(session_id, []))

    def _knows_session(self, session_id: str) -> bool:
        if session_id == self.state.session_id:
            return True
        return any(record.session_id == session_id for record in self.completed_sessions)

    def current_seq(self, session_id: str) -> int:
        return self._next_seq.get(session_id, 1) - 1

    # -- phase helpers ---------------------------------------------------------

    def _require_phase(self, *allowed: Phase) -> None:
        if self.state.phase not in allowed:
            raise WrongPhase(
                f"not allowed in {self.state.phase.value}; needs "
                + " or ".join(p.value for p in allowed)
            )

    def _enter_phase(self, phase: Phase, at: float, kind: str = KIND_TRANSITION,
                     slot_index: int = 0) -> SessionEvent:
        self.state.phase = phase
        self.state.slot_index = slot_index
        self.state.phase_entered_at = at
        payload: dict = {"phase": phase.value, "slot_index": slot_index}
        speaker = self.current_speaker_id()
        if speaker is not None:
            payload["participant_id"] = speaker
        deadline = self._phase_deadline()
        if deadline is not None:
            payload["ends_at"] = deadline
        name = {
            Phase.HOME: "home_opened",
            Phase.REGISTRATION: "registration_opened",
            Phase.SESSION_SELECTION: "session_selection_opened",
            Phase.TOPIC_COLLECTION: "topic_collection_started",
            Phase.PREPARATION: "preparation_started",
            Phase.SPEAKING: "speaking_started",
            Phase.QA_PREPARATION: "qa_preparation_started",
            Phase.QA: "qa_started",
            Phase.CLOSING: "session_closed",
        }[phase]
        return self._emit(kind, name, payload, at=at)

    def current_speaker_id(self) -> str | None:
        if self.state.phase in (Phase.SPEAKING, Phase.QA, Phase.TOPIC_COLLECTION):
            if 0 <= self.state.slot_index < len(self.state.roster):
                return self.state.roster[self.state.slot_index]
        return None

    def _phase_deadline(self) -> float | None:
        """Absolute end time of the current phase, None when untimed."""
        cfg = self.config
        entered = self.state.phase_entered_at
        if self.state.phase == Phase.SPEAKING:
            return entered + cfg.speaking_slot_s
        if self.state.phase == Phase.QA:
            return entered + cfg.qa_slot_s
        if self.state.phase == Phase.PREPARATION and cfg.prep_before_speaking_s is not None:
            return entered + cfg.prep_before_speaking_s
        if self.state.phase == Phase.QA_PREPARATION and cfg.qa_prep_timed:
            return entered + (cfg.prep_before_speaking_s or 0.0)
        return None

    # -- registration ------------------------------------------------------------

    def open_registration(self) -> SessionEvent:
        self._require_phase(Phase.HOME)
        return self._enter_phase(Phase.REGISTRATION, self.clock.now())

    def propose_name(self, name: str, via: InputSource) -> SessionEvent:
        self._require_phase(Phase.REGISTRATION)
        cleaned = " ".join(name.split())
        if not cleaned:
            raise EmptyName("name is empty after trimming")
        for participant in self.participants.values():
            if participant.active and normalize(participant.display_name) == normalize(cleaned):
                raise DuplicateActiveName(f"{cleaned!r} is already registered and active")
        # A new proposal silently replaces any unconfirmed one.
        self.state.pending_registration = PendingRegistration(name=cleaned, via=via)
        return self._emit(
            KIND_TRANSITION, "name_proposed", {"name": cleaned, "via": via.value}
        )

    def confirm_registration(self, token: str | None = None) -> Participant:
        if token is not None and token in self._confirm_tokens:
            # Idempotent retry: same token, same participant, no new events.
            return self.participants[self._confirm_tokens[token]]
        self._require_phase(Phase.REGISTRATION)
        pending = self.state.pending_registration
        if pending is None:
            raise WrongPhase("no name proposal awaiting confirmation")
        participant = Participant(
            id=f"p{self._participant_counter + 1}",
            display_name=pending.name,
            active=True,
            registered_via=pending.via,
            seat_order=self._participant_counter,
        )
        self._participant_counter += 1
        self.participants[participant.id] = participant
        self.state.pending_registration = None
        if token is not None:
            self._confirm_tokens[token] = participant.id
        self._emit(
            KIND_TRANSITION,
            "participant_registered",
            {
                "participant_id": participant.id,
                "name": participant.display_name,
                "via": participant.registered_via.value,
                "seat_order": participant.seat_order,
            },
        )
        self._note_attempt(Feature.REGISTRATION, participant.id, Outcome.SUCCESS)
        return participant

    def back_to_home(self) -> SessionEvent:
        self._require_phase(Phase.REGISTRATION, Phase.SESSION_SELECTION)
        self.state.pending_registration = None
        return self._enter_phase(Phase.HOME, self.clock.now())

    def set_participant_active(self, participant_id: str, active: bool) -> SessionEvent:
        participant = self.participants.get(participant_id)
        if participant is None:
            raise UnknownParticipant(f"no such participant {participant_id!r}")
        if self.state.phase not in _IDLE_PHASES:
            raise SessionInProgress("roster is frozen while a session is running")
        participant.active = active
        name = "participant_activated" if active else "participant_deactivated"
        return self._emit(KIND_TRANSITION, name, {"participant_id": participant_id})

    # -- themes and config ---------------------------------------------------------

    def add_theme(self, titles: dict[str, str]) -> Theme:
        for locale in SUPPORTED_LOCALES:
            if not titles.get(locale, "").strip():
                raise EmptyUtterance(f"theme title missing for locale {locale!r}")
        self._theme_counter += 1
        theme = Theme(id=f"t{self._theme_counter}", titles=dict(titles), active=True)
        self.themes[theme.id] = theme
        self._emit(KIND_TRANSITION, "theme_added", {"theme_id": theme.id, "titles": dict(theme.titles)})
        return theme

    def set_theme_active(self, theme_id: str, active: bool) -> SessionEvent:
        theme = self.themes.get(theme_id)
        if theme is None:
            raise UnknownTheme(f"no such theme {theme_id!r}")
        theme.active = active
        name = "theme_activated" if active else "theme_deactivated"
        return self._emit(KIND_TRANSITION, name, {"theme_id": theme_id})

    def set_config(self, config: SessionConfig) -> SessionEvent:
        config.validate()
        if self.state.phase not in (Phase.HOME, Phase.SESSION_SELECTION):
            raise SessionInProgress("configuration is locked once topics are being collected")
        self.config = config
        return self._emit(KIND_TRANSITION, "config_updated", config.to_dict())

    # -- session lifecycle ------------------------------------------------------------

    def active_roster(self) -> list[Participant]:
        return sorted(
            (p for p in self.participants.values() if p.active),
            key=lambda p: p.seat_order,
        )

    def start_session_selection(self) -> SessionEvent:
        self._require_phase(Phase.HOME)
        if not self.active_roster():
            raise EmptyRoster("register at least one participant first")
        return self._enter_phase(Phase.SESSION_SELECTION, self.clock.now())

    def _find_theme_by_utterance(self, utterance: str) -> Theme:
        wanted = normalize(utterance)
        if not wanted:
            raise EmptyUtterance("theme utterance is empty")
        for theme in self.themes.values():
            titles = (theme.titles.get(self.config.locale, ""), *theme.titles.values())
            if any(normalize(title) == wanted for title in titles if title):
                if not theme.active:
                    raise InactiveTheme(f"theme {theme.id} is deactivated")
                return theme
        raise UnknownTheme(f"no active theme titled {utterance!r}")

    def select_session(self, theme_utterance: str) -> SessionEvent:
        self._require_phase(Phase.SESSION_SELECTION)
        theme = self._find_theme_by_utterance(theme_utterance)
        return self._begin_topic_collection(theme)

    def select_session_by_id(self, theme_id: str) -> SessionEvent:
        self._require_phase(Phase.SESSION_SELECTION)
        theme = self.themes.get(theme_id)
        if theme is None:
            raise UnknownTheme(f"no such theme {theme_id!r}")
        if not theme.active:
            raise InactiveTheme(f"theme {theme_id} is deactivated")
        return self._begin_topic_collection(theme)

    def _begin_topic_collection(self, theme: Theme) -> SessionEvent:
        roster = self.active_roster()
        if not roster:
            raise EmptyRoster("no active participants")
        self.state.theme_id = theme.id
        self.state.roster = [p.id for p in roster]
        self.state.topics = {}
        self.state.pending_topic = None
        self._emit(
            KIND_TRANSITION,
            "session_selected",
            {"theme_id": theme.id, "titles": dict(theme.titles), "roster": list(self.state.roster)},
        )
        return self._enter_phase(Phase.TOPIC_COLLECTION, self.clock.now())

    # -- topic collection ---------------------------------------------------------------

    def submit_topic(self, participant_id: str, keyword: str, source: InputSource) -> Topic:
        self._require_phase(Phase.TOPIC_COLLECTION)
        if self.current_speaker_id() != participant_id:
            raise OutOfTurn(
                f"it is {self.current_speaker_id()}'s turn, not {participant_id}'s"
            )
        cleaned = " ".join(keyword.split())
        if not cleaned:
            raise EmptyUtterance("topic keyword is empty")
        if self.images is None:
            raise ProviderError("no image provider configured")
        try:
            image = self.images.search_top_image(cleaned, self.config.locale)
        except ProviderError as exc:
            # Fail-safe: hold the topic so a retry or a manual image can finish it.
            self.state.pending_topic = PendingTopic(
                participant_id=participant_id,
                keyword=cleaned,
                source=source,
                held_reason=exc.code,
            )
            self._emit(
                KIND_TRANSITION,
                "topic_held",
                {"participant_id": participant_id, "keyword": cleaned, "reason": exc.code},
            )
            self._note_attempt(Feature.IMAGE_SEARCH, participant_id, Outcome.FAILURE)
            raise ImageUnavailable(
                f"no image for {cleaned!r}: {exc.code}", cause=exc.code
            ) from exc
        topic = Topic(participant_id=participant_id, keyword=cleaned, image=image, source=source)
        self._commit_topic(topic)
        return topic

    def attach_manual_image(self, participant_id: str, payload: bytes | str) -> Topic:
        self._require_phase(Phase.TOPIC_COLLECTION)
        if participant_id in self.state.topics:
            raise WrongPhase(f"{participant_id} already has a confirmed topic")
        pending = self.state.pending_topic
        if pending is None or pending.participant_id != participant_id:
            raise WrongPhase("no held topic awaiting a manual image")
        if self.images is None:
            raise ProviderError("no image provider configured")
        image = self.images.attach_manual_image(pending.keyword, payload)
        topic = Topic(
            participant_id=participant_id,
            keyword=pending.keyword,
            image=image,
            source=pending.source,
        )
        self._emit(
            KIND_TRANSITION,
            "manual_image_attached",
            {"participant_id": participant_id, "keyword": pending.keyword},
        )
        self._commit_topic(topic)
        return topic

    def _commit_topic(self, topic: Topic) -> None:
        self.state.topics[topic.participant_id] = topic
        self.state.pending_topic = None
        self._emit(KIND_TRANSITION, "topic_submitted", topic.to_dict())
        self._note_attempt(Feature.IMAGE_SEARCH, topic.participant_id, Outcome.SUCCESS)
        now = self.clock.now()
        if self.state.slot_index + 1 < len(self.state.roster):
            self.state.slot_index += 1
            self._emit(
                KIND_TRANSITION,
                "topic_turn_advanced",
                {"slot_index": self.state.slot_index, "participant_id": self.current_speaker_id()},
            )
        elif self.config.prep_before_speaking_s is not None:
            self._enter_phase(Phase.PREPARATION, now)
        else:
            # No preparation configured: the round starts immediately.
            self._enter_phase(Phase.SPEAKING, now, slot_index=0)

    # -- ready signal and timers -----------------------------------------------------------

    def signal_ready(self, participant_id: str | None = None) -> SessionEvent:
        self._require_phase(Phase.PREPARATION, Phase.QA_PREPARATION)
        now = self.clock.now()
        if self.state.phase == Phase.PREPARATION:
            return self._enter_phase(Phase.SPEAKING, now, slot_index=0)
        return self._enter_phase(Phase.QA, now, slot_index=0)

    def tick(self, now: float | None = None) -> list[SessionEvent]:
        """Advance timed phases across every deadline crossed by ``now``."""
        now = self.clock.now() if now is None else now
        if self._last_tick_at is not None and now < self._last_tick_at:
            raise ClockWentBackwards(
                f"tick at {now} after a tick at {self._last_tick_at}"
            )
        self._last_tick_at = now
        emitted = []
        while True:
            deadline = self._phase_deadline()
            if deadline is None or now < deadline:
                break
            emitted.append(self._advance_at(deadline))
        return emitted

    def _advance_at(self, boundary: float) -> SessionEvent:
        state = self.state
        if state.phase == Phase.PREPARATION:
            # Cap reached without a ready press: keep the session moving.
            return self._enter_phase(Phase.SPEAKING, boundary, kind=KIND_TIMER, slot_index=0)
        if state.phase == Phase.QA_PREPARATION:
            return self._enter_phase(Phase.QA, boundary, kind=KIND_TIMER, slot_index=0)
        if state.phase == Phase.SPEAKING:
            if state.slot_index + 1 < len(state.roster):
                return self._enter_phase(
                    Phase.SPEAKING, boundary, kind=KIND_TIMER, slot_index=state.slot_index + 1
                )
            return self._enter_phase(Phase.QA_PREPARATION, boundary, kind=KIND_TIMER)
        if state.phase == Phase.QA:
            if state.slot_index + 1 < len(state.roster):
                return self._enter_phase(
                    Phase.QA, boundary, kind=KIND_TIMER, slot_index=state.slot_index + 1
                )
            return self._enter_phase(Phase.CLOSING, boundary, kind=KIND_TIMER)
        raise WrongPhase(f"{state.phase.value} has no timer")

    def finish_session(self) -> SessionRecord:
        """Archive the closed session and return to the home screen."""
        self._require_phase(Phase.CLOSING)
        record = SessionRecord(
            session_id=self.state.session_id,
            theme_id=self.state.theme_id or "",
            theme_titles=dict(self.themes[self.state.theme_id].titles) if self.state.theme_id else {},
            topics=dict(self.state.topics),
            completed_at=self.clock.now(),
        )
        self.completed_sessions.append(record)
        self._emit(KIND_TRANSITION, "session_finished", {"session_id": record.session_id})
        self.state = EngineState(session_id=self._new_session_id())
        self.state.phase_entered_at = self.clock.now()
        self._touch_session_dir()
        self._emit(KIND_TRANSITION, "home_opened", {"phase": Phase.HOME.value, "slot_index": 0})
        return record

    # -- memory task -------------------------------------------------------------------------

    def build_memory_task(self, rng_seed: int, session_ids: list[str] | None = None) -> MemoryTask:
        self._require_phase(Phase.HOME)
        records = self.completed_sessions
        if session_ids is not None:
            by_id = {record.session_id: record for record in records}
            missing = [sid for sid in session_ids if sid not in by_id]
            if missing:
                raise UnknownSession(f"unknown session(s): {', '.join(missing)}")
            records = [by_id[sid] for sid in session_ids]
        if not records:
            raise NoSourceImages("no completed sessions yet")
        task = build_memory_task(records, rng_seed)
        self.memory_task = task
        self._emit(
            KIND_TRANSITION,
            "memory_task_built",
            {"items": len(task.items), "seed": rng_seed},
        )
        return task

    def submit_memory_guess(self, participant_id: str, item_index: int,
                            guessed_owner: str, guessed_theme: str) -> None:
        if self.memory_task is None:
            raise WrongPhase("no memory task has been built")
        if participant_id not in self.participants:
            raise UnknownParticipant(f"no such participant {participant_id!r}")
        submit_guess(self.memory_task, participant_id, item_index, guessed_owner, guessed_theme)
        self._emit(
            KIND_TRANSITION,
            "memory_guess_submitted",
            {"participant_id": participant_id, "item_index": item_index},
        )

    def score_memory_task(self, participant_id: str):
        if self.memory_task is None:
            raise WrongPhase("no memory task has been built")
        return score_memory_task(self.memory_task, participant_id)

    # -- attempts (metrics) ---------------------------------------------------------------------

    def _note_attempt(self, feature: Feature, participant_id: str, outcome: Outcome) -> None:
        self._emit(
            KIND_ATTEMPT,
            "attempt_recorded",
            {"feature": feature.value, "participant_id": participant_id, "outcome": outcome.value},
        )

    def record_attempt(self, session_id: str, feature: Feature, participant_id: str,
                       outcome: Outcome) -> SessionEvent:
        """Facilitator mark; may target the running session or an archived one."""
        if not self._knows_session(session_id):
            raise UnknownSession(f"no such session {session_id!r}")
        return self._emit(
            KIND_ATTEMPT,
            "attempt_recorded",
            {"feature": feature.value, "participant_id": participant_id, "outcome": outcome.value},
            session_id=session_id,
        )

    def attempts_for(self, session_id: str) -> list[AttemptRecord]:
        return attempts_from_events(session_id, self.events_for(session_id))

    # -- audio gate -------------------------------------------------------------------------------

    def slot_is_active(self, session_id: str, round: Round, slot_index: int,
                       participant_id: str) -> bool:
        if session_id != self.state.session_id:
            return False
        phase = Phase.SPEAKING if round == Round.SPEAKING else Phase.QA
        return (
            self.state.phase == phase
            and self.state.slot_index == slot_index
            and self.current_speaker_id() == participant_id
        )

    def slot_duration(self, round: Round) -> float:
        return self.config.speaking_slot_s if round == Round.SPEAKING else self.config.qa_slot_s

    # -- views ---------------------------------------------------------------------------------------

    def state_view(self) -> dict:
        """Read-only snapshot for the API; safe to serialize as-is."""
        state = self.state
        deadline = self._phase_deadline()
        theme = self.themes.get(state.theme_id) if state.theme_id else None
        return {
            "session_id": state.session_id,
            "phase": state.phase.value,
            "slot_index": state.slot_index,
            "current_participant_id": self.current_speaker_id(),
            "theme": {"id": theme.id, "titles": theme.titles} if theme else None,
            "config": self.config.to_dict(),
            "roster": [
                {
                    "id": p.id,
                    "display_name": p.display_name,
                    "active": p.active,
                    "registered_via": p.registered_via.value,
                    "seat_order": p.seat_order,
                }
                for p in sorted(self.participants.values(), key=lambda p: p.seat_order)
            ],
            "session_roster": list(state.roster),
            "topics": {pid: topic.to_dict() for pid, topic in state.topics.items()},
            "pending_registration": (
                {"name": state.pending_registration.name, "via": state.pending_registration.via.value}
                if state.pending_registration
                else None
            ),
            "pending_topic": (
                {
                    "participant_id": state.pending_topic.participant_id,
                    "keyword": state.pending_topic.keyword,
                    "reason": state.pending_topic.held_reason,
                }
                if state.pending_topic
                else None
            ),
            "themes": [
                {"id": t.id, "titles": t.titles, "active": t.active}
                for t in self.themes.values()
            ],
            "phase_entered_at": state.phase_entered_at,
            "phase_ends_at": deadline,
            "now": self.clock.now(),
            "seq": self.current_seq(state.session_id),
            "completed_sessions": [record.session_id for record in self.completed_sessions],
        }
