from __future__ import annotations

import copy

import pytest

from roundtable import errors
from roundtable.engine import SessionEngine
from roundtable.eventlog import KIND_TIMER
from roundtable.images import ImageService
from roundtable.model import (
    PRESET_ELDER_CARE,
    PRESET_TRIAL_RUN,
    InputSource,
    Phase,
    Round,
    SessionConfig,
)

from .conftest import collect_topics, register_four, start_themed_session


class TestRegistration:
    def test_first_registration_gets_seat_zero(self, engine):
        engine.open_registration()
        engine.propose_name("Suzuki", InputSource.TYPED)
        participant = engine.confirm_registration()
        assert participant.seat_order == 0
        assert participant.registered_via == InputSource.TYPED
        assert participant.active

    def test_four_registrations_get_sequential_seats(self, engine):
        register_four(engine)
        seats = [p.seat_order for p in engine.active_roster()]
        assert seats == [0, 1, 2, 3]

    def test_empty_name_rejected(self, engine):
        engine.open_registration()
        with pytest.raises(errors.EmptyName):
            engine.propose_name("   ", InputSource.VOICE)

    def test_duplicate_active_name_rejected(self, engine):
        engine.open_registration()
        engine.propose_name("Suzuki", InputSource.TYPED)
        engine.confirm_registration()
        with pytest.raises(errors.DuplicateActiveName):
            engine.propose_name("suzuki", InputSource.VOICE)

    def test_deactivated_name_can_be_reused(self, engine):
        engine.open_registration()
        engine.propose_name("Suzuki", InputSource.TYPED)
        first = engine.confirm_registration()
        engine.set_participant_active(first.id, False)
        engine.propose_name("Suzuki", InputSource.TYPED)
        assert engine.confirm_registration().id != first.id

    def test_confirm_without_proposal_rejected(self, engine):
        engine.open_registration()
        with pytest.raises(errors.WrongPhase):
            engine.confirm_registration()

    def test_unconfirmed_proposal_discarded_by_new_proposal(self, engine):
        engine.open_registration()
        engine.propose_name("Suzuki", InputSource.VOICE)
        engine.propose_name("Tanaka", InputSource.VOICE)
        assert engine.confirm_registration().display_name == "Tanaka"

    def test_back_discards_pending_proposal(self, engine):
        engine.open_registration()
        engine.propose_name("Suzuki", InputSource.VOICE)
        engine.back_to_home()
        assert engine.state.pending_registration is None
        assert engine.participants == {}

    def test_confirm_token_is_idempotent(self, engine):
        engine.open_registration()
        engine.propose_name("Suzuki", InputSource.TYPED)
        first = engine.confirm_registration(token="tok-1")
        again = engine.confirm_registration(token="tok-1")
        assert again is first
        assert len(engine.participants) == 1

    def test_registration_only_from_home(self, engine):
        register_four(engine)
        start_themed_session(engine)
        with pytest.raises(errors.WrongPhase):
            engine.open_registration()


class TestConfig:
    def test_presets_validate(self):
        PRESET_TRIAL_RUN.validate()
        PRESET_ELDER_CARE.validate()
        assert PRESET_TRIAL_RUN.prep_before_speaking_s is None
        assert PRESET_ELDER_CARE.speaking_slot_s == 90.0

    def test_zero_speaking_slot_rejected(self, engine):
        with pytest.raises(errors.InvalidDuration):
            engine.set_config(SessionConfig(speaking_slot_s=0))

    def test_config_locked_mid_session(self, engine):
        register_four(engine)
        start_themed_session(engine)
        with pytest.raises(errors.SessionInProgress):
            engine.set_config(SessionConfig())

    def test_config_allowed_in_session_selection(self, engine):
        register_four(engine)
        engine.start_session_selection()
        engine.set_config(SessionConfig(speaking_slot_s=120))
        assert engine.config.speaking_slot_s == 120


class TestSessionSelection:
    def test_select_by_title(self, engine):
        register_four(engine)
        start_themed_session(engine)
        assert engine.state.phase == Phase.TOPIC_COLLECTION
        assert engine.state.slot_index == 0

    def test_unknown_theme(self, engine):
        register_four(engine)
        engine.add_theme({"en": "favorite food", "ja": "好きな食べ物"})
        engine.start_session_selection()
        with pytest.raises(errors.UnknownTheme):
            engine.select_session("quantum chromodynamics")

    def test_inactive_theme(self, engine):
        register_four(engine)
        theme = engine.add_theme({"en": "favorite food", "ja": "好きな食べ物"})
        engine.set_theme_active(theme.id, False)
        engine.start_session_selection()
        with pytest.raises(errors.InactiveTheme):
            engine.select_session("favorite food")

    def test_empty_roster_cannot_start(self, engine):
        with pytest.raises(errors.EmptyRoster):
            engine.start_session_selection()

    def test_deactivated_participant_not_in_roster(self, engine):
        pids = register_four(engine)
        engine.set_participant_active(pids[1], False)
        start_themed_session(engine)
        assert pids[1] not in engine.state.roster
        assert len(engine.state.roster) == 3


class TestTopicCollection:
    def test_out_of_turn_rejected(self, engine):
        register_four(engine)
        start_themed_session(engine)
        second = engine.state.roster[1]
        with pytest.raises(errors.OutOfTurn):
            engine.submit_topic(second, "tempura", InputSource.VOICE)

    def test_last_topic_moves_to_preparation(self, engine):
        register_four(engine)
        start_themed_session(engine)
        collect_topics(engine)
        assert engine.state.phase == Phase.PREPARATION
        assert len(engine.state.topics) == 4

    def test_no_prep_goes_straight_to_speaking(self, sim_clock, stub_images):
        engine = SessionEngine(
            clock=sim_clock, image_service=stub_images, config=PRESET_TRIAL_RUN
        )
        register_four(engine)
        start_themed_session(engine)
        collect_topics(engine)
        assert engine.state.phase == Phase.SPEAKING
        assert engine.state.slot_index == 0

    def test_topic_gets_top_image(self, engine):
        register_four(engine)
        start_themed_session(engine)
        first = engine.state.roster[0]
        topic = engine.submit_topic(first, "fried chicken", InputSource.VOICE)
        assert topic.image is not None
        assert topic.image.query == "fried chicken"

    def test_provider_failure_holds_topic(self, sim_clock, tmp_path):
        class FailingProvider:
            def search(self, keyword, locale):
                raise errors.NoResults("nothing")

            def fetch(self, url):
                raise AssertionError("unreachable")

        images = ImageService(FailingProvider(), tmp_path / "cache", clock=sim_clock)
        engine = SessionEngine(clock=sim_clock, image_service=images)
        register_four(engine)
        start_themed_session(engine)
        first = engine.state.roster[0]
        with pytest.raises(errors.ImageUnavailable) as exc_info:
            engine.submit_topic(first, "fried chicken", InputSource.VOICE)
        assert exc_info.value.cause == "NoResults"
        assert engine.state.pending_topic.participant_id == first
        assert engine.state.phase == Phase.TOPIC_COLLECTION

        # The manual fallback completes the held topic and advances the turn.
        topic = engine.attach_manual_image(first, b"\xff\xd8\xff manual")
        assert topic.image.provider == "manual"
        assert engine.state.slot_index == 1

    def test_manual_image_without_held_topic_rejected(self, engine):
        register_four(engine)
        start_themed_session(engine)
        with pytest.raises(errors.WrongPhase):
            engine.attach_manual_image(engine.state.roster[0], b"\xff\xd8\xffx")

    def test_manual_image_after_confirmed_topic_rejected(self, engine):
        register_four(engine)
        start_themed_session(engine)
        first = engine.state.roster[0]
        engine.submit_topic(first, "fried chicken", InputSource.VOICE)
        with pytest.raises(errors.WrongPhase):
            engine.attach_manual_image(first, b"\xff\xd8\xffx")


class TestReadyAndTimers:
    def _to_preparation(self, engine):
        register_four(engine)
        start_themed_session(engine)
        collect_topics(engine)

    def test_ready_starts_speaking_early(self, engine, sim_clock):
        self._to_preparation(engine)
        sim_clock.advance(10)
        engine.signal_ready()
        assert engine.state.phase == Phase.SPEAKING
        assert engine.state.phase_entered_at == sim_clock.now()

    def test_ready_during_speaking_rejected(self, engine):
        self._to_preparation(engine)
        engine.signal_ready()
        with pytest.raises(errors.WrongPhase):
            engine.signal_ready()

    def test_preparation_auto_advances_at_cap(self, engine, sim_clock):
        self._to_preparation(engine)
        sim_clock.advance(300)
        events = engine.tick(sim_clock.now())
        assert engine.state.phase == Phase.SPEAKING
        assert events[0].kind == KIND_TIMER

    def test_tick_stream_walks_all_slots(self, engine, sim_clock):
        self._to_preparation(engine)
        engine.signal_ready()
        start = sim_clock.now()
        transitions = []
        while sim_clock.now() < start + 360:
            sim_clock.advance(7)  # coarse, uneven ticks
            transitions.extend(engine.tick(sim_clock.now()))
        slot_ends = [e for e in transitions if e.kind == KIND_TIMER]
        assert len(slot_ends) == 4
        assert engine.state.phase == Phase.QA_PREPARATION
        # Boundary-stamped: slot ends at exact multiples of the slot length.
        assert [e.at - start for e in slot_ends] == [90.0, 180.0, 270.0, 360.0]

    def test_one_big_tick_crosses_many_boundaries(self, engine, sim_clock):
        self._to_preparation(engine)
        engine.signal_ready()
        sim_clock.advance(360)
        events = engine.tick(sim_clock.now())
        assert len(events) == 4
        assert engine.state.phase == Phase.QA_PREPARATION

    def test_untimed_qa_preparation_never_times_out(self, engine, sim_clock):
        self._to_preparation(engine)
        engine.signal_ready()
        sim_clock.advance(360)
        engine.tick(sim_clock.now())
        assert engine.state.phase == Phase.QA_PREPARATION
        sim_clock.advance(100000)
        assert engine.tick(sim_clock.now()) == []
        assert engine.state.phase == Phase.QA_PREPARATION

    def test_clock_went_backwards(self, engine, sim_clock):
        engine.tick(100.0)
        with pytest.raises(errors.ClockWentBackwards):
            engine.tick(99.0)

    def test_timed_qa_preparation_uses_prep_cap(self, sim_clock, stub_images):
        config = SessionConfig(prep_before_speaking_s=60, qa_prep_timed=True)
        engine = SessionEngine(clock=sim_clock, image_service=stub_images, config=config)
        register_four(engine)
        start_themed_session(engine)
        collect_topics(engine)
        engine.signal_ready()
        sim_clock.advance(4 * 90)
        engine.tick(sim_clock.now())
        assert engine.state.phase == Phase.QA_PREPARATION
        sim_clock.advance(60)
        engine.tick(sim_clock.now())
        assert engine.state.phase == Phase.QA


class TestFullSession:
    def drive_to_closing(self, engine, sim_clock):
        register_four(engine)
        start_themed_session(engine)
        collect_topics(engine)
        if engine.state.phase == Phase.PREPARATION:
            engine.signal_ready()
        sim_clock.advance(4 * engine.config.speaking_slot_s)
        engine.tick(sim_clock.now())
        engine.signal_ready()
        sim_clock.advance(4 * engine.config.qa_slot_s)
        engine.tick(sim_clock.now())
        assert engine.state.phase == Phase.CLOSING

    def test_completeness_each_participant_one_slot_per_round(self, engine, sim_clock):
        self.drive_to_closing(engine, sim_clock)
        events = engine.events_for(engine.state.session_id)
        speaking = [e.payload["participant_id"] for e in events if e.name == "speaking_started"]
        qa = [e.payload["participant_id"] for e in events if e.name == "qa_started"]
        roster = [p.id for p in engine.active_roster()]
        assert speaking == roster
        assert qa == roster

    def test_finish_archives_and_returns_home(self, engine, sim_clock):
        self.drive_to_closing(engine, sim_clock)
        old_sid = engine.state.session_id
        record = engine.finish_session()
        assert record.session_id == old_sid
        assert engine.state.phase == Phase.HOME
        assert engine.state.session_id != old_sid
        assert engine.completed_sessions[-1].topics.keys() == set(record.topics)

    def test_slot_gate_tracks_active_slot(self, engine, sim_clock):
        register_four(engine)
        start_themed_session(engine)
        collect_topics(engine)
        engine.signal_ready()
        sid = engine.state.session_id
        first = engine.state.roster[0]
        second = engine.state.roster[1]
        assert engine.slot_is_active(sid, Round.SPEAKING, 0, first)
        assert not engine.slot_is_active(sid, Round.SPEAKING, 1, second)
        assert not engine.slot_is_active(sid, Round.QA, 0, first)
        sim_clock.advance(90)
        engine.tick(sim_clock.now())
        assert engine.slot_is_active(sid, Round.SPEAKING, 1, second)


class TestMemorySessions:
    def run_session(self, engine, sim_clock, keywords):
        start_themed_session(engine, title_en=f"theme {keywords[0]}", title_ja=f"テーマ{keywords[0]}")
        collect_topics(engine, keywords)
        engine.signal_ready()
        sim_clock.advance(4 * 90)
        engine.tick(sim_clock.now())
        engine.signal_ready()
        sim_clock.advance(4 * 90)
        engine.tick(sim_clock.now())
        engine.finish_session()

    def test_memory_task_draws_on_all_completed_sessions(self, engine, sim_clock):
        register_four(engine)
        for i in range(4):
            self.run_session(engine, sim_clock, [f"kw{i}{j}" for j in range(4)])
        task = engine.build_memory_task(rng_seed=11)
        assert len(task.items) == 16
        assert engine.build_memory_task(rng_seed=11).items == task.items

    def test_memory_task_requires_completed_sessions(self, engine):
        register_four(engine)
        with pytest.raises(errors.NoSourceImages):
            engine.build_memory_task(rng_seed=1)

    def test_memory_task_unknown_session_id(self, engine, sim_clock):
        register_four(engine)
        self.run_session(engine, sim_clock, ["a", "b", "c", "d"])
        with pytest.raises(errors.UnknownSession):
            engine.build_memory_task(rng_seed=1, session_ids=["nope"])


class TestEventLogDiscipline:
    def test_seq_is_gapless_per_session(self, engine, sim_clock):
        register_four(engine)
        start_themed_session(engine)
        collect_topics(engine)
        events = engine.events_for(engine.state.session_id)
        assert [e.seq for e in events] == list(range(1, len(events) + 1))

    def test_rejection_emits_no_event_and_keeps_state(self, engine):
        register_four(engine)
        before_events = len(engine.events_for(engine.state.session_id))
        before_state = copy.deepcopy(engine.state)
        with pytest.raises(errors.WrongPhase):
            engine.signal_ready()
        assert len(engine.events_for(engine.state.session_id)) == before_events
        assert engine.state == before_state

    def test_journal_writes_one_file_per_session(self, tmp_path, sim_clock, stub_images):
        from roundtable.eventlog import EventJournal, read_events

        journal = EventJournal(tmp_path)
        engine = SessionEngine(
            clock=sim_clock, image_service=stub_images, journal=journal
        )
        sid = engine.state.session_id
        register_four(engine)
        path = journal.log_path(sid)
        assert path.exists()
        on_disk = read_events(path)
        assert [e.seq for e in on_disk] == [e.seq for e in engine.events_for(sid)]
        assert on_disk[-1].name == engine.events_for(sid)[-1].name
