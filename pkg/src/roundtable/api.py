"""HTTP + server-sent-events surface over the engine, audio store, and metrics.

Every screen action has an HTTP equivalent, so a whole session can be driven
headless. The voice path is one endpoint: the browser posts recognized text
and the server interprets it against the current phase with the active locale
pack. All mutations are funneled through a single writer lock; reads and the
event stream never block writers for long.
"""

from __future__ import annotations

import asyncio
import logging
import threading
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, JSONResponse, PlainTextResponse, StreamingResponse

from .audio import AudioStore
from .clock import Clock, SimulatedClock, WallClock
from .engine import SessionEngine
from .errors import (
    DomainRejection,
    ImageUnavailable,
    NotFound,
    ProviderError,
    RoundtableError,
    SeqAhead,
    UnknownSession,
    ValidationError,
)
from .eventlog import EventJournal, event_to_line
from .grammar import (
    CommandKind,
    LocalePack,
    MatchContext,
    extract_keyword,
    load_locale_pack,
    match_command,
)
from .images import FixtureImageProvider, ImageService, LiveImageProvider
from .metrics import (
    Feature,
    Outcome,
    attempts_from_events,
    render_table,
    session_report,
    speaking_durations_from_events,
)
from .model import InputSource, Phase, Round, SessionConfig

logger = logging.getLogger(__name__)

DEFAULT_MAX_CHUNK_BYTES = 16 * 1024 * 1024
SSE_POLL_INTERVAL_S = 0.05


class Service:
    """Wires the engine, stores, and locale packs behind one writer lock."""

    def __init__(
        self,
        data_dir: str | Path,
        provider_mode: str = "fixture",
        fixture_dir: str | Path | None = None,
        locale: str = "en",
        simulated_clock: bool = False,
        config: SessionConfig | None = None,
        live_transport=None,
        pack_dir: str | Path | None = None,
        max_chunk_bytes: int = DEFAULT_MAX_CHUNK_BYTES,
    ):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        probe = self.data_dir / ".write_probe"
        probe.write_text("ok")
        probe.unlink()

        self.clock: Clock = SimulatedClock() if simulated_clock else WallClock()
        self.simulated = simulated_clock

        self.packs: dict[str, LocalePack] = {
            name: load_locale_pack(name, pack_dir) for name in ("en", "ja")
        }

        if provider_mode == "fixture":
            if not fixture_dir:
                raise ValidationError("fixture mode needs a fixture directory")
            provider = FixtureImageProvider(fixture_dir)
        elif provider_mode == "live":
            provider = LiveImageProvider.from_env(transport=live_transport)
        else:
            raise ValidationError(f"unknown provider mode {provider_mode!r}")
        self.images = ImageService(provider, self.data_dir / "image_cache", clock=self.clock)

        base_config = config or SessionConfig(locale=locale)
        self.engine = SessionEngine(
            clock=self.clock,
            image_service=self.images,
            journal=EventJournal(self.data_dir),
            config=base_config,
        )
        self.audio = AudioStore(self.data_dir, slot_gate=self.engine.slot_is_active, clock=self.clock)
        self.write_lock = threading.RLock()
        self.max_chunk_bytes = max_chunk_bytes
        logger.info(
            "service ready: data_dir=%s provider=%s locale=%s simulated_clock=%s",
            self.data_dir, provider_mode, locale, simulated_clock,
        )

    # Current locale pack follows the configured session locale.
    @property
    def pack(self) -> LocalePack:
        return self.packs[self.engine.config.locale]

    def resolve_session_id(self, session_id: str) -> str:
        if session_id == "current":
            return self.engine.state.session_id
        return session_id

    def match_context(self) -> MatchContext:
        state = self.engine.state
        if state.phase == Phase.HOME:
            return MatchContext.HOME
        if state.phase == Phase.REGISTRATION:
            if state.pending_registration is not None:
                return MatchContext.CONFIRM
            return MatchContext.NAME_ENTRY
        if state.phase == Phase.SESSION_SELECTION:
            return MatchContext.SESSION_SELECTION
        if state.phase == Phase.TOPIC_COLLECTION:
            return MatchContext.TOPIC_ENTRY
        return MatchContext.OTHER


def _error_status(exc: RoundtableError) -> int:
    if isinstance(exc, ImageUnavailable):
        return 502
    if isinstance(exc, ProviderError):
        return 502
    if isinstance(exc, NotFound):
        return 404
    if isinstance(exc, DomainRejection):
        return 409
    return 400


def create_app(service: Service) -> FastAPI:
    app = FastAPI(title="roundtable", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    engine = service.engine

    @app.exception_handler(RoundtableError)
    async def roundtable_error(request: Request, exc: RoundtableError):
        body = {"error": exc.code, "detail": str(exc)}
        if isinstance(exc, ImageUnavailable):
            body["cause"] = exc.cause
        return JSONResponse(status_code=_error_status(exc), content=body)

    @app.exception_handler(RequestValidationError)
    async def malformed(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": "Malformed", "detail": str(exc)})

    def mutated(extra: dict | None = None) -> dict:
        view = engine.state_view()
        body = {"state": view, "seq": view["seq"]}
        if extra:
            body.update(extra)
        return body

    # -- health and state -------------------------------------------------

    @app.get("/health")
    def health():
        return {"status": "ok", "simulated_clock": service.simulated}

    @app.get("/state")
    def state():
        # Snapshots never expose a mid-transition state.
        with service.write_lock:
            return engine.state_view()

    @app.get("/locales/{locale}")
    def locale_pack(locale: str):
        pack = service.packs.get(locale)
        if pack is None:
            raise NotFound(f"no locale pack for {locale!r}")
        return {"locale": pack.locale, "labels": pack.labels, "commands": pack.commands}

    # -- participants ------------------------------------------------------

    @app.post("/registration/open")
    def registration_open():
        with service.write_lock:
            engine.open_registration()
            return mutated()

    @app.post("/participants")
    def propose_participant(body: dict):
        name = str(body.get("name", ""))
        via = _parse_enum(InputSource, body.get("via", "typed"))
        with service.write_lock:
            engine.propose_name(name, via)
            return mutated()

    @app.post("/participants/confirm", status_code=201)
    def confirm_participant(body: dict | None = None):
        token = (body or {}).get("token")
        with service.write_lock:
            participant = engine.confirm_registration(token)
            return mutated(
                {
                    "participant": {
                        "id": participant.id,
                        "display_name": participant.display_name,
                        "seat_order": participant.seat_order,
                        "registered_via": participant.registered_via.value,
                    }
                }
            )

    @app.post("/participants/{participant_id}/activate")
    def activate_participant(participant_id: str):
        with service.write_lock:
            engine.set_participant_active(participant_id, True)
            return mutated()

    @app.post("/participants/{participant_id}/deactivate")
    def deactivate_participant(participant_id: str):
        with service.write_lock:
            engine.set_participant_active(participant_id, False)
            return mutated()

    # -- themes and config ----------------------------------------------------

    @app.post("/themes", status_code=201)
    def add_theme(body: dict):
        titles = body.get("titles") or {}
        with service.write_lock:
            theme = engine.add_theme(titles)
            return mutated({"theme": {"id": theme.id, "titles": theme.titles}})

    @app.post("/themes/{theme_id}/activate")
    def activate_theme(theme_id: str):
        with service.write_lock:
            engine.set_theme_active(theme_id, True)
            return mutated()

    @app.post("/themes/{theme_id}/deactivate")
    def deactivate_theme(theme_id: str):
        with service.write_lock:
            engine.set_theme_active(theme_id, False)
            return mutated()

    @app.get("/config")
    def get_config():
        return engine.config.to_dict()

    @app.put("/config")
    def put_config(body: dict):
        config = SessionConfig.from_dict(body)
        with service.write_lock:
            engine.set_config(config)
            return mutated()

    # -- session lifecycle -------------------------------------------------------

    @app.post("/session/start")
    def session_start():
        with service.write_lock:
            engine.start_session_selection()
            return mutated()

    @app.post("/session/back")
    def session_back():
        with service.write_lock:
            engine.back_to_home()
            return mutated()

    @app.post("/session/select")
    def session_select(body: dict):
        with service.write_lock:
            if "theme_id" in body:
                engine.select_session_by_id(str(body["theme_id"]))
            else:
                engine.select_session(str(body.get("theme", "")))
            return mutated()

    @app.post("/session/topic")
    def session_topic(body: dict):
        participant_id = str(body.get("participant_id", ""))
        keyword = str(body.get("keyword", ""))
        source = _parse_enum(InputSource, body.get("source", "typed"))
        with service.write_lock:
            topic = engine.submit_topic(participant_id, keyword, source)
            return mutated({"topic": topic.to_dict()})

    @app.post("/session/topic/manual-image")
    async def manual_image(request: Request, participant_id: str):
        payload = await request.body()
        with service.write_lock:
            topic = engine.attach_manual_image(participant_id, payload)
            return mutated({"topic": topic.to_dict()})

    @app.post("/session/ready")
    def session_ready(body: dict | None = None):
        participant_id = (body or {}).get("participant_id")
        with service.write_lock:
            engine.signal_ready(participant_id)
            return mutated()

    @app.post("/session/finish")
    def session_finish():
        with service.write_lock:
            record = engine.finish_session()
            return mutated({"finished_session_id": record.session_id})

    # -- voice path -----------------------------------------------------------------

    @app.post("/utterance")
    def utterance(body: dict):
        text = str(body.get("text", ""))
        with service.write_lock:
            context = service.match_context()
            themes = [
                (theme.id, theme.titles.get(engine.config.locale, ""))
                for theme in engine.themes.values()
            ]
            command = match_command(text, service.pack, context, themes)
            result: dict = {"command": command.kind.value, "context": context.value}
            if command.kind == CommandKind.REGISTER:
                engine.open_registration()
            elif command.kind == CommandKind.START_SESSION:
                engine.start_session_selection()
            elif command.kind == CommandKind.CONFIRM:
                engine.confirm_registration(None)
            elif command.kind == CommandKind.BACK:
                engine.back_to_home()
            elif command.kind == CommandKind.SELECT_THEME:
                engine.select_session_by_id(command.payload)
            elif command.kind == CommandKind.FREE_TEXT and context == MatchContext.NAME_ENTRY:
                name = extract_keyword(command.payload, service.pack, "name")
                result["extracted"] = name
                engine.propose_name(name, InputSource.VOICE)
            elif command.kind == CommandKind.FREE_TEXT and context == MatchContext.TOPIC_ENTRY:
                keyword = extract_keyword(command.payload, service.pack, "topic")
                result["extracted"] = keyword
                speaker = engine.current_speaker_id()
                engine.submit_topic(speaker or "", keyword, InputSource.VOICE)
            else:
                # NoMatch is a value: 200 with no state change, UI offers retry.
                return {**result, "state": engine.state_view(), "seq": engine.state_view()["seq"]}
            return mutated(result)

    # -- audio ---------------------------------------------------------------------

    @app.post("/audio/begin", status_code=201)
    def audio_begin(body: dict):
        round_ = _parse_enum(Round, body.get("round", ""))
        slot_index = int(body.get("slot_index", -1))
        participant_id = str(body.get("participant_id", ""))
        media_type = str(body.get("media_type", "audio/webm"))
        session_id = service.resolve_session_id(str(body.get("session_id", "current")))
        handle = service.audio.begin_recording(
            session_id,
            round_,
            slot_index,
            participant_id,
            media_type,
            expected_duration_s=engine.slot_duration(round_),
        )
        return {"recording_id": handle.recording_id}

    @app.put("/audio/{recording_id}/chunk")
    async def audio_chunk(recording_id: str, request: Request, expected_offset: int | None = None):
        """Append a chunk. ``expected_offset`` makes retries safe: a resend of
        an already-applied chunk is detected instead of double-appended."""
        chunk = await request.body()
        if len(chunk) > service.max_chunk_bytes:
            return JSONResponse(
                status_code=413,
                content={"error": "ChunkTooLarge", "detail": f"max {service.max_chunk_bytes} bytes"},
            )
        handle = service.audio.open_handle(recording_id)
        if handle is None:
            raise UnknownSession(f"no open recording {recording_id!r}")
        if expected_offset is not None and handle.bytes_written != expected_offset:
            return JSONResponse(
                status_code=409,
                content={
                    "error": "OffsetMismatch",
                    "detail": f"recording is at {handle.bytes_written}, not {expected_offset}",
                    "byte_len": handle.bytes_written,
                },
            )
        byte_len = service.audio.append_chunk(handle, chunk)
        return {"byte_len": byte_len}

    @app.post("/audio/{recording_id}/finalize")
    def audio_finalize(recording_id: str, body: dict | None = None):
        handle = service.audio.open_handle(recording_id)
        if handle is None:
            raise UnknownSession(f"no open recording {recording_id!r}")
        ended_at = (body or {}).get("ended_at")
        meta = service.audio.finalize_recording(
            handle, float(ended_at) if ended_at is not None else None
        )
        feature = Feature.AUDIO_SPEAKING if meta.round == Round.SPEAKING else Feature.AUDIO_QA
        with service.write_lock:
            engine.record_attempt(meta.session_id, feature, meta.participant_id, Outcome.SUCCESS)
        return meta.to_dict()

    @app.get("/sessions/{session_id}/recordings")
    def recordings(session_id: str):
        sid = service.resolve_session_id(session_id)
        return [meta.to_dict() for meta in service.audio.list_recordings(sid)]

    # -- metrics and reports ----------------------------------------------------------

    @app.post("/sessions/{session_id}/attempts", status_code=201)
    def mark_attempt(session_id: str, body: dict):
        sid = service.resolve_session_id(session_id)
        feature = _parse_enum(Feature, body.get("feature", ""))
        outcome = _parse_enum(Outcome, body.get("outcome", ""))
        participant_id = str(body.get("participant_id", ""))
        with service.write_lock:
            event = engine.record_attempt(sid, feature, participant_id, outcome)
            return {"seq": event.seq}

    def _report_payload(session_id: str) -> dict:
        events = engine.events_for(session_id)
        records = attempts_from_events(session_id, events)
        rows = session_report(records)
        return {
            "session_id": session_id,
            "rows": [row.to_dict() for row in rows],
            "speaking_durations_s": speaking_durations_from_events(events),
        }

    @app.get("/sessions/{session_id}/report")
    def report(session_id: str):
        return _report_payload(service.resolve_session_id(session_id))

    @app.get("/sessions/{session_id}/report.tsv")
    def report_tsv(session_id: str):
        sid = service.resolve_session_id(session_id)
        events = engine.events_for(sid)
        rows = session_report(attempts_from_events(sid, events))
        return PlainTextResponse(render_table(rows), media_type="text/tab-separated-values")

    # -- event stream -------------------------------------------------------------------

    @app.get("/sessions/{session_id}/events")
    async def event_stream(session_id: str, from_seq: int = 1, max_events: int | None = None):
        """Replay from from_seq, then tail live. max_events bounds the stream
        (handy for curl and for test clients that buffer whole responses)."""
        sid = service.resolve_session_id(session_id)
        current = engine.current_seq(sid)
        engine.events_for(sid)  # raises UnknownSession for bad ids
        if from_seq > current + 1:
            raise SeqAhead(f"stream starts at {from_seq} but log ends at {current}")

        async def generate():
            sent = 0
            next_seq = max(1, from_seq)
            while max_events is None or sent < max_events:
                events = engine.events_for(sid)
                while next_seq <= len(events):
                    event = events[next_seq - 1]
                    yield f"id: {event.seq}\nevent: session\ndata: {event_to_line(event)}\n\n"
                    next_seq = event.seq + 1
                    sent += 1
                    if max_events is not None and sent >= max_events:
                        return
                await asyncio.sleep(SSE_POLL_INTERVAL_S)

        return StreamingResponse(generate(), media_type="text/event-stream")

    # -- memory task -----------------------------------------------------------------------

    @app.post("/memory-task", status_code=201)
    def memory_build(body: dict):
        seed = int(body.get("seed", 0))
        session_ids = body.get("session_ids")
        with service.write_lock:
            task = engine.build_memory_task(seed, session_ids)
            return mutated(
                {
                    "items": [
                        {
                            "index": i,
                            "image": item.image.to_dict(),
                            "true_owner": item.true_owner,
                            "true_theme": item.true_theme,
                        }
                        for i, item in enumerate(task.items)
                    ]
                }
            )

    @app.post("/memory-task/guesses")
    def memory_guess(body: dict):
        with service.write_lock:
            engine.submit_memory_guess(
                str(body.get("participant_id", "")),
                int(body.get("item_index", -1)),
                str(body.get("guessed_owner", "")),
                str(body.get("guessed_theme", "")),
            )
            return mutated()

    @app.get("/memory-task/score/{participant_id}")
    def memory_score(participant_id: str):
        score = engine.score_memory_task(participant_id)
        return {
            "participant_id": participant_id,
            "score": float(score),
            "numerator": score.numerator,
            "denominator": score.denominator,
        }

    # -- media and clock ----------------------------------------------------------------------

    @app.get("/media/{name}")
    def media(name: str):
        safe = Path(name).name
        path = service.images.cache_dir / safe
        if not path.is_file():
            raise NotFound(f"no cached media named {safe!r}")
        return FileResponse(path)

    if service.simulated:

        @app.post("/clock/advance")
        def clock_advance(body: dict):
            seconds = float(body.get("seconds", 0.0))
            clock = service.clock
            assert isinstance(clock, SimulatedClock)
            with service.write_lock:
                clock.advance(seconds)
                transitions = engine.tick(clock.now())
                return mutated({"transitions": [event.to_dict() for event in transitions]})

    return app


def _parse_enum(enum_cls, value):
    try:
        return enum_cls(value)
    except ValueError as exc:
        raise ValidationError(f"bad value {value!r} for {enum_cls.__name__}") from exc


def build_service(**kwargs) -> tuple[Service, FastAPI]:
    service = Service(**kwargs)
    return service, create_app(service)
