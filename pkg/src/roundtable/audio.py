"""Per-round audio persistence on the file system.

The browser records and uploads; the server stores the bytes verbatim (no
transcoding) in one file per (round, slot) with a human-readable sidecar
metadata file beside it. Uploads stream into a ``.part`` temp file and become
visible atomically at finalize, so a crash mid-upload never leaves a partial
recording in listings. Stale temp files are swept at startup.

Layout: <data_dir>/sessions/<session_id>/audio/<round>-<slot>-<participant>.<ext>
"""

from __future__ import annotations

import json
import logging
import os
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .clock import Clock, WallClock
from .errors import (
    ClockSkew,
    DuplicateRecording,
    EmptyRecording,
    RecordingClosed,
    SlotNotActive,
    UnknownSession,
    ZeroLengthChunk,
)
from .model import Round

logger = logging.getLogger(__name__)

# Stop-late grace before the duration warning fires.
DURATION_GRACE_S = 5.0

_EXTENSIONS = {
    "audio/webm": ".webm",
    "audio/ogg": ".ogg",
    "audio/wav": ".wav",
    "audio/x-wav": ".wav",
    "audio/mpeg": ".mp3",
    "audio/mp4": ".m4a",
}

# Sidecar field order is the wire format; do not reorder.
_META_FIELDS = (
    "session_id",
    "round",
    "slot_index",
    "participant_id",
    "started_at",
    "ended_at",
    "media_type",
    "path",
    "byte_len",
    "finalized",
)


@dataclass
class RecordingMeta:
    session_id: str
    round: Round
    slot_index: int
    participant_id: str
    started_at: float
    ended_at: float
    media_type: str
    path: str  # file name within the session's audio directory
    byte_len: int
    finalized: bool

    def to_dict(self) -> dict:
        data = {name: getattr(self, name) for name in _META_FIELDS}
        data["round"] = self.round.value
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "RecordingMeta":
        return cls(
            session_id=data["session_id"],
            round=Round(data["round"]),
            slot_index=int(data["slot_index"]),
            participant_id=data["participant_id"],
            started_at=float(data["started_at"]),
            ended_at=float(data["ended_at"]),
            media_type=data["media_type"],
            path=data["path"],
            byte_len=int(data["byte_len"]),
            finalized=bool(data["finalized"]),
        )


def meta_to_text(meta: RecordingMeta) -> str:
    return json.dumps(meta.to_dict(), ensure_ascii=False, indent=2) + "\n"


def meta_from_text(text: str) -> RecordingMeta:
    return RecordingMeta.from_dict(json.loads(text))


class RecordingHandle:
    """One open upload; appends are serialized, close happens at finalize."""

    def __init__(self, recording_id: str, meta: RecordingMeta, temp_path: Path,
                 final_path: Path, expected_duration_s: float | None):
        self.recording_id = recording_id
        self.meta = meta
        self.temp_path = temp_path
        self.final_path = final_path
        self.expected_duration_s = expected_duration_s
        self.bytes_written = 0
        self.open = True
        self.lock = threading.Lock()
        self._fh = open(temp_path, "wb")

    def write(self, chunk: bytes) -> int:
        self._fh.write(chunk)
        self._fh.flush()
        self.bytes_written += len(chunk)
        return self.bytes_written

    def close_file(self) -> None:
        self._fh.close()


# Gate asked before opening a recording; wired to the session engine.
SlotGate = Callable[[str, Round, int, str], bool]


class AudioStore:
    def __init__(self, data_dir: str | Path, slot_gate: SlotGate | None = None,
                 clock: Clock | None = None):
        self.data_dir = Path(data_dir)
        self.slot_gate = slot_gate
        self.clock = clock or WallClock()
        self._open: dict[str, RecordingHandle] = {}  # recording_id -> handle
        self._open_slots: set[tuple[str, str, int]] = set()
        self._lock = threading.Lock()
        self._sweep_temp_files()

    def _sweep_temp_files(self) -> None:
        root = self.data_dir / "sessions"
        if not root.is_dir():
            return
        for part in root.glob("*/audio/*.part"):
            logger.warning("removing stale upload %s", part)
            part.unlink()

    def _audio_dir(self, session_id: str) -> Path:
        return self.data_dir / "sessions" / session_id / "audio"

    def begin_recording(
        self,
        session_id: str,
        round: Round,
        slot_index: int,
        participant_id: str,
        media_type: str,
        expected_duration_s: float | None = None,
    ) -> RecordingHandle:
        if self.slot_gate is not None and not self.slot_gate(
            session_id, round, slot_index, participant_id
        ):
            raise SlotNotActive(
                f"{round.value} slot {slot_index} is not the active slot"
            )
        slot_key = (session_id, round.value, slot_index)
        ext = _EXTENSIONS.get(media_type.lower(), ".bin")
        name = f"{round.value}-{slot_index}-{participant_id}{ext}"
        audio_dir = self._audio_dir(session_id)
        audio_dir.mkdir(parents=True, exist_ok=True)
        final_path = audio_dir / name
        with self._lock:
            if slot_key in self._open_slots or final_path.exists():
                raise DuplicateRecording(
                    f"recording already exists for {round.value} slot {slot_index}"
                )
            started_at = self.clock.now()
            meta = RecordingMeta(
                session_id=session_id,
                round=round,
                slot_index=slot_index,
                participant_id=participant_id,
                started_at=started_at,
                ended_at=started_at,
                media_type=media_type,
                path=name,
                byte_len=0,
                finalized=False,
            )
            recording_id = f"{session_id}:{round.value}:{slot_index}"
            handle = RecordingHandle(
                recording_id, meta, audio_dir / f"{name}.part", final_path,
                expected_duration_s,
            )
            self._open[recording_id] = handle
            self._open_slots.add(slot_key)
            return handle

    def append_chunk(self, handle: RecordingHandle, chunk: bytes) -> int:
        if not chunk:
            raise ZeroLengthChunk("refusing empty chunk")
        with handle.lock:
            if not handle.open:
                raise RecordingClosed("recording already finalized")
            return handle.write(chunk)

    def finalize_recording(self, handle: RecordingHandle,
                           ended_at: float | None = None) -> RecordingMeta:
        with handle.lock:
            if not handle.open:
                raise RecordingClosed("recording already finalized")
            if handle.bytes_written == 0:
                raise EmptyRecording("no bytes were uploaded")
            ended = self.clock.now() if ended_at is None else ended_at
            if ended < handle.meta.started_at:
                raise ClockSkew("ended_at precedes started_at")
            handle.open = False
            handle.close_file()
            os.replace(handle.temp_path, handle.final_path)
            handle.meta.ended_at = ended
            handle.meta.byte_len = handle.bytes_written
            handle.meta.finalized = True
            self._write_sidecar(handle.final_path, handle.meta)
        duration = handle.meta.ended_at - handle.meta.started_at
        if (
            handle.expected_duration_s is not None
            and duration > handle.expected_duration_s + DURATION_GRACE_S
        ):
            logger.warning(
                "recording %s ran %.1fs, over the %.0fs slot",
                handle.recording_id, duration, handle.expected_duration_s,
            )
        with self._lock:
            self._open.pop(handle.recording_id, None)
            self._open_slots.discard(
                (handle.meta.session_id, handle.meta.round.value, handle.meta.slot_index)
            )
        return handle.meta

    def _write_sidecar(self, final_path: Path, meta: RecordingMeta) -> None:
        sidecar = final_path.with_name(final_path.name + ".meta")
        tmp = sidecar.with_name(sidecar.name + ".part")
        tmp.write_text(meta_to_text(meta), encoding="utf-8")
        os.replace(tmp, sidecar)

    def open_handle(self, recording_id: str) -> RecordingHandle | None:
        with self._lock:
            return self._open.get(recording_id)

    def abort_recording(self, handle: RecordingHandle) -> None:
        """Drop an open upload; used by crash cleanup paths and tests."""
        with handle.lock:
            if handle.open:
                handle.open = False
                handle.close_file()
                handle.temp_path.unlink(missing_ok=True)
        with self._lock:
            self._open.pop(handle.recording_id, None)
            self._open_slots.discard(
                (handle.meta.session_id, handle.meta.round.value, handle.meta.slot_index)
            )

    def list_recordings(self, session_id: str) -> list[RecordingMeta]:
        """Finalized recordings sorted by (round, slot); open uploads excluded."""
        session_dir = self.data_dir / "sessions" / session_id
        if not session_dir.is_dir():
            raise UnknownSession(f"no such session {session_id!r}")
        audio_dir = session_dir / "audio"
        metas = []
        if audio_dir.is_dir():
            for sidecar in audio_dir.glob("*.meta"):
                metas.append(meta_from_text(sidecar.read_text(encoding="utf-8")))
        order = {Round.SPEAKING: 0, Round.QA: 1}
        metas.sort(key=lambda m: (order[m.round], m.slot_index))
        return metas
