"""Append-only session event logs: one file per session, one event per line."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

KIND_TRANSITION = "transition"
KIND_TIMER = "timer"
KIND_ATTEMPT = "attempt"


@dataclass
class SessionEvent:
    seq: int
    at: float
    kind: str  # transition | timer | attempt
    name: str
    payload: dict

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "at": self.at,
            "kind": self.kind,
            "name": self.name,
            "payload": self.payload,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SessionEvent":
        return cls(
            seq=int(data["seq"]),
            at=float(data["at"]),
            kind=str(data["kind"]),
            name=str(data["name"]),
            payload=dict(data.get("payload") or {}),
        )


def event_to_line(event: SessionEvent) -> str:
    return json.dumps(event.to_dict(), ensure_ascii=False, separators=(",", ":"))


def line_to_event(line: str) -> SessionEvent:
    return SessionEvent.from_dict(json.loads(line))


def read_events(path: str | Path) -> list[SessionEvent]:
    """Load a whole event log; blank lines and # comment lines are skipped."""
    events = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            events.append(line_to_event(line))
    return events


class SessionLogWriter:
    """Appends events for one session to its log file, fsync-free but flushed."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "a", encoding="utf-8")

    def append(self, event: SessionEvent) -> None:
        self._fh.write(event_to_line(event) + "\n")
        self._fh.flush()

    def append_all(self, events: Iterable[SessionEvent]) -> None:
        for event in events:
            self.append(event)

    def close(self) -> None:
        self._fh.close()


class EventJournal:
    """Directory of per-session logs under <data_dir>/sessions/<id>/events.jsonl."""

    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        self._writers: dict[str, SessionLogWriter] = {}

    def session_dir(self, session_id: str) -> Path:
        return self.data_dir / "sessions" / session_id

    def log_path(self, session_id: str) -> Path:
        return self.session_dir(session_id) / "events.jsonl"

    def writer(self, session_id: str) -> SessionLogWriter:
        writer = self._writers.get(session_id)
        if writer is None:
            writer = SessionLogWriter(self.log_path(session_id))
            self._writers[session_id] = writer
        return writer

    def append(self, session_id: str, event: SessionEvent) -> None:
        self.writer(session_id).append(event)

    def read(self, session_id: str) -> list[SessionEvent]:
        path = self.log_path(session_id)
        if not path.exists():
            return []
        return read_events(path)

    def known_sessions(self) -> Iterator[str]:
        root = self.data_dir / "sessions"
        if not root.is_dir():
            return iter(())
        return iter(sorted(os.listdir(root)))

    def close(self) -> None:
        for writer in self._writers.values():
            writer.close()
        self._writers.clear()
