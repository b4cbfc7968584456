"""Per-feature attempt bookkeeping and success-rate reports.

Attempts are append-only events in the session log; reports are a pure
function of that log, so replaying a log reproduces its report exactly.
Rates are exact rationals internally and formatted to two decimals only at
the boundary. No partial credit: an attempt either succeeded or it did not.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

from .eventlog import KIND_ATTEMPT, SessionEvent


class Feature(str, Enum):
    REGISTRATION = "registration"
    IMAGE_SEARCH = "image_search"
    AUDIO_SPEAKING = "audio_speaking"
    AUDIO_QA = "audio_qa"
    VOICE_REGISTRATION = "voice_registration"
    VOICE_IMAGE_SEARCH = "voice_image_search"


# Report row order.
FEATURES = (
    Feature.REGISTRATION,
    Feature.IMAGE_SEARCH,
    Feature.AUDIO_SPEAKING,
    Feature.AUDIO_QA,
    Feature.VOICE_REGISTRATION,
    Feature.VOICE_IMAGE_SEARCH,
)


class Outcome(str, Enum):
    SUCCESS = "success"
    FAILURE = "failure"


@dataclass
class AttemptRecord:
    session_id: str
    feature: Feature
    participant_id: str
    outcome: Outcome
    at: float

    def to_payload(self) -> dict:
        return {
            "feature": self.feature.value,
            "participant_id": self.participant_id,
            "outcome": self.outcome.value,
        }

    @classmethod
    def from_event(cls, session_id: str, event: SessionEvent) -> "AttemptRecord":
        payload = event.payload
        return cls(
            session_id=session_id,
            feature=Feature(payload["feature"]),
            participant_id=payload.get("participant_id", ""),
            outcome=Outcome(payload["outcome"]),
            at=event.at,
        )


@dataclass
class FeatureReport:
    feature: Feature
    attempts: int
    successes: int

    @property
    def rate(self) -> Fraction | None:
        if self.attempts == 0:
            return None
        return Fraction(self.successes, self.attempts)

    def rate_percent(self) -> str:
        if self.rate is None:
            return "n/a"
        return f"{float(self.rate) * 100:.2f}"

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.value,
            "attempts": self.attempts,
            "successes": self.successes,
            "rate_percent": self.rate_percent(),
        }


def tally(records: list[AttemptRecord], feature: Feature) -> FeatureReport:
    attempts = 0
    successes = 0
    for record in records:
        if record.feature != feature:
            continue
        attempts += 1
        if record.outcome == Outcome.SUCCESS:
            successes += 1
    return FeatureReport(feature=feature, attempts=attempts, successes=successes)


def session_report(records: list[AttemptRecord]) -> list[FeatureReport]:
    return [tally(records, feature) for feature in FEATURES]


def attempts_from_events(session_id: str, events: list[SessionEvent]) -> list[AttemptRecord]:
    return [
        AttemptRecord.from_event(session_id, event)
        for event in events
        if event.kind == KIND_ATTEMPT
    ]


def speaking_durations_from_events(events: list[SessionEvent]) -> list[float]:
    """Per-slot speaking durations read off the transition trace."""
    durations = []
    start_at: float | None = None
    for event in events:
        if event.name == "speaking_started":
            if start_at is not None:
                durations.append(event.at - start_at)
            start_at = event.at
        elif event.name in ("qa_preparation_started", "qa_started", "session_closed"):
            if start_at is not None:
                durations.append(event.at - start_at)
                start_at = None
    return durations


def render_table(reports: list[FeatureReport], delimiter: str = "\t") -> str:
    """Delimiter-separated export: feature, attempts, rate%."""
    lines = [delimiter.join(("feature", "attempts", "success_rate_percent"))]
    for report in reports:
        lines.append(delimiter.join((report.feature.value, str(report.attempts), report.rate_percent())))
    return "\n".join(lines) + "\n"
