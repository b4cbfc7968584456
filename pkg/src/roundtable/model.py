"""Domain types for the session protocol.

A program is a series of themed sessions. Within one session the engine walks
participants through topic collection, an optional timed preparation, one
timed speaking slot per participant, an untimed (by default) second
preparation, and one timed question-and-answer slot per participant. The
fifth-session memory quiz draws on the images of completed sessions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .errors import InvalidDuration


class Phase(str, Enum):
    HOME = "home"
    REGISTRATION = "registration"
    SESSION_SELECTION = "session_selection"
    TOPIC_COLLECTION = "topic_collection"
    PREPARATION = "preparation"
    SPEAKING = "speaking"
    QA_PREPARATION = "qa_preparation"
    QA = "qa"
    CLOSING = "closing"


class InputSource(str, Enum):
    VOICE = "voice"
    TYPED = "typed"
    ASSISTED = "assisted"


class Round(str, Enum):
    SPEAKING = "speaking"
    QA = "qa"


@dataclass
class Participant:
    id: str
    display_name: str
    active: bool
    registered_via: InputSource
    seat_order: int


@dataclass
class Theme:
    id: str
    titles: dict[str, str]  # locale -> title, every supported locale present
    active: bool = True


@dataclass
class ImageRef:
    source_url: str
    local_path: str
    query: str
    provider: str  # live | fixture | manual
    fetched_at: float

    def to_dict(self) -> dict:
        return {
            "source_url": self.source_url,
            "local_path": self.local_path,
            "query": self.query,
            "provider": self.provider,
            "fetched_at": self.fetched_at,
        }


@dataclass
class Topic:
    participant_id: str
    keyword: str
    image: ImageRef | None
    source: InputSource

    def to_dict(self) -> dict:
        return {
            "participant_id": self.participant_id,
            "keyword": self.keyword,
            "image": self.image.to_dict() if self.image else None,
            "source": self.source.value,
        }


SUPPORTED_LOCALES = ("en", "ja")


@dataclass
class SessionConfig:
    locale: str = "en"
    prep_before_speaking_s: float | None = 300.0
    speaking_slot_s: float = 90.0
    qa_slot_s: float = 90.0
    qa_prep_timed: bool = False

    def validate(self) -> None:
        if self.locale not in SUPPORTED_LOCALES:
            raise InvalidDuration(f"unsupported locale {self.locale!r}")
        if self.speaking_slot_s <= 0:
            raise InvalidDuration("speaking_slot_s must be > 0")
        if self.qa_slot_s <= 0:
            raise InvalidDuration("qa_slot_s must be > 0")
        if self.prep_before_speaking_s is not None and self.prep_before_speaking_s < 0:
            raise InvalidDuration("prep_before_speaking_s must be >= 0 or absent")
        if self.qa_prep_timed and self.prep_before_speaking_s is None:
            # Timed QA preparation borrows the speaking-prep cap, so it needs one.
            raise InvalidDuration("qa_prep_timed requires prep_before_speaking_s")

    def to_dict(self) -> dict:
        return {
            "locale": self.locale,
            "prep_before_speaking_s": self.prep_before_speaking_s,
            "speaking_slot_s": self.speaking_slot_s,
            "qa_slot_s": self.qa_slot_s,
            "qa_prep_timed": self.qa_prep_timed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SessionConfig":
        cfg = cls(
            locale=data.get("locale", "en"),
            prep_before_speaking_s=data.get("prep_before_speaking_s"),
            speaking_slot_s=data.get("speaking_slot_s", 90.0),
            qa_slot_s=data.get("qa_slot_s", 90.0),
            qa_prep_timed=bool(data.get("qa_prep_timed", False)),
        )
        cfg.validate()
        return cfg


# Longer rounds suit practiced speakers; no preparation phase before speaking.
PRESET_TRIAL_RUN = SessionConfig(
    locale="en",
    prep_before_speaking_s=None,
    speaking_slot_s=300.0,
    qa_slot_s=300.0,
    qa_prep_timed=False,
)

# Short rounds with a capped thinking period before the speaking round.
PRESET_ELDER_CARE = SessionConfig(
    locale="ja",
    prep_before_speaking_s=300.0,
    speaking_slot_s=90.0,
    qa_slot_s=90.0,
    qa_prep_timed=False,
)


@dataclass
class SessionRecord:
    """A finished themed session, kept for reporting and the memory quiz."""

    session_id: str
    theme_id: str
    theme_titles: dict[str, str]
    topics: dict[str, Topic]  # participant_id -> confirmed topic
    completed_at: float


@dataclass
class MemoryItem:
    image: ImageRef
    true_owner: str  # participant_id
    true_theme: str  # theme_id


@dataclass
class MemoryGuess:
    guessed_owner: str
    guessed_theme: str


@dataclass
class MemoryTask:
    items: list[MemoryItem]
    seed: int
    guesses: dict[str, list[MemoryGuess | None]] = field(default_factory=dict)

    def guesses_for(self, participant_id: str) -> list[MemoryGuess | None]:
        return self.guesses.setdefault(participant_id, [None] * len(self.items))
