"""Locale-aware interpretation of recognized utterance text.

Two jobs: map an utterance onto a protocol command (exact match after
normalization, never fuzzy), and extract the content keyword from polite
full-sentence responses ("I like fried chicken", "てんぷらです") so that name
and topic entry survive how people actually talk to the system.

Locale packs are data files, not code: facilitators can add surface forms and
politeness patterns without a rebuild.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

from .errors import EmptyUtterance, IncompletePack, MissingLocale

LOCALES_DIR = Path(__file__).parent / "locales"

# Canonical protocol commands every pack must cover.
REQUIRED_COMMANDS = ("register", "session", "confirm", "back")

# Screen-label inventory: home menu, registration + confirmation, session
# selection, topic/image screen, both preparations, both rounds, closing.
REQUIRED_LABELS = (
    "home_title",
    "home_register_option",
    "home_session_option",
    "registration_prompt",
    "confirm_prompt",
    "save_button",
    "back_button",
    "session_select_prompt",
    "topic_prompt",
    "preparation_title",
    "ready_button",
    "speaking_title",
    "qa_preparation_title",
    "qa_title",
    "closing_message",
    "typed_fallback_hint",
    "timer_label",
    "speaker_label",
    "theme_label",
    "topic_label",
)

STRIP_CONTEXTS = ("name", "topic")


class CommandKind(str, Enum):
    REGISTER = "register"
    START_SESSION = "start_session"
    CONFIRM = "confirm"
    BACK = "back"
    SELECT_THEME = "select_theme"
    FREE_TEXT = "free_text"
    NO_MATCH = "no_match"


_PACK_KEY_TO_KIND = {
    "register": CommandKind.REGISTER,
    "session": CommandKind.START_SESSION,
    "confirm": CommandKind.CONFIRM,
    "back": CommandKind.BACK,
}


@dataclass
class Command:
    kind: CommandKind
    payload: str = ""  # theme id for SELECT_THEME, raw text for FREE_TEXT


class MatchContext(str, Enum):
    """Where the utterance was heard; decides whether free text is content."""

    HOME = "home"
    NAME_ENTRY = "name_entry"
    CONFIRM = "confirm"
    SESSION_SELECTION = "session_selection"
    TOPIC_ENTRY = "topic_entry"
    OTHER = "other"


CONTENT_CONTEXTS = (MatchContext.NAME_ENTRY, MatchContext.TOPIC_ENTRY)


@dataclass
class StripPattern:
    position: str  # "prefix" | "suffix"
    text: str  # normalized surface text


@dataclass
class LocalePack:
    locale: str
    commands: dict[str, list[str]]  # canonical command -> surface forms
    labels: dict[str, str]
    strip_patterns: dict[str, list[StripPattern]]  # context -> ordered patterns
    _surface_index: dict[str, str] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self._surface_index = {}
        for key, forms in self.commands.items():
            for form in forms:
                self._surface_index.setdefault(form, key)

    def command_for_surface(self, normalized: str) -> str | None:
        return self._surface_index.get(normalized)


def normalize(utterance: str) -> str:
    """NFKC fold + casefold + whitespace collapse; applied to both sides of every match."""
    folded = unicodedata.normalize("NFKC", utterance).casefold()
    return " ".join(folded.split())


def match_command(
    utterance: str,
    pack: LocalePack,
    context: MatchContext,
    themes: Sequence[tuple[str, str]] = (),
) -> Command:
    """Interpret an utterance; NoMatch is a value, never an error.

    ``themes`` supplies (theme_id, title-in-this-locale) pairs for session
    selection. Command surface forms win over theme titles and free text.
    """
    normalized = normalize(utterance)
    if not normalized:
        return Command(CommandKind.NO_MATCH)

    key = pack.command_for_surface(normalized)
    if key is not None:
        return Command(_PACK_KEY_TO_KIND[key])

    if context == MatchContext.SESSION_SELECTION:
        for theme_id, title in themes:
            if normalize(title) == normalized:
                return Command(CommandKind.SELECT_THEME, payload=theme_id)

    if context in CONTENT_CONTEXTS:
        return Command(CommandKind.FREE_TEXT, payload=utterance.strip())

    return Command(CommandKind.NO_MATCH)


def _is_wordy(ch: str) -> bool:
    # ASCII letters/digits need a space boundary; kana/kanji patterns do not.
    return ch.isascii() and ch.isalnum()


def _strip_prefix(text: str, pattern: str) -> str | None:
    if len(text) <= len(pattern):
        return None
    if text[: len(pattern)].casefold() != pattern:
        return None
    if _is_wordy(pattern[-1]) and not text[len(pattern)].isspace():
        return None
    remainder = text[len(pattern):].strip()
    return remainder or None


def _strip_suffix(text: str, pattern: str) -> str | None:
    if len(text) <= len(pattern):
        return None
    if text[-len(pattern):].casefold() != pattern:
        return None
    if _is_wordy(pattern[0]) and not text[-len(pattern) - 1].isspace():
        return None
    remainder = text[: -len(pattern)].strip()
    return remainder or None


def extract_keyword(utterance: str, pack: LocalePack, context: str) -> str:
    """Strip one polite prefix and one polite suffix, keeping original casing.

    At most one pattern application per side per call, so repeated calls do
    not over-strip. Never returns an empty string: if stripping would empty
    the utterance, the trimmed original comes back instead.
    """
    if context not in STRIP_CONTEXTS:
        raise ValueError(f"unknown strip context {context!r}")
    original = utterance.strip()
    if not original:
        raise EmptyUtterance("utterance is empty")

    patterns = pack.strip_patterns.get(context, [])
    result = original
    for pattern in patterns:
        if pattern.position != "prefix":
            continue
        stripped = _strip_prefix(result, pattern.text)
        if stripped is not None:
            result = stripped
            break
    for pattern in patterns:
        if pattern.position != "suffix":
            continue
        stripped = _strip_suffix(result, pattern.text)
        if stripped is not None:
            result = stripped
            break
    return result


# -- pack file format ---------------------------------------------------------
#
# UTF-8, INI-like, three sections:
#
#   [commands]       key = comma-separated surface forms
#   [labels]         key = label text
#   [strip_patterns] key (name|topic) = comma-separated prefix:... / suffix:...
#
# serialize_pack() is the canonical form; load(serialize(load(f))) must equal
# load(f) and re-serializing is byte-stable.

_SECTIONS = ("commands", "labels", "strip_patterns")


def parse_pack(text: str, locale: str) -> LocalePack:
    commands: dict[str, list[str]] = {}
    labels: dict[str, str] = {}
    strip_patterns: dict[str, list[StripPattern]] = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SECTIONS:
                raise IncompletePack(f"{locale}: unknown section [{section}] at line {lineno}")
            continue
        if section is None or "=" not in line:
            raise IncompletePack(f"{locale}: stray line {lineno}: {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if section == "commands":
            forms = [normalize(v) for v in value.split(",") if v.strip()]
            commands[key] = forms
        elif section == "labels":
            labels[key] = value
        else:
            patterns = []
            for item in value.split(","):
                item = item.strip()
                if not item:
                    continue
                position, _, surface = item.partition(":")
                if position not in ("prefix", "suffix") or not surface:
                    raise IncompletePack(
                        f"{locale}: bad strip pattern {item!r} at line {lineno}"
                    )
                patterns.append(StripPattern(position=position, text=normalize(surface)))
            strip_patterns[key] = patterns
    pack = LocalePack(locale=locale, commands=commands, labels=labels, strip_patterns=strip_patterns)
    validate_pack(pack)
    return pack


def serialize_pack(pack: LocalePack) -> str:
    lines = ["[commands]"]
    for key, forms in pack.commands.items():
        lines.append(f"{key} = {', '.join(forms)}")
    lines.append("")
    lines.append("[labels]")
    for key, value in pack.labels.items():
        lines.append(f"{key} = {value}")
    lines.append("")
    lines.append("[strip_patterns]")
    for key, patterns in pack.strip_patterns.items():
        rendered = ", ".join(f"{p.position}:{p.text}" for p in patterns)
        lines.append(f"{key} = {rendered}")
    lines.append("")
    return "\n".join(lines)


def validate_pack(pack: LocalePack) -> None:
    for command in REQUIRED_COMMANDS:
        if not pack.commands.get(command):
            raise IncompletePack(f"{pack.locale}: command {command!r} has no surface forms")
    for label in REQUIRED_LABELS:
        if label not in pack.labels:
            raise IncompletePack(f"{pack.locale}: missing label {label!r}")
    for context in pack.strip_patterns:
        if context not in STRIP_CONTEXTS:
            raise IncompletePack(f"{pack.locale}: unknown strip context {context!r}")


def load_locale_pack(locale: str, search_dir: str | Path | None = None) -> LocalePack:
    directory = Path(search_dir) if search_dir else LOCALES_DIR
    path = directory / f"{locale}.pack"
    if not path.is_file():
        raise MissingLocale(f"no locale pack for {locale!r} in {directory}")
    return parse_pack(path.read_text(encoding="utf-8"), locale)


def available_locales(search_dir: str | Path | None = None) -> list[str]:
    directory = Path(search_dir) if search_dir else LOCALES_DIR
    return sorted(p.stem for p in directory.glob("*.pack"))
