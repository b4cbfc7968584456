from __future__ import annotations

import pytest

from roundtable.clock import SimulatedClock
from roundtable.engine import SessionEngine
from roundtable.images import ImageService
from roundtable.model import InputSource, SessionConfig

JPEG_MAGIC = b"\xff\xd8\xff"
PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def jpeg_bytes(tag: str) -> bytes:
    """Unique, sniffable fake JPEG payload."""
    return JPEG_MAGIC + tag.encode("utf-8") + b"\x00" * 32


def make_fixture_tree(root, mapping: dict[tuple[str, str], list[bytes]]):
    """mapping: (locale, normalized_keyword) -> ranked payloads (1.jpg, 2.jpg, ...)."""
    for (locale, keyword), payloads in mapping.items():
        folder = root / locale / keyword
        folder.mkdir(parents=True, exist_ok=True)
        for rank, payload in enumerate(payloads, start=1):
            (folder / f"{rank}.jpg").write_bytes(payload)
    return root


class StubProvider:
    """Always succeeds; counts calls so cache behavior is observable."""

    def __init__(self):
        self.search_calls = 0
        self.fetch_calls = 0

    def search(self, keyword, locale):
        self.search_calls += 1
        return [f"stub://{locale}/{keyword.replace(' ', '_')}"]

    def fetch(self, source_url):
        self.fetch_calls += 1
        return jpeg_bytes(source_url)


class NullImageService:
    """Always-succeeding image service that never touches the disk.

    For state-machine tests where only the engine's transitions matter.
    """

    def __init__(self, clock):
        self.clock = clock

    def search_top_image(self, keyword, locale):
        from roundtable.model import ImageRef

        return ImageRef(
            source_url=f"stub://{locale}/{keyword.replace(' ', '_')}",
            local_path="<memory>",
            query=keyword,
            provider="fixture",
            fetched_at=self.clock.now(),
        )

    def attach_manual_image(self, query, payload):
        from roundtable.model import ImageRef

        return ImageRef(
            source_url="manual://upload",
            local_path="<memory>",
            query=query,
            provider="manual",
            fetched_at=self.clock.now(),
        )


@pytest.fixture
def sim_clock():
    return SimulatedClock()


@pytest.fixture
def stub_images(tmp_path, sim_clock):
    return ImageService(StubProvider(), tmp_path / "cache", clock=sim_clock)


@pytest.fixture
def engine(sim_clock, stub_images):
    return SessionEngine(clock=sim_clock, image_service=stub_images, config=SessionConfig())


def register_four(engine, names=("Suzuki", "Tanaka", "Sato", "Watanabe")):
    engine.open_registration()
    for name in names:
        engine.propose_name(name, InputSource.TYPED)
        engine.confirm_registration()
    engine.back_to_home()
    return list(engine.participants)


def start_themed_session(engine, title_en="favorite food", title_ja="好きな食べ物"):
    theme = engine.add_theme({"en": title_en, "ja": title_ja})
    engine.start_session_selection()
    engine.select_session(theme.titles[engine.config.locale])
    return theme


def collect_topics(engine, keywords=("fried chicken", "tempura", "sushi", "ramen")):
    for pid, keyword in zip(list(engine.state.roster), keywords):
        engine.submit_topic(pid, keyword, InputSource.TYPED)


def pytest_terminal_summary(terminalreporter):
    """One pass/fail line per acceptance criterion at the end of the run."""
    lines = []
    for status in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(status, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance" not in nodeid or getattr(report, "when", "call") != "call":
                continue
            name = nodeid.split("::")[-1]
            verdict = "PASS" if status == "passed" else "FAIL"
            lines.append(f"ACCEPTANCE {name}: {verdict}")
    if lines:
        terminalreporter.write_line("")
        for line in sorted(lines):
            terminalreporter.write_line(line)
