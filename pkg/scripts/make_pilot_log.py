"""Regenerate the bundled pilot-session replay log.

Drives a real engine through the four-participant pilot script (elder
preset) and freezes the resulting event log into
src/roundtable/data/pilot_replay.jsonl. Deterministic: simulated clock, stub
image provider, fixed narrative.

Tallies encoded: registration 4/4, image_search 4/4, audio_speaking 4/4,
audio_qa 4/4, voice_registration 0/8, voice_image_search 6/9.
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

from roundtable.clock import SimulatedClock
from roundtable.engine import SessionEngine
from roundtable.eventlog import event_to_line
from roundtable.images import ImageService
from roundtable.metrics import Feature, Outcome
from roundtable.model import InputSource, SessionConfig

OUT = Path(__file__).resolve().parent.parent / "src" / "roundtable" / "data" / "pilot_replay.jsonl"

HEADER = """\
# Scripted replay of the four-participant pilot session (elder preset:
# 300 s preparation, 90 s speaking slots, 90 s question-and-answer slots).
# Attempt tallies by feature: registration 4/4, image_search 4/4,
# audio_speaking 4/4, audio_qa 4/4, voice_registration 0/8,
# voice_image_search 6/9.
#
# Known deviation: the hand tally sheet for this pilot circulated a 67.50%
# success rate for voice image search, which no integer success count over
# 9 attempts can produce (6/9 = 66.67%, 7/9 = 77.78%). This log encodes the
# observed integer counts; reports over it compute 66.67%.
"""


class StubProvider:
    def search(self, keyword, locale):
        return [f"stub://{locale}/{keyword.replace(' ', '_')}"]

    def fetch(self, source_url):
        return b"\xff\xd8\xff" + source_url.encode()


def main() -> None:
    clock = SimulatedClock()
    workdir = tempfile.mkdtemp(prefix="pilot_log_")
    old_cwd = os.getcwd()
    os.chdir(workdir)  # keeps cache paths in the log relative
    try:
        images = ImageService(StubProvider(), Path("image_cache"), clock=clock)
        config = SessionConfig(
            locale="ja", prep_before_speaking_s=300.0, speaking_slot_s=90.0, qa_slot_s=90.0
        )
        engine = SessionEngine(clock=clock, image_service=images, config=config)
        sid = engine.state.session_id
        captured = []
        engine.add_listener(lambda s, e: captured.append(e) if s == sid else None)

        mark = lambda feature, pid, outcome: engine.record_attempt(sid, feature, pid, outcome)

        # Registration: two failed voice attempts each, then the typed fail-safe.
        engine.open_registration()
        names = [("p1", "Suzuki"), ("p2", "Tanaka"), ("p3", "Sato"), ("p4", "Watanabe")]
        for pid, name in names:
            clock.advance(20)
            mark(Feature.VOICE_REGISTRATION, pid, Outcome.FAILURE)
            clock.advance(15)
            mark(Feature.VOICE_REGISTRATION, pid, Outcome.FAILURE)
            clock.advance(10)
            engine.propose_name(name, InputSource.TYPED)
            clock.advance(5)
            engine.confirm_registration()
        engine.back_to_home()

        theme = engine.add_theme({"en": "favorite food", "ja": "好きな食べ物"})
        clock.advance(10)
        engine.start_session_selection()
        clock.advance(5)
        engine.select_session(theme.titles["ja"])

        # Topic collection. p1 and p2 were recognized by voice; p3 and p4
        # needed voice assistance after failed recognitions; p1 and p4
        # refined their keyword with a second successful search.
        voice_story = {
            "p1": ([Outcome.SUCCESS, Outcome.SUCCESS], InputSource.VOICE),
            "p2": ([Outcome.SUCCESS], InputSource.VOICE),
            "p3": ([Outcome.FAILURE, Outcome.SUCCESS], InputSource.ASSISTED),
            "p4": (
                [Outcome.FAILURE, Outcome.FAILURE, Outcome.SUCCESS, Outcome.SUCCESS],
                InputSource.ASSISTED,
            ),
        }
        keywords = {"p1": "唐揚げ", "p2": "天ぷら", "p3": "寿司", "p4": "ラーメン"}
        for pid in ("p1", "p2", "p3", "p4"):
            outcomes, source = voice_story[pid]
            for outcome in outcomes:
                clock.advance(12)
                mark(Feature.VOICE_IMAGE_SEARCH, pid, outcome)
            clock.advance(8)
            engine.submit_topic(pid, keywords[pid], source)

        # Preparation, then the two rounds; audio is marked per slot.
        clock.advance(120)
        engine.signal_ready()
        for _ in range(4):
            mark(Feature.AUDIO_SPEAKING, engine.current_speaker_id(), Outcome.SUCCESS)
            clock.advance(90)
            engine.tick(clock.now())
        engine.signal_ready()
        for _ in range(4):
            mark(Feature.AUDIO_QA, engine.current_speaker_id(), Outcome.SUCCESS)
            clock.advance(90)
            engine.tick(clock.now())
        engine.finish_session()
    finally:
        os.chdir(old_cwd)

    OUT.parent.mkdir(parents=True, exist_ok=True)
    with open(OUT, "w", encoding="utf-8") as fh:
        fh.write(HEADER)
        for event in captured:
            fh.write(event_to_line(event) + "\n")
    print(f"wrote {len(captured)} events to {OUT}")


if __name__ == "__main__":
    main()
