from __future__ import annotations

import random
from fractions import Fraction
from pathlib import Path

import roundtable
from roundtable.eventlog import read_events
from roundtable.metrics import (
    FEATURES,
    AttemptRecord,
    Feature,
    Outcome,
    attempts_from_events,
    render_table,
    session_report,
    speaking_durations_from_events,
    tally,
)

PILOT_LOG = Path(roundtable.__file__).parent / "data" / "pilot_replay.jsonl"


def make_record(feature, outcome, pid="p1", at=0.0):
    return AttemptRecord(
        session_id="s", feature=feature, participant_id=pid, outcome=outcome, at=at
    )


def brute_force_tally(records, feature):
    """Independent recount: no shared code with the implementation."""
    rows = [r for r in records if r.feature == feature]
    wins = [r for r in rows if r.outcome == Outcome.SUCCESS]
    return len(rows), len(wins)


class TestTally:
    def test_perfect_feature(self):
        records = [make_record(Feature.REGISTRATION, Outcome.SUCCESS) for _ in range(4)]
        report = tally(records, Feature.REGISTRATION)
        assert (report.attempts, report.successes) == (4, 4)
        assert report.rate == Fraction(1)
        assert report.rate_percent() == "100.00"

    def test_total_failure(self):
        records = [make_record(Feature.VOICE_REGISTRATION, Outcome.FAILURE) for _ in range(8)]
        report = tally(records, Feature.VOICE_REGISTRATION)
        assert report.rate == Fraction(0)
        assert report.rate_percent() == "0.00"

    def test_exact_rational_two_thirds(self):
        records = [
            make_record(Feature.VOICE_IMAGE_SEARCH, Outcome.SUCCESS) for _ in range(6)
        ] + [make_record(Feature.VOICE_IMAGE_SEARCH, Outcome.FAILURE) for _ in range(3)]
        report = tally(records, Feature.VOICE_IMAGE_SEARCH)
        assert report.rate == Fraction(6, 9) == Fraction(2, 3)
        assert report.rate_percent() == "66.67"

    def test_no_attempts_is_na_never_divided(self):
        report = tally([], Feature.IMAGE_SEARCH)
        assert report.rate is None
        assert report.rate_percent() == "n/a"

    def test_matches_brute_force_on_random_logs(self):
        rng = random.Random(4242)
        for _ in range(200):
            records = [
                make_record(rng.choice(FEATURES), rng.choice(list(Outcome)), f"p{rng.randint(1, 4)}")
                for _ in range(rng.randint(0, 40))
            ]
            for feature in FEATURES:
                report = tally(records, feature)
                assert (report.attempts, report.successes) == brute_force_tally(records, feature)

    def test_monotonicity(self):
        rng = random.Random(7)
        records = [
            make_record(Feature.IMAGE_SEARCH, rng.choice(list(Outcome))) for _ in range(10)
        ]
        base = tally(records, Feature.IMAGE_SEARCH).rate
        with_success = tally(
            records + [make_record(Feature.IMAGE_SEARCH, Outcome.SUCCESS)], Feature.IMAGE_SEARCH
        ).rate
        with_failure = tally(
            records + [make_record(Feature.IMAGE_SEARCH, Outcome.FAILURE)], Feature.IMAGE_SEARCH
        ).rate
        assert with_success >= base
        assert with_failure <= base


class TestSessionReport:
    def test_six_rows_in_fixed_order(self):
        rows = session_report([])
        assert [row.feature for row in rows] == list(FEATURES)
        assert all(row.rate_percent() == "n/a" for row in rows)

    def test_report_is_pure_function_of_log(self):
        events = read_events(PILOT_LOG)
        first = session_report(attempts_from_events("pilot", events))
        second = session_report(attempts_from_events("pilot", events))
        assert [row.to_dict() for row in first] == [row.to_dict() for row in second]

    def test_pilot_log_counts(self):
        events = read_events(PILOT_LOG)
        rows = session_report(attempts_from_events("pilot", events))
        assert [row.attempts for row in rows] == [4, 4, 4, 4, 8, 9]
        assert [row.successes for row in rows] == [4, 4, 4, 4, 0, 6]

    def test_pilot_log_speaking_durations(self):
        events = read_events(PILOT_LOG)
        assert speaking_durations_from_events(events) == [90.0, 90.0, 90.0, 90.0]


class TestExport:
    def test_render_table_shape(self):
        records = [make_record(Feature.REGISTRATION, Outcome.SUCCESS)]
        text = render_table(session_report(records))
        lines = text.strip().split("\n")
        assert lines[0] == "feature\tattempts\tsuccess_rate_percent"
        assert len(lines) == 7
        assert lines[1] == "registration\t1\t100.00"
        assert lines[5] == "voice_registration\t0\tn/a"
