import pytest
from hypothesis import given
from hypothesis import strategies as st

from src.core.types import DataItem, SampleState, request_deletion
from src.recency.compliance import (
    ComplianceReport,
    TranscriptEntry,
    check_compliance,
    retention_deadline,
    transcript_from_states,
)


def item(arrival, offset=0):
    return DataItem(values=(float(arrival),), arrival_round=arrival, offset=offset)


def test_streaming_window_keeps_the_last_m_rounds():
    transcript = [TranscriptEntry(round=t, items=tuple(item(a) for a in range(max(1, t - 2), t + 1))) for t in range(1, 8)]
    report = check_compliance(transcript, 3, "streaming")
    assert report.ok
    assert report.max_staleness == 2
    assert report.rounds_checked == 7


def test_stale_item_is_reported_at_the_round_it_overstays():
    transcript = [TranscriptEntry(round=t, items=(item(3), item(t))) for t in range(3, 9)]
    report = check_compliance(transcript, 4, "streaming")
    assert not report.ok
    # item 3 may stay through round 6
    assert report.violations == ((7, 3), (8, 3))
    assert report.max_staleness == 5


def test_batched_items_expire_with_their_batch():
    transcript = transcript_from_states([
        SampleState(items=(item(1), item(1, 1))),
        SampleState(items=(item(2), item(1))),
    ])
    report = check_compliance(transcript, 10, "batched")
    assert report.violations == ((2, 1),)
    assert report.max_staleness == 2


def test_items_from_the_future_are_violations():
    report = check_compliance([TranscriptEntry(round=2, items=(item(3),))], 5, "streaming")
    assert report.violations == ((2, 3),)


def test_deletion_request_moves_the_deadline_earlier():
    deleted = request_deletion(item(2), round_index=3, window=1)
    assert retention_deadline(deleted, 10, "streaming") == 3
    transcript = [TranscriptEntry(round=t, items=(deleted,)) for t in (2, 3, 4)]
    assert check_compliance(transcript, 10, "streaming").violations == ((4, 2),)


def test_empty_states_are_compliant():
    report = check_compliance([TranscriptEntry(round=1, items=())], 1)
    assert report.ok and report.max_staleness == 0


def test_bad_arguments():
    with pytest.raises(ValueError):
        check_compliance([], 3, "sliding")
    with pytest.raises(ValueError):
        check_compliance([], 0)


def test_report_round_trips_through_a_dict():
    report = ComplianceReport(violations=((7, 3),), max_staleness=4, ok=False, mode="streaming", window=3, rounds_checked=9)
    assert ComplianceReport.from_dict(report.to_dict()) == report


@given(
    m=st.integers(min_value=1, max_value=6),
    arrivals=st.lists(st.lists(st.integers(min_value=1, max_value=30), max_size=5), min_size=1, max_size=30),
)
def test_violations_match_the_window_rule(m, arrivals):
    transcript = [
        TranscriptEntry(round=t, items=tuple(item(a) for a in held))
        for t, held in enumerate(arrivals, start=1)
    ]
    report = check_compliance(transcript, m, "streaming")
    expected = [
        (t, a)
        for t, held in enumerate(arrivals, start=1)
        for a in held
        if not t - m < a <= t
    ]
    assert list(report.violations) == expected
    assert report.ok == (not expected)
