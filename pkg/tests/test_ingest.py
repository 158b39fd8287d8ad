import pytest
from hypothesis import given
from hypothesis import strategies as st

from serpstudy.ingest import (
    LogEvent,
    LogParseError,
    SessionBuildError,
    SessionRecord,
    build_sessions,
    extract_queries,
    parse_log_stream,
    serialize_event,
    session_stats,
)
from tests.conftest import log_line


def test_single_task_start_line():
    result = parse_log_stream([log_line(10, "p1", "t1", "task_start")])
    assert len(result.events) == 1
    assert result.events[0].kind == "task_start"
    assert result.rejects == []


def test_click_missing_url_rejected():
    line = log_line(10, "p1", "t1", "click", engine_id="g", query_text="q")
    result = parse_log_stream([line], max_reject_rate=1.0)
    assert result.events == []
    assert len(result.rejects) == 1
    assert "url required for click" in result.rejects[0].reason


def test_default_threshold_rejects_hard():
    with pytest.raises(LogParseError, match="reject rate"):
        parse_log_stream(["not json"])


SIX_LINES = [
    log_line(0, "p1", "t1", "task_start"),
    log_line(5, "p1", "t1", "query", engine_id="g", query_text="q1"),
    log_line(9, "p1", "t1", "query", engine_id="g", query_text="q2"),
    log_line(12, "p1", "t1", "click", engine_id="g", query_text="q1",
             url="https://a.example/x", serp_rank=1),
    log_line(15, "p1", "t1", "click", engine_id="g", query_text="q2",
             url="https://a.example/y", serp_rank=3),
    log_line(20, "p1", "t1", "task_end"),
]


def test_six_line_fixture_preserves_order():
    result = parse_log_stream(SIX_LINES)
    assert [e.kind for e in result.events] == [
        "task_start", "query", "query", "click", "click", "task_end"]
    assert [e.timestamp for e in result.events] == [0, 5, 9, 12, 15, 20]


def test_build_session_from_fixture():
    events = parse_log_stream(SIX_LINES).events
    built = build_sessions(events)
    assert len(built.sessions) == 1
    s = built.sessions[0]
    assert (s.start, s.end) == (0, 20)
    assert [q.query_text for q in s.queries] == ["q1", "q2"]
    assert [c.serp_rank for c in s.clicks] == [1, 3]
    assert built.orphans == []


def test_empty_session():
    built = build_sessions([
        LogEvent(100, "p1", "t1", "task_start"),
        LogEvent(400, "p1", "t1", "task_end"),
    ])
    s = built.sessions[0]
    assert s.queries == () and s.clicks == ()
    assert session_stats(s).time_effort_seconds == pytest.approx(0.3)


def test_query_dedup_keeps_first_timestamp():
    built = build_sessions([
        LogEvent(0, "p1", "t1", "task_start"),
        LogEvent(5, "p1", "t1", "query", engine_id="g", query_text="q1"),
        LogEvent(9, "p1", "t1", "query", engine_id="g", query_text="q1"),
        LogEvent(20, "p1", "t1", "task_end"),
    ])
    assert len(built.sessions[0].queries) == 1
    assert built.sessions[0].queries[0].first_seen == 5


def test_interleaved_participants_and_tasks():
    # 2 participants x 2 tasks, events interleaved across sessions.
    events = []
    specs = [("p1", "t1", 0), ("p2", "t1", 2), ("p1", "t2", 4), ("p2", "t2", 6)]
    for participant, task, base in specs:
        events.append(LogEvent(base * 100, participant, task, "task_start"))
        events.append(LogEvent(base * 100 + 10, participant, task, "query",
                               engine_id="g", query_text=f"{participant}-{task}-q"))
        events.append(LogEvent(base * 100 + 50, participant, task, "task_end"))
    # interleave deterministically
    events.sort(key=lambda e: e.timestamp % 7)
    built = build_sessions(events)
    assert len(built.sessions) == 4
    for participant, task, base in specs:
        s = next(x for x in built.sessions
                 if (x.participant_id, x.task_id) == (participant, task))
        assert (s.start, s.end) == (base * 100, base * 100 + 50)
        assert s.queries[0].query_text == f"{participant}-{task}-q"


def test_missing_end_is_error():
    with pytest.raises(SessionBuildError, match=r"\(p1, t1\)"):
        build_sessions([LogEvent(0, "p1", "t1", "task_start")])


def test_click_on_unseen_query_is_error():
    with pytest.raises(SessionBuildError, match="unseen query"):
        build_sessions([
            LogEvent(0, "p1", "t1", "task_start"),
            LogEvent(5, "p1", "t1", "click", engine_id="g", query_text="ghost",
                     url="https://a.example/x"),
            LogEvent(9, "p1", "t1", "task_end"),
        ])


def test_events_outside_window_reported_not_errors():
    built = build_sessions([
        LogEvent(100, "p1", "t1", "task_start"),
        LogEvent(50, "p1", "t1", "page_view", url="https://early.example/"),
        LogEvent(200, "p1", "t1", "task_end"),
    ])
    assert len(built.orphans) == 1
    assert built.sessions[0].visited_pages == ()


def _session(queries, clicked_texts=(), participant="p1", task="t1"):
    from serpstudy.ingest import ClickRecord, QueryRecord

    return SessionRecord(
        participant_id=participant, task_id=task, start=0, end=60_000,
        queries=tuple(QueryRecord("g", q, i) for i, q in enumerate(queries)),
        clicks=tuple(ClickRecord(f"https://e.example/{q}", 1, "g", q, 10)
                     for q in clicked_texts),
        visited_pages=(),
    )


def test_extract_queries_no_truncation():
    s = _session(["q1", "q2"])
    assert [q.query_text for q in extract_queries(s, 3)] == ["q1", "q2"]


def test_extract_queries_clicked_first():
    s = _session(["q1", "q2", "q3", "q4", "q5"], clicked_texts=["q3", "q5"])
    assert [q.query_text for q in extract_queries(s, 3)] == ["q3", "q5", "q1"]


def test_extract_queries_empty():
    assert extract_queries(_session([]), 3) == []


def test_extract_queries_matches_brute_force():
    # Brute force restatement of the rule: stable partition by clickedness.
    s = _session([f"q{i}" for i in range(8)], clicked_texts=["q6", "q2", "q4"])
    clicked = {(c.engine_id, c.query_text) for c in s.clicks}
    expected = sorted(
        s.queries,
        key=lambda q: (0 if (q.engine_id, q.query_text) in clicked else 1, q.first_seen),
    )[:4]
    assert extract_queries(s, 4) == expected


def test_session_stats_table_scale():
    s = SessionRecord("p1", "t1", 0, 157_130, (), (), ())
    assert session_stats(s).time_effort_seconds == pytest.approx(157.13)


def test_session_stats_counts():
    s = _session(["a", "b", "c"], clicked_texts=["a", "a", "b", "c", "c"])
    stats = session_stats(s)
    assert (stats.time_effort_seconds, stats.query_count, stats.click_count) == (60.0, 3, 5)


_event_strategy = st.builds(
    LogEvent,
    timestamp=st.integers(min_value=0, max_value=2**40),
    participant_id=st.text(min_size=1, max_size=8),
    task_id=st.text(min_size=1, max_size=8),
    kind=st.just("query"),
    engine_id=st.text(min_size=1, max_size=8),
    query_text=st.text(min_size=1, max_size=20),
)


@given(_event_strategy)
def test_serialize_parse_round_trip(event):
    parsed = parse_log_stream([serialize_event(event)])
    assert parsed.events == [event]


@given(st.lists(st.tuples(st.sampled_from(["p1", "p2"]), st.sampled_from(["t1", "t2"]),
                          st.sampled_from(["qa", "qb", "qc"])), max_size=12))
def test_query_count_matches_distinct_tuples(query_specs):
    events = []
    for participant, task in {("p1", "t1"), ("p1", "t2"), ("p2", "t1"), ("p2", "t2")}:
        events.append(LogEvent(0, participant, task, "task_start"))
        events.append(LogEvent(10**9, participant, task, "task_end"))
    for i, (participant, task, q) in enumerate(query_specs):
        events.append(LogEvent(1 + i, participant, task, "query",
                               engine_id="g", query_text=q))
    built = build_sessions(events)
    total = sum(len(s.queries) for s in built.sessions)
    assert total == len({(p, t, "g", q) for p, t, q in query_specs})
