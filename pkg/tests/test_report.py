import json

import pytest

from serpstudy.ingest import ClickRecord, QueryRecord, SessionRecord
from serpstudy.report import (
    METRIC_NAMES,
    build_ranked_lists,
    build_report,
    parse_predicate,
    report_to_record,
    write_report_files,
)
from serpstudy.serp import ResultBatch, SerpResult


def _query(participant, task):
    return f"{task} by {participant}"


def _session(participant, task, start, end, click_rank=None):
    q = _query(participant, task)
    clicks = ()
    if click_rank is not None:
        clicks = (ClickRecord(f"https://alpha.example/{q}/{click_rank}",
                              click_rank, "alpha", q, start + 1),)
    return SessionRecord(
        participant_id=participant, task_id=task, start=start, end=end,
        queries=(QueryRecord("alpha", q, start),), clicks=clicks, visited_pages=())


def _sessions():
    # time effort: simple 100s / 200s, complex 300s / 500s
    return [
        _session("p1", "t-simple", 0, 100_000, click_rank=1),
        _session("p2", "t-simple", 0, 200_000),
        _session("p1", "t-complex", 0, 300_000, click_rank=2),
        _session("p2", "t-complex", 0, 500_000),
    ]


def _batch(sessions):
    results = []
    for s in sessions:
        q = _query(s.participant_id, s.task_id)
        for engine in ("alpha", "beta"):
            for rank in range(1, 4):
                results.append(SerpResult(engine, q, rank,
                                          f"https://{engine}.example/{q}/{rank}",
                                          f"t{rank}", f"s{rank}"))
    return ResultBatch(study_id="demo", results=results)


# alpha judged [True, True, False], beta judged [False, True, False], everywhere
_BINARIES = {"alpha": [True, True, False], "beta": [False, True, False]}
_GRADEDS = {"alpha": [5, 4, 1], "beta": [1, 4, 2]}


def _export(sessions):
    rows = []
    for s in sessions:
        q = _query(s.participant_id, s.task_id)
        for engine in ("alpha", "beta"):
            for rank in range(1, 4):
                rows.append({
                    "participant_id": s.participant_id, "task_id": s.task_id,
                    "engine_id": engine, "query_text": q, "rank": rank,
                    "binary": _BINARIES[engine][rank - 1],
                    "graded": _GRADEDS[engine][rank - 1],
                })
    questionnaires = [
        {"participant_id": "p1", "task_id": "t-simple", "phase": "post",
         "answers": {"found_correct": True}},
        {"participant_id": "p2", "task_id": "t-simple", "phase": "post",
         "answers": {"found_correct": False}},
    ]
    return {"judgments": [], "per_engine": rows, "questionnaires": questionnaires}


@pytest.fixture
def scenario(study_config):
    sessions = _sessions()
    return study_config, sessions, _batch(sessions), _export(sessions)


def test_ranked_lists_join_and_clicks(scenario):
    config, sessions, batch, export = scenario
    lists = build_ranked_lists(export["per_engine"], sessions, batch, config)
    assert len(lists) == 8  # 4 sessions x 2 engines, one query each
    key = next(k for k in lists
               if k.participant_id == "p1" and k.task_id == "t-simple"
               and k.engine_id == "alpha")
    entries = lists[key].entries
    assert [e.binary for e in entries] == [True, True, False]
    assert [e.was_clicked for e in entries] == [True, False, False]
    beta_key = next(k for k in lists
                    if k.participant_id == "p1" and k.task_id == "t-simple"
                    and k.engine_id == "beta")
    assert not any(e.was_clicked for e in lists[beta_key].entries)


def test_report_hand_computed_metrics(scenario):
    config, sessions, batch, export = scenario
    report = build_report(config, sessions, batch, export)
    assert report.n_sessions == 4
    # every alpha list is [T, T, F]: P@5 = 2/5, P@10 = 2/10
    alpha = report.engines["alpha"]
    assert alpha.n_lists == 4
    assert alpha.p_at_5 == pytest.approx(0.4, abs=1e-12)
    assert alpha.p_at_10 == pytest.approx(0.2, abs=1e-12)
    assert alpha.map_at_5 == pytest.approx(1.0, abs=1e-12)  # perfect front-loading
    beta = report.engines["beta"]
    assert beta.p_at_5 == pytest.approx(0.2, abs=1e-12)
    assert beta.map_at_5 == pytest.approx(0.5, abs=1e-12)  # single hit at rank 2
    assert report.click_distribution == {1: 1, 2: 1}
    assert set(report.significance) == set(METRIC_NAMES)


def test_report_segment_all_equals_default(scenario):
    config, sessions, batch, export = scenario
    assert report_to_record(build_report(config, sessions, batch, export)) == \
        report_to_record(build_report(config, sessions, batch, export, segment="all"))


def test_report_complexity_segment(scenario):
    config, sessions, batch, export = scenario
    report = build_report(config, sessions, batch, export, segment="complexity=simple")
    assert report.n_sessions == 2
    # single-complexity segments have no simple-vs-complex comparison
    assert report.complexity_stats == []
    assert report.engines["alpha"].n_lists == 2
    # identical judged lists within the segment: metrics match the full run
    full = build_report(config, sessions, batch, export)
    assert report.engines["alpha"].p_at_5 == full.engines["alpha"].p_at_5


def test_report_questionnaire_segment(scenario):
    config, sessions, batch, export = scenario
    report = build_report(config, sessions, batch, export, segment="post:found_correct=yes")
    assert report.n_sessions == 1  # only p1 / t-simple answered yes


def test_report_empty_segment(scenario):
    config, sessions, batch, export = scenario
    report = build_report(config, sessions, batch, export, segment="post:found_correct=maybe")
    assert report.n_sessions == 0
    assert report.engines == {} and report.overlap is None


def test_report_complexity_stats_hand_computed(scenario):
    config, sessions, batch, export = scenario
    report = build_report(config, sessions, batch, export)
    rows = {r.measure: r for r in report.complexity_stats}
    assert set(rows) == {"time_effort", "search_queries", "clicked_results"}
    time_row = rows["time_effort"]
    assert time_row.simple.n == 2 and time_row.complex.n == 2
    assert time_row.simple.mean == pytest.approx(150.0)
    assert time_row.complex.mean == pytest.approx(400.0)
    assert 0.0 <= time_row.t_test.p_two_tailed <= 1.0


def test_report_paired_variant(scenario):
    config, sessions, batch, export = scenario
    report = build_report(config, sessions, batch, export, t_test_variant="paired")
    # every list per engine is identical here, so all differences are zero
    p5 = report.significance["P@5"]
    assert p5.degenerate or p5.p_two_tailed == 1.0


def test_parse_predicate_errors(study_config):
    with pytest.raises(ValueError, match="complexity"):
        parse_predicate("complexity=medium", study_config, [])
    with pytest.raises(ValueError, match="phase"):
        parse_predicate("mid:found_correct=yes", study_config, [])
    with pytest.raises(ValueError, match="unparseable"):
        parse_predicate("garbage", study_config, [])


def test_write_report_files(scenario, tmp_path):
    config, sessions, batch, export = scenario
    report = build_report(config, sessions, batch, export)
    out = tmp_path / "report"
    write_report_files(report, out)
    record = json.loads((out / "report.json").read_text())
    assert record == report_to_record(report)
    for name in ("click_distribution.csv", "precision_graph.csv", "graded_distribution.csv",
                 "clicked_precision_graph.csv", "clicked_graded_distribution.csv",
                 "retrieval_metrics.csv", "complexity_stats.csv", "overlap.csv"):
        assert (out / name).exists(), name
    header = (out / "retrieval_metrics.csv").read_text().splitlines()[0]
    assert header == "engine_id," + ",".join(METRIC_NAMES)
