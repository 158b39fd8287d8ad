"""Assembles the full evaluation report from exports, sessions, and the
collected result batch.

The report covers: per-engine P@k / MAP@k / nDCG@k, per-position
precision graphs (all results and clicked results), judgment
distributions, the click-position histogram, cross-engine overlap,
significance tests between engines, and descriptive statistics by task
complexity. Output is a structured record plus flat per-figure CSV
tables for external plotting.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

from .config import StudyConfig
from .ingest import SessionRecord, extract_queries, session_stats
from .metrics import (
    JudgedEntry,
    OverlapReport,
    RankedJudgedList,
    average_precision_at_k,
    click_distribution,
    clicked_precision_graph,
    count_unjudged,
    graded_distribution,
    ndcg_at_k,
    overlap_analysis,
    precision_at_k,
    precision_graph,
)
from .pooling import UrlError, normalize_url
from .serp import ResultBatch
from .stats import DescriptiveStats, TTestResult, descriptive_stats, t_test_two_sample

METRIC_NAMES = ("P@5", "P@10", "MAP@5", "MAP@10", "NDCG@5", "NDCG@10")


@dataclass(frozen=True)
class ListKey:
    participant_id: str
    task_id: str
    engine_id: str
    query_text: str


@dataclass
class EngineMetrics:
    engine_id: str
    n_lists: int
    p_at_5: float
    p_at_10: float
    map_at_5: float
    map_at_10: float
    ndcg_at_5: float
    ndcg_at_10: float
    precision_graph: list[float]
    clicked_precision_graph: list
    graded_distribution: dict
    clicked_graded_distribution: dict
    unjudged: int

    def metric(self, name: str) -> float:
        return {
            "P@5": self.p_at_5, "P@10": self.p_at_10,
            "MAP@5": self.map_at_5, "MAP@10": self.map_at_10,
            "NDCG@5": self.ndcg_at_5, "NDCG@10": self.ndcg_at_10,
        }[name]


@dataclass
class ComplexityRow:
    measure: str  # time_effort | search_queries | clicked_results
    simple: DescriptiveStats
    complex: DescriptiveStats
    t_test: TTestResult


@dataclass
class MetricReport:
    study_id: str
    segment: str
    n_sessions: int
    engines: dict[str, EngineMetrics] = field(default_factory=dict)
    click_distribution: dict = field(default_factory=dict)
    overlap: OverlapReport | None = None
    significance: dict[str, TTestResult] = field(default_factory=dict)
    complexity_stats: list[ComplexityRow] = field(default_factory=list)


def build_ranked_lists(per_engine_rows, sessions: list[SessionRecord],
                       batch: ResultBatch, config: StudyConfig) -> dict[ListKey, RankedJudgedList]:
    """One judged list per (participant, task, engine, query).

    The rank skeleton comes from the collected batch so unjudged
    positions stay visible (binary None, graded None) rather than
    disappearing. Judgments join by rank from the per-engine export view;
    click flags come from the session's own clicks.
    """
    batch_ranks: dict[tuple[str, str], list] = {}
    for r in batch.results:
        batch_ranks.setdefault((r.engine_id, r.query_text), []).append(r)
    judged: dict[tuple[str, str, str, str, int], dict] = {}
    for row in per_engine_rows:
        if row["engine_id"] is None:
            continue
        key = (row["participant_id"], row["task_id"], row["engine_id"],
               row["query_text"], row["rank"])
        judged[key] = row

    lists: dict[ListKey, RankedJudgedList] = {}
    for session in sessions:
        clicked_norms: dict[tuple[str, str], set[str]] = {}
        for c in session.clicks:
            try:
                clicked_norms.setdefault((c.engine_id, c.query_text), set()).add(normalize_url(c.url))
            except UrlError:
                pass
        for q in extract_queries(session, config.max_queries_per_task):
            for engine in config.engines:
                results = sorted(batch_ranks.get((engine.engine_id, q.query_text), []),
                                 key=lambda r: r.rank)
                if not results:
                    continue
                entries = []
                for r in results:
                    row = judged.get((session.participant_id, session.task_id,
                                      engine.engine_id, q.query_text, r.rank))
                    try:
                        norm = normalize_url(r.url)
                    except UrlError:
                        norm = r.url
                    was_clicked = any(
                        norm in norms
                        for (eng, qt), norms in clicked_norms.items()
                        if eng == engine.engine_id and qt == q.query_text
                    )
                    entries.append(JudgedEntry(
                        rank=r.rank,
                        binary=row["binary"] if row else None,
                        graded=row["graded"] if row else None,
                        was_clicked=was_clicked,
                    ))
                lists[ListKey(session.participant_id, session.task_id,
                              engine.engine_id, q.query_text)] = RankedJudgedList(
                    engine_id=engine.engine_id, query_text=q.query_text, entries=tuple(entries))
    return lists


def _engine_metrics(engine_id: str, engine_lists: list[RankedJudgedList], k_max: int) -> EngineMetrics:
    n = len(engine_lists)
    graded_all = [e.graded for lst in engine_lists for e in lst.entries if e.graded is not None]
    graded_clicked = [e.graded for lst in engine_lists for e in lst.entries
                      if e.graded is not None and e.was_clicked]
    return EngineMetrics(
        engine_id=engine_id,
        n_lists=n,
        p_at_5=sum(precision_at_k(l, 5) for l in engine_lists) / n,
        p_at_10=sum(precision_at_k(l, 10) for l in engine_lists) / n,
        map_at_5=sum(average_precision_at_k(l, 5) for l in engine_lists) / n,
        map_at_10=sum(average_precision_at_k(l, 10) for l in engine_lists) / n,
        ndcg_at_5=sum(ndcg_at_k(l, 5) for l in engine_lists) / n,
        ndcg_at_10=sum(ndcg_at_k(l, 10) for l in engine_lists) / n,
        precision_graph=precision_graph(engine_lists, k_max),
        clicked_precision_graph=clicked_precision_graph(engine_lists, k_max),
        graded_distribution=graded_distribution(graded_all),
        clicked_graded_distribution=graded_distribution(graded_clicked),
        unjudged=count_unjudged(engine_lists),
    )


def parse_predicate(expr: str, config: StudyConfig, questionnaire_rows):
    """Segment predicates over (participant, task) pairs.

    Supported forms: "all"; "complexity=simple|complex"; and
    "pre:item=value" / "post:item=value" matching a questionnaire answer
    (yes/no answers accept yes, no, true, false).
    """
    expr = expr.strip()
    if expr == "all":
        return lambda participant_id, task_id: True
    if expr.startswith("complexity="):
        wanted = expr.split("=", 1)[1]
        if wanted not in ("simple", "complex"):
            raise ValueError(f"unknown complexity {wanted!r}")
        by_task = {t.task_id: t.complexity for t in config.tasks}
        return lambda participant_id, task_id: by_task.get(task_id) == wanted
    if ":" in expr and "=" in expr:
        phase, rest = expr.split(":", 1)
        item_id, value = rest.split("=", 1)
        if phase not in ("pre", "post"):
            raise ValueError(f"unknown questionnaire phase {phase!r}")
        want: object = value
        if value.lower() in ("yes", "true"):
            want = True
        elif value.lower() in ("no", "false"):
            want = False
        answers = {
            (row["participant_id"], row["task_id"]): row["answers"]
            for row in questionnaire_rows
            if row["phase"] == phase
        }
        return lambda participant_id, task_id: (
            answers.get((participant_id, task_id), {}).get(item_id) == want
        )
    raise ValueError(f"unparseable segment predicate {expr!r}")


def build_report(config: StudyConfig, sessions: list[SessionRecord], batch: ResultBatch,
                 export: dict, segment: str = "all",
                 t_test_variant: str = "pooled") -> MetricReport:
    """The full analysis over one study (or one segment of it)."""
    predicate = parse_predicate(segment, config, export.get("questionnaires", []))
    selected = [s for s in sessions if predicate(s.participant_id, s.task_id)]
    report = MetricReport(study_id=config.study_id, segment=segment, n_sessions=len(selected))
    if not selected:
        return report
    selected_keys = {(s.participant_id, s.task_id) for s in selected}
    rows = [r for r in export.get("per_engine", [])
            if (r["participant_id"], r["task_id"]) in selected_keys]

    lists = build_ranked_lists(rows, selected, batch, config)
    k_max = config.results_per_query
    by_engine: dict[str, list[RankedJudgedList]] = {}
    for lst in lists.values():
        by_engine.setdefault(lst.engine_id, []).append(lst)
    for engine_id in sorted(by_engine):
        report.engines[engine_id] = _engine_metrics(engine_id, by_engine[engine_id], k_max)

    report.click_distribution = click_distribution(selected)

    # Overlap over the segment's own query set.
    segment_queries = {
        q.query_text for s in selected for q in extract_queries(s, config.max_queries_per_task)
    }
    segment_batch = ResultBatch(
        study_id=batch.study_id,
        results=[r for r in batch.results if r.query_text in segment_queries],
        failures=list(batch.failures),
    )
    engine_ids = {r.engine_id for r in segment_batch.results}
    if len(engine_ids) >= 2:
        report.overlap = overlap_analysis(segment_batch)

    if len(by_engine) == 2:
        a, b = sorted(by_engine)
        metric_fns = {
            "P@5": lambda l: precision_at_k(l, 5),
            "P@10": lambda l: precision_at_k(l, 10),
            "MAP@5": lambda l: average_precision_at_k(l, 5),
            "MAP@10": lambda l: average_precision_at_k(l, 10),
            "NDCG@5": lambda l: ndcg_at_k(l, 5),
            "NDCG@10": lambda l: ndcg_at_k(l, 10),
        }
        if t_test_variant == "paired":
            # Pair by (participant, task, query); only keys both engines cover.
            lists_a = {(k.participant_id, k.task_id, k.query_text): l
                       for k, l in lists.items() if k.engine_id == a}
            lists_b = {(k.participant_id, k.task_id, k.query_text): l
                       for k, l in lists.items() if k.engine_id == b}
            shared_keys = sorted(set(lists_a) & set(lists_b))
            for name, fn in metric_fns.items():
                xs = [fn(lists_a[key]) for key in shared_keys]
                ys = [fn(lists_b[key]) for key in shared_keys]
                if len(xs) >= 2:
                    report.significance[name] = t_test_two_sample(xs, ys, variant="paired")
        else:
            for name, fn in metric_fns.items():
                xs = [fn(l) for l in by_engine[a]]
                ys = [fn(l) for l in by_engine[b]]
                if len(xs) >= 2 and len(ys) >= 2:
                    report.significance[name] = t_test_two_sample(xs, ys, variant=t_test_variant)

    by_complexity: dict[str, list[SessionRecord]] = {"simple": [], "complex": []}
    task_complexity = {t.task_id: t.complexity for t in config.tasks}
    for s in selected:
        complexity = task_complexity.get(s.task_id)
        if complexity in by_complexity:
            by_complexity[complexity].append(s)
    if by_complexity["simple"] and by_complexity["complex"]:
        stats_of = {
            "time_effort": lambda s: session_stats(s).time_effort_seconds,
            "search_queries": lambda s: session_stats(s).query_count,
            "clicked_results": lambda s: session_stats(s).click_count,
        }
        for measure, fn in stats_of.items():
            simple_vals = [fn(s) for s in by_complexity["simple"]]
            complex_vals = [fn(s) for s in by_complexity["complex"]]
            if len(simple_vals) >= 2 and len(complex_vals) >= 2:
                report.complexity_stats.append(ComplexityRow(
                    measure=measure,
                    simple=descriptive_stats(simple_vals),
                    complex=descriptive_stats(complex_vals),
                    t_test=t_test_two_sample(simple_vals, complex_vals, variant="pooled"),
                ))
    return report


def report_to_record(report: MetricReport) -> dict:
    def ttest_rec(t: TTestResult) -> dict:
        return {"t": t.t, "df": t.degrees_of_freedom, "p_two_tailed": t.p_two_tailed,
                "significant_at_0.05": t.significant_at, "degenerate": t.degenerate}

    def stats_rec(s: DescriptiveStats) -> dict:
        return {"n": s.n, "min": s.min, "max": s.max, "mean": s.mean, "sd": s.sd}

    return {
        "study_id": report.study_id,
        "segment": report.segment,
        "n_sessions": report.n_sessions,
        "engines": {
            e.engine_id: {
                "n_lists": e.n_lists,
                "P@5": e.p_at_5, "P@10": e.p_at_10,
                "MAP@5": e.map_at_5, "MAP@10": e.map_at_10,
                "NDCG@5": e.ndcg_at_5, "NDCG@10": e.ndcg_at_10,
                "precision_graph": e.precision_graph,
                "clicked_precision_graph": e.clicked_precision_graph,
                "graded_distribution": {str(k): v for k, v in e.graded_distribution.items()},
                "clicked_graded_distribution": {str(k): v
                                                for k, v in e.clicked_graded_distribution.items()},
                "unjudged": e.unjudged,
            }
            for e in report.engines.values()
        },
        "click_distribution": {str(k): v for k, v in report.click_distribution.items()},
        "overlap": None if report.overlap is None else {
            "total_distinct": report.overlap.total_distinct,
            "shared": report.overlap.shared,
            "unique_per_engine": report.overlap.unique_per_engine,
            "shared_fraction": report.overlap.shared_fraction,
            "unique_fraction": report.overlap.unique_fraction,
        },
        "significance": {name: ttest_rec(t) for name, t in report.significance.items()},
        "complexity_stats": [
            {"measure": row.measure, "simple": stats_rec(row.simple),
             "complex": stats_rec(row.complex), "t_test": ttest_rec(row.t_test)}
            for row in report.complexity_stats
        ],
    }


def write_report_files(report: MetricReport, out_dir) -> None:
    """report.json plus one flat CSV per figure/table analog."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(report_to_record(report), indent=2))

    def write_csv(name: str, header: list[str], rows) -> None:
        with open(out / name, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)

    write_csv("click_distribution.csv", ["position", "clicks"],
              [[k, v] for k, v in report.click_distribution.items()])
    write_csv("precision_graph.csv", ["engine_id", "position", "precision"],
              [[e.engine_id, i + 1, p]
               for e in report.engines.values() for i, p in enumerate(e.precision_graph)])
    write_csv("graded_distribution.csv", ["engine_id", "scale_point", "share"],
              [[e.engine_id, point, share]
               for e in report.engines.values() for point, share in e.graded_distribution.items()])
    write_csv("clicked_precision_graph.csv", ["engine_id", "position", "precision"],
              [[e.engine_id, i + 1, "" if p is None else p]
               for e in report.engines.values()
               for i, p in enumerate(e.clicked_precision_graph)])
    write_csv("clicked_graded_distribution.csv", ["engine_id", "scale_point", "share"],
              [[e.engine_id, point, share]
               for e in report.engines.values()
               for point, share in e.clicked_graded_distribution.items()])
    write_csv("retrieval_metrics.csv", ["engine_id", *METRIC_NAMES],
              [[e.engine_id, *(e.metric(m) for m in METRIC_NAMES)]
               for e in report.engines.values()])
    write_csv("complexity_stats.csv",
              ["measure", "group", "n", "min", "max", "mean", "sd", "p_two_tailed"],
              [row
               for c in report.complexity_stats
               for row in (
                   [c.measure, "simple", c.simple.n, c.simple.min, c.simple.max,
                    c.simple.mean, c.simple.sd, c.t_test.p_two_tailed],
                   [c.measure, "complex", c.complex.n, c.complex.min, c.complex.max,
                    c.complex.mean, c.complex.sd, c.t_test.p_two_tailed],
               )])
    if report.overlap is not None:
        write_csv("overlap.csv", ["total_distinct", "shared", "shared_fraction", "unique_fraction",
                                  *sorted(report.overlap.unique_per_engine)],
                  [[report.overlap.total_distinct, report.overlap.shared,
                    report.overlap.shared_fraction, report.overlap.unique_fraction,
                    *(report.overlap.unique_per_engine[e]
                      for e in sorted(report.overlap.unique_per_engine))]])
