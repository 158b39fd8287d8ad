"""Retrieval-effectiveness metrics over judged ranked lists.

Convention throughout: an unjudged entry counts as not relevant (binary)
and carries gain 0 (graded). Pools cap the judged set, so reports also
surface how many entries were unjudged instead of hiding the convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .pooling import normalize_url
from .serp import ResultBatch


@dataclass(frozen=True)
class JudgedEntry:
    rank: int  # 1-based
    binary: bool | None = None  # None = unjudged
    graded: int | None = None
    was_clicked: bool = False


@dataclass(frozen=True)
class RankedJudgedList:
    engine_id: str
    query_text: str
    entries: tuple[JudgedEntry, ...]  # ranks contiguous 1..m

    def __post_init__(self):
        ranks = [e.rank for e in self.entries]
        if ranks != list(range(1, len(ranks) + 1)):
            raise ValueError(f"ranks {ranks} are not contiguous 1..m")


@dataclass(frozen=True)
class OverlapReport:
    total_distinct: int
    shared: int
    unique_per_engine: dict
    shared_fraction: float
    unique_fraction: float


def _relevant(entry: JudgedEntry) -> bool:
    return entry.binary is True


def precision_at_k(ranked: RankedJudgedList, k: int) -> float:
    """Relevant results in the top k, divided by k. Lists shorter than k
    are zero-padded: missing and unjudged entries count as not relevant."""
    if k < 1:
        raise ValueError("k must be >= 1")
    hits = sum(1 for e in ranked.entries[:k] if _relevant(e))
    return hits / k


def average_precision_at_k(ranked: RankedJudgedList, k: int) -> float:
    """AP@k = mean of P@i over relevant positions i <= k, normalized by the
    number of relevant results retrieved in the top k (0 when none)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    hits = 0
    total = 0.0
    for i, entry in enumerate(ranked.entries[:k], start=1):
        if _relevant(entry):
            hits += 1
            total += hits / i
    return total / hits if hits else 0.0


def _gain(entry: JudgedEntry, exponential: bool) -> float:
    if entry.graded is None:
        return 0.0
    linear = entry.graded - 1  # scale point 1 ("completely irrelevant") -> 0
    return (2.0 ** linear - 1.0) if exponential else float(linear)


def _dcg(gains, k: int) -> float:
    return sum(g / math.log2(i + 1) for i, g in enumerate(gains[:k], start=1))


def ndcg_at_k(ranked: RankedJudgedList, k: int, exponential_gains: bool = False) -> float:
    """DCG over the top k with log2(rank+1) discounts, normalized by the
    ideal ordering of the same entries' gains; 0 when the ideal DCG is 0."""
    if k < 1:
        raise ValueError("k must be >= 1")
    gains = [_gain(e, exponential_gains) for e in ranked.entries]
    dcg = _dcg(gains, k)
    idcg = _dcg(sorted(gains, reverse=True), k)
    return dcg / idcg if idcg > 0 else 0.0


def precision_graph(lists, k: int) -> list[float]:
    """Per-position mean precision p(i), i = 1..k, averaged over lists."""
    lists = list(lists)
    if not lists:
        raise ValueError("no lists")
    return [sum(precision_at_k(lst, i) for lst in lists) / len(lists) for i in range(1, k + 1)]


def graded_distribution(judgments) -> dict[int, float]:
    """Share of judgments per scale point; empty input yields {}."""
    judgments = list(judgments)
    if not judgments:
        return {}
    counts: dict[int, int] = {}
    for j in judgments:
        counts[j] = counts.get(j, 0) + 1
    return {point: counts[point] / len(judgments) for point in sorted(counts)}


def clicked_precision_graph(lists, k: int) -> list[float | None]:
    """Precision among clicked entries at ranks <= i, pooled across lists.

    Positions where no clicked entry exists yet come back as None (an
    explicit gap, not zero)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    lists = list(lists)
    graph: list[float | None] = []
    for i in range(1, k + 1):
        clicked = [e for lst in lists for e in lst.entries[:i] if e.was_clicked]
        if not clicked:
            graph.append(None)
        else:
            graph.append(sum(1 for e in clicked if _relevant(e)) / len(clicked))
    return graph


def click_distribution(sessions) -> dict:
    """Histogram of clicks over SERP positions; clicks without a recorded
    rank land in the "unknown" bucket."""
    counts: dict = {}
    for session in sessions:
        for click in session.clicks:
            key = click.serp_rank if click.serp_rank is not None else "unknown"
            counts[key] = counts.get(key, 0) + 1
    return dict(sorted(counts.items(), key=lambda kv: (isinstance(kv[0], str), kv[0])))


def count_unjudged(lists) -> int:
    return sum(1 for lst in lists for e in lst.entries if e.binary is None)


def overlap_analysis(batch: ResultBatch, normalizer=normalize_url) -> OverlapReport:
    """Result overlap between engines over the deduplicated query set.

    Identity is the normalized URL; a URL is shared when at least two
    engines returned it (under any query), unique when exactly one did.
    """
    engines = sorted({r.engine_id for r in batch.results} | {f[0] for f in batch.failures})
    if len(engines) < 2:
        raise ValueError("overlap undefined: need at least 2 engines")
    seen_queries: list[str] = []
    for r in batch.results:
        if r.query_text not in seen_queries:
            seen_queries.append(r.query_text)
    urls_by_engine: dict[str, set[str]] = {e: set() for e in engines}
    for r in batch.results:
        urls_by_engine[r.engine_id].add(normalizer(r.url))
    all_urls = set().union(*urls_by_engine.values())
    total = len(all_urls)
    shared = sum(1 for u in all_urls if sum(u in s for s in urls_by_engine.values()) >= 2)
    unique_per_engine = {
        e: sum(
            1
            for u in urls_by_engine[e]
            if all(u not in urls_by_engine[other] for other in engines if other != e)
        )
        for e in engines
    }
    return OverlapReport(
        total_distinct=total,
        shared=shared,
        unique_per_engine=unique_per_engine,
        shared_fraction=shared / total if total else 0.0,
        unique_fraction=sum(unique_per_engine.values()) / total if total else 0.0,
    )
