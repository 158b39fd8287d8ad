"""Synthetic study generator.

Stands in for the browser logging extension and the live engines:
produces interaction logs that parse with zero rejects, recorded SERP
fixtures for every generated query, and a scripted judgment rule so the
whole pipeline can run unattended. Everything is deterministic per seed.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass
from pathlib import Path

from .config import StudyConfig
from .ingest import LogEvent, serialize_event
from .serp import FixtureStore

# Top-weighted click positions: P(rank) ~ geometric(p), truncated at k.
DEFAULT_CLICK_BIAS = 0.55


@dataclass
class SimulationResult:
    log_paths: list[Path]
    fixture_paths: list[Path]
    profile_path: Path
    n_sessions: int


def _geometric_rank(rng: random.Random, p: float, k: int) -> int:
    rank = 1
    while rank < k and rng.random() > p:
        rank += 1
    return rank


def _shared_url(query_text: str, slot: int) -> str:
    h = hashlib.sha256(f"shared\x1f{query_text}\x1f{slot}".encode()).hexdigest()[:12]
    return f"https://shared.example.org/{h}"


def _engine_url(engine_id: str, query_text: str, slot: int) -> str:
    # host derived from a hash, not the engine id: juror-facing URLs must
    # not hint at which engine returned the result
    h = hashlib.sha256(f"{engine_id}\x1f{query_text}\x1f{slot}".encode()).hexdigest()[:16]
    return f"https://site-{h[:6]}.example.org/{h[6:]}"


def _build_fixture(engine_id: str, query_text: str, k: int, rng: random.Random) -> list[dict]:
    results = []
    for rank in range(1, k + 1):
        # Roughly a fifth of results recur across engines, echoing the low
        # but non-zero cross-engine overlap seen in practice.
        if rng.random() < 0.2:
            url = _shared_url(query_text, rng.randrange(3))
        else:
            url = _engine_url(engine_id, query_text, rank)
        results.append({
            "rank": rank,
            "url": url,
            "title": f"{query_text} result {rank}",
            "snippet": f"Synthetic snippet {rank} for {query_text!r}.",
        })
    # Re-rank so duplicate shared URLs within one SERP collapse to first use.
    seen: set[str] = set()
    deduped = []
    for r in results:
        if r["url"] in seen:
            continue
        seen.add(r["url"])
        r["rank"] = len(deduped) + 1
        deduped.append(r)
    return deduped


def scripted_judgment(item_id: str, url: str, judgment_seed: int,
                      graded_min: int = 1, graded_max: int = 5) -> tuple[bool, int]:
    """Deterministic judgment for one pooled item: graded point from a
    hash of the URL, binary true for the upper half of the scale."""
    digest = hashlib.sha256(f"judge\x1f{judgment_seed}\x1f{url}".encode()).digest()
    span = graded_max - graded_min + 1
    graded = graded_min + digest[0] % span
    binary = graded >= (graded_min + graded_max + 1) // 2
    return binary, graded


def simulate_study(config: StudyConfig, n_participants: int, seed: int,
                   logs_dir, click_bias: float = DEFAULT_CLICK_BIAS) -> SimulationResult:
    """Generate per-participant logs, SERP fixtures, and a judgment profile.

    Each participant gets one simple and one complex task (cycling through
    the config's tasks), with 1-8 queries per session and clicks biased
    toward top ranks. Fixtures are written into each engine's configured
    fixture_dir. Deterministic: the same seed yields byte-identical logs.
    """
    if n_participants < 1:
        raise ValueError("n_participants must be >= 1")
    simple_tasks = [t for t in config.tasks if t.complexity == "simple"]
    complex_tasks = [t for t in config.tasks if t.complexity == "complex"]
    if not simple_tasks or not complex_tasks:
        raise ValueError("simulation needs at least one simple and one complex task")

    logs_dir = Path(logs_dir)
    logs_dir.mkdir(parents=True, exist_ok=True)
    stores = {
        e.engine_id: FixtureStore(e.adapter_params["fixture_dir"]) for e in config.engines
    }
    primary_engine = config.engines[0].engine_id  # the engine "used" in sessions
    k = config.results_per_query

    rng = random.Random(seed)
    log_paths: list[Path] = []
    fixture_paths: list[Path] = []
    fixtures_done: set[tuple[str, str]] = set()
    n_sessions = 0
    clock = 1_500_000_000_000  # epoch ms, advances across the whole run

    for p_index in range(n_participants):
        participant_id = f"p{p_index + 1:03d}"
        events: list[LogEvent] = []
        tasks = [simple_tasks[p_index % len(simple_tasks)],
                 complex_tasks[p_index % len(complex_tasks)]]
        for task in tasks:
            n_sessions += 1
            clock += rng.randrange(5_000, 60_000)
            start = clock
            events.append(LogEvent(start, participant_id, task.task_id, "task_start"))
            n_queries = rng.randint(1, 4) if task.complexity == "simple" else rng.randint(2, 8)
            query_results: dict[str, list[dict]] = {}
            for q_index in range(n_queries):
                clock += rng.randrange(2_000, 30_000)
                query_text = f"{task.task_id} query {q_index + 1}"
                events.append(LogEvent(clock, participant_id, task.task_id, "query",
                                       engine_id=primary_engine, query_text=query_text))
                for engine_id, store in stores.items():
                    if (engine_id, query_text) not in fixtures_done:
                        fixtures_done.add((engine_id, query_text))
                        results = _build_fixture(engine_id, query_text, k, rng)
                        fixture_paths.append(store.save(engine_id, query_text, results))
                    if engine_id == primary_engine:
                        query_results[query_text] = json.loads(
                            store.path_for(engine_id, query_text).read_text())["results"]
                for _ in range(rng.randint(0, 2)):
                    clock += rng.randrange(1_000, 15_000)
                    results = query_results[query_text]
                    pick = results[min(_geometric_rank(rng, click_bias, k), len(results)) - 1]
                    events.append(LogEvent(clock, participant_id, task.task_id, "click",
                                           engine_id=primary_engine, query_text=query_text,
                                           url=pick["url"], serp_rank=pick["rank"]))
            if rng.random() < 0.3:
                clock += rng.randrange(1_000, 10_000)
                h = hashlib.sha256(f"wiki\x1f{participant_id}\x1f{task.task_id}".encode()).hexdigest()[:10]
                events.append(LogEvent(clock, participant_id, task.task_id, "page_view",
                                       url=f"https://encyclopedia.example.org/{h}"))
            clock += rng.randrange(2_000, 30_000)
            events.append(LogEvent(clock, participant_id, task.task_id, "task_end"))
        path = logs_dir / f"{participant_id}.jsonl"
        path.write_text("".join(serialize_event(e) + "\n" for e in events))
        log_paths.append(path)

    profile_path = logs_dir / "judgment_profile.json"
    profile_path.write_text(json.dumps({"judgment_seed": seed}, indent=2))
    return SimulationResult(log_paths=log_paths, fixture_paths=fixture_paths,
                            profile_path=profile_path, n_sessions=n_sessions)
