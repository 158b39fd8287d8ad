"""Judgment-pool construction: merge, deduplicate, anonymize, shuffle.

A pool is everything one participant must judge for one task: the
engines' results for their (capped) queries plus any pages they visited
outside the SERPs. Duplicate URLs are merged so each is judged once, and
the presentation order is a seeded, replayable permutation. Provenance
stays researcher-side; the juror payload never names an engine.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from urllib.parse import urlsplit

from .config import StudyConfig
from .ingest import SessionRecord, extract_queries
from .serp import ResultBatch

_DEFAULT_PORTS = {"http": "80", "https": "443"}


class UrlError(ValueError):
    pass


class EmptyPoolError(ValueError):
    pass


def normalize_url(url: str) -> str:
    """Canonical form used for duplicate detection.

    Lowercases scheme and host, drops default ports and the fragment,
    strips the trailing slash only when the path is exactly "/", and
    leaves path and query byte-for-byte intact otherwise. Deliberately
    narrow: query-param sorting or www-stripping would merge distinct
    pages.
    """
    try:
        parts = urlsplit(url)
    except ValueError as exc:
        raise UrlError(f"unparseable url {url!r}: {exc}") from exc
    if not parts.scheme or not parts.netloc:
        raise UrlError(f"unparseable url {url!r}: not an absolute URL")
    scheme = parts.scheme.lower()
    host = parts.hostname or ""
    port = parts.port
    netloc = host.lower()
    if parts.username:
        cred = parts.username + (f":{parts.password}" if parts.password else "")
        netloc = f"{cred}@{netloc}"
    if port is not None and str(port) != _DEFAULT_PORTS.get(scheme):
        netloc = f"{netloc}:{port}"
    path = "" if parts.path == "/" else parts.path
    out = f"{scheme}://{netloc}{path}"
    if parts.query:
        out += f"?{parts.query}"
    return out


@dataclass
class PooledItem:
    item_id: str
    url: str
    normalized_url: str
    title: str
    snippet: str
    # (engine_id, query_text, rank) origins; researcher-side only, never
    # serialized into juror-facing payloads.
    provenance: list[tuple[str, str, int]] = field(default_factory=list)
    was_clicked: bool = False
    was_visited_outside_serp: bool = False


@dataclass
class JudgmentPool:
    pool_id: str
    participant_id: str
    task_id: str
    items: list[PooledItem]  # presentation order
    shuffle_seed: int
    warnings: list[str] = field(default_factory=list)


def derive_order_seed(shuffle_seed: int, participant_id: str, task_id: str) -> int:
    """Distinct but replayable permutation seed per (participant, task)."""
    material = f"{shuffle_seed}\x1f{participant_id}\x1f{task_id}".encode("utf-8")
    return int.from_bytes(hashlib.sha256(material).digest()[:8], "big")


def item_id_for(normalized_url: str, pool_id: str) -> str:
    return hashlib.sha256(f"{pool_id}\x1f{normalized_url}".encode("utf-8")).hexdigest()[:16]


def build_pool(batch: ResultBatch, session: SessionRecord, config: StudyConfig) -> JudgmentPool:
    """Build the judgment pool for one (participant, task) session.

    Canonical merge order is engine results sorted by (engine_id, query
    first-use order, rank), then visited pages in visit order. Items with
    the same normalized URL merge into one: provenance is the union,
    title/snippet come from the first canonical occurrence. The final
    presentation order is a pseudorandom permutation seeded from
    (study shuffle_seed, participant_id, task_id).
    """
    pool_id = f"{session.participant_id}__{session.task_id}"
    extracted = extract_queries(session, config.max_queries_per_task)
    query_order: dict[str, int] = {}
    for q in extracted:
        query_order.setdefault(q.query_text, len(query_order))
    wanted_queries = set(query_order)

    relevant = [r for r in batch.results if r.query_text in wanted_queries]
    relevant.sort(key=lambda r: (r.engine_id, query_order[r.query_text], r.rank))

    warnings: list[str] = []
    covered = {r.query_text for r in relevant}
    for q in extracted:
        if q.query_text not in covered:
            warnings.append(f"no engine returned results for query {q.query_text!r}")

    clicked_urls = set()
    for click in session.clicks:
        try:
            clicked_urls.add(normalize_url(click.url))
        except UrlError:
            warnings.append(f"unparseable clicked url {click.url!r}")

    by_norm: dict[str, PooledItem] = {}
    for r in relevant:
        norm = normalize_url(r.url)
        item = by_norm.get(norm)
        if item is None:
            item = PooledItem(
                item_id=item_id_for(norm, pool_id),
                url=r.url,
                normalized_url=norm,
                title=r.title,
                snippet=r.snippet,
            )
            by_norm[norm] = item
        item.provenance.append((r.engine_id, r.query_text, r.rank))
    for url in session.visited_pages:
        try:
            norm = normalize_url(url)
        except UrlError:
            warnings.append(f"unparseable visited url {url!r}")
            continue
        item = by_norm.get(norm)
        if item is None:
            item = PooledItem(
                item_id=item_id_for(norm, pool_id),
                url=url,
                normalized_url=norm,
                title="",
                snippet="",
            )
            by_norm[norm] = item
        item.was_visited_outside_serp = True

    items = list(by_norm.values())  # dict preserves canonical first-seen order
    if not items:
        raise EmptyPoolError(f"empty pool for ({session.participant_id}, {session.task_id})")
    for item in items:
        item.was_clicked = item.normalized_url in clicked_urls

    rng = random.Random(derive_order_seed(config.shuffle_seed, session.participant_id, session.task_id))
    rng.shuffle(items)
    return JudgmentPool(
        pool_id=pool_id,
        participant_id=session.participant_id,
        task_id=session.task_id,
        items=items,
        shuffle_seed=config.shuffle_seed,
        warnings=warnings,
    )


def juror_view(pool: JudgmentPool) -> list[dict]:
    """The only shape the judgment service may transmit to a juror: no
    provenance, no click flags, no ranks, no engines."""
    return [
        {"item_id": i.item_id, "url": i.url, "title": i.title, "snippet": i.snippet}
        for i in pool.items
    ]


def pool_to_record(pool: JudgmentPool) -> dict:
    """Researcher-side serialization, provenance included. The stored item
    order is the presentation permutation; analyses never re-derive it."""
    return {
        "pool_id": pool.pool_id,
        "participant_id": pool.participant_id,
        "task_id": pool.task_id,
        "shuffle_seed": pool.shuffle_seed,
        "warnings": list(pool.warnings),
        "items": [
            {
                "item_id": i.item_id,
                "url": i.url,
                "normalized_url": i.normalized_url,
                "title": i.title,
                "snippet": i.snippet,
                "provenance": [list(p) for p in i.provenance],
                "was_clicked": i.was_clicked,
                "was_visited_outside_serp": i.was_visited_outside_serp,
            }
            for i in pool.items
        ],
    }


def pool_from_record(record: dict) -> JudgmentPool:
    return JudgmentPool(
        pool_id=record["pool_id"],
        participant_id=record["participant_id"],
        task_id=record["task_id"],
        shuffle_seed=record["shuffle_seed"],
        warnings=list(record.get("warnings", [])),
        items=[
            PooledItem(
                item_id=i["item_id"],
                url=i["url"],
                normalized_url=i["normalized_url"],
                title=i["title"],
                snippet=i["snippet"],
                provenance=[tuple(p) for p in i["provenance"]],
                was_clicked=i["was_clicked"],
                was_visited_outside_serp=i["was_visited_outside_serp"],
            )
            for i in record["items"]
        ],
    )
