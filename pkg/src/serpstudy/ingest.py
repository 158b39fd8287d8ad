"""Interaction-log parsing and session reconstruction.

The log format is line-delimited JSON, one event per line, mirroring the
event vocabulary of the logging browser extension: task_start, task_end,
query, click, page_view, tab_open. Parsing never silently drops a line;
malformed lines land in a rejects report.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

EVENT_KINDS = ("task_start", "task_end", "query", "click", "page_view", "tab_open")

# Fields that must be present for each event kind, beyond the common trio.
_REQUIRED_BY_KIND = {
    "query": ("engine_id", "query_text"),
    "click": ("engine_id", "query_text", "url"),
    "page_view": ("url",),
}


class LogParseError(ValueError):
    """Stream-level parse failure (unreadable input or reject rate exceeded)."""


class SessionBuildError(ValueError):
    """Events cannot be assembled into well-formed sessions."""


@dataclass(frozen=True)
class LogEvent:
    timestamp: int  # epoch milliseconds
    participant_id: str
    task_id: str
    kind: str
    engine_id: str | None = None
    query_text: str | None = None
    url: str | None = None
    serp_rank: int | None = None


@dataclass(frozen=True)
class Reject:
    line_no: int
    line: str
    reason: str


@dataclass
class ParseResult:
    events: list[LogEvent]
    rejects: list[Reject]


@dataclass(frozen=True)
class QueryRecord:
    engine_id: str
    query_text: str
    first_seen: int


@dataclass(frozen=True)
class ClickRecord:
    url: str
    serp_rank: int | None
    engine_id: str
    query_text: str
    timestamp: int


@dataclass(frozen=True)
class SessionRecord:
    participant_id: str
    task_id: str
    start: int
    end: int
    queries: tuple[QueryRecord, ...]
    clicks: tuple[ClickRecord, ...]
    visited_pages: tuple[str, ...]


@dataclass
class SessionBuild:
    sessions: list[SessionRecord]
    orphans: list[LogEvent]  # events outside any [start, end] window


@dataclass(frozen=True)
class SessionStats:
    time_effort_seconds: float
    query_count: int
    click_count: int


def _validate_fields(record: dict) -> str | None:
    """Return a reason string when the record is malformed, else None."""
    for key in ("timestamp", "participant_id", "task_id", "kind"):
        if key not in record or record[key] is None:
            return f"{key} required"
    kind = record["kind"]
    if kind not in EVENT_KINDS:
        return f"unknown kind {kind!r}"
    if not isinstance(record["timestamp"], int) or record["timestamp"] < 0:
        return "timestamp must be a non-negative integer"
    for key in _REQUIRED_BY_KIND.get(kind, ()):
        if not record.get(key):
            return f"{key} required for {kind}"
    rank = record.get("serp_rank")
    if rank is not None and (not isinstance(rank, int) or rank < 1):
        return "serp_rank must be a positive integer"
    return None


def event_from_record(record: dict) -> LogEvent:
    reason = _validate_fields(record)
    if reason:
        raise ValueError(reason)
    return LogEvent(
        timestamp=record["timestamp"],
        participant_id=str(record["participant_id"]),
        task_id=str(record["task_id"]),
        kind=record["kind"],
        engine_id=record.get("engine_id"),
        query_text=record.get("query_text"),
        url=record.get("url"),
        serp_rank=record.get("serp_rank"),
    )


def serialize_event(event: LogEvent) -> str:
    """One-line JSON encoding; parse_log_stream round-trips it exactly."""
    record = {"timestamp": event.timestamp, "participant_id": event.participant_id,
              "task_id": event.task_id, "kind": event.kind}
    for key in ("engine_id", "query_text", "url", "serp_rank"):
        value = getattr(event, key)
        if value is not None:
            record[key] = value
    return json.dumps(record, ensure_ascii=False)


def parse_log_stream(lines, max_reject_rate: float = 0.0) -> ParseResult:
    """Parse a line-delimited event log.

    Events come back in input order. Blank lines are skipped; any other
    malformed line becomes a Reject. When the reject share of non-blank
    lines exceeds max_reject_rate, a LogParseError is raised listing the
    first 10 rejects.
    """
    events: list[LogEvent] = []
    rejects: list[Reject] = []
    total = 0
    for line_no, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped:
            continue
        total += 1
        try:
            record = json.loads(stripped)
            if not isinstance(record, dict):
                raise ValueError("event must be a JSON object")
            events.append(event_from_record(record))
        except (json.JSONDecodeError, ValueError) as exc:
            rejects.append(Reject(line_no, stripped, str(exc)))
    if total and len(rejects) / total > max_reject_rate:
        shown = "; ".join(f"line {r.line_no}: {r.reason}" for r in rejects[:10])
        raise LogParseError(
            f"reject rate {len(rejects)}/{total} exceeds threshold {max_reject_rate}: {shown}"
        )
    return ParseResult(events=events, rejects=rejects)


def build_sessions(events: list[LogEvent]) -> SessionBuild:
    """Group events into one SessionRecord per (participant, task).

    Events are stable-sorted by timestamp first, so inputs that differ
    only in the order of distinct-timestamp events build identical
    sessions. Queries are deduplicated by exact (engine_id, query_text),
    keeping the first timestamp. Events outside the [task_start,
    task_end] window are reported as orphans, not errors.
    """
    ordered = sorted(events, key=lambda e: e.timestamp)
    by_key: dict[tuple[str, str], list[LogEvent]] = {}
    for event in ordered:
        by_key.setdefault((event.participant_id, event.task_id), []).append(event)

    sessions: list[SessionRecord] = []
    orphans: list[LogEvent] = []
    for (participant_id, task_id), group in by_key.items():
        starts = [e for e in group if e.kind == "task_start"]
        ends = [e for e in group if e.kind == "task_end"]
        if len(starts) != 1 or len(ends) != 1:
            raise SessionBuildError(
                f"({participant_id}, {task_id}): expected exactly one task_start and one "
                f"task_end, got {len(starts)} start(s) and {len(ends)} end(s)"
            )
        start, end = starts[0].timestamp, ends[0].timestamp
        if start > end:
            raise SessionBuildError(f"({participant_id}, {task_id}): task_start after task_end")

        queries: list[QueryRecord] = []
        seen_queries: set[tuple[str, str]] = set()
        clicks: list[ClickRecord] = []
        visited: list[str] = []
        for event in group:
            if event.kind in ("task_start", "task_end"):
                continue
            if not (start <= event.timestamp <= end):
                orphans.append(event)
                continue
            if event.kind == "query":
                key = (event.engine_id, event.query_text)
                if key not in seen_queries:
                    seen_queries.add(key)
                    queries.append(QueryRecord(event.engine_id, event.query_text, event.timestamp))
            elif event.kind == "click":
                if (event.engine_id, event.query_text) not in seen_queries:
                    raise SessionBuildError(
                        f"({participant_id}, {task_id}): click references unseen query "
                        f"({event.engine_id!r}, {event.query_text!r})"
                    )
                clicks.append(
                    ClickRecord(event.url, event.serp_rank, event.engine_id,
                                event.query_text, event.timestamp)
                )
            elif event.kind == "page_view":
                visited.append(event.url)
        sessions.append(
            SessionRecord(
                participant_id=participant_id,
                task_id=task_id,
                start=start,
                end=end,
                queries=tuple(queries),
                clicks=tuple(clicks),
                visited_pages=tuple(visited),
            )
        )
    return SessionBuild(sessions=sessions, orphans=orphans)


def extract_queries(session: SessionRecord, max_queries: int) -> list[QueryRecord]:
    """Pick the queries whose results will be collected, at most max_queries.

    Without truncation, queries come back in first-use order. When the cap
    bites, queries that received clicks are kept ahead of click-less ones
    (dropping a clicked query would orphan its clicks); ties keep
    first-use order.
    """
    if max_queries < 1:
        raise ValueError("max_queries must be >= 1")
    if len(session.queries) <= max_queries:
        return list(session.queries)
    clicked_keys = {(c.engine_id, c.query_text) for c in session.clicks}
    clicked = [q for q in session.queries if (q.engine_id, q.query_text) in clicked_keys]
    unclicked = [q for q in session.queries if (q.engine_id, q.query_text) not in clicked_keys]
    return (clicked + unclicked)[:max_queries]


def session_stats(session: SessionRecord) -> SessionStats:
    return SessionStats(
        time_effort_seconds=(session.end - session.start) / 1000,
        query_count=len(session.queries),
        click_count=len(session.clicks),
    )


def session_to_record(session: SessionRecord) -> dict:
    return {
        "participant_id": session.participant_id,
        "task_id": session.task_id,
        "start": session.start,
        "end": session.end,
        "queries": [{"engine_id": q.engine_id, "query_text": q.query_text, "first_seen": q.first_seen}
                    for q in session.queries],
        "clicks": [{"url": c.url, "serp_rank": c.serp_rank, "engine_id": c.engine_id,
                    "query_text": c.query_text, "timestamp": c.timestamp}
                   for c in session.clicks],
        "visited_pages": list(session.visited_pages),
    }


def session_from_record(record: dict) -> SessionRecord:
    return SessionRecord(
        participant_id=record["participant_id"],
        task_id=record["task_id"],
        start=record["start"],
        end=record["end"],
        queries=tuple(QueryRecord(q["engine_id"], q["query_text"], q["first_seen"])
                      for q in record["queries"]),
        clicks=tuple(ClickRecord(c["url"], c.get("serp_rank"), c["engine_id"],
                                 c["query_text"], c["timestamp"])
                     for c in record["clicks"]),
        visited_pages=tuple(record["visited_pages"]),
    )
