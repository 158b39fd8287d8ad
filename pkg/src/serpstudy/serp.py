"""SERP collection: engine adapters, rate limiting, and HTML extraction.

Two adapters share one contract: fetch(query_text, k) returns at most k
results ranked 1..m. The recorded_fixture adapter replays a local store
and is the deterministic reference; the live_scrape adapter fetches a
results page and extracts organic results with a SelectorProfile. Live
DOM selectors rot, so all correctness anchors on fixtures.
"""

from __future__ import annotations

import hashlib
import json
import re
import time
import urllib.request
from dataclasses import dataclass, field
from html.parser import HTMLParser
from pathlib import Path
from urllib.parse import quote_plus, urljoin

import yaml


class FetchError(Exception):
    """Base class for per-(engine, query) fetch failures."""


class TransportError(FetchError):
    """Network-level failure; retried with backoff."""


class NoRecordingError(FetchError):
    """Fixture store has no entry for the query."""


class ProfileMismatchError(FetchError):
    """Zero result containers matched: the selector profile no longer fits
    the page DOM. Never retried."""


class CollectionError(Exception):
    """Every (query, engine) pair failed."""


@dataclass(frozen=True)
class SerpResult:
    engine_id: str
    query_text: str
    rank: int  # 1-based
    url: str
    title: str
    snippet: str
    fetched_at: int = 0  # epoch milliseconds


@dataclass
class ResultBatch:
    study_id: str
    results: list[SerpResult] = field(default_factory=list)
    failures: list[tuple[str, str, str]] = field(default_factory=list)  # (engine, query, reason)

    def check_invariants(self) -> None:
        by_pair: dict[tuple[str, str], list[int]] = {}
        for r in self.results:
            by_pair.setdefault((r.engine_id, r.query_text), []).append(r.rank)
        for pair, ranks in by_pair.items():
            if sorted(ranks) != list(range(1, len(ranks) + 1)):
                raise ValueError(f"{pair}: ranks {sorted(ranks)} are not a contiguous prefix 1..m")


@dataclass
class JournalEntry:
    engine_id: str
    query_text: str
    start: float  # monotonic seconds
    status: str  # "ok" | "retry" | "failed"


# ---------------------------------------------------------------------------
# HTML extraction


class _Element:
    __slots__ = ("tag", "attrs", "children", "parent", "text")

    def __init__(self, tag, attrs, parent):
        self.tag = tag
        self.attrs = dict(attrs)
        self.children: list[_Element] = []
        self.parent = parent
        self.text: list[str] = []

    @property
    def classes(self) -> set[str]:
        return set((self.attrs.get("class") or "").split())

    def itertext(self):
        yield from self.text
        for child in self.children:
            yield from child.itertext()

    def walk(self):
        yield self
        for child in self.children:
            yield from child.walk()


_VOID_TAGS = {"area", "base", "br", "col", "embed", "hr", "img", "input",
              "link", "meta", "param", "source", "track", "wbr"}


class _TreeBuilder(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.root = _Element("[document]", {}, None)
        self._stack = [self.root]

    def handle_starttag(self, tag, attrs):
        el = _Element(tag, attrs, self._stack[-1])
        self._stack[-1].children.append(el)
        if tag not in _VOID_TAGS:
            self._stack.append(el)

    def handle_startendtag(self, tag, attrs):
        self._stack[-1].children.append(_Element(tag, attrs, self._stack[-1]))

    def handle_endtag(self, tag):
        # Close the nearest matching open tag; tolerate stray closers.
        for i in range(len(self._stack) - 1, 0, -1):
            if self._stack[i].tag == tag:
                del self._stack[i:]
                break

    def handle_data(self, data):
        self._stack[-1].text.append(data)


def parse_html(page: str) -> _Element:
    builder = _TreeBuilder()
    builder.feed(page)
    builder.close()
    return builder.root


_SIMPLE_SELECTOR = re.compile(r"^([a-zA-Z][\w-]*|\*)?(#[\w-]+)?((?:\.[\w-]+)*)$")


def _parse_selector(selector: str) -> list[tuple[str | None, str | None, set[str]]]:
    """Parse a descendant-combinator CSS subset: tag, #id, .class chains."""
    parts = []
    for token in selector.split():
        m = _SIMPLE_SELECTOR.match(token)
        if not m:
            raise ValueError(f"unsupported selector token {token!r}")
        tag = m.group(1) if m.group(1) and m.group(1) != "*" else None
        el_id = m.group(2)[1:] if m.group(2) else None
        classes = set(m.group(3).split(".")[1:]) if m.group(3) else set()
        parts.append((tag, el_id, classes))
    if not parts:
        raise ValueError(f"empty selector {selector!r}")
    return parts


def _matches_simple(el: _Element, part) -> bool:
    tag, el_id, classes = part
    if tag and el.tag != tag:
        return False
    if el_id and el.attrs.get("id") != el_id:
        return False
    return classes <= el.classes


def _matches(el: _Element, parts) -> bool:
    if not _matches_simple(el, parts[-1]):
        return False
    remaining = parts[:-1]
    node = el.parent
    while remaining and node is not None:
        if _matches_simple(node, remaining[-1]):
            remaining = remaining[:-1]
        node = node.parent
    return not remaining


def select(root: _Element, selector: str) -> list[_Element]:
    """All elements matching the selector, in document order."""
    parts = _parse_selector(selector)
    return [el for el in root.walk() if el is not root and _matches(el, parts)]


@dataclass(frozen=True)
class SelectorProfile:
    """Per-engine extraction rules for one SERP DOM generation."""

    container: str
    link: str
    title: str
    snippet: str
    exclude: tuple[str, ...] = ()

    @classmethod
    def load(cls, path) -> "SelectorProfile":
        raw = yaml.safe_load(Path(path).read_text())
        return cls(
            container=raw["container"],
            link=raw["link"],
            title=raw["title"],
            snippet=raw["snippet"],
            exclude=tuple(raw.get("exclude") or ()),
        )


def _text_of(el: _Element | None) -> str:
    return " ".join("".join(el.itertext()).split()) if el is not None else ""


def _first(el: _Element, selector: str) -> _Element | None:
    found = select(el, selector)
    return found[0] if found else None


@dataclass
class ParsedSerp:
    items: list[tuple[str, str, str]]  # (url, title, snippet) in document order
    skipped_no_link: int = 0
    excluded: int = 0


def parse_serp_html(page: str, selectors: SelectorProfile, base_url: str = "") -> ParsedSerp:
    """Extract organic (url, title, snippet) triples from a results page.

    Containers matching an exclusion rule (ads, shopping units) are
    dropped; containers without a link are skipped and counted. Relative
    links resolve against the page <base href> or the supplied base_url.
    Raises ProfileMismatchError when no container matches at all, which
    signals DOM drift rather than an empty result list.
    """
    root = parse_html(page)
    base_el = _first(root, "base")
    if base_el is not None and base_el.attrs.get("href"):
        base_url = base_el.attrs["href"]

    containers = select(root, selectors.container)
    if not containers:
        raise ProfileMismatchError(
            f"profile mismatch: container selector {selectors.container!r} matched nothing"
        )
    excluded_nodes: set[int] = set()
    for rule in selectors.exclude:
        for el in select(root, rule):
            for node in el.walk():
                excluded_nodes.add(id(node))

    parsed = ParsedSerp(items=[])
    for container in containers:
        if id(container) in excluded_nodes:
            parsed.excluded += 1
            continue
        link_el = _first(container, selectors.link)
        href = link_el.attrs.get("href") if link_el is not None else None
        if not href:
            parsed.skipped_no_link += 1
            continue
        url = urljoin(base_url, href) if base_url else href
        title = _text_of(_first(container, selectors.title) or link_el)
        snippet_el = _first(container, selectors.snippet)
        # Snippet kept verbatim apart from whitespace normalization at the
        # HTML boundary; jurors may be shown it later.
        snippet = _text_of(snippet_el)
        parsed.items.append((url, title, snippet))
    return parsed


# ---------------------------------------------------------------------------
# Adapters


def query_file_name(query_text: str) -> str:
    """Stable fixture file name for a query (trimmed, hashed)."""
    return hashlib.sha256(query_text.strip().encode("utf-8")).hexdigest()[:24] + ".json"


class FixtureStore:
    """One directory per engine, one JSON file per query."""

    def __init__(self, root):
        self.root = Path(root)

    def path_for(self, engine_id: str, query_text: str) -> Path:
        return self.root / engine_id / query_file_name(query_text)

    def save(self, engine_id: str, query_text: str, results: list[dict]) -> Path:
        path = self.path_for(engine_id, query_text)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps({"query_text": query_text.strip(), "results": results},
                                   indent=2, ensure_ascii=False))
        return path

    def load(self, engine_id: str, query_text: str) -> list[dict]:
        path = self.path_for(engine_id, query_text)
        if not path.exists():
            raise NoRecordingError(f"no recording for query {query_text.strip()!r} on {engine_id}")
        return json.loads(path.read_text())["results"]


def fetch_fixture(query_text: str, k: int, store: FixtureStore, engine_id: str) -> list[SerpResult]:
    """Replay recorded results: min(k, stored) results in stored rank order."""
    if k < 1:
        raise ValueError("k must be >= 1")
    records = store.load(engine_id, query_text)
    records = sorted(records, key=lambda r: r["rank"])[:k]
    return [
        SerpResult(
            engine_id=engine_id,
            query_text=query_text.strip(),
            rank=r["rank"],
            url=r["url"],
            title=r.get("title", ""),
            snippet=r.get("snippet", ""),
            fetched_at=r.get("fetched_at", 0),
        )
        for r in records
    ]


class FixtureAdapter:
    def __init__(self, engine_id: str, fixture_dir, min_interval_s: float = 0.0):
        self.engine_id = engine_id
        self.store = FixtureStore(fixture_dir)
        self.min_interval_s = min_interval_s

    def fetch(self, query_text: str, k: int) -> list[SerpResult]:
        return fetch_fixture(query_text, k, self.store, self.engine_id)


class LiveScrapeAdapter:
    """Fetches a results page over HTTP and extracts with a SelectorProfile.

    The endpoint is a template with a {query} placeholder. A custom
    http_get hook replaces urllib in tests.
    """

    def __init__(self, engine_id: str, endpoint: str, profile: SelectorProfile,
                 min_interval_s: float = 1.0, http_get=None):
        self.engine_id = engine_id
        self.endpoint = endpoint
        self.profile = profile
        self.min_interval_s = min_interval_s
        self._http_get = http_get or self._default_get

    @staticmethod
    def _default_get(url: str) -> str:
        try:
            with urllib.request.urlopen(url, timeout=30) as resp:
                return resp.read().decode("utf-8", errors="replace")
        except OSError as exc:
            raise TransportError(str(exc)) from exc

    def fetch(self, query_text: str, k: int) -> list[SerpResult]:
        url = self.endpoint.format(query=quote_plus(query_text.strip()))
        page = self._http_get(url)
        parsed = parse_serp_html(page, self.profile, base_url=url)
        now_ms = int(time.time() * 1000)
        return [
            SerpResult(self.engine_id, query_text.strip(), rank, item_url, title, snippet, now_ms)
            for rank, (item_url, title, snippet) in enumerate(parsed.items[:k], start=1)
        ]


def make_adapter(spec, http_get=None):
    """Build the adapter an EngineSpec names."""
    params = spec.adapter_params
    if spec.adapter == "recorded_fixture":
        return FixtureAdapter(spec.engine_id, params["fixture_dir"],
                              min_interval_s=float(params.get("min_interval_s", 0.0)))
    if spec.adapter == "live_scrape":
        return LiveScrapeAdapter(
            spec.engine_id,
            endpoint=params["endpoint"],
            profile=SelectorProfile.load(params["selector_profile"]),
            min_interval_s=float(params.get("min_interval_s", 1.0)),
            http_get=http_get,
        )
    raise ValueError(f"unknown adapter {spec.adapter!r}")


MAX_RETRIES = 2


def collect_all(queries, adapters: dict, k: int, study_id: str = "",
                journal: list[JournalEntry] | None = None,
                clock=time.monotonic, sleep=time.sleep) -> ResultBatch:
    """Collect top-k results for every (query, engine) pair.

    Per-engine rate limits are honored (successive request starts for one
    engine at least min_interval_s apart). Transport errors get 2 retries
    with doubling backoff; a profile mismatch is terminal. Partial
    failures land in batch.failures; only total failure raises.
    """
    batch = ResultBatch(study_id=study_id)
    last_start: dict[str, float] = {}
    attempted = 0
    for query_text in queries:
        for engine_id, adapter in adapters.items():
            attempted += 1
            interval = getattr(adapter, "min_interval_s", 0.0)
            backoff = interval or 0.5
            error: FetchError | None = None
            for attempt in range(1 + MAX_RETRIES):
                if engine_id in last_start:
                    wait = last_start[engine_id] + interval - clock()
                    if wait > 0:
                        sleep(wait)
                start = clock()
                last_start[engine_id] = start
                try:
                    results = adapter.fetch(query_text, k)
                except TransportError as exc:
                    error = exc
                    if journal is not None:
                        journal.append(JournalEntry(engine_id, query_text, start, "retry"))
                    if attempt < MAX_RETRIES:
                        sleep(backoff)
                        backoff *= 2
                    continue
                except FetchError as exc:  # not retryable
                    error = exc
                    break
                batch.results.extend(results)
                if journal is not None:
                    journal.append(JournalEntry(engine_id, query_text, start, "ok"))
                error = None
                break
            if error is not None:
                if journal is not None:
                    journal.append(JournalEntry(engine_id, query_text, last_start[engine_id], "failed"))
                batch.failures.append((engine_id, query_text, str(error)))
    if attempted and len(batch.failures) == attempted:
        raise CollectionError(f"all {attempted} (query, engine) pairs failed")
    batch.check_invariants()
    return batch


def batch_to_records(batch: ResultBatch) -> dict:
    return {
        "study_id": batch.study_id,
        "results": [
            {"engine_id": r.engine_id, "query_text": r.query_text, "rank": r.rank,
             "url": r.url, "title": r.title, "snippet": r.snippet, "fetched_at": r.fetched_at}
            for r in batch.results
        ],
        "failures": [list(f) for f in batch.failures],
    }


def batch_from_records(record: dict) -> ResultBatch:
    return ResultBatch(
        study_id=record["study_id"],
        results=[SerpResult(**r) for r in record["results"]],
        failures=[tuple(f) for f in record["failures"]],
    )
