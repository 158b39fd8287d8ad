import json
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from serpstudy.ingest import ClickRecord, QueryRecord, SessionRecord
from serpstudy.pooling import (
    EmptyPoolError,
    UrlError,
    build_pool,
    juror_view,
    normalize_url,
    pool_from_record,
    pool_to_record,
)
from serpstudy.serp import ResultBatch, SerpResult


@pytest.mark.parametrize("raw,expected", [
    ("HTTP://Example.COM:80/a#frag", "http://example.com/a"),
    ("https://example.com/", "https://example.com"),
    ("https://example.com/a?x=1", "https://example.com/a?x=1"),
    ("https://EXAMPLE.com:443/path", "https://example.com/path"),
    ("http://example.com:8080/a", "http://example.com:8080/a"),
    ("https://example.com/A/B", "https://example.com/A/B"),  # path case preserved
    ("https://example.com/a/?x=1#f", "https://example.com/a/?x=1"),
])
def test_normalize_url_rules(raw, expected):
    assert normalize_url(raw) == expected


def test_normalize_url_unparseable():
    with pytest.raises(UrlError, match="no-scheme"):
        normalize_url("no-scheme")


def test_normalize_url_idempotent():
    for raw in ("HTTP://A.B:80/x#y", "https://example.com/", "https://a.b/c?d=e"):
        once = normalize_url(raw)
        assert normalize_url(once) == once


def _result(engine, query, rank, url, title=None):
    marker = {"alpha": "A", "beta": "B"}.get(engine, "X")
    return SerpResult(engine, query, rank, url, title or f"{marker}{rank}",
                      f"snippet {rank}")


def _session(queries=("q",), clicks=(), visited=(), participant="p1", task="t1"):
    return SessionRecord(
        participant_id=participant, task_id=task, start=0, end=10_000,
        queries=tuple(QueryRecord("alpha", q, i) for i, q in enumerate(queries)),
        clicks=tuple(ClickRecord(url, rank, "alpha", q, 5)
                     for q, url, rank in clicks),
        visited_pages=tuple(visited),
    )


def _batch(results):
    return ResultBatch(study_id="demo", results=list(results))


def test_build_pool_merges_shared_url(study_config):
    batch = _batch([
        _result("alpha", "q", 1, "https://u1.example/"),
        _result("alpha", "q", 2, "https://u2.example/"),
        _result("alpha", "q", 3, "https://u3.example/"),
        _result("beta", "q", 1, "https://u2.example/"),
        _result("beta", "q", 2, "https://u4.example/"),
    ])
    pool = build_pool(batch, _session(), study_config)
    assert len(pool.items) == 4
    u2 = next(i for i in pool.items if i.normalized_url == "https://u2.example")
    assert sorted(p[0] for p in u2.provenance) == ["alpha", "beta"]
    # title/snippet from first canonical occurrence (alpha sorts before beta)
    assert u2.title == "A2"


def test_build_pool_adds_visited_page(study_config):
    batch = _batch([
        _result("alpha", "q", 1, "https://u1.example/"),
        _result("alpha", "q", 2, "https://u2.example/"),
        _result("alpha", "q", 3, "https://u3.example/"),
        _result("beta", "q", 1, "https://u2.example/"),
        _result("beta", "q", 2, "https://u4.example/"),
    ])
    pool = build_pool(batch, _session(visited=["https://u5.example/"]), study_config)
    assert len(pool.items) == 5
    u5 = next(i for i in pool.items if i.normalized_url == "https://u5.example")
    assert u5.provenance == []
    assert u5.was_visited_outside_serp


def test_build_pool_deterministic_permutation(study_config):
    batch = _batch([_result("alpha", "q", i, f"https://u{i}.example/") for i in range(1, 11)])
    one = build_pool(batch, _session(), study_config)
    two = build_pool(batch, _session(), study_config)
    assert [i.item_id for i in one.items] == [i.item_id for i in two.items]
    assert sorted(i.normalized_url for i in one.items) == sorted(
        f"https://u{i}.example" for i in range(1, 11))


def test_pools_differ_across_participants(study_config):
    batch = _batch([_result("alpha", "q", i, f"https://u{i}.example/") for i in range(1, 11)])
    a = build_pool(batch, _session(participant="p1"), study_config)
    b = build_pool(batch, _session(participant="p2"), study_config)
    assert {i.normalized_url for i in a.items} == {i.normalized_url for i in b.items}
    # seeded per participant: almost surely a different permutation
    assert [i.normalized_url for i in a.items] != [i.normalized_url for i in b.items]


def test_build_pool_was_clicked(study_config):
    batch = _batch([
        _result("alpha", "q", 1, "https://u1.example/"),
        _result("alpha", "q", 2, "https://u2.example/"),
    ])
    session = _session(clicks=[("q", "https://U1.example:443/", 1)])
    pool = build_pool(batch, session, study_config)
    flags = {i.normalized_url: i.was_clicked for i in pool.items}
    assert flags == {"https://u1.example": True, "https://u2.example": False}


def test_build_pool_empty_is_error(study_config):
    with pytest.raises(EmptyPoolError):
        build_pool(_batch([]), _session(queries=()), study_config)


def test_build_pool_warns_on_uncovered_query(study_config):
    batch = _batch([_result("alpha", "covered", 1, "https://u1.example/")])
    pool = build_pool(batch, _session(queries=("covered", "missing")), study_config)
    assert any("missing" in w for w in pool.warnings)


def test_merge_stable_under_batch_order(study_config):
    results = [
        _result("alpha", "q", 1, "https://u1.example/"),
        _result("alpha", "q", 2, "https://u2.example/"),
        _result("beta", "q", 1, "https://u2.example/"),
        _result("beta", "q", 2, "https://u4.example/"),
    ]
    session = _session()
    pools = []
    for seed in range(3):
        shuffled = results[:]
        random.Random(seed).shuffle(shuffled)
        pools.append(build_pool(_batch(shuffled), session, study_config))
    first = pool_to_record(pools[0])
    assert all(pool_to_record(p) == first for p in pools[1:])


def test_juror_view_field_set(study_config):
    batch = _batch([
        _result("alpha", "q", 1, "https://u1.example/"),
        _result("beta", "q", 1, "https://u1.example/"),
    ])
    pool = build_pool(batch, _session(), study_config)
    view = juror_view(pool)
    assert all(set(entry) == {"item_id", "url", "title", "snippet"} for entry in view)


def test_juror_view_serialization_has_no_engine_ids(study_config):
    batch = _batch([
        _result("alpha", "q", 1, "https://u1.example/"),
        _result("alpha", "q", 2, "https://u2.example/"),
        _result("alpha", "q", 3, "https://u3.example/"),
        _result("beta", "q", 1, "https://u2.example/"),
        _result("beta", "q", 2, "https://u4.example/"),
    ])
    pool = build_pool(batch, _session(), study_config)
    payload = json.dumps(juror_view(pool))
    for engine in ("alpha", "beta"):
        assert engine not in payload
    assert len(juror_view(pool)) == 4


def test_pool_record_round_trip(study_config):
    batch = _batch([
        _result("alpha", "q", 1, "https://u1.example/"),
        _result("beta", "q", 1, "https://u2.example/"),
    ])
    pool = build_pool(batch, _session(visited=["https://u3.example/x"]), study_config)
    restored = pool_from_record(json.loads(json.dumps(pool_to_record(pool))))
    assert pool_to_record(restored) == pool_to_record(pool)


_PROP_CONFIG = None


def _prop_config():
    global _PROP_CONFIG
    if _PROP_CONFIG is None:
        from tests.conftest import config_yaml
        from serpstudy.config import load_study_config
        import pathlib
        _PROP_CONFIG = load_study_config(config_yaml(pathlib.Path("/tmp/prop")))
    return _PROP_CONFIG


@given(st.data())
def test_pool_invariants_random(data):
    study_config = _prop_config()
    n_urls = data.draw(st.integers(min_value=1, max_value=40))
    urls = [f"https://site{i}.example/p" for i in range(n_urls)]
    results = []
    for engine in ("alpha", "beta"):
        chosen = data.draw(st.lists(st.sampled_from(urls), max_size=10, unique=True))
        for rank, url in enumerate(chosen, start=1):
            results.append(_result(engine, "q", rank, url))
    visited = data.draw(st.lists(st.sampled_from(urls), max_size=5, unique=True))
    session = _session(visited=visited)
    if not results and not visited:
        return
    pool = build_pool(_batch(results), session, study_config)
    norms = [i.normalized_url for i in pool.items]
    assert len(set(norms)) == len(norms)  # dedup exact
    assert len(pool.items) <= study_config.pool_ceiling() + len(visited)
    for item in pool.items:
        assert item.provenance or item.was_visited_outside_serp
