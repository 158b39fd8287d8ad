import pytest
from hypothesis import given
from hypothesis import strategies as st

from serpstudy.config import (
    ConfigSemanticError,
    ConfigSyntaxError,
    EngineSpec,
    ScaleSpec,
    StudyConfig,
    TaskSpec,
    load_study_config,
    validate_config,
)
from tests.conftest import config_yaml

MINIMAL = """
study_id: tiny
engines:
  - engine_id: a
    adapter: recorded_fixture
    adapter_params: {fixture_dir: /tmp/a}
  - engine_id: b
    adapter: recorded_fixture
    adapter_params: {fixture_dir: /tmp/b}
tasks:
  - {task_id: t1, complexity: simple}
"""


def test_defaults_applied_and_ceiling():
    config = load_study_config(MINIMAL)
    assert config.max_queries_per_task == 3
    assert config.results_per_query == 10
    # 3 queries x 10 results x 2 engines
    assert config.pool_ceiling() == 60


def test_zero_engines_is_semantic_error():
    with pytest.raises(ConfigSemanticError, match="engines non-empty"):
        load_study_config("study_id: x\nengines: []\ntasks: []\n")


def test_default_graded_scale_has_five_labels():
    config = load_study_config(MINIMAL)
    scale = config.judgment_scales
    assert scale.graded_min == 1 and scale.graded_max == 5
    assert scale.graded_labels[1] == "completely irrelevant"
    assert scale.graded_labels[5] == "completely relevant"
    assert len(scale.graded_labels) == 5


def test_syntax_error_reports_position():
    with pytest.raises(ConfigSyntaxError, match="line"):
        load_study_config("study_id: [unclosed\nengines:\n")


def test_full_config_round_trip(tmp_path):
    text = config_yaml(tmp_path)
    one = load_study_config(text)
    two = load_study_config(text)
    assert one == two  # pure: same bytes, structurally identical
    assert validate_config(one) == []


def test_duplicate_task_id_cited():
    config = load_study_config(MINIMAL)
    bad = StudyConfig(**{**config.__dict__, "tasks": config.tasks + config.tasks})
    violations = validate_config(bad)
    assert [v for v in violations if v.code == "task-id-duplicate" and "t1" in v.message]


def test_inverted_scale_bounds():
    config = load_study_config(MINIMAL)
    bad = StudyConfig(**{**config.__dict__,
                         "judgment_scales": ScaleSpec(graded_min=5, graded_max=1)})
    violations = validate_config(bad)
    assert [v for v in violations if v.code == "scale-bounds-inverted"]


def test_missing_adapter_param_flagged():
    bad = StudyConfig(
        study_id="x",
        engines=(EngineSpec("a", "recorded_fixture", {}),),
        tasks=(TaskSpec("t", "", "simple"),),
    )
    assert [v for v in validate_config(bad) if v.code == "adapter-params-missing"]


@given(
    n_engines=st.integers(min_value=1, max_value=6),
    max_queries=st.integers(min_value=1, max_value=10),
    k=st.integers(min_value=1, max_value=50),
)
def test_pool_ceiling_property(n_engines, max_queries, k):
    config = StudyConfig(
        study_id="prop",
        engines=tuple(EngineSpec(f"e{i}", "recorded_fixture", {"fixture_dir": "/tmp"})
                      for i in range(n_engines)),
        tasks=(TaskSpec("t", "", "simple"),),
        max_queries_per_task=max_queries,
        results_per_query=k,
    )
    assert config.pool_ceiling() == max_queries * k * n_engines
    assert validate_config(config) == []
