"""Study design model and configuration loading.

A study config is a single YAML file describing the engines under test,
the per-task query/result caps, the judgment scales, the tasks, and the
pre-/post-task questionnaires. Everything downstream (ingest, collection,
pooling, serving, analysis) reads the same immutable StudyConfig.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import yaml

SCHEMA_VERSION = 1

DEFAULT_MAX_QUERIES_PER_TASK = 3
DEFAULT_RESULTS_PER_QUERY = 10

DEFAULT_GRADED_LABELS = {
    1: "completely irrelevant",
    2: "irrelevant",
    3: "relevant",
    4: "highly relevant",
    5: "completely relevant",
}

ADAPTER_REQUIRED_PARAMS = {
    "recorded_fixture": ("fixture_dir",),
    "live_scrape": ("endpoint", "selector_profile"),
}


class ConfigSyntaxError(ValueError):
    """Config text could not be parsed; carries the position when known."""


class ConfigSemanticError(ValueError):
    """Config parsed but violates study invariants."""

    def __init__(self, violations: list["Violation"]):
        self.violations = violations
        super().__init__("; ".join(f"{v.code}: {v.message}" for v in violations))


@dataclass(frozen=True)
class Violation:
    code: str
    message: str


@dataclass(frozen=True)
class EngineSpec:
    engine_id: str
    adapter: str  # "recorded_fixture" | "live_scrape"
    adapter_params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class TaskSpec:
    task_id: str
    description: str
    complexity: str  # "simple" | "complex"


@dataclass(frozen=True)
class ScaleSpec:
    binary_labels: tuple[str, str] = ("relevant", "not relevant")
    graded_min: int = 1
    graded_max: int = 5
    graded_labels: dict = field(default_factory=lambda: dict(DEFAULT_GRADED_LABELS))


@dataclass(frozen=True)
class QuestionnaireItem:
    item_id: str
    prompt: str
    answer_kind: str  # "yes_no" | "integer" | "free_text"
    phase: str  # "pre" | "post"


@dataclass(frozen=True)
class StudyConfig:
    study_id: str
    engines: tuple[EngineSpec, ...]
    tasks: tuple[TaskSpec, ...]
    max_queries_per_task: int = DEFAULT_MAX_QUERIES_PER_TASK
    results_per_query: int = DEFAULT_RESULTS_PER_QUERY
    judgment_scales: ScaleSpec = field(default_factory=ScaleSpec)
    pre_questionnaire: tuple[QuestionnaireItem, ...] = ()
    post_questionnaire: tuple[QuestionnaireItem, ...] = ()
    shuffle_seed: int = 0
    user_groups: str = ""  # free-text study metadata
    timeframe: str = ""  # free-text study metadata

    def pool_ceiling(self) -> int:
        """Upper bound on engine-sourced pool items for one task."""
        return self.max_queries_per_task * self.results_per_query * len(self.engines)

    def questionnaire(self, phase: str) -> tuple[QuestionnaireItem, ...]:
        return self.pre_questionnaire if phase == "pre" else self.post_questionnaire


def _as_questionnaire(raw: list, phase: str) -> tuple[QuestionnaireItem, ...]:
    items = []
    for entry in raw or []:
        items.append(
            QuestionnaireItem(
                item_id=str(entry["item_id"]),
                prompt=str(entry.get("prompt", "")),
                answer_kind=str(entry.get("answer_kind", "yes_no")),
                phase=phase,
            )
        )
    return tuple(items)


def load_study_config(source) -> StudyConfig:
    """Load and validate a study config from a path, text, or stream.

    Applies the default caps (3 queries per task, 10 results per query)
    when omitted. Raises ConfigSyntaxError for malformed text and
    ConfigSemanticError naming every violated invariant.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    try:
        raw = yaml.safe_load(source)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigSyntaxError(f"config syntax error{where}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigSyntaxError("config root must be a mapping")

    scales_raw = raw.get("judgment_scales") or {}
    graded_labels = scales_raw.get("graded_labels")
    scales = ScaleSpec(
        binary_labels=tuple(scales_raw.get("binary_labels", ("relevant", "not relevant"))),
        graded_min=int(scales_raw.get("graded_min", 1)),
        graded_max=int(scales_raw.get("graded_max", 5)),
        graded_labels={int(k): str(v) for k, v in graded_labels.items()}
        if graded_labels
        else dict(DEFAULT_GRADED_LABELS),
    )

    try:
        config = StudyConfig(
            study_id=str(raw["study_id"]),
            engines=tuple(
                EngineSpec(
                    engine_id=str(e["engine_id"]),
                    adapter=str(e.get("adapter", "recorded_fixture")),
                    adapter_params=dict(e.get("adapter_params") or {}),
                )
                for e in raw.get("engines") or []
            ),
            tasks=tuple(
                TaskSpec(
                    task_id=str(t["task_id"]),
                    description=str(t.get("description", "")),
                    complexity=str(t.get("complexity", "simple")),
                )
                for t in raw.get("tasks") or []
            ),
            max_queries_per_task=int(raw.get("max_queries_per_task", DEFAULT_MAX_QUERIES_PER_TASK)),
            results_per_query=int(raw.get("results_per_query", DEFAULT_RESULTS_PER_QUERY)),
            judgment_scales=scales,
            pre_questionnaire=_as_questionnaire(raw.get("pre_questionnaire"), "pre"),
            post_questionnaire=_as_questionnaire(raw.get("post_questionnaire"), "post"),
            shuffle_seed=int(raw.get("shuffle_seed", 0)),
            user_groups=str(raw.get("user_groups", "")),
            timeframe=str(raw.get("timeframe", "")),
        )
    except KeyError as exc:
        raise ConfigSyntaxError(f"missing required config key: {exc.args[0]}") from exc

    violations = validate_config(config)
    if violations:
        raise ConfigSemanticError(violations)
    return config


def validate_config(config: StudyConfig) -> list[Violation]:
    """Check every study invariant; returns one Violation per breach.

    Deterministic: the same config always yields the same violation list,
    and each violated invariant appears exactly once.
    """
    out: list[Violation] = []
    if not config.engines:
        out.append(Violation("engines-empty", "engines non-empty"))
    engine_ids = [e.engine_id for e in config.engines]
    for dup in sorted({e for e in engine_ids if engine_ids.count(e) > 1}):
        out.append(Violation("engine-id-duplicate", f"duplicate engine_id {dup!r}"))
    for e in config.engines:
        if e.adapter not in ADAPTER_REQUIRED_PARAMS:
            out.append(Violation("adapter-unknown", f"engine {e.engine_id!r}: unknown adapter {e.adapter!r}"))
            continue
        for key in ADAPTER_REQUIRED_PARAMS[e.adapter]:
            if key not in e.adapter_params:
                out.append(
                    Violation(
                        "adapter-params-missing",
                        f"engine {e.engine_id!r}: adapter {e.adapter!r} requires param {key!r}",
                    )
                )
    if config.max_queries_per_task < 1:
        out.append(Violation("max-queries-invalid", "max_queries_per_task must be >= 1"))
    if config.results_per_query < 1:
        out.append(Violation("results-per-query-invalid", "results_per_query must be >= 1"))

    task_ids = [t.task_id for t in config.tasks]
    for dup in sorted({t for t in task_ids if task_ids.count(t) > 1}):
        out.append(Violation("task-id-duplicate", f"duplicate task_id {dup!r}"))
    for t in config.tasks:
        if t.complexity not in ("simple", "complex"):
            out.append(
                Violation("task-complexity-invalid", f"task {t.task_id!r}: complexity must be simple or complex")
            )

    scale = config.judgment_scales
    if scale.graded_min >= scale.graded_max:
        out.append(Violation("scale-bounds-inverted", "scale bounds inverted: graded_min must be < graded_max"))
    else:
        missing = [p for p in range(scale.graded_min, scale.graded_max + 1) if p not in scale.graded_labels]
        if missing:
            out.append(Violation("scale-labels-missing", f"missing graded labels for points {missing}"))
    if len(scale.binary_labels) != 2:
        out.append(Violation("binary-labels-invalid", "binary_labels must be a pair"))

    for phase, items in (("pre", config.pre_questionnaire), ("post", config.post_questionnaire)):
        item_ids = [q.item_id for q in items]
        for dup in sorted({i for i in item_ids if item_ids.count(i) > 1}):
            out.append(Violation("questionnaire-id-duplicate", f"duplicate {phase} questionnaire item_id {dup!r}"))
        for q in items:
            if q.answer_kind not in ("yes_no", "integer", "free_text"):
                out.append(
                    Violation("answer-kind-invalid", f"item {q.item_id!r}: unknown answer_kind {q.answer_kind!r}")
                )
    return out
