import json

import pytest

from serpstudy.config import load_study_config
from serpstudy.serp import FixtureStore


def config_yaml(tmp_path, extra: str = "") -> str:
    return f"""
schema_version: 1
study_id: demo
shuffle_seed: 42
engines:
  - engine_id: alpha
    adapter: recorded_fixture
    adapter_params: {{fixture_dir: "{tmp_path}/fixtures/alpha"}}
  - engine_id: beta
    adapter: recorded_fixture
    adapter_params: {{fixture_dir: "{tmp_path}/fixtures/beta"}}
tasks:
  - task_id: t-simple
    description: find a birthplace
    complexity: simple
  - task_id: t-complex
    description: plan a trip
    complexity: complex
pre_questionnaire:
  - {{item_id: expect_easy, prompt: "The search task will be easy to solve", answer_kind: yes_no}}
post_questionnaire:
  - {{item_id: was_easy, prompt: "The search task was easy to solve", answer_kind: yes_no}}
  - {{item_id: found_correct, prompt: "I found the correct information", answer_kind: yes_no}}
  - {{item_id: minutes_spent, prompt: "Estimated minutes spent", answer_kind: integer}}
{extra}
"""


@pytest.fixture
def study_config(tmp_path):
    return load_study_config(config_yaml(tmp_path))


@pytest.fixture
def fixture_stores(tmp_path, study_config):
    return {
        e.engine_id: FixtureStore(e.adapter_params["fixture_dir"])
        for e in study_config.engines
    }


def make_serp_records(urls, query_text="q"):
    return [
        {"rank": i, "url": url, "title": f"title {i}", "snippet": f"snippet {i}"}
        for i, url in enumerate(urls, start=1)
    ]


def log_line(ts, participant, task, kind, **extra):
    return json.dumps({"timestamp": ts, "participant_id": participant,
                       "task_id": task, "kind": kind, **extra})
