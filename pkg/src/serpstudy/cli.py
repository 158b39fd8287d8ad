"""Command-line orchestration of the study pipeline.

Subcommands mirror the pipeline stages: simulate, ingest, collect, pool,
serve, export, analyze, plus `pipeline` which chains the automated
stages. Judging is human-in-the-loop, so `pipeline` halts after pooling
and `pipeline --resume` picks up with export and analysis once judgments
exist. Exit codes: 0 success, 1 validation failure, 2 stage failure.
"""

from __future__ import annotations

import glob as globmod
import json
import sys
from pathlib import Path

import click

from . import manifest as mf
from .config import ConfigSemanticError, ConfigSyntaxError, load_study_config
from .ingest import (
    build_sessions,
    parse_log_stream,
    serialize_event,
    session_from_record,
    session_to_record,
)
from .pooling import build_pool, pool_from_record, pool_to_record
from .report import build_report, write_report_files
from .serp import CollectionError, batch_from_records, batch_to_records, collect_all, make_adapter
from .service import JudgmentStore, create_app, export_judgments, participant_token

EXIT_VALIDATION = 1
EXIT_STAGE = 2


def _load_config(path: str):
    try:
        with open(path) as fh:
            return load_study_config(fh)
    except (ConfigSyntaxError, ConfigSemanticError, OSError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)


def _read_sessions(path: Path):
    return [session_from_record(r) for r in json.loads(path.read_text())]


def _read_pools(pools_dir: Path) -> dict:
    pools = {}
    for path in sorted(pools_dir.glob("*.json")):
        if path.name == "tokens.json":
            continue
        pool = pool_from_record(json.loads(path.read_text()))
        pools[pool.pool_id] = pool
    return pools


@click.group()
@click.option("--study", "study_path", required=True, type=click.Path(exists=True),
              help="Path to the study config file.")
@click.option("--workdir", default="work", type=click.Path(), help="Pipeline artifact directory.")
@click.option("--seed", default=None, type=int, help="Override the study shuffle seed.")
@click.pass_context
def main(ctx, study_path, workdir, seed):
    config = _load_config(study_path)
    if seed is not None:
        config = config.__class__(**{**config.__dict__, "shuffle_seed": seed})
    ctx.obj = {"config": config, "workdir": Path(workdir), "study_path": study_path}
    ctx.obj["workdir"].mkdir(parents=True, exist_ok=True)
    click.echo(f"study {config.study_id}: pool ceiling "
               f"{config.pool_ceiling()} results per task before visited pages")


@main.command()
@click.option("--participants", "-n", default=1, type=int)
@click.pass_obj
def simulate(obj, participants):
    """Generate synthetic logs, SERP fixtures, and a judgment profile."""
    from .simulate import simulate_study

    config = obj["config"]
    result = simulate_study(config, participants, config.shuffle_seed,
                            logs_dir=obj["workdir"] / "logs")
    click.echo(f"simulated {result.n_sessions} sessions across {participants} participant(s); "
               f"{len(result.fixture_paths)} fixtures written")


def _run_ingest(obj, logs_glob: str) -> Path:
    workdir = obj["workdir"]
    paths = sorted(globmod.glob(logs_glob)) if logs_glob else sorted((workdir / "logs").glob("*.jsonl"))
    if not paths:
        click.echo("no log files found", err=True)
        sys.exit(EXIT_STAGE)
    if mf.stage_is_fresh(workdir, "ingested", paths):
        click.echo("ingest: up to date")
        return workdir / "sessions.json"
    events = []
    rejects = []
    for path in paths:
        with open(path) as fh:
            parsed = parse_log_stream(fh)
        events.extend(parsed.events)
        rejects.extend({"file": str(path), "line": r.line_no, "reason": r.reason}
                       for r in parsed.rejects)
    built = build_sessions(events)
    sessions_path = workdir / "sessions.json"
    sessions_path.write_text(json.dumps([session_to_record(s) for s in built.sessions], indent=2))
    (workdir / "rejects.json").write_text(json.dumps({
        "rejects": rejects,
        "orphan_events": [serialize_event(e) for e in built.orphans],
    }, indent=2))
    mf.write_manifest(workdir, "ingested", obj["config"].study_id, paths,
                      [sessions_path, workdir / "rejects.json"])
    click.echo(f"ingested {len(built.sessions)} sessions "
               f"({len(rejects)} rejects, {len(built.orphans)} orphan events)")
    return sessions_path


@main.command()
@click.option("--logs", "logs_glob", default="", help="Glob of log files (default workdir/logs/*.jsonl).")
@click.pass_obj
def ingest(obj, logs_glob):
    """Parse interaction logs into sessions."""
    _run_ingest(obj, logs_glob)


def _run_collect(obj, sessions_path: Path) -> Path:
    from .ingest import extract_queries

    config = obj["config"]
    workdir = obj["workdir"]
    batch_path = workdir / "batch.json"
    if mf.stage_is_fresh(workdir, "collected", [sessions_path]):
        click.echo("collect: up to date")
        return batch_path
    sessions = _read_sessions(sessions_path)
    queries: list[str] = []
    for session in sessions:
        for q in extract_queries(session, config.max_queries_per_task):
            if q.query_text not in queries:
                queries.append(q.query_text)
    adapters = {e.engine_id: make_adapter(e) for e in config.engines}
    journal = []
    try:
        batch = collect_all(queries, adapters, config.results_per_query,
                            study_id=config.study_id, journal=journal)
    except CollectionError as exc:
        click.echo(f"collect failed: {exc}", err=True)
        sys.exit(EXIT_STAGE)
    batch_path.write_text(json.dumps(batch_to_records(batch), indent=2))
    (workdir / "journal.json").write_text(json.dumps(
        [e.__dict__ for e in journal], indent=2))
    mf.write_manifest(workdir, "collected", config.study_id, [sessions_path],
                      [batch_path, workdir / "journal.json"])
    click.echo(f"collected {len(batch.results)} results, {len(batch.failures)} failure(s)")
    return batch_path


@main.command()
@click.option("--sessions", "sessions_path", default="", type=click.Path())
@click.pass_obj
def collect(obj, sessions_path):
    """Fetch top-k results for every extracted query on every engine."""
    path = Path(sessions_path) if sessions_path else obj["workdir"] / "sessions.json"
    _run_collect(obj, path)


def _run_pool(obj, sessions_path: Path, batch_path: Path) -> Path:
    config = obj["config"]
    workdir = obj["workdir"]
    pools_dir = workdir / "pools"
    if mf.stage_is_fresh(workdir, "pooled", [sessions_path, batch_path]):
        click.echo("pool: up to date")
        return pools_dir
    sessions = _read_sessions(sessions_path)
    batch = batch_from_records(json.loads(batch_path.read_text()))
    pools_dir.mkdir(parents=True, exist_ok=True)
    tokens = {}
    for session in sessions:
        pool = build_pool(batch, session, config)
        (pools_dir / f"{pool.pool_id}.json").write_text(json.dumps(pool_to_record(pool), indent=2))
        tokens[session.participant_id] = participant_token(config.shuffle_seed,
                                                           session.participant_id)
        for warning in pool.warnings:
            click.echo(f"pool {pool.pool_id}: warning: {warning}", err=True)
    (pools_dir / "tokens.json").write_text(json.dumps(tokens, indent=2))
    mf.write_manifest(workdir, "pooled", config.study_id, [sessions_path, batch_path], [pools_dir])
    click.echo(f"built {len(sessions)} pools in {pools_dir}")
    return pools_dir


@main.command()
@click.option("--sessions", "sessions_path", default="", type=click.Path())
@click.option("--batch", "batch_path", default="", type=click.Path())
@click.pass_obj
def pool(obj, sessions_path, batch_path):
    """Merge results and visited pages into judgment pools."""
    workdir = obj["workdir"]
    _run_pool(obj,
              Path(sessions_path) if sessions_path else workdir / "sessions.json",
              Path(batch_path) if batch_path else workdir / "batch.json")


@main.command()
@click.option("--pools", "pools_dir", default="", type=click.Path())
@click.option("--port", default=8400, type=int)
@click.option("--researcher-key", default="", envvar="SERPSTUDY_RESEARCHER_KEY")
@click.pass_obj
def serve(obj, pools_dir, port, researcher_key):
    """Serve pools to jurors over HTTP."""
    import uvicorn

    workdir = obj["workdir"]
    pools = _read_pools(Path(pools_dir) if pools_dir else workdir / "pools")
    store = JudgmentStore(workdir / "judgments.log")
    app = create_app(obj["config"], pools, store, researcher_key=researcher_key)
    uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")


def _run_export(obj) -> Path:
    workdir = obj["workdir"]
    pools = _read_pools(workdir / "pools")
    store = JudgmentStore(workdir / "judgments.log")
    try:
        export = export_judgments(pools, store)
    finally:
        store.close()
    exports_dir = workdir / "exports"
    exports_dir.mkdir(parents=True, exist_ok=True)
    export_path = exports_dir / "export.json"
    export_path.write_text(json.dumps(export, indent=2))
    mf.write_manifest(workdir, "exported", obj["config"].study_id,
                      [workdir / "judgments.log", workdir / "pools"], [export_path])
    click.echo(f"exported {len(export['judgments'])} judgments, "
               f"{len(export['questionnaires'])} questionnaire responses")
    return export_path


@main.command()
@click.pass_obj
def export(obj):
    """Join judgments back to provenance and write the export files."""
    _run_export(obj)


def _run_analyze(obj, segment: str, variant: str) -> Path:
    workdir = obj["workdir"]
    sessions = _read_sessions(workdir / "sessions.json")
    batch = batch_from_records(json.loads((workdir / "batch.json").read_text()))
    export = json.loads((workdir / "exports" / "export.json").read_text())
    report = build_report(obj["config"], sessions, batch, export,
                          segment=segment, t_test_variant=variant)
    out_dir = workdir / "report"
    write_report_files(report, out_dir)
    mf.write_manifest(workdir, "analyzed", obj["config"].study_id,
                      [workdir / "sessions.json", workdir / "batch.json",
                       workdir / "exports" / "export.json"], [out_dir])
    click.echo(f"report written to {out_dir} (segment: {segment}, "
               f"{report.n_sessions} sessions)")
    return out_dir


@main.command()
@click.option("--segment", default="all", help='e.g. "all", "complexity=simple", "post:found_correct=no"')
@click.option("--t-test-variant", "variant", default="pooled",
              type=click.Choice(["pooled", "welch", "paired"]))
@click.pass_obj
def analyze(obj, segment, variant):
    """Compute the full metric report from the exports."""
    _run_analyze(obj, segment, variant)


@main.command()
@click.option("--logs", "logs_glob", default="")
@click.option("--resume", is_flag=True, help="Run export and analyze after judging.")
@click.option("--segment", default="all")
@click.pass_obj
def pipeline(obj, logs_glob, resume, segment):
    """Chain the automated stages; halts before judging unless --resume."""
    try:
        if resume:
            mf.check_outputs(obj["workdir"], "pooled")
            _run_export(obj)
            _run_analyze(obj, segment, "pooled")
        else:
            sessions_path = _run_ingest(obj, logs_glob)
            batch_path = _run_collect(obj, sessions_path)
            _run_pool(obj, sessions_path, batch_path)
            click.echo("pipeline halted before judging; collect judgments, "
                       "then run `pipeline --resume`")
    except mf.StaleManifestError as exc:
        click.echo(f"stale manifest: {exc}", err=True)
        sys.exit(EXIT_STAGE)


if __name__ == "__main__":
    main()
