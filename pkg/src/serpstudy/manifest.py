"""Pipeline stage manifests: content digests for idempotent re-runs.

Each stage records the digests of its inputs and outputs. Re-running a
stage whose recorded digests still match the artifacts on disk is a
no-op; a mismatch (edited or corrupted artifact) forces recompute.
"""

from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path

STAGES = ("ingested", "collected", "pooled", "served", "exported", "analyzed")


class StaleManifestError(ValueError):
    pass


def digest_path(path) -> str:
    """SHA-256 of a file, or of a directory's sorted (name, digest) pairs."""
    path = Path(path)
    h = hashlib.sha256()
    if path.is_dir():
        for child in sorted(path.rglob("*")):
            if child.is_file():
                h.update(str(child.relative_to(path)).encode())
                h.update(child.read_bytes())
    elif path.is_file():
        h.update(path.read_bytes())
    else:
        h.update(b"<missing>")
    return h.hexdigest()


def _manifest_path(workdir, stage: str) -> Path:
    return Path(workdir) / "manifests" / f"{stage}.json"


def write_manifest(workdir, stage: str, study_id: str, inputs: dict, outputs: dict) -> None:
    if stage not in STAGES:
        raise ValueError(f"unknown stage {stage!r}")
    path = _manifest_path(workdir, stage)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps({
        "study_id": study_id,
        "stage": stage,
        "inputs": {str(p): digest_path(p) for p in inputs},
        "outputs": {str(p): digest_path(p) for p in outputs},
        "created_at": int(time.time() * 1000),
    }, indent=2))


def stage_is_fresh(workdir, stage: str, inputs) -> bool:
    """True when the stage's manifest exists and every recorded digest
    (inputs and outputs) still matches the bytes on disk."""
    path = _manifest_path(workdir, stage)
    if not path.exists():
        return False
    record = json.loads(path.read_text())
    current_inputs = {str(p) for p in inputs}
    if set(record["inputs"]) != current_inputs:
        return False
    for p, digest in record["inputs"].items():
        if digest_path(p) != digest:
            return False
    for p, digest in record["outputs"].items():
        if digest_path(p) != digest:
            return False
    return True


def check_outputs(workdir, stage: str) -> None:
    """Raise StaleManifestError naming the first output artifact whose
    bytes no longer match the stage manifest."""
    path = _manifest_path(workdir, stage)
    if not path.exists():
        raise StaleManifestError(f"no manifest for stage {stage!r}")
    record = json.loads(path.read_text())
    for p, digest in record["outputs"].items():
        if digest_path(p) != digest:
            raise StaleManifestError(f"stage {stage!r}: artifact {p} no longer matches its manifest")
