"""Atomic file writes, JSONL records, summary CSV and the hashed run manifest."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

MANIFEST = "manifest.json"


def atomic_write(path, data: str | bytes) -> Path:
    """Write via a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    raw = data.encode() if isinstance(data, str) else data
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(raw)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def dumps_jsonl(records) -> str:
    return "".join(json.dumps(r, sort_keys=True, allow_nan=True) + "\n" for r in records)


def read_jsonl(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


SUMMARY_FIELDS = ["controller", "behavior", "mode", "target", "prior_mean", "posterior_mean", "n_prior", "n_posterior"]


def summary_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SUMMARY_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(float(r[k])) if isinstance(r[k], float) else r[k]) for k in SUMMARY_FIELDS})
    return buf.getvalue()


def parse_summary_csv(text: str) -> list[dict]:
    out = []
    for r in csv.DictReader(io.StringIO(text)):
        row = dict(r)
        for k in ("target", "prior_mean", "posterior_mean"):
            row[k] = float(row[k])
        for k in ("n_prior", "n_posterior"):
            row[k] = int(row[k])
        out.append(row)
    return out


def summary_row(controller: str, spec, prior_values, posterior_values) -> dict:
    if len(prior_values) == 0 or len(posterior_values) == 0:
        raise ValueError("summary needs nonempty prior and posterior values")
    return {
        "controller": controller,
        "behavior": spec.behavior_id,
        "mode": spec.mode,
        "target": float(spec.target) if spec.mode == "matching" else float(spec.sign),
        "prior_mean": float(np.mean(prior_values)),
        "posterior_mean": float(np.mean(posterior_values)),
        "n_prior": len(prior_values),
        "n_posterior": len(posterior_values),
    }


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _artifact_files(run_dir: Path) -> list[str]:
    return sorted(
        str(p.relative_to(run_dir)) for p in run_dir.rglob("*")
        if p.is_file() and p.name != MANIFEST and not p.name.startswith(".")
    )


def write_manifest(run_dir, info: dict) -> Path:
    """Hash every artifact currently in ``run_dir`` into the manifest."""
    run_dir = Path(run_dir)
    files = {name: sha256_file(run_dir / name) for name in _artifact_files(run_dir)}
    doc = dict(info, files=files)
    return atomic_write(run_dir / MANIFEST, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_manifest(run_dir) -> dict:
    with open(Path(run_dir) / MANIFEST) as fh:
        return json.load(fh)


def verify_manifest(run_dir) -> list[str]:
    """Problems found (empty when every artifact matches its recorded hash)."""
    run_dir = Path(run_dir)
    try:
        files = read_manifest(run_dir)["files"]
    except FileNotFoundError:
        return [f"{MANIFEST} missing"]
    problems = []
    for name, digest in sorted(files.items()):
        p = run_dir / name
        if not p.is_file():
            problems.append(f"missing: {name}")
        elif sha256_file(p) != digest:
            problems.append(f"modified: {name}")
    for name in _artifact_files(run_dir):
        if name not in files:
            problems.append(f"unlisted: {name}")
    return problems
