"""Run manifests and atomic artifact writing for command-line runs.

Outputs go into one directory per run. Each file is written to a temporary
name and renamed into place; the manifest is written last and any stale
manifest is removed first, so a manifest never refers to missing outputs.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import platform
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np
import scipy

from . import __version__

MANIFEST_NAME = "manifest.json"
MANIFEST_SCHEMA = "mfcomp.run_manifest/1"


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def module_versions() -> dict:
    return {"mfcomp": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def dumps_json(obj) -> str:
    """Canonical JSON text: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=True) + "\n"


def dumps_csv(rows: Iterable[Iterable]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def write_atomic(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class RunManifest:
    command: list[str]
    subcommand: str
    config: dict
    seed: int | None
    seed_source: str
    versions: dict = field(default_factory=module_versions)
    input: dict | None = None
    outputs: dict = field(default_factory=dict)
    duration_s: float = 0.0
    schema: str = MANIFEST_SCHEMA

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        if d.get("schema") != MANIFEST_SCHEMA:
            raise ValueError(f"unsupported manifest schema {d.get('schema')!r}")
        return cls(**d)


class RunWriter:
    """Collects the outputs of one run in ``out_dir``."""

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        stale = self.out_dir / MANIFEST_NAME
        if stale.exists():
            stale.unlink()
        self.files: dict[str, str] = {}

    def text(self, name: str, text: str) -> Path:
        path = self.out_dir / name
        write_atomic(path, text)
        self.files[name] = hashlib.sha256(text.encode("utf-8")).hexdigest()
        return path

    def json(self, name: str, obj) -> Path:
        return self.text(name, dumps_json(obj))

    def csv(self, name: str, rows) -> Path:
        return self.text(name, dumps_csv(rows))

    def finish(self, manifest: RunManifest) -> Path:
        manifest.outputs = dict(sorted(self.files.items()))
        path = self.out_dir / MANIFEST_NAME
        write_atomic(path, dumps_json(manifest.to_dict()))
        return path
