"""Run manifests: which command produced an output directory, from what
inputs, with what seed. One manifest per output directory."""

from __future__ import annotations

import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path

from . import __version__

MANIFEST_NAME = "manifest.json"


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir: str | Path, command: str, seed: int | None,
                   inputs: dict[str, str | Path] | None = None,
                   configs: dict[str, str] | None = None) -> Path:
    """Record one stage in the directory's single manifest.

    inputs: name -> file path (digested); configs: name -> checksum.
    Stages sharing an output directory each keep their latest record
    under their command name.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / MANIFEST_NAME
    doc = {"stages": {}}
    if path.exists():
        doc = json.loads(path.read_text())
        doc.setdefault("stages", {})
    doc["stages"][command] = {
        "command": command,
        "seed": seed,
        "input_digests": {name: file_digest(p) for name, p in (inputs or {}).items()},
        "config_checksums": dict(configs or {}),
        "tool_version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True))
    return path


def read_manifest(out_dir: str | Path) -> dict:
    return json.loads((Path(out_dir) / MANIFEST_NAME).read_text())


def stage_record(out_dir: str | Path, command: str) -> dict:
    return read_manifest(out_dir)["stages"][command]
