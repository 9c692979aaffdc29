"""Run manifests: enough to reproduce a command and check its outputs.

A manifest records the command line, parameters, seed and PRNG algorithm, the
active kernel backend and worker-lane cap, and content hashes of every input
and output file. Manifests deliberately carry no timestamps, so a rerun with
identical inputs produces a byte-identical manifest.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from . import accel
from .datagen import PRNG_NAME

PACKAGE_VERSION = "0.1.0"


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


def hash_files(paths, base: str | Path) -> dict[str, str]:
    base = Path(base)
    out = {}
    for p in sorted(Path(p) for p in paths):
        try:
            key = str(p.relative_to(base))
        except ValueError:
            key = str(p)
        out[key] = sha256_file(p)
    return out


def build_manifest(
    command: str,
    argv: list[str],
    params: dict,
    seed: int | None,
    inputs: dict[str, str],
    outputs: dict[str, str],
) -> dict:
    return {
        "command": command,
        "argv": argv,
        "package_version": PACKAGE_VERSION,
        "prng": None if seed is None else {"algorithm": PRNG_NAME, "seed": seed},
        "backend": accel.backend_name(),
        "worker_lanes": accel.worker_lanes(),
        "params": params,
        "inputs": inputs,
        "outputs": outputs,
    }


def write_manifest(manifest: dict, directory: str | Path, name: str = "manifest.json") -> Path:
    path = Path(directory) / name
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
