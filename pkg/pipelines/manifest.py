"""Run manifests: resolved configuration, seed and a content hash of every input."""

from __future__ import annotations

import hashlib
import json
import os
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Any, Sequence

from loguru import logger as log
from pydantic import BaseModel, Field

from io_persistence.diagnostics import write_json

PACKAGE_NAME = "nudge-nse"


def package_version() -> str:
    try:
        return version(PACKAGE_NAME)
    except PackageNotFoundError:
        return "0.1.0"


class RunManifest(BaseModel):
    command: str
    config: dict[str, Any]
    seed: int
    version: str
    inputs: dict[str, str] = Field(default_factory=dict)
    content_hash: str


def canonical_json(doc: Any) -> bytes:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False).encode(
        "utf-8"
    )


def file_digest(path: str | os.PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def build_manifest(
    command: str,
    config: dict[str, Any],
    seed: int,
    input_paths: Sequence[str | os.PathLike] = (),
) -> RunManifest:
    """The hash covers command, config, seed and version as canonical JSON, then each input's bytes."""
    ver = package_version()
    inputs = {str(p): file_digest(p) for p in sorted(str(p) for p in input_paths)}
    h = hashlib.sha256(
        canonical_json({"command": command, "config": config, "seed": seed, "version": ver})
    )
    for name, digest in inputs.items():
        h.update(name.encode("utf-8"))
        h.update(bytes.fromhex(digest))
    return RunManifest(
        command=command,
        config=config,
        seed=seed,
        version=ver,
        inputs=inputs,
        content_hash=h.hexdigest(),
    )


def write_manifest(manifest: RunManifest, directory: str | os.PathLike) -> Path:
    out = write_json(manifest, Path(directory) / "manifest.json")
    log.info(f"Manifest {manifest.content_hash[:12]} written to {out}")
    return out
