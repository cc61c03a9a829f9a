"""Snapshot containers, run configuration documents and report files."""

from io_persistence.diagnostics import write_diagnostics, write_frame, write_json, write_report
from io_persistence.run_config import (
    ConfigValidationError,
    RunConfigFile,
    apply_overrides,
    load_run_config,
    parse_run_config,
    resolved_document,
)
from io_persistence.snapshots import (
    Snapshot,
    SnapshotFormatError,
    SnapshotHeader,
    SnapshotVersionError,
    atomic_write_bytes,
    read_ensemble,
    read_snapshot,
    read_trajectory,
    write_ensemble,
    write_snapshot,
    write_trajectory,
)

__all__ = [
    "ConfigValidationError",
    "RunConfigFile",
    "Snapshot",
    "SnapshotFormatError",
    "SnapshotHeader",
    "SnapshotVersionError",
    "apply_overrides",
    "atomic_write_bytes",
    "load_run_config",
    "parse_run_config",
    "read_ensemble",
    "read_snapshot",
    "read_trajectory",
    "resolved_document",
    "write_diagnostics",
    "write_ensemble",
    "write_frame",
    "write_json",
    "write_report",
    "write_snapshot",
    "write_trajectory",
]
