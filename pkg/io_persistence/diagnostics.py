"""Report files: fixed-column CSV through pandas and JSON through pydantic."""

from __future__ import annotations

import os
from pathlib import Path
from typing import Literal, Protocol

import pandas as pd
from loguru import logger as log
from pydantic import BaseModel

from io_persistence.snapshots import atomic_write_bytes

DiagnosticsFormat = Literal["csv", "json"]


class TabularReport(Protocol):
    def to_frame(self) -> pd.DataFrame: ...

    def model_dump_json(self, **kwargs) -> str: ...


def write_frame(frame: pd.DataFrame, path: str | os.PathLike) -> Path:
    # repr-precision floats keep the CSV an exact record of the values
    text = frame.to_csv(index=False, float_format=None, lineterminator="\n")
    return atomic_write_bytes(path, text.encode("utf-8"))


def write_json(model: BaseModel, path: str | os.PathLike) -> Path:
    return atomic_write_bytes(path, model.model_dump_json(indent=2).encode("utf-8"))


def write_diagnostics(
    report: TabularReport, path: str | os.PathLike, fmt: DiagnosticsFormat = "csv"
) -> Path:
    path = Path(path)
    try:
        if fmt == "csv":
            out = write_frame(report.to_frame(), path)
        elif fmt == "json":
            out = write_json(report, path)
        else:
            raise ValueError(f"unknown diagnostics format {fmt!r}")
    except OSError as exc:
        raise OSError(f"cannot write diagnostics to {path}: {exc}") from exc
    log.debug(f"Wrote {fmt} diagnostics to {out}")
    return out


def write_report(
    report: TabularReport,
    directory: str | os.PathLike,
    stem: str,
    formats: list[DiagnosticsFormat] | tuple[DiagnosticsFormat, ...] = ("csv", "json"),
) -> list[Path]:
    """``<stem>.csv`` and/or ``<stem>.json`` under ``directory``."""
    directory = Path(directory)
    return [write_diagnostics(report, directory / f"{stem}.{fmt}", fmt) for fmt in formats]
