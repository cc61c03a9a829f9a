"""Binary snapshot containers for fields, trajectories and ensembles.

Layout (little-endian): a 64-byte header, then ``field_count`` blocks of
(2, N, N) complex128 coefficients in row-major order, component 1 first.
See docs/formats.md.
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path
from typing import Sequence

import numpy as np
from loguru import logger as log
from pydantic import BaseModel, ConfigDict

from Config import config
from ensemble_stats.models import EmpiricalMeasure, Provenance
from nse_dynamics.models import Trajectory
from spectral_core.fields import SpectralVectorField
from spectral_core.grid import GridMismatchError, TorusGrid

MAGIC = b"NSE2DSNP"
HEADER = struct.Struct("<8sIIddIId16x")
FLAG_DIV_FREE = 1
FLAG_MEAN_ZERO = 2
_COEFF_DTYPE = np.dtype("<c16")


class SnapshotFormatError(ValueError):
    """Bad magic, short header or truncated payload."""


class SnapshotVersionError(ValueError):
    def __init__(self, found: int):
        self.found = found
        super().__init__(
            f"snapshot version {found} is not supported (expected {config.SNAPSHOT_VERSION})"
        )


class SnapshotHeader(BaseModel):
    model_config = ConfigDict(frozen=True)

    version: int
    n_modes: int
    period_L: float
    time: float
    field_count: int
    div_free: bool
    mean_zero: bool
    dt_sample: float = 0.0

    def pack(self) -> bytes:
        flags = (FLAG_DIV_FREE if self.div_free else 0) | (
            FLAG_MEAN_ZERO if self.mean_zero else 0
        )
        return HEADER.pack(
            MAGIC,
            self.version,
            self.n_modes,
            self.period_L,
            self.time,
            self.field_count,
            flags,
            self.dt_sample,
        )

    @classmethod
    def unpack(cls, raw: bytes) -> SnapshotHeader:
        if len(raw) < HEADER.size:
            raise SnapshotFormatError(
                f"header is {len(raw)} bytes, expected {HEADER.size}"
            )
        magic, version, n, L, time, count, flags, dt_sample = HEADER.unpack(
            raw[: HEADER.size]
        )
        if magic != MAGIC:
            raise SnapshotFormatError(f"bad magic {magic!r}")
        if version != config.SNAPSHOT_VERSION:
            raise SnapshotVersionError(version)
        return cls(
            version=version,
            n_modes=n,
            period_L=L,
            time=time,
            field_count=count,
            div_free=bool(flags & FLAG_DIV_FREE),
            mean_zero=bool(flags & FLAG_MEAN_ZERO),
            dt_sample=dt_sample,
        )

    @property
    def grid(self) -> TorusGrid:
        return TorusGrid(n_modes=self.n_modes, period_L=self.period_L)


class Snapshot(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    header: SnapshotHeader
    fields: tuple[SpectralVectorField, ...]


def atomic_write_bytes(path: str | os.PathLike, data: bytes) -> Path:
    """Write to a temporary file next to ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return path


def _encode(
    fields: Sequence[SpectralVectorField], time: float, dt_sample: float
) -> bytes:
    if not fields:
        raise ValueError("nothing to write: no fields given")
    grid = fields[0].grid
    for u in fields[1:]:
        grid.require_same(u.grid, "snapshot field")
    header = SnapshotHeader(
        version=config.SNAPSHOT_VERSION,
        n_modes=grid.n_modes,
        period_L=grid.period_L,
        time=time,
        field_count=len(fields),
        div_free=all(u.div_free for u in fields),
        mean_zero=all(u.mean_zero for u in fields),
        dt_sample=dt_sample,
    )
    payload = np.stack([u.coeffs for u in fields]).astype(_COEFF_DTYPE, copy=False)
    return header.pack() + np.ascontiguousarray(payload).tobytes()


def write_snapshot(
    fields: SpectralVectorField | Sequence[SpectralVectorField],
    path: str | os.PathLike,
    time: float = 0.0,
    dt_sample: float = 0.0,
) -> Path:
    if isinstance(fields, SpectralVectorField):
        fields = [fields]
    out = atomic_write_bytes(path, _encode(list(fields), time, dt_sample))
    log.debug(f"Wrote {len(fields)} field(s) to {out}")
    return out


def write_trajectory(traj: Trajectory, path: str | os.PathLike) -> Path:
    return write_snapshot(traj.states, path, time=traj.t0, dt_sample=traj.dt_sample)


def _decode(raw: bytes, grid: TorusGrid | None) -> tuple[SnapshotHeader, np.ndarray]:
    header = SnapshotHeader.unpack(raw)
    n = header.n_modes
    expected = HEADER.size + header.field_count * 2 * n * n * _COEFF_DTYPE.itemsize
    if len(raw) != expected:
        raise SnapshotFormatError(
            f"payload holds {len(raw)} bytes, header implies {expected}"
        )
    if grid is not None and not grid.matches(header.grid):
        raise GridMismatchError(
            f"snapshot grid (N={n}, L={header.period_L}) does not match "
            f"(N={grid.n_modes}, L={grid.period_L})"
        )
    stack = np.frombuffer(raw, dtype=_COEFF_DTYPE, offset=HEADER.size)
    stack = stack.reshape(header.field_count, 2, n, n).astype(np.complex128)
    return header, stack


def _read(path: str | os.PathLike) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read snapshot {path}: {exc}") from exc


def read_snapshot(path: str | os.PathLike, grid: TorusGrid | None = None) -> Snapshot:
    header, stack = _decode(_read(path), grid)
    g = grid or header.grid
    fields = tuple(
        SpectralVectorField.from_coeffs(g, c, div_free=header.div_free, enforce=False)
        for c in stack
    )
    return Snapshot(header=header, fields=fields)


def read_trajectory(
    path: str | os.PathLike,
    grid: TorusGrid | None = None,
    cls: type[Trajectory] = Trajectory,
) -> Trajectory:
    header, stack = _decode(_read(path), grid)
    return cls.from_stack(
        grid or header.grid,
        header.time,
        header.dt_sample,
        stack,
        div_free=header.div_free,
    )


def write_ensemble(mu: EmpiricalMeasure, directory: str | os.PathLike) -> list[Path]:
    """One container per member: member_0000.snp, member_0001.snp, ..."""
    directory = Path(directory)
    return [
        write_trajectory(a, directory / f"member_{i:04d}.snp")
        for i, a in enumerate(mu.atoms)
    ]


def read_ensemble(
    directory: str | os.PathLike,
    provenance: Provenance = Provenance.PUSHFORWARD_S,
    grid: TorusGrid | None = None,
) -> EmpiricalMeasure:
    paths = sorted(Path(directory).glob("member_*.snp"))
    if not paths:
        raise FileNotFoundError(f"no member_*.snp files in {directory}")
    atoms = tuple(read_trajectory(p, grid) for p in paths)
    return EmpiricalMeasure(atoms=atoms, provenance=provenance)
