import json

import numpy as np
import pandas as pd
import pytest

from ensemble_stats.measures import push_forward_S
from ensemble_stats.models import EmpiricalMeasure, Provenance
from io_persistence.diagnostics import write_diagnostics, write_report
from io_persistence.run_config import (
    ConfigValidationError,
    apply_overrides,
    load_run_config,
    parse_run_config,
    resolved_document,
)
from io_persistence.snapshots import (
    HEADER,
    SnapshotFormatError,
    SnapshotVersionError,
    read_ensemble,
    read_snapshot,
    read_trajectory,
    write_ensemble,
    write_snapshot,
    write_trajectory,
)
from nudging.models import SyncReport
from spectral_core.grid import GridMismatchError, make_grid

BASE = {
    "grid": {"n_modes": 32, "period_L": 6.283185307179586},
    "solver": {"viscosity_nu": 0.1, "dt": 0.01},
    "forcing": {"kind": "kolmogorov", "grashof": 10.0, "wavenumber": 2},
    "run": {"t_final": 1.0, "sample_stride": 10},
}


class TestSnapshots:
    def test_field_round_trip_is_exact(self, tmp_path, grid16, random_field):
        u = random_field(grid16, seed=0)
        path = write_snapshot(u, tmp_path / "u.snp", time=1.5)
        snap = read_snapshot(path)
        assert snap.header.time == 1.5
        assert snap.header.div_free
        assert np.array_equal(snap.fields[0].coeffs, u.coeffs)
        assert path.stat().st_size == HEADER.size + 2 * 16 * 16 * 16

    def test_trajectory_round_trip(self, tmp_path, reference16):
        path = write_trajectory(reference16, tmp_path / "traj.snp")
        back = read_trajectory(path)
        assert back.t0 == reference16.t0
        assert back.dt_sample == reference16.dt_sample
        assert np.array_equal(back.stack, reference16.stack)

    def test_header_layout(self, tmp_path, grid16, random_field):
        raw = write_snapshot(random_field(grid16), tmp_path / "u.snp").read_bytes()
        assert HEADER.size == 64
        assert raw[:8] == b"NSE2DSNP"
        magic, version, n, L, t, count, flags, dt = HEADER.unpack(raw[:64])
        assert (version, n, count, flags) == (1, 16, 1, 3)

    def test_bad_magic(self, tmp_path, grid16, random_field):
        path = write_snapshot(random_field(grid16), tmp_path / "u.snp")
        raw = bytearray(path.read_bytes())
        raw[:8] = b"NOTASNAP"
        path.write_bytes(bytes(raw))
        with pytest.raises(SnapshotFormatError, match="bad magic"):
            read_snapshot(path)

    def test_unsupported_version(self, tmp_path, grid16, random_field):
        path = write_snapshot(random_field(grid16), tmp_path / "u.snp")
        raw = bytearray(path.read_bytes())
        raw[8:12] = (7).to_bytes(4, "little")
        path.write_bytes(bytes(raw))
        with pytest.raises(SnapshotVersionError, match="version 7") as info:
            read_snapshot(path)
        assert info.value.found == 7

    def test_truncated_payload(self, tmp_path, grid16, random_field):
        path = write_snapshot(random_field(grid16), tmp_path / "u.snp")
        path.write_bytes(path.read_bytes()[:-16])
        with pytest.raises(SnapshotFormatError, match="header implies"):
            read_snapshot(path)

    def test_short_header(self, tmp_path):
        path = tmp_path / "short.snp"
        path.write_bytes(b"NSE2DSNP")
        with pytest.raises(SnapshotFormatError, match="expected 64"):
            read_snapshot(path)

    def test_grid_mismatch(self, tmp_path, grid16, random_field):
        path = write_snapshot(random_field(grid16), tmp_path / "u.snp")
        with pytest.raises(GridMismatchError):
            read_snapshot(path, make_grid(16, 1.0))

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError, match="cannot read snapshot"):
            read_snapshot(tmp_path / "absent.snp")

    def test_nothing_to_write(self, tmp_path):
        with pytest.raises(ValueError, match="no fields"):
            write_snapshot([], tmp_path / "empty.snp")

    def test_ensemble_directory(self, tmp_path, grid16, forcing16, solver, random_field):
        init = [random_field(grid16, seed=s) for s in range(3)]
        mu = push_forward_S(init, forcing16, solver, 0.5, stride=5)
        paths = write_ensemble(mu, tmp_path / "ens")
        assert [p.name for p in paths] == ["member_0000.snp", "member_0001.snp", "member_0002.snp"]
        back = read_ensemble(tmp_path / "ens", grid=grid16)
        assert back.n_atoms == 3
        assert all(np.array_equal(a.stack, b.stack) for a, b in zip(back.atoms, mu.atoms))
        with pytest.raises(FileNotFoundError):
            read_ensemble(tmp_path / "nowhere")


class TestDiagnostics:
    def _report(self, **kw):
        base = dict(predicted_rate=1.0, bound_rate=0.5, target=1e-8, beta=1.0)
        base.update(kw)
        return SyncReport(**base)

    def test_empty_report_writes_header_only(self, tmp_path):
        path = write_diagnostics(self._report(), tmp_path / "sync.csv")
        assert path.read_text() == "t,grad_err,l2_err,envelope\n"

    def test_csv_keeps_values(self, tmp_path):
        report = self._report(times=[0.0, 0.1], grad_err=[1.0, 0.5], l2_err=[0.9, 0.4])
        path = write_diagnostics(report, tmp_path / "sync.csv")
        frame = pd.read_csv(path)
        assert list(frame.columns) == ["t", "grad_err", "l2_err", "envelope"]
        assert frame["grad_err"].tolist() == [1.0, 0.5]
        assert frame["envelope"].isna().all()

    def test_json_round_trip(self, tmp_path):
        report = self._report(times=[0.0], grad_err=[1.0], l2_err=[1.0], flags=["no nudging"])
        (csv_path, json_path) = write_report(report, tmp_path, "sync_report")
        assert csv_path.name == "sync_report.csv"
        assert SyncReport.model_validate_json(json_path.read_text()) == report

    def test_unknown_format(self, tmp_path):
        with pytest.raises(ValueError, match="unknown diagnostics format"):
            write_diagnostics(self._report(), tmp_path / "sync.xml", "xml")

    def test_unwritable_destination(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        with pytest.raises(OSError, match="cannot write diagnostics"):
            write_diagnostics(self._report(), blocker / "sync.csv")


class TestRunConfig:
    def test_minimal_document(self):
        cfg = parse_run_config(BASE)
        assert cfg.grid.n_modes == 32
        assert cfg.nudging.interpolant.n_obs_modes == 5
        assert cfg.build_grid().kappa0 == pytest.approx(1.0)
        assert cfg.metric_config(cfg.build_grid()).window == pytest.approx(10.0)

    def test_missing_viscosity(self):
        doc = json.loads(json.dumps(BASE))
        del doc["solver"]["viscosity_nu"]
        with pytest.raises(ConfigValidationError) as info:
            parse_run_config(doc)
        assert ("solver.viscosity_nu", "Field required") in info.value.errors

    def test_unknown_key(self):
        with pytest.raises(ConfigValidationError, match="run.t_end"):
            parse_run_config(BASE, ["run.t_end=3"])

    def test_odd_resolution(self):
        with pytest.raises(ConfigValidationError) as info:
            parse_run_config(BASE, ["grid.n_modes=33"])
        assert info.value.errors[0][0] == "grid.n_modes"

    def test_interpolant_errors_are_config_errors(self):
        overrides = ['nudging.interpolant={"kind": "volume_avg", "h": 1.0}']
        with pytest.raises(ConfigValidationError) as info:
            parse_run_config(BASE, overrides)
        assert info.value.errors[0][0] == "nudging.interpolant"

    def test_kolmogorov_needs_grashof(self):
        with pytest.raises(ConfigValidationError, match="grashof"):
            parse_run_config(BASE, ["forcing.grashof=null"])

    def test_overrides(self):
        doc = apply_overrides({"solver": {"dt": 0.1}}, ["solver.dt=0.005", "output.directory=runs/a"])
        assert doc == {"solver": {"dt": 0.005}, "output": {"directory": "runs/a"}}
        with pytest.raises(ConfigValidationError, match="key=value"):
            apply_overrides({}, ["solver.dt"])

    def test_overrides_leave_input_untouched(self):
        parse_run_config(BASE, ["solver.dt=0.02"])
        assert BASE["solver"]["dt"] == 0.01

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps(BASE))
        cfg = load_run_config(path, ["nudging.beta=50"])
        assert cfg.nudging.beta == 50
        again = parse_run_config(resolved_document(cfg))
        assert again == cfg

    def test_invalid_json_file(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text("{not json")
        with pytest.raises(ConfigValidationError, match="invalid JSON"):
            load_run_config(path)
        path.write_text("[1, 2]")
        with pytest.raises(ConfigValidationError, match="must be an object"):
            load_run_config(path)

    def test_ensemble_section(self):
        cfg = parse_run_config(
            BASE, ['ensemble.initial={"kind": "atoms_on_attractor", "radius": 2.0}', "ensemble.n_members=4"]
        )
        assert cfg.ensemble.initial.kind == "atoms_on_attractor"
        assert cfg.ensemble.n_members == 4
        with pytest.raises(ConfigValidationError):
            parse_run_config(BASE, ["ensemble.n_members=0"])


def test_measure_provenance_defaults(tmp_path, reference16):
    mu = EmpiricalMeasure(atoms=(reference16,), provenance=Provenance.PUSHFORWARD_S)
    write_ensemble(mu, tmp_path)
    assert read_ensemble(tmp_path).provenance is Provenance.PUSHFORWARD_S
