import json
import math
import os

import numpy as np
import pytest

from rydgauss import experiments as ex
from rydgauss.cli import main
from rydgauss.dynamics import run_quench
from rydgauss.hamiltonians import ModelSpec
from rydgauss.hilbert import OBC, PBC


def test_classify():
    assert ex.classify(ex.Z3_WICK_MIN) == ex.Z3
    assert ex.classify(ex.Z2_WICK_MAX) == ex.Z2
    assert ex.classify(0.5 * (ex.Z3_WICK_MIN + ex.Z2_WICK_MAX)) == ex.INDETERMINATE
    assert ex.classify(float("nan")) != ex.Z3


def test_transition_midpoint():
    x = np.linspace(0, 10, 11)
    assert ex.transition_midpoint(x, np.tanh(x - 4.0)) == pytest.approx(4.0, abs=0.1)
    assert ex.transition_midpoint(x, np.zeros(11)) == 0.0
    assert ex.transition_midpoint(x, -x) == pytest.approx(5.0)


def small_grid(**kw):
    return ex.ScanGrid(ModelSpec.uv(0, 0), 8, x=("u", -15, -10, 2), y=("v", -5, 8, 2),
                       n_starts=4, **kw)


def test_scan_records_failures(monkeypatch):
    real = ex.ground_metrics

    def flaky(spec, N, *a, **k):
        if spec.u == -10 and spec.v == 8:
            raise RuntimeError("no convergence")
        return real(spec, N, *a, **k)

    monkeypatch.setattr(ex, "ground_metrics", flaky)
    grid = small_grid()
    records = ex.phase_diagram(grid)
    assert len(records) == 4
    assert [r.ok for r in records] == [True, True, True, False]
    cols, rows = ex.scan_table(grid, records)
    assert cols == ["U", "V", "D_F", "W", "S", "class", "status"]
    assert "RuntimeError" in rows[-1][-1]
    assert math.isnan(rows[-1][2])


def test_scan_is_deterministic():
    grid = small_grid()
    a = ex.table_text(*ex.scan_table(grid, ex.phase_diagram(grid, seed=5)))
    b = ex.table_text(*ex.scan_table(grid, ex.phase_diagram(grid, seed=5)))
    assert a == b


def test_scan_grid_validation():
    with pytest.raises(ValueError):
        ex.ScanGrid(ModelSpec.uv(0, 0), 8, x=("w", 0, 1, 3))
    with pytest.raises(ValueError):
        ex.ScanGrid(ModelSpec.uv(0, 0), 8, x=("u", 0, 1, 1))
    with pytest.raises(ValueError):
        ex.ScanGrid(ModelSpec.uv(0, 0), 8, metrics=("D_F", "E"))


def test_obc_size_rules():
    with pytest.raises(ValueError):
        ex.obc_diagram(N=12)
    ex.check_obc_size(15)


def test_fss_limits():
    with pytest.raises(MemoryError):
        ex.finite_size_quench(sizes=(30,))
    with pytest.raises(ValueError):
        ex.finite_size_quench(sizes=(16,))


def tiny_config(**kw):
    base = dict(N=6, omega=0.05, u_z3=0.035, u_z2=0.08, t_max=40.0, dt=2.0,
                ensemble_t_max=32.0, ensemble_dt=2.0, realizations=2, df_starts=4)
    base.update(kw)
    return ex.LongRangeConfig(**base)


def test_clean_ensemble_equals_clean_run():
    cfg = tiny_config(width=0.0, realizations=1)
    ens = ex.run_ensemble(ex.EnsembleSpec(cfg, 1, master_seed=0))
    clean = run_quench(cfg.protocol(True, ensemble=True, seed=0))
    assert np.allclose(ens.mean("D_F"), clean["D_F"], atol=1e-12)
    assert np.all(ens.stderr("D_F") == 0)


def test_ensemble_offsets_reproducible():
    ens = ex.EnsembleSpec(tiny_config(), 3, master_seed=7)
    assert ens.offsets(1) == ex.EnsembleSpec(tiny_config(), 3, master_seed=7).offsets(1)
    assert ens.offsets(1) != ens.offsets(2)
    with pytest.raises(ValueError):
        ex.EnsembleSpec(tiny_config(), 0)


def test_longrange_suite_shapes():
    cfg = tiny_config()
    out = ex.longrange_suite(cfg, seed=1, ensembles=("z3",))
    assert set(out) == {"forward", "reverse", "ensemble_z3", "clean_z3"}
    ens = out["ensemble_z3"]
    assert ens.samples["D_F"].shape == (2, len(ens.times))
    cols, rows = ens.table()
    assert cols[0] == "t" and len(rows) == len(ens.times)
    assert out["forward"].norm_drift < 1e-8


def test_retention():
    res = ex.du_quench(N=6, t_max=2.0)
    assert ex.retention(res) >= 0
    cols, rows = ex.quench_table(res)
    assert cols[0] == "t"


# -- CLI ----------------------------------------------------------------------

def run_cli(tmp_path, *argv):
    return main(["--out", str(tmp_path), *argv])


def manifest(tmp_path):
    with open(tmp_path / "manifest.json") as fh:
        return json.load(fh)


def test_cli_basis(tmp_path):
    assert run_cli(tmp_path, "basis", "--N", "6") == 0
    text = (tmp_path / "basis.csv").read_text().splitlines()
    assert len(text) == 1 + 18
    m = manifest(tmp_path)
    assert m["experiment"] == "basis" and m["seed"] == 0


def test_cli_gaussianity_json(tmp_path, capsys):
    assert run_cli(tmp_path, "--format", "json", "gaussianity", "--N", "12",
                   "--u", "-15", "--v", "8") == 0
    out = json.loads(capsys.readouterr().out.splitlines()[0])
    assert out["D_F"] > 0.15
    assert os.path.exists(tmp_path / "gaussianity.json")


def test_cli_model_file(tmp_path):
    path = tmp_path / "model.json"
    path.write_text(ModelSpec.uv(-15, -5).to_json())
    assert run_cli(tmp_path, "spectrum", "--N", "12", "--model", str(path)) == 0
    assert manifest(tmp_path)["spec"]["model"]["v"] == -5


def test_cli_quench_then_powerspec(tmp_path):
    assert run_cli(tmp_path, "quench", "--N", "12", "--u-i", "-15", "--v-i", "8",
                   "--u-f", "-10", "--v-f", "-5", "--tmax", "4", "--dt", "0.1",
                   "--observables", "correlator,energy") == 0
    assert run_cli(tmp_path, "powerspec", str(tmp_path / "quench.csv")) == 0
    assert (tmp_path / "powerspec.csv").exists()


def test_cli_phase_diagram_and_errors(tmp_path):
    assert run_cli(tmp_path, "phase-diagram", "--N", "8", "--u-range", "-15", "-10", "2",
                   "--v-range", "-5", "8", "2", "--starts", "4") == 0
    rows = (tmp_path / "phase_diagram.csv").read_text().splitlines()
    assert len(rows) == 5
    assert run_cli(tmp_path, "obc", "--N", "12", "--u-range", "0", "1", "2",
                   "--v-range", "0", "1", "2") == 2
    assert run_cli(tmp_path, "fss", "--sizes", "30") == 2
