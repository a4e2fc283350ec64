import numpy as np
import pytest

from tracefem.config import make_config
from tracefem.io import read_diagnostics, read_manifest
from tracefem.simulation import Simulation, make_spaces, run

BASE = {"mesh.level": 2, "phys.epsilon": 0.05, "output.every_t": 0.02, "time.T": 0.05}


def test_t_zero_single_snapshot(tmp_path):
    res = run(make_config({**BASE, "time.T": 0.0}), tmp_path)
    assert len(res.records) == 1
    m = read_manifest(tmp_path / "manifest.txt")
    assert [t for t, _ in m.entries] == [0.0]


def test_snapshots_at_cadence(tmp_path):
    cfg = make_config(BASE)
    res = run(cfg, tmp_path)
    assert res.snapshots == [0.0, 0.02, 0.04, 0.05]
    h, rows = read_diagnostics(tmp_path / "diag.csv")
    assert h == cfg.hash and len(rows) == len(res.records)
    assert all(r["wall_ms"] == 0.0 for r in rows)
    assert (tmp_path / "snap_0.040000.vtk").exists()
    assert cfg.hash in (tmp_path / "snap_0.020000.vtk").read_text().splitlines()[1]


def test_fixed_step_mode():
    cfg = make_config({**BASE, "time.adaptive": False, "time.dt0": 0.01, "output.vtk": False})
    res = Simulation(cfg).run()
    np.testing.assert_allclose(np.diff(res.series("t")), 0.01, rtol=1e-12)
    assert res.rejected == 0


def test_nsch_run_logs_flow(tmp_path):
    cfg = make_config({**BASE, "model": "nsch", "time.adaptive": False})
    res = run(cfg, tmp_path, max_steps=3)
    assert len(res.records) == 4
    assert res.records[-1].E_kin > 0 and res.records[-1].res_step2 <= 1e-10


def test_shared_spaces_reused():
    cfg = make_config(BASE)
    sp_ = make_spaces(cfg)
    sim = Simulation(cfg.with_updates(ic__seed=3), sp_)
    assert sim.spaces is sp_


def test_deterministic_csv(tmp_path):
    cfg = make_config({**BASE, "output.vtk": False})
    run(cfg, tmp_path / "a")
    run(cfg, tmp_path / "b")
    assert (tmp_path / "a" / "diag.csv").read_bytes() == (tmp_path / "b" / "diag.csv").read_bytes()


def test_custom_initial_condition():
    cfg = make_config({**BASE, "time.T": 0.01})
    sim = Simulation(cfg)
    res = sim.run(c0=np.full(sim.spaces.p1.n_dofs, 0.5))
    assert res.records[-1].E_lyap == pytest.approx(res.records[0].E_lyap, rel=1e-9)
