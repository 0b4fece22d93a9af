import numpy as np
import pytest

from lsdunnett import sim
from lsdunnett.sim import (ScenarioError, SimulationError, SimulationScenario, load_scenario,
                           run_scenario, simulate_dataset, table1_row, table1_rows)


def test_grid_rows():
    rows = table1_rows()
    published = [r for r in rows.values() if r.published]
    assert len(published) == 20
    assert rows["H00"].published["MMM"] == 0.05
    assert rows["H10-unbalanced"].n == (16, 8, 8, 8)
    assert rows["adj-H11d-s2-1.8"].sd == (0.6, 1.8, 0.6, 0.6)


def test_dataset_draw_is_per_replicate():
    sc = table1_row("H00", nsim=100)
    a = simulate_dataset(sc, 7).response
    np.testing.assert_array_equal(a, simulate_dataset(sc, 7).response)
    assert not np.array_equal(a, simulate_dataset(sc, 8).response)


def test_validation():
    with pytest.raises(ScenarioError):
        SimulationScenario(n=(10, 10), mu=(1, 1), sd=(1,), nsim=100)
    with pytest.raises(ScenarioError):
        SimulationScenario(n=(10, 10), mu=(1, 1), sd=(1, 1), nsim=10)
    with pytest.raises(ScenarioError):
        SimulationScenario(n=(10, 10), mu=(1, 1), sd=(1, 1), tests=("NOPE",))
    with pytest.raises(ScenarioError):
        SimulationScenario(n=(10, 10), mu=(1, 1), sd=(1, 1), lepage_nresample=100)


def test_scenario_file(tmp_path):
    p = tmp_path / "custom.cfg"
    p.write_text("[scenario]\nn = 6, 6, 6\nmu = 0, 0, 0\nsd = 1, 1, 1\nnsim = 150\nseed = 3\n"
                 "tests = DUN, SCA\n")
    sc = load_scenario(p)
    assert sc.name == "custom"
    assert sc.tests == ("DUN", "SCA")
    assert sc.nsim == 150


@pytest.mark.parametrize("body,needle", [
    ("n = 6, 6\nmu = 0, 0\nsd = 1, x\n", ":4: field 'sd'"),
    ("n = 6, 6\nmu = 0, 0\nsd = 1, 1\ncolour = red\n", ":5: field 'colour'"),
    ("n = 6.5, 6\nmu = 0, 0\nsd = 1, 1\n", ":2: field 'n'"),
    ("mu = 0, 0\nsd = 1, 1\n", "field 'n': required"),
    ("n = 6, 6\nmu = 0, 0\nsd = 1, 1\nnsim = many\n", ":5: field 'nsim'"),
])
def test_scenario_diagnostics(tmp_path, body, needle):
    p = tmp_path / "bad.cfg"
    p.write_text("[scenario]\n" + body)
    with pytest.raises(ScenarioError, match=needle):
        load_scenario(p)


def test_scenario_semantic_error(tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text("[scenario]\nn = 6, 6\nmu = 0, 0, 0\nsd = 1, 1\n")
    with pytest.raises(ScenarioError, match="equal lengths"):
        load_scenario(p)


def test_reproducible_and_worker_independent():
    sc = SimulationScenario(n=(6, 6, 6), mu=(0, 0, 0.8), sd=(1, 1, 2), nsim=120, seed=5)
    a = run_scenario(sc, n_jobs=1)
    b = run_scenario(sc, n_jobs=1)
    c = run_scenario(sc, n_jobs=2)
    assert a.rates == b.rates == c.rates
    assert a.failures == c.failures


def test_mc_se():
    sc = SimulationScenario(n=(6, 6), mu=(0, 0), sd=(1, 1), nsim=200, tests=("DUN",))
    r = run_scenario(sc)
    p = r.rates["DUN"]
    assert r.mc_se["DUN"] == pytest.approx(np.sqrt(p * (1 - p) / 200))


def test_failures_counted(monkeypatch):
    calls = {"n": 0}
    real = sim.mlt_rejects

    def flaky(ds, *a, **k):
        calls["n"] += 1
        if calls["n"] == 1:
            raise RuntimeError("boom")
        return real(ds, *a, **k)

    monkeypatch.setattr(sim, "mlt_rejects", flaky)
    sc = SimulationScenario(n=(6, 6), mu=(0, 0), sd=(1, 1), nsim=200, tests=("MLT", "DUN"))
    r = run_scenario(sc)
    assert r.failures == {"MLT": 1, "DUN": 0}
    assert r.n_valid["MLT"] == 199


def test_too_many_failures(monkeypatch):
    def broken(*a, **k):
        raise RuntimeError("boom")

    monkeypatch.setattr(sim, "mlt_rejects", broken)
    sc = SimulationScenario(n=(6, 6), mu=(0, 0), sd=(1, 1), nsim=100, tests=("MLT",))
    with pytest.raises(SimulationError):
        run_scenario(sc)


def test_h10_row():
    r = run_scenario(table1_row("H10", nsim=400))
    assert r.rates["MMM"] == pytest.approx(0.93, abs=0.05)
    assert r.rates["DUN"] == pytest.approx(0.96, abs=0.05)
    assert r.rates["SCA"] == pytest.approx(0.04, abs=0.04)


def test_unbalanced_h10_row():
    r = run_scenario(table1_row("H10-unbalanced", nsim=400, tests=("SCA", "LEPA")))
    assert r.rates["SCA"] == pytest.approx(0.04, abs=0.04)
    assert r.rates["LEPA"] == pytest.approx(0.72, abs=0.08)


def test_tiny_common_sd_is_still_null():
    sc = SimulationScenario(n=(6, 6, 6), mu=(0, 0, 0), sd=(1e-8,) * 3, nsim=200, seed=2)
    r = run_scenario(sc)
    assert sum(r.failures.values()) == 0
    for t, rate in r.rates.items():
        assert rate <= 0.12, t
