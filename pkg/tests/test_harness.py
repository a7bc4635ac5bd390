import logging
import math

import numpy as np
import pytest

from equiconv.coeffs import PotentialSpec
from equiconv.harness import (CSV_HEADER, INF, ExperimentConfig, RateTable, VerifyReport,
                              CheckResult, default_potential_class, emit_report, fit_rate,
                              predicted_exponent, run_rate_sweep, verify_suite)


# slope fitting

def test_fit_exact_power_law():
    rows = [(N, 5 * N ** -0.5) for N in (8, 16, 32, 64)]
    s, c, res = fit_rate(rows)
    assert s == pytest.approx(-0.5, abs=1e-12)
    assert c == pytest.approx(math.log(5), abs=1e-12)
    assert res == pytest.approx(0, abs=1e-12)


def test_fit_constant():
    s, _, _ = fit_rate([(N, 0.3) for N in (8, 16, 32, 64)])
    assert s == pytest.approx(0, abs=1e-12)


def test_fit_noisy_planted_slope():
    rng = np.random.default_rng(7)
    N = np.array([8, 16, 32, 64, 128, 256])
    for planted in (-0.25, -0.5, -1.0):
        for _ in range(20):
            y = 2.0 * N ** planted * (1 + 0.01 * rng.uniform(-1, 1, N.size))
            s, _, _ = fit_rate(list(zip(N, y)))
            assert abs(s - planted) <= 0.02


def test_fit_needs_four_rows():
    with pytest.raises(ValueError):
        fit_rate([(8, 1.0), (16, 0.5), (32, 0.25)])


# predicted exponents

def test_predicted_marchenko_case():
    g, why = predicted_exponent({"p": 1.0}, 2.0, INF)
    assert g == pytest.approx(0.5)
    assert why


def test_predicted_lp_cases():
    assert predicted_exponent({"p": 2.0}, 1.0, INF)[0] == pytest.approx(0.5)
    # p = 1.5 from L^1 to C: 1 - 1/p
    assert predicted_exponent({"p": 1.5}, 1.0, INF)[0] == pytest.approx(1 / 3)
    # small 1/r: full rate 1/N
    assert predicted_exponent({"p": 2.0}, 2.0, 2.0)[0] == 1.0


def test_predicted_sobolev_cases():
    assert predicted_exponent({"alpha": 0.25}, 1.0, INF)[0] == pytest.approx(0.25)
    assert predicted_exponent({"alpha": 0.5}, 1.0, INF)[0] is None
    assert predicted_exponent({"alpha": 0.75}, 4 / 3, INF)[0] is None
    assert predicted_exponent({"alpha": 1.0}, 1.5, 3.0)[0] == pytest.approx(0.5 - (1 / 1.5 - 1 / 3))
    assert predicted_exponent({"alpha": 1.0}, 1.5, 2.0)[0] == pytest.approx(1 - 1 / 1.5)
    assert predicted_exponent({"alpha": 1.0}, 2.5, 4.0)[0] == pytest.approx(0.25)


def test_default_classes():
    assert default_potential_class(PotentialSpec("mathieu")) == {"p": 2.0}
    assert default_potential_class(PotentialSpec("sawtooth", {"derivative": 0})) == {"p": 1.0}
    assert default_potential_class(PotentialSpec("lp_singular", {"beta": 0.75}))["p"] == pytest.approx(4 / 3)


# configuration

def test_config_invariants():
    with pytest.raises(ValueError):
        ExperimentConfig("per+", PotentialSpec("mathieu"), [16, 8, 32])
    with pytest.raises(ValueError):
        ExperimentConfig("per+", PotentialSpec("mathieu"), pairs=[(3, 2)])
    with pytest.raises(ValueError):
        ExperimentConfig("per+", PotentialSpec("mathieu"), pairs=[(0.5, 2)])
    cfg = ExperimentConfig("dir", PotentialSpec("mathieu"), pairs=[(1, "inf")])
    assert cfg.pairs == [(1.0, INF)] and cfg.k_max(8) == 40


def test_config_from_json(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text('{"bc": "dir", "potential": {"family": "sobolev_tail", "params": {"alpha": 0.5}, '
                 '"seed": 4, "window": 300}, "n_list": [4, 8], "pairs": [[1, "inf"]]}')
    cfg = ExperimentConfig.load(p)
    assert cfg.potential.seed == 4 and cfg.potential_window == 300 and cfg.n_list == [4, 8]


# sweeps

def test_free_sweep_suppresses_slope():
    cfg = ExperimentConfig("per+", PotentialSpec("trig"), [2, 4, 8, 16], [(1, INF), (2, 2)])
    t = run_rate_sweep(cfg)
    assert all(r.lower <= 1e-10 and r.upper <= 1e-10 for r in t.rows)
    for pair in t.pairs():
        assert t.fits[pair]["zero"] and t.slope(*pair) is None


def test_sweep_small_mathieu_and_determinism(tmp_path):
    cfg = ExperimentConfig("per-", PotentialSpec("mathieu"), [2, 4, 8, 16], [(1, INF), (1.5, 3.0)])
    t1 = run_rate_sweep(cfg)
    t2 = run_rate_sweep(cfg)
    assert t1.slope(1.0, INF) < -0.45
    assert all(r.lower <= r.upper * (1 + 1e-12) for r in t1.rows)
    assert t1.gate["passed"]
    a = emit_report(t1, tmp_path / "a")[0].read_bytes()
    b = emit_report(t2, tmp_path / "b")[0].read_bytes()
    assert a == b


# reports

def test_emit_header_and_svg(tmp_path):
    cfg = ExperimentConfig("dir", PotentialSpec("mathieu"), [2, 4, 8, 16], [(1, INF)])
    paths = emit_report(run_rate_sweep(cfg), tmp_path, formats=("csv", "svg"))
    names = {p.name for p in paths}
    assert {"rates.csv", "rates_norms.csv", "rates.svg"} <= names
    lines = (tmp_path / "rates.csv").read_text().splitlines()
    assert lines[0].split(",") == CSV_HEADER
    assert len(lines) == 5
    assert (tmp_path / "rates.svg").read_text().lstrip().startswith("<?xml")


def test_emit_empty_table_warns(tmp_path, caplog):
    from equiconv.coeffs import Lattice
    with caplog.at_level(logging.WARNING):
        emit_report(RateTable(Lattice.DIR, "none"), tmp_path)
    assert "empty" in caplog.text
    assert (tmp_path / "rates.csv").read_text().strip() == ",".join(CSV_HEADER)


def test_report_exit_code_counts_failures(tmp_path):
    rep = VerifyReport("quick", [CheckResult("a", True, "", 0.0), CheckResult("b", False, "", 0.0),
                                 CheckResult("c", False, "", 0.0)])
    assert rep.exit_code == 2
    p = emit_report(rep, tmp_path)[0]
    assert p.read_text().count("\n") == 4


def test_verify_quick_passes():
    rep = verify_suite("quick")
    assert rep.exit_code == 0, "\n".join(rep.lines())
    assert len(rep.checks) == 13


def test_verify_detects_perturbed_constant():
    rep = verify_suite("quick", {"lemma105_constant": 1e-6}, checks=["A_N closed form"])
    assert rep.exit_code == 1
    assert not rep.checks[0].passed
