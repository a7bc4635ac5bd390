import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from equiconv.coeffs import (CoeffSeq, Lattice, LatticeMismatch, NormalizationError, PotentialSpec,
                             UndersampledGrid, UnknownFamily, Weight, coeffs_from_pairs,
                             derive_potential_coeffs, exp_to_sine, grid, hilbert_ratio_statistic,
                             hilbert_transform, load_potential_config, lp_envelope, make_potential,
                             read_coeffs_csv, remainder, sine_to_exp, synthesize_on_grid,
                             weighted_norm, write_coeffs_csv)

P, Z, D = Lattice.PER_PLUS, Lattice.INTEGERS, Lattice.DIR


def seq(lat, d, role="f"):
    return CoeffSeq(lat, d, role)


# lattices and sequences

def test_lattice_membership():
    assert P.contains(-4) and not P.contains(3)
    assert Lattice.PER_MINUS.contains(-3) and not Lattice.PER_MINUS.contains(0)
    assert D.contains(1) and not D.contains(0) and not D.contains(-2)
    assert Lattice.parse("per-") is Lattice.PER_MINUS


def test_coeffseq_rejects_foreign_index():
    with pytest.raises(LatticeMismatch):
        seq(P, {3: 1.0})
    with pytest.raises(LatticeMismatch):
        seq(D, {0: 1.0})


def test_coeffseq_drops_zeros_and_sorts():
    q = seq(P, {4: 1.0, -2: 0.0, 2: 2.0})
    assert list(q.support) == [2, 4]
    assert q[6] == 0 and q[4] == 1.0


# weighted norms and remainders

def test_weighted_norm_examples():
    assert weighted_norm(seq(P, {2: 1, -2: 1})) == pytest.approx(math.sqrt(2))
    assert weighted_norm(seq(P, {2: 1}), Weight.sobolev(1)) == pytest.approx(math.sqrt(5))
    assert weighted_norm(seq(P, {}), Weight.log(2)) == 0.0


def test_remainder_examples():
    q = seq(P, {2: 1, -2: 1, 4: 1, -4: 1})
    assert remainder(q, 2) == pytest.approx(2.0)
    assert remainder(q, 6) == 0.0
    assert remainder(seq(P, {4: 1, -4: 1}), 3, Weight.sobolev(1)) == pytest.approx(math.sqrt(34))


@given(st.dictionaries(st.integers(-20, 20).map(lambda k: 2 * k), st.floats(-5, 5), max_size=8),
       st.floats(0, 2))
def test_remainder_monotone_and_matches_norm(d, alpha):
    q = seq(P, d)
    w = Weight.sobolev(alpha)
    vals = [remainder(q, M, w) for M in range(0, 44, 2)]
    assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))
    assert vals[0] == pytest.approx(weighted_norm(q, w))


def test_weight_positive_even_monotone():
    ks = np.arange(0, 50)
    for w in (Weight.sobolev(0.7), Weight.log(1.5), Weight.sobolev(0)):
        v = w(ks)
        assert np.all(v > 0)
        assert np.allclose(v, w(-ks))
        assert np.all(np.diff(v) >= 0)


# Hilbert transform

def test_hilbert_delta_zero():
    h = hilbert_transform(seq(Z, {0: 1.0}), window=10)
    assert h[0] == 0
    for n in range(1, 11):
        assert h[n] == pytest.approx(1 / n) and h[-n] == pytest.approx(-1 / n)
    assert h.tail > 0


def test_hilbert_delta_one():
    h = hilbert_transform(seq(Z, {1: 1.0}), window=8)
    assert h[1] == 0
    for n in (-5, 0, 2, 7):
        assert h[n] == pytest.approx(1 / (n - 1))


def test_hilbert_zero():
    h = hilbert_transform(seq(Z, {}))
    assert not h.entries


@settings(max_examples=25)
@given(st.lists(st.floats(-3, 3), min_size=5, max_size=5), st.lists(st.floats(-3, 3), min_size=5, max_size=5),
       st.floats(-2, 2))
def test_hilbert_linear(x, y, c):
    ks = range(-2, 3)
    X, Y = seq(Z, dict(zip(ks, x))), seq(Z, dict(zip(ks, y)))
    XY = seq(Z, {k: a + c * b for k, a, b in zip(ks, x, y)})
    hx, hy, hxy = (hilbert_transform(s, window=12) for s in (X, Y, XY))
    for n in range(-12, 13):
        assert hxy[n] == pytest.approx(hx[n] + c * hy[n], abs=1e-10)


def test_hilbert_statistic_bounded_under_doubling():
    s = [hilbert_ratio_statistic(W, 0.4, n_vectors=200) for W in (64, 128, 256)]
    assert max(s) / s[0] < 2.0
    assert max(s) < math.pi + 1


# potential coefficients

def test_derive_potential_examples():
    V = derive_potential_coeffs(seq(P, {2: 1}, "Q"), P)
    assert V[2] == pytest.approx(2j)
    V = derive_potential_coeffs(seq(P, {-4: 1j}, "Q"), P)
    assert V[-4] == pytest.approx(4)
    Vt = derive_potential_coeffs(seq(D, {3: 0.5}, "Q"), D)
    assert Vt[3] == pytest.approx(1.5)


def test_derive_potential_lattice_mismatch():
    with pytest.raises(LatticeMismatch):
        derive_potential_coeffs(seq(D, {3: 0.5}, "Q"), P)


@given(st.dictionaries(st.integers(1, 10).map(lambda k: 2 * k),
                       st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False),
                       max_size=5))
def test_real_q_gives_conjugate_symmetric_v(d):
    full = {}
    for k, v in d.items():
        full[k] = v
        full[-k] = np.conj(v)
    V = derive_potential_coeffs(seq(P, full, "Q"), P)
    for k in V.support:
        assert V[-k] == pytest.approx(np.conj(V[k]))


# basis conversion

def test_exp_to_sine_examples():
    qt = exp_to_sine(seq(P, {0: -1, 2: 1}, "Q"), window=32)
    assert qt[2] == pytest.approx(1j / math.sqrt(2))
    assert qt[1] == pytest.approx(math.sqrt(2) / math.pi * (-8 / 3))
    assert not exp_to_sine(seq(P, {}, "Q")).entries


def test_exp_to_sine_normalization_error():
    with pytest.raises(NormalizationError) as exc:
        exp_to_sine(seq(P, {2: 1}, "Q"))
    assert exc.value.defect == pytest.approx(1)
    assert "sum" in str(exc.value).lower()


def test_exp_to_sine_matches_quadrature():
    q = seq(P, {0: -1.5, 2: 1.0, -2: 0.25 - 0.5j, 4: 0.25 + 0.5j}, "Q")
    qt = exp_to_sine(q, window=40)
    x = np.linspace(0, math.pi, 20001)
    Q = sum(c * np.exp(1j * k * x) for k, c in q.entries.items())
    for m in range(1, 12):
        ref = np.trapezoid(Q * math.sqrt(2) * np.sin(m * x), x) / math.pi
        assert qt[m] == pytest.approx(ref, abs=1e-6)


def test_sine_to_exp_examples():
    q = sine_to_exp(seq(D, {2: 1}, "Q"), window=8)
    assert q[2] == pytest.approx(-1j / math.sqrt(2))
    assert q[-2] == pytest.approx(1j / math.sqrt(2))
    assert q[0] == 0 and q[4] == 0
    q = sine_to_exp(seq(D, {1: 1}, "Q"), window=10)
    for k in range(-5, 6):
        ref = math.sqrt(2) / math.pi * (1 / (1 - 2 * k) + 1 / (1 + 2 * k))
        assert q[2 * k] == pytest.approx(ref)
    assert not sine_to_exp(seq(D, {}, "Q")).entries


def test_round_trip_on_grid():
    q = seq(P, {0: -1.5, 2: 1.0, -2: 0.25 - 0.5j, 4: 0.25 + 0.5j}, "Q")
    G = 256
    back = sine_to_exp(exp_to_sine(q, window=4096), window=G // 2 - 2)
    f0 = synthesize_on_grid(q, P, G)
    f1 = synthesize_on_grid(back, P, G)
    assert np.sqrt(np.mean(np.abs(f1 - f0) ** 2)) <= 1e-6


# grid synthesis

def test_synthesis_examples():
    G = 16
    x = grid(G)
    assert np.allclose(synthesize_on_grid(seq(P, {0: 1}), P, G), 1)
    assert np.allclose(synthesize_on_grid(seq(D, {1: 1}), D, G), math.sqrt(2) * np.sin(x))
    assert np.allclose(synthesize_on_grid(seq(P, {2: 1, -2: 1}), P, G), 2 * np.cos(2 * x))


def test_synthesis_undersampled():
    with pytest.raises(UndersampledGrid):
        synthesize_on_grid(seq(P, {20: 1}), P, 16)


def test_sup_bounded_by_wiener():
    rng = np.random.default_rng(3)
    for lat in (P, D, Lattice.PER_MINUS):
        ks = [k for k in range(-15, 16) if lat.contains(k)]
        c = seq(lat, dict(zip(ks, rng.standard_normal(len(ks)) + 1j * rng.standard_normal(len(ks)))))
        f = synthesize_on_grid(c, lat, 64)
        assert np.abs(f).max() <= math.sqrt(2) * sum(abs(v) for v in c.entries.values())


# potential families

def test_mathieu_and_dirac():
    V, _ = make_potential(PotentialSpec("mathieu"), P, 8)
    assert V.entries == {-2: 1, 2: 1}
    V, _ = make_potential(PotentialSpec("dirac"), P, 4)
    assert V.entries == {-4: 1, -2: 1, 2: 1, 4: 1}


def test_sobolev_tail_law():
    V, _ = make_potential(PotentialSpec("sobolev_tail", {"alpha": 0.75}, seed=1), P, 16)
    assert abs(V[8]) == pytest.approx(8 ** 0.25 / (1 + math.log(8)))
    V2, _ = make_potential(PotentialSpec("sobolev_tail", {"alpha": 0.75}, seed=1), P, 16)
    assert V.entries == V2.entries


def test_potential_errors():
    with pytest.raises(UnknownFamily):
        make_potential(PotentialSpec("nope"), P, 8)
    with pytest.raises(ValueError):
        make_potential(PotentialSpec("lp_singular", {"beta": 1.0}), P, 8)
    with pytest.raises(ValueError):
        make_potential(PotentialSpec("mathieu"), P, 2)


def test_lp_coefficients_follow_envelope():
    V, _ = make_potential(PotentialSpec("lp_singular", {"beta": 0.5}), P, 400)
    # both sides of the singularity contribute the one-sided cosine integral
    for k in (200, 300, 400):
        assert abs(V[k]) == pytest.approx(2 * float(lp_envelope(0.5, k)) / math.pi, rel=0.01)


def test_potential_spec_parse_and_config(tmp_path):
    s = PotentialSpec.parse("sobolev_tail:alpha=0.5", seed=3)
    assert s.family == "sobolev_tail" and s.params["alpha"] == 0.5 and s.seed == 3
    cfg = s.to_config(window=64)
    p = tmp_path / "pot.json"
    p.write_text(__import__("json").dumps(cfg))
    s2, w = load_potential_config(p)
    assert s2 == s and w == 64


def test_coeff_csv_round_trip(tmp_path):
    q = coeffs_from_pairs(P, [(2, 1 + 2j), (-4, -0.5)])
    write_coeffs_csv(q, tmp_path / "q.csv")
    assert read_coeffs_csv(tmp_path / "q.csv", P).entries == q.entries
