import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from equiconv.coeffs import CoeffSeq, Lattice, UndersampledGrid
from equiconv.norms import (INF, a_sum, a_sum_bracket, ab_regime_table, asymptote_check,
                            kernel_from_matrix, lemma105_closed_form, lemma105_sum, lemma106_sum,
                            lemma106_table, line_integral, opnorm_endpoint, opnorm_general,
                            wiener_norm)
from equiconv.operators import index_window

P, D = Lattice.PER_PLUS, Lattice.DIR

# series values frozen from a 30-digit extrapolated summation
A_MINUS1 = 2.07667404746858117413
A_SIX = 1.54737799879919554861


# scalar sums

def test_a_sum_values():
    assert a_sum(-1, 1) == pytest.approx((1 + math.pi / math.tanh(math.pi)) / 2, rel=1e-12)
    assert a_sum(-1, 1) == pytest.approx(A_MINUS1, rel=1e-12)
    assert a_sum(6, 1) == pytest.approx(A_SIX, rel=1e-12)
    with pytest.raises(ValueError):
        a_sum(9, 1)


@pytest.mark.parametrize("z,r", [(6, 1), (30 + 5j, 1), (110 + 400j, 2), (-3, 1.5)])
def test_a_sum_inside_independent_bracket(z, r):
    lo, hi = a_sum_bracket(z, r)
    v = a_sum(z, r)
    assert lo * (1 - 1e-10) <= v <= hi * (1 + 1e-10)


def test_a_sum_decreasing_in_imaginary_part():
    for x in (-2.0, 6.0, 20.5, 110.0):
        vals = [a_sum(complex(x, y), 1) for y in (0.5, 1, 5, 50, 500)]
        assert all(b < a for a, b in zip(vals, vals[1:]))


def test_asymptote_regimes_bracketed():
    rows = asymptote_check((16, 32, 64, 128, 256), r_list=(1.0, 2.0))
    assert rows and all(1 / 20 <= r["ratio"] <= 20 for r in rows)


def test_ab_regimes_bracketed():
    rows = ab_regime_table((16, 32, 64))
    assert all(1 / 20 <= r["ratio"] <= 20 for r in rows)


def test_lemma105_examples():
    assert lemma105_sum(0) == pytest.approx(math.pi ** 2 / 6, abs=1e-10)
    assert lemma105_sum(1) == pytest.approx(math.pi ** 2 / 6 - 0.25, abs=1e-10)
    vals = [lemma105_sum(N) for N in range(0, 60)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert lemma105_sum(5000) == pytest.approx(math.pi ** 2 / 8, abs=1e-4)


def test_lemma105_recurrence_and_closed_form():
    for N in range(0, 51):
        assert lemma105_sum(N) == pytest.approx(lemma105_closed_form(N), abs=1e-8)
        assert abs(lemma105_sum(N + 1) - lemma105_sum(N) + 1 / (4 * (N + 1) ** 2)) <= 1e-10


def test_lemma105_harmonic_route():
    # inner sums over m by partial fractions: (H_{N+k} - H_{N-k}) / (2k), plus 1/(m^2) sums for k = 0
    N = 7
    H = np.cumsum(1 / np.arange(1, 2 * N + 2))
    H = np.concatenate([[0.0], H])
    total = math.pi ** 2 / 6 - sum(1 / n ** 2 for n in range(1, N + 1))
    for k in range(1, N + 1):
        total += (H[N + k] - H[N - k]) / (2 * k)
    assert lemma105_sum(N) == pytest.approx(total, abs=1e-12)


def test_lemma105_perturbation_hook():
    assert lemma105_sum(3, constant=1e-3) == pytest.approx(lemma105_sum(3) + 1e-3)


def test_lemma106_examples():
    assert lemma106_sum(2, 1) == pytest.approx(0.2)
    assert lemma106_sum(10, 1) <= 0.1
    with pytest.raises(ValueError):
        lemma106_sum(3, 3)


def test_lemma106_table_matches_enumeration_and_bound():
    for N in (2, 5, 17, 40):
        t = lemma106_table(N)
        for H in range(1, N):
            assert t[H - 1] == pytest.approx(lemma106_sum(N, H), rel=1e-12)
    for N in range(2, 201):
        t = lemma106_table(N)
        assert np.all(t * N / np.arange(1, N) <= 1.0)


def test_line_integrals_scale():
    cube = [N * line_integral(N, 1.0, 3.0) for N in (16, 32, 64)]
    assert max(cube) / min(cube) <= 2


# kernels and norms

def test_kernel_examples():
    w = index_window(P, 4)
    M = np.zeros((5, 5), complex)
    M[w.position(0), w.position(0)] = 1
    K = kernel_from_matrix(M, w)
    assert np.allclose(K.samples, 1)
    wd = index_window(D, 4)
    K = kernel_from_matrix(np.eye(4), wd, G=32)
    x = K.x
    ref = sum(2 * np.outer(np.sin(j * x), np.sin(j * x)) for j in range(1, 5))
    assert np.allclose(K.samples, ref)


@pytest.mark.parametrize("bc", [P, D, Lattice.PER_MINUS])
def test_kernel_reproduces_columns(bc):
    from equiconv.norms import basis_matrix
    w = index_window(bc, 6)
    n = len(w.indices)
    rng = np.random.default_rng(1)
    M = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    K = kernel_from_matrix(M, w)
    U = basis_matrix(w, K.G)
    for c in range(n):
        img = K.apply(U[:, c])
        coeffs = U.conj().T @ img / K.G
        assert np.allclose(coeffs, M[:, c], atol=1e-8)


def test_kernel_undersampled():
    w = index_window(P, 8)
    with pytest.raises(UndersampledGrid):
        kernel_from_matrix(np.eye(9), w, G=16)


def test_endpoint_examples():
    w = index_window(P, 4)
    M = np.zeros((5, 5), complex)
    M[w.position(0), w.position(0)] = 2.5
    assert opnorm_endpoint(kernel_from_matrix(M, w), "1-inf") == pytest.approx(2.5)
    assert opnorm_endpoint(M=np.diag([3.0, 1.0]), mode="2-2") == pytest.approx(3)
    a = np.array([1.0, 2.0, 2.0])
    b = np.array([3.0, 0.0, 4.0])
    assert opnorm_endpoint(M=np.outer(a, b.conj()), mode="2-2") == pytest.approx(15)


@pytest.mark.parametrize("bc", [P, D])
def test_endpoint_grid_independence(bc):
    from equiconv.coeffs import PotentialSpec, make_potential
    from equiconv.projections import deviation_for
    N, K = 16, 72
    V, _ = make_potential(PotentialSpec.parse("sawtooth:derivative=0"), bc, 2 * K)
    ps = deviation_for(V, bc, N, K)
    for mode, kw in (("1-inf", {}), ("1-b", {"b": 3.0}), ("a-inf", {"a": 1.5})):
        v1 = opnorm_endpoint(kernel_from_matrix(ps.D, ps.window), mode, **kw)
        v2 = opnorm_endpoint(kernel_from_matrix(ps.D, ps.window, G=8 * K), mode, **kw)
        assert abs(v2 - v1) <= 0.005 * v1


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_bracket_consistency(seed):
    rng = np.random.default_rng(seed)
    w = index_window(D, 6)
    M = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    K = kernel_from_matrix(M, w)
    s = np.linalg.norm(M, 2)
    b22 = opnorm_general(K, M, 2.0, 2.0, window=w)
    assert b22.lower == pytest.approx(s, rel=1e-4) and b22.upper == pytest.approx(s, rel=1e-4)
    b1i = opnorm_general(K, M, 1.0, INF, window=w)
    sup = np.abs(K.samples).max()
    assert b1i.lower == pytest.approx(sup, rel=1e-4) and b1i.upper == pytest.approx(sup, rel=1e-4)
    b = opnorm_general(K, M, 1.5, 3.0, window=w)
    assert b.lower <= b.upper
    assert b.gap >= 1.0


def test_bracket_rejects_bad_exponents():
    w = index_window(D, 4)
    K = kernel_from_matrix(np.eye(4), w)
    with pytest.raises(ValueError):
        opnorm_general(K, np.eye(4), 3.0, 2.0)


def test_wiener_examples():
    assert wiener_norm(CoeffSeq(P, {2: 1})) == 1
    assert wiener_norm(CoeffSeq(P, {2: 1, -2: 1})) == 2
    assert wiener_norm(np.array([[1, 0], [-2, 3j]])) == 3
