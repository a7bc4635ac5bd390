"""Truncated Hill operators in the free eigenbasis and related scalar sums.

Matrices are indexed by an :class:`IndexWindow`.  For periodic and
antiperiodic problems entry ``(k, m)`` is ``k^2 delta_km + V(k - m)``; for
Dirichlet it is ``k^2 delta_km + (V~(|k-m|) - V~(k+m)) / sqrt 2``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla
from scipy.integrate import quad_vec
from scipy.linalg import lapack

from .coeffs import SQRT2, CoeffSeq, Lattice, LatticeMismatch, remainder


class SingularLambda(ValueError):
    """lambda coincides with a point of the free spectrum in the window."""


class ContourTooClose(RuntimeError):
    """A resolvent solve is too ill-conditioned to trust."""


@dataclass(frozen=True)
class IndexWindow:
    lattice: Lattice
    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(k) for k in self.indices)
        if list(idx) != sorted(set(idx)):
            raise ValueError("window indices must be sorted and distinct")
        bad = [k for k in idx if not self.lattice.contains(k)]
        if bad:
            raise LatticeMismatch(f"indices {bad[:5]} not in lattice {self.lattice.value}")
        object.__setattr__(self, "indices", idx)

    def __len__(self):
        return len(self.indices)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=np.int64)

    @property
    def k_max(self) -> int:
        return max(abs(k) for k in self.indices)

    def position(self, k: int) -> int:
        return self.indices.index(int(k))


def index_window(bc: Lattice | str, K_max: int) -> IndexWindow:
    """Lattice indices with ``|k| <= K_max`` (``1..K_max`` for Dirichlet)."""
    bc = Lattice.parse(bc)
    if K_max < 2:
        raise ValueError("K_max must be at least 2")
    if bc is Lattice.DIR:
        return IndexWindow(bc, tuple(range(1, K_max + 1)))
    if bc is Lattice.PER_PLUS:
        top = K_max - K_max % 2
        return IndexWindow(bc, tuple(range(-top, top + 1, 2)))
    if bc is Lattice.PER_MINUS:
        top = K_max - (1 - K_max % 2)
        return IndexWindow(bc, tuple(range(-top, top + 1, 2)))
    raise LatticeMismatch("INTEGERS is not a boundary condition")


@dataclass(frozen=True)
class TruncatedOperator:
    window: IndexWindow
    matrix: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.window)
        if self.matrix.shape != (n, n):
            raise ValueError(f"matrix shape {self.matrix.shape} does not match window length {n}")

    @property
    def bc(self) -> Lattice:
        return self.window.lattice

    @property
    def free_diagonal(self) -> np.ndarray:
        return self.window.array.astype(float) ** 2

    def potential_part(self) -> np.ndarray:
        """Matrix of the potential alone (diagonal k^2 removed)."""
        P = self.matrix.copy()
        P[np.diag_indices_from(P)] -= self.free_diagonal
        return P

    def eigenvalues(self) -> np.ndarray:
        ev = sla.eigvals(self.matrix)
        return ev[np.lexsort((ev.imag, ev.real))]


def potential_matrix(V: CoeffSeq, w: IndexWindow) -> np.ndarray:
    """Matrix of multiplication by v in the basis of ``w``."""
    bc = w.lattice
    if V.lattice is not bc.potential_lattice:
        raise LatticeMismatch(
            f"potential coefficients on {V.lattice.value}, window bc {bc.value} needs "
            f"{bc.potential_lattice.value}")
    k = w.array
    if bc is Lattice.DIR:
        diff = np.abs(k[:, None] - k[None, :])
        tot = k[:, None] + k[None, :]
        return (V.lookup(diff) - V.lookup(tot)) / SQRT2
    return V.lookup(k[:, None] - k[None, :])


def assemble_operator(V: CoeffSeq, w: IndexWindow, label: str = "") -> TruncatedOperator:
    """Truncated matrix of ``L = L0 + v``; the free part ``k^2`` sits exactly on the diagonal."""
    M = potential_matrix(V, w).astype(complex)
    if w.lattice is not Lattice.DIR and V[0] != 0:
        raise ValueError("periodic potential coefficients must have V(0) = 0")
    M[np.diag_indices_from(M)] += w.array.astype(float) ** 2
    prov = {"bc": w.lattice.value, "potential": label, "K_max": w.k_max, "size": len(w)}
    return TruncatedOperator(w, M, prov)


@dataclass(frozen=True)
class ContourRect:
    """Rectangle ``-omega <= Re z <= N^2 + N``, ``|Im z| <= h``."""

    N: int
    omega: float
    h: float

    def __post_init__(self):
        if self.omega <= 0 or self.h <= 0:
            raise ValueError("omega and h must be positive")
        if self.N < 0:
            raise ValueError("N must be nonnegative")

    @property
    def right(self) -> float:
        return float(self.N * self.N + self.N)

    @property
    def left(self) -> float:
        return -float(self.omega)

    def distance(self, z) -> np.ndarray:
        """Distance from points to the boundary of the rectangle."""
        z = np.asarray(z, dtype=complex)
        x, y = z.real, z.imag
        lo, hi, h = self.left, self.right, self.h
        dx = np.maximum(np.maximum(lo - x, x - hi), 0.0)
        dy = np.maximum(np.abs(y) - h, 0.0)
        outside = np.hypot(dx, dy)
        inside = np.minimum.reduce([x - lo, hi - x, h - y, y + h])
        return np.where((dx > 0) | (dy > 0), outside, inside)

    def contains(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return (z.real >= self.left) & (z.real <= self.right) & (np.abs(z.imag) <= self.h)


# ---------------------------------------------------------------------------
# square-root multiplier and the compressed operator


def _sqrt_branch(z: np.ndarray) -> np.ndarray:
    # sqrt(r) exp(i phi / 2) with phi in [0, 2 pi)
    phi = np.mod(np.angle(z), 2.0 * np.pi)
    return np.sqrt(np.abs(z)) * np.exp(0.5j * phi)


def k_lambda_diag(lam: complex, w: IndexWindow | np.ndarray) -> np.ndarray:
    """Diagonal of ``K_lambda``: ``(lambda - j^2)^(-1/2)`` on the branch ``0 <= arg < 2 pi``."""
    j = w.array if isinstance(w, IndexWindow) else np.asarray(w)
    d = complex(lam) - j.astype(float) ** 2
    if np.any(d == 0):
        raise SingularLambda(f"lambda = {lam} is a free eigenvalue of the window")
    return 1.0 / _sqrt_branch(d)


def kvk_matrix(V: CoeffSeq, lam: complex, w: IndexWindow) -> np.ndarray:
    kd = k_lambda_diag(lam, w)
    return kd[:, None] * potential_matrix(V, w) * kd[None, :]


def _z_extension(V: CoeffSeq) -> CoeffSeq:
    """``q(k)`` on all of Z: zeros off 2Z for periodic data, ``q~(|k|)`` for sine data."""
    if V.lattice is Lattice.DIR:
        ent = {}
        for k, v in V.entries.items():
            ent[k] = v
            ent[-k] = v
        return CoeffSeq(Lattice.INTEGERS, ent, V.role)
    return CoeffSeq(Lattice.INTEGERS, V.entries, V.role)


def kvk_hs_norm(V: CoeffSeq, lam: complex, w: IndexWindow) -> tuple[float, float]:
    """Hilbert-Schmidt norm of ``K V K`` and the unified upper bound.

    The bound is ``(sum_{|j|,|m| <= K} |V(j-m)|^2 / (|lam-j^2||lam-m^2|))^(1/2)``
    with ``V`` extended to Z (zero off 2Z for Per, evenly for Dir), which
    dominates the window matrix for every boundary condition.
    """
    hs = float(np.linalg.norm(kvk_matrix(V, lam, w)))
    K = w.k_max
    j = np.arange(-K, K + 1)
    Vz = _z_extension(V)
    d = 1.0 / np.abs(complex(lam) - j.astype(float) ** 2)
    weights = np.abs(Vz.lookup(j[:, None] - j[None, :])) ** 2
    bound = float(np.sqrt(d @ weights @ d))
    return hs, bound


# ---------------------------------------------------------------------------
# scalar sums along the line Re z = N^2 + N


def _tail_bracket(f, start: float, extra: int = 1):
    """``(int_{start+1}^inf f, int_start^inf f)``; brackets the sum of a decreasing tail."""
    hi, _ = quad_vec(f, start, np.inf, epsabs=0.0, epsrel=1e-12, limit=400)
    band, _ = quad_vec(f, start, start + extra, epsabs=0.0, epsrel=1e-12)
    return np.asarray(hi) - np.asarray(band), np.asarray(hi)


def _initial_window(lam: complex, window: int | None) -> int:
    base = int(4 * math.sqrt(max(abs(lam.real), 1.0))) + 64
    return max(base, window or 0)


def ab_sums(N: int, y: float, window: int | None = None, rtol: float = 1e-6,
            return_error: bool = False):
    """``a_N(y) = sum_Z 1/|lam-k^2|`` and ``b_N(y) = sum_Z 1/|lam-k^2|^2``, ``lam = N^2+N+iy``.

    Terms with ``|k| <= W`` are summed directly; the rest is bracketed
    between two integrals and the window is doubled until the bracket is
    narrower than ``rtol`` relative.
    """
    lam = complex(N * N + N, y)
    W = _initial_window(lam, window if window is not None else 4 * N)
    while True:
        k = np.arange(-W, W + 1, dtype=float)
        inv = 1.0 / np.abs(lam - k * k)
        direct = np.array([inv.sum(), (inv * inv).sum()])

        def f(t):
            g = 1.0 / abs(lam - t * t)
            return np.array([g, g * g])

        lo, hi = _tail_bracket(f, W)
        lo, hi = 2 * lo, 2 * hi
        est = direct + 0.5 * (lo + hi)
        err = 0.5 * (hi - lo)
        if np.all(err <= rtol * est) or W > 1 << 24:
            break
        W *= 2
    if return_error:
        return float(est[0]), float(est[1]), err
    return float(est[0]), float(est[1])


def psi_exact(q: CoeffSeq, N: int, y: float, window: int | None = None, rtol: float = 1e-9) -> float:
    """``psi_N(y) = sum_{j,m in Z} (j-m)^2 |q(j-m)|^2 / (|lam-j^2||lam-m^2|)``."""
    qz = _z_extension(q)
    if not qz.entries:
        return 0.0
    s, qs = qz.arrays()
    sf = s.astype(float)
    wgt = sf * sf * np.abs(qs) ** 2
    lam = complex(N * N + N, y)
    S = int(np.abs(s).max())
    W = _initial_window(lam, window) + S
    while True:
        j = np.arange(-W, W + 1, dtype=float)
        dj = 1.0 / np.abs(lam - j * j)
        inner = np.array([np.sum(dj / np.abs(lam - (j - si) ** 2)) for si in sf])
        direct = float(wgt @ inner)

        # for |j| > W both factors decrease in |j| once W exceeds S + sqrt(Re lam)
        def f(t):
            g = 1.0 / np.abs(lam - t * t)
            return wgt @ (g * (1.0 / np.abs(lam - (t - sf) ** 2) + 1.0 / np.abs(lam - (t + sf) ** 2)))

        lo, hi = _tail_bracket(f, W)
        est = direct + 0.5 * float(lo + hi)
        if 0.5 * float(hi - lo) <= rtol * est or W > 1 << 22:
            return est
        W *= 2


def psi_and_bound(q: CoeffSeq, N: int, y: float, window: int | None = None) -> tuple[float, float]:
    """Exact ``psi_N(y)`` and the explicit-constant bound

    ``N^2 (||q||^2/N + 16 E_{sqrt N}(q)^2) b_N(y) + 16 E_{4N}(q)^2 a_N(y)``

    where ``E_M`` is the l2 tail over ``|k| >= M`` of q extended to Z.
    """
    qz = _z_extension(q)
    if not qz.entries:
        return 0.0, 0.0
    psi = psi_exact(q, N, y, window)
    a, b = ab_sums(N, y)
    nq2 = remainder(qz, 0) ** 2
    e1 = _remainder_real(qz, math.sqrt(N))
    e2 = _remainder_real(qz, 4 * N)
    bound = N * N * (nq2 / N + 16.0 * e1 ** 2) * b + 16.0 * e2 ** 2 * a
    return psi, bound


def _remainder_real(q: CoeffSeq, M: float) -> float:
    idx, val = q.arrays()
    sel = np.abs(idx) >= M
    return float(np.sqrt(np.sum(np.abs(val[sel]) ** 2)))


# ---------------------------------------------------------------------------
# resolvent


def resolvent_apply(L: TruncatedOperator, lam: complex, f: np.ndarray,
                    max_cond: float = 1e12, rtol: float = 1e-10) -> np.ndarray:
    """Solve ``(lam I - L) x = f`` by LU with partial pivoting.

    ``f`` may be a vector or a matrix of right-hand sides.  Raises
    :class:`ContourTooClose` when the 1-norm condition estimate exceeds
    ``max_cond`` or the residual check fails after one refinement step.
    """
    n = len(L.window)
    A = complex(lam) * np.eye(n) - L.matrix
    lu, piv = sla.lu_factor(A, check_finite=False)
    anorm = np.linalg.norm(A, 1)
    rcond, info = lapack.zgecon(lu, anorm, norm="1")
    if info != 0 or rcond == 0 or 1.0 / rcond > max_cond:
        raise ContourTooClose(f"resolvent at lambda = {lam} has condition estimate "
                              f"{np.inf if rcond == 0 else 1.0 / rcond:.2e}")
    f = np.asarray(f, dtype=complex)
    x = sla.lu_solve((lu, piv), f, check_finite=False)
    fn = np.linalg.norm(f)
    r = A @ x - f
    if np.linalg.norm(r) > rtol * fn:
        x = x - sla.lu_solve((lu, piv), r, check_finite=False)
        r = A @ x - f
        if np.linalg.norm(r) > rtol * fn:
            raise ContourTooClose(f"residual {np.linalg.norm(r):.2e} exceeds tolerance at lambda = {lam}")
    return x


# ---------------------------------------------------------------------------
# dumps


def write_matrix_csv(M: np.ndarray, window: IndexWindow, path: str | Path, atol: float = 0.0) -> None:
    """CSV of ``(row, col, re, im)`` using lattice indices; entries with ``|x| <= atol`` skipped."""
    idx = window.indices
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["row", "col", "re", "im"])
        rows, cols = np.nonzero(np.abs(M) > atol)
        for r, c in zip(rows.tolist(), cols.tolist()):
            v = complex(M[r, c])
            w.writerow([idx[r], idx[c], repr(v.real), repr(v.imag)])


def tridiagonal_eigenvalue(L: TruncatedOperator, x0: float, digits: int = 600,
                           max_iter: int = 60) -> "decimal.Decimal":
    """Refine an eigenvalue of a real symmetric tridiagonal matrix in extended precision.

    Newton's method on the characteristic polynomial, evaluated with its
    three-term recurrence in ``decimal`` arithmetic, started from ``x0``.
    """
    import decimal

    A = L.matrix
    if np.abs(np.triu(A, 2)).max(initial=0.0) > 0 or np.abs(A.imag).max() > 0 \
            or not np.allclose(A, A.T, rtol=0, atol=0):
        raise ValueError("matrix is not real symmetric tridiagonal")
    ctx = decimal.Context(prec=digits + 20)
    D = decimal.Decimal
    d = [D(repr(float(v))) for v in A.diagonal().real]
    e2 = [ctx.multiply(D(repr(float(v))), D(repr(float(v)))) for v in np.diagonal(A, 1).real]
    x = D(repr(float(x0)))
    tol = D(10) ** (-digits)
    for _ in range(max_iter):
        p_prev, p = D(1), ctx.subtract(d[0], x)
        dp_prev, dp = D(0), D(-1)
        for i in range(1, len(d)):
            a = ctx.subtract(d[i], x)
            p_new = ctx.subtract(ctx.multiply(a, p), ctx.multiply(e2[i - 1], p_prev))
            dp_new = ctx.subtract(ctx.subtract(ctx.multiply(a, dp), p),
                                  ctx.multiply(e2[i - 1], dp_prev))
            p_prev, p, dp_prev, dp = p, p_new, dp, dp_new
        step = ctx.divide(p, dp)
        x = ctx.subtract(x, step)
        if abs(step) <= tol * max(abs(x), D(1)):
            break
    return x
