"""Spectral projectors of truncated Hill operators.

``S_N`` is the Riesz projector ``(2 pi i)^-1 \\oint R(z) dz`` over the boundary
of the rectangle ``-omega <= Re z <= N^2 + N, |Im z| <= h`` with
``R(z) = (z - L)^-1``; ``S_N^0`` is its free counterpart.  The deviation
``D_N = S_N - S_N^0`` splits as ``T_N + B_N`` where ``T_N`` is the explicit
first-order residue matrix.

The contour integral is evaluated with composite Gauss-Legendre panels whose
length adapts to the distance between the spectrum and each edge.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla
from numpy.polynomial.legendre import leggauss
from scipy.linalg import lapack

from .coeffs import SQRT2, CoeffSeq, Lattice
from .operators import (ContourRect, IndexWindow, TruncatedOperator, assemble_operator,
                        potential_matrix, resolvent_apply, write_matrix_csv)

GL_ORDER = 16


class PoleNearContour(ValueError):
    pass


class EigenvalueNearContour(RuntimeError):
    pass


class NonIdempotent(RuntimeError):
    pass


class WindowTooSmall(ValueError):
    pass


# ---------------------------------------------------------------------------
# quadrature on the rectangle boundary


def _segment_distance(p: np.ndarray, a: complex, b: complex) -> np.ndarray:
    d = b - a
    t = np.clip(((p - a) * np.conj(d)).real / abs(d) ** 2, 0.0, 1.0)
    return np.abs(p - (a + t * d))


def contour_nodes(rect: ContourRect, poles=(), min_panel: float = 0.05,
                  refine: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Nodes ``z`` and weights ``w`` with ``sum w f(z) ~ (2 pi i)^-1 \\oint f dz``.

    The boundary is traversed counterclockwise.  On each edge the panel
    length is twice the distance from the given poles to that edge (clipped
    to ``[min_panel, edge length]``), halved ``refine`` times.  Gauss-Legendre
    of order 16 on such panels converges geometrically for integrands whose
    poles are the given points.
    """
    poles = np.asarray(list(poles), dtype=complex).ravel()
    lo, hi, h = rect.left, rect.right, rect.h
    corners = [complex(lo, -h), complex(hi, -h), complex(hi, h), complex(lo, h)]
    x, wx = leggauss(GL_ORDER)
    zs, ws = [], []
    for a, b in zip(corners, corners[1:] + corners[:1]):
        length = abs(b - a)
        panel = length if poles.size == 0 else 2.0 * float(_segment_distance(poles, a, b).min())
        panel = min(max(panel, min_panel), length) / 2 ** refine
        n = max(1, math.ceil(length / panel - 1e-12))
        edges = np.linspace(0.0, 1.0, n + 1)
        mid = 0.5 * (edges[1:] + edges[:-1])
        half = 0.5 * (edges[1:] - edges[:-1])
        t = (mid[:, None] + half[:, None] * x[None, :]).ravel()
        wt = (half[:, None] * wx[None, :]).ravel()
        zs.append(a + t * (b - a))
        ws.append(wt * (b - a))
    z = np.concatenate(zs)
    w = np.concatenate(ws) / (2j * math.pi)
    return z, w


def default_rect(L: TruncatedOperator, N: int) -> ContourRect:
    """``omega = 5 + 2 ||V||_1`` (l1 over the potential entries of the window), ``h = max(N, 10)``."""
    P = L.potential_part()
    if L.bc is Lattice.DIR:
        v1 = float(np.abs(P).sum(axis=1).max())
    else:
        # first and last rows hold V(k - m) for every difference in the window once
        # (the shared difference 0 carries V(0) = 0)
        v1 = float(np.abs(P[0]).sum() + np.abs(P[-1]).sum())
    return ContourRect(N, 5.0 + 2.0 * v1, float(max(N, 10)))


# ---------------------------------------------------------------------------
# scalar residues


def residue_closed_form(m: int, k: int, N: int) -> float:
    """``(2 pi i)^-1 \\oint dz / ((z - m^2)(z - k^2))`` in closed form.

    Zero when both ``|m|, |k| <= N`` or both exceed N; ``1/(m^2-k^2)`` when
    only ``|k| > N``; ``-1/(m^2-k^2)`` when only ``|m| > N``.
    """
    mi, ki = abs(m) <= N, abs(k) <= N
    if mi == ki:
        return 0.0
    d = m * m - k * k
    return 1.0 / d if mi else -1.0 / d


def _scalar_rect(N: int, omega: float | None, h: float | None) -> ContourRect:
    return ContourRect(N, 5.0 if omega is None else omega, float(max(N, 10)) if h is None else h)


def scalar_contour_table(indices, N: int, omega: float | None = None, h: float | None = None,
                         refine: int = 0) -> np.ndarray:
    """Quadrature of the scalar residue integral for all pairs of ``indices``."""
    idx = np.asarray(indices, dtype=np.int64)
    rect = _scalar_rect(N, omega, h)
    poles = np.unique(idx.astype(float) ** 2)
    dist = rect.distance(poles)
    if dist.min() < 0.1:
        bad = poles[np.argmin(dist)]
        raise PoleNearContour(f"pole {bad:g} lies within 0.1 of the contour for N = {N}")
    z, w = contour_nodes(rect, poles, refine=refine)
    R = 1.0 / (z[:, None] - idx[None, :].astype(float) ** 2)
    return (R.T * w) @ R


def scalar_contour_oracle(m: int, k: int, N: int, nodes: int | None = None,
                          omega: float | None = None, h: float | None = None) -> complex:
    """Numerical value of ``(2 pi i)^-1 \\oint dz / ((z - m^2)(z - k^2))`` over the rectangle.

    ``nodes`` optionally fixes the number of Gauss points per edge; by
    default panels adapt to the pole distances.
    """
    rect = _scalar_rect(N, omega, h)
    poles = np.array([m * m, k * k], dtype=float)
    dist = rect.distance(poles)
    if dist.min() < 0.1:
        raise PoleNearContour(f"pole {poles[np.argmin(dist)]:g} lies within 0.1 of the contour")
    if nodes is None:
        z, w = contour_nodes(rect, poles)
    else:
        z, w = _fixed_nodes(rect, nodes)
    return complex(np.sum(w / ((z - m * m) * (z - k * k))))


def _fixed_nodes(rect: ContourRect, per_edge: int):
    x, wx = leggauss(per_edge)
    lo, hi, h = rect.left, rect.right, rect.h
    corners = [complex(lo, -h), complex(hi, -h), complex(hi, h), complex(lo, h)]
    zs, ws = [], []
    for a, b in zip(corners, corners[1:] + corners[:1]):
        zs.append(a + 0.5 * (x + 1.0) * (b - a))
        ws.append(0.5 * wx * (b - a))
    return np.concatenate(zs), np.concatenate(ws) / (2j * math.pi)


# ---------------------------------------------------------------------------
# projectors


def free_projector(bc: Lattice | str, N: int, window: IndexWindow) -> np.ndarray:
    """0/1 diagonal selecting modes ``|k| <= N`` (``1 <= k <= N`` for Dirichlet)."""
    bc = Lattice.parse(bc)
    k = window.array
    inside = (k >= 1) & (k <= N) if bc is Lattice.DIR else np.abs(k) <= N
    if window.k_max <= N:
        raise WindowTooSmall(f"window K_max = {window.k_max} must exceed N = {N}")
    return np.diag(inside.astype(complex))


def _shifted_tri_inverse(negT: np.ndarray, z: complex) -> np.ndarray:
    M = negT.copy(order="F")
    M.flat[::M.shape[0] + 1] += z
    inv, info = lapack.ztrtri(M, lower=0, overwrite_c=1)
    if info != 0:
        raise np.linalg.LinAlgError("singular triangular factor")
    return inv


@dataclass
class ProjectorInfo:
    omega: float
    h: float
    nodes: int
    min_distance: float
    idempotency_defect: float
    trace: complex
    refinements: int
    retries: int

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d["trace"] = [self.trace.real, self.trace.imag]
        return d


def riesz_projector(L: TruncatedOperator, rect: ContourRect | None = None, N: int | None = None,
                    tol: float = 1e-9, max_refine: int = 6, idem_tol: float = 1e-8,
                    margin: float = 0.1, retries: int = 8, method: str = "schur"
                    ) -> tuple[np.ndarray, ProjectorInfo]:
    """Riesz projector of ``L`` for the rectangle ``rect`` by contour quadrature.

    ``method="schur"`` applies the quadrature to the triangular Schur factor
    (one triangular inverse per node); ``method="lu"`` solves the full
    resolvent per node with :func:`resolvent_apply`.  Both evaluate the same
    quadrature sum.  Panels are halved until two successive sums differ by
    less than ``tol`` in Frobenius norm.
    """
    if rect is None:
        if N is None:
            raise ValueError("give either rect or N")
        rect = default_rect(L, N)
    if method == "schur":
        T, Z = sla.schur(L.matrix, output="complex")
        ev = np.diag(T)
    elif method == "lu":
        ev = sla.eigvals(L.matrix)
    else:
        raise ValueError(f"unknown method {method!r}")

    tries = 0
    while rect.distance(ev).min() < margin:
        tries += 1
        if tries > retries:
            d = rect.distance(ev)
            raise EigenvalueNearContour(
                f"eigenvalue {ev[np.argmin(d)]:.6g} within {d.min():.3g} of the contour "
                f"(N = {rect.N}, omega = {rect.omega:g}, h = {rect.h:g}); try a different h or omega")
        rect = ContourRect(rect.N, rect.omega, rect.h * 1.5)

    n = len(L.window)
    I = np.eye(n)
    if method == "schur":
        negT = np.asfortranarray(-T)

    def quad(refine):
        z, w = contour_nodes(rect, ev, refine=refine)
        F = np.zeros((n, n), dtype=complex)
        if method == "schur":
            for zi, wi in zip(z, w):
                F += wi * _shifted_tri_inverse(negT, zi)
            return Z @ F @ Z.conj().T, z.size
        for zi, wi in zip(z, w):
            F += wi * resolvent_apply(L, zi, I)
        return F, z.size

    S, nodes = quad(0)
    for level in range(1, max_refine + 1):
        S_new, nodes = quad(level)
        change = np.linalg.norm(S_new - S)
        S = S_new
        if change < tol:
            break
    else:
        level = max_refine
    defect = float(np.linalg.norm(S @ S - S))
    if defect > idem_tol:
        raise NonIdempotent(f"||S^2 - S||_F = {defect:.2e} after {level} refinements")
    info = ProjectorInfo(rect.omega, rect.h, nodes, float(rect.distance(ev).min()), defect,
                         complex(np.trace(S)), level, tries)
    return S, info


def eigenvalues_inside(L: TruncatedOperator, N: int) -> int:
    """Number of eigenvalues with real part at most ``N^2 + N``."""
    return int(np.sum(L.eigenvalues().real <= N * N + N))


# ---------------------------------------------------------------------------
# first-order deviation T_N


def _outside(k: np.ndarray, N: int, bc: Lattice) -> np.ndarray:
    return k > N if bc is Lattice.DIR else np.abs(k) > N


def x_mask(window: IndexWindow, N: int) -> np.ndarray:
    """Boolean mask of index pairs where exactly one index exceeds N."""
    out = _outside(window.array, N, window.lattice)
    return out[:, None] != out[None, :]


def tn_matrix(V: CoeffSeq, bc: Lattice | str, N: int, window: IndexWindow) -> np.ndarray:
    """Explicit first-order term ``T_N = (2 pi i)^-1 \\oint R0 V R0``.

    Per: ``T(m,k) = -V(m-k)/|m^2-k^2|``; Dir: ``(V~(m+k) - V~(|m-k|))/(sqrt2 |m^2-k^2|)``,
    on pairs where exactly one of ``m, k`` exceeds N and zero elsewhere.
    """
    bc = Lattice.parse(bc)
    if window.lattice is not bc:
        raise ValueError("window lattice does not match bc")
    k = window.array
    mask = x_mask(window, N)
    sq = k.astype(float) ** 2
    den = np.abs(sq[:, None] - sq[None, :])
    den[~mask] = 1.0
    T = -potential_matrix(V, window) / den
    T[~mask] = 0.0
    return T.astype(complex)


def tn_quadrature(L: TruncatedOperator, N: int, rect: ContourRect | None = None,
                  refine: int = 0) -> np.ndarray:
    """``(2 pi i)^-1 \\oint R0(z) V R0(z) dz`` evaluated by contour quadrature."""
    if rect is None:
        rect = default_rect(L, N)
    sq = L.window.array.astype(float) ** 2
    z, w = contour_nodes(rect, sq, refine=refine)
    R = 1.0 / (z[:, None] - sq[None, :])
    C = (R.T * w) @ R
    return L.potential_part() * C


# ---------------------------------------------------------------------------


@dataclass
class ProjectorSet:
    bc: Lattice
    N: int
    window: IndexWindow
    S: np.ndarray
    S0: np.ndarray
    D: np.ndarray
    T: np.ndarray
    B: np.ndarray
    info: ProjectorInfo
    label: str = ""

    def metadata(self) -> dict:
        d = {"bc": self.bc.value, "N": self.N, "K_max": self.window.k_max, "potential": self.label}
        d.update(self.info.as_dict())
        return d

    def dump(self, out: str | Path) -> list[Path]:
        """Write one CSV per matrix plus ``metadata.json`` into ``out``."""
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        for name in ("S", "S0", "D", "T", "B"):
            p = out / f"{name}.csv"
            write_matrix_csv(getattr(self, name), self.window, p, atol=1e-15)
            paths.append(p)
        p = out / "metadata.json"
        p.write_text(json.dumps(self.metadata(), indent=2))
        paths.append(p)
        return paths


def deviation_set(L: TruncatedOperator, V: CoeffSeq, N: int, rect: ContourRect | None = None,
                  label: str = "", **kw) -> ProjectorSet:
    """``S_N``, ``S_N^0``, ``D_N = S_N - S_N^0``, ``T_N`` and ``B_N = D_N - T_N``."""
    S, info = riesz_projector(L, rect, N=N, **kw)
    S0 = free_projector(L.bc, N, L.window)
    D = S - S0
    T = tn_matrix(V, L.bc, N, L.window)
    return ProjectorSet(L.bc, N, L.window, S, S0, D, T, D - T, info, label)


def deviation_for(V: CoeffSeq, bc: Lattice | str, N: int, K_max: int, label: str = "", **kw
                  ) -> ProjectorSet:
    from .operators import index_window
    w = index_window(bc, K_max)
    L = assemble_operator(V, w, label)
    return deviation_set(L, V, N, label=label, **kw)


# ---------------------------------------------------------------------------
# index-pair sets


@dataclass(frozen=True)
class SelectionSet:
    N: int
    H: int | None
    x_pairs: frozenset = field(default_factory=frozenset)
    delta: frozenset = field(default_factory=frozenset)


def delta_triangle(N: int, H: int) -> list[tuple[int, int]]:
    """Pairs ``(k, m)`` with ``0 <= k <= N < m`` and ``m - k <= H``."""
    if not 0 < H < N:
        raise ValueError(f"need 0 < H < N, got N = {N}, H = {H}")
    return [(k, k + d) for d in range(1, H + 1) for k in range(N + 1 - d, N + 1)]


def selection_sets(N: int, H: int | None, lattice: Lattice | str, K_max: int | None = None
                   ) -> SelectionSet:
    """``X(N)`` over a window of the lattice, plus the triangle ``Delta_H``.

    With ``lattice = INTEGERS`` the window is ``0..K_max`` (the one-sided
    setting of the triangle); otherwise it is :func:`index_window`.
    """
    from .operators import index_window
    lattice = Lattice.parse(lattice)
    K = K_max if K_max is not None else 2 * N + 2
    if lattice is Lattice.INTEGERS:
        idx = list(range(0, K + 1))
        out = [k > N for k in idx]
    else:
        w = index_window(lattice, K)
        idx = list(w.indices)
        out = _outside(w.array, N, lattice).tolist()
    x_pairs = frozenset((a, b) for a, oa in zip(idx, out) for b, ob in zip(idx, out) if oa != ob)
    delta = frozenset()
    if H is not None:
        delta = frozenset(p for p in delta_triangle(N, H) if p[1] <= K)
    return SelectionSet(N, H, x_pairs, delta)
