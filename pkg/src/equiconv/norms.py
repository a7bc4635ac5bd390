"""Scalar resolvent sums, kernels on [0, pi]^2 and L^a -> L^b operator norms.

Grid norms use the normalised measure: ``||f||_p = ((1/G) sum |f(x_i)|^p)^(1/p)``
on ``x_i = i pi / G`` and the grid maximum for ``p = inf``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import linprog
from scipy.special import digamma, eval_gegenbauer, polygamma

from .coeffs import CoeffSeq, Lattice, UndersampledGrid, grid
from .operators import IndexWindow, _tail_bracket, ab_sums

INF = math.inf


# ---------------------------------------------------------------------------
# A(z, r) and line integrals


def _power_tail(z: complex, r: float, W: int, terms: int = 30) -> float:
    """``sum_{k > W} |z - k^2|^-r`` for ``W >= 3 sqrt|z|``.

    ``|z - t^2|^-r = sum_j C_j^(r/2)(cos th) |z|^j t^(-2r-2j)`` (Gegenbauer
    generating function, ``cos th = Re z / |z|``) converges for ``t^2 > |z|``;
    each power is summed over ``k > W`` by Euler-Maclaurin through the
    third-derivative term.
    """
    az = abs(z)
    ct = z.real / az if az > 0 else 0.0
    j = np.arange(terms)
    c = eval_gegenbauer(j, r / 2.0, ct) * az ** j.astype(float)
    p = 2.0 * r + 2.0 * j
    Wf = float(W)
    em = (Wf ** (1.0 - p) / (p - 1.0) - 0.5 * Wf ** -p + p * Wf ** (-p - 1.0) / 12.0
          - p * (p + 1.0) * (p + 2.0) * Wf ** (-p - 3.0) / 720.0)
    return float(c @ em)


def a_sum(z: complex, r: float = 1.0, window: int | None = None) -> float:
    """``A(z, r) = (sum_{k >= 0} |z - k^2|^-r)^(1/r)``.

    Terms with ``k <= W`` (``W >= 3 sqrt|z|``) are summed directly and the
    remainder is added in closed form by :func:`_power_tail`.
    """
    z = complex(z)
    if r < 1:
        raise ValueError("r must be at least 1")
    if z.imag == 0 and z.real >= 0 and float(math.isqrt(int(z.real)) ** 2) == z.real:
        raise ValueError(f"z = {z} lies on the free spectrum")
    W = max(window or 0, 64, int(math.ceil(3.0 * math.sqrt(abs(z)))))
    k = np.arange(0, W + 1, dtype=float)
    total = float(np.sum(np.abs(z - k * k) ** (-r))) + _power_tail(z, r, W)
    return total ** (1.0 / r)


def a_sum_bracket(z: complex, r: float = 1.0, window: int | None = None) -> tuple[float, float]:
    """Bracket for ``A(z, r)`` by integral comparison of the tail beyond the window."""
    z = complex(z)
    W = max(window or 0, int(4 * math.sqrt(max(abs(z.real), 1.0))) + 64)
    k = np.arange(0, W + 1, dtype=float)
    s = float(np.sum(np.abs(z - k * k) ** (-r)))
    lo, hi = _tail_bracket(lambda t: abs(z - t * t) ** (-r), W)
    return (s + float(lo)) ** (1.0 / r), (s + float(hi)) ** (1.0 / r)


def a_sum_asymptote(N: int, y: float, r: float) -> float:
    """Order of magnitude of ``A(N^2 + N + iy, r)`` in the three ranges of ``|y|``."""
    y = abs(y)
    if r == 1:
        if y <= N:
            return math.log(N) / N
        if y <= N * N:
            return math.log(1.0 + N * N / y) / N
        return 1.0 / math.sqrt(y)
    if y <= N:
        return 1.0 / N
    if y <= N * N:
        return N ** (-1.0 / r) * y ** (-1.0 + 1.0 / r)
    return y ** (-1.0 + 1.0 / (2.0 * r))


def asymptote_check(N_list, r_list=(1.0, 2.0), probes=None) -> list[dict]:
    """Ratios of ``A(N^2+N+iy, r)`` to :func:`a_sum_asymptote` at regime probes.

    ``probes`` maps a regime name to ``y(N)``; the default probes each range
    at ``y = 0``, ``N^1.5`` and ``4 N^2``.
    """
    if probes is None:
        probes = {"small": lambda N: 0.0, "middle": lambda N: N ** 1.5, "large": lambda N: 4.0 * N * N}
    rows = []
    for r in r_list:
        for name, yf in probes.items():
            for N in N_list:
                y = float(yf(N))
                A = a_sum(complex(N * N + N, y), r)
                rows.append({"r": r, "regime": name, "N": N, "y": y, "A": A,
                             "ratio": A / a_sum_asymptote(N, y, r)})
    return rows


def ab_regime_table(N_list, probes=None) -> list[dict]:
    """Ratios of ``a_N``, ``b_N`` to their regime asymptotes at ``lambda = N^2 + N + iy``."""
    rows = []
    for N in N_list:
        N = int(N)
        cases = probes or [("a", 0.0, lambda a, b, y: a * N / math.log(N)),
                           ("a", float(N), lambda a, b, y: a * N / math.log(N)),
                           ("a", float(N * N), lambda a, b, y: a * math.sqrt(y)),
                           ("a", 4.0 * N * N, lambda a, b, y: a * math.sqrt(y)),
                           ("b", 0.0, lambda a, b, y: b * N * N),
                           ("b", float(N), lambda a, b, y: b * N * N)]
        for which, y, norm in cases:
            a, b = ab_sums(N, y)
            rows.append({"N": N, "sum": which, "y": y, "value": a if which == "a" else b,
                         "ratio": norm(a, b, y)})
    return rows


def _line_nodes(N: int, y_max: float, panels_per_decade: int = 12):
    """Gauss nodes on ``[0, y_max]``: uniform panels on ``[0, 2N]``, log-spaced beyond."""
    x, wx = leggauss(16)
    inner = np.linspace(0.0, 2.0 * N, 17)
    decades = math.log10(y_max / (2.0 * N))
    outer = np.geomspace(2.0 * N, y_max, max(2, int(panels_per_decade * decades)) + 1)
    edges = np.concatenate([inner, outer[1:]])
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    return (mid[:, None] + half[:, None] * x).ravel(), (half[:, None] * wx).ravel()


def line_integral(N: int, r: float, power: float, y_max: float | None = None,
                  tail: bool = True) -> float:
    """``int_{-Y}^{Y} A(N^2+N+iy, r)^power dy`` with ``Y = y_max``.

    With ``tail=True`` the integral over ``|y| > Y`` is added from the
    large-``y`` power law ``A ~ c y^(1/(2r) - 1)`` fitted at ``Y``; this needs
    ``power (1 - 1/(2r)) > 1``, otherwise the integral over the line diverges
    and only the partial integral is meaningful.
    """
    if y_max is None:
        y_max = 1e4 * N * N
    y, w = _line_nodes(N, y_max)
    vals = np.array([a_sum(complex(N * N + N, yi), r) for yi in y]) ** power
    total = 2.0 * float(vals @ w)
    if tail:
        decay = power * (1.0 - 1.0 / (2.0 * r))
        if decay <= 1.0:
            raise ValueError("integral over the whole line diverges for these exponents")
        Ay = a_sum(complex(N * N + N, y_max), r) ** power
        total += 2.0 * Ay * y_max / (decay - 1.0)
    return total


# ---------------------------------------------------------------------------
# closed-form sums


def lemma105_sum(N: int, extra: int = 64, constant: float | None = None) -> float:
    """``A_N = sum_{k=0}^{N} sum_{m > N} 1/(m^2 - k^2)``.

    The inner sum runs explicitly over ``N < m <= M`` with ``M = 2N + extra``;
    the remainder ``sum_{m > M}`` is added exactly through polygamma values:
    ``psi_1(M+1)`` for ``k = 0`` and ``(psi(M+1+k) - psi(M+1-k)) / (2k)`` otherwise.
    ``constant`` is an additive perturbation used only by test fixtures.
    """
    if N < 0:
        raise ValueError("N must be nonnegative")
    M = 2 * N + extra
    k = np.arange(0, N + 1, dtype=float)
    m = np.arange(N + 1, M + 1, dtype=float)
    # blocks of k keep memory bounded for large N
    step = max(1, 2 ** 22 // m.size)
    direct = np.concatenate([(1.0 / (m[None, :] ** 2 - kb[:, None] ** 2)).sum(axis=1)
                             for kb in np.array_split(k, -(-k.size // step))])
    tail = np.empty_like(k)
    tail[0] = polygamma(1, M + 1)
    kk = k[1:]
    tail[1:] = (digamma(M + 1 + kk) - digamma(M + 1 - kk)) / (2.0 * kk)
    val = math.fsum((direct + tail).tolist())
    return val + (constant or 0.0)


def lemma105_closed_form(N: int) -> float:
    return math.pi ** 2 / 6.0 - 0.25 * math.fsum(1.0 / n ** 2 for n in range(1, N + 1))


def lemma106_sum(N: int, H: int) -> float:
    """``sum 1/(m^2 - k^2)`` over ``0 <= k <= N < m``, ``m - k <= H`` (explicit enumeration)."""
    if not 0 < H < N:
        raise ValueError(f"need 0 < H < N, got N = {N}, H = {H}")
    return math.fsum(1.0 / ((k + d) ** 2 - k * k)
                     for d in range(1, H + 1) for k in range(N + 1 - d, N + 1))


def lemma106_table(N: int) -> np.ndarray:
    """``sigma(N, H)`` for ``H = 1..N-1`` by cumulative sums over the difference ``d = m - k``."""
    if N < 2:
        return np.zeros(0)
    d = np.arange(1, N, dtype=float)
    k = np.arange(0, N + 1, dtype=float)
    # term 1/(d (2k + d)) for N+1-d <= k <= N
    terms = 1.0 / (d[:, None] * (2.0 * k[None, :] + d[:, None]))
    valid = k[None, :] >= N + 1 - d[:, None]
    per_d = np.where(valid, terms, 0.0).sum(axis=1)
    return np.cumsum(per_d)


# ---------------------------------------------------------------------------
# kernels and norms


@dataclass(frozen=True)
class KernelGrid:
    G: int
    samples: np.ndarray
    bc: Lattice

    @property
    def x(self) -> np.ndarray:
        return grid(self.G)

    def apply(self, f: np.ndarray) -> np.ndarray:
        """Grid version of ``(1/pi) int K(x, y) f(y) dy``."""
        return self.samples @ np.asarray(f) / self.G


def basis_matrix(window: IndexWindow, G: int) -> np.ndarray:
    """``U[i, j] = u_{k_j}(x_i)`` on the grid."""
    return window.lattice.basis(window.array[None, :], grid(G)[:, None])


def default_grid(window: IndexWindow) -> int:
    return 4 * window.k_max


def kernel_from_matrix(M: np.ndarray, window: IndexWindow, G: int | None = None) -> KernelGrid:
    """``K(x, y) = sum_{j,k} M_jk u_j(x) conj(u_k(y))`` sampled on the grid."""
    G = default_grid(window) if G is None else int(G)
    if G < 4 * window.k_max:
        raise UndersampledGrid(f"grid size {G} < 4 * max index {window.k_max}")
    U = basis_matrix(window, G)
    return KernelGrid(G, U @ M @ U.conj().T, window.lattice)


def grid_lp(f: np.ndarray, p: float, axis=None) -> np.ndarray:
    a = np.abs(f)
    if p == INF:
        return a.max(axis=axis)
    n = a.size if axis is None else a.shape[axis]
    return (np.sum(a ** p, axis=axis) / n) ** (1.0 / p)


def _conj_exp(a: float) -> float:
    if a == 1:
        return INF
    if a == INF:
        return 1.0
    return a / (a - 1.0)


def _check_exponents(a: float, b: float):
    if not (1 <= a <= INF and 1 <= b <= INF):
        raise ValueError(f"exponents must lie in [1, inf], got a = {a}, b = {b}")


def opnorm_endpoint(K: KernelGrid | None = None, mode: str = "1-inf", M: np.ndarray | None = None,
                    a: float | None = None, b: float | None = None) -> float:
    """Exact endpoint norms of the grid operator.

    ``mode``: ``"1-inf"`` (grid max of |K|), ``"1-b"`` (max over columns of the
    L^b norm), ``"a-inf"`` (max over rows of the L^a' norm), ``"2-2"`` (top
    singular value of the coefficient matrix M).
    """
    mode = mode.replace("→", "-").replace("->", "-")
    if mode == "2-2":
        if M is None:
            raise ValueError("2-2 needs the coefficient matrix")
        return float(np.linalg.norm(M, 2)) if M.size else 0.0
    if K is None:
        raise ValueError(f"mode {mode} needs a kernel")
    if mode == "1-inf":
        return float(np.abs(K.samples).max())
    if mode == "1-b":
        _check_exponents(1, b)
        return float(grid_lp(K.samples, b, axis=0).max())
    if mode == "a-inf":
        _check_exponents(a, INF)
        return float(grid_lp(K.samples, _conj_exp(a), axis=1).max())
    raise ValueError(f"unknown mode {mode!r}")


@dataclass(frozen=True)
class NormBracket:
    lower: float
    upper: float
    a: float
    b: float

    @property
    def gap(self) -> float:
        return self.upper / self.lower if self.lower > 0 else INF


def _ratio(Kl: np.ndarray, f: np.ndarray, a: float, b: float) -> float:
    G = Kl.shape[0]
    fa = grid_lp(f, a)
    if fa == 0:
        return 0.0
    return float(grid_lp(Kl @ f / G, b) / fa)


def _dual(v: np.ndarray, p: float) -> np.ndarray:
    """Hoelder-aligned vector: ``|v|^(p-1)`` with the phase of v."""
    mag = np.abs(v)
    if p == INF:
        out = np.zeros_like(v)
        i = int(np.argmax(mag))
        out[i] = v[i] / mag[i] if mag[i] > 0 else 1.0
        return out
    if p == 1:
        return np.exp(1j * np.angle(v))
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(mag > 0, mag ** (p - 1.0) * v / np.where(mag > 0, mag, 1.0), 0.0)


def _ascent(Ks: np.ndarray, f: np.ndarray, a: float, b: float, iters: int, stall: float) -> float:
    best = _ratio(Ks, f, a, b)
    ap = _conj_exp(a)
    KH = Ks.conj().T
    for _ in range(iters):
        y = Ks @ f
        g = _dual(y / max(np.abs(y).max(), 1e-300), b)
        h = KH @ g
        f_new = _dual(h / max(np.abs(h).max(), 1e-300), ap)
        if not np.any(f_new):
            break
        val = _ratio(Ks, f_new, a, b)
        f = f_new
        if val <= best * (1.0 + stall):
            best = max(best, val)
            break
        best = val
    return best


def _rt_upper(points: list[tuple[float, float, float]], target: tuple[float, float]) -> float:
    """Riesz-Thorin: minimise ``sum theta_i log M_i`` with ``sum theta_i P_i = target``."""
    # every endpoint norm vanishes exactly when the kernel does
    if any(m <= 0 for _, _, m in points):
        return 0.0
    pts = points
    c = np.array([math.log(m) for _, _, m in pts])
    A_eq = np.array([[x for x, _, _ in pts], [y for _, y, _ in pts], [1.0] * len(pts)])
    b_eq = np.array([target[0], target[1], 1.0])
    res = linprog(c, A_eq=A_eq, b_eq=b_eq, bounds=[(0, None)] * len(pts), method="highs")
    if not res.success:
        return INF
    return float(math.exp(res.fun))


def opnorm_general(K: KernelGrid, M: np.ndarray, a: float, b: float, iters: int = 200,
                   restarts: int = 3, seed: int = 0, stall: float = 1e-6,
                   window: IndexWindow | None = None) -> NormBracket:
    """Bracket ``lower <= ||A : L^a -> L^b|| <= upper`` for the grid operator.

    Lower: best ratio over alternating Hoelder-dual ascent (started at the top
    singular pair and ``restarts`` seeded random vectors) and the exact
    endpoint extremisers.  Upper: Riesz-Thorin interpolation between the
    computed endpoint norms (an LP over the points ``(1/a, 1/b)``), combined
    with the monotone bounds ``||.||_{1->b}`` and ``||.||_{a->inf}``.
    """
    _check_exponents(a, b)
    if a > b:
        raise ValueError("need a <= b")
    Ks = K.samples
    G = K.G
    s22 = opnorm_endpoint(M=M, mode="2-2")
    n1b = opnorm_endpoint(K, "1-b", b=b)
    nainf = opnorm_endpoint(K, "a-inf", a=a)
    n1inf = opnorm_endpoint(K, "1-inf")
    n11 = opnorm_endpoint(K, "1-b", b=1.0)
    ninfinf = opnorm_endpoint(K, "a-inf", a=INF)
    ia, ib = 1.0 / a, 1.0 / b
    pts = [(1.0, 0.0, n1inf), (1.0, ib, n1b), (ia, 0.0, nainf), (0.5, 0.5, s22),
           (1.0, 1.0, n11), (0.0, 0.0, ninfinf)]
    upper = min(_rt_upper(pts, (ia, ib)), n1b, nainf)

    cands = []
    # point masses are extremal for a = 1; Hoelder-aligned rows for b = inf
    j = int(np.argmax(grid_lp(Ks, b, axis=0)))
    delta = np.zeros(G, dtype=complex)
    delta[j] = 1.0
    cands.append(_ratio(Ks, delta, a, b))
    i = int(np.argmax(grid_lp(Ks, _conj_exp(a), axis=1)))
    cands.append(_ratio(Ks, _dual(Ks[i].conj(), _conj_exp(a)), a, b))
    starts = []
    if M.size and window is not None:
        _, _, vh = np.linalg.svd(M)
        starts.append(basis_matrix(window, G) @ vh[0].conj())
    rng = np.random.default_rng(seed)
    for _ in range(restarts):
        starts.append(rng.standard_normal(G) + 1j * rng.standard_normal(G))
    for f in starts:
        cands.append(_ascent(Ks, f, a, b, iters, stall))
    lower = max(cands)
    # roundoff can place the ascent a hair above an exact endpoint value
    if lower > upper:
        lower = upper if lower <= upper * (1 + 1e-10) else lower
    return NormBracket(float(lower), float(upper), a, b)


def wiener_norm(c) -> float:
    """l1 norm of coefficients; for a matrix the largest column l1 norm."""
    if isinstance(c, CoeffSeq):
        return float(sum(abs(v) for v in c.entries.values()))
    arr = np.asarray(c)
    if arr.ndim == 1:
        return float(np.abs(arr).sum())
    return float(np.abs(arr).sum(axis=0).max()) if arr.size else 0.0
