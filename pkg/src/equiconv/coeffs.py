"""Fourier coefficient sequences for singular potentials.

Potentials ``v = Q'`` are handled through coefficient sequences on the index
lattice of a boundary condition:

* ``PER_PLUS``  -- even integers, basis ``exp(ikx)``
* ``PER_MINUS`` -- odd integers, basis ``exp(ikx)``
* ``DIR``       -- positive integers, basis ``sqrt(2) sin(kx)``

Coefficients of ``v`` and ``Q`` for periodic and antiperiodic problems both
live on the even lattice (they are pi-periodic functions).  Lebesgue measure
on ``[0, pi]`` is normalised to total mass one throughout the package.
"""
from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
from scipy.special import gamma as _gamma
from scipy.special import roots_jacobi, roots_legendre

SQRT2 = math.sqrt(2.0)


class LatticeMismatch(ValueError):
    """Coefficients live on a lattice the operation cannot accept."""


class NormalizationError(ValueError):
    """The Dirichlet normalisation ``Q(0) = sum q = 0`` does not hold."""

    def __init__(self, defect: complex):
        self.defect = complex(defect)
        super().__init__(
            f"sum of exponential coefficients is {self.defect:.3e}, "
            "expected 0 (Q(0) = 0 normalisation)"
        )


class UndersampledGrid(ValueError):
    pass


class Lattice(enum.Enum):
    PER_PLUS = "per+"
    PER_MINUS = "per-"
    DIR = "dir"
    # all of Z; used by the discrete Hilbert transform
    INTEGERS = "z"

    @classmethod
    def parse(cls, value: "str | Lattice") -> "Lattice":
        if isinstance(value, Lattice):
            return value
        key = value.strip().lower()
        aliases = {"per+": cls.PER_PLUS, "perplus": cls.PER_PLUS, "per_plus": cls.PER_PLUS,
                   "per-": cls.PER_MINUS, "perminus": cls.PER_MINUS, "per_minus": cls.PER_MINUS,
                   "dir": cls.DIR, "dirichlet": cls.DIR, "z": cls.INTEGERS}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown boundary condition / lattice {value!r}") from None

    def contains(self, k: int) -> bool:
        k = int(k)
        if self is Lattice.PER_PLUS:
            return k % 2 == 0
        if self is Lattice.PER_MINUS:
            return k % 2 == 1
        if self is Lattice.DIR:
            return k >= 1
        return True

    @property
    def is_periodic(self) -> bool:
        return self in (Lattice.PER_PLUS, Lattice.PER_MINUS)

    @property
    def potential_lattice(self) -> "Lattice":
        """Lattice carrying the coefficients of v and Q for this bc."""
        return Lattice.DIR if self is Lattice.DIR else Lattice.PER_PLUS

    def basis(self, k, x):
        """Evaluate the canonical basis ``u_k(x)``; broadcasts over k and x."""
        k = np.asarray(k, dtype=float)
        x = np.asarray(x, dtype=float)
        if self is Lattice.DIR:
            return SQRT2 * np.sin(k * x)
        return np.exp(1j * k * x)


@dataclass(frozen=True)
class CoeffSeq:
    """Finitely supported complex sequence indexed by a lattice.

    ``tail`` carries the l2 mass estimated to lie outside the stored support
    when the sequence was produced by a truncating transform.
    """

    lattice: Lattice
    entries: Mapping[int, complex] = field(default_factory=dict)
    role: str = "f"
    tail: float = 0.0

    def __post_init__(self):
        clean = {}
        for k, val in dict(self.entries).items():
            k = int(k)
            if not self.lattice.contains(k):
                raise LatticeMismatch(f"index {k} is not in lattice {self.lattice.value}")
            val = complex(val)
            if val != 0:
                clean[k] = val
        object.__setattr__(self, "entries", dict(sorted(clean.items())))

    def __getitem__(self, k: int) -> complex:
        return self.entries.get(int(k), 0j)

    def __len__(self):
        return len(self.entries)

    @property
    def support(self) -> list[int]:
        return list(self.entries)

    @property
    def radius(self) -> int:
        return max((abs(k) for k in self.entries), default=0)

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        idx = np.fromiter(self.entries.keys(), dtype=np.int64, count=len(self.entries))
        val = np.fromiter(self.entries.values(), dtype=complex, count=len(self.entries))
        return idx, val

    def lookup(self, k) -> np.ndarray:
        """Vectorised ``q(k)``, zero off the support (and off the lattice)."""
        k = np.asarray(k, dtype=np.int64)
        out = np.zeros(k.shape, dtype=complex)
        if not self.entries:
            return out
        idx, val = self.arrays()
        lo, hi = idx.min(), idx.max()
        dense = np.zeros(hi - lo + 1, dtype=complex)
        dense[idx - lo] = val
        inside = (k >= lo) & (k <= hi)
        out[inside] = dense[k[inside] - lo]
        return out

    def scaled(self, c: complex) -> "CoeffSeq":
        return CoeffSeq(self.lattice, {k: c * v for k, v in self.entries.items()}, self.role)

    def truncated(self, radius: int) -> "CoeffSeq":
        return CoeffSeq(self.lattice, {k: v for k, v in self.entries.items() if abs(k) <= radius},
                        self.role)


# ---------------------------------------------------------------------------
# weights and norms


@dataclass(frozen=True)
class Weight:
    """Weight sequence: ``sobolev`` (1+k^2)^(a/2), ``log`` log(e+|k|)^b, or ``unit``."""

    kind: str = "unit"
    param: float = 0.0

    def __call__(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=float)
        if self.kind == "unit":
            return np.ones_like(k)
        if self.kind == "sobolev":
            return (1.0 + k * k) ** (self.param / 2.0)
        if self.kind == "log":
            return np.log(math.e + np.abs(k)) ** self.param
        raise ValueError(f"unknown weight kind {self.kind!r}")

    @classmethod
    def sobolev(cls, alpha: float) -> "Weight":
        return cls("sobolev", float(alpha))

    @classmethod
    def log(cls, beta: float) -> "Weight":
        return cls("log", float(beta))


UNIT = Weight()


def weighted_norm(q: CoeffSeq, w: Weight = UNIT) -> float:
    """``(sum_k |q(k)|^2 w(k)^2)^(1/2)`` over the support."""
    if not q.entries:
        return 0.0
    idx, val = q.arrays()
    return float(np.sqrt(np.sum(np.abs(val) ** 2 * w(idx) ** 2)))


def remainder(q: CoeffSeq, M: int, w: Weight = UNIT) -> float:
    """Tail norm over ``|k| >= M``; with a non-unit weight this is the weighted tail."""
    if M < 0:
        raise ValueError("M must be nonnegative")
    if not q.entries:
        return 0.0
    idx, val = q.arrays()
    sel = np.abs(idx) >= M
    return float(np.sqrt(np.sum(np.abs(val[sel]) ** 2 * w(idx[sel]) ** 2)))


# ---------------------------------------------------------------------------
# discrete Hilbert transform and basis conversions


def _hilbert_values(idx: np.ndarray, val: np.ndarray, n: np.ndarray) -> np.ndarray:
    diff = n[:, None] - idx[None, :]
    with np.errstate(divide="ignore"):
        kern = np.where(diff != 0, 1.0 / np.where(diff != 0, diff, 1), 0.0)
    return kern @ val


def hilbert_transform(x: CoeffSeq, window: int | None = None) -> CoeffSeq:
    """Discrete Hilbert transform ``(Hx)_n = sum_{k != n} x_k / (n - k)``.

    The output is stored for ``|n| <= window`` (default four times the input
    support radius); the l2 mass beyond the window is estimated from explicit
    values out to ``8 * window`` plus the ``(sum x)/n`` asymptote and stored
    in ``tail``.
    """
    if not x.entries:
        return CoeffSeq(Lattice.INTEGERS, {}, x.role)
    W = window if window is not None else 4 * max(x.radius, 1)
    idx, val = x.arrays()
    n = np.arange(-W, W + 1)
    out = _hilbert_values(idx, val, n)
    far = np.concatenate([np.arange(-8 * W, -W), np.arange(W + 1, 8 * W + 1)])
    mass = np.sum(np.abs(_hilbert_values(idx, val, far)) ** 2)
    mass += 2.0 * abs(val.sum()) ** 2 / (8 * W + 0.5)
    return CoeffSeq(Lattice.INTEGERS, dict(zip(n.tolist(), out)), x.role, tail=float(np.sqrt(mass)))


def hilbert_ratio_statistic(window: int, delta: float = 0.4, n_vectors: int = 1000, seed: int = 0,
                            out_factor: int = 4) -> float:
    """Largest ``||Hx||_w / ||x||_w`` over seeded random ``x`` supported on ``|k| <= window``.

    The weight is the Sobolev weight of order ``delta``; ``Hx`` is kept on
    ``|n| <= out_factor * window``.  Random vectors are drawn with unit-variance
    weighted coefficients, so every ``x`` has a comparable weighted norm.
    """
    from scipy.signal import fftconvolve

    rng = np.random.default_rng(seed)
    W, Wo = int(window), int(out_factor) * int(window)
    k = np.arange(-W, W + 1)
    n = np.arange(-Wo, Wo + 1)
    y = rng.standard_normal((n_vectors, k.size)) + 1j * rng.standard_normal((n_vectors, k.size))
    x = y / (1.0 + k ** 2) ** (delta / 2)
    d = np.arange(-(Wo + W), Wo + W + 1)
    ker = np.zeros(d.size)
    ker[d != 0] = 1.0 / d[d != 0]
    full = fftconvolve(x, ker[None, :], axes=1)
    # full[:, j] corresponds to n = j - (Wo + W) - W
    start = (Wo + W) + W - Wo
    Hx = full[:, start:start + n.size]
    wn = (1.0 + n ** 2) ** (delta / 2)
    num = np.sqrt(np.sum(np.abs(Hx * wn) ** 2, axis=1))
    den = np.sqrt(np.sum(np.abs(y) ** 2, axis=1))
    return float(np.max(num / den))


def derive_potential_coeffs(Q: CoeffSeq, bc: Lattice) -> CoeffSeq:
    """Coefficients of ``v = Q'``: ``V(k) = i k q(k)`` (Per) or ``V~(k) = k q~(k)`` (Dir)."""
    bc = Lattice.parse(bc)
    if Q.lattice is not bc.potential_lattice:
        raise LatticeMismatch(
            f"Q is on {Q.lattice.value}, bc {bc.value} needs {bc.potential_lattice.value}")
    if bc is Lattice.DIR:
        vals = {k: k * q for k, q in Q.entries.items()}
    else:
        vals = {k: 1j * k * q for k, q in Q.entries.items() if k != 0}
    return CoeffSeq(bc.potential_lattice, vals, "V")


def _sine_odd(idx: np.ndarray, val: np.ndarray, m: np.ndarray) -> np.ndarray:
    # idx even, nonzero; m odd
    mm = m[:, None].astype(float)
    kk = idx[None, :].astype(float)
    kern = 1.0 / (mm + kk) + 1.0 / (mm - kk) - 2.0 / mm
    return (SQRT2 / math.pi) * (kern @ val)


def exp_to_sine(q: CoeffSeq, window: int | None = None, atol: float = 1e-12) -> CoeffSeq:
    """Convert exponential coefficients of Q (on 2Z) into sine coefficients (on N).

    Requires ``Q(0) = sum q = 0``.  Even ``m`` use ``(i/sqrt2)(q(m) - q(-m))``;
    odd ``m`` use the corrected Hilbert-type sum whose terms decay like
    ``m^-3``.  Output is truncated at ``window`` (default 4x the input radius)
    with the l2 tail mass recorded.
    """
    if q.lattice is not Lattice.PER_PLUS:
        raise LatticeMismatch("exp_to_sine expects coefficients on the even lattice")
    if not q.entries:
        return CoeffSeq(Lattice.DIR, {}, q.role)
    idx, val = q.arrays()
    defect = val.sum()
    if abs(defect) > atol * max(1.0, float(np.abs(val).sum())):
        raise NormalizationError(defect)
    W = window if window is not None else 4 * max(q.radius, 1)
    out = {}
    for m in range(2, W + 1, 2):
        c = (1j / SQRT2) * (q[m] - q[-m])
        if c != 0:
            out[m] = c
    nz = idx != 0
    odd = np.arange(1, W + 1, 2)
    if nz.any():
        out.update(zip(odd.tolist(), _sine_odd(idx[nz], val[nz], odd)))
        far = np.arange(W + 1 + (W % 2 == 1), 8 * W + 1, 2)
        mass = np.sum(np.abs(_sine_odd(idx[nz], val[nz], far)) ** 2) if far.size else 0.0
        c3 = (SQRT2 / math.pi) * 2.0 * np.sum(idx[nz].astype(float) ** 2 * val[nz])
        mass += abs(c3) ** 2 / (10.0 * (8.0 * W) ** 5)
    else:
        mass = 0.0
    return CoeffSeq(Lattice.DIR, out, q.role, tail=float(np.sqrt(mass)))


def _exp_from_odd(m: np.ndarray, val: np.ndarray, n: np.ndarray) -> np.ndarray:
    # n even (= 2k), m odd
    mm = m[None, :].astype(float)
    nn = n[:, None].astype(float)
    kern = 1.0 / (mm - nn) + 1.0 / (mm + nn)
    return (SQRT2 / math.pi) * (kern @ val)


def sine_to_exp(qt: CoeffSeq, window: int | None = None) -> CoeffSeq:
    """Inverse of :func:`exp_to_sine`: sine coefficients (N) to exponential (2Z).

    ``q(2k) = (-i/sqrt2) q~(2|k|) sgn(k) + (sqrt2/pi) sum_s q~(2s-1) (1/(2s-1-2k) + 1/(2s-1+2k))``
    """
    if qt.lattice is not Lattice.DIR:
        raise LatticeMismatch("sine_to_exp expects coefficients on N")
    if not qt.entries:
        return CoeffSeq(Lattice.PER_PLUS, {}, qt.role)
    W = window if window is not None else 4 * max(qt.radius, 1)
    W -= W % 2
    idx, val = qt.arrays()
    odd = idx % 2 == 1
    n = np.arange(-W, W + 1, 2)
    out = _exp_from_odd(idx[odd], val[odd], n) if odd.any() else np.zeros(n.size, complex)
    even_part = (-1j / SQRT2) * np.sign(n) * qt.lookup(np.abs(n))
    out = out + even_part
    mass = 0.0
    if odd.any():
        far = np.concatenate([np.arange(-8 * W, -W, 2), np.arange(W + 2, 8 * W + 1, 2)])
        mass = np.sum(np.abs(_exp_from_odd(idx[odd], val[odd], far)
                             + (-1j / SQRT2) * np.sign(far) * qt.lookup(np.abs(far))) ** 2)
        c2 = (SQRT2 / math.pi) * 2.0 * np.sum(idx[odd] * val[odd])
        mass += 2.0 * abs(c2) ** 2 / (3.0 * (8.0 * W) ** 3) / 2.0
    return CoeffSeq(Lattice.PER_PLUS, dict(zip(n.tolist(), out)), qt.role, tail=float(np.sqrt(mass)))


def grid(G: int) -> np.ndarray:
    """Uniform grid ``x_j = j pi / G``, ``j = 0..G-1``."""
    return np.arange(G) * (math.pi / G)


def synthesize_on_grid(c: CoeffSeq, bc: Lattice, G: int) -> np.ndarray:
    """Samples of ``sum_k c_k u_k(x_j)`` on :func:`grid`, evaluated with one FFT."""
    bc = Lattice.parse(bc)
    if G < 2 * c.radius:
        raise UndersampledGrid(f"grid size {G} < 2 * max index {c.radius}")
    if not c.entries:
        return np.zeros(G, dtype=complex)
    idx, val = c.arrays()
    # sum_k a_k exp(i pi k j / G) is a length-2G inverse DFT of the folded a
    acc = np.zeros(2 * G, dtype=complex)
    if bc is Lattice.DIR:
        np.add.at(acc, idx % (2 * G), val * (SQRT2 / 2j))
        np.add.at(acc, (-idx) % (2 * G), -val * (SQRT2 / 2j))
    else:
        np.add.at(acc, idx % (2 * G), val)
    return np.fft.ifft(acc)[:G] * (2 * G)


# ---------------------------------------------------------------------------
# potential families


class UnknownFamily(ValueError):
    pass


FAMILIES = ("trig", "mathieu", "sawtooth", "dirac", "sobolev_tail", "lp_singular")

_FAMILY_ALIASES = {
    "trig": "trig", "mathieu": "mathieu",
    "sawtooth": "sawtooth", "sawtoothbv": "sawtooth",
    "dirac": "dirac", "diraccomb": "dirac",
    "sobolev_tail": "sobolev_tail", "randomsobolevtail": "sobolev_tail", "sobolev-tail": "sobolev_tail",
    "lp_singular": "lp_singular", "lpsingular": "lp_singular", "lp": "lp_singular",
}


@dataclass(frozen=True)
class PotentialSpec:
    """Family tag plus parameters; generation is deterministic given the seed.

    Families and parameters:

    ``trig``          coeffs: ``{k: V(k)}`` on even k (complex given as number or [re, im])
    ``mathieu``       amplitude (default 1): v = 2 amplitude cos 2x
    ``sawtooth``      c (default 1), derivative (default 1).  Q = c(pi/2 - x) is the
                      pi-periodic sawtooth; derivative=1 gives v = Q' (a Dirac comb minus
                      its mean), derivative=0 takes the sawtooth itself as an L^1 potential
    ``dirac``         c (default 1): V(k) = c for every lattice k != 0
    ``sobolev_tail``  alpha: |V(k)| = |k|^(alpha-1/2) / (1 + log|k|), seeded phases.
                      This law is a construction of this package, chosen so that v lies
                      in H^-alpha but in no H^-a with a < alpha.
    ``lp_singular``   beta < 1: v = |x - pi/2|^-beta minus its mean
    """

    family: str
    params: Mapping[str, object] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        key = self.family.strip().lower()
        if key not in _FAMILY_ALIASES:
            raise UnknownFamily(f"unknown potential family {self.family!r}; known: {FAMILIES}")
        object.__setattr__(self, "family", _FAMILY_ALIASES[key])
        object.__setattr__(self, "params", dict(self.params))

    @property
    def label(self) -> str:
        if not self.params or self.family == "trig":
            return self.family
        inner = ",".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.family}:{inner}"

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> "PotentialSpec":
        """Parse ``family[:key=value,...]``, e.g. ``sobolev_tail:alpha=0.5``."""
        family, _, rest = text.partition(":")
        params: dict[str, object] = {}
        if family.strip().lower() == "trig" and rest:
            coeffs = {}
            for item in rest.split(","):
                k, _, v = item.partition("=")
                coeffs[int(k)] = complex(v.replace(" ", ""))
            return cls("trig", {"coeffs": coeffs}, seed)
        for item in filter(None, rest.split(",")):
            k, _, v = item.partition("=")
            params[k.strip()] = float(v)
        return cls(family, params, seed)

    @classmethod
    def from_config(cls, cfg: Mapping) -> tuple["PotentialSpec", int | None]:
        """Build from the key-value schema ``{family, params, seed, window}``."""
        params = dict(cfg.get("params", {}))
        if "coeffs" in params:
            params["coeffs"] = {int(k): _as_complex(v) for k, v in dict(params["coeffs"]).items()}
        spec = cls(cfg["family"], params, int(cfg.get("seed", 0)))
        window = cfg.get("window")
        return spec, (int(window) if window is not None else None)

    def to_config(self, window: int | None = None) -> dict:
        params = dict(self.params)
        if "coeffs" in params:
            params["coeffs"] = {str(k): [complex(v).real, complex(v).imag]
                                for k, v in params["coeffs"].items()}
        cfg = {"family": self.family, "params": params, "seed": self.seed}
        if window is not None:
            cfg["window"] = window
        return cfg


def _as_complex(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, str):
        return complex(v.replace(" ", ""))
    return complex(v)


def load_potential_config(path: str | Path) -> tuple[PotentialSpec, int | None]:
    with open(path) as fh:
        return PotentialSpec.from_config(json.load(fh))


def _even_indices(window: int) -> np.ndarray:
    k = np.arange(-window, window + 1)
    return k[(k % 2 == 0) & (k != 0)]


def _lp_cosine_integrals(beta: float, ks: np.ndarray, panels: int = 10_000) -> np.ndarray:
    """``int_0^{pi/2} t^-beta cos(k t) dt`` by composite Gauss quadrature.

    The first panel uses Gauss-Jacobi nodes absorbing ``t^-beta``; the
    remaining ``panels - 1`` panels use Gauss-Legendre.
    """
    h = (math.pi / 2) / panels
    order = 8
    xj, wj = roots_jacobi(order, 0.0, -beta)   # weight (1+x)^(-beta) on [-1, 1]
    t0 = (xj + 1.0) * h / 2.0
    w0 = wj * (h / 2.0) ** (1.0 - beta)
    xl, wl = roots_legendre(order)
    left = h * np.arange(1, panels)
    t = (left[:, None] + (xl[None, :] + 1.0) * h / 2.0).ravel()
    w = np.tile(wl * h / 2.0, panels - 1) * t ** (-beta)
    t_all = np.concatenate([t0, t])
    w_all = np.concatenate([w0, w])
    out = np.empty(ks.size)
    for start in range(0, ks.size, 64):
        kk = ks[start:start + 64].astype(float)
        out[start:start + 64] = np.cos(np.outer(kk, t_all)) @ w_all
    return out


def lp_envelope(beta: float, k) -> np.ndarray:
    """Large-k asymptote of ``int_0^inf t^-beta cos(kt) dt``."""
    k = np.asarray(k, dtype=float)
    return _gamma(1.0 - beta) * math.sin(math.pi * beta / 2.0) * k ** (beta - 1.0)


def make_potential(spec: PotentialSpec, bc: Lattice, window: int, seed: int | None = None
                   ) -> tuple[CoeffSeq, CoeffSeq | None]:
    """Coefficients ``(V, Q)`` of a potential family on the lattice of ``bc``.

    For periodic/antiperiodic bc both sequences live on the even lattice with
    ``|k| <= window``; for Dirichlet they are the cosine coefficients of v and
    the sine coefficients of Q for ``1 <= m <= window``.  ``Q`` is ``None``
    when ``V(k)/(ik)`` is not meaningful for the family.
    """
    bc = Lattice.parse(bc)
    if window < 4:
        raise ValueError("window must be at least 4")
    seed = spec.seed if seed is None else seed
    fam, p = spec.family, spec.params
    dirichlet = bc is Lattice.DIR

    if fam in ("trig", "mathieu"):
        if fam == "mathieu":
            a = float(p.get("amplitude", 1.0))
            vcoef = {2: a, -2: a}
        else:
            vcoef = {int(k): _as_complex(v) for k, v in dict(p.get("coeffs", {})).items()}
            if vcoef.get(0, 0) != 0:
                raise ValueError("trig potential must have V(0) = 0")
            vcoef.pop(0, None)
        V = CoeffSeq(Lattice.PER_PLUS, {k: v for k, v in vcoef.items() if abs(k) <= window}, "V")
        q = {k: v / (1j * k) for k, v in V.entries.items()}
        if not dirichlet:
            return V, CoeffSeq(Lattice.PER_PLUS, q, "Q")
        # Q(0) = 0 fixes the constant; the sine expansion is then exact.
        q[0] = -sum(q.values())
        qt = exp_to_sine(CoeffSeq(Lattice.PER_PLUS, q, "Q"), window=window)
        qt = CoeffSeq(Lattice.DIR, qt.entries, "Q", tail=qt.tail)
        return derive_potential_coeffs(qt, Lattice.DIR), qt

    if fam in ("sawtooth", "dirac"):
        c = float(p.get("c", 1.0))
        derivative = int(p.get("derivative", 1)) if fam == "sawtooth" else 1
        if derivative not in (0, 1):
            raise ValueError("sawtooth derivative must be 0 or 1")
        if not dirichlet:
            k = _even_indices(window)
            if derivative:
                V = dict(zip(k.tolist(), np.full(k.size, c, dtype=complex)))
                q = dict(zip(k.tolist(), -1j * c / k))
            else:
                V = dict(zip(k.tolist(), -1j * c / k))
                q = dict(zip(k.tolist(), -c / k.astype(float) ** 2))
            return (CoeffSeq(Lattice.PER_PLUS, V, "V"),
                    CoeffSeq(Lattice.PER_PLUS, q, "Q"))
        m = np.arange(1, window + 1)
        if derivative:
            vt = np.where(m % 2 == 0, SQRT2 * c, 0.0)
        else:
            vt = np.where(m % 2 == 1, 2.0 * SQRT2 * c / (math.pi * m.astype(float) ** 2), 0.0)
        Vt = CoeffSeq(Lattice.DIR, dict(zip(m.tolist(), vt)), "V")
        return Vt, CoeffSeq(Lattice.DIR, dict(zip(m.tolist(), vt / m)), "Q")

    if fam == "sobolev_tail":
        alpha = float(p["alpha"])
        rng = np.random.default_rng(seed)
        if not dirichlet or alpha < 0.5:
            kp = np.arange(2, window + 1, 2)
            amp = kp ** (alpha - 0.5) / (1.0 + np.log(kp))
            ph = np.exp(2j * math.pi * rng.random(kp.size))
            V = {}
            for k, a, z in zip(kp.tolist(), amp, ph):
                V[k] = a * z
                V[-k] = a * np.conj(z)
            q = {k: v / (1j * k) for k, v in V.items()}
            if not dirichlet:
                return CoeffSeq(Lattice.PER_PLUS, V, "V"), CoeffSeq(Lattice.PER_PLUS, q, "Q")
            q[0] = -sum(q.values())
            qt = exp_to_sine(CoeffSeq(Lattice.PER_PLUS, q, "Q"), window=window)
            qt = CoeffSeq(Lattice.DIR, qt.entries, "Q", tail=qt.tail)
            return derive_potential_coeffs(qt, Lattice.DIR), qt
        # alpha >= 1/2: the sine representation is generated directly
        m = np.arange(1, window + 1)
        amp = m ** (alpha - 0.5) / (1.0 + np.log(m))
        sign = np.where(rng.random(m.size) < 0.5, -1.0, 1.0)
        vt = amp * sign
        return (CoeffSeq(Lattice.DIR, dict(zip(m.tolist(), vt)), "V"),
                CoeffSeq(Lattice.DIR, dict(zip(m.tolist(), vt / m)), "Q"))

    if fam == "lp_singular":
        beta = float(p["beta"])
        if not 0.0 < beta < 1.0:
            raise ValueError(f"lp_singular needs 0 < beta < 1 (got {beta}); beta >= 1 is not integrable")
        if not dirichlet:
            k = _even_indices(window)
            I = _lp_cosine_integrals(beta, np.abs(k))
            V = (2.0 / math.pi) * np.exp(-1j * k * math.pi / 2.0) * I
            q = V / (1j * k)
            return (CoeffSeq(Lattice.PER_PLUS, dict(zip(k.tolist(), V)), "V"),
                    CoeffSeq(Lattice.PER_PLUS, dict(zip(k.tolist(), q)), "Q"))
        m = np.arange(1, window + 1)
        I = _lp_cosine_integrals(beta, m)
        vt = (2.0 * SQRT2 / math.pi) * np.cos(m * math.pi / 2.0) * I
        vt[m % 2 == 1] = 0.0
        return (CoeffSeq(Lattice.DIR, dict(zip(m.tolist(), vt)), "V"),
                CoeffSeq(Lattice.DIR, dict(zip(m.tolist(), vt / m)), "Q"))

    raise UnknownFamily(fam)


# ---------------------------------------------------------------------------
# coefficient files: CSV with columns index, re, im


def write_coeffs_csv(seq: CoeffSeq, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "re", "im"])
        for k, v in seq.entries.items():
            w.writerow([k, repr(v.real), repr(v.imag)])


def read_coeffs_csv(path: str | Path, lattice: Lattice, role: str = "f") -> CoeffSeq:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return CoeffSeq(Lattice.parse(lattice),
                    {int(r["index"]): complex(float(r["re"]), float(r["im"])) for r in rows}, role)


def coeffs_from_pairs(lattice: Lattice, pairs: Iterable[tuple[int, complex]], role: str = "f") -> CoeffSeq:
    return CoeffSeq(lattice, dict(pairs), role)
