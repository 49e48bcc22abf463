"""Nonlinearities f, Kirchhoff coefficients M, and sampled verification of
the standing structural conditions.

All condition checks are honest trend classifiers: limit statements are
judged over logarithmic decades of samples and come back ``Inconclusive``
when the sampled tail is ambiguous, never silently ``Holds``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import kernels

HOLDS = "Holds"
FAILS = "Fails"
INCONCLUSIVE = "Inconclusive"

_EMPTY = np.empty(0, dtype=np.float64)


class ConfigError(ValueError):
    """Invalid user-supplied configuration or parameters."""


@dataclass(frozen=True)
class SamplingGrid:
    """Logarithmic sampling grid, ``points_per_decade`` points per decade."""

    lo: float = 1e-6
    hi: float = 1e6
    points_per_decade: int = 512

    def __post_init__(self):
        if not (0.0 < self.lo < self.hi):
            raise ConfigError("sampling grid needs 0 < lo < hi")
        if self.points_per_decade < 4:
            raise ConfigError("points_per_decade must be at least 4")

    @property
    def n_decades(self) -> float:
        return math.log10(self.hi / self.lo)

    def points(self) -> np.ndarray:
        n = max(2, int(round(self.points_per_decade * self.n_decades)) + 1)
        return np.geomspace(self.lo, self.hi, n)


@dataclass
class ConditionReport:
    condition_id: str
    verdict: str
    evidence: list[tuple[float, float]]
    message: str

    def __post_init__(self):
        if self.verdict not in (HOLDS, FAILS, INCONCLUSIVE):
            raise ValueError(f"unknown verdict {self.verdict!r}")
        if self.verdict == FAILS and not self.evidence:
            raise ValueError("a Fails report must carry counterexample evidence")

    @property
    def holds(self) -> bool:
        return self.verdict == HOLDS


@dataclass(frozen=True)
class KernelSpec:
    """Descriptor consumed by the integration kernels (see kernels.py)."""

    kind: int
    params: np.ndarray
    tab_t: np.ndarray = field(default_factory=lambda: _EMPTY)
    tab_a: np.ndarray = field(default_factory=lambda: _EMPTY)
    tab_b: np.ndarray = field(default_factory=lambda: _EMPTY)


def _vector_f(spec: KernelSpec, t):
    """Vectorized twin of kernels._f_val (identical arithmetic)."""
    t = np.asarray(t, dtype=np.float64)
    if spec.kind == kernels.F_POWER:
        mu, p = spec.params
        return -mu * t + np.abs(t) ** (p - 1.0) * t
    sgn = np.where(t < 0.0, -1.0, 1.0)
    x = np.abs(t)
    g = spec.tab_t
    if spec.kind == kernels.F_AUX:
        p0, omega, m0 = spec.params
        i = np.clip(np.searchsorted(g, x, side="right") - 1, 0, len(g) - 1)
        return sgn * (x ** p0 * spec.tab_a[i] - omega * x) / m0
    if g[0] > 0.0:
        lo_val = spec.tab_a[0] * x / g[0]
    else:
        lo_val = np.full_like(x, spec.tab_a[0])
    i = np.clip(np.searchsorted(g, x, side="right") - 1, 0, len(g) - 2)
    w = (x - g[i]) / (g[i + 1] - g[i])
    mid_val = spec.tab_a[i] * (1.0 - w) + spec.tab_a[i + 1] * w
    return sgn * np.where(x <= g[0], lo_val, mid_val)


def _vector_F(spec: KernelSpec, t):
    """Vectorized twin of kernels._F_val."""
    t = np.asarray(t, dtype=np.float64)
    x = np.abs(t)
    if spec.kind == kernels.F_POWER:
        mu, p = spec.params
        return -mu * x * x / 2.0 + x ** (p + 1.0) / (p + 1.0)
    g = spec.tab_t
    if spec.kind == kernels.F_AUX:
        p0, omega, m0 = spec.params
        q = p0 + 1.0
        i = np.clip(np.searchsorted(g, x, side="right") - 1, 0, len(g) - 1)
        hbar_int = spec.tab_b[i] + spec.tab_a[i] * (x ** q - g[i] ** q) / q
        return (hbar_int - omega * x * x / 2.0) / m0
    i = np.clip(np.searchsorted(g, x, side="right") - 1, 0, len(g) - 2)
    w = (x - g[i]) / (g[i + 1] - g[i])
    fx = spec.tab_a[i] * (1.0 - w) + spec.tab_a[i + 1] * w
    if g[0] > 0.0:
        below = 0.5 * (spec.tab_a[0] * x / g[0]) * x
    else:
        below = np.zeros_like(x)
    inside = spec.tab_b[i] + 0.5 * (spec.tab_a[i] + fx) * (x - g[i])
    beyond = spec.tab_b[i + 1] + 0.5 * (spec.tab_a[i + 1] + fx) * (x - g[i + 1])
    return np.where(x <= g[0], below, np.where(x <= g[i + 1], inside, beyond))


@dataclass
class Nonlinearity:
    """A source term f with antiderivative F and its structural data.

    ``omega`` is the stored linearization rate (-1/2 of the small-t slope of
    f(t)/t), ``zeta`` a point where F is strictly positive, and
    ``growth_exponent`` the critical power the growth check compares against
    (``inf`` selects the planar, subgaussian criterion).
    """

    f: Callable
    F: Callable
    omega: float
    zeta: float
    growth_exponent: float
    family: str
    descriptor: dict
    kernel: KernelSpec

    def __post_init__(self):
        if self.omega <= 0.0:
            raise ConfigError("omega must be positive")
        if self.zeta <= 0.0:
            raise ConfigError("zeta must be positive")

    @property
    def kappa(self) -> float:
        """Exponential decay rate of solution tails, sqrt(2*omega)."""
        return math.sqrt(2.0 * self.omega)


@dataclass
class MDecomposition:
    q: float
    lam: Callable
    Lam: Callable

    def __post_init__(self):
        if self.q <= 0.0:
            raise ConfigError("decomposition weight q must be positive")


@dataclass
class KirchhoffFunction:
    """Diffusion coefficient M with antiderivative M_hat and floor m0."""

    M: Callable
    M_hat: Callable
    m0: float
    family: str
    descriptor: dict
    decomposition: Optional[MDecomposition] = None

    def __post_init__(self):
        if self.m0 <= 0.0:
            raise ConfigError("m0 must be positive")
        if self.decomposition is not None:
            t = np.linspace(0.0, 10.0, 33)
            recon = self.m0 + self.decomposition.q * self.decomposition.lam(t)
            if not np.allclose(recon, self.M(t), rtol=1e-12, atol=1e-12):
                raise ConfigError("decomposition does not reproduce M on samples")


def make_power_nonlinearity(mu: float, p: float, n_dim: int) -> Nonlinearity:
    """f(t) = -mu*t + |t|^(p-1) t, the canonical odd focusing family."""
    if mu <= 0.0:
        raise ConfigError("mu must be positive")
    if p <= 1.0:
        raise ConfigError("p must exceed 1")
    if n_dim < 2:
        raise ConfigError("dimension must be at least 2")
    if n_dim >= 3:
        crit = (n_dim + 2.0) / (n_dim - 2.0)
        if p >= crit:
            raise ConfigError(
                f"p={p} is not subcritical in dimension {n_dim}: "
                f"condition f2 requires p < {crit}")
        growth = crit
    else:
        growth = math.inf
    spec = KernelSpec(kernels.F_POWER, np.array([mu, p], dtype=np.float64))
    # F first turns positive at t_F = (mu (p+1)/2)^(1/(p-1)); the stored
    # witness sits a factor sqrt(2) above it so F(zeta) > 0 strictly.
    zeta = (mu * (p + 1.0) * 2.0 ** ((p - 3.0) / 2.0)) ** (1.0 / (p - 1.0))
    return Nonlinearity(
        f=lambda t, s=spec: _vector_f(s, t),
        F=lambda t, s=spec: _vector_F(s, t),
        omega=mu / 2.0,
        zeta=zeta,
        growth_exponent=growth,
        family="power",
        descriptor={"family": "power", "mu": mu, "p": p, "n_dim": n_dim},
        kernel=spec,
    )


def make_tabulated_nonlinearity(t_samples, f_samples, n_dim: int,
                                omega: Optional[float] = None,
                                zeta: Optional[float] = None,
                                smallest_decade: float = 1e-6) -> Nonlinearity:
    """Odd piecewise-linear nonlinearity from samples on t >= 0.

    When ``omega`` is not given it is estimated as -1/2 of the largest
    sampled f(t)/t over the smallest decade of the table (a sampling proxy
    for the small-t slope; override when the analytic value is known).
    """
    t = np.ascontiguousarray(np.asarray(t_samples, dtype=np.float64))
    fv = np.ascontiguousarray(np.asarray(f_samples, dtype=np.float64))
    if t.ndim != 1 or t.shape != fv.shape or len(t) < 2:
        raise ConfigError("tabulated nonlinearity needs matching 1-d samples")
    if np.any(np.diff(t) <= 0.0) or t[0] < 0.0:
        raise ConfigError("table abscissae must be nonnegative and increasing")
    Fv = np.concatenate([[0.0], np.cumsum(0.5 * (fv[1:] + fv[:-1]) * np.diff(t))])
    if t[0] > 0.0:
        Fv += 0.5 * fv[0] * t[0]
    spec = KernelSpec(kernels.F_TABLE, _EMPTY, t, fv, Fv)
    if omega is None:
        pos = t > 0.0
        win = pos & (t <= max(t[pos].min() * 10.0, smallest_decade * 10.0))
        if not np.any(win):
            win = pos
        omega = -0.5 * float(np.max(fv[win] / t[win]))
        if omega <= 0.0:
            raise ConfigError(
                "cannot estimate a positive omega from the table; pass omega=")
    if zeta is None:
        positive = np.nonzero(Fv > 0.0)[0]
        if len(positive) == 0:
            raise ConfigError("table shows no point with F > 0; pass zeta=")
        zeta = float(t[positive[0]])
    growth = (n_dim + 2.0) / (n_dim - 2.0) if n_dim >= 3 else math.inf
    return Nonlinearity(
        f=lambda x, s=spec: _vector_f(s, x),
        F=lambda x, s=spec: _vector_F(s, x),
        omega=float(omega),
        zeta=float(zeta),
        growth_exponent=growth,
        family="tabulated",
        descriptor={"family": "tabulated", "n_dim": n_dim,
                    "n_samples": len(t), "t_max": float(t[-1])},
        kernel=spec,
    )


# ---------------------------------------------------------------------------
# Kirchhoff coefficient families


def make_constant_m(c: float = 1.0) -> KirchhoffFunction:
    if c <= 0.0:
        raise ConfigError("constant M must be positive")
    return KirchhoffFunction(
        M=lambda t: np.full_like(np.asarray(t, dtype=np.float64), c),
        M_hat=lambda t: c * np.asarray(t, dtype=np.float64),
        m0=c,
        family="constant",
        descriptor={"family": "constant", "c": c},
        decomposition=MDecomposition(q=1.0,
                                     lam=lambda t: np.zeros_like(np.asarray(t, dtype=np.float64)),
                                     Lam=lambda t: np.zeros_like(np.asarray(t, dtype=np.float64))),
    )


def make_affine_m(a: float, b: float) -> KirchhoffFunction:
    """M(t) = a + b*t (the classical Kirchhoff coefficient)."""
    if a <= 0.0 or b < 0.0:
        raise ConfigError("affine M needs a > 0 and b >= 0")
    dec = MDecomposition(q=b, lam=lambda t: np.asarray(t, dtype=np.float64),
                         Lam=lambda t: np.asarray(t, dtype=np.float64) ** 2 / 2.0) if b > 0 else None
    return KirchhoffFunction(
        M=lambda t: a + b * np.asarray(t, dtype=np.float64),
        M_hat=lambda t: a * np.asarray(t, dtype=np.float64) + b * np.asarray(t, dtype=np.float64) ** 2 / 2.0,
        m0=a,
        family="affine",
        descriptor={"family": "affine", "a": a, "b": b},
        decomposition=dec,
    )


def make_power_m(m0: float, q: float, s: float) -> KirchhoffFunction:
    """M(t) = m0 + q*t^s."""
    if m0 <= 0.0 or q < 0.0 or s <= 0.0:
        raise ConfigError("power M needs m0 > 0, q >= 0, s > 0")
    dec = MDecomposition(q=q, lam=lambda t: np.asarray(t, dtype=np.float64) ** s,
                         Lam=lambda t: np.asarray(t, dtype=np.float64) ** (s + 1.0) / (s + 1.0)) if q > 0 else None
    return KirchhoffFunction(
        M=lambda t: m0 + q * np.asarray(t, dtype=np.float64) ** s,
        M_hat=lambda t: m0 * np.asarray(t, dtype=np.float64) + q * np.asarray(t, dtype=np.float64) ** (s + 1.0) / (s + 1.0),
        m0=m0,
        family="power_m",
        descriptor={"family": "power_m", "m0": m0, "q": q, "s": s},
        decomposition=dec,
    )


def make_exp_m(q: float, m0: float = 1.0) -> KirchhoffFunction:
    """M(t) = m0 + (q/2)(e^t - 1), an exponentially growing coefficient."""
    if m0 <= 0.0 or q < 0.0:
        raise ConfigError("exp M needs m0 > 0 and q >= 0")

    def lam(t):
        t = np.asarray(t, dtype=np.float64)
        with np.errstate(over="ignore"):
            return 0.5 * np.expm1(t)

    def Lam(t):
        t = np.asarray(t, dtype=np.float64)
        with np.errstate(over="ignore"):
            return 0.5 * (np.expm1(t) - t)

    dec = MDecomposition(q=q, lam=lam, Lam=Lam) if q > 0 else None
    return KirchhoffFunction(
        M=lambda t: m0 + q * lam(t),
        M_hat=lambda t: m0 * np.asarray(t, dtype=np.float64) + q * Lam(t),
        m0=m0,
        family="exp_m",
        descriptor={"family": "exp_m", "m0": m0, "q": q},
        decomposition=dec,
    )


# ---------------------------------------------------------------------------
# Trend classification over logarithmic decades


def _decade_extrema(t: np.ndarray, y: np.ndarray, n: int, top: bool):
    """Per-decade (min, max, representative t) over the n lowest (or
    highest) full decades of finite samples, anchored at the grid end so
    no bin is a sliver."""
    finite = np.isfinite(y)
    t, y = t[finite], y[finite]
    if len(t) == 0:
        return []
    if top:
        d = np.floor(np.log10(t[-1] / t) + 1e-12).astype(int)
    else:
        d = np.floor(np.log10(t / t[0]) + 1e-12).astype(int)
    out = []
    decades = range(n - 1, -1, -1) if top else range(n)
    for dec in decades:
        m = d == dec
        if np.any(m):
            out.append((float(np.min(y[m])), float(np.max(y[m])),
                        float(np.median(t[m]))))
    return out


def _is_decreasing(vals, rel=0.05) -> bool:
    return all(b < a - rel * abs(a) for a, b in zip(vals, vals[1:]))


def _is_increasing(vals, rel=0.05) -> bool:
    return all(b > a + rel * abs(a) for a, b in zip(vals, vals[1:]))


def _trend(vals, rel=0.05) -> str:
    """Classify a short per-decade sequence: down | up | flat | mixed."""
    if _is_decreasing(vals, rel):
        return "down"
    if _is_increasing(vals, rel):
        return "up"
    if max(vals) - min(vals) <= rel * max(1e-300, abs(vals[0])):
        return "flat"
    return "mixed"


def _evidence(t, y, count=3):
    """A few (t, value) samples spread over the finite entries."""
    ok = np.nonzero(np.isfinite(y))[0]
    if len(ok) == 0:
        return []
    idx = ok[np.linspace(0, len(ok) - 1, count).astype(int)]
    return [(float(t[i]), float(y[i])) for i in idx]


def check_f_conditions(nl: Nonlinearity, grid: SamplingGrid | None = None) -> list[ConditionReport]:
    """Sampled verdicts for the structural conditions f0, f1p, f2, f3."""
    grid = grid or SamplingGrid()
    t = grid.points()
    if len(t) == 0:
        raise ConfigError("empty sampling grid")
    reports = []

    with np.errstate(over="ignore", invalid="ignore"):
        ft = np.asarray(nl.f(t), dtype=np.float64)
        fmt = np.asarray(nl.f(-t), dtype=np.float64)

    # f0: oddness on sampled +/- pairs
    scale = 1.0 + np.abs(ft)
    bad = np.nonzero(np.abs(fmt + ft) > 1e-12 * scale)[0]
    if len(bad):
        reports.append(ConditionReport(
            "f0", FAILS, [(float(t[i]), float(fmt[i] + ft[i])) for i in bad[:3]],
            "f(-t) + f(t) deviates from 0"))
    else:
        reports.append(ConditionReport("f0", HOLDS, _evidence(t, fmt + ft),
                                       "f is odd at all sampled pairs"))

    # f1p: behavior of f(t)/t as t -> 0+
    ratio = ft / t
    stats = _decade_extrema(t, ratio, 3, top=False)
    if len(stats) < 2:
        reports.append(ConditionReport("f1p", INCONCLUSIVE, _evidence(t, ratio),
                                       "not enough small-t decades sampled"))
    else:
        sups = [s[1] for s in stats]      # ordered small decade -> larger
        infs = [s[0] for s in stats]
        if sups[0] < 0.0:
            diverging = (infs[0] < -10.0 * max(1.0, abs(infs[1]))
                         and infs[0] < infs[1] < infs[-1])
            if diverging:
                reports.append(ConditionReport(
                    "f1p", INCONCLUSIVE, _evidence(t, ratio),
                    "f(t)/t is negative but may diverge as t -> 0"))
            else:
                reports.append(ConditionReport(
                    "f1p", HOLDS, [(s[2], s[1]) for s in stats],
                    f"sampled sup f(t)/t = {sups[0]:.6g} < 0 near 0"))
        else:
            if _trend(sups[::-1]) != "mixed":
                reports.append(ConditionReport(
                    "f1p", FAILS, [(s[2], s[1]) for s in stats],
                    f"f(t)/t trends to {sups[0]:.6g} >= 0 as t -> 0"))
            else:
                reports.append(ConditionReport(
                    "f1p", INCONCLUSIVE, [(s[2], s[1]) for s in stats],
                    "non-monotone f(t)/t trend near 0"))

    # f2: growth at infinity
    if math.isfinite(nl.growth_exponent):
        gro = np.abs(ft) / t ** nl.growth_exponent
        label = f"|f(t)|/t^{nl.growth_exponent:g}"
    else:
        gro = np.log1p(np.abs(ft)) / t ** 2
        label = "log(1+|f(t)|)/t^2"
    stats = _decade_extrema(t, gro, 3, top=True)
    if len(stats) < 3:
        reports.append(ConditionReport("f2", INCONCLUSIVE, _evidence(t, gro),
                                       "not enough large-t decades sampled"))
    else:
        maxes = [s[1] for s in stats]     # ordered toward larger t
        ev = [(s[2], s[1]) for s in stats]
        kind = _trend(maxes)
        if kind == "down" or maxes[-1] <= 1e-12:
            reports.append(ConditionReport(
                "f2", HOLDS, ev, f"{label} decays over the top decades"))
        elif kind in ("up", "flat"):
            reports.append(ConditionReport(
                "f2", FAILS, ev,
                f"{label} does not decay ({maxes[-1]:.6g} at the top decade)"))
        else:
            reports.append(ConditionReport(
                "f2", INCONCLUSIVE, ev, f"ambiguous {label} tail"))

    # f3: F positive somewhere (at the stored witness)
    Fz = float(nl.F(nl.zeta))
    if Fz > 0.0:
        reports.append(ConditionReport("f3", HOLDS, [(nl.zeta, Fz)],
                                       f"F({nl.zeta:.6g}) = {Fz:.6g} > 0"))
    else:
        reports.append(ConditionReport("f3", FAILS, [(nl.zeta, Fz)],
                                       f"F({nl.zeta:.6g}) = {Fz:.6g} <= 0"))
    return reports


def check_m_conditions(kf: KirchhoffFunction, n_dim: int,
                       grid: SamplingGrid | None = None) -> list[ConditionReport]:
    """Sampled verdicts for M1 and, in dimension >= 3, M2, M3, M2p.

    M2 and M2p classify the tail trend of G(t) = M_hat(t) - (1-2/N) M(t) t;
    M3 classifies the decay of M(t)/t^(2/(N-2)).
    """
    grid = grid or SamplingGrid()
    t = grid.points()
    if len(t) == 0:
        raise ConfigError("empty sampling grid")
    if n_dim < 2:
        raise ConfigError("dimension must be at least 2")
    reports = []

    with np.errstate(over="ignore", invalid="ignore"):
        mt = np.asarray(kf.M(t), dtype=np.float64)

    t0 = np.concatenate([[0.0], t])
    with np.errstate(over="ignore", invalid="ignore"):
        m_all = np.asarray(kf.M(t0), dtype=np.float64)
    finite = np.isfinite(m_all)
    bad = np.nonzero(finite & (m_all < kf.m0 * (1.0 - 1e-12)))[0]
    if len(bad):
        reports.append(ConditionReport(
            "M1", FAILS, [(float(t0[i]), float(m_all[i])) for i in bad[:3]],
            f"M drops below the declared floor m0 = {kf.m0:.6g}"))
    else:
        reports.append(ConditionReport(
            "M1", HOLDS, _evidence(t0, m_all),
            f"M(t) >= m0 = {kf.m0:.6g} at all sampled t"))

    if n_dim == 2:
        return reports

    with np.errstate(over="ignore", invalid="ignore"):
        G = np.asarray(kf.M_hat(t), dtype=np.float64) - (1.0 - 2.0 / n_dim) * mt * t

    stats = _decade_extrema(t, G, 3, top=True)
    if len(stats) < 3:
        reports.append(ConditionReport("M2", INCONCLUSIVE, _evidence(t, G),
                                       "not enough finite large-t decades"))
        reports.append(ConditionReport("M2p", INCONCLUSIVE, _evidence(t, G),
                                       "not enough finite large-t decades"))
    else:
        mins = [s[0] for s in stats]
        maxes = [s[1] for s in stats]
        ev = [(s[2], s[0]) for s in stats]
        kind = _trend(mins)
        if kind == "up" and mins[-1] > 2.0 * max(1.0, mins[0]):
            reports.append(ConditionReport(
                "M2", HOLDS, ev, "G(t) grows without sampled bound"))
        elif kind in ("down", "flat"):
            reports.append(ConditionReport(
                "M2", FAILS, ev, f"G(t) does not diverge (tail min {mins[-1]:.6g})"))
        else:
            reports.append(ConditionReport(
                "M2", INCONCLUSIVE, ev, "G(t) grows too slowly to certify divergence"))

        ev_max = [(s[2], s[1]) for s in stats]
        if maxes[-1] <= 1e-12 and maxes[-2] >= maxes[-1]:
            reports.append(ConditionReport(
                "M2p", HOLDS, ev_max, "G(t) tail is nonpositive"))
        elif _trend(maxes) in ("up", "flat") and maxes[-1] > 1e-12:
            reports.append(ConditionReport(
                "M2p", FAILS, ev_max,
                f"G(t) tail stays positive ({maxes[-1]:.6g})"))
        else:
            reports.append(ConditionReport(
                "M2p", INCONCLUSIVE, ev_max,
                "G(t) tail sign unresolved by sampling"))

    ratio = mt / t ** (2.0 / (n_dim - 2.0))
    stats = _decade_extrema(t, ratio, 3, top=True)
    if len(stats) < 3:
        reports.append(ConditionReport("M3", INCONCLUSIVE, _evidence(t, ratio),
                                       "not enough finite large-t decades"))
    else:
        maxes = [s[1] for s in stats]
        ev = [(s[2], s[1]) for s in stats]
        kind = _trend(maxes)
        if kind == "down" or maxes[-1] <= 1e-12:
            reports.append(ConditionReport(
                "M3", HOLDS, ev, "M(t)/t^(2/(N-2)) decays over the top decades"))
        elif kind in ("up", "flat"):
            reports.append(ConditionReport(
                "M3", FAILS, ev,
                f"M(t)/t^(2/(N-2)) tail stays at {maxes[-1]:.6g}"))
        else:
            reports.append(ConditionReport(
                "M3", INCONCLUSIVE, ev, "ambiguous growth-ratio tail"))
    return reports
