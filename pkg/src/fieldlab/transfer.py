"""Transfer of scalar-field profiles to Kirchhoff solutions.

A profile v solves the constant-coefficient problem; u(.) = v(t.) solves
the nonlocal one exactly when t > 0 satisfies M(t^(2-N) g) t^2 = 1 with
g the gradient seminorm of v.  In the plane the root is closed-form; in
higher dimensions roots are bracketed on a logarithmic scan and bisected.
An empty root set is a legitimate nonexistence verdict, not an error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .functionals import energy_kt, grad_norm_sq, strong_residual
from .nonlinearity import ConfigError, KirchhoffFunction
from .shooting import InvariantViolation, NumericalError, RadialProfile, TailModel

ROOT_CERTIFICATE = 1e-10
DISTINCT_REL_SEP = 1e-6


@dataclass
class TransferResult:
    source: RadialProfile
    grad_norm_sq_v: float
    roots: list[float]
    profiles: list[RadialProfile]
    kirchhoff_grad_norms: list[float]
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_roots(self) -> int:
        return len(self.roots)


@dataclass
class SweepEntry:
    profile_index: int
    t: float
    kt_grad: float
    energy: float
    h_residual: float


@dataclass
class SweepRow:
    q: float
    count: int
    entries: list[SweepEntry]
    message: str = ""


@dataclass
class MultiplicityTable:
    family_descriptor: dict
    q_values: np.ndarray
    rows: list[SweepRow]
    threshold_q_n: Optional[float] = None
    threshold_n: Optional[int] = None


def transfer_map(v: RadialProfile, kf: KirchhoffFunction, t: float) -> float:
    """M(t^(2-N) g) t^2 for the cached gradient seminorm g of v."""
    if t <= 0.0:
        raise ConfigError("transfer scale t must be positive")
    g = grad_norm_sq(v)
    return float(kf.M(t ** (2 - v.dimension) * g)) * t * t


def _check_m1(kf: KirchhoffFunction, args) -> None:
    vals = np.asarray(kf.M(np.asarray(args, dtype=np.float64)), dtype=np.float64)
    finite = np.isfinite(vals)
    if np.any(vals[finite] < kf.m0 * (1.0 - 1e-12)):
        bad = np.asarray(args)[finite][vals[finite] < kf.m0 * (1.0 - 1e-12)]
        raise ConfigError(
            f"M violates its floor (M1) at scanned argument {bad[0]!r}")


def solve_transfer(v: RadialProfile, kf: KirchhoffFunction,
                   t_lo: float = 1e-6, t_hi: float = 1e6,
                   panels: int = 200) -> TransferResult:
    """All positive roots of M(t^(2-N) g) t^2 = 1, each certified to
    |h - 1| < 1e-10, with the rescaled profiles built per root."""
    n = v.dimension
    g = grad_norm_sq(v)
    if n == 2:
        _check_m1(kf, [g])
        mg = float(kf.M(g))
        if not math.isfinite(mg):
            raise NumericalError(
                f"coefficient overflows at the gradient seminorm {g!r}")
        roots = [1.0 / math.sqrt(mg)]
    else:
        ts = np.geomspace(t_lo, t_hi, panels + 1)
        with np.errstate(over="ignore", invalid="ignore"):
            args = ts ** (2 - n) * g
            mv = np.asarray(kf.M(args), dtype=np.float64)
            phi = mv * ts * ts - 1.0
        _check_m1(kf, args[np.isfinite(mv)])
        phi = np.where(np.isnan(phi), np.inf, phi)

        def target(t):
            val = float(kf.M(t ** (2 - n) * g)) * t * t - 1.0
            return val if math.isfinite(val) else math.inf

        roots = []
        usable = np.isfinite(phi)
        idx = np.nonzero(usable)[0]
        for a, b in zip(idx[:-1], idx[1:]):
            if phi[a] == 0.0:
                roots.append(float(ts[a]))
            elif (phi[a] < 0.0) != (phi[b] < 0.0):
                roots.append(float(brentq(target, ts[a], ts[b],
                                          xtol=1e-15, rtol=8.9e-16, maxiter=200)))
        if len(idx) and phi[idx[-1]] == 0.0:
            roots.append(float(ts[idx[-1]]))
        dedup = []
        for t in sorted(roots):
            if not dedup or t > dedup[-1] * (1.0 + 1e-12):
                dedup.append(t)
        roots = dedup

    h_res = []
    for t in roots:
        res = abs(transfer_map(v, kf, t) - 1.0)
        if res >= ROOT_CERTIFICATE:
            raise NumericalError(
                f"root t={t!r} fails the certificate |h-1| = {res:.3e}")
        h_res.append(res)

    profiles = [build_kt_solution(v, t) for t in roots]
    kt_grads = [t ** (2 - n) * g for t in roots]
    strong = [strong_residual(u, kf) for u in profiles]
    return TransferResult(
        source=v, grad_norm_sq_v=g, roots=roots, profiles=profiles,
        kirchhoff_grad_norms=kt_grads,
        diagnostics={"h_residual": h_res, "strong_residual": strong})


def build_kt_solution(v: RadialProfile, t: float) -> RadialProfile:
    """u(.) = v(t.): radii shrink by t, derivatives grow by t, cached
    moments transform by the exact scaling laws."""
    if t <= 0.0:
        raise ConfigError("transfer scale t must be positive")
    if v.tail is None:
        raise ConfigError("profile has no tail model attached")
    n = v.dimension
    nu = v.tail.algebraic_power
    # v(t r) = (C t^-nu) r^-nu exp(-(kappa t) r)
    tail = TailModel(match_radius=v.tail.match_radius / t,
                     amplitude=v.tail.amplitude * t ** -nu,
                     decay_rate=v.tail.decay_rate * t,
                     algebraic_power=nu)
    u = RadialProfile(
        dimension=n,
        radii=v.radii / t,
        values=v.values.copy(),
        derivs=v.derivs * t,
        node_count=v.node_count,
        shoot_height=v.shoot_height,
        tail=tail,
        f_id=dict(v.f_id),
        source_f=v.source_f,
    )
    scale = {"grad_norm_sq": t ** (2 - n), "l2_norm_sq": t ** (-n),
             "integral_F": t ** (-n), "integral_fu": t ** (-n)}
    for key, fac in scale.items():
        if key in v.norms:
            u.norms[key] = v.norms[key] * fac
    return u


def q_threshold(kf: KirchhoffFunction, profiles: Sequence[RadialProfile],
                n: int) -> float:
    """m0 / (1 + max_{i<=n} lambda((2 m0)^((N-2)/2) g_i)) for the
    decomposed family M = m0 + q lambda."""
    if kf.decomposition is None:
        raise ConfigError("q threshold needs a decomposed M = m0 + q*lambda")
    if n < 1 or len(profiles) < n:
        raise ConfigError(f"need at least n={n} profiles, got {len(profiles)}")
    dim = profiles[0].dimension
    if dim < 3:
        raise ConfigError("q threshold is defined for dimension >= 3")
    gs = [grad_norm_sq(p) for p in profiles[:n]]
    if any(b <= a for a, b in zip(gs, gs[1:])):
        raise InvariantViolation(
            "profiles must be ordered by strictly increasing gradient seminorm")
    m0 = kf.m0
    args = (2.0 * m0) ** ((dim - 2) / 2.0) * np.asarray(gs)
    lam_max = float(np.max(np.asarray(kf.decomposition.lam(args), dtype=np.float64)))
    return m0 / (1.0 + lam_max)


def _distinct_count(values: Sequence[float], rel: float = DISTINCT_REL_SEP) -> int:
    if not values:
        return 0
    vals = sorted(values)
    count = 1
    for a, b in zip(vals, vals[1:]):
        if b - a > rel * max(1.0, abs(b)):
            count += 1
    return count


def multiplicity_sweep(family: Callable[[float], KirchhoffFunction],
                       profiles: Sequence[RadialProfile],
                       q_grid: Sequence[float]) -> MultiplicityTable:
    """For each q, transfer every profile through M_q and count the
    solutions with pairwise-distinct Kirchhoff gradient norms."""
    q_grid = np.asarray(q_grid, dtype=np.float64)
    if q_grid.ndim != 1 or len(q_grid) == 0 or np.any(np.diff(q_grid) <= 0.0) \
            or np.any(q_grid <= 0.0):
        raise ConfigError("q grid must be positive and strictly increasing")

    rows = []
    for q in q_grid:
        kf = family(float(q))
        entries = []
        message = ""
        try:
            for i, v in enumerate(profiles):
                res = solve_transfer(v, kf)
                for t, kg, hres, u in zip(res.roots, res.kirchhoff_grad_norms,
                                          res.diagnostics["h_residual"],
                                          res.profiles):
                    entries.append(SweepEntry(i, t, kg, energy_kt(u, kf), hres))
        except (NumericalError, ConfigError) as exc:
            entries = []
            message = f"transfer failed: {exc}"
        count = _distinct_count([e.kt_grad for e in entries]) if entries else 0
        rows.append(SweepRow(float(q), count, entries, message))

    kf0 = family(float(q_grid[0]))
    q_n = None
    n_used = None
    if kf0.decomposition is not None and profiles \
            and profiles[0].dimension >= 3:
        n_used = len(profiles)
        q_n = q_threshold(kf0, profiles, n_used)
    return MultiplicityTable(
        family_descriptor=dict(kf0.descriptor), q_values=q_grid, rows=rows,
        threshold_q_n=q_n, threshold_n=n_used)
