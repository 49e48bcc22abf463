"""Radial shooting solver for v'' + ((N-1)/r) v' + f(v) = 0, v(0)=s, v'(0)=0.

Trajectories are classified by their zero-crossing count; once the local
energy E(r) = v'^2/2 + F(v) turns negative no further crossing is possible
(E is nonincreasing and a crossing needs E >= 0), which terminates the
integration.  Bound states with a prescribed node count are found by
bisecting the shoot height between classification changes.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .nonlinearity import ConfigError, Nonlinearity

TRAPPED = "trapped"
CROSSING = "crossing"
DECAY = "decay"

ENERGY_NEGATIVE = "energy_negative"
MAX_RADIUS = "max_radius"
BLOWUP = "blowup"
TAIL_CAPTURED = "tail_captured"

_TERM_NAME = {
    kernels.TERM_MAX_RADIUS: MAX_RADIUS,
    kernels.TERM_ENERGY_NEG: ENERGY_NEGATIVE,
    kernels.TERM_BLOWUP: BLOWUP,
    kernels.TERM_TAIL: TAIL_CAPTURED,
}


class NumericalError(RuntimeError):
    """A solver failed to converge or a bracket was invalid."""


class InvariantViolation(AssertionError):
    """A mathematical postcondition failed on computed data."""


@dataclass(frozen=True)
class IntegratorOptions:
    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_radius: Optional[float] = None      # default 50/sqrt(2*omega)
    blowup_bound: Optional[float] = None    # default 1e6*(1+|s|)
    max_step: Optional[float] = None        # profile sampling density
    first_step_scale: float = 1e-6
    # |v| scale where the tail is attached; matching much deeper amplifies
    # the integrator's unstable-mode drift faster than the model improves
    tail_match_rel: float = 1e-4

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ConfigError("integrator tolerances must be positive")
        if self.max_radius is not None and self.max_radius <= 0:
            raise ConfigError("max_radius must be positive")

    def radius_limit(self, nl: Nonlinearity) -> float:
        return self.max_radius if self.max_radius is not None else 50.0 / nl.kappa

    def blowup(self, s: float) -> float:
        return self.blowup_bound if self.blowup_bound is not None else 1e6 * (1.0 + abs(s))


@dataclass(frozen=True)
class TailModel:
    """v(r) ~ amplitude * r^(-algebraic_power) * exp(-decay_rate * r)."""

    match_radius: float
    amplitude: float
    decay_rate: float
    algebraic_power: float

    def __post_init__(self):
        if self.decay_rate <= 0.0:
            raise ConfigError("tail decay rate must be positive")

    def value(self, r):
        r = np.asarray(r, dtype=np.float64)
        return self.amplitude * r ** (-self.algebraic_power) * np.exp(-self.decay_rate * r)

    def log_derivative(self, r):
        return -self.decay_rate - self.algebraic_power / np.asarray(r, dtype=np.float64)

    def derivative(self, r):
        return self.value(r) * self.log_derivative(r)


def _count_crossings(values: np.ndarray) -> int:
    s = np.sign(values)
    return int(np.sum(s[1:] * s[:-1] < 0))


@dataclass
class RadialProfile:
    """A sampled bound-state candidate with an attached exponential tail."""

    dimension: int
    radii: np.ndarray
    values: np.ndarray
    derivs: np.ndarray
    node_count: int
    shoot_height: float
    tail: Optional[TailModel]
    f_id: dict
    source_f: Nonlinearity
    norms: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.radii[0] != 0.0 or np.any(np.diff(self.radii) <= 0.0):
            raise InvariantViolation("radii must strictly increase from 0")
        if self.derivs[0] != 0.0:
            raise InvariantViolation("v'(0) must vanish")
        if self.node_count != _count_crossings(self.values):
            raise InvariantViolation("node_count does not match the samples")

    def node_radii(self) -> np.ndarray:
        """Sign-change radii located by linear interpolation."""
        v, r = self.values, self.radii
        idx = np.nonzero(np.sign(v[1:]) * np.sign(v[:-1]) < 0)[0]
        return r[idx] - v[idx] * (r[idx + 1] - r[idx]) / (v[idx + 1] - v[idx])


@dataclass
class Trajectory:
    dimension: int
    shoot_height: float
    radii: np.ndarray
    values: np.ndarray
    derivs: np.ndarray
    crossings: int
    kind: str                    # trapped | crossing | decay
    termination: str             # energy_negative | max_radius | blowup | tail_captured
    final_radius: float
    final_value: float
    final_deriv: float
    final_energy: float

    @property
    def classification(self) -> str:
        if self.kind == DECAY:
            return "Decay"
        return f"{self.kind.capitalize()}({self.crossings})"


def _series_start(nl: Nonlinearity, n_dim: int, s: float, scale: float):
    r0 = scale * (1.0 + abs(s))
    fs = float(nl.f(s))
    v0 = s - fs * r0 * r0 / (2.0 * n_dim)
    w0 = -fs * r0 / n_dim
    return r0, v0, w0


def _run_kernel(nl: Nonlinearity, n_dim: int, s: float, opts: IntegratorOptions,
                store: bool, tail_on: bool, max_step: float = 0.0):
    r0, v0, w0 = _series_start(nl, n_dim, s, opts.first_step_scale)
    r_max = opts.radius_limit(nl)
    v_stop = opts.tail_match_rel * (1.0 + abs(s))
    tail_energy = nl.omega * v_stop * v_stop
    energy_eps = 1e-12 * (1.0 + abs(float(nl.F(s))))
    k = nl.kernel
    capacity = 4096
    if store and max_step > 0.0:
        capacity = int(r_max / max_step * 1.25) + 4096
    return kernels.integrate_radial(
        n_dim, r0, v0, w0, r_max, opts.abs_tol, opts.rel_tol, max_step,
        opts.blowup(s), energy_eps, tail_on, v_stop, tail_energy,
        k.kind, k.params, k.tab_t, k.tab_a, k.tab_b, store, capacity)


def integrate_ivp(nl: Nonlinearity, n_dim: int, s: float,
                  opts: IntegratorOptions | None = None,
                  store: bool = True) -> Trajectory:
    """Integrate one radial trajectory and classify it."""
    if s == 0.0:
        raise ConfigError("shoot height s = 0 gives the trivial solution")
    if n_dim < 2:
        raise ConfigError("dimension must be at least 2")
    opts = opts or IntegratorOptions()
    max_step = opts.max_step if opts.max_step is not None else 0.0
    rr, vv, ww, ncross, code, r, v, w, E = _run_kernel(
        nl, n_dim, s, opts, store, tail_on=False, max_step=max_step)
    if store:
        rr = np.concatenate([[0.0], rr])
        vv = np.concatenate([[s], vv])
        ww = np.concatenate([[0.0], ww])

    term = _TERM_NAME[code]
    v_stop = opts.tail_match_rel * (1.0 + abs(s))
    if term == ENERGY_NEGATIVE:
        kind = TRAPPED
    elif term == MAX_RADIUS and abs(v) <= 10.0 * v_stop \
            and abs(E) <= 10.0 * nl.omega * v_stop * v_stop:
        kind = DECAY
    else:
        kind = CROSSING
    return Trajectory(n_dim, s, rr, vv, ww, ncross, kind, term, r, v, w, E)


def _classify(nl, n_dim, s, opts) -> Trajectory:
    return integrate_ivp(nl, n_dim, s, opts, store=False)


def dead_zone(nl: Nonlinearity, t_hi: Optional[float] = None) -> float:
    """Largest delta with omega*t + f(t) <= 0 on [0, delta], by sign scan
    plus bisection to 1e-12."""
    t_hi = t_hi if t_hi is not None else 10.0 * nl.zeta
    grid = np.geomspace(1e-9 * t_hi, t_hi, 2048)
    g = nl.omega * grid + np.asarray(nl.f(grid), dtype=np.float64)
    pos = np.nonzero(g > 0.0)[0]
    if len(pos) == 0:
        return float(grid[-1])
    i = pos[0]
    if i == 0:
        return 0.0
    lo, hi = grid[i - 1], grid[i]
    for _ in range(200):
        if hi - lo <= 1e-12 * (1.0 + hi):
            break
        mid = 0.5 * (lo + hi)
        if nl.omega * mid + float(nl.f(mid)) > 0.0:
            hi = mid
        else:
            lo = mid
    return float(lo)


def _bisect_height(nl, n_dim, nodes, s_lo, s_hi, tol, opts) -> float:
    """Shrink [s_lo, s_hi] onto the height where the crossing count first
    exceeds ``nodes``; signs of the bracket ends are preserved."""
    sgn = math.copysign(1.0, s_lo)
    lo, hi = abs(s_lo), abs(s_hi)
    for it in range(300):
        if hi - lo < tol * (1.0 + hi):
            return sgn * 0.5 * (lo + hi)
        mid = 0.5 * (lo + hi)
        if _classify(nl, n_dim, sgn * mid, opts).crossings >= nodes + 1:
            hi = mid
        else:
            lo = mid
    raise NumericalError(
        f"bisection exceeded 300 iterations; narrowed bracket [{sgn * lo}, {sgn * hi}]")


def _truncate_to_tail(nl, opts, s, rr, vv, ww, code):
    """Cut the samples at the tail-capture point (or find one post hoc)."""
    if code == kernels.TERM_TAIL:
        return rr, vv, ww
    v_stop = opts.tail_match_rel * (1.0 + abs(s))
    E = 0.5 * ww ** 2 + np.asarray(nl.F(vv), dtype=np.float64)
    ok = (np.abs(vv) <= v_stop) & (vv * ww <= 0.0) \
        & (np.abs(E) <= nl.omega * v_stop * v_stop)
    idx = np.nonzero(ok)[0]
    if len(idx) == 0:
        raise NumericalError(
            "no decaying tail detected on the final trajectory; "
            "the bisection bracket is probably too loose")
    i = int(idx[0])
    return rr[: i + 1], vv[: i + 1], ww[: i + 1]


def find_bound_state(nl: Nonlinearity, n_dim: int, nodes: int,
                     bracket: tuple[float, float], tol: float = 1e-13,
                     opts: IntegratorOptions | None = None) -> RadialProfile:
    """Bisect the shoot height inside ``bracket`` for a state with the
    given node count, then build the profile with an analytic tail."""
    if nodes < 0:
        raise ConfigError("nodes must be nonnegative")
    if tol <= 0:
        raise ConfigError("tol must be positive")
    opts = opts or IntegratorOptions()
    a, b = bracket
    if a == 0.0 or b == 0.0 or math.copysign(1.0, a) != math.copysign(1.0, b):
        raise ConfigError("bracket ends must be nonzero and share a sign")
    s_in, s_out = (a, b) if abs(a) < abs(b) else (b, a)
    t_in = _classify(nl, n_dim, s_in, opts)
    t_out = _classify(nl, n_dim, s_out, opts)
    if t_in.crossings != nodes or t_out.crossings < nodes + 1:
        raise NumericalError(
            f"invalid bracket for {nodes} nodes: inner end is "
            f"{t_in.classification}, outer end is {t_out.classification}")
    s_star = _bisect_height(nl, n_dim, nodes, s_in, s_out, tol, opts)
    return _build_profile(nl, n_dim, nodes, s_star, opts)


def _build_profile(nl, n_dim, nodes, s_star, opts) -> RadialProfile:
    max_step = opts.max_step if opts.max_step is not None else 0.01 / nl.kappa
    rr, vv, ww, ncross, code, r, v, w, E = _run_kernel(
        nl, n_dim, s_star, opts, store=True, tail_on=True, max_step=max_step)
    if code == kernels.TERM_BLOWUP:
        raise NumericalError("final trajectory blew up; bracket too loose")
    rr, vv, ww = _truncate_to_tail(nl, opts, s_star, rr, vv, ww, code)
    rr = np.concatenate([[0.0], rr])
    vv = np.concatenate([[s_star], vv])
    ww = np.concatenate([[0.0], ww])

    kappa = nl.kappa
    power = (n_dim - 1) / 2.0
    r_m, v_m = float(rr[-1]), float(vv[-1])
    amplitude = v_m * r_m ** power * math.exp(kappa * r_m)
    tail = TailModel(r_m, amplitude, kappa, power)

    found = _count_crossings(vv)
    if found != nodes:
        raise NumericalError(
            f"profile at s={s_star!r} has {found} nodes, expected {nodes}")
    return RadialProfile(
        dimension=n_dim, radii=rr, values=vv, derivs=ww, node_count=nodes,
        shoot_height=s_star, tail=tail, f_id=dict(nl.descriptor), source_f=nl)


def solution_family(nl: Nonlinearity, n_dim: int, n_max: int,
                    tol: float = 1e-13,
                    opts: IntegratorOptions | None = None,
                    family_cap: int = 8,
                    scan_limit: float = 1e4) -> list[RadialProfile]:
    """Scan shoot heights upward from the dead zone and bisect each
    classification change, returning profiles with node counts 0..n_max-1.

    The gradient seminorms of the returned family must strictly increase
    with the node count; a violation raises InvariantViolation.
    """
    if n_max < 1:
        raise ConfigError("n_max must be at least 1")
    if n_max > family_cap:
        raise ConfigError(f"n_max exceeds the configured family cap {family_cap}")
    opts = opts or IntegratorOptions()
    s = max(dead_zone(nl), 1e-6 * nl.zeta)
    k_prev = _classify(nl, n_dim, s, opts).crossings
    profiles: list[RadialProfile] = []
    while len(profiles) < n_max and s < scan_limit:
        s_next = s * 1.05
        k_next = _classify(nl, n_dim, s_next, opts).crossings
        for n in range(k_prev, min(k_next, n_max)):
            s_star = _bisect_height(nl, n_dim, n, s, s_next, tol, opts)
            profiles.append(_build_profile(nl, n_dim, n, s_star, opts))
        s, k_prev = s_next, k_next
    if len(profiles) < n_max:
        warnings.warn(
            f"scan exhausted at s={s:.4g} with {len(profiles)} of {n_max} "
            "profiles found; returning the partial family", RuntimeWarning)

    from .functionals import grad_norm_sq
    g = [grad_norm_sq(p) for p in profiles]
    for i in range(len(g) - 1):
        if not g[i] < g[i + 1]:
            raise InvariantViolation(
                "gradient seminorms fail to increase strictly along the "
                f"family: g[{i}]={g[i]!r} >= g[{i + 1}]={g[i + 1]!r}")
    return profiles
