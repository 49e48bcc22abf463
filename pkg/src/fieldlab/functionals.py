"""Radial quadrature of norms, energies, and identity residuals over
solved profiles.

Integrals over R^N reduce to |S^(N-1)| * int g(u(r)) r^(N-1) dr; the stored
samples are handled by composite Simpson and the analytic exponential tail
by closed-form moments (exponential integrals).  On the tail the
antiderivative F is replaced by its quadratic linearization -omega*t^2,
whose error is folded into the reported quadrature tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad, simpson, trapezoid
from scipy.interpolate import CubicSpline
from scipy.special import exp1

from .nonlinearity import ConfigError, KirchhoffFunction, Nonlinearity
from .shooting import RadialProfile

__all__ = [
    "FunctionalReport",
    "sphere_area",
    "radial_integral",
    "grad_norm_sq",
    "l2_norm_sq",
    "integral_F",
    "integral_fu",
    "energy_sf",
    "energy_kt",
    "energy_aux",
    "scaled_energy",
    "dtheta_scaled_energy",
    "pohozaev_residual",
    "nehari_residual",
    "strong_residual",
    "functional_report",
    "quadrature_tolerance",
]


@dataclass
class FunctionalReport:
    grad_norm_sq: float
    l2_norm_sq: float
    integral_F: float
    energy: float
    pohozaev_residual: float
    nehari_residual: float
    strong_residual_sup: float
    quadrature_tol: float

    def __post_init__(self):
        vals = [self.grad_norm_sq, self.l2_norm_sq, self.integral_F,
                self.energy, self.pohozaev_residual, self.nehari_residual,
                self.strong_residual_sup, self.quadrature_tol]
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("functional report entries must be finite")
        if self.grad_norm_sq < 0 or self.l2_norm_sq < 0:
            raise ValueError("norms must be nonnegative")


def sphere_area(n_dim: int) -> float:
    """Surface measure of the unit sphere in R^N."""
    return 2.0 * math.pi ** (n_dim / 2.0) / math.gamma(n_dim / 2.0)


def _tail_moments(u: RadialProfile):
    """(I0, I1, I2) with Ik = int_{r_m}^inf exp(-2 kappa r) r^(-k) dr."""
    tm = u.tail
    kap = tm.decay_rate
    z = 2.0 * kap * tm.match_radius
    i0 = math.exp(-z) / (2.0 * kap)
    i1 = exp1(z)
    i2 = math.exp(-z) / tm.match_radius - 2.0 * kap * exp1(z)
    return i0, i1, i2


def _require_tail(u: RadialProfile):
    if u.tail is None:
        raise ConfigError("profile has no tail model attached")


def _simpson_weighted(u: RadialProfile, integrand: np.ndarray) -> float:
    return float(simpson(integrand * u.radii ** (u.dimension - 1), x=u.radii))


def radial_integral(g: Callable, u: RadialProfile,
                    tail: str = "quad") -> float:
    """|S^(N-1)| * int_0^inf g(u(r)) r^(N-1) dr.

    ``tail`` selects how the region beyond the match radius is handled:
    ``"quad"`` (adaptive quadrature on the tail model), ``"none"`` (drop).
    """
    _require_tail(u)
    core = _simpson_weighted(u, np.asarray(g(u.values), dtype=np.float64))
    tail_part = 0.0
    if tail == "quad":
        tm = u.tail
        n = u.dimension

        def integrand(r):
            return float(g(tm.value(r))) * r ** (n - 1)

        hi = tm.match_radius + 80.0 / tm.decay_rate
        tail_part, _ = quad(integrand, tm.match_radius, hi, limit=200)
    elif tail != "none":
        raise ConfigError(f"unknown tail mode {tail!r}")
    return sphere_area(u.dimension) * (core + tail_part)


def grad_norm_sq(u: RadialProfile) -> float:
    """Squared gradient seminorm from the stored derivative samples."""
    if "grad_norm_sq" not in u.norms:
        _require_tail(u)
        core = _simpson_weighted(u, u.derivs ** 2)
        tm = u.tail
        i0, i1, i2 = _tail_moments(u)
        kap, nu = tm.decay_rate, tm.algebraic_power
        tail = tm.amplitude ** 2 * (kap * kap * i0 + 2.0 * kap * nu * i1 + nu * nu * i2)
        u.norms["grad_norm_sq"] = sphere_area(u.dimension) * (core + tail)
    return u.norms["grad_norm_sq"]


def l2_norm_sq(u: RadialProfile) -> float:
    if "l2_norm_sq" not in u.norms:
        _require_tail(u)
        core = _simpson_weighted(u, u.values ** 2)
        i0, _, _ = _tail_moments(u)
        u.norms["l2_norm_sq"] = sphere_area(u.dimension) * (core + u.tail.amplitude ** 2 * i0)
    return u.norms["l2_norm_sq"]


def integral_F(u: RadialProfile, nl: Optional[Nonlinearity] = None) -> float:
    """int F(u) with the tail linearized to F(t) ~ -omega t^2.

    Results are cached on the profile only for its own nonlinearity.
    """
    cacheable = nl is None or nl is u.source_f
    nl = nl or u.source_f
    key = "integral_F"
    if not cacheable or key not in u.norms:
        _require_tail(u)
        core = _simpson_weighted(u, np.asarray(nl.F(u.values), dtype=np.float64))
        i0, _, _ = _tail_moments(u)
        tail = -nl.omega * u.tail.amplitude ** 2 * i0
        value = sphere_area(u.dimension) * (core + tail)
        if not cacheable:
            return value
        u.norms[key] = value
    return u.norms[key]


def integral_fu(u: RadialProfile, nl: Optional[Nonlinearity] = None) -> float:
    """int f(u) u with the tail linearized to f(t) t ~ -2 omega t^2."""
    cacheable = nl is None or nl is u.source_f
    nl = nl or u.source_f
    key = "integral_fu"
    if not cacheable or key not in u.norms:
        _require_tail(u)
        vals = np.asarray(nl.f(u.values), dtype=np.float64) * u.values
        core = _simpson_weighted(u, vals)
        i0, _, _ = _tail_moments(u)
        tail = -2.0 * nl.omega * u.tail.amplitude ** 2 * i0
        value = sphere_area(u.dimension) * (core + tail)
        if not cacheable:
            return value
        u.norms[key] = value
    return u.norms[key]


def quadrature_tolerance(u: RadialProfile) -> float:
    """Conservative bound on the quadrature error of the reported moments
    (Simpson vs trapezoid discrepancy dominates the refinement delta)."""
    if "quadrature_tol" not in u.norms:
        tol = 1e-13 * (1.0 + abs(grad_norm_sq(u)) + abs(l2_norm_sq(u)))
        rw = u.radii ** (u.dimension - 1)
        for moment in (u.derivs ** 2,
                       u.values ** 2,
                       np.asarray(u.source_f.F(u.values), dtype=np.float64)):
            s = simpson(moment * rw, x=u.radii)
            t = trapezoid(moment * rw, x=u.radii)
            tol = max(tol, 0.5 * abs(s - t) * sphere_area(u.dimension))
        u.norms["quadrature_tol"] = tol
    return u.norms["quadrature_tol"]


def energy_sf(u: RadialProfile) -> float:
    """Scalar-field action: grad/2 - int F(u)."""
    return 0.5 * grad_norm_sq(u) - integral_F(u)


def energy_kt(u: RadialProfile, kf: KirchhoffFunction) -> float:
    """Kirchhoff action: M_hat(grad)/2 - int F(u)."""
    return 0.5 * float(kf.M_hat(grad_norm_sq(u))) - integral_F(u)


def energy_aux(u: RadialProfile, envelope, m0: float) -> float:
    """Truncated action: ||u||^2/2 - int Hbar(u), with the norm
    m0*grad + omega*l2 of the envelope's base problem."""
    if m0 <= 0:
        raise ConfigError("m0 must be positive")
    _require_tail(u)
    norm_sq = m0 * grad_norm_sq(u) + envelope.omega * l2_norm_sq(u)
    core = _simpson_weighted(u, np.asarray(envelope.Hbar(u.values), dtype=np.float64))
    tail = 0.0
    if abs(float(u.values[-1])) > envelope.delta:
        tm = u.tail
        n = u.dimension
        hi = tm.match_radius + 80.0 / tm.decay_rate
        tail, _ = quad(lambda r: float(envelope.Hbar(tm.value(r))) * r ** (n - 1),
                       tm.match_radius, hi, limit=200)
    return 0.5 * norm_sq - sphere_area(u.dimension) * (core + tail)


def scaled_energy(theta: float, u: RadialProfile, kf: KirchhoffFunction) -> float:
    """M_hat(e^((N-2)theta) grad)/2 - e^(N theta) int F(u), from cached
    moments (no re-gridding)."""
    n = u.dimension
    g = grad_norm_sq(u)
    return 0.5 * float(kf.M_hat(math.exp((n - 2) * theta) * g)) \
        - math.exp(n * theta) * integral_F(u)


def dtheta_scaled_energy(theta: float, u: RadialProfile, kf: KirchhoffFunction) -> float:
    """Closed-form theta-derivative of the scaled energy; at theta = 0 this
    is the Kirchhoff Pohozaev combination."""
    n = u.dimension
    g = math.exp((n - 2) * theta) * grad_norm_sq(u)
    return 0.5 * (n - 2) * float(kf.M(g)) * g \
        - n * math.exp(n * theta) * integral_F(u)


def _m_value(kf: Optional[KirchhoffFunction], g: float) -> float:
    return 1.0 if kf is None else float(kf.M(g))


def pohozaev_residual(u: RadialProfile, kf: Optional[KirchhoffFunction] = None) -> float:
    """((N-2)/2) M(g) g - N int F(u), normalized scale-free."""
    n = u.dimension
    g = grad_norm_sq(u)
    fint = integral_F(u)
    raw = 0.5 * (n - 2) * _m_value(kf, g) * g - n * fint
    return raw / max(1.0, abs(n * fint))


def nehari_residual(u: RadialProfile, kf: Optional[KirchhoffFunction] = None) -> float:
    """M(g) g - int f(u) u, normalized scale-free."""
    g = grad_norm_sq(u)
    fu = integral_fu(u)
    raw = _m_value(kf, g) * g - fu
    return raw / max(1.0, abs(fu))


def strong_residual(u: RadialProfile, kf: Optional[KirchhoffFunction] = None,
                    nl: Optional[Nonlinearity] = None) -> float:
    """Sup-norm ODE residual |M(g)(u'' + (N-1)/r u') + f(u)| over interior
    samples, with u'' from a spline derivative of the stored u' samples,
    normalized by sup |f(u)|."""
    nl = nl or u.source_f
    if len(u.radii) < 12:
        raise ConfigError("too few samples for a strong-form residual")
    coeff = _m_value(kf, grad_norm_sq(u))
    r, v, w = u.radii, u.values, u.derivs
    upp = CubicSpline(r, w).derivative()(r)
    lo, hi = 3, len(r) - 3
    rr, vv, ww, uu = r[lo:hi], v[lo:hi], w[lo:hi], upp[lo:hi]
    res = coeff * (uu + (u.dimension - 1) / rr * ww) + np.asarray(nl.f(vv), dtype=np.float64)
    scale = float(np.max(np.abs(np.asarray(nl.f(v), dtype=np.float64))))
    return float(np.max(np.abs(res))) / max(scale, 1e-300)


def functional_report(u: RadialProfile,
                      kf: Optional[KirchhoffFunction] = None) -> FunctionalReport:
    return FunctionalReport(
        grad_norm_sq=grad_norm_sq(u),
        l2_norm_sq=l2_norm_sq(u),
        integral_F=integral_F(u),
        energy=energy_sf(u),
        pohozaev_residual=pohozaev_residual(u, kf),
        nehari_residual=nehari_residual(u, kf),
        strong_residual_sup=strong_residual(u, kf),
        quadrature_tol=quadrature_tolerance(u),
    )
