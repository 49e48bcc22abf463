"""Truncation envelopes of a nonlinearity and the derived auxiliary
problem.

On t >= 0 the envelope pair is h(t) = max(omega t + f(t), 0) and
hbar(t) = t^p0 * max_{0<tau<=t} h(tau)/tau^p0, extended oddly, with
antiderivatives H, Hbar by cumulative trapezoid on the build grid.  The
running max is interpolated left-constant between grid points, which keeps
hbar(t)/t^p0 nondecreasing exactly.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .nonlinearity import (HOLDS, INCONCLUSIVE, FAILS, ConditionReport,
                           ConfigError, KernelSpec, Nonlinearity,
                           _vector_F, _vector_f)


@dataclass
class Envelope:
    omega: float
    p0: float
    delta: float
    grid: np.ndarray
    h_samples: np.ndarray
    hbar_samples: np.ndarray
    H_samples: np.ndarray
    Hbar_samples: np.ndarray
    ratio_max: np.ndarray          # running-max coefficients c_i
    base: Nonlinearity

    def h(self, t):
        t = np.asarray(t, dtype=np.float64)
        x = np.abs(t)
        raw = self.omega * x + np.asarray(self.base.f(x), dtype=np.float64)
        return np.sign(t) * np.maximum(raw, 0.0)

    def _coeff(self, x):
        i = np.clip(np.searchsorted(self.grid, x, side="right") - 1,
                    0, len(self.grid) - 1)
        return self.ratio_max[i]

    def hbar(self, t):
        t = np.asarray(t, dtype=np.float64)
        x = np.abs(t)
        return np.sign(t) * x ** self.p0 * self._coeff(x)

    def _interp_even(self, t, samples, rate):
        x = np.abs(np.asarray(t, dtype=np.float64))
        inside = np.interp(x, self.grid, samples)
        end = self.grid[-1]
        if np.any(x > end):
            # extend by one trapezoid panel past the build grid
            beyond = samples[-1] + 0.5 * (rate(end) + rate(x)) * (x - end)
            return np.where(x > end, beyond, inside)
        return inside

    def H(self, t):
        return self._interp_even(t, self.H_samples, self.h)

    def Hbar(self, t):
        return self._interp_even(t, self.Hbar_samples, self.hbar)


def default_p0(n_dim: int) -> float:
    """Midpoint of the admissible exponent interval (3 in the plane)."""
    if n_dim >= 3:
        return 0.5 * (1.0 + (n_dim + 2.0) / (n_dim - 2.0))
    return 3.0


def build_envelope(nl: Nonlinearity, p0: float,
                   grid: Sequence[float]) -> Envelope:
    """Construct the envelope samples on ``grid`` (must start at 0)."""
    grid = np.ascontiguousarray(np.asarray(grid, dtype=np.float64))
    if grid.ndim != 1 or len(grid) < 8:
        raise ConfigError("envelope grid needs at least 8 points")
    if grid[0] != 0.0 or np.any(np.diff(grid) <= 0.0):
        raise ConfigError("envelope grid must strictly increase from 0")
    if p0 <= 1.0 or p0 >= nl.growth_exponent:
        raise ConfigError(
            f"p0={p0} outside the admissible interval (1, {nl.growth_exponent})")

    omega = nl.omega
    raw = omega * grid + np.asarray(nl.f(grid), dtype=np.float64)
    h = np.maximum(raw, 0.0)

    ratios = np.zeros_like(grid)
    ratios[1:] = h[1:] / grid[1:] ** p0
    c = np.maximum.accumulate(ratios)
    hbar = grid ** p0 * c
    hbar[0] = 0.0

    H = np.concatenate([[0.0], np.cumsum(0.5 * (h[1:] + h[:-1]) * np.diff(grid))])
    Hbar = np.concatenate([[0.0], np.cumsum(0.5 * (hbar[1:] + hbar[:-1]) * np.diff(grid))])

    # dead zone: first sign change of omega t + f(t), refined by bisection
    pos = np.nonzero(raw > 0.0)[0]
    if len(pos) == 0:
        delta = float(grid[-1])
    else:
        lo = float(grid[pos[0] - 1]) if pos[0] > 0 else 0.0
        hi = float(grid[pos[0]])
        for _ in range(200):
            if hi - lo <= 1e-12 * (1.0 + hi):
                break
            mid = 0.5 * (lo + hi)
            if omega * mid + float(nl.f(mid)) > 0.0:
                hi = mid
            else:
                lo = mid
        delta = lo
    if delta <= 0.0:
        raise ConfigError("envelope dead zone is empty; f violates the "
                          "negative small-t slope condition on this grid")

    return Envelope(omega=omega, p0=p0, delta=delta, grid=grid,
                    h_samples=h, hbar_samples=hbar, H_samples=H,
                    Hbar_samples=Hbar, ratio_max=c, base=nl)


def verify_lemma_21_22(env: Envelope, nl: Nonlinearity) -> list[ConditionReport]:
    """Pointwise checks of the envelope ordering, positivity, dead zone,
    monotone ratio, and antiderivative bounds on the build grid."""
    g = env.grid
    t_pos = g[1:]
    h, hbar = env.h_samples, env.hbar_samples
    H, Hbar = env.H_samples, env.Hbar_samples
    raw = env.omega * g + np.asarray(nl.f(g), dtype=np.float64)
    F = np.asarray(nl.F(g), dtype=np.float64)
    reports = []

    def _check(cid, ok_mask, t_arr, val_arr, ok_msg, fail_msg):
        bad = np.nonzero(~ok_mask)[0]
        if len(bad):
            ev = [(float(t_arr[i]), float(val_arr[i])) for i in bad[:3]]
            reports.append(ConditionReport(cid, FAILS, ev, fail_msg))
        else:
            reports.append(ConditionReport(cid, HOLDS, [], ok_msg))

    eps = 1e-12 * (1.0 + np.abs(hbar))
    _check("L2.1(i)", (raw <= h + eps) & (h <= hbar + eps), g, hbar,
           "omega t + f <= h <= hbar on the grid",
           "envelope ordering violated")
    _check("L2.1(ii)", (h >= -1e-300) & (hbar >= -1e-300), g, hbar,
           "h and hbar are nonnegative on t >= 0",
           "negative envelope value")
    inside = g <= env.delta
    _check("L2.1(iii)", ~inside | ((h == 0.0) & (hbar == 0.0)), g, hbar,
           f"h = hbar = 0 on [0, {env.delta:.6g}]",
           "nonzero envelope inside the dead zone")
    wit = np.nonzero((h > 0.0) & (h <= hbar + 1e-12 * np.abs(hbar)))[0]
    if len(wit):
        i = wit[0]
        reports.append(ConditionReport(
            "L2.1(iv)", HOLDS, [(float(g[i]), float(h[i]))],
            f"witness at t = {g[i]:.6g} with 0 < h <= hbar"))
    else:
        reports.append(ConditionReport(
            "L2.1(iv)", INCONCLUSIVE, [],
            "no grid point with h > 0; existence not refutable by sampling"))
    dc = np.diff(env.ratio_max)
    _check("L2.1(v)", dc >= -1e-12 * max(1.0, float(env.ratio_max[-1])),
           t_pos, env.ratio_max[1:],
           "hbar(t)/t^p0 is nondecreasing",
           "running-max ratio decreased")

    epsH = 1e-12 * (1.0 + np.abs(Hbar))
    _check("L2.2(i)", (0.5 * env.omega * g ** 2 + F <= H + epsH) & (H <= Hbar + epsH),
           g, H,
           "omega t^2/2 + F <= H <= Hbar on the grid",
           "antiderivative ordering violated")
    _check("L2.2(ii)", (H >= -1e-300) & (Hbar >= -1e-300), g, Hbar,
           "H and Hbar are nonnegative",
           "negative antiderivative")
    _check("L2.2(iii)", ~inside | ((H == 0.0) & (Hbar == 0.0)), g, Hbar,
           "H = Hbar = 0 on the dead zone",
           "nonzero antiderivative inside the dead zone")
    lhs = (env.p0 + 1.0) * Hbar
    rhs = g * hbar
    _check("L2.2(v)", (lhs >= -1e-300) & (lhs <= rhs + 1e-10 * (1.0 + rhs)),
           g, lhs,
           "(p0+1) Hbar <= t hbar on the grid",
           "(p0+1) Hbar exceeds t hbar")
    return reports


def aux_problem_nonlinearity(env: Envelope, m0: float) -> Nonlinearity:
    """Rewrite -m0 Lap(u) + omega u = hbar(u) as -Lap(u) = f_A(u) with
    f_A(t) = (hbar(t) - omega t)/m0; the stored rate is omega/(2 m0)."""
    if m0 <= 0.0:
        raise ConfigError("m0 must be positive")
    q = env.p0 + 1.0
    gq = env.grid ** q
    cum = np.concatenate([[0.0], np.cumsum(env.ratio_max[:-1] * np.diff(gq) / q)])
    params = np.array([env.p0, env.omega, m0], dtype=np.float64)
    spec = KernelSpec(kernels.F_AUX, params,
                      np.ascontiguousarray(env.grid),
                      np.ascontiguousarray(env.ratio_max),
                      np.ascontiguousarray(cum))
    zeta = env.base.zeta
    probe = float(_vector_F(spec, zeta))
    if probe <= 0.0:
        raise ConfigError(
            "auxiliary antiderivative is not positive at the stored witness; "
            "extend or refine the envelope grid")
    digest = hashlib.sha256()
    for arr in (env.grid, env.ratio_max):
        digest.update(np.ascontiguousarray(arr).tobytes())
    return Nonlinearity(
        f=lambda t, s=spec: _vector_f(s, t),
        F=lambda t, s=spec: _vector_F(s, t),
        omega=env.omega / (2.0 * m0),
        zeta=zeta,
        growth_exponent=env.base.growth_exponent,
        family="aux",
        descriptor={"family": "aux", "p0": env.p0, "m0": m0,
                    "base_omega": env.omega,
                    "base": dict(env.base.descriptor),
                    "grid_points": len(env.grid),
                    "grid_hash": digest.hexdigest()[:16]},
        kernel=spec,
    )


def export_envelope_csv(env: Envelope, path) -> None:
    """CSV columns t, h, hbar, H, Hbar at 17 significant digits."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,h,hbar,H,Hbar\n")
        for i in range(len(env.grid)):
            row = (env.grid[i], env.h_samples[i], env.hbar_samples[i],
                   env.H_samples[i], env.Hbar_samples[i])
            fh.write(",".join(f"{x:.17g}" for x in row) + "\n")
