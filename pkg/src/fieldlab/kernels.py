"""Hot numeric kernels: adaptive Runge-Kutta integration of the radial field
equation v'' + ((N-1)/r) v' + f(v) = 0.

The integrator is written once and compiled with numba when available.  Set
``FIELDLAB_BACKEND=numpy`` to force the pure-Python fallback (same source,
no JIT); ``FIELDLAB_BACKEND=numba`` to require the JIT and fail loudly if
numba is missing.  ``benchmarks/bench_integrator.py`` compares the two.

Nonlinearities are passed to the kernel as a small descriptor (integer kind
plus parameter/table arrays) so the JIT never sees a Python callable:

* ``F_POWER``: f(t) = -mu*t + |t|^(p-1) t, params = (mu, p)
* ``F_TABLE``: odd piecewise-linear interpolant of (tab_t, tab_a); tab_b
  holds the exact antiderivative of the interpolant at the nodes
* ``F_AUX``:   f(t) = (sign(t) |t|^p0 C(|t|) - omega*t) / m0 with C the
  left-constant running-max coefficients (tab_a) on grid tab_t; tab_b holds
  the exact cumulative integral of t^p0 C(t); params = (p0, omega, m0)
"""

from __future__ import annotations

import math
import os

import numpy as np

__all__ = [
    "USING_NUMBA",
    "BACKEND",
    "F_POWER",
    "F_TABLE",
    "F_AUX",
    "TERM_MAX_RADIUS",
    "TERM_ENERGY_NEG",
    "TERM_BLOWUP",
    "TERM_TAIL",
    "TERM_FULL",
    "f_scalar",
    "antideriv_scalar",
    "integrate_radial",
]

F_POWER = 0
F_TABLE = 1
F_AUX = 2

TERM_MAX_RADIUS = 0
TERM_ENERGY_NEG = 1
TERM_BLOWUP = 2
TERM_TAIL = 3
TERM_FULL = 4


def _resolve_backend() -> tuple[bool, str]:
    want = os.environ.get("FIELDLAB_BACKEND", "").strip().lower()
    if want == "numpy":
        return False, "numpy"
    try:
        import numba  # noqa: F401
    except ImportError:
        if want == "numba":
            raise ImportError(
                "FIELDLAB_BACKEND=numba requested but numba is not installed"
            )
        return False, "numpy"
    return True, "numba"


USING_NUMBA, BACKEND = _resolve_backend()

if USING_NUMBA:
    from numba import njit

    _jit = njit(cache=True)
else:
    def _jit(fn):
        return fn


@_jit
def _f_val(kind, params, tab_t, tab_a, t):
    """Evaluate the nonlinearity descriptor at scalar t (odd in t)."""
    if kind == F_POWER:
        mu = params[0]
        p = params[1]
        return -mu * t + abs(t) ** (p - 1.0) * t
    sgn = 1.0
    x = t
    if x < 0.0:
        sgn = -1.0
        x = -x
    n = tab_t.shape[0]
    if kind == F_AUX:
        p0 = params[0]
        omega = params[1]
        m0 = params[2]
        # left-constant running max: C(x) = tab_a[i] for tab_t[i] <= x < tab_t[i+1]
        lo = 0
        hi = n - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if tab_t[mid] <= x:
                lo = mid
            else:
                hi = mid - 1
        i = lo
        c = tab_a[i]
        return sgn * (x ** p0 * c - omega * x) / m0
    # F_TABLE: piecewise-linear, last-segment extrapolation beyond the grid
    if x <= tab_t[0]:
        return sgn * tab_a[0] * (x / tab_t[0] if tab_t[0] > 0.0 else 1.0)
    lo = 0
    hi = n - 1
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if tab_t[mid] <= x:
            lo = mid
        else:
            hi = mid - 1
    i = lo
    if i >= n - 1:
        i = n - 2
    t0 = tab_t[i]
    t1 = tab_t[i + 1]
    w = (x - t0) / (t1 - t0)
    return sgn * (tab_a[i] * (1.0 - w) + tab_a[i + 1] * w)


@_jit
def _F_val(kind, params, tab_t, tab_a, tab_b, t):
    """Antiderivative of the descriptor, F(0) = 0 (even in t)."""
    x = abs(t)
    if kind == F_POWER:
        mu = params[0]
        p = params[1]
        return -mu * x * x / 2.0 + x ** (p + 1.0) / (p + 1.0)
    n = tab_t.shape[0]
    if kind == F_AUX:
        p0 = params[0]
        omega = params[1]
        m0 = params[2]
        lo = 0
        hi = n - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if tab_t[mid] <= x:
                lo = mid
            else:
                hi = mid - 1
        i = lo
        q = p0 + 1.0
        hbar_int = tab_b[i] + tab_a[i] * (x ** q - tab_t[i] ** q) / q
        return (hbar_int - omega * x * x / 2.0) / m0
    # F_TABLE: exact integral of the piecewise-linear interpolant
    if x <= tab_t[0]:
        if tab_t[0] <= 0.0:
            return 0.0
        fx = tab_a[0] * x / tab_t[0]
        return 0.5 * fx * x
    lo = 0
    hi = n - 1
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if tab_t[mid] <= x:
            lo = mid
        else:
            hi = mid - 1
    i = lo
    if i >= n - 1:
        i = n - 2
    t0 = tab_t[i]
    t1 = tab_t[i + 1]
    w = (x - t0) / (t1 - t0)
    fx = tab_a[i] * (1.0 - w) + tab_a[i + 1] * w
    if x <= t1:
        return tab_b[i] + 0.5 * (tab_a[i] + fx) * (x - t0)
    return tab_b[i + 1] + 0.5 * (tab_a[i + 1] + fx) * (x - t1)


@_jit
def _integrate_kernel(dim, r0, v0, w0, r_max, atol, rtol, max_step, blowup,
                      energy_eps, tail_on, v_stop, tail_energy,
                      kind, params, tab_t, tab_a, tab_b,
                      store, out_r, out_v, out_w):
    """Dormand-Prince 5(4) with FSAL; returns
    (n_stored, crossings, code, r_end, v_end, w_end, E_end)."""
    nm1 = dim - 1.0
    r = r0
    v = v0
    w = w0
    k1v = w
    k1w = -nm1 / r * w - _f_val(kind, params, tab_t, tab_a, v)

    cap = out_r.shape[0]
    n = 0
    if store and n < cap:
        out_r[n] = r
        out_v[n] = v
        out_w[n] = w
        n += 1

    ncross = 0
    code = TERM_MAX_RADIUS

    h = max_step if max_step > 0.0 else 1e-3 * (1.0 + r0)
    if h > r_max - r:
        h = r_max - r

    while r < r_max:
        if h > r_max - r:
            h = r_max - r
        if max_step > 0.0 and h > max_step:
            h = max_step

        # Dormand-Prince stages
        rv = v + h * 0.2 * k1v
        rw = w + h * 0.2 * k1w
        rr = r + h * 0.2
        k2v = rw
        k2w = -nm1 / rr * rw - _f_val(kind, params, tab_t, tab_a, rv)

        rv = v + h * (3.0 / 40.0 * k1v + 9.0 / 40.0 * k2v)
        rw = w + h * (3.0 / 40.0 * k1w + 9.0 / 40.0 * k2w)
        rr = r + h * 0.3
        k3v = rw
        k3w = -nm1 / rr * rw - _f_val(kind, params, tab_t, tab_a, rv)

        rv = v + h * (44.0 / 45.0 * k1v - 56.0 / 15.0 * k2v + 32.0 / 9.0 * k3v)
        rw = w + h * (44.0 / 45.0 * k1w - 56.0 / 15.0 * k2w + 32.0 / 9.0 * k3w)
        rr = r + h * 0.8
        k4v = rw
        k4w = -nm1 / rr * rw - _f_val(kind, params, tab_t, tab_a, rv)

        rv = v + h * (19372.0 / 6561.0 * k1v - 25360.0 / 2187.0 * k2v
                      + 64448.0 / 6561.0 * k3v - 212.0 / 729.0 * k4v)
        rw = w + h * (19372.0 / 6561.0 * k1w - 25360.0 / 2187.0 * k2w
                      + 64448.0 / 6561.0 * k3w - 212.0 / 729.0 * k4w)
        rr = r + h * 8.0 / 9.0
        k5v = rw
        k5w = -nm1 / rr * rw - _f_val(kind, params, tab_t, tab_a, rv)

        rv = v + h * (9017.0 / 3168.0 * k1v - 355.0 / 33.0 * k2v
                      + 46732.0 / 5247.0 * k3v + 49.0 / 176.0 * k4v
                      - 5103.0 / 18656.0 * k5v)
        rw = w + h * (9017.0 / 3168.0 * k1w - 355.0 / 33.0 * k2w
                      + 46732.0 / 5247.0 * k3w + 49.0 / 176.0 * k4w
                      - 5103.0 / 18656.0 * k5w)
        rr = r + h
        k6v = rw
        k6w = -nm1 / rr * rw - _f_val(kind, params, tab_t, tab_a, rv)

        vn = v + h * (35.0 / 384.0 * k1v + 500.0 / 1113.0 * k3v
                      + 125.0 / 192.0 * k4v - 2187.0 / 6784.0 * k5v
                      + 11.0 / 84.0 * k6v)
        wn = w + h * (35.0 / 384.0 * k1w + 500.0 / 1113.0 * k3w
                      + 125.0 / 192.0 * k4w - 2187.0 / 6784.0 * k5w
                      + 11.0 / 84.0 * k6w)
        k7v = wn
        k7w = -nm1 / rr * wn - _f_val(kind, params, tab_t, tab_a, vn)

        ev = h * (71.0 / 57600.0 * k1v - 71.0 / 16695.0 * k3v
                  + 71.0 / 1920.0 * k4v - 17253.0 / 339200.0 * k5v
                  + 22.0 / 525.0 * k6v - 1.0 / 40.0 * k7v)
        ew = h * (71.0 / 57600.0 * k1w - 71.0 / 16695.0 * k3w
                  + 71.0 / 1920.0 * k4w - 17253.0 / 339200.0 * k5w
                  + 22.0 / 525.0 * k6w - 1.0 / 40.0 * k7w)

        if not (math.isfinite(vn) and math.isfinite(wn)):
            code = TERM_BLOWUP
            break

        scv = atol + rtol * max(abs(v), abs(vn))
        scw = atol + rtol * max(abs(w), abs(wn))
        err = math.sqrt(0.5 * ((ev / scv) ** 2 + (ew / scw) ** 2))

        if err <= 1.0:
            # accepted
            if vn * v < 0.0:
                ncross += 1
            r = rr
            v = vn
            w = wn
            k1v = k7v
            k1w = k7w
            if store:
                if n >= cap:
                    code = TERM_FULL
                    break
                out_r[n] = r
                out_v[n] = v
                out_w[n] = w
                n += 1

            E = 0.5 * w * w + _F_val(kind, params, tab_t, tab_a, tab_b, v)
            if abs(v) > blowup:
                code = TERM_BLOWUP
                break
            if tail_on and abs(v) <= v_stop and v * w <= 0.0 and abs(E) <= tail_energy:
                code = TERM_TAIL
                break
            if E < -energy_eps:
                code = TERM_ENERGY_NEG
                break

        fac = 5.0
        if err > 0.0:
            fac = 0.9 * err ** -0.2
            if fac > 5.0:
                fac = 5.0
            elif fac < 0.2:
                fac = 0.2
        h *= fac
        if r + h == r:
            code = TERM_BLOWUP
            break

    E = 0.5 * w * w + _F_val(kind, params, tab_t, tab_a, tab_b, v)
    return n, ncross, code, r, v, w, E


def f_scalar(kind, params, tab_t, tab_a, t):
    """Python-level scalar evaluation of a descriptor (same code path)."""
    return _f_val(kind, params, tab_t, tab_a, float(t))


def antideriv_scalar(kind, params, tab_t, tab_a, tab_b, t):
    return _F_val(kind, params, tab_t, tab_a, tab_b, float(t))


def integrate_radial(dim, r0, v0, w0, r_max, atol, rtol, max_step, blowup,
                     energy_eps, tail_on, v_stop, tail_energy,
                     kind, params, tab_t, tab_a, tab_b, store, capacity):
    """Driver around the kernel; grows storage and retries if it fills up."""
    cap = int(capacity)
    while True:
        out_r = np.empty(cap if store else 1, dtype=np.float64)
        out_v = np.empty_like(out_r)
        out_w = np.empty_like(out_r)
        n, ncross, code, r, v, w, E = _integrate_kernel(
            float(dim), float(r0), float(v0), float(w0), float(r_max),
            float(atol), float(rtol), float(max_step), float(blowup),
            float(energy_eps), bool(tail_on), float(v_stop),
            float(tail_energy), int(kind), params, tab_t, tab_a, tab_b,
            bool(store), out_r, out_v, out_w)
        if code != TERM_FULL:
            return out_r[:n], out_v[:n], out_w[:n], ncross, code, r, v, w, E
        cap *= 2
        if cap > 64_000_000:
            raise MemoryError("radial integration exceeded storage budget")
