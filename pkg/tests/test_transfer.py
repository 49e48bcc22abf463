import math

import numpy as np
import pytest

from fieldlab import functionals as fl
from fieldlab.nonlinearity import (ConfigError, make_affine_m,
                                   make_constant_m, make_exp_m,
                                   make_power_m)
from fieldlab.shooting import InvariantViolation
from fieldlab.transfer import (build_kt_solution, multiplicity_sweep,
                               q_threshold, solve_transfer, transfer_map)


class TestTransferMap:
    def test_identity_coefficient(self, family3):
        v = family3[0]
        assert transfer_map(v, make_constant_m(1.0), 1.0) == pytest.approx(1.0)
        assert transfer_map(v, make_constant_m(1.0), 2.0) == pytest.approx(4.0)

    def test_plane_scale_independence_inside_m(self, family2):
        v = family2[0]
        kf = make_affine_m(1.0, 0.5)
        g = fl.grad_norm_sq(v)
        for t in (0.3, 1.0, 2.5):
            assert transfer_map(v, kf, t) == pytest.approx(
                (1.0 + 0.5 * g) * t * t, rel=1e-14)

    def test_exponent_cancellation_n3(self, family3):
        # M(t) = m0 + q t^2 at N=3: h(v,t) = m0 t^2 + q g^2
        v = family3[0]
        g = fl.grad_norm_sq(v)
        kf = make_power_m(1.0, 0.25, 2.0)
        for t in (0.2, 1.0, 3.0):
            assert transfer_map(v, kf, t) == pytest.approx(
                t * t + 0.25 * g * g, rel=1e-12)

    def test_nonpositive_t_rejected(self, family3):
        with pytest.raises(ConfigError):
            transfer_map(family3[0], make_constant_m(1.0), 0.0)


class TestSolveTransfer:
    def test_constant_m_gives_identity(self, family3):
        res = solve_transfer(family3[0], make_constant_m(1.0))
        assert res.roots == [pytest.approx(1.0, abs=1e-12)]
        assert res.kirchhoff_grad_norms[0] == pytest.approx(
            res.grad_norm_sq_v, rel=1e-10)

    def test_affine_matches_quadratic_formula(self, family3):
        a, b = 1.0, 1.0
        kf = make_affine_m(a, b)
        for v in family3:
            g = fl.grad_norm_sq(v)
            want = (-b * g + math.sqrt(b * b * g * g + 4 * a)) / (2 * a)
            res = solve_transfer(v, kf)
            assert len(res.roots) == 1
            assert res.roots[0] == pytest.approx(want, rel=1e-10)
            assert res.diagnostics["h_residual"][0] < 1e-10

    def test_remark_family_threshold(self, family3):
        v = family3[0]
        g = fl.grad_norm_sq(v)
        q_star = 1.0 / (g * g)
        below = solve_transfer(v, make_power_m(1.0, 0.9 * q_star, 2.0))
        want = math.sqrt(1.0 - 0.9 * q_star * g * g)
        assert below.roots == [pytest.approx(want, rel=1e-10)]
        above = solve_transfer(v, make_power_m(1.0, 1.1 * q_star, 2.0))
        assert above.roots == []
        at = solve_transfer(v, make_power_m(1.0, q_star, 2.0))
        assert at.roots == []

    def test_plane_closed_form_matches_scan(self, family2):
        v = family2[0]
        kf = make_affine_m(1.0, 0.7)
        res = solve_transfer(v, kf)
        g = res.grad_norm_sq_v
        assert len(res.roots) == 1
        assert res.roots[0] == pytest.approx(
            1.0 / math.sqrt(1.0 + 0.7 * g), rel=1e-14)
        # in-test scan oracle over the same map
        ts = np.geomspace(1e-4, 1e2, 4001)
        h = (1.0 + 0.7 * g) * ts * ts - 1.0
        k = int(np.nonzero(np.diff(np.sign(h)))[0][0])
        assert ts[k] <= res.roots[0] <= ts[k + 1]

    def test_m1_violation_rejected(self, family3):
        kf = make_affine_m(1.0, 0.5)
        kf.m0 = 3.0  # declared floor that M does not respect
        with pytest.raises(ConfigError, match="M1"):
            solve_transfer(family3[0], kf)

    def test_exponential_coefficient_small_weight(self, family3):
        # tiny q: the exponential branch still dips through the level 1 on
        # its way down (one steep root) before the t^2 growth recrosses it
        # at the constant-M value 1; both roots are reported
        v = family3[0]
        res = solve_transfer(v, make_exp_m(1e-40))
        assert len(res.roots) == 2
        assert 0.0 < res.roots[0] < res.roots[1]
        assert res.roots[1] == pytest.approx(1.0, abs=1e-6)
        assert all(h < 1e-10 for h in res.diagnostics["h_residual"])

    def test_exponential_coefficient_multiple_roots(self, family3):
        # near the existence edge the exponential family intersects the
        # level 1 twice within a hundredth of a decade; cross-check the
        # solver against a dense in-test scan of the same map
        v = family3[0]
        kf = make_exp_m(5e-27)
        res = solve_transfer(v, kf, panels=4000)
        g = res.grad_norm_sq_v
        ts = np.geomspace(0.5, 2.0, 400001)
        with np.errstate(over="ignore"):
            phi = np.asarray(kf.M(g / ts), dtype=float) * ts * ts - 1.0
        idx = np.nonzero(np.sign(phi[1:]) != np.sign(phi[:-1]))[0]
        from scipy.optimize import brentq
        expected = [brentq(lambda t: float(kf.M(g / t)) * t * t - 1.0,
                           ts[i], ts[i + 1], xtol=1e-15) for i in idx]
        assert len(expected) >= 2
        assert len(res.roots) == len(expected)
        for got, want in zip(res.roots, expected):
            assert got == pytest.approx(want, rel=1e-9)

    def test_transferred_profiles_satisfy_equation(self, family3):
        kf = make_affine_m(1.0, 1.0)
        res = solve_transfer(family3[0], kf)
        u = res.profiles[0]
        assert u.node_count == family3[0].node_count
        assert fl.strong_residual(u, kf) < 1e-4
        assert abs(fl.nehari_residual(u, kf)) < 1e-5


class TestBuildKtSolution:
    def test_unit_scale_is_identity(self, family3):
        v = family3[0]
        u = build_kt_solution(v, 1.0)
        np.testing.assert_array_equal(u.radii, v.radii)
        np.testing.assert_array_equal(u.values, v.values)
        np.testing.assert_array_equal(u.derivs, v.derivs)

    def test_scaling_halves_gradient(self, family3):
        v = family3[0]
        u = build_kt_solution(v, 2.0)
        assert fl.grad_norm_sq(u) == fl.grad_norm_sq(v) / 2.0
        assert u.node_count == v.node_count
        assert u.tail.decay_rate == 2.0 * v.tail.decay_rate

    def test_misscaled_profile_fails_strong_residual(self, family3):
        kf = make_affine_m(1.0, 1.0)
        res = solve_transfer(family3[0], kf)
        bad = build_kt_solution(family3[0], 1.1 * res.roots[0])
        assert fl.strong_residual(bad, kf) > 1e-2


class TestQThreshold:
    def test_formula_linear_lambda(self, family3):
        kf = make_affine_m(1.0, 0.123)  # lambda(t) = t, any q
        for n in (1, 3, 5):
            want = 1.0 / (1.0 + math.sqrt(2.0) * fl.grad_norm_sq(family3[n - 1]))
            assert q_threshold(kf, family3, n) == pytest.approx(want, rel=1e-12)

    def test_degenerate_lambda_gives_m0(self, family3):
        assert q_threshold(make_constant_m(2.5), family3, 3) == pytest.approx(2.5)

    def test_monotone_in_n(self, family3):
        kf = make_affine_m(1.0, 1.0)
        assert q_threshold(kf, family3, 1) >= q_threshold(kf, family3, 3)

    def test_requires_decomposition(self, family3):
        kf = make_affine_m(1.0, 0.0)  # b = 0 carries no decomposition
        with pytest.raises(ConfigError, match="decompos"):
            q_threshold(kf, family3, 1)

    def test_rejects_plane(self, family2):
        with pytest.raises(ConfigError):
            q_threshold(make_affine_m(1.0, 1.0), family2, 1)

    def test_rejects_unordered_profiles(self, family3):
        kf = make_affine_m(1.0, 1.0)
        with pytest.raises(InvariantViolation):
            q_threshold(kf, list(reversed(family3)), 2)

    def test_guarantee_at_half_sqrt_2m0(self, family3):
        # below q_n the map stays under 1 at t = 1/sqrt(2 m0) while the
        # floor forces it above 1 for large t, so a root is guaranteed
        kf = make_affine_m(1.0, 1.0)
        q_n = q_threshold(kf, family3, 3)
        for q in (0.5 * q_n, 0.99 * q_n):
            kq = make_affine_m(1.0, q)
            for v in family3[:3]:
                assert transfer_map(v, kq, 1.0 / math.sqrt(2.0)) < 1.0
                assert transfer_map(v, kq, 1e3) > 1.0


class TestMultiplicitySweep:
    def test_remark_family_counts(self, family3):
        gs = [fl.grad_norm_sq(v) for v in family3]
        thresholds = [1.0 / (g * g) for g in gs]
        q_grid = np.sort([0.5 * thresholds[-1], 2.0 * thresholds[0],
                          0.9 * thresholds[2]])
        table = multiplicity_sweep(
            lambda q: make_power_m(1.0, q, 2.0), family3, q_grid)
        counts = {row.q: row.count for row in table.rows}
        assert counts[q_grid[0]] == 5     # below every threshold
        assert counts[q_grid[2]] == 0     # above every threshold
        mid = q_grid[1]
        assert counts[mid] == sum(1 for th in thresholds if mid < th)
        for row in table.rows:
            assert all(math.isfinite(e.energy) for e in row.entries)

    def test_threshold_attached_for_decomposed_family(self, family3):
        table = multiplicity_sweep(lambda q: make_affine_m(1.0, q),
                                   family3, [0.01, 0.02])
        want = q_threshold(make_affine_m(1.0, 1.0), family3, 5)
        assert table.threshold_q_n == pytest.approx(want)
        assert table.threshold_n == 5

    def test_failure_rows_recorded(self, family3):
        def broken(q):
            kf = make_affine_m(1.0, q)
            kf.m0 = 5.0  # triggers the M1 floor rejection
            return kf

        table = multiplicity_sweep(broken, family3[:1], [0.1])
        assert table.rows[0].count == 0
        assert "M1" in table.rows[0].message

    def test_rejects_bad_grid(self, family3):
        with pytest.raises(ConfigError):
            multiplicity_sweep(lambda q: make_affine_m(1.0, q),
                               family3, [0.2, 0.1])

    def test_plane_sweep_has_no_threshold(self, family2):
        table = multiplicity_sweep(lambda q: make_affine_m(1.0, q),
                                   family2, [0.1, 1.0])
        assert table.threshold_q_n is None
        assert all(row.count == 2 for row in table.rows)


def test_dimension5_affine_cubic_roots():
    # in dimension 5 the affine map reads t^2 + b g / t = 1, a depressed
    # cubic t^3 - t + b g = 0 with two positive roots for
    # b g < 2/3^(3/2) and none above; both must be found and certified
    from fieldlab.nonlinearity import make_power_nonlinearity
    from fieldlab.shooting import solution_family

    nl = make_power_nonlinearity(1.0, 2.0, 5)
    v = solution_family(nl, 5, 1)[0]
    g = fl.grad_norm_sq(v)
    b_star = 2.0 / (3.0 ** 1.5 * g)

    res = solve_transfer(v, make_affine_m(1.0, 0.5 * b_star))
    poly = np.roots([1.0, 0.0, -1.0, 0.5 * b_star * g])
    want = sorted(float(z.real) for z in poly
                  if abs(z.imag) < 1e-12 and z.real > 0)
    assert len(want) == 2
    assert len(res.roots) == 2
    for got, expect in zip(res.roots, want):
        assert got == pytest.approx(expect, rel=1e-9)
    assert all(h < 1e-10 for h in res.diagnostics["h_residual"])

    assert solve_transfer(v, make_affine_m(1.0, 2.0 * b_star)).roots == []
