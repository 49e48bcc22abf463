"""Acceptance suite: one test per criterion, each printing a PASS/FAIL
line (run with ``pytest tests/test_acceptance.py -v -s``)."""

import contextlib
import math
import time

import numpy as np
import pytest

from fieldlab import functionals as fl
from fieldlab.envelope import verify_lemma_21_22
from fieldlab.nonlinearity import make_affine_m, make_power_m
from fieldlab.shooting import find_bound_state, solution_family
from fieldlab.transfer import (build_kt_solution, multiplicity_sweep,
                               q_threshold, solve_transfer, transfer_map)

import oracle


@contextlib.contextmanager
def criterion(num, desc):
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {num:02d} FAIL  {desc}")
        raise
    print(f"ACCEPTANCE {num:02d} PASS  {desc}")


def test_criterion_1_scalar_field_family(cubic3):
    with criterion(1, "cubic N=3 family v1..v5: nodes, residuals, ordering, < 60 s"):
        t0 = time.monotonic()
        fam = solution_family(cubic3, 3, 5)
        reports = [fl.functional_report(v) for v in fam]
        elapsed = time.monotonic() - t0
        assert [v.node_count for v in fam] == [0, 1, 2, 3, 4]
        for rep in reports:
            assert abs(rep.pohozaev_residual) < 1e-5
            assert abs(rep.nehari_residual) < 1e-5
        g = [rep.grad_norm_sq for rep in reports]
        assert all(a < b for a, b in zip(g, g[1:]))
        assert elapsed < 60.0, f"family solve took {elapsed:.1f}s"


def test_criterion_2_plane_pohozaev_degeneration(family2):
    with criterion(2, "N=2 ground state: |int F(v)| < 1e-5 * grad norm"):
        v = family2[0]
        assert abs(fl.integral_F(v)) < 1e-5 * fl.grad_norm_sq(v)


def test_criterion_3_energy_identity(family3):
    with criterion(3, "N=3 family: |I(v) - g/3| < 1e-5 g"):
        for v in family3:
            g = fl.grad_norm_sq(v)
            assert abs(fl.energy_sf(v) - g / 3.0) < 1e-5 * g


def test_criterion_4_oracle_cross_check(cubic3, cubic2):
    with criterion(4, "ground-state heights agree with the DOP853 oracle to 6 digits"):
        for nl, n_dim, lo, hi in ((cubic3, 3, 4.0, 4.6), (cubic2, 2, 2.0, 2.4)):
            prod = find_bound_state(nl, n_dim, 0, (lo, hi)).shoot_height
            ora = oracle.oracle_height(nl.f, nl.F, n_dim, 0, lo, hi)
            assert abs(prod - ora) / abs(ora) < 1e-6, (n_dim, prod, ora)


def test_criterion_5_transfer_exactness(family3):
    with criterion(5, "M = 1 + t: root certificates, closed form, strong residual"):
        kf = make_affine_m(1.0, 1.0)
        for v in family3:
            res = solve_transfer(v, kf)
            assert len(res.roots) == 1
            t = res.roots[0]
            assert abs(transfer_map(v, kf, t) - 1.0) < 1e-10
            g = res.grad_norm_sq_v
            closed = (-g + math.sqrt(g * g + 4.0)) / 2.0
            assert abs(t - closed) < 1e-10 * max(1.0, closed)
            assert fl.strong_residual(res.profiles[0], kf) < 1e-4


def test_criterion_6_nonexistence_threshold(family3):
    with criterion(6, "M = 1 + q t^2: root absent iff q g^2 >= 1, 50 q per profile"):
        for v in family3:
            g = fl.grad_norm_sq(v)
            q_star = 1.0 / (g * g)
            for q in np.geomspace(0.6, 1.6, 50) * q_star:
                res = solve_transfer(v, make_power_m(1.0, q, 2.0))
                if q * g * g >= 1.0:
                    assert res.roots == []
                else:
                    want = math.sqrt(1.0 - q * g * g)
                    assert len(res.roots) == 1
                    assert abs(res.roots[0] - want) < 1e-10


def test_criterion_7_multiplicity(family3):
    with criterion(7, "lambda(t)=t, m0=1: q < q_3 gives >= 3 distinct solutions"):
        kf_any = make_affine_m(1.0, 1.0)
        q3 = q_threshold(kf_any, family3, 3)
        q = 0.9 * q3
        table = multiplicity_sweep(lambda b: make_affine_m(1.0, b),
                                   family3[:3], [q])
        assert table.rows[0].count >= 3
        kq = make_affine_m(1.0, q)
        t_half = 1.0 / math.sqrt(2.0)
        for v in family3[:3]:
            assert transfer_map(v, kq, t_half) < 1.0


def test_criterion_8_dichotomy(family3, family4):
    with criterion(8, "M = 1 + b t: roots at N=3 for all b; count drops at N=4"):
        for v in family3:
            for b in np.geomspace(1e-3, 1e3, 13):
                res = solve_transfer(v, make_affine_m(1.0, b), t_lo=1e-9)
                assert len(res.roots) == 1
        _, fam4 = family4
        gs = [fl.grad_norm_sq(v) for v in fam4]
        b_grid = np.geomspace(1e-4, 1e-2, 41)
        counts = []
        for b in b_grid:
            n_found = 0
            for v, g in zip(fam4, gs):
                res = solve_transfer(v, make_affine_m(1.0, b))
                want_root = b * g < 1.0
                assert (len(res.roots) == 1) == want_root
                n_found += len(res.roots)
            counts.append(n_found)
        assert counts[0] == 3
        assert counts[-1] == 0
        step = b_grid[1] / b_grid[0]
        for g in gs:
            crossover = 1.0 / g
            below = b_grid[b_grid < crossover]
            assert len(below) and crossover / below[-1] <= step * (1 + 1e-12)


def test_criterion_9_envelope_suite(envelope3, cubic3):
    with criterion(9, "lemma items hold on the 10^4-point grid; corruption caught"):
        reports = {r.condition_id: r for r in verify_lemma_21_22(envelope3, cubic3)}
        for item in ("L2.1(i)", "L2.1(ii)", "L2.1(iii)", "L2.1(v)",
                     "L2.2(i)", "L2.2(iii)", "L2.2(v)"):
            assert reports[item].verdict == "Holds", item
        import dataclasses
        bad_hbar = envelope3.hbar_samples.copy()
        bad_hbar[envelope3.grid > 1.0] *= 0.5
        bad = dataclasses.replace(envelope3, hbar_samples=bad_hbar)
        bad_reports = {r.condition_id: r for r in verify_lemma_21_22(bad, cubic3)}
        assert bad_reports["L2.1(i)"].verdict == "Fails"


def test_criterion_10_scaling_identity(family3):
    with criterion(10, "scaled energy matches rescaled profiles; FD is O(step^2)"):
        families = [make_affine_m(1.0, 1.0), make_power_m(1.0, 0.5, 2.0)]
        for kf in families:
            for v in family3[:3]:
                qv = fl.quadrature_tolerance(v)
                for theta in (-1.0, 0.0, 1.0):
                    y = build_kt_solution(v, math.exp(-theta))
                    y.norms.clear()
                    tol = 10.0 * max(qv, fl.quadrature_tolerance(y))
                    assert abs(fl.scaled_energy(theta, v, kf)
                               - fl.energy_kt(y, kf)) < tol
        v = family3[1]
        kf = families[0]
        closed = fl.dtheta_scaled_energy(0.0, v, kf)
        errs = [abs((fl.scaled_energy(h, v, kf)
                     - fl.scaled_energy(-h, v, kf)) / (2 * h) - closed)
                for h in (2e-2, 1e-2, 5e-3)]
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.25)
        assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.25)


def test_criterion_11_auxiliary_problem(aux_ground):
    with criterion(11, "auxiliary ground state: K above its coercivity bound and > 0"):
        env, aux, u = aux_ground
        K = fl.energy_aux(u, env, 1.0)
        norm_sq = 1.0 * fl.grad_norm_sq(u) + env.omega * fl.l2_norm_sq(u)
        assert K >= (0.5 - 1.0 / (env.p0 + 1.0)) * norm_sq - 1e-6
        assert K > 0.0
