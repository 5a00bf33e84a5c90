"""Acceptance criteria, each run at its stated tolerance.

One PASS/FAIL line per criterion is printed in the terminal summary (or by
running this file directly). Criteria that do not hold for the reference
models are marked ``xfail(strict=True)``: they are evaluated literally and
the suite fails if they ever start passing unnoticed.
"""
import itertools
import math
import sys
import time

import numpy as np
import pytest

import oracles
from conftest import (SKEW_POT, THETA_POT, X_POT, UNIT, full_branch, geometric_system, golden_system,
                      phase_system, record_criterion, skew_system, suite)
from inducedflow import (FiniteLinear, PotentialSpec, SuspensionSystem, abramov_lift, distortion_check,
                         eigen_derivative, entropy_induced, estimate_Zc, gibbs_measure, leading_eigen, mme,
                         pressure_curve, solve_pressure, verify_coboundary_identity)
from inducedflow.checks import _return_classes
from inducedflow.operator import InducedOperator
from inducedflow.thermo import _periodic_words, bernoulli_free_energy, periodic_free_energy, periodic_lower_bound

pytestmark = pytest.mark.acceptance
TOL = 1e-6


def timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


def test_c01_mme_closed_forms():
    worst_err = worst_time = 0.0
    for k, c in [(2, 1.0), (3, 1.0), (2, 2.0)]:
        (h, _), dt = timed(mme, full_branch(k, c), grid=512)
        worst_err = max(worst_err, abs(h - math.log(k) / c))
        worst_time = max(worst_time, dt)
    ok = worst_err <= TOL and worst_time < 1.0
    record_criterion(1, "MME closed forms", ok, f"max err {worst_err:.2e}, slowest {worst_time:.2f} s")
    assert ok


def test_c02_golden_pressure():
    ps, dt = timed(solve_pressure, golden_system(), PotentialSpec.constant(0.0), 1.0)
    err = abs(ps.Z - oracles.GOLDEN_LOG)
    ok = err <= TOL and dt < 1.0
    record_criterion(2, "golden-ratio pressure", ok, f"err {err:.2e}, {dt:.2f} s")
    assert ok


def test_c03_affine_pressure_family():
    k, c, v = 3, 1.5, -0.4
    betas = np.linspace(0.0, 2.0, 50)
    curve = pressure_curve(full_branch(k, c), PotentialSpec.constant(v), betas)
    err = float(np.max(np.abs(curve.pressure - [oracles.affine_pressure(b, v, k, c) for b in betas])))
    ok = err <= TOL and curve.checks["convex"]
    record_criterion(3, "affine pressure family", ok,
                     f"max err {err:.2e} on 50 points, min second difference "
                     f"{curve.checks['convexity_min_second_difference']:.1e}")
    assert ok


def test_c04_bernoulli_gibbs():
    w = np.array([0.3, -0.5])
    p = np.exp(w) / np.exp(w).sum()
    sol = solve_pressure(full_branch(), PotentialSpec.branchwise(w.tolist()), 1.0).spectral
    g = gibbs_measure(sol, 6)
    err = 0.0
    for depth in range(1, 7):
        words, measure, _ = g.cylinder_table(depth)
        exact = np.array([np.prod(p[np.array(wd) - 1]) for wd in words])
        err = max(err, float(np.max(np.abs(measure - exact))))
    h_err = abs(entropy_induced(g) - oracles.bernoulli_entropy(p))
    ok = err <= TOL and h_err <= TOL
    record_criterion(4, "Bernoulli Gibbs oracle", ok, f"cylinder err {err:.2e} (depth <= 6), entropy err {h_err:.2e}")
    assert ok


def test_c05_countable_branch_suite():
    sys_ = geometric_system()
    zc = estimate_Zc(sys_, THETA_POT, 1.0, n_max=40)
    ps = solve_pressure(sys_, THETA_POT, 1.0)
    zc_err = abs(zc.value + 0.3)
    p_err = abs(ps.Z - (math.log(2) - 0.3))
    ok = zc_err <= 0.01 and p_err <= TOL
    record_criterion(5, "countable-branch suite", ok, f"Z_c {zc.value:.6f} (err {zc_err:.1e}), P err {p_err:.2e}")
    assert ok


def test_c06_phase_transition():
    betas = np.linspace(0.1, 2.0, 20)
    curve = pressure_curve(phase_system(), THETA_POT, betas)
    lo, hi = curve.beta_c_interval
    above = betas > hi
    asym_err = float(np.max(np.abs(curve.pressure[above] - (-0.3) * betas[above])))
    ok = (hi - lo <= 1e-3 and lo <= oracles.BETA_C_PHASE <= hi and asym_err <= TOL
          and curve.checks["regime_switches"] == 1)
    record_criterion(6, "phase transition", ok,
                     f"beta_c in [{lo:.6f}, {hi:.6f}] (oracle {oracles.BETA_C_PHASE:.6f}), "
                     f"asymptote err {asym_err:.1e}, {curve.checks['regime_switches']} switch")
    assert ok


@pytest.mark.xfail(strict=True, reason="the phase family has Z_c above every return-class bound")
def test_c07_ordering_chain():
    betas = np.linspace(0.2, 2.0, 10)
    failures, worst = [], -math.inf
    for name, sys_, pot in suite():
        op = InducedOperator(sys_, pot)
        for beta in betas:
            ps = solve_pressure(sys_, pot, float(beta), operator=op)
            for n in _return_classes(sys_):
                try:
                    b = periodic_lower_bound(sys_, pot, float(beta), n)
                except Exception as exc:  # empty return class
                    if type(exc).__name__ != "DomainError":
                        raise
                    continue
                gap = max(ps.zc - b - 1e-12, b - ps.Z - TOL)  # rounding slack on the equality case
                worst = max(worst, gap)
                if gap > 0:
                    failures.append(f"{name} beta={beta:.1f} n={n}")
    ok = not failures
    detail = f"worst violation {worst:.3g}"
    if failures:
        models = sorted({f.split()[0] for f in failures})
        detail += f", {len(failures)} violations on {', '.join(models)}"
    record_criterion(7, "ordering chain", ok, detail)
    assert ok


def _sample_Z(sys_, pot, beta=1.0):
    ps = solve_pressure(sys_, pot, beta)
    lo = max(ps.Z - 0.2, ps.zc + 0.05) if math.isfinite(ps.zc) else ps.Z - 0.2
    return np.linspace(lo, ps.Z + 1.0, 10)


def test_c08_abramov_identity():
    worst = 0.0
    for name, sys_, pot in suite():
        op = InducedOperator(sys_, pot)
        for z in _sample_Z(sys_, pot):
            sol = leading_eigen(sys_, pot, 1.0, float(z), operator=op)
            worst = max(worst, abramov_lift(sol).identity_residual)
    ok = worst <= TOL
    record_criterion(8, "Abramov and eigen-derivative identities", ok, f"Abramov residual {worst:.1e}")
    assert ok


def _fd_check(measure):
    worst, where = 0.0, ""
    for name, sys_, pot in suite():
        op = InducedOperator(sys_, pot)
        for z in _sample_Z(sys_, pot):
            lam = lambda zz: leading_eigen(sys_, pot, 1.0, zz, operator=op).lam  # noqa: E731
            h = 1e-5
            fd = (lam(z + h) - lam(z - h)) / (2 * h)
            sol = leading_eigen(sys_, pot, 1.0, float(z), operator=op)
            err = abs(fd - eigen_derivative(sol, measure)) / sol.lam
            if err > worst:
                worst, where = err, name
    return worst, where


@pytest.mark.xfail(strict=True, reason="the eigenmeasure form drops the variation of H")
def test_c08_eigen_derivative():
    worst, where = _fd_check("nu")
    mu_worst, _ = _fd_check("mu")
    ok = worst <= 1e-3
    record_criterion(8, "Abramov and eigen-derivative identities", ok,
                     f"d lambda/dZ vs -lambda int r dnu: rel err {worst:.3g} (worst on {where}); "
                     f"-lambda int r dmu: rel err {mu_worst:.1e}")
    assert ok


def test_c09_coboundary_identity(rng):
    fam = FiniteLinear(UNIT, [1.0, 2.0, 1.0], [1.2, 0.8, 1.5], roof_slopes=[0.3, 0.0, -0.2])
    models = [("skew", skew_system(), SKEW_POT),
              ("three-branch skew", SuspensionSystem(fam, stable_rate=2.0, stable_shift=-0.3),
               PotentialSpec.affine(const=0.1, x=-0.4, t=0.3, s=0.7, ss=-0.5))]
    worst_res = worst_tail = 0.0
    for _, sys_, pot in models:
        pts = np.column_stack([rng.uniform(0, 1, 100), rng.uniform(-1, 1, 100)])
        out = verify_coboundary_identity(sys_, pot, pts)
        worst_res = max(worst_res, out["max_residual"])
        worst_tail = max(worst_tail, out["tail_bound"])
    ok = worst_res <= TOL and worst_tail <= 1e-10
    record_criterion(9, "coboundary identity", ok, f"max residual {worst_res:.1e}, B tail bound {worst_tail:.1e}")
    assert ok


@pytest.mark.xfail(strict=True, reason="K(n) = 1 - 2^-n on this model, a 6.2% spread over n in [4, 10]")
def test_c10_distortion():
    sys_ = full_branch()
    ps = solve_pressure(sys_, X_POT, 1.0)
    k = np.array(distortion_check(sys_, X_POT, 1.0, ps.Z, 10))
    tail = k[3:10]
    spread = float((tail.max() - tail.min()) / tail.max())
    exact = float(np.max(np.abs(k - (1 - 2.0 ** -np.arange(1, 11)))))
    ok = spread <= 0.05
    record_criterion(10, "distortion boundedness", ok,
                     f"K(10) = {k[-1]:.6f} (bounded by 1), spread over n in [4,10] {spread:.2%}, "
                     f"max |K(n) - (1 - 2^-n)| {exact:.1e}")
    assert ok


def test_c11_uniqueness_surrogate():
    rng = np.random.default_rng(2024)
    models = [("doubling-x", full_branch(), X_POT), ("golden", golden_system(), PotentialSpec.constant(0.0)),
              ("skew", skew_system(), SKEW_POT)]
    worst, eq_err = -math.inf, 0.0
    per_model = 1000 // len(models) + 1
    for _, sys_, pot in models:
        ps = solve_pressure(sys_, pot, 1.0)
        eq_err = max(eq_err, abs(abramov_lift(ps.spectral).free_energy - ps.Z))
        k = sys_.n_branches
        for _ in range(per_model):
            p = rng.dirichlet(np.ones(k))
            worst = max(worst, bernoulli_free_energy(sys_, pot, 1.0, p, max_points=1 << 10) - ps.Z)
        for w in _periodic_words(k, 6):
            worst = max(worst, periodic_free_energy(sys_, pot, 1.0, w) - ps.Z)
    ok = worst <= TOL and eq_err <= TOL
    record_criterion(11, "uniqueness surrogate", ok,
                     f"max free energy - P = {worst:.3g} over {per_model * len(models)} Bernoulli and all "
                     f"periodic measures to depth 6; Gibbs gap {eq_err:.1e}")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
