"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Monte Carlo criteria use master seed 0, fixed before any run was made.
"""

import math
import time
import warnings

import numpy as np
import pytest
from conftest import record
from scipy.integrate import IntegrationWarning

import oracles
from lnwald import datasets
from lnwald.asymptotics import j_matrix, k_matrix, sigma_matrix
from lnwald.baselines import bootstrap_test, lrt, z_test
from lnwald.influence import (MixtureSpec, estimator_if, if_limit, population_mdpd_functional,
                              second_order_partial_if)
from lnwald.mdpd import fit_mdpd, fit_mle
from lnwald.model import EtaVector, LognormalParams, RngSeed, Sample, sample_lognormal
from lnwald.montecarlo import (MethodSpec, dpd, estimator_covariance, get_preset, outlier_sweep,
                               run_scenario)
from lnwald.wald import (ContiguousSpec, chi2_critical, contiguous_power, ncx2_survival, phi2,
                         phi2_simplified, wald_test)

SEED = 0


def test_criterion_01_table3_dpd():
    targets = {
        "full": (0.1759, 0.1971, 0.2415),
        "I": (0.1177, 0.1476, 0.2012),
        "II": (0.4518, 0.4005, 0.3830),
        "III": (0.2457, 0.2521, 0.2821),
    }
    t0 = time.perf_counter()
    worst = 0.0
    for case, (s1, s2) in datasets.cloud_cases().items():
        for beta, target in zip((0.0, 0.1, 0.2), targets[case]):
            worst = max(worst, abs(wald_test(s1, s2, beta).p_value - target))
    elapsed = time.perf_counter() - t0
    ok = worst <= 0.01 and elapsed < 5
    record(1, ok, f"Table 3 DPD p-values, max |error| {worst:.2e} (tol 1e-2), {elapsed:.2f}s")
    assert ok


def test_criterion_02_published_baselines(air, cloud):
    got = {
        "air Z": (z_test(*air).p_value, 0.0654),
        "air LRT": (lrt(*air).p_value, 0.1136),
        "cloud Z": (z_test(*cloud).p_value, 0.1200),
        "cloud LRT": (lrt(*cloud).p_value, 0.1293),
    }
    errs = {k: abs(v - t) for k, (v, t) in got.items()}
    ok = max(errs.values()) <= 0.01
    record(2, ok, ", ".join(f"{k} {got[k][0]:.4f}" for k in got))
    assert ok


def test_criterion_03_bootstrap_band(cloud):
    ps = [bootstrap_test(*cloud, resamples=500, seed=RngSeed(s)).p_value for s in range(1, 6)]
    ok = all(abs(p - 0.0814) <= 0.03 for p in ps)
    record(3, ok, f"bootstrap p over seeds 1-5: {ps} (band 0.0814 +- 0.03)")
    assert ok


def test_criterion_04_closed_form_oracles():
    t0 = time.perf_counter()
    worst = 0.0
    exact_at_zero = True
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        for b in (0.0, 0.1, 0.25, 0.5, 1.0):
            for mu in (-1.0, 0.0, 2.0):
                for s in (0.5, 1.0, 2.0):
                    p = LognormalParams(mu, s)
                    J, K = j_matrix(p, b), k_matrix(p, b)
                    for closed, oracle in ((J, oracles.j_oracle(mu, s, b)),
                                           (K, oracles.k_oracle(mu, s, b))):
                        worst = max(worst, np.max(np.abs(closed - oracle)) / np.max(np.abs(oracle)))
                    if b == 0.0:
                        fisher = np.diag([1 / s ** 2, 2 / s ** 2])
                        exact_at_zero &= bool(np.array_equal(J, fisher) and np.array_equal(K, fisher))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6 and exact_at_zero and elapsed < 60
    record(4, ok, f"J/K vs oracles on 45 points, max rel error {worst:.1e}; "
                  f"beta=0 exact Fisher: {exact_at_zero}; {elapsed:.1f}s")
    assert ok


def test_criterion_05_sandwich_monte_carlo():
    p = LognormalParams(0.0, math.sqrt(0.4))
    t0 = time.perf_counter()
    rel = {}
    for b in (0.0, 0.2):
        emp = estimator_covariance(p, b, n=5000, replications=2000, master_seed=SEED)
        rel[b] = np.abs(np.diag(emp) / np.diag(sigma_matrix(p, b)) - 1)
    elapsed = time.perf_counter() - t0
    worst = max(float(np.max(v)) for v in rel.values())
    ok = worst <= 0.05 and elapsed < 600
    record(5, ok, "diagonal rel. errors " + ", ".join(
        f"beta={b}: {v[0]:.3f}/{v[1]:.3f}" for b, v in rel.items()) + f" (tol 0.05), {elapsed:.1f}s")
    assert ok


def test_criterion_06_mle_equivalence():
    worst_limit = worst_closed = 0.0
    root = RngSeed(SEED)
    for r in range(50):
        rng = root.child("mle-equivalence", r).generator()
        mu, sigma = rng.uniform(-2, 3), rng.uniform(0.2, 2)
        n = int(rng.integers(10, 200))
        s = sample_lognormal(n, LognormalParams(mu, sigma), root.child("mle-sample", r))
        mle = fit_mle(s)
        near = fit_mdpd(s, 1e-6)
        worst_limit = max(worst_limit, abs(near.mu - mle.mu), abs(near.sigma - mle.sigma))
        zero = fit_mdpd(s, 0.0)
        y = np.log(s.values)
        worst_closed = max(worst_closed, abs(zero.mu - y.mean()), abs(zero.sigma - y.std()))
    ok = worst_limit <= 1e-4 and worst_closed <= 1e-12
    record(6, ok, f"beta=1e-6 vs MLE max diff {worst_limit:.1e} (tol 1e-4); "
                  f"beta=0 vs closed form {worst_closed:.1e} (tol 1e-12)")
    assert ok


def test_criterion_07_influence_validation():
    eps = 1e-4
    worst = 0.0
    for x in (0.2, 3.0, 50.0):
        for s in (0.5, 1.0, 2.0):
            for b in (0.1, 0.5, 1.0):
                p = LognormalParams(0.0, s)
                t = population_mdpd_functional(MixtureSpec(p, eps, x), b)
                fd = (np.array([t.mu, t.sigma]) - p.as_array()) / eps
                v = estimator_if(x, p, b).value
                worst = max(worst, np.linalg.norm(fd - v) / np.linalg.norm(v))
    base = LognormalParams(0.0, 1.0)
    grid = [10.0 ** k for k in range(-6, 13)]
    bounded = True
    for b in (0.1, 0.3, 0.5, 1.0):
        norms = [np.linalg.norm(estimator_if(x, base, b).value) for x in grid]
        k = int(np.argmax(norms))
        bounded &= bool(np.isfinite(norms).all() and 0 < k < len(grid) - 1)
        bounded &= bool(np.linalg.norm(estimator_if(1e12, base, b).value - if_limit(base, b)) < 1e-6)
    norms0 = [np.linalg.norm(estimator_if(x, base, 0.0).value) for x in grid]
    wider = np.linalg.norm(estimator_if(1e24, base, 0.0).value)
    unbounded = int(np.argmax(norms0)) == len(grid) - 1 and wider > max(norms0)
    ok = worst <= 1e-2 and bounded and unbounded
    record(7, ok, f"27-point FD vs formula max rel error {worst:.1e} (tol 1e-2); "
                  f"bounded for beta>0: {bounded}; unbounded at beta=0: {unbounded}")
    assert ok


def test_criterion_08_null_calibration():
    cfg = get_preset("equal-var-level").with_overrides(
        size_grid=(40, 100), replications=1000, master_seed=SEED,
        methods=(dpd(0.0), dpd(0.1), dpd(0.2), MethodSpec("z"), MethodSpec("lrt")))
    t0 = time.perf_counter()
    report = run_scenario(cfg)
    elapsed = time.perf_counter() - t0
    rates = {(r.method.label, r.n): r.rejection_rate for r in report.rows}
    ok = all(0.03 <= v <= 0.07 for v in rates.values()) and elapsed < 300
    record(8, ok, "levels " + ", ".join(f"{m}@{n}={v:.3f}" for (m, n), v in rates.items())
           + f"; {elapsed:.1f}s")
    assert ok


def test_criterion_09_contamination():
    methods = (dpd(0.0), dpd(0.2), MethodSpec("z"))
    level = run_scenario(get_preset("equal-var-level-contaminated").with_overrides(
        size_grid=(100,), replications=1000, master_seed=SEED, methods=methods))
    power = run_scenario(get_preset("equal-var-power-contaminated").with_overrides(
        size_grid=(100,), replications=1000, master_seed=SEED, methods=methods))
    lv = {m.label: level.rate(m, 100) for m in methods}
    pw = {m.label: power.rate(m, 100) for m in methods}
    ok = (lv["DPD(0.2)"] <= 0.10 and lv["DPD(0)"] >= 0.5 and lv["Z"] >= 0.5
          and pw["DPD(0.2)"] >= 0.9 and pw["Z"] <= 0.5)
    record(9, ok, f"contaminated level {lv}; contaminated power {pw} "
                  "(figure-reading thresholds)")
    assert ok


def test_criterion_10_property_suite(cloud):
    checks = {}
    s1, s2 = cloud
    w = wald_test(s1, s2, 0.2)
    ws = wald_test(s1.scaled(100.0), s2.scaled(100.0), 0.2)
    checks["W scale invariance"] = abs(ws.statistic / w.statistic - 1) <= 1e-8
    swap = all(abs(wald_test(s2, s1, b).statistic - wald_test(s1, s2, b).statistic)
               <= 1e-10 * wald_test(s1, s2, b).statistic for b in (0.0, 0.1, 0.5))
    checks["sample swap"] = swap
    root = RngSeed(SEED)
    ps = []
    etas = []
    for r in range(20):
        rng = root.child("property-suite", r).generator()
        a = sample_lognormal(int(rng.integers(5, 60)), LognormalParams(rng.uniform(-1, 1), rng.uniform(0.3, 1.5)),
                             root.child("ps-a", r))
        b_ = sample_lognormal(int(rng.integers(5, 60)), LognormalParams(rng.uniform(-1, 1), rng.uniform(0.3, 1.5)),
                              root.child("ps-b", r))
        ps.append(wald_test(a, b_, rng.uniform(0, 1)).p_value)
        etas.append((EtaVector(rng.uniform(-1, 1), rng.uniform(0.2, 2), rng.uniform(-1, 1),
                               rng.uniform(0.2, 2)), rng.uniform(0.1, 0.9), rng.uniform(0, 1)))
    checks["p in [0,1]"] = all(0.0 <= p <= 1.0 for p in ps)
    checks["phi2 = 4V"] = all(math.isclose(phi2(e, w_, b), phi2_simplified(e, w_, b), rel_tol=1e-12)
                              for e, w_, b in etas)
    eta0 = EtaVector(1.1, math.sqrt(0.4), 1.2, math.sqrt(0.2))
    cross_ok = True
    for x in (1e-3, 0.5, 3.0, 50.0, 1e4):
        for b in (0.0, 0.2, 0.7):
            p1 = second_order_partial_if(x, eta0, 0.6, b, "pop1")
            p2 = second_order_partial_if(x, eta0, 0.6, b, "pop2")
            pc = second_order_partial_if(x, eta0, 0.6, b, "cross")
            cross_ok &= math.isclose(pc * pc, p1 * p2, rel_tol=1e-12, abs_tol=1e-300)
    checks["cross^2 = pop1*pop2"] = cross_ok
    crit = chi2_critical(0.05)
    checks["ncx2 dual methods"] = all(
        abs(ncx2_survival(x, ncp) - oracles.ncx2_sf_integral(x, ncp)) <= 1e-8
        for x in (crit, 0.5, 10.0) for ncp in (0.5, 5.0, 20.0))
    spec = ContiguousSpec(eta0, 0.0, 0.6)
    checks["contiguous power at delta=0"] = all(
        abs(contiguous_power(spec, b, a) - a) <= 1e-10 for b in (0.0, 0.2) for a in (0.01, 0.05, 0.1))
    ok = all(checks.values())
    record(10, ok, ", ".join(f"{k}: {'ok' if v else 'FAIL'}" for k, v in checks.items()))
    assert ok


def test_criterion_11_outlier_sweep(air):
    rows = {r.value: r.p_values for r in outlier_sweep(*air, datasets.BAAQMD_OUTLIER_INDEX,
                                                       [170.0, 500.0])}
    at500, at170 = rows[500.0], rows[170.0]
    ok = (at500["DPD(0.1)"] < 0.05 and at500["DPD(0.2)"] < 0.05 and at500["DPD(0)"] > 0.05
          and at500["Z"] > 0.05 and at500["LRT"] > 0.05
          and abs(at170["Z"] - 0.0654) <= 0.01 and abs(at170["LRT"] - 0.1136) <= 0.01)
    record(11, ok, "at 500: " + ", ".join(f"{k}={v:.4f}" for k, v in at500.items())
           + f"; at 170: Z={at170['Z']:.4f}, LRT={at170['LRT']:.4f}")
    assert ok
