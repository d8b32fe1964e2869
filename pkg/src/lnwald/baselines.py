"""Comparison tests for equality of two log-normal means.

All of them work on the log observations ``y``.  With ``ybar``, ``s^2`` the
sample mean and (``n - 1`` divisor) variance of one population, the
large-sample Z statistic is

    Z = (ybar1 + s1^2/2 - ybar2 - s2^2/2)
        / sqrt(s1^2/n1 + s1^4/(2(n1-1)) + s2^2/n2 + s2^4/(2(n2-1))).

The likelihood ratio test maximizes the normal log-likelihood of the logs
under ``mu2 = mu1 + (sigma1^2 - sigma2^2)/2``.  The bootstrap test resamples
each population's logs after shifting them so that both log means
``ybar + s^2/2`` are zero, and uses ``|Z|`` as the pivot.
"""

from __future__ import annotations

import dataclasses
import math
from enum import Enum
from typing import Optional

import numpy as np
from scipy.special import erfc

from .exceptions import ConvergenceError, DegenerateSampleError
from .model import RngSeed, SampleLike, as_sample, uniforms
from .optim import OptimizerSettings, minimize_bfgs
from .wald import TestResult, chi2_survival, wald_test

MIN_RESAMPLES = 100
DEFAULT_RESAMPLES = 500


class BaselineMethod(str, Enum):
    CLASSICAL_WALD = "wald"
    Z_TEST = "z"
    LRT = "lrt"
    BOOTSTRAP = "bootstrap"


def classical_wald(s1: SampleLike, s2: SampleLike) -> TestResult:
    """The MDPD Wald-type test at ``beta = 0`` (MLE plug-in)."""
    return dataclasses.replace(wald_test(s1, s2, 0.0), method=BaselineMethod.CLASSICAL_WALD.value)


# --------------------------------------------------------------------------
# Z test


def _z_parts(y1, y2):
    """Vectorized Z over the last axis; returns (numerator, variance)."""
    n1, n2 = y1.shape[-1], y2.shape[-1]
    v1 = np.var(y1, axis=-1, ddof=1)
    v2 = np.var(y2, axis=-1, ddof=1)
    num = np.mean(y1, axis=-1) + 0.5 * v1 - np.mean(y2, axis=-1) - 0.5 * v2
    var = v1 / n1 + v1 * v1 / (2 * (n1 - 1)) + v2 / n2 + v2 * v2 / (2 * (n2 - 1))
    return num, var


def _z_stat(y1, y2):
    num, var = _z_parts(y1, y2)
    return num / np.sqrt(var)


def z_test(s1: SampleLike, s2: SampleLike) -> TestResult:
    """Large-sample Z test; ``statistic`` is ``Z^2`` and ``diagnostics['z']`` the signed ``Z``."""
    s1, s2 = as_sample(s1), as_sample(s2)
    y1, y2 = s1.logs, s2.logs
    num, var = _z_parts(y1, y2)
    if not var > 0:
        raise DegenerateSampleError("both samples have zero spread on the log scale")
    z = float(num / math.sqrt(var))
    return TestResult(
        statistic=z * z,
        p_value=float(erfc(abs(z) / math.sqrt(2.0))),
        method=BaselineMethod.Z_TEST.value,
        n1=len(s1),
        n2=len(s2),
        m_hat=math.exp(float(np.mean(y1)) + 0.5 * float(np.var(y1, ddof=1)))
        - math.exp(float(np.mean(y2)) + 0.5 * float(np.var(y2, ddof=1))),
        reference="normal",
        diagnostics={"z": z},
    )


# --------------------------------------------------------------------------
# likelihood ratio test


def _half_nll(stats, mu, sigma):
    """Mean-scaled normal negative log-likelihood (constants dropped)."""
    ybar, v, frac = stats
    return frac * (math.log(sigma) + ((ybar - mu) ** 2 + v) / (2 * sigma * sigma))


def lrt(s1: SampleLike, s2: SampleLike, opts: Optional[OptimizerSettings] = None) -> TestResult:
    """Likelihood ratio test of equal means against chi-square(1).

    The constrained fit runs over ``(mu1, log sigma1, log sigma2)`` from the
    unconstrained MLE projected onto the constraint.
    """
    s1, s2 = as_sample(s1), as_sample(s2)
    y1, y2 = s1.logs, s2.logs
    n1, n2 = y1.size, y2.size
    N = n1 + n2
    st1 = (float(np.mean(y1)), float(np.var(y1)), n1 / N)
    st2 = (float(np.mean(y2)), float(np.var(y2)), n2 / N)
    if not (st1[1] > 0 and st2[1] > 0):
        raise DegenerateSampleError("LRT needs spread in both samples")
    sd1, sd2 = math.sqrt(st1[1]), math.sqrt(st2[1])
    full = _half_nll(st1, st1[0], sd1) + _half_nll(st2, st2[0], sd2)

    def unpack(t):
        a, b = math.exp(t[1]), math.exp(t[2])
        return t[0], a, t[0] + 0.5 * (a * a - b * b), b

    def fun(t):
        try:
            m1, a, m2, b = unpack(t)
            return _half_nll(st1, m1, a) + _half_nll(st2, m2, b)
        except OverflowError:
            return math.inf

    def grad(t):
        try:
            m1, a, m2, b = unpack(t)
        except OverflowError:
            return np.full(3, np.nan)
        r1 = st1[2] * (st1[0] - m1) / (a * a)
        r2 = st2[2] * (st2[0] - m2) / (b * b)
        d_a = st1[2] / a - st1[2] * ((st1[0] - m1) ** 2 + st1[1]) / a ** 3 - r2 * a
        d_b = st2[2] / b - st2[2] * ((st2[0] - m2) ** 2 + st2[1]) / b ** 3 + r2 * b
        return np.array([-r1 - r2, d_a * a, d_b * b])

    r = minimize_bfgs(fun, grad, [st1[0], math.log(sd1), math.log(sd2)], opts or OptimizerSettings())
    if not r.converged:
        raise ConvergenceError(f"constrained LRT fit did not converge: {r.message}", best=r)
    stat = max(0.0, 2.0 * N * (r.fun - full))
    m1, a, m2, b = unpack(r.x)
    return TestResult(
        statistic=stat,
        p_value=chi2_survival(stat),
        method=BaselineMethod.LRT.value,
        n1=n1,
        n2=n2,
        diagnostics={"constrained": {"mu1": m1, "sigma1": a, "mu2": m2, "sigma2": b},
                     "iterations": r.iterations},
    )


# --------------------------------------------------------------------------
# bootstrap


def bootstrap_test(s1: SampleLike, s2: SampleLike, resamples: int = DEFAULT_RESAMPLES,
                   seed: RngSeed = RngSeed(0)) -> TestResult:
    """Null-recentred nonparametric bootstrap of the Z statistic.

    The p-value is the share of resamples with ``|Z*| >= |Z_obs|``.
    Resample indices are ``floor(u * n)`` from the seeded uniform stream,
    population 1 first.
    """
    if resamples < MIN_RESAMPLES:
        raise ValueError(f"need at least {MIN_RESAMPLES} resamples, got {resamples}")
    s1, s2 = as_sample(s1), as_sample(s2)
    y1, y2 = s1.logs, s2.logs
    n1, n2 = y1.size, y2.size
    z_obs = float(_z_stat(y1, y2))
    if not math.isfinite(z_obs):
        raise DegenerateSampleError("both samples have zero spread on the log scale")
    c1 = y1 - (np.mean(y1) + 0.5 * np.var(y1, ddof=1))
    c2 = y2 - (np.mean(y2) + 0.5 * np.var(y2, ddof=1))
    rng = seed.generator()
    i1 = np.floor(uniforms(rng, resamples * n1) * n1).astype(np.intp).reshape(resamples, n1)
    i2 = np.floor(uniforms(rng, resamples * n2) * n2).astype(np.intp).reshape(resamples, n2)
    with np.errstate(divide="ignore", invalid="ignore"):
        z_star = _z_stat(c1[i1], c2[i2])
    # a resample with no spread gives |Z*| = inf (or nan for 0/0), counted as exceeding
    exceed = int(np.sum(~(np.abs(z_star) < abs(z_obs))))
    return TestResult(
        statistic=z_obs * z_obs,
        p_value=exceed / resamples,
        method=BaselineMethod.BOOTSTRAP.value,
        n1=n1,
        n2=n2,
        reference="bootstrap",
        diagnostics={"z": z_obs, "resamples": resamples,
                     "seed": [seed.master_seed, seed.stream_id]},
    )
