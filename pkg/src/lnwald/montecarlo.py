"""Monte Carlo level/power studies and the outlier-replacement sweep.

Seeding
-------
Replication ``r`` at total size ``n`` of a scenario draws its data from the
streams ``RngSeed(master_seed).child(scenario_key, n, ratio, r)`` followed by
``.child("pop1")``, ``.child("pop2")`` and ``.child("bootstrap")``, where
``scenario_key`` is a BLAKE2b digest of the population parameters and the
contamination specification.  A replication's outcome therefore depends only
on the configuration, never on how the work is split across processes.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .baselines import DEFAULT_RESAMPLES, bootstrap_test, classical_wald, lrt, z_test
from .exceptions import ConvergenceError, NumericalError
from .mdpd import check_beta, fit_mdpd
from .model import (ContaminationSpec, LognormalParams, Population, RngSeed, Sample,
                    SampleLike, as_sample, sample_contaminated, sample_lognormal)
from .wald import DEFAULT_ALPHA, TestResult, wald_test

METHOD_TAGS = ("dpd", "wald", "z", "lrt", "bootstrap")
DEFAULT_SIZE_GRID = (40, 60, 100, 200)
DEFAULT_RATIO = 1.5

# failures that are counted rather than propagated
_COUNTED_FAILURES = (ConvergenceError, NumericalError, ArithmeticError, ValueError)


@dataclass(frozen=True)
class MethodSpec:
    """A test method; ``beta`` is required for ``dpd`` and forbidden otherwise."""

    tag: str
    beta: Optional[float] = None

    def __post_init__(self):
        if self.tag not in METHOD_TAGS:
            raise ValueError(f"unknown method {self.tag!r}; choose from {', '.join(METHOD_TAGS)}")
        if self.tag == "dpd":
            if self.beta is None:
                raise ValueError("method 'dpd' needs beta")
            object.__setattr__(self, "beta", check_beta(self.beta))
        elif self.beta is not None:
            raise ValueError(f"method {self.tag!r} takes no beta")

    @property
    def label(self) -> str:
        if self.tag == "dpd":
            return f"DPD({self.beta:g})"
        return {"wald": "Wald", "z": "Z", "lrt": "LRT", "bootstrap": "Bootstrap"}[self.tag]


def dpd(beta: float) -> MethodSpec:
    return MethodSpec("dpd", beta)


DEFAULT_METHODS = (dpd(0.0), dpd(0.1), dpd(0.2), MethodSpec("z"), MethodSpec("lrt"),
                   MethodSpec("bootstrap"))


def run_method(method: MethodSpec, s1: SampleLike, s2: SampleLike,
               resamples: int = DEFAULT_RESAMPLES, seed: RngSeed = RngSeed(0)) -> TestResult:
    """Dispatch one two-sample test."""
    if method.tag == "dpd":
        return wald_test(s1, s2, method.beta)
    if method.tag == "wald":
        return classical_wald(s1, s2)
    if method.tag == "z":
        return z_test(s1, s2)
    if method.tag == "lrt":
        return lrt(s1, s2)
    return bootstrap_test(s1, s2, resamples, seed)


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    pop1: LognormalParams
    pop2: LognormalParams
    contamination: Optional[ContaminationSpec] = None
    size_grid: tuple = DEFAULT_SIZE_GRID
    ratio: float = DEFAULT_RATIO
    methods: tuple = DEFAULT_METHODS
    alpha: float = DEFAULT_ALPHA
    replications: int = 1000
    master_seed: int = 0
    resamples: int = DEFAULT_RESAMPLES

    def __post_init__(self):
        if not self.ratio > 0:
            raise ValueError("ratio must be positive")
        if self.replications < 100:
            raise ValueError("replications must be at least 100")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        object.__setattr__(self, "size_grid", tuple(int(n) for n in self.size_grid))
        object.__setattr__(self, "methods", tuple(self.methods))
        for n in self.size_grid:
            n1, n2 = self.split(n)
            if n1 < 2 or n2 < 2:
                raise ValueError(f"size {n} leaves a population with fewer than 2 observations")

    def split(self, n: int) -> tuple:
        """``(n1, n2)`` with ``n1 = round(n r / (1 + r))`` (halves up)."""
        n1 = int(math.floor(n * self.ratio / (1 + self.ratio) + 0.5))
        return n1, n - n1

    def scenario_key(self) -> str:
        c = self.contamination
        text = repr((self.pop1.mu, self.pop1.sigma, self.pop2.mu, self.pop2.sigma,
                     None if c is None else (c.fraction, c.contaminant.mu, c.contaminant.sigma,
                                             c.target_population.value)))
        return hashlib.blake2b(text.encode(), digest_size=8).hexdigest()

    def replication_seed(self, n: int, r: int) -> RngSeed:
        return RngSeed(self.master_seed).child(self.scenario_key(), n, repr(float(self.ratio)), r)

    def with_overrides(self, **kw) -> "ScenarioConfig":
        values = {f: getattr(self, f) for f in self.__dataclass_fields__}
        values.update({k: v for k, v in kw.items() if v is not None})
        return ScenarioConfig(**values)


@dataclass(frozen=True)
class SimulationRow:
    method: MethodSpec
    n: int
    n1: int
    n2: int
    replications: int
    rejections: int
    failures: int

    @property
    def rejection_rate(self) -> float:
        return self.rejections / self.replications

    @property
    def mc_se(self) -> float:
        p = self.rejection_rate
        return math.sqrt(p * (1 - p) / self.replications)


@dataclass
class SimulationReport:
    config: ScenarioConfig
    rows: list
    elapsed: float = 0.0
    workers: int = 1

    def row(self, method: MethodSpec, n: int) -> SimulationRow:
        for r in self.rows:
            if r.method == method and r.n == n:
                return r
        raise KeyError(f"no row for {method.label} at n={n}")

    def rate(self, method: MethodSpec, n: int) -> float:
        return self.row(method, n).rejection_rate

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scenario", "method", "beta", "n", "n1", "n2", "rejection_rate", "mc_se",
                    "failures"])
        for r in self.rows:
            w.writerow([self.config.name, r.method.tag,
                        "" if r.method.beta is None else f"{r.method.beta:g}",
                        r.n, r.n1, r.n2, f"{r.rejection_rate:.4f}", f"{r.mc_se:.4f}", r.failures])
        return buf.getvalue()


def _draw_pair(cfg: ScenarioConfig, n: int, seed: RngSeed):
    n1, n2 = cfg.split(n)
    c = cfg.contamination
    out = []
    for pop, size, params in ((Population.FIRST, n1, cfg.pop1), (Population.SECOND, n2, cfg.pop2)):
        s = seed.child("pop1" if pop is Population.FIRST else "pop2")
        if c is not None and c.target_population is pop:
            out.append(sample_contaminated(size, params, c, s))
        else:
            out.append(sample_lognormal(size, params, s))
    return out


def _run_block(cfg: ScenarioConfig, n: int, start: int, stop: int):
    """Rejection and failure counts per method for replications ``start..stop-1``."""
    k = len(cfg.methods)
    rej = np.zeros(k, dtype=np.int64)
    fail = np.zeros(k, dtype=np.int64)
    for r in range(start, stop):
        seed = cfg.replication_seed(n, r)
        s1, s2 = _draw_pair(cfg, n, seed)
        for j, m in enumerate(cfg.methods):
            try:
                res = run_method(m, s1, s2, cfg.resamples, seed.child("bootstrap"))
            except _COUNTED_FAILURES:
                fail[j] += 1
                continue
            rej[j] += res.reject(cfg.alpha)
    return n, rej, fail


def _blocks(cfg: ScenarioConfig, block: int):
    for n in cfg.size_grid:
        for start in range(0, cfg.replications, block):
            yield n, start, min(start + block, cfg.replications)


def run_scenario(cfg: ScenarioConfig, workers: int = 1, block: int = 50) -> SimulationReport:
    """Run every configured method on every replication at every size.

    ``workers > 1`` distributes blocks of replications over processes; counts
    are integers summed per ``(method, n)`` so the report does not depend on
    the number of workers.  A method raising a numerical or fitting error in a
    replication counts as a non-rejection and is tallied under ``failures``.
    """
    t0 = time.perf_counter()
    k = len(cfg.methods)
    rej = {n: np.zeros(k, dtype=np.int64) for n in cfg.size_grid}
    fail = {n: np.zeros(k, dtype=np.int64) for n in cfg.size_grid}
    jobs = list(_blocks(cfg, block))
    if workers <= 1:
        results = (_run_block(cfg, *job) for job in jobs)
        for n, r, f in results:
            rej[n] += r
            fail[n] += f
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            futures = [ex.submit(_run_block, cfg, *job) for job in jobs]
            for fut in futures:
                n, r, f = fut.result()
                rej[n] += r
                fail[n] += f
    rows = []
    for n in cfg.size_grid:
        n1, n2 = cfg.split(n)
        for j, m in enumerate(cfg.methods):
            rows.append(SimulationRow(m, n, n1, n2, cfg.replications, int(rej[n][j]),
                                      int(fail[n][j])))
    return SimulationReport(cfg, rows, time.perf_counter() - t0, max(1, workers))


def default_workers() -> int:
    return max(1, min(8, (os.cpu_count() or 1)))


def _fit_block(params, beta, n, master_seed, start, stop):
    out = np.empty((stop - start, 2))
    root = RngSeed(master_seed)
    for i, r in enumerate(range(start, stop)):
        s = sample_lognormal(n, params, root.child("estimator-covariance", n, r))
        f = fit_mdpd(s, beta)
        out[i] = (f.mu, f.sigma)
    return start, out


def estimator_covariance(params: LognormalParams, beta: float, n: int, replications: int,
                         master_seed: int = 0, workers: int = 1, block: int = 100) -> np.ndarray:
    """Empirical covariance of ``sqrt(n) (theta_hat - theta)`` over seeded replications.

    The deviations are taken from the true ``(mu, sigma)``, not the replication mean.
    """
    beta = check_beta(beta)
    est = np.empty((replications, 2))
    jobs = [(params, beta, n, master_seed, a, min(a + block, replications))
            for a in range(0, replications, block)]
    if workers <= 1:
        results = [_fit_block(*j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_fit_block, *zip(*jobs)))
    for start, out in results:
        est[start:start + out.shape[0]] = out
    dev = math.sqrt(n) * (est - params.as_array())
    return dev.T @ dev / replications


# --------------------------------------------------------------------------
# presets


def preset_scenarios() -> list:
    """The nine designs: equal and unequal variance level/power, pure and contaminated,
    plus a unit-variance level study contaminated far below the bulk."""
    s04, s02 = math.sqrt(0.4), math.sqrt(0.2)
    eq_cont = ContaminationSpec(0.05, LognormalParams(5.0, s04), Population.SECOND)
    uneq_cont = ContaminationSpec(0.05, LognormalParams(5.0, s02), Population.SECOND)
    low_cont = ContaminationSpec(0.05, LognormalParams(-10.0, 1.0), Population.SECOND)
    P = LognormalParams
    return [
        ScenarioConfig("equal-var-level", P(0.0, s04), P(0.0, s04)),
        ScenarioConfig("equal-var-power", P(0.8, s04), P(0.0, s04)),
        ScenarioConfig("equal-var-level-contaminated", P(0.0, s04), P(0.0, s04), eq_cont),
        ScenarioConfig("equal-var-power-contaminated", P(0.8, s04), P(0.0, s04), eq_cont),
        ScenarioConfig("unequal-var-level", P(1.1, s04), P(1.2, s02)),
        ScenarioConfig("unequal-var-power", P(1.6, s04), P(1.2, s02)),
        ScenarioConfig("unequal-var-level-contaminated", P(1.1, s04), P(1.2, s02), uneq_cont),
        ScenarioConfig("unequal-var-power-contaminated", P(1.6, s04), P(1.2, s02), uneq_cont),
        ScenarioConfig("unit-var-level-contaminated-low", P(0.0, 1.0), P(0.0, 1.0), low_cont),
    ]


def get_preset(name: str) -> ScenarioConfig:
    presets = {c.name: c for c in preset_scenarios()}
    try:
        return presets[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(presets)}") from None


# --------------------------------------------------------------------------
# outlier sweep


@dataclass(frozen=True)
class SweepRow:
    value: float
    p_values: dict = field(default_factory=dict)


SWEEP_METHODS = (dpd(0.0), dpd(0.1), dpd(0.2), MethodSpec("z"), MethodSpec("lrt"))


def outlier_sweep(base1: SampleLike, base2: SampleLike, index: int, values: Iterable[float],
                  methods: Sequence[MethodSpec] = SWEEP_METHODS,
                  resamples: int = DEFAULT_RESAMPLES, seed: RngSeed = RngSeed(0)) -> list:
    """p-values of each method as observation ``index`` of ``base2`` takes each of ``values``.

    ``p_values`` maps method labels to p-values; a method that fails at some
    value records ``nan`` there.
    """
    s1, s2 = as_sample(base1), as_sample(base2)
    if not -len(s2) <= index < len(s2):
        raise IndexError(f"index {index} out of range for a sample of size {len(s2)}")
    rows = []
    for v in values:
        v = float(v)
        if not v > 0:
            raise ValueError(f"replacement values must be positive, got {v}")
        s2v: Sample = s2.replace(index, v)
        ps = {}
        for m in methods:
            try:
                ps[m.label] = run_method(m, s1, s2v, resamples, seed).p_value
            except _COUNTED_FAILURES:
                ps[m.label] = float("nan")
        rows.append(SweepRow(v, ps))
    return rows
