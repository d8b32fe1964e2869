"""Log-normal primitives, shared data types and seeded sampling.

Random streams
--------------
Every random draw in the package comes from a :class:`RngSeed`, a pair
``(master_seed, stream_id)`` of unsigned 64-bit integers.  The pair is used
verbatim as the 128-bit key of a Philox4x64 counter-based generator
(``key = [master_seed, stream_id]``, counter starting at zero), so a given
pair always yields the same stream of 64-bit words on every platform.

Uniform variates are built from 53-bit integers ``k`` drawn from that
generator as ``(k + 0.5) / 2**53``, which lies strictly inside (0, 1).  Normal variates are
obtained from those uniforms by the inverse normal CDF, never by a
platform-dependent ziggurat.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import ndtri

from .exceptions import DegenerateSampleError

_UINT64_MASK = (1 << 64) - 1
_TWO_POW_53 = float(1 << 53)


@dataclass(frozen=True)
class LognormalParams:
    """Log-scale location ``mu`` and spread ``sigma`` of one population."""

    mu: float
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.sigma)):
            raise ValueError(f"parameters must be finite, got {self}")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    @property
    def sigma2(self) -> float:
        return self.sigma * self.sigma

    def as_array(self) -> np.ndarray:
        return np.array([self.mu, self.sigma])


@dataclass(frozen=True)
class EtaVector:
    """Parameters of both populations, ordered ``(mu1, sigma1, mu2, sigma2)``."""

    mu1: float
    sigma1: float
    mu2: float
    sigma2: float

    def __post_init__(self):
        if self.sigma1 <= 0 or self.sigma2 <= 0:
            raise ValueError(f"sigma1 and sigma2 must be positive, got {self}")

    @classmethod
    def from_params(cls, p1: LognormalParams, p2: LognormalParams) -> "EtaVector":
        return cls(p1.mu, p1.sigma, p2.mu, p2.sigma)

    @classmethod
    def from_array(cls, a: Sequence[float]) -> "EtaVector":
        a = [float(v) for v in a]
        if len(a) != 4:
            raise ValueError("an eta vector has exactly four components")
        return cls(*a)

    @property
    def pop1(self) -> LognormalParams:
        return LognormalParams(self.mu1, self.sigma1)

    @property
    def pop2(self) -> LognormalParams:
        return LognormalParams(self.mu2, self.sigma2)

    def as_array(self) -> np.ndarray:
        return np.array([self.mu1, self.sigma1, self.mu2, self.sigma2])


@dataclass(frozen=True, eq=False)
class Sample:
    """Strictly positive observations from one population."""

    values: np.ndarray
    label: Optional[str] = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size < 2:
            raise DegenerateSampleError(f"a sample needs at least 2 observations, got {v.size}")
        if not np.all(np.isfinite(v)):
            raise ValueError("sample contains non-finite values")
        if np.any(v <= 0):
            raise ValueError("log-normal observations must be strictly positive")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    @property
    def logs(self) -> np.ndarray:
        return np.log(self.values)

    def scaled(self, c: float) -> "Sample":
        return Sample(self.values * c, self.label)

    def replace(self, index: int, value: float) -> "Sample":
        v = self.values.copy()
        v[index] = value
        return Sample(v, self.label)


SampleLike = Union[Sample, Sequence[float], np.ndarray]


def as_sample(data: SampleLike) -> Sample:
    """Coerce an array-like to :class:`Sample` (validating it)."""
    if isinstance(data, Sample):
        return data
    return Sample(np.asarray(data, dtype=float))


def positive_values(data: SampleLike) -> np.ndarray:
    """Observation vector of ``data``; unlike :class:`Sample` a single point is allowed."""
    if isinstance(data, Sample):
        return data.values
    v = np.atleast_1d(np.asarray(data, dtype=float)).ravel()
    if v.size == 0:
        raise ValueError("no observations")
    if np.any(~(v > 0)):
        raise ValueError("log-normal observations must be strictly positive")
    return v


class Population(str, Enum):
    FIRST = "first"
    SECOND = "second"


@dataclass(frozen=True)
class ContaminationSpec:
    """Replace a fixed fraction of one population by draws from ``contaminant``."""

    fraction: float
    contaminant: LognormalParams
    target_population: Population = Population.SECOND

    def __post_init__(self):
        if not 0.0 <= self.fraction < 1.0:
            raise ValueError(f"contamination fraction must lie in [0, 1), got {self.fraction}")
        object.__setattr__(self, "target_population", Population(self.target_population))

    def count(self, n: int) -> int:
        """Number of replaced observations, ``round(fraction * n)`` with halves rounded up."""
        return int(math.floor(self.fraction * n + 0.5))


@dataclass(frozen=True)
class RngSeed:
    """Key of one independent random stream."""

    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_id"):
            v = getattr(self, name)
            if not 0 <= int(v) <= _UINT64_MASK:
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {v}")

    def child(self, *tokens) -> "RngSeed":
        """Derive a new stream id from this one and ``tokens``.

        The id is the first 8 bytes (little endian) of the BLAKE2b digest of
        ``"<stream_id>/<token>/<token>..."``; the master seed is unchanged.
        """
        return RngSeed(self.master_seed, derive_stream_id(self.stream_id, *tokens))

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=[self.master_seed, self.stream_id]))


def derive_stream_id(*tokens) -> int:
    text = "/".join(str(t) for t in tokens).encode()
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "little")


def uniforms(rng: np.random.Generator, size: int) -> np.ndarray:
    """Uniform variates in the open interval (0, 1) from 53-bit integers."""
    k = rng.integers(0, 1 << 53, size=size, dtype=np.uint64)
    return (k.astype(float) + 0.5) / _TWO_POW_53


def standard_normals(rng: np.random.Generator, size: int) -> np.ndarray:
    return ndtri(uniforms(rng, size))


# --------------------------------------------------------------------------
# distribution primitives


def lognormal_pdf(x, p: LognormalParams):
    """Density of the log-normal law with log-scale parameters ``p``."""
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr <= 0):
        raise ValueError("the log-normal density is only defined for x > 0")
    z = (np.log(x_arr) - p.mu) / p.sigma
    out = np.exp(-0.5 * z * z) / (x_arr * p.sigma * math.sqrt(2.0 * math.pi))
    return float(out) if out.ndim == 0 else out


def lognormal_mean(p: LognormalParams) -> float:
    return math.exp(p.mu + 0.5 * p.sigma * p.sigma)


# --------------------------------------------------------------------------
# sampling


def _draw_lognormal(rng: np.random.Generator, n: int, p: LognormalParams) -> np.ndarray:
    return np.exp(p.mu + p.sigma * standard_normals(rng, n))


def sample_lognormal(n: int, p: LognormalParams, seed: RngSeed, label=None) -> Sample:
    """Draw ``n`` independent log-normal observations."""
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    return Sample(_draw_lognormal(seed.generator(), n, p), label)


def sample_contaminated(n: int, base: LognormalParams, spec: ContaminationSpec,
                        seed: RngSeed, label=None, return_mask: bool = False):
    """Draw ``n`` observations of which exactly ``spec.count(n)`` come from the contaminant.

    The stream is consumed as: ``n - k`` base normals, ``k`` contaminant
    normals, then a random permutation placing the contaminated positions.
    With ``return_mask`` the boolean mask of contaminated positions is
    returned as well.
    """
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    k = spec.count(n)
    rng = seed.generator()
    clean = _draw_lognormal(rng, n - k, base)
    dirty = _draw_lognormal(rng, k, spec.contaminant)
    values = np.concatenate([clean, dirty])
    mask = np.concatenate([np.zeros(n - k, bool), np.ones(k, bool)])
    if k:
        order = rng.permutation(n)
        values, mask = values[order], mask[order]
    s = Sample(values, label)
    return (s, mask) if return_mask else s

