"""Gaussian analytics and reproducible sampling.

Closed-form expectations for the truncated-normal objects that drive the
risk analysis (``expected_min_zero``, ``F_obj``, ``G_obj``), plus a
counter-based RNG wrapper so every logical task in a simulation owns an
independent, replayable stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError, NotPSDError

SQRT_2PI = math.sqrt(2.0 * math.pi)

_U64 = 1 << 64


@dataclass(frozen=True)
class SeededStream:
    """A (seed, stream) pair naming one independent random stream.

    Streams are backed by the counter-based Philox generator keyed on the
    128-bit value ``seed + stream * 2**64``, so any two distinct pairs give
    statistically independent sequences and the same pair always reproduces
    the same draws bit-for-bit.
    """

    seed: int
    stream: int = 0

    def __post_init__(self) -> None:
        if not (0 <= self.seed < _U64):
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if not (0 <= self.stream < _U64):
            raise DomainError(f"stream id must be a 64-bit unsigned integer, got {self.stream}")

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        return np.random.Generator(np.random.Philox(key=self.seed + (self.stream << 64)))

    def child(self, index: int, width: int) -> "SeededStream":
        """Derive substream ``index`` out of ``width`` consecutive slots."""
        if not 0 <= index < width:
            raise DomainError(f"substream index {index} outside [0, {width})")
        return SeededStream(self.seed, self.stream * width + index)


@dataclass(frozen=True)
class GaussianLaw:
    """Mean-zero multivariate normal law described by its covariance matrix."""

    cov: np.ndarray

    def __post_init__(self) -> None:
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        object.__setattr__(self, "cov", cov)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
            raise DomainError(f"covariance must be square, got shape {cov.shape}")
        if not np.all(np.abs(cov - cov.T) <= 1e-12):
            raise DomainError("covariance matrix is not symmetric to 1e-12")
        eigmin = float(np.linalg.eigvalsh(cov).min()) if cov.size else 0.0
        if eigmin < -1e-10:
            raise NotPSDError(f"covariance has eigenvalue {eigmin} < -1e-10")

    @property
    def dim(self) -> int:
        return self.cov.shape[0]


def std_normal_cdf(x):
    """Standard normal CDF, evaluated through the complementary error function."""
    x = np.asarray(x, dtype=float)
    out = 0.5 * special.erfc(-x / math.sqrt(2.0))
    return float(out) if out.ndim == 0 else out


def std_normal_pdf(x):
    """Standard normal density."""
    x = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * x * x) / SQRT_2PI
    return float(out) if out.ndim == 0 else out


def expected_min_zero(mean, sd: float):
    """E[min{X, 0}] for X ~ N(mean, sd^2).

    Equals ``-sd * pdf(mean/sd) + mean * (1 - cdf(mean/sd))``; always
    non-positive and never below ``min(mean, 0) - sd``.
    """
    if sd <= 0:
        raise DomainError(f"sd must be positive, got {sd}")
    m = np.asarray(mean, dtype=float)
    z = m / sd
    out = -sd * std_normal_pdf(z) + m * (1.0 - std_normal_cdf(z))
    return float(out) if np.ndim(out) == 0 else out


def F_obj(w, s, sd: float):
    """Worst-case regret objective ``min{s,0} - E[min{N(w+s, sd^2), 0}]``.

    For fixed ``w`` the supremum over ``s`` is attained at ``s = 0`` with
    value ``sd*pdf(w/sd) - w*(1 - cdf(w/sd))``, which decays to zero as
    ``w`` grows.
    """
    if sd <= 0:
        raise DomainError(f"sd must be positive, got {sd}")
    w = np.asarray(w, dtype=float)
    s = np.asarray(s, dtype=float)
    out = np.minimum(s, 0.0) - expected_min_zero(w + s, sd)
    return float(out) if np.ndim(out) == 0 else out


def G_obj(w, s, sd: float):
    """Worst-case mean-squared-error objective E[(min{N(w+s,sd^2),0} - min{s,0})^2].

    Branch-specific closed forms: for s >= 0 the square reduces to the
    truncated second moment below zero; for s < 0 it adds the mass of the
    event {X > -s} weighted by s^2.
    """
    if sd <= 0:
        raise DomainError(f"sd must be positive, got {sd}")
    w = np.asarray(w, dtype=float)
    s = np.asarray(s, dtype=float)
    t = w + s
    zt = t / sd
    # s >= 0 branch: E[X^2 1{X <= 0}] with X ~ N(t, sd^2)
    pos = (t * t + sd * sd) * std_normal_cdf(-zt) - t * sd * std_normal_pdf(zt)
    # s < 0 branch: E[X^2 1{X <= -s}] + s^2 P(X > -s)
    neg = (
        (w * w + sd * sd) * std_normal_cdf(-zt)
        - sd * (w - s) * std_normal_pdf(zt)
        + s * s * std_normal_cdf(zt)
    )
    out = np.where(s >= 0, pos, neg)
    return float(out) if out.ndim == 0 else out


def G_sup_s(w, sd: float):
    """sup over s of ``G_obj``, which equals ``w^2 + sd^2`` for every w."""
    if sd <= 0:
        raise DomainError(f"sd must be positive, got {sd}")
    w = np.asarray(w, dtype=float)
    out = w * w + sd * sd
    return float(out) if out.ndim == 0 else out


def _psd_factor(cov: np.ndarray) -> np.ndarray:
    """Lower-triangular factor L with L L^T = cov, tolerating semidefiniteness.

    The all-zero matrix factors to zero directly; otherwise a failed Cholesky
    gets jitter 1e-12 * trace/dim added to the diagonal, retried up to three
    times before giving up.
    """
    if not np.any(cov):
        return np.zeros_like(cov)
    jitter = 1e-12 * float(np.trace(cov)) / cov.shape[0]
    bumped = cov
    for _ in range(4):
        try:
            return np.linalg.cholesky(bumped)
        except np.linalg.LinAlgError:
            bumped = bumped + jitter * np.eye(cov.shape[0])
    raise NotPSDError("covariance factorization failed after jitter retries")


def mvn_sample(law: GaussianLaw, stream: SeededStream, count: int) -> np.ndarray:
    """Draw ``count`` vectors from N(0, law.cov), deterministic given the stream."""
    if count < 0:
        raise DomainError(f"count must be nonnegative, got {count}")
    factor = _psd_factor(law.cov)
    z = stream.generator().standard_normal(size=(count, law.dim))
    return z @ factor.T
