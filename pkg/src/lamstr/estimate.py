"""Samplers, best-regular estimators and limit-law approximations.

Covers the two three-parameter designs: the observational study (rows of
(y, d)) and the experiment with non-random participation (rows of
(sy, sd, s), where outcome and assigned arm are observed only for
participants). Estimators return the cell-mean parameter estimate together
with the diagonal covariance of its limit law.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import BootstrapDegenerateError, EmptyCellError, ModelMismatchError, PathOutOfRangeError
from .gauss import SeededStream
from .models import Theta

THETA0 = (2.0 / 3.0, 1.0 / 3.0, 3.0 / 4.0)


@dataclass(frozen=True)
class Ex2Sample:
    """Observed rows (S*Y, S*D, S) from the participation design."""

    sy: np.ndarray
    sd: np.ndarray
    s: np.ndarray

    def __post_init__(self) -> None:
        sy = np.asarray(self.sy, dtype=float).reshape(-1)
        sd = np.asarray(self.sd, dtype=float).reshape(-1)
        s = np.asarray(self.s, dtype=float).reshape(-1)
        if not (sy.size == sd.size == s.size):
            raise ModelMismatchError("sy, sd, s must have equal length")
        if not np.all(np.isin(s, (0.0, 1.0))) or not np.all(np.isin(sd, (0.0, 1.0))):
            raise ModelMismatchError("participation and treatment flags must be 0/1")
        out = s == 0.0
        if np.any(sy[out] != 0.0) or np.any(sd[out] != 0.0):
            raise ModelMismatchError("non-participants must have sy = sd = 0")
        object.__setattr__(self, "sy", sy)
        object.__setattr__(self, "sd", sd)
        object.__setattr__(self, "s", s)

    @property
    def n(self) -> int:
        return self.s.size


@dataclass(frozen=True)
class EstimateOut:
    """Parameter estimate, covariance of its limit law, and cell counts."""

    theta_hat: Theta
    sigma_hat: np.ndarray
    counts: dict[str, int]


def ex2_sample(theta: Theta, pi: float, n: int, stream: SeededStream) -> Ex2Sample:
    """Draw a binary-outcome sample: S ~ Bern(p), D|S=1 ~ Bern(pi), Y|D=d,S=1 ~ Bern(mu_d)."""
    if theta.dim != 3:
        raise ModelMismatchError("participation design needs a 3-parameter theta")
    if not 0.0 < pi < 1.0:
        raise ModelMismatchError(f"treated share pi must be in (0, 1), got {pi}")
    if n < 1:
        raise ModelMismatchError(f"sample size must be at least 1, got {n}")
    mu1, mu0, p = theta.values
    rng = stream.generator()
    u = rng.random(size=(3, n))
    s = (u[0] < p).astype(float)
    d = s * (u[1] < pi)
    mu = np.where(d == 1.0, mu1, mu0)
    y = s * (u[2] < mu)
    return Ex2Sample(sy=y, sd=d, s=s)


def _cell_stats(y: np.ndarray, mask: np.ndarray) -> tuple[int, float, float]:
    count = int(mask.sum())
    if count == 0:
        return 0, math.nan, math.nan
    vals = y[mask]
    mean = float(vals.mean())
    # Plug-in variance (divide by the cell count).
    var = float(((vals - mean) ** 2).mean())
    return count, mean, var


def ex2_theta_hat(sample: Ex2Sample, y_lo: float = 0.0, y_hi: float = 1.0) -> EstimateOut:
    """Cell means and participation share, with the diagonal limit covariance.

    The covariance diagonal is (var1/(pi*p), var0/((1-pi)*p), p*(1-p)) with
    var_d the within-cell outcome variance and pi the treated share among
    participants.
    """
    treated = (sample.sd == 1.0) & (sample.s == 1.0)
    control = (sample.sd == 0.0) & (sample.s == 1.0)
    n1, mu1, v1 = _cell_stats(sample.sy, treated)
    n0, mu0, v0 = _cell_stats(sample.sy, control)
    if n1 == 0 or n0 == 0:
        raise EmptyCellError(f"empty estimator cell: treated={n1}, control={n0}")
    n = sample.n
    n_s = n1 + n0
    p_hat = n_s / n
    pi_hat = n1 / n_s
    theta = Theta(np.array([mu1, mu0, p_hat]), y_lo, y_hi)
    sigma = np.diag(
        [
            v1 / (pi_hat * p_hat),
            v0 / ((1.0 - pi_hat) * p_hat),
            p_hat * (1.0 - p_hat),
        ]
    )
    counts = {"d1s1": n1, "d0s1": n0, "s0": n - n_s}
    return EstimateOut(theta_hat=theta, sigma_hat=sigma, counts=counts)


def ex1_theta_hat(rows: np.ndarray, y_lo: float = 0.0, y_hi: float = 1.0) -> EstimateOut:
    """Estimator for the observational design from rows of (y, d)."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.shape[1] != 2:
        raise ModelMismatchError(f"expected rows of (y, d), got shape {rows.shape}")
    y, d = rows[:, 0], rows[:, 1]
    n1, mu1, v1 = _cell_stats(y, d == 1.0)
    n0, mu0, v0 = _cell_stats(y, d == 0.0)
    if n1 == 0 or n0 == 0:
        raise EmptyCellError(f"empty treatment cell: treated={n1}, control={n0}")
    p_hat = n1 / rows.shape[0]
    theta = Theta(np.array([mu1, mu0, p_hat]), y_lo, y_hi)
    sigma = np.diag([v1 / p_hat, v0 / (1.0 - p_hat), p_hat * (1.0 - p_hat)])
    return EstimateOut(theta_hat=theta, sigma_hat=sigma, counts={"d1": n1, "d0": n0})


def boot_G(
    sample: Ex2Sample,
    stream: SeededStream,
    count: int,
    max_retries: int = 100,
    y_lo: float = 0.0,
    y_hi: float = 1.0,
) -> np.ndarray:
    """Nonparametric-bootstrap approximation of the estimator's limit law.

    Returns ``count`` replicates of sqrt(n) * (theta_hat_star - theta_hat).
    Replicates that hit an empty cell are redrawn, up to ``max_retries``
    rounds over the still-degenerate ones.
    """
    base = ex2_theta_hat(sample, y_lo, y_hi).theta_hat.values
    n = sample.n
    rng = stream.generator()
    out = np.empty((count, 3))
    pending = list(range(count))
    for _ in range(max_retries + 1):
        if not pending:
            break
        still = []
        idx = rng.integers(0, n, size=(len(pending), n))
        for row, j in enumerate(pending):
            boot = Ex2Sample(sy=sample.sy[idx[row]], sd=sample.sd[idx[row]], s=sample.s[idx[row]])
            try:
                est = ex2_theta_hat(boot, y_lo, y_hi)
            except EmptyCellError:
                still.append(j)
                continue
            out[j] = math.sqrt(n) * (est.theta_hat.values - base)
        pending = still
    if pending:
        raise BootstrapDegenerateError(
            f"{len(pending)} bootstrap replicates still degenerate after {max_retries} retries"
        )
    return out


def theta_path(h: float, n: int) -> Theta:
    """Local perturbation (2/3 + h/sqrt(n), 1/3 + h/(2 sqrt(n)), 3/4 + h/sqrt(n))."""
    if n < 1:
        raise PathOutOfRangeError(f"sample size must be at least 1, got {n}")
    root = math.sqrt(n)
    vals = np.array(
        [THETA0[0] + h / root, THETA0[1] + h / (2.0 * root), THETA0[2] + h / root]
    )
    if np.any(vals < 0.0) or np.any(vals > 1.0):
        raise PathOutOfRangeError(f"perturbed parameter {vals} leaves [0, 1] at h={h}, n={n}")
    return Theta(vals, 0.0, 1.0)


def write_sample_csv(sample: Ex2Sample, path) -> None:
    """Write the sample as a headered CSV with columns sy, sd, s."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sy", "sd", "s"])
        for row in zip(sample.sy, sample.sd, sample.s):
            writer.writerow([f"{row[0]:.10g}", int(row[1]), int(row[2])])


def read_sample_csv(path) -> Ex2Sample:
    """Read a sample written by ``write_sample_csv``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["sy", "sd", "s"]:
            raise ModelMismatchError(f"expected header sy,sd,s in {path}, got {header}")
        rows = [(float(a), float(b), float(c)) for a, b, c in reader]
    arr = np.array(rows, dtype=float).reshape(-1, 3)
    return Ex2Sample(sy=arr[:, 0], sd=arr[:, 1], s=arr[:, 2])
