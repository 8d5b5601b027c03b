"""Replication harness: RIMR curves over a local-perturbation grid.

For each grid value ``h`` the harness draws independent samples from the
perturbed data-generating process, estimates the parameter, solves the
adjustment problem per replication, and records the mean rule value of the
plug-in and adjusted (LAM) rules. The regret of identifiable maximum risk
is then computed analytically at the exact perturbed parameter, which the
experimenter knows by construction.

Every replication owns derived random streams indexed by (h index,
replication index, purpose), so results are bit-identical for any worker
count and replications can run in parallel processes.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .adjust import AdjustProblem, lam_str, plug_in_str, solve_adjustment
from .errors import (
    DegenerateRegionError,
    DomainError,
    EmptyCellError,
    HarnessError,
    NotPSDError,
)
from .estimate import ex2_sample, ex2_theta_hat, theta_path
from .gauss import GaussianLaw, SeededStream, mvn_sample
from .models import IdModel, Theta, get_model
from .rules import MODE_ESTIMATED, kappa, neg_part, pos_part, spec_from_model

# Replications are dispatched to workers in fixed-size blocks so the task
# split never depends on the worker count.
_BLOCK = 20
_STREAMS_PER_REP = 2  # purpose 0: sample, purpose 1: mvn draws


def _default_h_grid() -> tuple[float, ...]:
    return tuple(k / 20.0 for k in range(-40, 41))


@dataclass(frozen=True)
class SimConfig:
    """Resolved parameters of one experiment run."""

    n: int = 300
    reps: int = 5000
    draws: int = 1000
    h_grid: tuple[float, ...] = field(default_factory=_default_h_grid)
    trunc: float = 1000.0
    seed: int = 0
    pi: float = 0.5
    eps_coef: float = 1.0
    eps_exp: float = -1.0 / 3.0
    lambda_coef: float = 1.0
    lambda_exp: float = 1.0 / 3.0
    k_m: float = 2.0
    s_points: int = 7
    w_points: int = 5
    scale_sqrt_n: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "h_grid", tuple(float(h) for h in self.h_grid))
        if self.n < 1 or self.reps < 1 or self.draws < 1:
            raise DomainError("n, reps and draws must all be at least 1")
        if len(self.h_grid) == 0:
            raise DomainError("h grid must be nonempty")
        if any(b <= a for a, b in zip(self.h_grid, self.h_grid[1:])):
            raise DomainError("h grid must be strictly increasing")
        if self.trunc <= 0 or self.k_m < 0 or self.pi <= 0 or self.pi >= 1:
            raise DomainError("invalid truncation, search box or treated share")
        if self.eps <= 0 or self.lam <= 0:
            raise DomainError("derived eps and lambda must be positive")

    @property
    def eps(self) -> float:
        """Kink-detection threshold eps_coef * n**eps_exp."""
        return self.eps_coef * self.n**self.eps_exp

    @property
    def lam(self) -> float:
        """Support-box half-width lambda_coef * n**lambda_exp."""
        return self.lambda_coef * self.n**self.lambda_exp


@dataclass(frozen=True)
class HPoint:
    """Per-h record of one RIMR curve."""

    h: float
    delta_bar: float
    kappa_oracle: float
    rimr: float
    se: float
    degenerate: int


@dataclass(frozen=True)
class RimrCurve:
    """One rule's RIMR values across the h grid."""

    label: str
    n: int
    points: tuple[HPoint, ...]

    def max_rimr(self) -> float:
        return max(pt.rimr for pt in self.points)

    def point_at(self, h: float) -> HPoint:
        for pt in self.points:
            if pt.h == h:
                return pt
        raise KeyError(f"no record at h={h}")


def _rimr_parts(delta_bar: float, theta_h: Theta, model: IdModel) -> tuple[float, float, float]:
    bp = model.bounds(theta_h)
    kappa_oracle = kappa(bp.lo, bp.hi)
    gap = delta_bar - kappa_oracle
    lo_term = neg_part(bp.lo) * gap
    hi_term = -pos_part(bp.hi) * gap
    if lo_term >= hi_term:
        return lo_term, neg_part(bp.lo), kappa_oracle
    return hi_term, pos_part(bp.hi), kappa_oracle


def rimr(
    delta_bar: float,
    theta_h: Theta,
    model: IdModel,
    sqrt_n_scale: Optional[float] = None,
) -> float:
    """Regret of identifiable maximum risk of a rule with mean value ``delta_bar``.

    ``max{tau_lo^-(theta_h) * (delta_bar - kappa), -tau_hi^+(theta_h) * (delta_bar - kappa)}``,
    optionally scaled by ``sqrt(sqrt_n_scale)``.
    """
    if not 0.0 <= delta_bar <= 1.0:
        raise DomainError(f"mean rule value must be in [0, 1], got {delta_bar}")
    value, _, _ = _rimr_parts(delta_bar, theta_h, model)
    if sqrt_n_scale is not None:
        value *= math.sqrt(sqrt_n_scale)
    return value


def _one_replication(
    config: SimConfig, model: IdModel, theta_h: Theta, ih: int, j: int
) -> tuple[Optional[float], Optional[float]]:
    base = (ih * config.reps + j) * _STREAMS_PER_REP
    sample = ex2_sample(theta_h, config.pi, config.n, SeededStream(config.seed, base))
    try:
        est = ex2_theta_hat(sample)
    except EmptyCellError:
        return None, None
    try:
        d_plug = plug_in_str(est.theta_hat, model)
    except DegenerateRegionError:
        d_plug = None
    try:
        spec = spec_from_model(model, est.theta_hat, mode=MODE_ESTIMATED, eps=config.eps)
        g_draws = mvn_sample(
            GaussianLaw(est.sigma_hat), SeededStream(config.seed, base + 1), config.draws
        )
        problem = AdjustProblem(
            spec=spec,
            draws=g_draws,
            support=config.lam,
            search=config.k_m,
            trunc=config.trunc,
            s_points=config.s_points,
            w_points=config.w_points,
        )
        result = solve_adjustment(problem)
        d_lam = lam_str(est.theta_hat, result.w_hat, config.n, model)
    except (DegenerateRegionError, NotPSDError):
        d_lam = None
    return d_plug, d_lam


def _run_block(config: SimConfig, ih: int, j_start: int, j_stop: int) -> list:
    model = get_model("ex2")
    theta_h = theta_path(config.h_grid[ih], config.n)
    return [_one_replication(config, model, theta_h, ih, j) for j in range(j_start, j_stop)]


def _curve_point(
    config: SimConfig, model: IdModel, h: float, values: list[Optional[float]], label: str
) -> HPoint:
    kept = np.array([v for v in values if v is not None], dtype=float)
    degenerate = len(values) - kept.size
    if kept.size == 0:
        raise HarnessError(f"all {len(values)} replications degenerate for {label} at h={h}")
    delta_bar = float(np.sum(kept) / kept.size)
    theta_h = theta_path(h, config.n)
    value, active_coef, kappa_oracle = _rimr_parts(delta_bar, theta_h, model)
    se = active_coef * float(np.std(kept, ddof=1)) / math.sqrt(kept.size) if kept.size > 1 else 0.0
    if config.scale_sqrt_n:
        value *= math.sqrt(config.n)
        se *= math.sqrt(config.n)
    return HPoint(
        h=h,
        delta_bar=delta_bar,
        kappa_oracle=kappa_oracle,
        rimr=value,
        se=se,
        degenerate=degenerate,
    )


def run_experiment(config: SimConfig, workers: int = 1) -> tuple[RimrCurve, RimrCurve]:
    """Produce the plug-in and LAM RIMR curves for ``config``.

    ``workers`` only controls process-level parallelism; the output is
    bit-identical for any value because every replication has its own
    derived stream and results are reduced in replication order.
    """
    model = get_model("ex2")
    tasks = [
        (ih, j0, min(j0 + _BLOCK, config.reps))
        for ih in range(len(config.h_grid))
        for j0 in range(0, config.reps, _BLOCK)
    ]
    results: dict[int, list] = {}
    if workers <= 1 or len(tasks) == 1:
        for t, (ih, j0, j1) in enumerate(tasks):
            results[t] = _run_block(config, ih, j0, j1)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {
                pool.submit(_run_block, config, ih, j0, j1): t
                for t, (ih, j0, j1) in enumerate(tasks)
            }
            for fut, t in futures.items():
                results[t] = fut.result()

    per_h_plug: list[list[Optional[float]]] = [[] for _ in config.h_grid]
    per_h_lam: list[list[Optional[float]]] = [[] for _ in config.h_grid]
    for t, (ih, _, _) in enumerate(tasks):
        for d_plug, d_lam in results[t]:
            per_h_plug[ih].append(d_plug)
            per_h_lam[ih].append(d_lam)

    plug_points = []
    lam_points = []
    for ih, h in enumerate(config.h_grid):
        plug_points.append(_curve_point(config, model, h, per_h_plug[ih], "plug-in"))
        lam_points.append(_curve_point(config, model, h, per_h_lam[ih], "lam"))
    return (
        RimrCurve(label="plugin", n=config.n, points=tuple(plug_points)),
        RimrCurve(label="lam", n=config.n, points=tuple(lam_points)),
    )


CSV_COLUMNS = [
    "h",
    "n",
    "delta_bar_plugin",
    "delta_bar_lam",
    "kappa_oracle",
    "rimr_plugin",
    "rimr_lam",
    "se_plugin",
    "se_lam",
    "degenerate_plugin",
    "degenerate_lam",
]


def write_csv(curves: tuple[RimrCurve, RimrCurve], path) -> None:
    """Write both curves as one CSV, rows sorted by h, reals at 10 significant digits."""
    plug, lam = curves
    if [pt.h for pt in plug.points] != [pt.h for pt in lam.points]:
        raise HarnessError("plug-in and LAM curves are not aligned on the same h grid")
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for pp, lp in sorted(zip(plug.points, lam.points), key=lambda pair: pair[0].h):
                writer.writerow(
                    [
                        f"{pp.h:.10g}",
                        plug.n,
                        f"{pp.delta_bar:.10g}",
                        f"{lp.delta_bar:.10g}",
                        f"{pp.kappa_oracle:.10g}",
                        f"{pp.rimr:.10g}",
                        f"{lp.rimr:.10g}",
                        f"{pp.se:.10g}",
                        f"{lp.se:.10g}",
                        pp.degenerate,
                        lp.degenerate,
                    ]
                )
    except OSError as exc:
        raise HarnessError(f"could not write curve CSV to {path}: {exc}") from exc


def read_csv(path) -> list[dict]:
    """Parse a curve CSV back into a list of per-row dicts of floats/ints."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for raw in reader:
            row = {key: float(raw[key]) for key in CSV_COLUMNS if key in raw}
            rows.append(row)
    return rows
