"""Nested min-max search for the adjustment term of the LAM treatment rule.

The solver minimizes, over a shift ``w`` in a search box, the worst case
over states ``s`` in a support box of a Monte Carlo estimate of the local
regret criterion. The same draw set is reused for every (w, s) pair
(common random numbers), which makes the whole search deterministic given
the draws. The inner supremum is a grid scan plus one halved-step
refinement; the outer infimum is a coarse grid followed by Nelder-Mead
descent from the best grid point.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import optimize

from .errors import DegenerateRegionError, DomainError, ModelMismatchError
from .models import IdModel, Theta
from .rules import KappaSpec, kappa, kappa_prime_from_derivatives

PROB_CLIP = 1e-9

# A treatment rule is just a probability of assigning treatment 1.
TreatmentProb = float


def truncate(x, level: float):
    """Clamp ``x`` into [-level, level]; identity inside the band."""
    if level <= 0:
        raise DomainError(f"truncation level must be positive, got {level}")
    out = np.clip(np.asarray(x, dtype=float), -level, level)
    return float(out) if out.ndim == 0 else out


def _half_widths(box, k: int) -> np.ndarray:
    hw = np.asarray(box, dtype=float)
    if hw.ndim == 0:
        hw = np.full(k, float(hw))
    if hw.shape != (k,):
        raise ModelMismatchError(f"box must be a scalar or length-{k} vector of half-widths")
    if np.any(hw < 0):
        raise DomainError("box half-widths must be nonnegative")
    return hw


@dataclass
class AdjustProblem:
    """Inputs of the adjustment search.

    ``support`` and ``search`` are per-coordinate half-widths of the
    symmetric boxes for the inner supremum and the outer minimization.
    ``coef_lo``/``coef_hi`` default to the spec's tau_lo^- and tau_hi^+.
    """

    spec: KappaSpec
    draws: np.ndarray
    support: np.ndarray | float
    search: np.ndarray | float
    trunc: float = 1000.0
    s_points: int = 15
    w_points: int = 9
    coef_lo: Optional[float] = None
    coef_hi: Optional[float] = None
    tol_w: float = 1e-3
    max_evals: int = 5_000_000

    def __post_init__(self) -> None:
        self.draws = np.atleast_2d(np.asarray(self.draws, dtype=float))
        if self.draws.shape[0] < 1:
            raise DomainError("need at least one Monte Carlo draw")
        k = self.draws.shape[1]
        self.support = _half_widths(self.support, k)
        self.search = _half_widths(self.search, k)
        if self.trunc <= 0:
            raise DomainError(f"truncation level must be positive, got {self.trunc}")
        if self.s_points < 1 or self.w_points < 1:
            raise DomainError("grid resolutions must be at least 1 point per axis")
        if self.coef_lo is None:
            self.coef_lo = self.spec.coef_lo
        if self.coef_hi is None:
            self.coef_hi = self.spec.coef_hi

    @property
    def dim(self) -> int:
        return self.draws.shape[1]


@dataclass
class AdjustResult:
    """Output of the adjustment search."""

    w_hat: np.ndarray
    objective: float
    argmax_s: np.ndarray
    evaluations: int
    converged: bool = True


def _axis_nodes(half_widths: np.ndarray, points: int) -> list[np.ndarray]:
    nodes = []
    for hw in half_widths:
        if hw == 0.0 or points == 1:
            nodes.append(np.zeros(1))
        else:
            nodes.append(np.linspace(-hw, hw, points))
    return nodes


def _box_grid(half_widths: np.ndarray, points: int) -> np.ndarray:
    nodes = _axis_nodes(half_widths, points)
    mesh = np.meshgrid(*nodes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


class _Engine:
    """Shared state for repeated objective evaluations on one problem."""

    def __init__(self, problem: AdjustProblem):
        self.p = problem
        spec = problem.spec
        if spec.denom == 0.0:
            raise DegenerateRegionError("kappa derivative undefined at the estimated base point")
        self.evaluations = 0
        self.linear = spec.is_linear
        if self.linear:
            self.draw_lo = problem.draws @ spec.d_lo_grad
            self.draw_hi = problem.draws @ spec.d_hi_grad

    def averages(self, w: np.ndarray, s_block: np.ndarray) -> np.ndarray:
        """Mean over draws of the truncated derivative difference, one value per s row."""
        p, spec = self.p, self.p.spec
        self.evaluations += s_block.shape[0]
        if self.linear:
            s_lo = s_block @ spec.d_lo_grad
            s_hi = s_block @ spec.d_hi_grad
            base = kappa_prime_from_derivatives(spec, s_lo, s_hi)
            w_lo = float(w @ spec.d_lo_grad)
            w_hi = float(w @ spec.d_hi_grad)
            shifted = kappa_prime_from_derivatives(
                spec,
                w_lo + s_lo[:, None] + self.draw_lo[None, :],
                w_hi + s_hi[:, None] + self.draw_hi[None, :],
            )
        else:
            pts = p.draws[None, :, :] + w[None, None, :] + s_block[:, None, :]
            base = kappa_prime_from_derivatives(spec, spec.d_lo(s_block), spec.d_hi(s_block))
            shifted = kappa_prime_from_derivatives(spec, spec.d_lo(pts), spec.d_hi(pts))
        clipped = np.clip(shifted - np.atleast_1d(base)[:, None], -p.trunc, p.trunc)
        return clipped.mean(axis=1)

    def objectives(self, w: np.ndarray, s_block: np.ndarray) -> np.ndarray:
        avg = self.averages(w, s_block)
        return np.maximum(self.p.coef_lo * avg, -self.p.coef_hi * avg)

    def sup_over_grid(self, w: np.ndarray) -> tuple[float, np.ndarray]:
        """Grid scan of the support box plus one halved-step refinement."""
        p = self.p
        grid = _box_grid(p.support, p.s_points)
        vals = self.objectives(w, grid)
        best = int(np.argmax(vals))
        best_val, best_s = float(vals[best]), grid[best]
        steps = np.where(p.support > 0, 2.0 * p.support / max(p.s_points - 1, 1), 0.0)
        if np.any(steps > 0):
            offsets = np.array(list(itertools.product((-0.5, 0.0, 0.5), repeat=p.dim)))
            cand = best_s[None, :] + offsets * steps[None, :]
            cand = np.clip(cand, -p.support, p.support)
            cvals = self.objectives(w, cand)
            cbest = int(np.argmax(cvals))
            if cvals[cbest] > best_val:
                best_val, best_s = float(cvals[cbest]), cand[cbest]
        return best_val, best_s


def mc_objective(problem: AdjustProblem, w: np.ndarray, s: np.ndarray) -> float:
    """The criterion at a single (w, s): the larger of the two coefficient-weighted averages."""
    w = np.asarray(w, dtype=float).reshape(-1)
    s = np.asarray(s, dtype=float).reshape(-1)
    if w.size != problem.dim or s.size != problem.dim:
        raise ModelMismatchError(f"w and s must have length {problem.dim}")
    return float(_Engine(problem).objectives(w, s[None, :])[0])


def sup_over_support(problem: AdjustProblem, w: np.ndarray) -> tuple[float, np.ndarray]:
    """Worst state in the support box for a given shift ``w``."""
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.size != problem.dim:
        raise ModelMismatchError(f"w must have length {problem.dim}")
    return _Engine(problem).sup_over_grid(w)


def solve_adjustment(problem: AdjustProblem) -> AdjustResult:
    """Minimize the worst-case criterion over the search box.

    Coarse grid first (always including w = 0), then Nelder-Mead descent
    from the best grid point, every candidate scored by the full inner
    supremum. Grid ties are broken toward the smallest ||w||. If the
    evaluation budget runs out the incumbent is returned with
    ``converged=False``.
    """
    engine = _Engine(problem)
    p = problem
    pairs_per_sup = _box_grid(p.support, p.s_points).shape[0] + (
        3**p.dim if np.any(p.support > 0) else 0
    )

    w_grid = _box_grid(p.search, p.w_points)
    if not np.any(np.all(w_grid == 0.0, axis=1)):
        w_grid = np.vstack([np.zeros(p.dim), w_grid])

    budget_w = max(int(p.max_evals) // max(pairs_per_sup, 1), 1)
    n_scored = min(w_grid.shape[0], budget_w)
    scored = [engine.sup_over_grid(w) for w in w_grid[:n_scored]]
    vals = np.array([v for v, _ in scored])
    norms = np.linalg.norm(w_grid[:n_scored], axis=1)
    order = np.lexsort((norms, vals))
    best = int(order[0])
    best_val, best_s = scored[best]
    best_w = w_grid[best]
    ran_out = n_scored < w_grid.shape[0]

    # Descend only along coordinates whose box has positive width.
    free = np.where(p.search > 0)[0]
    nm_budget = budget_w - n_scored
    if free.size > 0 and nm_budget > 2 * (free.size + 1) and not ran_out:
        steps = 2.0 * p.search[free] / max(p.w_points - 1, 1)
        x0 = best_w[free]
        simplex = [x0.copy()]
        for i, axis in enumerate(free):
            vert = x0.copy()
            delta = 0.5 * steps[i]
            vert[i] = vert[i] + delta if vert[i] + delta <= p.search[axis] else vert[i] - delta
            simplex.append(vert)

        cache: dict[tuple, tuple[float, np.ndarray]] = {}

        def embed(reduced: np.ndarray) -> np.ndarray:
            full = best_w.copy()
            full[free] = np.clip(reduced, -p.search[free], p.search[free])
            return full

        def score(reduced: np.ndarray) -> float:
            full = embed(reduced)
            key = tuple(full.tolist())
            if key not in cache:
                cache[key] = engine.sup_over_grid(full)
            return cache[key][0]

        res = optimize.minimize(
            score,
            x0,
            method="Nelder-Mead",
            bounds=[(-p.search[axis], p.search[axis]) for axis in free],
            options={
                "initial_simplex": np.array(simplex),
                # Terminate on simplex size alone: a function-value criterion
                # is meaningless on a Monte Carlo surface.
                "xatol": p.tol_w * float(2.0 * p.search.max()),
                "fatol": math.inf,
                "maxfev": nm_budget,
                "disp": False,
            },
        )
        nm_w = embed(np.asarray(res.x, dtype=float))
        key = tuple(nm_w.tolist())
        nm_val, nm_s = cache[key] if key in cache else engine.sup_over_grid(nm_w)
        if nm_val < best_val:
            best_val, best_s, best_w = nm_val, nm_s, nm_w
        ran_out = not res.success

    return AdjustResult(
        w_hat=best_w,
        objective=best_val,
        argmax_s=best_s,
        evaluations=engine.evaluations,
        converged=not ran_out,
    )


def clamp_theta(values: np.ndarray, model: IdModel, y_lo: float, y_hi: float) -> Theta:
    """Clamp a raw parameter vector into the admissible space of ``model``."""
    vals = np.asarray(values, dtype=float).reshape(-1).copy()
    prob = np.zeros(vals.size, dtype=bool)
    prob[list(model.prob_indices)] = True
    vals[prob] = np.clip(vals[prob], PROB_CLIP, 1.0 - PROB_CLIP)
    vals[~prob] = np.clip(vals[~prob], y_lo, y_hi)
    return Theta(vals, y_lo, y_hi)


def plug_in_str(theta_hat: Theta, model: IdModel) -> TreatmentProb:
    """Optimal rule evaluated at the unadjusted estimate."""
    bp = model.bounds(theta_hat)
    return kappa(bp.lo, bp.hi)


def lam_str(theta_hat: Theta, w_hat: np.ndarray, n: int, model: IdModel) -> TreatmentProb:
    """Optimal rule at the adjusted estimate ``theta_hat + w_hat / sqrt(n)``.

    The adjusted vector is clamped componentwise back into the parameter
    space (probabilities to [1e-9, 1 - 1e-9], means to the outcome range)
    before evaluating the bounds.
    """
    if n < 1:
        raise DomainError(f"sample size must be at least 1, got {n}")
    w_hat = np.asarray(w_hat, dtype=float).reshape(-1)
    if w_hat.size != theta_hat.dim:
        raise ModelMismatchError(f"adjustment must have length {theta_hat.dim}")
    adjusted = theta_hat.values + w_hat / math.sqrt(n)
    return plug_in_str(clamp_theta(adjusted, model, theta_hat.y_lo, theta_hat.y_hi), model)
