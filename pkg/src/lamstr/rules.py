"""The minimax-regret optimal rule and its directional-derivative calculus.

``kappa`` maps identification-region bounds to the treatment probability
that equalizes worst-case regret from over- and under-treatment. Its
directional derivative ``kappa_prime`` comes in two flavours: the exact
derivative at a known base point, and the estimated version which replaces
the kink indicator by an epsilon-threshold so that a noisy plug-in base
point still selects the right branch with high probability.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DegenerateRegionError, DomainError, ModelMismatchError
from .models import IdModel, Theta

MODE_EXACT = "exact"
MODE_ESTIMATED = "estimated"


def pos_part(x):
    """max{x, 0}."""
    out = np.maximum(np.asarray(x, dtype=float), 0.0)
    return float(out) if out.ndim == 0 else out


def neg_part(x):
    """max{-x, 0}, so that pos_part(x) - neg_part(x) == x."""
    out = np.maximum(-np.asarray(x, dtype=float), 0.0)
    return float(out) if out.ndim == 0 else out


def kappa(tau_lo: float, tau_hi: float) -> float:
    """Optimal treatment probability ``tau_hi^+ / (tau_hi^+ + tau_lo^-)``.

    Equals 1 when the region is nonnegative, 0 when nonpositive, and the
    interior balancing point when the region straddles zero. The degenerate
    region {0} has no well-defined rule and raises.
    """
    num = pos_part(tau_hi)
    den = num + neg_part(tau_lo)
    if den == 0.0:
        raise DegenerateRegionError("tau_lo^- = tau_hi^+ = 0: optimal rule undefined")
    return num / den


def minimax_value(tau_lo: float, tau_hi: float) -> float:
    """Worst-case regret of the optimal rule, ``tau_hi^+ tau_lo^- / (tau_hi^+ + tau_lo^-)``."""
    up = pos_part(tau_hi)
    down = neg_part(tau_lo)
    if up + down == 0.0:
        raise DegenerateRegionError("tau_lo^- = tau_hi^+ = 0: minimax value undefined")
    return up * down / (up + down)


def m_prime(y, x):
    """Directional derivative of t -> max{t, 0} at ``y`` applied to ``x``.

    Identity for y > 0, max{x, 0} exactly at the kink y == 0, zero for y < 0.
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    out = np.where(y > 0.0, x, np.where(y == 0.0, np.maximum(x, 0.0), 0.0))
    return float(out) if out.ndim == 0 else out


def m_hat(y, x, eps: float):
    """Estimated kink derivative: branches switch at ``|y| <= eps`` instead of y == 0."""
    if eps <= 0:
        raise DomainError(f"eps must be positive, got {eps}")
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    out = np.where(y > eps, x, np.where(np.abs(y) <= eps, np.maximum(x, 0.0), 0.0))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class KappaSpec:
    """Everything needed to evaluate the derivative of ``kappa`` at one base point.

    ``d_lo``/``d_hi`` are the directional derivatives of the bound maps;
    they must accept arrays of shape (..., k) and return shape (...).
    When the derivatives are linear, ``d_lo_grad``/``d_hi_grad`` hold their
    gradient vectors, which downstream solvers exploit for batching.
    ``eps`` is the branch threshold used in estimated mode only.
    """

    tau_lo: float
    tau_hi: float
    d_lo: Callable[[np.ndarray], np.ndarray]
    d_hi: Callable[[np.ndarray], np.ndarray]
    mode: str = MODE_EXACT
    eps: float = 0.0
    d_lo_grad: Optional[np.ndarray] = None
    d_hi_grad: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if self.mode not in (MODE_EXACT, MODE_ESTIMATED):
            raise DomainError(f"mode must be '{MODE_EXACT}' or '{MODE_ESTIMATED}'")
        if self.tau_lo > self.tau_hi:
            raise DomainError(f"need tau_lo <= tau_hi, got ({self.tau_lo}, {self.tau_hi})")
        if self.mode == MODE_EXACT and not self.tau_lo < self.tau_hi:
            raise DomainError("exact mode requires tau_lo < tau_hi strictly")
        if self.mode == MODE_ESTIMATED and self.eps <= 0:
            raise DomainError("estimated mode requires eps > 0")
        for name in ("d_lo_grad", "d_hi_grad"):
            g = getattr(self, name)
            if g is not None:
                object.__setattr__(self, name, np.asarray(g, dtype=float).reshape(-1))

    @property
    def coef_lo(self) -> float:
        """tau_lo^-, the worst-case over-treatment coefficient."""
        return neg_part(self.tau_lo)

    @property
    def coef_hi(self) -> float:
        """tau_hi^+, the worst-case under-treatment coefficient."""
        return pos_part(self.tau_hi)

    @property
    def denom(self) -> float:
        return (self.coef_hi + self.coef_lo) ** 2

    @property
    def is_linear(self) -> bool:
        return self.d_lo_grad is not None and self.d_hi_grad is not None


def linear_spec(
    tau_lo: float,
    tau_hi: float,
    g_lo: np.ndarray,
    g_hi: np.ndarray,
    mode: str = MODE_EXACT,
    eps: float = 0.0,
) -> KappaSpec:
    """Spec whose bound derivatives are the linear maps b -> g_lo.b, b -> g_hi.b."""
    g_lo = np.asarray(g_lo, dtype=float).reshape(-1)
    g_hi = np.asarray(g_hi, dtype=float).reshape(-1)
    if g_lo.shape != g_hi.shape:
        raise ModelMismatchError("gradient vectors must have equal length")
    return KappaSpec(
        tau_lo=tau_lo,
        tau_hi=tau_hi,
        d_lo=lambda b: np.asarray(b, dtype=float) @ g_lo,
        d_hi=lambda b: np.asarray(b, dtype=float) @ g_hi,
        mode=mode,
        eps=eps,
        d_lo_grad=g_lo,
        d_hi_grad=g_hi,
    )


def spec_from_model(
    model: IdModel,
    theta: Theta,
    mode: str = MODE_EXACT,
    eps: float = 0.0,
) -> KappaSpec:
    """Build the derivative spec of ``kappa`` at ``theta`` under ``model``.

    Estimated mode is the feasible construction: bounds and gradients are
    evaluated at an estimate of the base point and the kink indicator uses
    the threshold ``eps``.
    """
    bp = model.bounds(theta)
    g_lo, g_hi = model.gradients(theta)
    return linear_spec(bp.lo, bp.hi, g_lo, g_hi, mode=mode, eps=eps)


def _kink_branch(y: float, x: np.ndarray, mode: str, eps: float) -> np.ndarray:
    """m_prime / m_hat for scalar branch point y, avoiding full-array selects."""
    if mode == MODE_EXACT:
        if y > 0.0:
            return x
        if y == 0.0:
            return np.maximum(x, 0.0)
        return np.zeros_like(x)
    if y > eps:
        return x
    if abs(y) <= eps:
        return np.maximum(x, 0.0)
    return np.zeros_like(x)


def kappa_prime_from_derivatives(spec: KappaSpec, d_lo_vals, d_hi_vals):
    """Evaluate the kappa derivative given precomputed bound-derivative values."""
    den = spec.denom
    if den == 0.0:
        raise DegenerateRegionError("tau_lo^- = tau_hi^+ = 0: kappa derivative undefined")
    d_lo_vals = np.asarray(d_lo_vals, dtype=float)
    d_hi_vals = np.asarray(d_hi_vals, dtype=float)
    # Sides with a zero coefficient contribute nothing and are skipped.
    out = 0.0
    if spec.coef_lo != 0.0:
        out = (spec.coef_lo / den) * _kink_branch(spec.tau_hi, d_hi_vals, spec.mode, spec.eps)
    if spec.coef_hi != 0.0:
        down = _kink_branch(-spec.tau_lo, -d_lo_vals, spec.mode, spec.eps)
        out = out - (spec.coef_hi / den) * down
    return float(out) if np.ndim(out) == 0 else out


def kappa_prime(spec: KappaSpec, b: np.ndarray):
    """Directional derivative of ``kappa`` along ``b`` (shape (..., k) allowed)."""
    b = np.asarray(b, dtype=float)
    return kappa_prime_from_derivatives(spec, spec.d_lo(b), spec.d_hi(b))


def translation_direction(spec: KappaSpec, v: float) -> np.ndarray:
    """Direction ``v_tilde`` with d_lo(v_tilde) = d_hi(v_tilde) = v * (tau_hi^+ + tau_lo^-).

    Solved by least squares on the stacked gradient rows; only available for
    linear specs. In the fully differentiable case this shift moves
    ``kappa_prime`` by exactly ``v``.
    """
    if not spec.is_linear:
        raise ModelMismatchError("translation direction needs gradient vectors on the spec")
    target = v * (spec.coef_hi + spec.coef_lo)
    stacked = np.vstack([spec.d_lo_grad, spec.d_hi_grad])
    rhs = np.array([target, target])
    v_tilde, _, _, _ = np.linalg.lstsq(stacked, rhs, rcond=None)
    if not np.allclose(stacked @ v_tilde, rhs, atol=1e-9):
        raise ModelMismatchError("gradients cannot realize a common shift (not surjective)")
    return v_tilde
