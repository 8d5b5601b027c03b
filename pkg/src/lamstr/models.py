"""Identification-region models for the average treatment effect.

Three stock models are provided:

* ``ex1`` -- observational study, empirical evidence alone (k = 3,
  parameters (mu1, mu0, p) with p the treated share),
* ``ex2`` -- experiment with non-random participation (k = 3, parameters
  (mu1, mu0, p) with p the participation share),
* ``ex3`` -- binary mean-independent instrument (k = 6, parameters
  (mu11, mu10, mu01, mu00, p1, p0)).

Each model exposes the interval bounds of the identification region and
the directional derivatives of the bound maps at interior points.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import BoundaryPointError, ModelMismatchError

# Ties in the ex3 argmax/argmin sets are declared at this tolerance,
# scaled by max(1, |bound value|).
TOL_TIE = 1e-10


class ModelKind(str, enum.Enum):
    EX1 = "ex1"
    EX2 = "ex2"
    EX3 = "ex3"


_MODEL_DIM = {ModelKind.EX1: 3, ModelKind.EX2: 3, ModelKind.EX3: 6}
# Indices of probability components (the rest are outcome means).
_PROB_IDX = {ModelKind.EX1: (2,), ModelKind.EX2: (2,), ModelKind.EX3: (4, 5)}


@dataclass(frozen=True)
class Theta:
    """Intermediate parameter vector together with the outcome range."""

    values: np.ndarray
    y_lo: float = 0.0
    y_hi: float = 1.0

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float).reshape(-1)
        object.__setattr__(self, "values", vals)
        if not self.y_lo < self.y_hi:
            raise ModelMismatchError(f"need y_lo < y_hi, got [{self.y_lo}, {self.y_hi}]")
        if vals.size not in (3, 6):
            raise ModelMismatchError(f"theta must have 3 or 6 components, got {vals.size}")
        k = vals.size
        prob_idx = (2,) if k == 3 else (4, 5)
        for i, v in enumerate(vals):
            if i in prob_idx:
                if not 0.0 <= v <= 1.0:
                    raise ModelMismatchError(f"probability component {i} = {v} outside [0, 1]")
            elif not self.y_lo <= v <= self.y_hi:
                raise ModelMismatchError(
                    f"mean component {i} = {v} outside [{self.y_lo}, {self.y_hi}]"
                )

    @property
    def dim(self) -> int:
        return self.values.size

    @property
    def y_range(self) -> float:
        return self.y_hi - self.y_lo


@dataclass(frozen=True)
class BoundsPair:
    """Lower and upper bound of the identification region."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not self.lo <= self.hi + 1e-12:
            raise ModelMismatchError(f"inverted bounds: lo={self.lo} > hi={self.hi}")

    @property
    def width(self) -> float:
        return self.hi - self.lo


def _check(theta: Theta, kind: ModelKind) -> None:
    if theta.dim != _MODEL_DIM[kind]:
        raise ModelMismatchError(
            f"model {kind.value} needs k={_MODEL_DIM[kind]}, got theta of length {theta.dim}"
        )


def ex1_bounds(theta: Theta) -> BoundsPair:
    """Sharp bounds from empirical evidence alone; the width is always y_hi - y_lo."""
    _check(theta, ModelKind.EX1)
    mu1, mu0, p = theta.values
    lo = (mu1 - theta.y_hi) * p + (theta.y_lo - mu0) * (1.0 - p)
    hi = (mu1 - theta.y_lo) * p + (theta.y_hi - mu0) * (1.0 - p)
    return BoundsPair(lo, hi)


def ex2_bounds(theta: Theta) -> BoundsPair:
    """Sharp bounds under non-random participation; the width is 2*(y_hi - y_lo)*(1 - p)."""
    _check(theta, ModelKind.EX2)
    mu1, mu0, p = theta.values
    spread = (theta.y_hi - theta.y_lo) * (1.0 - p)
    mid = (mu1 - mu0) * p
    return BoundsPair(mid - spread, mid + spread)


def ex3_psi(theta: Theta) -> tuple[np.ndarray, np.ndarray]:
    """The four candidate lower bounds (inside max) and upper bounds (inside min)."""
    _check(theta, ModelKind.EX3)
    mu11, mu10, mu01, mu00, p1, p0 = theta.values
    y_lo, y_hi = theta.y_lo, theta.y_hi
    # Treated-mean candidates per instrument arm, control-mean candidates per arm.
    lo_t = np.array([mu11 * p1 + y_lo * (1.0 - p1), mu10 * p0 + y_lo * (1.0 - p0)])
    hi_t = np.array([mu11 * p1 + y_hi * (1.0 - p1), mu10 * p0 + y_hi * (1.0 - p0)])
    lo_c = np.array([mu01 * (1.0 - p1) + y_lo * p1, mu00 * (1.0 - p0) + y_lo * p0])
    hi_c = np.array([mu01 * (1.0 - p1) + y_hi * p1, mu00 * (1.0 - p0) + y_hi * p0])
    # Row order: (arm for treated, arm for control) = (1,1), (1,0), (0,1), (0,0).
    psi_lo = np.array([lo_t[0] - hi_c[0], lo_t[0] - hi_c[1], lo_t[1] - hi_c[0], lo_t[1] - hi_c[1]])
    psi_hi = np.array([hi_t[0] - lo_c[0], hi_t[0] - lo_c[1], hi_t[1] - lo_c[0], hi_t[1] - lo_c[1]])
    return psi_lo, psi_hi


def ex3_bounds(theta: Theta) -> BoundsPair:
    """Sharp bounds with a binary mean-independent instrument."""
    psi_lo, psi_hi = ex3_psi(theta)
    return BoundsPair(float(psi_lo.max()), float(psi_hi.min()))


def _ex3_psi_gradients(theta: Theta) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of the four lower-/upper-bound candidates, rows matching ex3_psi."""
    mu11, mu10, mu01, mu00, p1, p0 = theta.values
    y_lo, y_hi = theta.y_lo, theta.y_hi
    g_lo = np.zeros((4, 6))
    g_hi = np.zeros((4, 6))
    for row, (a, b) in enumerate([(0, 0), (0, 1), (1, 0), (1, 1)]):
        # arm a supplies the treated mean, arm b the control mean
        mu_t = mu11 if a == 0 else mu10
        mu_c = mu01 if b == 0 else mu00
        g_lo[row, 0 if a == 0 else 1] = theta.values[4 + a]
        g_lo[row, 2 if b == 0 else 3] = -(1.0 - theta.values[4 + b])
        g_lo[row, 4 + a] += mu_t - y_lo
        g_lo[row, 4 + b] += mu_c - y_hi
        g_hi[row, 0 if a == 0 else 1] = theta.values[4 + a]
        g_hi[row, 2 if b == 0 else 3] = -(1.0 - theta.values[4 + b])
        g_hi[row, 4 + a] += mu_t - y_hi
        g_hi[row, 4 + b] += mu_c - y_lo
    return g_lo, g_hi


def _require_interior(theta: Theta, kind: ModelKind) -> None:
    prob_idx = _PROB_IDX[kind]
    for i, v in enumerate(theta.values):
        if i in prob_idx:
            if not 0.0 < v < 1.0:
                raise BoundaryPointError(f"probability component {i} = {v} on the boundary")
        elif not theta.y_lo < v < theta.y_hi:
            raise BoundaryPointError(f"mean component {i} = {v} on the outcome-range boundary")


@dataclass(frozen=True)
class IdModel:
    """An identification model: bound maps plus their directional derivatives."""

    kind: ModelKind

    @property
    def dim(self) -> int:
        return _MODEL_DIM[self.kind]

    @property
    def prob_indices(self) -> tuple[int, ...]:
        return _PROB_IDX[self.kind]

    def bounds(self, theta: Theta) -> BoundsPair:
        if self.kind is ModelKind.EX1:
            return ex1_bounds(theta)
        if self.kind is ModelKind.EX2:
            return ex2_bounds(theta)
        return ex3_bounds(theta)

    def gradients(self, theta: Theta) -> tuple[np.ndarray, np.ndarray]:
        """Gradient vectors (g_lo, g_hi) of the bound maps at ``theta``.

        For ex3 the bound maps are max/min compositions; the gradient is
        defined only where the argmax/argmin is unique, otherwise a
        BoundaryPointError-free ModelMismatchError is raised and callers
        should fall back to ``dtau``.
        """
        _check(theta, self.kind)
        mu = theta.values
        if self.kind is ModelKind.EX1:
            mu1, mu0, p = mu
            slope_p = mu1 + mu0 - theta.y_lo - theta.y_hi
            g_lo = np.array([p, -(1.0 - p), slope_p])
            return g_lo, g_lo.copy()
        if self.kind is ModelKind.EX2:
            mu1, mu0, p = mu
            g_lo = np.array([p, -p, (mu1 - mu0) + theta.y_range])
            g_hi = np.array([p, -p, (mu1 - mu0) - theta.y_range])
            return g_lo, g_hi
        psi_lo, psi_hi = ex3_psi(theta)
        sel_lo = _tie_set(psi_lo, largest=True)
        sel_hi = _tie_set(psi_hi, largest=False)
        if len(sel_lo) > 1 or len(sel_hi) > 1:
            raise ModelMismatchError("ex3 bound gradient undefined at an argmax/argmin tie")
        g_lo, g_hi = _ex3_psi_gradients(theta)
        return g_lo[sel_lo[0]], g_hi[sel_hi[0]]

    def dtau(self, theta0: Theta, b: np.ndarray) -> tuple[float, float]:
        return dtau(self, theta0, b)

    def lipschitz(self, theta: Theta) -> float:
        """Analytic bound on the Lipschitz constants of both derivative maps.

        Sum of componentwise suprema of |gradient| over the parameter space;
        valid for any interior base point with this outcome range.
        """
        r = theta.y_range
        if self.kind is ModelKind.EX1:
            return 2.0 + r
        return 2.0 + 2.0 * r


def _tie_set(psi: np.ndarray, largest: bool) -> list[int]:
    ref = psi.max() if largest else psi.min()
    tol = TOL_TIE * max(1.0, abs(ref))
    return [j for j, v in enumerate(psi) if abs(v - ref) <= tol]


def dtau(model: IdModel, theta0: Theta, b: np.ndarray) -> tuple[float, float]:
    """Directional derivatives (d_lo, d_hi) of the bound maps at ``theta0`` along ``b``.

    ``theta0`` must be interior: the derivative formulas do not extend to
    boundary points. For ex3 the derivative of the lower bound is the max of
    the tied candidate gradients applied to ``b`` (min for the upper bound).
    """
    _check(theta0, model.kind)
    b = np.asarray(b, dtype=float).reshape(-1)
    if b.size != model.dim:
        raise ModelMismatchError(f"direction must have length {model.dim}, got {b.size}")
    _require_interior(theta0, model.kind)
    if model.kind is not ModelKind.EX3:
        g_lo, g_hi = model.gradients(theta0)
        return float(g_lo @ b), float(g_hi @ b)
    psi_lo, psi_hi = ex3_psi(theta0)
    g_lo, g_hi = _ex3_psi_gradients(theta0)
    d_lo = max(float(g_lo[j] @ b) for j in _tie_set(psi_lo, largest=True))
    d_hi = min(float(g_hi[j] @ b) for j in _tie_set(psi_hi, largest=False))
    return d_lo, d_hi


def get_model(kind: str | ModelKind) -> IdModel:
    """Look up a stock model by name ('ex1', 'ex2', 'ex3')."""
    if isinstance(kind, ModelKind):
        return IdModel(kind)
    try:
        return IdModel(ModelKind(kind.lower()))
    except ValueError:
        raise ModelMismatchError(f"unknown model kind {kind!r}; expected ex1, ex2 or ex3") from None
