"""Bound maps and their directional derivatives."""

import numpy as np
import pytest

from lamstr import (
    BoundaryPointError,
    ModelMismatchError,
    Theta,
    dtau,
    ex1_bounds,
    ex2_bounds,
    ex3_bounds,
    ex3_psi,
    get_model,
)

RNG = np.random.default_rng(20240811)


def random_theta(kind: str, rng=RNG, interior_margin: float = 0.0) -> Theta:
    k = 3 if kind in ("ex1", "ex2") else 6
    lo, hi = sorted(rng.uniform(-2.0, 2.0, size=2))
    while hi - lo < 0.1:
        lo, hi = sorted(rng.uniform(-2.0, 2.0, size=2))
    vals = np.empty(k)
    n_means = 2 if k == 3 else 4
    m = interior_margin
    vals[:n_means] = rng.uniform(lo + m * (hi - lo), hi - m * (hi - lo), size=n_means)
    vals[n_means:] = rng.uniform(m, 1.0 - m, size=k - n_means)
    return Theta(vals, lo, hi)


class TestBoundsExamples:
    def test_ex1_hand_values(self):
        bp = ex1_bounds(Theta([1.0, 0.0, 0.5], 0.0, 1.0))
        assert bp.lo == pytest.approx(0.0, abs=1e-15)
        assert bp.hi == pytest.approx(1.0, abs=1e-15)
        bp = ex1_bounds(Theta([0.5, 0.5, 0.5], 0.0, 1.0))
        assert (bp.lo, bp.hi) == pytest.approx((-0.5, 0.5), abs=1e-15)

    def test_ex1_width_at_extremes(self):
        for p in (0.1, 0.5, 0.9):
            bp = ex1_bounds(Theta([1.0, 0.0, p], 0.0, 1.0))
            assert bp.width == pytest.approx(1.0, abs=1e-15)

    def test_ex2_reference_point(self):
        bp = ex2_bounds(Theta([2 / 3, 1 / 3, 3 / 4], 0.0, 1.0))
        assert bp.lo == pytest.approx(0.0, abs=1e-12)
        assert bp.hi == pytest.approx(0.5, abs=1e-12)

    def test_ex2_point_identification_at_full_participation(self):
        bp = ex2_bounds(Theta([0.8, 0.3, 1.0], 0.0, 1.0))
        assert bp.lo == bp.hi == pytest.approx(0.5, abs=1e-15)

    def test_ex2_hand_value(self):
        bp = ex2_bounds(Theta([0.5, 0.5, 0.5], 0.0, 1.0))
        assert (bp.lo, bp.hi) == pytest.approx((-0.5, 0.5), abs=1e-15)

    def test_dimension_mismatch(self):
        theta6 = Theta(np.full(6, 0.5), 0.0, 1.0)
        with pytest.raises(ModelMismatchError):
            ex1_bounds(theta6)
        with pytest.raises(ModelMismatchError):
            ex2_bounds(theta6)
        with pytest.raises(ModelMismatchError):
            ex3_bounds(Theta([0.5, 0.5, 0.5], 0.0, 1.0))


class TestWidthIdentities:
    def test_ex1_and_ex2_widths_on_random_thetas(self):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            t1 = random_theta("ex1", rng)
            assert ex1_bounds(t1).width == pytest.approx(t1.y_range, abs=1e-12)
            t2 = random_theta("ex2", rng)
            p = t2.values[2]
            assert ex2_bounds(t2).width == pytest.approx(
                2.0 * t2.y_range * (1.0 - p), abs=1e-12
            )


class TestEx3:
    def test_symmetric_instrument_collapses(self):
        theta = Theta([0.7, 0.7, 0.2, 0.2, 0.4, 0.4], 0.0, 1.0)
        psi_lo, psi_hi = ex3_psi(theta)
        assert np.ptp(psi_lo) == 0.0
        assert np.ptp(psi_hi) == 0.0
        # With both arms identical, the ex3 lower bound is the one-arm bound.
        one_arm = ex1_bounds(Theta([0.7, 0.2, 0.4], 0.0, 1.0))
        bp = ex3_bounds(theta)
        assert bp.lo == pytest.approx(one_arm.lo, abs=1e-15)
        assert bp.hi == pytest.approx(one_arm.hi, abs=1e-15)

    def test_hand_value(self):
        # mu11 = mu10 = 1, mu01 = mu00 = 0, p1 = p0 = 1/2, range [0, 1]:
        # every candidate is 1*(1/2) + 0 - 0 - 1*(1/2) = 0.
        psi_lo, _ = ex3_psi(Theta([1.0, 1.0, 0.0, 0.0, 0.5, 0.5], 0.0, 1.0))
        assert psi_lo == pytest.approx(np.zeros(4), abs=1e-15)
        assert ex3_bounds(Theta([1.0, 1.0, 0.0, 0.0, 0.5, 0.5], 0.0, 1.0)).lo == pytest.approx(
            0.0, abs=1e-15
        )

    def test_candidates_bracket_each_other(self):
        rng = np.random.default_rng(2)
        for _ in range(500):
            theta = random_theta("ex3", rng)
            psi_lo, psi_hi = ex3_psi(theta)
            assert psi_lo.max() <= psi_hi.min() + 1e-12

    def test_sharper_than_single_arm(self):
        # The instrument bounds sit inside the one-arm bounds of either arm.
        rng = np.random.default_rng(3)
        for _ in range(500):
            theta = random_theta("ex3", rng)
            mu11, mu10, mu01, mu00, p1, p0 = theta.values
            bp = ex3_bounds(theta)
            for mu1, mu0, p in ((mu11, mu01, p1), (mu10, mu00, p0)):
                arm = ex1_bounds(Theta([mu1, mu0, p], theta.y_lo, theta.y_hi))
                assert bp.lo >= arm.lo - 1e-12
                assert bp.hi <= arm.hi + 1e-12


def finite_difference(model, theta, b, t):
    base = model.bounds(theta)
    bumped = model.bounds(Theta(theta.values + t * b, theta.y_lo, theta.y_hi))
    return (bumped.lo - base.lo) / t, (bumped.hi - base.hi) / t


class TestDtau:
    def test_zero_direction(self):
        for kind in ("ex1", "ex2", "ex3"):
            model = get_model(kind)
            theta = random_theta(kind, interior_margin=0.05)
            assert dtau(model, theta, np.zeros(model.dim)) == (0.0, 0.0)

    def test_ex2_slope_in_mu1(self):
        model = get_model("ex2")
        theta = Theta([2 / 3, 1 / 3, 3 / 4], 0.0, 1.0)
        d_lo, d_hi = dtau(model, theta, np.array([1.0, 0.0, 0.0]))
        assert d_lo == pytest.approx(0.75, abs=1e-15)
        assert d_hi == pytest.approx(0.75, abs=1e-15)

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            for kind in ("ex1", "ex2", "ex3"):
                model = get_model(kind)
                theta = random_theta(kind, rng, interior_margin=0.05)
                b = rng.standard_normal(model.dim)
                b /= np.linalg.norm(b)
                d_lo, d_hi = dtau(model, theta, b)
                fd_lo, fd_hi = finite_difference(model, theta, b, 1e-6)
                scale = max(1.0, abs(d_lo), abs(d_hi))
                assert abs(fd_lo - d_lo) <= 1e-4 * scale
                assert abs(fd_hi - d_hi) <= 1e-4 * scale

    def test_kink_direction_along_shrinking_steps(self):
        # Symmetric instrument: all four candidates tie exactly.
        model = get_model("ex3")
        theta = Theta([0.6, 0.6, 0.3, 0.3, 0.5, 0.5], 0.0, 1.0)
        rng = np.random.default_rng(5)
        for _ in range(20):
            b = rng.standard_normal(6)
            b /= np.linalg.norm(b)
            d_lo, d_hi = dtau(model, theta, b)
            errs_lo, errs_hi = [], []
            for t in (1e-3, 1e-4, 1e-5):
                fd_lo, fd_hi = finite_difference(model, theta, b, t)
                errs_lo.append(abs(fd_lo - d_lo))
                errs_hi.append(abs(fd_hi - d_hi))
            assert errs_lo[-1] <= 1e-3 and errs_hi[-1] <= 1e-3
            assert errs_lo[0] >= errs_lo[-1] - 1e-12
            assert errs_hi[0] >= errs_hi[-1] - 1e-12

    def test_positive_homogeneity(self):
        rng = np.random.default_rng(6)
        for kind in ("ex1", "ex2", "ex3"):
            model = get_model(kind)
            for _ in range(100):
                theta = random_theta(kind, rng, interior_margin=0.05)
                b = rng.standard_normal(model.dim)
                t = rng.uniform(0.0, 5.0)
                d_lo, d_hi = dtau(model, theta, b)
                dt_lo, dt_hi = dtau(model, theta, t * b)
                assert dt_lo == pytest.approx(t * d_lo, abs=1e-10)
                assert dt_hi == pytest.approx(t * d_hi, abs=1e-10)

    def test_lipschitz_bound(self):
        rng = np.random.default_rng(7)
        for kind in ("ex1", "ex2", "ex3"):
            model = get_model(kind)
            for _ in range(100):
                theta = random_theta(kind, rng, interior_margin=0.05)
                c = model.lipschitz(theta)
                b1 = rng.standard_normal(model.dim)
                b2 = rng.standard_normal(model.dim)
                d1 = dtau(model, theta, b1)
                d2 = dtau(model, theta, b2)
                gap = np.linalg.norm(b1 - b2)
                assert abs(d1[0] - d2[0]) <= c * gap + 1e-10
                assert abs(d1[1] - d2[1]) <= c * gap + 1e-10

    def test_boundary_point_rejected(self):
        model = get_model("ex2")
        with pytest.raises(BoundaryPointError):
            dtau(model, Theta([0.5, 0.5, 1.0], 0.0, 1.0), np.ones(3))
        with pytest.raises(BoundaryPointError):
            dtau(model, Theta([1.0, 0.5, 0.5], 0.0, 1.0), np.ones(3))

    def test_direction_length_checked(self):
        model = get_model("ex1")
        with pytest.raises(ModelMismatchError):
            dtau(model, Theta([0.5, 0.5, 0.5], 0.0, 1.0), np.ones(4))


class TestTheta:
    def test_invalid_range(self):
        with pytest.raises(ModelMismatchError):
            Theta([0.5, 0.5, 0.5], 1.0, 0.0)

    def test_mean_outside_range(self):
        with pytest.raises(ModelMismatchError):
            Theta([1.5, 0.5, 0.5], 0.0, 1.0)

    def test_probability_outside_unit_interval(self):
        with pytest.raises(ModelMismatchError):
            Theta([0.5, 0.5, 1.5], 0.0, 1.0)

    def test_unknown_model_kind(self):
        with pytest.raises(ModelMismatchError):
            get_model("ex9")
