"""Optimal rule, kink derivatives, and their regularity properties."""

import numpy as np
import pytest

from lamstr import (
    DegenerateRegionError,
    DomainError,
    kappa,
    kappa_prime,
    linear_spec,
    m_hat,
    m_prime,
    minimax_value,
    neg_part,
    pos_part,
    translation_direction,
)
from lamstr.rules import MODE_ESTIMATED, MODE_EXACT, KappaSpec


def random_linear_spec(rng, kink: bool = False, k: int = 3):
    """Spec with random gradients; tau straddles zero, or sits at the kink tau_lo = 0."""
    tau_hi = rng.uniform(0.2, 2.0)
    tau_lo = 0.0 if kink else -rng.uniform(0.2, 2.0)
    g_lo = rng.standard_normal(k)
    g_hi = rng.standard_normal(k)
    return linear_spec(tau_lo, tau_hi, g_lo, g_hi)


class TestParts:
    @pytest.mark.parametrize("x,pos,neg", [(0.0, 0.0, 0.0), (3.0, 3.0, 0.0), (-2.0, 0.0, 2.0)])
    def test_values(self, x, pos, neg):
        assert pos_part(x) == pos
        assert neg_part(x) == neg

    def test_decomposition(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(100)
        assert pos_part(x) - neg_part(x) == pytest.approx(x)


class TestKappa:
    def test_examples(self):
        assert kappa(-1.0, 1.0) == pytest.approx(0.5)
        assert kappa(0.2, 0.5) == 1.0
        assert kappa(-1.0, 3.0) == pytest.approx(0.75)

    def test_sign_regimes(self):
        assert kappa(-0.5, -0.1) == 0.0
        assert kappa(0.0, 0.7) == 1.0
        assert 0.0 < kappa(-0.3, 0.7) < 1.0

    def test_degenerate_region(self):
        with pytest.raises(DegenerateRegionError):
            kappa(0.0, 0.0)
        with pytest.raises(DegenerateRegionError):
            minimax_value(0.0, -0.0)

    def test_balancing_identity(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            lo = -rng.uniform(0.01, 3.0)
            hi = rng.uniform(0.01, 3.0)
            k = kappa(lo, hi)
            assert hi * (1.0 - k) == pytest.approx(-lo * k, abs=1e-12)

    def test_minimax_examples(self):
        assert minimax_value(-1.0, 1.0) == pytest.approx(0.5)
        assert minimax_value(0.2, 0.5) == 0.0
        assert minimax_value(-2.0, 1.0) == pytest.approx(2.0 / 3.0)


class TestKinkDerivatives:
    def test_m_prime_branches(self):
        assert m_prime(2.0, -3.0) == -3.0
        assert m_prime(0.0, -3.0) == 0.0
        assert m_prime(0.0, 3.0) == 3.0
        assert m_prime(-1.0, 5.0) == 0.0

    def test_m_prime_vectorized(self):
        y = np.array([1.0, 0.0, -1.0])
        x = np.array([-3.0, -3.0, 5.0])
        assert m_prime(y, x) == pytest.approx([-3.0, 0.0, 0.0])

    def test_m_hat_branches(self):
        assert m_hat(0.05, -3.0, 0.1) == 0.0
        assert m_hat(0.5, -3.0, 0.1) == -3.0
        assert m_hat(-0.5, 7.0, 0.1) == 0.0

    def test_m_hat_needs_positive_eps(self):
        with pytest.raises(DomainError):
            m_hat(0.1, 1.0, 0.0)


class TestKappaPrime:
    def test_kink_formula(self):
        # tau_lo = 0 < tau_hi: derivative is min{d_lo(b), 0} / tau_hi.
        g_lo = np.array([0.75, -0.75, 4.0 / 3.0])
        spec = linear_spec(0.0, 0.5, g_lo, np.array([0.75, -0.75, -2.0 / 3.0]))
        rng = np.random.default_rng(2)
        for _ in range(100):
            b = rng.standard_normal(3)
            expected = min(g_lo @ b, 0.0) / 0.5
            assert kappa_prime(spec, b) == pytest.approx(expected, abs=1e-12)

    def test_zero_direction(self):
        rng = np.random.default_rng(3)
        spec = random_linear_spec(rng)
        assert kappa_prime(spec, np.zeros(3)) == 0.0

    def test_additivity_when_differentiable(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            spec = random_linear_spec(rng)
            b1 = rng.standard_normal(3)
            b2 = rng.standard_normal(3)
            assert kappa_prime(spec, b1 + b2) == pytest.approx(
                kappa_prime(spec, b1) + kappa_prime(spec, b2), abs=1e-10
            )

    def test_positive_homogeneity(self):
        rng = np.random.default_rng(5)
        for kink in (False, True):
            for _ in range(50):
                spec = random_linear_spec(rng, kink=kink)
                b = rng.standard_normal(3)
                t = rng.uniform(0.0, 4.0)
                assert kappa_prime(spec, t * b) == pytest.approx(
                    t * kappa_prime(spec, b), abs=1e-10
                )

    def test_lipschitz_constant(self):
        rng = np.random.default_rng(6)
        for kink in (False, True):
            for _ in range(100):
                spec = random_linear_spec(rng, kink=kink)
                c_lo = np.linalg.norm(spec.d_lo_grad)
                c_hi = np.linalg.norm(spec.d_hi_grad)
                c = (spec.coef_lo * c_hi + spec.coef_hi * c_lo) / spec.denom
                b1 = rng.standard_normal(3)
                b2 = rng.standard_normal(3)
                gap = abs(kappa_prime(spec, b1) - kappa_prime(spec, b2))
                assert gap <= c * np.linalg.norm(b1 - b2) + 1e-10

    def test_translation_equivariance(self):
        # In the fully differentiable regime the shift v_tilde built from
        # v * (tau_hi^+ + tau_lo^-) moves the derivative by exactly v.
        rng = np.random.default_rng(7)
        for _ in range(100):
            spec = random_linear_spec(rng)
            v = rng.uniform(-2.0, 2.0)
            v_tilde = translation_direction(spec, v)
            for _ in range(5):
                b = rng.standard_normal(3)
                assert kappa_prime(spec, b + v_tilde) == pytest.approx(
                    kappa_prime(spec, b) + v, abs=1e-8
                )

    def test_estimated_converges_to_exact(self):
        rng = np.random.default_rng(8)
        for kink in (False, True):
            for _ in range(50):
                exact = random_linear_spec(rng, kink=kink)
                b = rng.standard_normal(3)
                target = kappa_prime(exact, b)
                errs = []
                for eps in (1e-2, 1e-4, 1e-6):
                    est = KappaSpec(
                        tau_lo=exact.tau_lo,
                        tau_hi=exact.tau_hi,
                        d_lo=exact.d_lo,
                        d_hi=exact.d_hi,
                        mode=MODE_ESTIMATED,
                        eps=eps,
                        d_lo_grad=exact.d_lo_grad,
                        d_hi_grad=exact.d_hi_grad,
                    )
                    errs.append(abs(kappa_prime(est, b) - target))
                assert errs[-1] <= 1e-12
                assert errs[0] >= errs[-1]

    def test_degenerate_denominator(self):
        spec = KappaSpec(
            tau_lo=0.0,
            tau_hi=0.0,
            d_lo=lambda b: np.asarray(b)[..., 0],
            d_hi=lambda b: np.asarray(b)[..., 0],
            mode=MODE_ESTIMATED,
            eps=0.1,
        )
        with pytest.raises(DegenerateRegionError):
            kappa_prime(spec, np.ones(3))

    def test_exact_mode_requires_strict_interval(self):
        with pytest.raises(DomainError):
            KappaSpec(tau_lo=0.5, tau_hi=0.5, d_lo=lambda b: 0.0, d_hi=lambda b: 0.0)

    def test_batched_direction(self):
        rng = np.random.default_rng(9)
        spec = random_linear_spec(rng, kink=True)
        block = rng.standard_normal((4, 5, 3))
        vals = kappa_prime(spec, block)
        assert vals.shape == (4, 5)
        assert vals[1, 2] == pytest.approx(kappa_prime(spec, block[1, 2]))


class TestModeValidation:
    def test_estimated_requires_eps(self):
        with pytest.raises(DomainError):
            KappaSpec(
                tau_lo=-1.0, tau_hi=1.0, d_lo=lambda b: 0.0, d_hi=lambda b: 0.0, mode=MODE_ESTIMATED
            )

    def test_mode_names(self):
        with pytest.raises(DomainError):
            KappaSpec(tau_lo=-1.0, tau_hi=1.0, d_lo=lambda b: 0.0, d_hi=lambda b: 0.0, mode="x")

    def test_exact_is_default(self):
        spec = linear_spec(-1.0, 1.0, np.ones(2), np.ones(2))
        assert spec.mode == MODE_EXACT
