"""Bulk density family: values, gradients, recession, growth, surface norm."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phasefrac import (BulkDensity, HookeTensor, deviatoric, full_strain,
                       surface_norm, sym_to_vec)


def density(p=2.0, mu=0.0, lam1=1.0, lam2=0.0, n=2):
    return BulkDensity(p, mu, HookeTensor(lam1, lam2, n))


def rand_sym(rng, n, count=1):
    g = rng.standard_normal((count, n, n))
    return 0.5 * (g + np.swapaxes(g, -1, -2))


class TestHooke:
    def test_positive_definiteness_enforced(self):
        with pytest.raises(ValueError):
            HookeTensor(0.0, 1.0, 2)
        with pytest.raises(ValueError):
            HookeTensor(1.0, -1.1, 2)
        HookeTensor(1.0, -0.9, 2)  # lambda1 + n*lambda2/2 = 0.1 > 0

    def test_quadratic_form_formula(self):
        h = HookeTensor(1.3, 0.7, 3)
        rng = np.random.default_rng(0)
        xi = rand_sym(rng, 3, 5)
        expect = 1.3 * np.sum(xi * xi, axis=(-2, -1)) + 0.35 * np.trace(
            xi, axis1=-2, axis2=-1) ** 2
        assert np.allclose(h.quad_form(xi), expect)
        assert np.allclose(np.sum(h.sigma(xi) * xi, axis=(-2, -1)), expect)


class TestValue:
    def test_identity_quadratic(self):
        f = density()
        assert f.value(np.eye(2)) == pytest.approx(1.0, abs=1e-15)

    def test_zero_at_zero(self):
        f = density(p=3.0, mu=0.7, lam1=2.0, lam2=0.5, n=3)
        assert f.value(np.zeros((3, 3))) == 0.0

    def test_p4_with_offset(self):
        f = density(p=4.0, mu=1.0)
        xi = np.diag([1.0, 0.0])
        assert f.value(xi) == pytest.approx(0.75, abs=1e-14)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2 ** 31 - 1), st.floats(1.2, 4.0), st.floats(0.0, 2.0))
    def test_midpoint_convexity(self, seed, p, mu):
        f = density(p=p, mu=mu, lam1=1.1, lam2=0.4)
        rng = np.random.default_rng(seed)
        xi, eta = rand_sym(rng, 2, 2) * 3.0
        lhs = f.value(0.5 * (xi + eta))
        rhs = 0.5 * (f.value(xi) + f.value(eta))
        assert lhs <= rhs + 1e-12


class TestGrad:
    def test_quadratic_case_is_sigma(self):
        f = density()
        rng = np.random.default_rng(1)
        xi = rand_sym(rng, 2)[0]
        assert np.allclose(f.grad(xi), xi)

    def test_zero_at_origin_with_offset(self):
        f = density(p=3.0, mu=0.5)
        assert np.allclose(f.grad(np.zeros((2, 2))), 0.0)

    def test_singular_origin_convention(self):
        f = density(p=1.5, mu=0.0)
        assert np.allclose(f.grad(np.zeros((2, 2))), 0.0)

    def test_finite_difference_match(self):
        # central differences of value at relative 1e-6, 100 states per config
        for (n, p, mu) in [(2, 3.0, 0.5), (3, 2.0, 0.0), (2, 2.5, 1.0)]:
            f = density(p=p, mu=mu, lam1=1.2, lam2=0.3, n=n)
            rng = np.random.default_rng(7)
            for _ in range(100):
                xi = rand_sym(rng, n)[0]
                g = f.grad(xi)
                d = rand_sym(rng, n)[0]
                t = 1e-6
                fd = (f.value(xi + t * d) - f.value(xi - t * d)) / (2 * t)
                an = float(np.sum(g * d))
                assert abs(fd - an) <= 1e-6 * max(abs(fd), abs(an), 1e-12)


class TestRecession:
    def test_p2_recession_drops_offset(self):
        f = density(p=2.0, mu=3.0)
        f0 = density(p=2.0, mu=0.0)
        rng = np.random.default_rng(2)
        xi = rand_sym(rng, 2)[0]
        assert f.recession(xi) == pytest.approx(f0.value(xi), abs=1e-14)

    def test_p4_value(self):
        f = density(p=4.0, mu=1.0)
        assert f.recession(np.diag([1.0, 0.0])) == pytest.approx(0.25, abs=1e-14)

    def test_p_homogeneity(self):
        f = density(p=3.0, mu=0.2)
        rng = np.random.default_rng(3)
        xi = rand_sym(rng, 2)[0]
        assert f.recession(2 * xi) == pytest.approx(2 ** 3 * f.recession(xi))

    def test_scaled_value_converges_to_recession(self):
        f = density(p=3.0, mu=1.0)
        rng = np.random.default_rng(4)
        xi = rand_sym(rng, 2)[0]
        errs = [abs(f.value(s * xi) / s ** 3 - f.recession(xi))
                for s in (10.0, 100.0, 1000.0)]
        assert errs[0] > errs[1] > errs[2]


class TestRecessionGap:
    def test_p2_closed_form_bound(self):
        # for p = 2 the mu offset cancels exactly, so the gap sits at
        # rounding level, well inside the mu^(1/2)/s closed-form bound
        mu = 1.0
        f = density(p=2.0, mu=mu)
        for s in (2.0, 10.0, 50.0):
            gap = f.recession_gap(s, n_dirs=128, seed=0)
            assert gap <= np.sqrt(mu) / s + 1e-12
            assert gap < 1e-13

    def test_exact_when_mu_zero(self):
        f = density(p=2.0, mu=0.0)
        assert f.recession_gap(5.0, 64, 1) < 1e-14

    def test_p4_monotone(self):
        f = density(p=4.0, mu=1.0)
        assert f.recession_gap(10.0, 128, 2) < f.recession_gap(2.0, 128, 2)


class TestGrowth:
    def test_quadratic_exact_constants(self):
        # f = |xi|^2/2 exactly: the sharp constant 1/2 sits between the
        # empirical pair, and the sandwich holds on fresh samples
        f = density()
        c_lo, c_hi = f.growth_check(n_samples=512, seed=0)
        assert c_hi <= 0.5 <= c_lo
        rng = np.random.default_rng(99)
        xi = rand_sym(rng, 2, 200) * 10.0 ** rng.uniform(-2, 2, (200, 1, 1))
        norm_p = np.linalg.norm(sym_to_vec(xi), axis=-1) ** 2
        vals = f.value(xi)
        assert np.all(c_lo * (norm_p - 1.0) <= vals + 1e-12)
        assert np.all(vals <= c_hi * (norm_p + 1.0) + 1e-12)

    def test_p3_with_offset_finite_constants(self):
        f = density(p=3.0, mu=1.0, lam1=2.0, lam2=1.0, n=3)
        c_lo, c_hi = f.growth_check(n_samples=512, seed=1)
        assert 0.0 < c_lo <= c_hi < np.inf

    def test_degenerate_hooke_rejected_before_check(self):
        with pytest.raises(ValueError):
            density(lam1=0.0)


class TestSurfaceNorm:
    def test_full_strain_normal_jump(self):
        f = density()
        for delta in (0.5, -2.0, 7.0):
            w = np.array([0.0, delta])
            z = np.array([0.0, 1.0])
            got = surface_norm(f, full_strain(2), w, z)
            assert got == pytest.approx(abs(delta) / np.sqrt(2), abs=1e-13)

    def test_zero_jump(self):
        f = density()
        assert surface_norm(f, full_strain(2), np.zeros(2), np.eye(2)[1]) == 0.0

    def test_one_homogeneity(self):
        f = density(p=3.0, mu=0.4)
        rng = np.random.default_rng(5)
        w, z = rng.standard_normal(2), rng.standard_normal(2)
        s1 = surface_norm(f, deviatoric(2), 2 * w, z)
        s0 = surface_norm(f, deviatoric(2), w, z)
        assert s1 == pytest.approx(2 * s0, rel=1e-12)

    def test_triangle_inequality_in_jump(self):
        f = density(p=2.5, mu=0.0, lam1=1.4, lam2=0.6, n=3)
        op = deviatoric(3)
        rng = np.random.default_rng(6)
        z = np.array([0.0, 0.0, 1.0])
        for _ in range(100):
            w1, w2 = rng.standard_normal(3), rng.standard_normal(3)
            lhs = surface_norm(f, op, w1 + w2, z)
            rhs = surface_norm(f, op, w1, z) + surface_norm(f, op, w2, z)
            assert lhs <= rhs + 1e-12
