import math

import numpy as np
import pytest

from shapemix import basis as bs
from shapemix import cubic_newton as cn
from shapemix import kw
from shapemix import polytope as pt
from shapemix import synth
from shapemix.exceptions import PreconditionError, UnsupportedBasisError

SQRT_2PI = math.sqrt(2 * math.pi)


def solve(P, gap_tol=1e-10):
    w, tr = cn.minimize(P, pt.ShapeConstraint("simplex", P.M),
                        cn.SolverConfig(gap_tol=gap_tol, outer_tol=0.0))
    assert tr.status == "converged"
    return w


@pytest.fixture(scope="module")
def n50_samples():
    return synth.make_rng(5).standard_normal(50) * 1.5


@pytest.fixture(scope="module")
def nested(n50_samples):
    """Certificates on nested grids with 64, 127 and 253 atoms."""
    x = n50_samples
    out = []
    for M in (64, 127, 253):
        P = bs.gaussian_location_matrix(x, np.linspace(x.min(), x.max(), M), 1.0)
        out.append(kw.certificate(P, solve(P)))
    return out


class TestDual:
    def test_single_sample(self):
        P = bs.gaussian_location_matrix([0.0], [0.0], 1.0)
        nu = kw.dual_from_primal(P, [1.0])
        assert nu[0] == pytest.approx(SQRT_2PI, abs=1e-12)
        assert kw.dual_feasibility_margin(nu, [0.0], [0.0]) == pytest.approx(0.0, abs=1e-15)

    def test_linkage(self, rng):
        x = rng.normal(size=30)
        P = bs.gaussian_location_matrix(x, np.linspace(x.min(), x.max(), 8), 1.0)
        w = rng.dirichlet(np.ones(8))
        np.testing.assert_allclose(kw.dual_from_primal(P, w) * (P.B.T @ w), 1.0, rtol=1e-14)

    def test_unsupported_bases(self):
        with pytest.raises(UnsupportedBasisError):
            kw.dual_from_primal(bs.bernstein_matrix([0.5], 2), [0.5, 0.5])
        with pytest.raises(UnsupportedBasisError):
            kw.dual_from_primal(bs.gaussian_location_matrix([0.0], [0.0], 0.5), [1.0])

    def test_margin_examples(self, n50_samples):
        x = n50_samples
        atoms = np.linspace(x.min(), x.max(), 40)
        assert kw.dual_feasibility_margin(np.zeros(50), x, atoms) == -50
        P = bs.gaussian_location_matrix(x, atoms, 1.0)
        nu = kw.dual_from_primal(P, solve(P))
        m1 = kw.dual_feasibility_margin(nu, x, atoms)
        m2 = kw.dual_feasibility_margin(2 * nu, x, atoms)
        assert m2 == pytest.approx(50 + 2 * m1, abs=1e-9)

    def test_complementary_slackness(self, n50_samples):
        x = n50_samples
        atoms = np.linspace(x.min(), x.max(), 40)
        P = bs.gaussian_location_matrix(x, atoms, 1.0)
        w = solve(P)
        nu = kw.dual_from_primal(P, w)
        load = kw.kernel_sum(nu, x, atoms)
        slack = load < 50 - 1e-6
        assert slack.any()
        assert np.all(w[slack] <= 1e-8)


class TestGamma:
    def test_single_bump(self):
        assert kw.gamma_estimate(np.array([SQRT_2PI]), np.array([0.0])) == pytest.approx(1.0, abs=1e-12)

    def test_far_apart_bumps(self):
        # each bump peaks at 1 and they do not interact, so the maximum is 1
        g = kw.gamma_estimate(np.array([SQRT_2PI, SQRT_2PI]), np.array([0.0, 20.0]))
        assert g == pytest.approx(1.0, abs=1e-12)

    def test_dominates_random_points(self, rng, n50_samples):
        x = n50_samples
        nu = rng.uniform(1, 20, x.size)
        g = kw.gamma_estimate(nu, x)
        mu = rng.uniform(x.min() - 2, x.max() + 2, 1_000_000)
        assert kw.kernel_sum(nu, x, mu).max() <= g
        fine = np.linspace(x.min(), x.max(), 200_001)
        assert g - kw.kernel_sum(nu, x, fine).max() <= 1e-9 * g

    def test_lipschitz_constant(self):
        t = np.linspace(-5, 5, 2_000_001)
        dphi = np.abs(-t * np.exp(-t * t / 2) / SQRT_2PI)
        assert dphi.max() == pytest.approx(1 / math.sqrt(2 * math.pi * math.e), abs=1e-12)
        assert kw.PHI_LIPSCHITZ == pytest.approx(1 / math.sqrt(2 * math.pi * math.e), rel=1e-15)


class TestBounds:
    def test_examples(self):
        assert kw.gap_bounds(0.0, 5.0, 5, 0.3, np.ones(5))[0] == 0.0
        assert kw.gap_bounds(0.0, 7.0, 5, 0.0, np.ones(5))[1] == 0.0
        assert kw.gap_bounds(0.0, 2 * math.e, 2, 0.0, np.ones(2))[0] == pytest.approx(2.0, rel=1e-15)

    def test_errors(self):
        with pytest.raises(PreconditionError):
            kw.gap_bounds(0.0, 4.0, 5, 0.1, np.ones(5))
        with pytest.raises(PreconditionError):
            kw.gap_bounds(0.0, 5.0, 5, 0.1, np.ones(5), samples=[0.0, 3.0], grid_atoms=[0.0, 2.0])
        with pytest.raises(PreconditionError):
            kw.certificate(bs.gaussian_location_matrix([0.0, 3.0], [0.5, 2.0], 1.0), [0.5, 0.5])

    def test_rho_examples(self):
        assert kw.rho(0.0) == 0.0 and kw.rho_inv(0.0) == 0.0
        assert kw.rho(1.0) == pytest.approx(0.3068528, abs=1e-7)
        assert kw.rho_inv(1 - math.log(2)) == pytest.approx(1.0, abs=1e-9)
        assert kw.dual_distance_bound(0.0) == 0.0
        with pytest.raises(ValueError):
            kw.rho(-1.0)
        with pytest.raises(ValueError):
            kw.rho_inv(-1.0)

    def test_rho_round_trip(self):
        for x in np.linspace(0, 10, 1000):
            assert abs(kw.rho(kw.rho_inv(x)) - x) <= 1e-12 * max(1.0, x)

    def test_dual_distance_monotone(self, rng):
        for _ in range(100):
            a, b = np.sort(rng.uniform(0, 50, 2))
            assert kw.dual_distance_bound(a) <= kw.dual_distance_bound(b)


class TestCertificate:
    def test_single_sample(self):
        P = bs.gaussian_location_matrix([0.0], [0.0], 1.0)
        cert = kw.certificate(P, [1.0])
        assert cert.nu[0] == pytest.approx(SQRT_2PI, abs=1e-9)
        assert cert.gap_bound_17 == pytest.approx(0.0, abs=1e-9)
        assert cert.gamma == pytest.approx(1.0, abs=1e-12)

    def test_small_spacing_limit(self):
        P = bs.gaussian_location_matrix([0.0], np.linspace(-0.01, 0.01, 10), 1.0)
        cert = kw.certificate(P, solve(P))
        assert cert.gap_bound_18 <= 1e-3

    def test_fields_valid(self, nested):
        for cert in nested:
            assert np.all(cert.nu > 0)
            assert cert.gamma >= 50 * (1 - 1e-9)
            assert cert.gap_bound_17 >= -1e-9 and cert.gap_bound_18 >= -1e-9
            assert cert.feasibility_margin <= 50 * 1e-6
            assert all(map(math.isfinite, (cert.gamma, cert.dual_distance_bound, cert.p_hat)))
            assert cert.lower_bound <= cert.p_hat

    def test_nested_refinement(self, nested):
        b18 = [c.gap_bound_18 for c in nested]
        p_hat = [c.p_hat for c in nested]
        lower = [c.lower_bound for c in nested]
        assert b18[0] >= b18[1] >= b18[2]
        assert p_hat[0] >= p_hat[1] >= p_hat[2]
        assert lower[0] <= lower[1] + 1e-9 and lower[1] <= lower[2] + 1e-9
