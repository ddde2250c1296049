import math

import numpy as np
import pytest

from shapemix import basis as bs
from shapemix import cubic_newton as cn
from shapemix import objective as obj
from shapemix import polytope as pt
from shapemix import synth
from shapemix.afw import StoppingRule, solve_subproblem

from conftest import interior_point, random_problem
from test_objective import DIAG
from test_polytope import FAMILIES_9


def test_single_component():
    P = bs.bernstein_matrix([0.1, 0.7], 1)
    for c in (pt.ShapeConstraint("simplex", 1), pt.ShapeConstraint("concave", 1)):
        w, tr = cn.minimize(P, c)
        assert w.tolist() == [1.0]
        assert tr.outer_iters == 0 and tr.status == "converged"
    k, w, per = cn.fit_unimodal(P)
    assert k == 1 and w.tolist() == [1.0] and per.size == 1


def test_symmetric_instance():
    w, tr = cn.minimize(DIAG, pt.ShapeConstraint("simplex", 2))
    np.testing.assert_allclose(w, [0.5, 0.5], atol=1e-8)


def test_config_validation():
    with pytest.raises(ValueError):
        cn.SolverConfig(beta=2.0)
    with pytest.raises(ValueError):
        cn.SolverConfig(beta=1.0)
    with pytest.raises(ValueError):
        cn.SolverConfig(L0=0.0)


def test_infeasible_start():
    P = random_problem(np.random.default_rng(0), 4, 20)
    with pytest.raises(ValueError):
        cn.minimize(P, pt.ShapeConstraint("decreasing", 4), w0=[0.1, 0.2, 0.3, 0.4])


def test_iteration_cap_reported():
    P = random_problem(np.random.default_rng(1), 10, 200)
    w, tr = cn.minimize(P, pt.ShapeConstraint("simplex", 10), cn.SolverConfig(max_outer=1, gap_tol=1e-14))
    assert tr.status == "iteration-capped"
    assert tr.outer_iters == 1


@pytest.mark.parametrize("kind", FAMILIES_9)
def test_all_families_converge(kind):
    rng = np.random.default_rng(abs(hash(kind)) % 1000)
    P = random_problem(rng, 15, 300, kind="bernstein")
    c = pt.ShapeConstraint(kind, 15)
    cfg = cn.SolverConfig(gap_tol=1e-8, outer_tol=0.0)
    w, tr = cn.minimize(P, c, cfg)
    assert tr.status == "converged"
    assert pt.membership(c, w, 1e-9)
    assert tr.final.fw_gap <= 1e-8 * max(1.0, abs(tr.final.f))
    assert cn.fw_gap_at(c, w, obj.grad(P, w)) == pytest.approx(tr.final.fw_gap, abs=1e-12)
    assert np.all(np.diff(tr.f_values) <= 1e-14)
    assert tr.L_values.max() <= max(48 * P.N, cfg.L0)


def test_warm_start_from_feasible_point():
    rng = np.random.default_rng(4)
    P = random_problem(rng, 8, 100)
    c = pt.ShapeConstraint("decreasing", 8)
    w0 = np.linspace(2, 1, 8)
    w0 /= w0.sum()
    w, tr = cn.minimize(P, c, w0=w0)
    assert tr.status == "converged"
    assert tr.records[0].f == pytest.approx(obj.f(P, w0))


class TestAcceptance:
    def test_identity_and_huge_gamma(self, rng):
        P = random_problem(rng, 5, 30)
        w = interior_point(rng, 5)
        assert cn.acceptance_test(P, w, w, 1.0, 0.0)
        y = interior_point(rng, 5)
        assert cn.acceptance_test(P, w, y, 1e-9, 1e9)

    def test_large_L_always_accepts(self):
        rng = np.random.default_rng(77)
        for _ in range(100):
            M = int(rng.integers(2, 7))
            P = random_problem(rng, M, int(rng.integers(3, 25)))
            w = interior_point(rng, M)
            L = 48 * P.N
            res = solve_subproblem(P, w, L, pt.ShapeConstraint("simplex", M),
                                   stop=StoppingRule(1e-12, 2000, "gap"))
            assert obj.cubic_model(P, res.y, w, L) <= obj.f(P, w) + 1e-14
            assert cn.acceptance_test(P, w, res.y, L, 0.0)

    def test_infinite_objective_rejected(self):
        assert not cn.acceptance_test(DIAG, np.array([0.5, 0.5]), np.array([1.0, 0.0]), 1e9, 1e9)


class TestNextIterate:
    def setup_method(self):
        rng = np.random.default_rng(21)
        self.P = random_problem(rng, 4, 50)
        self.opt, _ = cn.minimize(self.P, pt.ShapeConstraint("simplex", 4), cn.SolverConfig(gap_tol=1e-12))
        self.far = np.full(4, 0.25)

    def test_shorter_step_kept(self):
        cfg = cn.SolverConfig(rho=lambda k: 1.0)
        w, step = cn.next_iterate(self.far, self.opt, 0, cfg, self.P)
        assert step == "short"
        np.testing.assert_allclose(w, 0.5 * (self.far + self.opt))

    def test_shorter_step_rejected_in_favour_of_y(self):
        cfg = cn.SolverConfig(rho=lambda k: 0.0)
        w, step = cn.next_iterate(self.far, self.opt, 0, cfg, self.P)
        assert step == "full"
        np.testing.assert_allclose(w, self.opt)

    def test_no_shortening_after_cutoff(self):
        cfg = cn.SolverConfig(rho=lambda k: 1.0)
        w, step = cn.next_iterate(self.far, self.opt, 11, cfg, self.P)
        assert step == "full"

    def test_worse_y_stalls(self):
        cfg = cn.SolverConfig()
        w, step = cn.next_iterate(self.opt, self.far, 20, cfg, self.P)
        assert step == "stall"
        np.testing.assert_allclose(w, self.opt)


def test_unimodal_search_properties():
    x = synth.sample("beta_concave", 3000, 9)
    P = bs.bernstein_matrix(x, 7)
    cfg = cn.SolverConfig(gap_tol=1e-10)
    k, w, per = cn.fit_unimodal(P, cfg)
    assert per[k - 1] <= per.min() + 1e-12
    assert k == int(np.argmin(per)) + 1
    assert pt.membership(pt.ShapeConstraint.unimodal(7, k), w, 1e-9)
    assert obj.f(P, w) == per[k - 1]


def test_local_quadratic_tail():
    """Once full Newton steps start, the error contracts quadratically.

    Iterates are recovered by replaying the deterministic solver with
    increasing outer caps. The constant is reported, not bounded.
    """
    rng = np.random.default_rng(5)
    P = bs.bernstein_matrix(rng.uniform(0.05, 0.95, 500), 10)
    c = pt.ShapeConstraint("simplex", 10)
    cfg = dict(gap_tol=1e-9, outer_tol=0.0)
    w_star, tr = cn.minimize(P, c, cn.SolverConfig(**cfg))
    assert tr.status == "converged"
    steps = [r.step for r in tr.records]
    first_full = steps.index("full")
    errs = [np.abs(cn.minimize(P, c, cn.SolverConfig(max_outer=k, **cfg))[0] - w_star).max()
            for k in range(first_full - 1, first_full + 1)]
    constant = errs[1] / errs[0] ** 2
    print(f"quadratic contraction constant {constant:.3g}")
    assert errs[1] <= 1e-3 * errs[0]
    assert math.isfinite(constant)
