import numpy as np
import pytest

from shapemix import objective as obj
from shapemix import polytope as pt
from shapemix.afw import (
    ActiveSet,
    LocalModel,
    StoppingRule,
    line_search_cubic,
    model_gradient,
    solve_subproblem,
)

from conftest import interior_point, random_problem
from test_objective import DIAG

TIGHT = StoppingRule(tol=1e-15, max_iter=5000, criterion="gap")


def test_optimal_start_returns_immediately():
    c = pt.ShapeConstraint("simplex", 2)
    start = ActiveSet(c, {1: 0.5, 2: 0.5})
    res = solve_subproblem(DIAG, [0.5, 0.5], 1.0, c, start=start)
    assert res.iters == 0
    np.testing.assert_allclose(res.y, [0.5, 0.5])
    assert res.fw_gap == pytest.approx(0.0, abs=1e-15)


def test_two_point_quadratic_closed_form(rng):
    P = random_problem(rng, 2, 40, kind="bernstein")
    w = np.array([0.4, 0.6])
    c = pt.ShapeConstraint("simplex", 2)
    e = np.array([1.0, -1.0])
    g = obj.grad(P, w)
    t = -(g @ e) / obj.hess_quadratic_form(P, w, e)
    p = w + t * e
    assert np.all(p > 0), "instance should have an interior model minimiser"
    res = solve_subproblem(P, w, 0.0, c, stop=StoppingRule(1e-15, 200, "gap"))
    assert res.iters <= 200
    np.testing.assert_allclose(res.y, p, atol=1e-8)


@pytest.mark.parametrize("kind", ["simplex", "concave", "convex", "decreasing"])
def test_model_values_non_increasing(rng, kind):
    P = random_problem(rng, 12, 80)
    c = pt.ShapeConstraint(kind, 12)
    w = pt.reconstruct(c, pt.uniform_weights(c))
    res = solve_subproblem(P, w, 3.0, c, stop=TIGHT, record_history=True)
    h = np.array(res.history)
    assert h.size > 2
    assert np.all(np.diff(h) <= 1e-14 * np.maximum(1.0, np.abs(h[:-1])))
    assert res.fw_gap >= -1e-12
    assert pt.membership(c, res.y, 1e-10)
    assert res.objective <= obj.f(P, w) + 1e-14


def test_backends_agree(rng):
    P = random_problem(rng, 9, 60)
    c = pt.ShapeConstraint.unimodal(9, 4)
    w = pt.reconstruct(c, pt.uniform_weights(c))
    stop = StoppingRule(1e-15, 1000, "gap")
    dense = solve_subproblem(P, w, 2.0, c, stop=stop, model=LocalModel(P, w, "dense"))
    samples = solve_subproblem(P, w, 2.0, c, stop=stop, model=LocalModel(P, w, "samples"))
    np.testing.assert_allclose(dense.y, samples.y, atol=1e-9)
    assert abs(sum(dense.active.weights.values()) - 1.0) <= 1e-10
    assert dense.active.drift() <= 1e-10


def test_relative_rule_stops_early(rng):
    P = random_problem(rng, 10, 50)
    c = pt.ShapeConstraint("simplex", 10)
    w = np.full(10, 0.1)
    loose = solve_subproblem(P, w, 1.0, c, stop=StoppingRule(1e-4, 5000, "relative"))
    tight = solve_subproblem(P, w, 1.0, c, stop=TIGHT)
    assert loose.iters <= tight.iters
    assert tight.objective <= loose.objective + 1e-15


def test_geometric_decrease_on_strongly_convex_model(rng):
    P = random_problem(rng, 6, 300)
    c = pt.ShapeConstraint("simplex", 6)
    w = interior_point(rng, 6)
    res = solve_subproblem(P, w, 0.0, c, stop=StoppingRule(1e-16, 400, "gap"), record_history=True)
    h = np.array(res.history)
    err = h - h.min()
    for t in range(0, len(err) - 50, 50):
        if err[t] > 1e-12:
            assert err[t + 50] <= 0.5 * err[t]


def test_guard_returns_centre():
    from conftest import random_problem as rp

    P = rp(np.random.default_rng(3), 5, 30)
    c = pt.ShapeConstraint("simplex", 5)
    w = np.full(5, 0.2)
    res = solve_subproblem(P, w, 1e8, c, stop=StoppingRule(1e-10, 0, "gap"))
    assert res.guard_triggered
    np.testing.assert_allclose(res.y, w)
    assert res.objective == obj.f(P, w)


def test_start_validation():
    c = pt.ShapeConstraint("simplex", 2)
    other = ActiveSet(pt.ShapeConstraint("decreasing", 2), {1: 1.0})
    with pytest.raises(ValueError):
        solve_subproblem(DIAG, [0.5, 0.5], 1.0, c, start=other)
    with pytest.raises(ValueError):
        ActiveSet(c, {1: 0.5})


class TestModelGradient:
    def test_centre(self, rng):
        P = random_problem(rng, 5, 40)
        w = interior_point(rng, 5)
        np.testing.assert_allclose(model_gradient(P, w, 4.0, w), obj.grad(P, w), rtol=1e-13)

    @pytest.mark.parametrize("L", [0.0, 2.5])
    def test_finite_differences(self, rng, L):
        P = random_problem(rng, 6, 50)
        w = interior_point(rng, 6)
        model = (lambda y: obj.cubic_model(P, y, w, L)) if L > 0 else (lambda y: obj.local_model_phi(P, y, w))
        for _ in range(20):
            z = interior_point(rng, 6)
            d = rng.normal(size=6)
            h = 1e-6
            fd = (model(z + h * d) - model(z - h * d)) / (2 * h)
            an = model_gradient(P, w, L, z) @ d
            assert abs(fd - an) <= 1e-6 * max(1.0, abs(an))


class TestLineSearch:
    def setup_method(self):
        rng = np.random.default_rng(8)
        self.P = random_problem(rng, 4, 30)
        self.w = interior_point(rng, 4)
        self.z = interior_point(rng, 4)

    def phi(self, L, d, a):
        return obj.local_model_phi(self.P, self.z + a * d, self.w) + (
            L / 6.0 * obj.hess_quadratic_form(self.P, self.w, self.z + a * d - self.w) ** 1.5)

    def test_quadratic_closed_form(self):
        d = -model_gradient(self.P, self.w, 0.0, self.z)
        b = model_gradient(self.P, self.w, 0.0, self.z) @ d
        c = 0.5 * obj.hess_quadratic_form(self.P, self.w, d)
        for amax in (1e-3, 10.0, 1e6):
            expect = float(np.clip(-b / (2 * c), 0, amax))
            got = line_search_cubic(self.P, self.w, 0.0, self.z, d, amax)
            assert abs(got - expect) <= 1e-10 * max(1.0, expect)

    def test_cubic_coerces(self):
        d = -model_gradient(self.P, self.w, 5.0, self.z)
        a = line_search_cubic(self.P, self.w, 5.0, self.z, d, 1e300)
        assert np.isfinite(a) and a > 0
        assert self.phi(5.0, d, a) < self.phi(5.0, d, 0.0)

    def test_ascent_direction_gives_zero(self):
        d = model_gradient(self.P, self.w, 1.0, self.z)
        assert line_search_cubic(self.P, self.w, 1.0, self.z, d, 1.0) == 0.0
