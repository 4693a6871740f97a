import numpy as np
import pytest

from stochtrack.linalg import norm_inf
from stochtrack.problems import get_problem, make_example2
from stochtrack.system import ParametricSystem
from stochtrack.verify import (
    check_jacobians,
    ex1_target_roots,
    fig1_demo,
    newton_order_probe,
    scaling_experiment,
)


def test_corrupted_jacobian_is_caught():
    base = make_example2(10)

    def bad_jac(u, p):
        J = base.eval_Fu(u, p).copy()
        J[3, 3] *= 1.1
        return J

    sys = ParametricSystem(base.n, base.eval_F, bad_jac, base.eval_Fp, base.param_range)
    rep = check_jacobians(sys, num_points=3, rng=0)
    assert rep.max_err_u > 1e-2
    assert not rep.passed


def test_corrupted_param_derivative_is_caught():
    base = make_example2(10)
    sys = ParametricSystem(base.n, base.eval_F, base.eval_Fu, lambda u, p: 2 * u * u, base.param_range)
    rep = check_jacobians(sys, num_points=3, rng=0)
    assert rep.max_err_p > 1e-2


def _linear(seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((5, 5))
    c = rng.standard_normal(5)
    return ParametricSystem(5, lambda u, p: A @ u - p * c, lambda u, p: A, lambda u, p: -c, (0.0, 1.0))


def test_linear_system_agrees_exactly_at_origin():
    # at u = 0, p = 0 the differenced evaluations carry no rounding
    rep = check_jacobians(_linear(1), num_points=3, rng=2, radius=0.0, p_range=(0.0, 0.0))
    assert rep.max_err_u < 1e-9 and rep.max_err_p < 1e-9


def test_linear_system_agrees_to_roundoff():
    # elsewhere rounding in A @ u over the sqrt(eps) step leaves ~1e-8
    rep = check_jacobians(_linear(1), num_points=20, rng=2)
    assert rep.max_err_u < 1e-7 and rep.max_err_p < 1e-7


def test_target_roots():
    roots = ex1_target_roots()
    assert len(roots) == 4
    for i, a in enumerate(roots):
        for b in roots[i + 1:]:
            assert norm_inf(a - b) > 0.5
    sys = get_problem("example1").system
    for r in roots:
        assert norm_inf(sys.eval_F(r, 1.0)) < 1e-14


def test_scaling_is_deterministic():
    a = scaling_experiment(ns=(10, 20), num_seeds=1, p_stop=12.0, base_seed=4)
    b = scaling_experiment(ns=(10, 20), num_seeds=1, p_stop=12.0, base_seed=4)
    assert a.D == b.D and a.slope == b.slope
    assert len(a.rows()) == 2
    assert all(np.isfinite(a.D))


def test_order_probe_linear_converges_in_one_step():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((4, 4)) + 4 * np.eye(4)
    sys = ParametricSystem(4, lambda u, p: A @ u - p, lambda u, p: A, lambda u, p: -np.ones(4), (0.0, 1.0))
    root = np.linalg.solve(A, np.ones(4))
    res = newton_order_probe(sys, root, 1.0, rng=1)
    assert res.iterations == 1
    assert np.isnan(res.q)


@pytest.mark.parametrize("name,n,branch,p", [("example2", 20, 0, 14.0), ("example1", None, 0, 0.0)])
def test_order_probe_quadratic(name, n, branch, p):
    pr = get_problem(name, n)
    res = newton_order_probe(pr.system, pr.branch(branch).u0, p, rng=0)
    assert 1.9 <= res.q <= 2.1


def test_noise_demo_noiseless_is_exact():
    demo = fig1_demo(sigma=0.0, num_samples=3, rng=0)
    for s in range(3):
        np.testing.assert_array_equal(demo.curves[2 * s], demo.p**3)
        np.testing.assert_array_equal(demo.curves[2 * s + 1], -demo.p**3)


def test_noise_demo_noise_statistics():
    demo = fig1_demo(sigma=0.1, num_samples=1000, rng=5)
    assert abs(demo.xi.mean()) < 0.01
    assert abs(demo.xi.std(ddof=1) - 0.1) < 0.01


def test_noise_demo_noisy_curves_avoid_origin():
    demo = fig1_demo(sigma=0.1, num_samples=8, rng=0)
    assert demo.curves.shape == (16, 201)
    mid = int(np.argmin(np.abs(demo.p)))
    assert demo.p[mid] == 0.0
    assert np.all(demo.curves[:, mid] != 0)
    # the two signs of a sample never meet
    for s in range(8):
        assert np.all(demo.curves[2 * s] != demo.curves[2 * s + 1])


def test_noise_demo_rejects_negative_sigma():
    with pytest.raises(ValueError):
        fig1_demo(sigma=-1.0)
