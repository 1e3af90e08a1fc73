from __future__ import annotations

import numpy as np
import pytest

from csg.bench.problems import parse_groups, quadratic_problem, quadratic_split
from _oracles import brute_empirical
from csg.composite import (IntegralGroup, NestedConfig, NestedObjective, NestedRun,
                           StageSnapshot, SumOfIntegrals, _GroupState, final_chain,
                           identity_transform, inner_estimates, nested_metrics,
                           outer_assemble, run_nested, run_sum, sum_estimate)
from csg.core import CSGConfig, csg_step, run_csg
from csg.history import History
from csg.measures import BoxDomain, UniformBox
from csg.weights import WeightScheme

U01 = UniformBox(BoxDomain([0.0], [1.0]))


def test_inner_estimates_examples():
    _, metric = nested_metrics(1, 1, 1)
    h = History(2, 1, gradient_dim=1)
    h.append([0.0, 0.3], [0.0], [0.0], [[1.0]])
    f, g = inner_estimates(h, [0.0], [0.3], metric, WeightScheme())
    np.testing.assert_array_equal(f, [0.0])
    np.testing.assert_array_equal(g, [[1.0]])
    h.append([0.0, 0.3], [1.0], [1.0], [[3.0]])
    f, g = inner_estimates(h, [0.0], [0.3], metric, WeightScheme("exact-grid", 1000), U01)
    np.testing.assert_allclose(f, [0.5])
    np.testing.assert_allclose(g, [[2.0]])
    c = History(2, 1, gradient_dim=1)
    rng = np.random.default_rng(0)
    for _ in range(10):
        c.append(rng.uniform(size=2), rng.uniform(size=1), [4.0], [[0.0]])
    f, _ = inner_estimates(c, [0.5], [0.5], metric, WeightScheme())
    np.testing.assert_allclose(f, [4.0])
    with pytest.raises(LookupError):
        inner_estimates(History(2, 1, gradient_dim=1), [0.0], [0.0], metric, WeightScheme())


def _snap(value, d_u, d_v=None, g_hat=None):
    return StageSnapshot(None, None if g_hat is None else np.asarray(g_hat, float),
                         np.asarray(value, float), np.asarray(d_u, float),
                         None if d_v is None else np.asarray(d_v, float))


def test_outer_assemble_examples():
    metric, _ = nested_metrics(1, 1, 1)
    s1 = _snap([2.0], [[1.0]], [[3.0]], [[0.5]])
    np.testing.assert_allclose(s1.total_jacobian, [[2.5]])
    h = History(1, 1)
    h.append([0.0], [0.2], s1.outer_value, s1.total_jacobian, s1)
    W, G = outer_assemble(h, [0.0], metric, WeightScheme())
    np.testing.assert_allclose(W, [2.0])
    np.testing.assert_allclose(G, [[2.5]])
    s2 = _snap([4.0], [[-1.0]], [[1.0]], [[0.5]])
    h.append([0.0], [0.8], s2.outer_value, s2.total_jacobian, s2)
    W, G = outer_assemble(h, [0.0], metric, WeightScheme("exact-grid", 1000), U01)
    np.testing.assert_allclose(W, [3.0])
    np.testing.assert_allclose(G, [[0.5 * 2.5 + 0.5 * (-0.5)]])
    # v-independent outer integrand: the inner term vanishes
    s3 = _snap([1.0], [[7.0]], None, [[9.0]])
    np.testing.assert_array_equal(s3.total_jacobian, [[7.0]])


def test_outer_assemble_requires_snapshots():
    metric, _ = nested_metrics(1, 1, 1)
    h = History(1, 1)
    h.append([0.0], [0.2], [1.0], [[1.0]])
    with pytest.raises(LookupError):
        outer_assemble(h, [0.0], metric, WeightScheme())


def test_outer_assemble_is_repeatable():
    pb = _toy_nested()
    run = NestedRun(pb, NestedConfig(iterations=40, seed=0))
    for _ in range(40):
        run.step()
    a = outer_assemble(run.outer_history, run.u, run.outer_metric, WeightScheme())
    b = outer_assemble(run.outer_history, run.u, run.outer_metric, WeightScheme())
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])


def test_final_chain_examples():
    J, G = final_chain(identity_transform, [2.0], [[1.0, -1.0]])
    assert J == 2.0
    np.testing.assert_array_equal(G, [1.0, -1.0])

    def scaled(w):
        return 3.0 * float(w[0]), np.array([3.0])

    J, G = final_chain(scaled, [2.0], [[1.0, -1.0]])
    assert J == 6.0
    np.testing.assert_array_equal(G, [3.0, -3.0])
    with pytest.raises(ValueError):
        identity_transform([1.0, 2.0])


def _toy_nested():
    # J(u) = W + W^2 with W = int x1 * (int (u - x2)^2 dx2) dx1 on U(0,1)^2
    def inner(u, x1, x2):
        r = u[0] - x2[0]
        return np.array([r * r]), np.array([[2 * r]])

    def outer(u, x1, v):
        return np.array([x1[0] * v[0]]), np.zeros((1, 1)), np.array([[x1[0]]])

    def transform(w):
        return float(w[0] + w[0] ** 2), np.array([1 + 2 * w[0]])

    return NestedObjective(BoxDomain([-1.0], [2.0]), U01, outer, U01, inner, transform, "toy")


def test_nested_objective_validation():
    with pytest.raises(ValueError):
        NestedObjective(BoxDomain([0.0], [1.0]), U01, lambda u, x, v: None, U01, None)


def test_toy_nested_converges():
    # W = ((u - 1/2)^2 + 1/12) / 2 is positive, so the minimiser is u = 1/2
    traj = run_nested(_toy_nested(), NestedConfig(tau=0.2, iterations=2000, seed=0, u0=[1.8]))
    assert abs(traj.final[0] - 0.5) < 0.05
    assert traj.logged["z_inner"].shape == traj.log_iterations.shape


def test_degenerate_nesting_matches_plain_csg():
    pb = quadratic_problem(1)

    def outer(u, x1, v):
        val, grad = pb.integrand(u, x1)
        return np.array([val]), grad[None, :], None

    nested = NestedObjective(pb.box, pb.measure, outer, name="flat")
    a = run_nested(nested, NestedConfig(iterations=500, seed=7))
    b = run_csg(pb, CSGConfig(iterations=500, seed=7))
    np.testing.assert_array_equal(a.designs, b.designs)
    np.testing.assert_array_equal(a.gradients, b.gradients)


def test_nested_run_is_reproducible():
    cfg = NestedConfig(iterations=100, seed=3)
    a = run_nested(_toy_nested(), cfg)
    b = run_nested(_toy_nested(), cfg)
    np.testing.assert_array_equal(a.designs, b.designs)


def test_nested_counts_evaluations():
    run = NestedRun(_toy_nested(), NestedConfig(iterations=5, seed=0))
    for _ in range(5):
        run.step()
    assert run.evaluations == 10


# -- sums of integrals -------------------------------------------------------------

def test_parse_groups():
    assert parse_groups("5x2", 10)[-1] == [8, 9]
    assert parse_groups("0-1,2", 3) == [[0, 1], [2]]
    assert parse_groups([[1], [0]], 2) == [[1], [0]]
    with pytest.raises(ValueError):
        parse_groups("0-1", 3)
    with pytest.raises(ValueError):
        parse_groups([[0, 1], [1]], 2)


def test_sum_validation():
    g = IntegralGroup((0,), U01, lambda u, x: (0.0, np.zeros(2)))
    with pytest.raises(ValueError):
        SumOfIntegrals(BoxDomain([0, 0], [1, 1]), [g, g])
    with pytest.raises(ValueError):
        SumOfIntegrals(BoxDomain([0, 0], [1, 1]), [g], sample_dim=2)
    with pytest.raises(ValueError):
        SumOfIntegrals(BoxDomain([0, 0], [1, 1]), [])
    with pytest.raises(ValueError):
        IntegralGroup((0, 1), U01, lambda u, x: None)


def test_single_group_matches_plain_csg():
    pb = quadratic_problem(2)
    whole = SumOfIntegrals(pb.box, [IntegralGroup((0, 1), pb.measure, pb.integrand)])
    a = run_sum(whole, CSGConfig(iterations=300, seed=1))
    b = run_csg(pb, CSGConfig(iterations=300, seed=1))
    np.testing.assert_array_equal(a.designs, b.designs)


def test_split_estimate_is_stack_of_group_estimates():
    split = quadratic_split(2, "2x1")
    cfg = CSGConfig(iterations=60, seed=2)
    states = [_GroupState(g, 2, cfg) for g in split.groups]
    rng = np.random.default_rng(2)
    u = np.array([1.5, -2.0])
    for _ in range(60):
        _, G = sum_estimate(states, u, rng)
        expect = np.zeros(2)
        for i, st in enumerate(states):
            w = brute_empirical(st.history, u[[i]], st.metric)
            expect += w @ st.history.gradients
            # a group only ever touches its own coordinate
            assert np.all(st.history.gradients[:, 1 - i] == 0)
        np.testing.assert_allclose(G, expect, atol=1e-12)
        u = csg_step(u, G, 0.5, split.box)


def test_split_converges_per_coordinate():
    traj = run_sum(quadratic_split(2, "2x1"), CSGConfig(iterations=2000, seed=2))
    assert np.all(np.abs(traj.final) < 0.05)
    assert set(traj.logged) == {"z_g0", "z_g1"}


def test_constant_groups_give_zero_gradient():
    def const(u, x):
        return 2.0, np.zeros(2)

    pb = SumOfIntegrals(BoxDomain([-1, -1], [1, 1]),
                        [IntegralGroup((0,), U01, const), IntegralGroup((1,), U01, const)])
    traj = run_sum(pb, CSGConfig(iterations=20, seed=0, u0=[0.3, -0.2]))
    np.testing.assert_array_equal(traj.gradients, 0.0)
    np.testing.assert_allclose(traj.objectives, 4.0)
