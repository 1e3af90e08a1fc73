from __future__ import annotations

import numpy as np
import pytest

from _oracles import brute_distance, random_history
from csg.bench.problems import quadratic_problem
from csg.core import CSGConfig, run_csg
from csg.history import History, ProductMetric
from csg.monitor import (ErrorReport, LipschitzTracker, error_bound, lipschitz_estimate,
                         should_stop, z_sup_estimate, z_sup_on_grid, z_value)

M = ProductMetric.design_sample(1, 1)


def hist(xs, u=0.0, grads=None):
    h = History(1, 1)
    for i, x in enumerate(xs):
        g = [0.0] if grads is None else [grads[i]]
        h.append([u], [x], 0.0, g)
    return h


def test_z_value_examples():
    h = hist([0.0, 1.0])
    assert z_value(h, [0.0], [1.0], M) == 0.0
    assert z_value(h, [0.0], [0.5], M) == 0.5
    assert z_value(hist([0.3]), [0.2], [0.3], M) == pytest.approx(0.2)
    with pytest.raises(LookupError):
        z_value(History(1, 1), [0.0], [0.0], M)


def test_z_sup_examples():
    assert z_sup_estimate(hist([0.3], u=0.0), [0.7], M, "paper") == pytest.approx(0.7)
    h = hist([0.0, 1.0])
    assert z_sup_estimate(h, [0.0], M, "paper") == 0.0
    assert z_sup_estimate(h, [0.0], M, "leave-one-out") == 1.0
    assert z_sup_estimate(hist([0.0, 0.5, 1.0]), [0.0], M) == 0.5
    with pytest.raises(LookupError):
        z_sup_estimate(hist([0.0]), [0.0], M, "leave-one-out")
    with pytest.raises(LookupError):
        z_sup_estimate(History(1, 1), [0.0], M, "paper")
    with pytest.raises(ValueError):
        z_sup_estimate(h, [0.0], M, "median")


def test_z_value_is_min_and_lipschitz():
    rng = np.random.default_rng(0)
    h = random_history(rng, 40, 2, 2)
    m = ProductMetric.design_sample(2, 2, 0.5, 2.0)
    u = rng.uniform(-1, 1, 2)
    for _ in range(30):
        x, y = rng.uniform(-0.5, 0.5, 2), rng.uniform(-0.5, 0.5, 2)
        zx, zy = z_value(h, u, x, m), z_value(h, u, y, m)
        assert zx == pytest.approx(brute_distance(h, u, x, m), rel=1e-12)
        assert abs(zx - zy) <= 2.0 * np.linalg.norm(x - y) + 1e-12


def test_fixed_design_sup_estimates():
    rng = np.random.default_rng(1)
    h = History(1, 1)
    loo = []
    for n in range(60):
        h.append([0.0], rng.uniform(-0.5, 0.5, 1), 0.0, [0.0])
        assert z_sup_estimate(h, [0.0], M, "paper") == 0.0
        if n >= 1:
            loo.append(z_sup_estimate(h, [0.0], M, "leave-one-out"))
    # new samples can only shrink nearest-neighbour gaps
    assert np.all(np.diff(loo) <= 1e-15)


def test_lipschitz_examples():
    h = History(1, 1)
    for x in (-0.4, 0.1, 0.3):
        h.append([0.0], [x], 0.0, [0.0 - x])
    assert lipschitz_estimate(h) == pytest.approx(1.0)
    const = hist([0.0, 0.2, 0.4], grads=[3.0, 3.0, 3.0])
    assert lipschitz_estimate(const) == 0.0
    assert lipschitz_estimate(hist([0.0, 1.0], grads=[0.0, 2.0])) == pytest.approx(2.0)
    with pytest.raises(LookupError):
        lipschitz_estimate(hist([0.0]))
    with pytest.raises(LookupError):
        lipschitz_estimate(hist([0.5, 0.5]))


def test_lipschitz_tracker_incremental_matches_batch():
    rng = np.random.default_rng(2)
    h = random_history(rng, 30, 2, 1)
    tr = LipschitzTracker()
    partial = History(2, 1)
    for rec in h:
        partial.append(rec.design, rec.point, rec.value, rec.gradient)
        tr.update(partial)
    assert tr.value == pytest.approx(lipschitz_estimate(h), rel=1e-12)


def test_lipschitz_is_lower_bound_on_quadratic():
    pb = quadratic_problem(2)
    traj = run_csg(pb, CSGConfig(iterations=200, seed=0, monitor="full"))
    L = traj.logged["lipschitz"]
    assert np.all(L[np.isfinite(L)] <= 1.0 + 1e-12)
    assert L[-1] == pytest.approx(1.0, rel=0.2)


def test_error_bound_and_report():
    assert error_bound(1.0, 0.3) == pytest.approx(0.3)
    assert error_bound(5.0, 0.0) == 0.0
    with pytest.raises(ValueError):
        error_bound(-1.0, 1.0)
    r = ErrorReport.build(10, 0.2, 3.0)
    assert r.error_bound == pytest.approx(0.6)


def test_should_stop():
    assert should_stop(0.0, 0.1)
    assert not should_stop(1.0, 0.1)
    assert not should_stop(0.0, 0.1, n=3, min_iterations=10)
    assert should_stop(0.0, 0.1, n=10, min_iterations=10)
    with pytest.raises(ValueError):
        should_stop(0.0, 0.0)


def test_bound_triggers_stop_on_pilot_run():
    pb = quadratic_problem(1)
    traj = run_csg(pb, CSGConfig(iterations=3000, seed=0, monitor="full", u0=[2.0]))
    stops = [n for n, b in zip(traj.log_iterations, traj.logged["error_bound"])
             if np.isfinite(b) and should_stop(b, 0.01, n, min_iterations=10)]
    assert stops, "bound never dropped below 0.01"


def test_grid_sup_dominates_sample_estimate():
    rng = np.random.default_rng(4)
    h = random_history(rng, 50, 1, 1, design_spread=0.0)
    from csg.measures import UniformBox
    rule = UniformBox.cube(-0.5, 0.5, 1).grid_rule(20_000)
    grid = z_sup_on_grid(h, [0.0], M, rule)
    assert grid >= z_sup_estimate(h, [0.0], M, "paper")
    xs = np.sort(h.points.ravel())
    exact = max(xs[0] + 0.5, 0.5 - xs[-1], np.max(np.diff(xs)) / 2)
    assert grid == pytest.approx(exact, abs=1e-4)
