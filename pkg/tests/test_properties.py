"""Property-based invariants of weights, metrics, quadrature and seeding."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracles import brute_cells, brute_empirical, brute_nearest
from csg.bench.problems import quadratic_problem
from csg.core import CSGConfig, run_csg
from csg.history import History, ProductMetric
from csg.measures import TruncatedNormal, UniformBox, equal_mass_nodes, run_rng
from csg.weights import (empirical_weights, exact_weights_grid, mc_weights,
                         nearest_index)

PROPS = settings(max_examples=60, deadline=None)


@st.composite
def histories(draw, max_n=50, ties=None):
    """Random history plus query design and metric.

    With ``ties`` the coordinates sit on a coarse integer lattice so that
    equidistant records are common and tie-breaking gets exercised.
    """
    n = draw(st.integers(1, max_n))
    d_u = draw(st.integers(1, 3))
    d_x = draw(st.integers(1, 3))
    seed = draw(st.integers(0, 2**32 - 1))
    lattice = draw(st.booleans()) if ties is None else ties
    c_u = draw(st.sampled_from([0.25, 1.0, 3.0]))
    c_x = draw(st.sampled_from([0.5, 1.0, 2.0]))
    rng = np.random.default_rng(seed)
    h = History(d_u, d_x)
    for _ in range(n):
        if lattice:
            u = rng.integers(-2, 3, d_u).astype(float)
            x = rng.integers(-2, 3, d_x) / 4.0
        else:
            u = rng.uniform(-1, 1, d_u)
            x = rng.uniform(-0.5, 0.5, d_x)
        h.append(u, x, float(rng.normal()), rng.normal(size=d_u))
    u_n = (rng.integers(-2, 3, d_u).astype(float) if lattice
           else rng.uniform(-1, 1, d_u))
    return h, u_n, ProductMetric.design_sample(d_u, d_x, c_u, c_x), rng


@PROPS
@given(histories())
def test_empirical_weights_match_oracle(case):
    h, u, m, _ = case
    w = empirical_weights(h, u, m)
    np.testing.assert_array_equal(w, brute_empirical(h, u, m))
    assert np.all(w >= 0)
    assert w.sum() == pytest.approx(1.0, abs=1e-12)
    # every weight is a whole number of samples
    np.testing.assert_allclose(w * len(h), np.round(w * len(h)), atol=1e-9)


@PROPS
@given(histories(), st.integers(2, 7))
def test_exact_grid_weights_match_oracle(case, res):
    h, u, m, _ = case
    measure = UniformBox.cube(-0.5, 0.5, h.sample_dim)
    rule = measure.grid_rule(res)
    w = exact_weights_grid(h, u, m, measure, res)
    np.testing.assert_allclose(w, brute_cells(h, u, m, rule.nodes, rule.masses), atol=1e-12)
    assert np.all(w >= 0)
    assert w.sum() == pytest.approx(1.0, abs=1e-12)


@PROPS
@given(histories(), st.integers(1, 300))
def test_mc_weights_are_a_probability_vector(case, m_draws):
    h, u, m, rng = case
    measure = UniformBox.cube(-0.5, 0.5, h.sample_dim)
    seed = int(rng.integers(2**31))
    w = mc_weights(h, u, m, measure, m_draws, np.random.default_rng(seed))
    assert np.all(w >= 0)
    assert w.sum() == pytest.approx(1.0, abs=1e-12)
    again = mc_weights(h, u, m, measure, m_draws, np.random.default_rng(seed))
    np.testing.assert_array_equal(w, again)


@PROPS
@given(histories())
def test_nearest_index_matches_scan(case):
    h, u, m, rng = case
    for _ in range(5):
        x = rng.uniform(-0.6, 0.6, h.sample_dim)
        if rng.random() < 0.5:
            x = np.round(4 * x) / 4
        q = np.concatenate([u, x])
        assert nearest_index(h, q, m) == brute_nearest(h, u, x, m)


@PROPS
@given(histories(), st.sampled_from([0.125, 0.5, 2.0, 16.0]))
def test_metric_scaling_keeps_argmin(case, s):
    # powers of two scale every distance exactly, so even ties are preserved
    h, u, m, rng = case
    ms = m.scaled(s)
    np.testing.assert_array_equal(empirical_weights(h, u, m), empirical_weights(h, u, ms))
    for _ in range(5):
        q = np.concatenate([u, rng.uniform(-0.6, 0.6, h.sample_dim)])
        assert nearest_index(h, q, m) == nearest_index(h, q, ms)


@settings(max_examples=25, deadline=None)
@given(histories(ties=False), st.floats(0.1, 10.0))
def test_metric_scaling_any_factor(case, s):
    # generic positions: no near-ties, so any positive factor keeps the argmin
    h, u, m, rng = case
    for _ in range(5):
        x = rng.uniform(-0.6, 0.6, h.sample_dim)
        q = np.concatenate([u, x])
        assert nearest_index(h, q, m.scaled(s)) == brute_nearest(h, u, x, m)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["empirical", "exact-grid", "mc"]),
       st.integers(1, 3))
def test_seed_reproducibility(seed, scheme, d):
    pb = quadratic_problem(d)
    cfg = CSGConfig(iterations=40, seed=seed, scheme=scheme, resolution=8, mc_samples=50)
    a, b = run_csg(pb, cfg), run_csg(pb, cfg)
    np.testing.assert_array_equal(a.designs, b.designs)
    np.testing.assert_array_equal(a.gradients, b.gradients)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 50), st.integers(0, 50))
def test_run_streams(seed, i, j):
    a = run_rng(seed, i).uniform(size=4)
    np.testing.assert_array_equal(a, run_rng(seed, i).uniform(size=4))
    if i != j:
        assert not np.array_equal(a, run_rng(seed, j).uniform(size=4))


@settings(max_examples=80, deadline=None)
@given(st.floats(-50, 50), st.floats(1e-3, 20), st.integers(1, 400), st.floats(0.5, 4))
def test_equal_mass_rule(mean, sd, n, radius):
    rule = equal_mass_nodes(mean, sd, n, radius)
    assert rule.masses.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(rule.masses == 1.0 / n)
    assert np.all(np.diff(rule.nodes) >= 0)
    # the subtraction loses a few ulps of |mean| when sd is tiny
    slack = 4 * np.finfo(float).eps * (abs(mean) + radius * sd)
    assert np.all(np.abs(rule.nodes - mean) <= radius * sd + slack)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(0.1, 3)), min_size=1, max_size=3),
       st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_tensor_rules_and_samples_stay_in_support(params, res, seed):
    means, sds = zip(*params)
    tn = TruncatedNormal(means, sds)
    box = tn.support()
    rule = tn.grid_rule(res)
    assert len(rule) == res ** len(params)
    assert rule.masses.sum() == pytest.approx(1.0, abs=1e-12)
    nodes = rule.nodes.reshape(len(rule), -1)
    assert np.all((nodes >= box.lo - 1e-12) & (nodes <= box.hi + 1e-12))
    x = tn.sample(np.random.default_rng(seed), size=200)
    assert np.all((x >= box.lo) & (x <= box.hi))
    ub = UniformBox.cube(-1.0, 2.0, len(params))
    assert ub.grid_rule(res).masses.sum() == pytest.approx(1.0, abs=1e-12)
