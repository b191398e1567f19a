import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize

from hdfl.classifiers import LinearModel, MlpModel, TrainConfig, train_decision_tree, train_logistic_regression
from hdfl.errors import DataError, ZeroWeightError
from hdfl.geometry import Basis, Dataset, SeedSpec, generate, subspace_gaussians_spec
from hdfl.probe import (
    calibrated_radius,
    fragility_stats,
    hyperplane_distances,
    local_complexity,
    margin_linear,
    margins_linear,
    numerical_rank,
    off_manifold_decomposition,
)


def test_margin_known_values():
    m = LinearModel(np.array([3.0, 4.0]), 0.0)
    assert margin_linear(m, [3.0, 4.0]) == 5.0
    assert margin_linear(m, [4.0, -3.0]) == 0.0


def test_margin_matches_constrained_minimisation():
    g = np.random.default_rng(0)
    for _ in range(5):
        w, b, x = g.standard_normal(4), g.standard_normal(), g.standard_normal(4)
        res = minimize(lambda d: d @ d, np.zeros(4), method="SLSQP",
                       constraints={"type": "eq", "fun": lambda d: w @ (x + d) + b},
                       options={"ftol": 1e-16, "maxiter": 200})
        assert abs(np.sqrt(res.fun) - margin_linear(LinearModel(w, b), x)) < 1e-8


def test_zero_weight_raises():
    with pytest.raises(ZeroWeightError):
        margin_linear(LinearModel(np.zeros(2), 1.0), [1.0, 1.0])


def test_linear_model_is_never_complex():
    m = LinearModel(np.array([1.0, 2.0, -1.0]), 0.5)
    for x in np.random.default_rng(1).standard_normal((20, 3)):
        r = local_complexity(m, x, margin_linear(m, x) + 1.0, rho=0.5)
        assert (r.nearby_count, r.independent_count, r.is_locally_complex) == (1, 1, False)


def test_duplicated_units_have_rank_one():
    k = 6
    W1 = np.tile(np.array([[1.0, -1.0, 0.5]]), (k, 1))
    m = MlpModel((W1, np.ones((1, k))), (np.full(k, 0.2), np.zeros(1)))
    r = local_complexity(m, np.array([1.0, 0.0, 0.0]), 10.0)
    assert r.nearby_count == k + 1  # k copies plus the output hyperplane
    assert r.independent_count == 1


def test_random_mlp_is_locally_complex():
    g = SeedSpec(3).generator()
    m = MlpModel((g.standard_normal((200, 50)) * np.sqrt(2 / 50), g.standard_normal((1, 200)) / 10),
                 (g.standard_normal(200), np.zeros(1)))
    x = g.standard_normal(50)
    r = local_complexity(m, x, calibrated_radius(m, x))
    assert r.independent_count >= 25 and r.is_locally_complex


def test_tree_hyperplanes_are_axis_aligned():
    data = Dataset(np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]), np.array([-1, 1, 1, -1]))
    t = train_decision_tree(data)
    normals, dists = hyperplane_distances(t, np.array([0.5, 0.5]))
    assert np.all(np.sum(normals != 0, axis=1) == 1)
    assert np.allclose(dists, 0.0)


def test_complexity_rejects_bad_radius():
    with pytest.raises(DataError):
        local_complexity(LinearModel(np.ones(2), 0.0), np.zeros(2), 0.0)


def test_numerical_rank():
    assert numerical_rank(np.zeros((0, 3))) == 0
    assert numerical_rank(np.eye(4)) == 4
    assert numerical_rank(np.array([[1.0, 2.0], [2.0, 4.0 + 1e-12]])) == 1


def test_shrink_factor_cases():
    e1 = Basis(np.array([[1.0], [0.0], [0.0]]))
    d = off_manifold_decomposition(LinearModel(np.array([2.0, 0.0, 0.0]), 0.0), e1)
    assert d.shrink_factor == 1.0 and d.theta == 0.0
    d = off_manifold_decomposition(LinearModel(np.array([1.0, 0.0, 1.0]), 0.0), e1)
    assert d.shrink_factor == pytest.approx(1 / np.sqrt(2), abs=1e-12)


def test_margin_identity_on_manifold():
    spec = subspace_gaussians_spec(40, 2, 5)
    data = generate(spec, 20, 1)
    m = train_logistic_regression(data, TrainConfig(learning_rate=0.5, epochs=100, seed=SeedSpec(2)))
    dec = off_manifold_decomposition(m, spec.basis)
    par = LinearModel(dec.w_parallel, m.b)
    for x in data.points:
        assert abs(margin_linear(m, x) - dec.shrink_factor * margin_linear(par, x)) < 1e-10


def test_frac_below_edges():
    m = LinearModel(np.array([1.0, 0.0]), 0.0)
    data = Dataset(np.array([[2.0, 0.0], [-2.0, 1.0]]), np.array([1, -1]))
    s = fragility_stats(m, data, 1.0)
    assert s.frac_below == 0.0
    assert s.fraction_below(np.inf) == 1.0
    assert s.min_margin == 2.0


def test_fragility_report_and_csv():
    spec = subspace_gaussians_spec(10, 2, 5)
    data = generate(spec, 5, 1)
    m = train_logistic_regression(data)
    s = fragility_stats(m, data, 0.5, basis=spec.basis)
    d = s.to_dict()
    assert 0 < d["shrink_factor"] <= 1
    json.dumps(d)
    lines = s.margins_csv().splitlines()
    assert lines[0] == "point_index,margin,label"
    assert len(lines) == data.n + 1
    assert np.allclose(s.margins, margins_linear(m, data.points))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=3, max_size=3),
       st.floats(-5, 5), st.lists(st.floats(-10, 10), min_size=3, max_size=3))
def test_margin_is_distance_to_projection(w, b, x):
    w, x = np.array(w), np.array(x)
    if np.linalg.norm(w) < 1e-3:
        return
    m = LinearModel(w, b)
    proj = x - (w @ x + b) / (w @ w) * w
    assert abs(w @ proj + b) < 1e-8 * (1 + abs(b) + np.abs(w).sum() * np.abs(x).sum())
    assert margin_linear(m, x) == pytest.approx(np.linalg.norm(x - proj), rel=1e-9, abs=1e-12)
