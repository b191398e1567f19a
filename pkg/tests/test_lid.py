import math

import numpy as np
import pytest

from hdfl.errors import DataError, DuplicatePointError, UndefinedEstimateError
from hdfl.lid import lid_contrast, lid_csv, lid_from_distances, lid_mle, lid_mle_batch, twonn, twonn_from_ratios


def test_mle_formula_three_radii():
    assert lid_from_distances([1.0, 2.0, 4.0]) == pytest.approx(3 / math.log(8), rel=1e-12)


def test_mle_geometric_sequence_limit():
    r = 2.0 ** np.arange(200)
    # mean of log(r_i / r_k) over i = 1..k is -(k - 1) ln 2 / 2
    expected = 2 / ((len(r) - 1) * math.log(2))
    assert lid_from_distances(r) == pytest.approx(expected, rel=1e-12)


def test_mle_rejects_equal_radii_and_zero():
    with pytest.raises(UndefinedEstimateError):
        lid_from_distances([1.0, 1.0, 1.0])
    with pytest.raises(DuplicatePointError):
        lid_from_distances([0.0, 1.0])


def test_mle_unit_square():
    X = np.random.default_rng(0).random((2000, 2))
    values = lid_mle_batch(X[:100], X, k=20)
    assert 1.7 <= values.mean() <= 2.3


def test_mle_skips_single_self_match():
    X = np.random.default_rng(1).random((50, 3))
    inside = lid_mle(X[0], X, k=10).value
    outside = lid_mle(X[0], X[1:], k=10).value
    assert inside == outside


def test_mle_duplicate_anchor_copies():
    X = np.random.default_rng(1).random((30, 2))
    X = np.vstack([X, X[:1]])
    with pytest.raises(DuplicatePointError):
        lid_mle(X[0], X, k=5)


def test_mle_needs_k_neighbours():
    with pytest.raises(DataError):
        lid_mle(np.zeros(2), np.random.default_rng(0).random((5, 2)), k=10)


def test_twonn_formula():
    value, excluded = twonn_from_ratios([2.0, 2.0, 2.0, 2.0])
    assert value == pytest.approx(1 / math.log(2)) and excluded == 0


def test_twonn_drops_unit_ratios():
    value, excluded = twonn_from_ratios([1.0, 2.0, 4.0])
    assert excluded == 1
    assert value == pytest.approx(2 / math.log(8))


def test_twonn_random_points_on_a_line():
    g = np.random.default_rng(0)
    t = g.random(1000)
    X = np.outer(t, g.standard_normal(5))
    assert abs(twonn(X).value - 1.0) < 0.3


def test_twonn_equally_spaced_lattice_is_degenerate():
    # interior ratios are 1 + O(1e-9), so only the two end points carry information
    t = np.arange(200, dtype=float)
    t += 1e-9 * np.random.default_rng(0).standard_normal(200)
    X = np.column_stack([t, np.zeros(200)])
    assert twonn(X).value == pytest.approx(200 / (2 * math.log(2)), rel=1e-3)


@pytest.mark.parametrize("d", [2, 5])
def test_twonn_hypercube(d):
    X = np.random.default_rng(d).random((2000, d))
    assert abs(twonn(X).value - d) <= 0.15 * d


def test_twonn_duplicates():
    with pytest.raises(DuplicatePointError):
        twonn(np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]]))


def test_contrast_identical_groups():
    g = np.random.default_rng(2)
    ref = g.random((300, 3))
    c = lid_contrast(ref[:20], ref[:20], ref, k=10)
    assert c.mean_natural == c.mean_adversarial
    assert c.rank_sum_p == pytest.approx(1.0)


def test_contrast_line_vs_ball():
    g = np.random.default_rng(3)
    line = np.zeros((1000, 10))
    line[:, 0] = g.random(1000)
    nat = line[:50]
    u = g.standard_normal((50, 10))
    u *= (g.random(50) ** 0.1 / np.linalg.norm(u, axis=1))[:, None]
    adv = nat + 0.05 * u
    mean_nat, mean_adv, p = lid_contrast(nat, adv, line, k=20)
    assert mean_adv > mean_nat and p < 0.05


def test_lid_csv():
    text = lid_csv([(0, "natural", "mle", 20, 1.5)])
    assert text == "anchor_index,group,estimator,k,value\n0,natural,mle,20,1.5\n"
