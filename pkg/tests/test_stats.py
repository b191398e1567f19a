import math

import numpy as np
import pytest
from scipy.stats import norm

from hdfl.parallel import pmap
from hdfl.stats import mean_ci, median_ci, normal_cdf, wilson_interval


@pytest.mark.parametrize("x", [-8.0, -3.0, -0.5, 0.0, 1.0, 4.0])
def test_normal_cdf_matches_scipy(x):
    assert normal_cdf(x) == pytest.approx(norm.cdf(x), rel=1e-13)


def test_wilson_known_value():
    # 50/100 at z=1.96: centre 0.5, half-width ~0.0962
    lo, hi = wilson_interval(50, 100)
    assert lo == pytest.approx(0.40383, abs=1e-5)
    assert hi == pytest.approx(0.59617, abs=1e-5)


def test_wilson_extremes_clamped():
    assert wilson_interval(0, 10)[0] == 0.0
    assert wilson_interval(10, 10)[1] == 1.0


def test_median_ci_brackets_median():
    v = np.random.default_rng(0).standard_normal(20)
    med, lo, hi = median_ci(v)
    assert lo <= med <= hi
    assert lo in v and hi in v


def test_median_ci_small_n():
    assert median_ci([3.0]) == (3.0, 3.0, 3.0)


def test_mean_ci():
    m, lo, hi = mean_ci([1.0, 2.0, 3.0])
    assert m == 2.0
    assert hi - m == pytest.approx(1.959963984540054 / math.sqrt(3))


def _square(x):
    return x * x


def test_pmap_preserves_order():
    assert pmap(_square, range(10), workers=2) == [x * x for x in range(10)]
    assert pmap(_square, range(5), workers=1) == [0, 1, 4, 9, 16]
