"""Intrinsic-dimensionality estimators: MLE local ID and the TwoNN global ID.

Neighbour search is exact and brute force.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist
from scipy.stats import mannwhitneyu

from .errors import DataError, DuplicatePointError, UndefinedEstimateError
from .geometry import Dataset

DEFAULT_K = 20


@dataclass(frozen=True)
class LidEstimate:
    value: float
    k: int
    estimator: str
    anchor: Optional[int] = None
    excluded: int = 0


def _points(reference) -> np.ndarray:
    if isinstance(reference, Dataset):
        return reference.points
    return np.atleast_2d(np.asarray(reference, dtype=float))


def lid_from_distances(radii) -> float:
    """MLE of local ID from the k nearest-neighbour distances.

    ``-1 / mean(log(r_i / r_k))`` over all ``i = 1..k``; the ``i = k`` term is
    zero but still counts in the mean (divisor ``k``).
    """
    r = np.sort(np.asarray(radii, dtype=float))
    if np.any(r <= 0):
        raise DuplicatePointError("zero neighbour distance")
    s = np.mean(np.log(r / r[-1]))
    if s == 0.0:
        raise UndefinedEstimateError("all neighbour distances are equal (infinite LID)")
    return -1.0 / s


def _knn_radii(anchors: np.ndarray, ref: np.ndarray, k: int) -> np.ndarray:
    D = cdist(anchors, ref)
    zeros = np.sum(D == 0.0, axis=1)
    if np.any(zeros > 1):
        raise DuplicatePointError("anchor coincides with more than one reference point")
    if ref.shape[0] - zeros.max(initial=0) < k:
        raise DataError(f"reference needs at least k={k} points distinct from the anchor")
    D[D == 0.0] = np.inf  # the anchor itself, when it belongs to the reference
    return np.partition(D, k - 1, axis=1)[:, :k]


def lid_mle_batch(anchors, reference, k: int = DEFAULT_K) -> np.ndarray:
    if k < 2:
        raise DataError("k must be >= 2")
    anchors = np.atleast_2d(np.asarray(anchors, dtype=float))
    radii = _knn_radii(anchors, _points(reference), k)
    return np.array([lid_from_distances(r) for r in radii])


def lid_mle(anchor, reference, k: int = DEFAULT_K) -> LidEstimate:
    """Local ID at ``anchor`` from its k nearest positive-distance neighbours.

    A single exact copy of the anchor in ``reference`` is skipped; a second
    copy is a duplicate error.
    """
    value = float(lid_mle_batch(np.asarray(anchor, dtype=float)[None, :], reference, k)[0])
    return LidEstimate(value, k, "mle")


def twonn(data) -> LidEstimate:
    """Two-nearest-neighbour ID, closed-form MLE ``n / sum(log(r2 / r1))``.

    Points whose two neighbours are equidistant (ratio exactly 1) carry no
    information and are excluded; their count is reported.
    """
    X = _points(data)
    n = len(X)
    if n < 3:
        raise DataError("TwoNN needs at least 3 points")
    D = cdist(X, X)
    np.fill_diagonal(D, np.inf)
    r = np.partition(D, 1, axis=1)[:, :2]
    r.sort(axis=1)
    if np.any(r[:, 0] == 0.0):
        raise DuplicatePointError("dataset contains duplicate points")
    value, excluded = twonn_from_ratios(r[:, 1] / r[:, 0])
    return LidEstimate(value, 2, "twonn", excluded=excluded)


def twonn_from_ratios(mu) -> tuple[float, int]:
    """TwoNN estimate from second/first neighbour distance ratios.

    Returns the estimate and the number of ratios equal to 1 that were dropped.
    """
    mu = np.asarray(mu, dtype=float)
    keep = mu > 1.0
    if not keep.any():
        raise UndefinedEstimateError("every point has equidistant first and second neighbours")
    return float(keep.sum() / np.sum(np.log(mu[keep]))), int(len(mu) - keep.sum())


@dataclass(frozen=True)
class LidContrast:
    mean_natural: float
    mean_adversarial: float
    rank_sum_p: float
    natural: np.ndarray
    adversarial: np.ndarray

    def __iter__(self):
        return iter((self.mean_natural, self.mean_adversarial, self.rank_sum_p))


def lid_contrast(natural: Sequence, adversarial: Sequence, reference, k: int = DEFAULT_K) -> LidContrast:
    """Compare MLE local ID of natural and adversarial points (two-sided Mann-Whitney)."""
    nat = np.atleast_2d(np.asarray(natural, dtype=float))
    adv = np.atleast_2d(np.asarray(adversarial, dtype=float))
    if nat.size == 0 or adv.size == 0:
        raise DataError("both groups must be non-empty")
    lid_nat = lid_mle_batch(nat, reference, k)
    lid_adv = lid_mle_batch(adv, reference, k)
    p = float(mannwhitneyu(lid_nat, lid_adv, alternative="two-sided").pvalue)
    return LidContrast(float(lid_nat.mean()), float(lid_adv.mean()), p, lid_nat, lid_adv)


def lid_csv(rows) -> str:
    """Rows of (anchor_index, group, estimator, k, value)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["anchor_index", "group", "estimator", "k", "value"])
    for i, group, est, k, value in rows:
        w.writerow([i, group, est, k, repr(float(value))])
    return buf.getvalue()
