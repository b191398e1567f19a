"""Discriminant geometry: margins, local complexity and off-manifold weight mass."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .classifiers import LinearModel, MlpModel, TreeModel, unit_hyperplanes
from .errors import DataError, DimensionMismatchError, ZeroWeightError
from .geometry import Basis, Dataset, decompose

RANK_RTOL = 1e-8
DEFAULT_RHO = 0.25


def _weight_norm(model: LinearModel) -> float:
    nrm = float(np.linalg.norm(model.w))
    if nrm == 0.0:
        raise ZeroWeightError("weight vector is zero; the discriminant is undefined")
    return nrm


def margin_linear(model: LinearModel, x) -> float:
    """Euclidean distance from ``x`` to the hyperplane ``w.x + b = 0``."""
    nrm = _weight_norm(model)
    x = np.asarray(x, dtype=float)
    if x.shape != model.w.shape:
        raise DimensionMismatchError("point and weight vector differ in dimension")
    return abs(float(model.w @ x) + model.b) / nrm


def margins_linear(model: LinearModel, X) -> np.ndarray:
    nrm = _weight_norm(model)
    return np.abs(model.decision_function(X)) / nrm


def numerical_rank(normals: np.ndarray, rtol: float = RANK_RTOL) -> int:
    """Rank of stacked row vectors; singular values below ``rtol * s_max`` count as zero."""
    if normals.size == 0:
        return 0
    s = np.linalg.svd(normals, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


@dataclass(frozen=True)
class ComplexityReport:
    anchor: np.ndarray
    radius: float
    nearby_count: int
    independent_count: int
    ratio: float
    is_locally_complex: bool

    def to_dict(self) -> dict:
        d = asdict(self)
        d["anchor"] = self.anchor.tolist()
        return d


def hyperplane_distances(model, x) -> tuple[np.ndarray, np.ndarray]:
    """Normals and point-to-hyperplane distances of every local discriminant piece.

    For an MLP these are all hidden units plus the output under the frozen
    activation pattern at ``x`` (units with a zero composed normal are
    dropped); for a tree, every split in the tree; for a linear model, its
    single hyperplane.
    """
    x = np.asarray(x, dtype=float)
    if isinstance(model, LinearModel):
        return model.w[None, :].copy(), np.array([margin_linear(model, x)])
    if isinstance(model, MlpModel):
        A, c, _ = unit_hyperplanes(model, x)
        norms = np.linalg.norm(A, axis=1)
        keep = norms > 0
        A, c, norms = A[keep], c[keep], norms[keep]
        return A, np.abs(A @ x + c) / norms
    if isinstance(model, TreeModel):
        if x.shape != (model.dim,):
            raise DimensionMismatchError("anchor dimension mismatch")
        splits = list(model.root.splits())
        normals = np.zeros((len(splits), model.dim))
        dists = np.empty(len(splits))
        for i, (f, t) in enumerate(splits):
            normals[i, f] = 1.0
            dists[i] = abs(x[f] - t)
        return normals, dists
    raise TypeError(f"unsupported model {type(model).__name__}")


def calibrated_radius(model, x, quantile: float = 0.5) -> float:
    """Quantile of the hyperplane distances at ``x`` (the "auto" radius)."""
    _, dists = hyperplane_distances(model, x)
    if len(dists) == 0:
        raise DataError("model has no hyperplanes")
    return float(np.quantile(dists, quantile))


def local_complexity(model, x, radius: float, rho: float = DEFAULT_RHO) -> ComplexityReport:
    """Count hyperplanes within ``radius`` of ``x`` and the rank of their normals.

    The point is called locally complex when ``rank / N >= rho``.
    """
    if not radius > 0:
        raise DataError("radius must be positive")
    if not 0 < rho <= 1:
        raise DataError("rho must lie in (0, 1]")
    x = np.asarray(x, dtype=float)
    normals, dists = hyperplane_distances(model, x)
    near = normals[dists <= radius]
    rank = numerical_rank(near)
    ratio = rank / len(x)
    return ComplexityReport(x.copy(), float(radius), int(len(near)), rank, ratio, ratio >= rho)


@dataclass(frozen=True)
class Decomposition:
    w_parallel: np.ndarray
    w_perpendicular: np.ndarray
    shrink_factor: float
    theta: float


def off_manifold_decomposition(model: LinearModel, basis: Basis) -> Decomposition:
    """Split ``w`` into on- and off-manifold parts.

    ``shrink_factor = |w_par| / |w|``; for points in span(basis) the true
    margin is the margin computed with ``w_par`` alone times this factor.
    ``theta`` is the angle between ``w`` and the manifold.
    """
    nrm = _weight_norm(model)
    par, perp = decompose(model.w, basis)
    shrink = min(1.0, float(np.linalg.norm(par)) / nrm)
    return Decomposition(par, perp, shrink, float(np.arccos(shrink)))


@dataclass(frozen=True)
class FragilityStats:
    margins: np.ndarray
    labels: np.ndarray
    min_margin: float
    epsilon: float
    frac_below: float
    shrink_factor: Optional[float] = None

    def fraction_below(self, eps: float) -> float:
        return float(np.mean(self.margins < eps))

    def to_dict(self) -> dict:
        return {
            "min_margin": self.min_margin,
            "epsilon": self.epsilon,
            "frac_below": self.frac_below,
            "shrink_factor": self.shrink_factor,
            "n": int(len(self.margins)),
        }

    def margins_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["point_index", "margin", "label"])
        for i, (m, y) in enumerate(zip(self.margins, self.labels)):
            w.writerow([i, repr(float(m)), int(y)])
        return buf.getvalue()


def fragility_stats(model: LinearModel, data: Dataset, epsilon: float,
                    basis: Optional[Basis] = None) -> FragilityStats:
    if data.n == 0:
        raise DataError("empty dataset")
    if not epsilon > 0:
        raise DataError("epsilon must be positive")
    margins = margins_linear(model, data.points)
    if basis is None and data.manifold is not None:
        basis = data.manifold.basis
    shrink = off_manifold_decomposition(model, basis).shrink_factor if basis is not None else None
    return FragilityStats(margins, data.labels.copy(), float(margins.min()), float(epsilon),
                          float(np.mean(margins < epsilon)), shrink)


def report_json(report) -> str:
    return json.dumps(report.to_dict(), sort_keys=True)
