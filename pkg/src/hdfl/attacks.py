"""Adversarial perturbations, noise-ball misclassification and attack transfer."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Union

import numpy as np

from .classifiers import LinearModel, MlpModel, input_gradient, predict
from .errors import DataError, DimensionMismatchError, NoDirectionError, ZeroWeightError
from .geometry import SeedSpec, as_seed
from .parallel import pmap
from .stats import wilson_interval

BLOCK_TRIALS = 1024
DEFAULT_T0 = 1e-3
DEFAULT_T_MAX = 1e3
DEFAULT_RTOL = 1e-8


@dataclass(frozen=True)
class AttackResult:
    original: np.ndarray
    perturbation: np.ndarray
    success: bool
    norm: float
    queries: int
    kind: str = ""
    linf: float = 0.0

    @property
    def adversarial(self) -> np.ndarray:
        return self.original + self.perturbation


def _label_at(model, x) -> int:
    return int(predict(model, x)[0])


def _result(model, x, delta, kind, queries) -> AttackResult:
    flipped = _label_at(model, x + delta) != _label_at(model, x)
    return AttackResult(x.copy(), delta, bool(flipped), float(np.linalg.norm(delta)),
                        queries + 2, kind, float(np.max(np.abs(delta), initial=0.0)))


def minimal_linear_attack(model: LinearModel, x, overshoot: float = 1e-6) -> AttackResult:
    """Project ``x`` onto the hyperplane, stepping ``overshoot`` (relative) past it."""
    x = np.asarray(x, dtype=float)
    if x.shape != model.w.shape:
        raise DimensionMismatchError("point and model differ in dimension")
    w2 = float(model.w @ model.w)
    if w2 == 0.0:
        raise ZeroWeightError("weight vector is zero")
    if not overshoot > 0:
        raise DataError("overshoot must be positive")
    score = float(model.w @ x) + model.b
    delta = -(1.0 + overshoot) * score / w2 * model.w
    return _result(model, x, delta, "minimal_linear", 0)


def gradient_sign_attack(model, x, y: int, epsilon: float) -> AttackResult:
    """One step of size ``epsilon`` along the sign of the input gradient of the loss."""
    x = np.asarray(x, dtype=float)
    if epsilon < 0:
        raise DataError("epsilon must be non-negative")
    if not isinstance(model, (LinearModel, MlpModel)):
        raise NoDirectionError(f"{type(model).__name__} has zero input gradient almost everywhere")
    grad = input_gradient(model, x, y)
    if not np.any(grad):
        raise NoDirectionError("input gradient is exactly zero")
    delta = epsilon * np.sign(grad)
    return _result(model, x, delta, "gradient_sign", 1)


def boundary_distances(model, x, directions, t0: float = DEFAULT_T0,
                       t_max: float = DEFAULT_T_MAX, rtol: float = DEFAULT_RTOL) -> np.ndarray:
    """Distance to the first label flip along each row of ``directions``.

    The step doubles from ``t0`` until the label changes, then a bisection
    narrows the bracket to ``rtol`` relative width; the upper end (a point
    that is flipped) is returned. Directions with no flip before ``t_max``
    give ``inf``.
    """
    x = np.asarray(x, dtype=float)
    D = np.atleast_2d(np.asarray(directions, dtype=float))
    if D.shape[1] != len(x):
        raise DimensionMismatchError("direction and point differ in dimension")
    norms = np.linalg.norm(D, axis=1)
    if np.any(norms == 0):
        raise DataError("direction must be nonzero")
    U = D / norms[:, None]
    p0 = _label_at(model, x)
    k = len(U)
    lo = np.zeros(k)
    hi = np.full(k, np.inf)
    t = np.full(k, float(t0))
    open_ = np.ones(k, dtype=bool)
    while open_.any():
        idx = np.nonzero(open_)[0]
        flipped = predict(model, x + t[idx, None] * U[idx]) != p0
        hi[idx[flipped]] = t[idx[flipped]]
        grow = idx[~flipped]
        lo[grow] = t[grow]
        t[grow] *= 2.0
        open_[idx[flipped]] = False
        open_[grow[t[grow] > t_max]] = False
    found = np.isfinite(hi)
    while True:
        active = np.nonzero(found & (hi - lo > rtol * hi))[0]
        if len(active) == 0:
            break
        mid = 0.5 * (lo[active] + hi[active])
        flipped = predict(model, x + mid[:, None] * U[active]) != p0
        hi[active[flipped]] = mid[flipped]
        lo[active[~flipped]] = mid[~flipped]
    return hi


def boundary_distance(model, x, direction, **kw) -> float:
    return float(boundary_distances(model, x, np.asarray(direction, dtype=float)[None, :], **kw)[0])


@dataclass(frozen=True)
class NoiseBallEstimate:
    probability: float
    trials: int
    wilson_ci_95: tuple
    sigma: float
    errors: int = 0


def _noise_block(task):
    model, x, y, sigma, seed, count = task
    g = seed.generator().standard_normal((count, len(x)))
    return int(np.sum(predict(model, x + sigma * g) != y))


def noise_ball_misclassification(model, x, y: int, sigma: float, trials: int,
                                 seed: Union[SeedSpec, int], workers: int = 1) -> NoiseBallEstimate:
    """Monte Carlo estimate of P(predict(x + sigma g) != y), g ~ N(0, I).

    Trials are grouped in fixed blocks of ``BLOCK_TRIALS``; block ``b`` draws
    from ``seed.child(b)``, so the estimate is identical for any worker count.
    """
    if not sigma > 0:
        raise DataError("sigma must be positive")
    if trials < 1:
        raise DataError("trials must be >= 1")
    x = np.asarray(x, dtype=float)
    seed = as_seed(seed)
    tasks = []
    for b, start in enumerate(range(0, trials, BLOCK_TRIALS)):
        tasks.append((model, x, y, sigma, seed.child(b), min(BLOCK_TRIALS, trials - start)))
    errors = sum(pmap(_noise_block, tasks, workers))
    return NoiseBallEstimate(errors / trials, trials, wilson_interval(errors, trials),
                             float(sigma), errors)


def transfer_attack(result: AttackResult, target) -> bool:
    """Does the perturbation found on one model also flip ``target``?"""
    x = result.original
    if getattr(target, "dim", len(x)) != len(x):
        raise DimensionMismatchError("attack and target differ in dimension")
    if not np.any(result.perturbation):
        return False
    return _label_at(target, x + result.perturbation) != _label_at(target, x)


ATTACK_CSV_COLUMNS = ("point_index", "attack_kind", "norm", "success",
                      "transfer_target", "transferred")


def attacks_csv(rows) -> str:
    """Rows are tuples in ``ATTACK_CSV_COLUMNS`` order."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ATTACK_CSV_COLUMNS)
    for i, kind, norm, success, target, transferred in rows:
        w.writerow([int(i), kind, repr(float(norm)), int(bool(success)), target,
                    "" if transferred is None else int(bool(transferred))])
    return buf.getvalue()
