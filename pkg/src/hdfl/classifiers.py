"""From-scratch binary classifiers and their exact local affine maps.

Three families share one calling convention: ``model.decision_function(X)``
maps an ``(n, N)`` array to ``n`` real scores and the predicted label is
``sign(score)`` with ``sign(0) = +1``.

* :class:`LinearModel` -- logistic regression trained by full-batch gradient
  descent.
* :class:`MlpModel` -- ReLU network with a scalar output, trained by
  mini-batch SGD on the same logistic loss.
* :class:`TreeModel` -- axis-aligned tree grown until every leaf is pure.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import expit

from .errors import (
    DataError,
    DegenerateLabelsError,
    DimensionMismatchError,
    UnsplittableError,
)
from .geometry import Dataset, SeedSpec, as_seed

LINEAR_INIT_SCALE = 0.1


class BoundaryPointWarning(RuntimeWarning):
    """A ReLU pre-activation is exactly zero at the anchor."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 200
    batch_size: Optional[int] = None  # None means full batch
    init: str = "gaussian"  # "gaussian" or "zeros"
    init_scale: Optional[float] = None  # None: 0.1 for linear, sqrt(2/fan_in) for MLP
    seed: SeedSpec = field(default_factory=lambda: SeedSpec(0))

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise DataError("learning_rate must be positive")
        if self.epochs < 1:
            raise DataError("epochs must be >= 1")
        if self.batch_size is not None and self.batch_size < 1:
            raise DataError("batch_size must be >= 1")
        if self.init not in ("gaussian", "zeros"):
            raise DataError(f"unknown init {self.init!r}")


# -- models ------------------------------------------------------------------

def _as_batch(X, dim: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[-1] != dim:
        raise DimensionMismatchError(f"input has dim {X.shape[-1]}, model expects {dim}")
    return X


@dataclass(frozen=True)
class LinearModel:
    w: np.ndarray
    b: float

    @property
    def dim(self) -> int:
        return len(self.w)

    def decision_function(self, X) -> np.ndarray:
        return _as_batch(X, self.dim) @ self.w + self.b


@dataclass(frozen=True)
class MlpModel:
    """``weights[l]`` has shape ``(fan_out, fan_in)``; the last layer has one row."""

    weights: tuple
    biases: tuple

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise DataError("need one bias per weight matrix and at least one layer")
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.shape[0] != b.shape[0]:
                raise DataError(f"layer {l}: bias length differs from fan-out")
            if l > 0 and W.shape[1] != self.weights[l - 1].shape[0]:
                raise DataError(f"layer {l}: fan-in differs from previous fan-out")
        if self.weights[-1].shape[0] != 1:
            raise DataError("output layer must have a single unit")

    @property
    def dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def hidden_sizes(self) -> list[int]:
        return [W.shape[0] for W in self.weights[:-1]]

    def forward(self, X):
        """Return (pre-activations per layer, activations per layer)."""
        a = _as_batch(X, self.dim)
        pre, acts = [], [a]
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ W.T + b
            pre.append(z)
            a = np.maximum(z, 0.0) if l < len(self.weights) - 1 else z
            acts.append(a)
        return pre, acts

    def decision_function(self, X) -> np.ndarray:
        return self.forward(X)[0][-1][:, 0]


@dataclass(frozen=True)
class TreeNode:
    label: int = 1
    feature: int = -1
    threshold: float = 0.0
    left: Optional["TreeNode"] = None  # x[feature] < threshold
    right: Optional["TreeNode"] = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def depth(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(self.left.depth(), self.right.depth())

    def splits(self):
        if self.is_leaf:
            return
        yield self.feature, self.threshold
        yield from self.left.splits()
        yield from self.right.splits()


@dataclass(frozen=True)
class TreeModel:
    root: TreeNode
    dim: int

    def depth(self) -> int:
        return self.root.depth()

    def decision_function(self, X) -> np.ndarray:
        X = _as_batch(X, self.dim)
        out = np.empty(len(X))
        for i, x in enumerate(X):
            node = self.root
            while not node.is_leaf:
                node = node.left if x[node.feature] < node.threshold else node.right
            out[i] = node.label
        return out


Model = Union[LinearModel, MlpModel, TreeModel]


def decision_value(model, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatchError("decision_value takes a single point")
    return float(model.decision_function(x)[0])


def predict(model, X) -> np.ndarray:
    """Labels in {-1, +1}; a zero score counts as +1."""
    return np.where(model.decision_function(X) >= 0, 1, -1)


def accuracy(model, data: Dataset) -> float:
    return float(np.mean(predict(model, data.points) == data.labels))


# -- logistic loss and backprop ---------------------------------------------

def logistic_loss(scores: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean(np.logaddexp(0.0, -y * scores)))


def _dloss_dscore(scores, y):
    return -y * expit(-y * scores)


def loss_and_grads(model: MlpModel, X, y) -> tuple[float, list, list]:
    """Mean logistic loss and its gradient with respect to every parameter."""
    y = np.asarray(y, dtype=float)
    pre, acts = model.forward(X)
    scores = pre[-1][:, 0]
    loss = logistic_loss(scores, y)
    delta = (_dloss_dscore(scores, y) / len(y))[:, None]
    gW, gb = [None] * len(model.weights), [None] * len(model.weights)
    for l in range(len(model.weights) - 1, -1, -1):
        gW[l] = delta.T @ acts[l]
        gb[l] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ model.weights[l]) * (pre[l - 1] > 0)
    return loss, gW, gb


def input_gradient(model, x, y: int) -> np.ndarray:
    """Gradient of the logistic loss with respect to the input point."""
    x = np.asarray(x, dtype=float)
    if isinstance(model, LinearModel):
        score = decision_value(model, x)
        return _dloss_dscore(score, y) * model.w
    if isinstance(model, MlpModel):
        pre, _ = model.forward(x)
        delta = np.atleast_1d(_dloss_dscore(pre[-1][0, 0], y))
        for l in range(len(model.weights) - 1, -1, -1):
            delta = delta @ model.weights[l]
            if l > 0:
                delta = delta * (pre[l - 1][0] > 0)
        return delta
    return np.zeros_like(x)


def _check_labels(data: Dataset):
    if data.n == 0:
        raise DataError("empty dataset")
    if len(np.unique(data.labels)) < 2:
        raise DegenerateLabelsError("training data must contain both classes")


def _init_params(sizes: Sequence[int], cfg: TrainConfig, default_scale):
    rng = cfg.seed.child("init").generator()
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        if cfg.init == "zeros":
            W = np.zeros((fan_out, fan_in))
        else:
            scale = cfg.init_scale if cfg.init_scale is not None else default_scale(fan_in)
            W = scale * rng.standard_normal((fan_out, fan_in))
        weights.append(W)
        biases.append(np.zeros(fan_out))
    return weights, biases


def _sgd(weights, biases, data: Dataset, cfg: TrainConfig):
    X, y = data.points, data.labels.astype(float)
    n = len(y)
    bs = n if cfg.batch_size is None else min(cfg.batch_size, n)
    rng = cfg.seed.child("shuffle").generator() if bs < n else None
    lr = cfg.learning_rate
    for _ in range(cfg.epochs):
        order = rng.permutation(n) if rng is not None else None
        for start in range(0, n, bs):
            if order is None:
                Xb, yb = X, y
            else:
                idx = order[start:start + bs]
                Xb, yb = X[idx], y[idx]
            model = MlpModel(tuple(weights), tuple(biases))
            _, gW, gb = loss_and_grads(model, Xb, yb)
            for l in range(len(weights)):
                weights[l] = weights[l] - lr * gW[l]
                biases[l] = biases[l] - lr * gb[l]
    return MlpModel(tuple(weights), tuple(biases))


def train_logistic_regression(data: Dataset, cfg: TrainConfig = TrainConfig()) -> LinearModel:
    """Full-batch gradient descent on the mean logistic loss, no regularisation.

    The weight update is a combination of training points, so with data lying
    exactly in a subspace the orthogonal part of ``w`` never moves from its
    initial value.
    """
    _check_labels(data)
    weights, biases = _init_params([data.dim, 1], cfg, lambda fan_in: LINEAR_INIT_SCALE)
    net = _sgd(weights, biases, data, TrainConfig(
        cfg.learning_rate, cfg.epochs, None, cfg.init, cfg.init_scale, cfg.seed))
    return LinearModel(net.weights[0][0].copy(), float(net.biases[0][0]))


def train_mlp(data: Dataset, hidden_sizes: Sequence[int], cfg: TrainConfig = TrainConfig()) -> MlpModel:
    if any(h < 1 for h in hidden_sizes):
        raise DataError("hidden layer sizes must be positive")
    _check_labels(data)
    sizes = [data.dim, *hidden_sizes, 1]
    weights, biases = _init_params(sizes, cfg, lambda fan_in: np.sqrt(2.0 / fan_in))
    return _sgd(weights, biases, data, cfg)


# -- decision tree -----------------------------------------------------------

def _best_split(X: np.ndarray, y: np.ndarray):
    n = len(y)
    best = None  # (impurity, feature, threshold)
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        xs, ys = X[order, f], y[order]
        distinct = np.nonzero(xs[1:] > xs[:-1])[0]
        if len(distinct) == 0:
            continue
        pos_left = np.cumsum(ys == 1)[distinct]
        n_left = distinct + 1
        n_right = n - n_left
        pos_right = np.sum(ys == 1) - pos_left
        p_l = pos_left / n_left
        p_r = pos_right / n_right
        impurity = (n_left * 2 * p_l * (1 - p_l) + n_right * 2 * p_r * (1 - p_r)) / n
        j = int(np.argmin(impurity))
        if best is None or impurity[j] < best[0]:
            i = distinct[j]
            best = (impurity[j], f, 0.5 * (xs[i] + xs[i + 1]))
    return best


def _grow(X, y) -> TreeNode:
    if np.all(y == y[0]):
        return TreeNode(label=int(y[0]))
    split = _best_split(X, y)
    if split is None:
        raise UnsplittableError("identical points carry different labels")
    _, f, t = split
    mask = X[:, f] < t
    return TreeNode(feature=f, threshold=float(t),
                    left=_grow(X[mask], y[mask]), right=_grow(X[~mask], y[~mask]))


def train_decision_tree(data: Dataset) -> TreeModel:
    """Grow a Gini tree to purity; ties go to the lowest feature index."""
    if data.n == 0:
        raise DataError("empty dataset")
    return TreeModel(_grow(data.points, data.labels), data.dim)


# -- local affine maps -------------------------------------------------------

@dataclass(frozen=True)
class LocalLinearModel:
    w_eff: np.ndarray
    b_eff: float
    anchor: np.ndarray

    def decision_function(self, X) -> np.ndarray:
        return _as_batch(X, len(self.w_eff)) @ self.w_eff + self.b_eff


def unit_hyperplanes(model: MlpModel, x) -> tuple[np.ndarray, np.ndarray, list]:
    """Affine pre-activation of every unit under the activation pattern at ``x``.

    Returns ``(A, c, pattern)`` where row ``j`` of ``A`` and ``c[j]`` give unit
    ``j``'s pre-activation as ``A[j] @ x' + c[j]`` for every ``x'`` sharing the
    pattern. Units are stacked layer by layer; the last row is the output.
    Zero pre-activations are treated as inactive.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (model.dim,):
        raise DimensionMismatchError(f"anchor has shape {x.shape}, model expects ({model.dim},)")
    A = np.eye(model.dim)
    c = np.zeros(model.dim)
    rows, offsets, pattern = [], [], []
    last = len(model.weights) - 1
    for l, (W, b) in enumerate(zip(model.weights, model.biases)):
        A_l = W @ A
        c_l = W @ c + b
        rows.append(A_l)
        offsets.append(c_l)
        if l < last:
            z = A_l @ x + c_l
            if np.any(z == 0.0):
                warnings.warn("anchor lies on a ReLU boundary; zero treated as inactive",
                              BoundaryPointWarning, stacklevel=3)
            active = z > 0
            pattern.append(active)
            A = A_l * active[:, None]
            c = c_l * active
    return np.vstack(rows), np.concatenate(offsets), pattern


def local_linear_model(model, x) -> LocalLinearModel:
    """The affine map the model realises on the polyhedron containing ``x``."""
    x = np.asarray(x, dtype=float)
    if isinstance(model, LinearModel):
        if x.shape != (model.dim,):
            raise DimensionMismatchError("anchor dimension mismatch")
        return LocalLinearModel(model.w.copy(), float(model.b), x.copy())
    if isinstance(model, MlpModel):
        A, c, _ = unit_hyperplanes(model, x)
        return LocalLinearModel(A[-1].copy(), float(c[-1]), x.copy())
    raise TypeError(f"no local linear model for {type(model).__name__}")


# -- serialisation -----------------------------------------------------------

def _hex(a) -> list:
    return [float(v).hex() for v in np.ravel(a)]


def _unhex(values, shape) -> np.ndarray:
    return np.array([float.fromhex(v) for v in values], dtype=float).reshape(shape)


def _node_to_dict(node: TreeNode) -> dict:
    if node.is_leaf:
        return {"label": node.label}
    return {"feature": node.feature, "threshold": float(node.threshold).hex(),
            "left": _node_to_dict(node.left), "right": _node_to_dict(node.right)}


def _node_from_dict(d: dict) -> TreeNode:
    if "label" in d:
        return TreeNode(label=int(d["label"]))
    return TreeNode(feature=int(d["feature"]), threshold=float.fromhex(d["threshold"]),
                    left=_node_from_dict(d["left"]), right=_node_from_dict(d["right"]))


def model_to_dict(model) -> dict:
    """JSON-ready dict; floats are stored as hex strings so round trips are exact."""
    if isinstance(model, LinearModel):
        return {"type": "linear", "dim": model.dim, "w": _hex(model.w), "b": float(model.b).hex()}
    if isinstance(model, MlpModel):
        return {
            "type": "mlp",
            "layers": [
                {"shape": list(W.shape), "weight": _hex(W), "bias": _hex(b)}
                for W, b in zip(model.weights, model.biases)
            ],
        }
    if isinstance(model, TreeModel):
        return {"type": "tree", "dim": model.dim, "root": _node_to_dict(model.root)}
    raise TypeError(f"cannot serialise {type(model).__name__}")


def model_from_dict(d: dict):
    try:
        kind = d["type"]
        if kind == "linear":
            return LinearModel(_unhex(d["w"], (int(d["dim"]),)), float.fromhex(d["b"]))
        if kind == "mlp":
            Ws, bs = [], []
            for layer in d["layers"]:
                shape = tuple(int(s) for s in layer["shape"])
                Ws.append(_unhex(layer["weight"], shape))
                bs.append(_unhex(layer["bias"], (shape[0],)))
            return MlpModel(tuple(Ws), tuple(bs))
        if kind == "tree":
            return TreeModel(_node_from_dict(d["root"]), int(d["dim"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed model document: {exc}") from exc
    raise DataError(f"unknown model type {d.get('type')!r}")


def model_to_json(model) -> str:
    return json.dumps(model_to_dict(model))


def model_from_json(text: str):
    try:
        return model_from_dict(json.loads(text))
    except json.JSONDecodeError as exc:
        raise DataError(f"model file is not JSON: {exc}") from exc
