"""Dimension-sweep experiments with seeded, order-independent aggregation.

Each experiment expands its config into independent ``(N, seed_index)``
tasks whose randomness derives only from ``(base_seed, kind, N, seed_index)``.
Tasks may run on any number of worker processes; results are aggregated in
task order and rows are sorted by ``(N, metric)`` before writing, so output
files are byte-identical across reruns and worker counts.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .attacks import (
    boundary_distances,
    gradient_sign_attack,
    minimal_linear_attack,
    noise_ball_misclassification,
    transfer_attack,
)
from .classifiers import (
    TrainConfig,
    accuracy,
    local_linear_model,
    predict,
    train_logistic_regression,
    train_mlp,
)
from .errors import ConfigError, DataError
from .geometry import (
    SeedSpec,
    concentric_spheres_spec,
    folded_curve_spec,
    generate_concentric_spheres,
    generate_folded_curve,
    generate_subspace_gaussians,
    subspace_gaussians_spec,
)
from .lid import lid_contrast
from .parallel import pmap
from .probe import fragility_stats
from .stats import mean_ci, median_ci, normal_cdf, wilson_interval

KINDS = ("margin_collapse", "noise_ball_sweep", "fragile_box",
         "sphere_scaling", "lid_contrast", "transfer_matrix")

CSV_COLUMNS = ("experiment", "N", "metric", "value", "ci_lo", "ci_hi", "seeds")


# -- analytic utilities ------------------------------------------------------

def fragile_box_analytic(k: int, d: float, sigma: float) -> float:
    """P(some |u_i| >= d, i <= k) for u ~ N(0, sigma^2 I): ``1 - (2 Phi(d/sigma) - 1)^k``."""
    if k < 0 or not d > 0 or not sigma >= 0:
        raise DataError("need k >= 0, d > 0, sigma >= 0")
    if k == 0 or sigma == 0:
        return 0.0
    inside = 1.0 - 2.0 * normal_cdf(-d / sigma)
    return -math.expm1(k * math.log(inside)) if inside > 0 else 1.0


def fragile_box_mc(k: int, d: float, sigma: float, trials: int, seed: SeedSpec,
                   block: int = 1 << 14) -> int:
    """Count noise draws leaving the box ``{|u_i| < d, i <= k}``.

    Block ``b`` of ``block`` trials draws from ``seed.child(b)``.
    """
    if k == 0:
        return 0
    escaped = 0
    for b, start in enumerate(range(0, trials, block)):
        n = min(block, trials - start)
        u = sigma * seed.child(b).generator().standard_normal((n, k))
        escaped += int(n - np.count_nonzero(np.all(np.abs(u) < d, axis=1)))
    return escaped


def lipschitz_sample_bound(L: float, epsilon: float, n: int) -> float:
    """log10 of the ``(L/epsilon)^n`` grid size needed to approximate an
    L-Lipschitz function on n variables to accuracy epsilon."""
    if not L > 0 or not epsilon > 0 or n < 1:
        raise DataError("need L > 0, epsilon > 0, n >= 1")
    return n * math.log10(L / epsilon)


class NormThresholdModel:
    """Labels a point +1 when its norm reaches ``radius``; ideal for concentric spheres."""

    def __init__(self, dim: int, radius: float):
        self.dim = dim
        self.radius = radius

    def decision_function(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.linalg.norm(X, axis=1) - self.radius


# -- configuration -----------------------------------------------------------

_TRAIN_KEYS = {"learning_rate", "epochs", "batch_size", "init", "init_scale"}

_DEFAULTS = {
    "margin_collapse": dict(
        dims=[10, 50, 100, 500, 1000], intrinsic_dim=2, n_per_class=50, seeds=20,
        epsilon=0.1, manifold={}, train={"learning_rate": 0.5, "epochs": 300}),
    "noise_ball_sweep": dict(
        dims=[10, 50, 200], intrinsic_dim=2, n_per_class=25, seeds=10, trials=2000,
        sigma=0.5, hidden=[32], points=20, rho=0.25, box_d=1.0, manifold={},
        train={"learning_rate": 0.1, "epochs": 200, "init_scale": 0.1}),
    "fragile_box": dict(
        ks=[1, 10, 50], ds=[1.0, 2.0, 3.0], sigmas=[0.5, 1.0, 2.0], trials=1_000_000),
    "sphere_scaling": dict(
        dims=[20, 50, 100, 200, 500], n_per_class=200, seeds=3, hidden=[32],
        test_points=50, directions=100, normal_direction=True,
        manifold={"inner": 1.0, "outer": 1.3},
        train={"learning_rate": 0.1, "epochs": 50, "batch_size": 50}),
    "lid_contrast": dict(
        dims=[50], n_per_class=250, seeds=1, hidden=[32], points=100, epsilon=0.05,
        k=20, ks=[10, 20, 50], manifold={"gap": 1.0, "arm_length": 4.0},
        train={"learning_rate": 0.1, "epochs": 200, "batch_size": 50}),
    "transfer_matrix": dict(
        dims=[20], intrinsic_dim=2, n_per_class=50, seeds=1, models=3, points=100,
        attack_scale=3.0, manifold={}, train={"learning_rate": 0.5, "epochs": 300}),
}

_LIST_INT = {"dims", "hidden", "ks"}
_LIST_FLOAT = {"ds", "sigmas"}
_INT = {"intrinsic_dim", "n_per_class", "seeds", "trials", "points", "test_points",
        "directions", "k", "models"}
_FLOAT = {"epsilon", "sigma", "rho", "box_d", "attack_scale"}
_BOOL = {"normal_direction"}
_DICT = {"train", "manifold"}
_GAUSSIAN_KEYS = {"separation", "scale", "ambient_noise"}
_MANIFOLD_KEYS = {
    "margin_collapse": _GAUSSIAN_KEYS,
    "noise_ball_sweep": _GAUSSIAN_KEYS,
    "transfer_matrix": _GAUSSIAN_KEYS,
    "sphere_scaling": {"inner", "outer"},
    "lid_contrast": {"gap", "arm_length", "noise"},
}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    params: dict = field(default_factory=dict)

    def __getattr__(self, name):
        try:
            return self.__dict__["params"][name]
        except KeyError:
            raise AttributeError(name) from None

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}

    @property
    def hash(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def train_config(self, seed: SeedSpec) -> TrainConfig:
        return TrainConfig(seed=seed, **self.params.get("train", {}))

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        kind = doc.get("kind")
        if kind not in KINDS:
            raise ConfigError("kind", f"must be one of {', '.join(KINDS)}, got {kind!r}")
        params = json.loads(json.dumps(_DEFAULTS[kind]))
        for key, value in doc.items():
            if key == "kind":
                continue
            if key not in params:
                raise ConfigError(key, f"unknown key for {kind}")
            value = _coerce(key, value)
            params[key] = {**params[key], **value} if key in _DICT else value
        _validate(kind, params)
        return cls(kind, params)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("<json>", f"malformed JSON at line {exc.lineno} col {exc.colno}: {exc.msg}")
        return cls.from_dict(doc)

    def with_overrides(self, overrides: dict) -> "ExperimentConfig":
        doc = self.to_dict()
        for key, value in overrides.items():
            if "." in key:
                outer, inner = key.split(".", 1)
                if outer not in _DICT:
                    raise ConfigError(key, "only train.* and manifold.* take dotted keys")
                doc[outer] = {**doc.get(outer, {}), inner: value}
            else:
                doc[key] = value
        return ExperimentConfig.from_dict(doc)


def _coerce(key, value):
    try:
        if key in _LIST_INT:
            if not isinstance(value, list):
                raise TypeError
            return [int(v) for v in value]
        if key in _LIST_FLOAT:
            if not isinstance(value, list):
                raise TypeError
            return [float(v) for v in value]
        if key in _INT:
            if isinstance(value, bool) or float(value) != int(value):
                raise TypeError
            return int(value)
        if key in _FLOAT:
            return float(value)
        if key in _BOOL:
            if isinstance(value, str):
                return value.lower() in ("1", "true", "yes")
            return bool(value)
        if key in _DICT:
            if not isinstance(value, dict):
                raise TypeError
            if key == "train":
                bad = set(value) - _TRAIN_KEYS
                if bad:
                    raise ConfigError(f"train.{sorted(bad)[0]}", "unknown training option")
            return dict(value)
    except (TypeError, ValueError):
        raise ConfigError(key, f"invalid value {value!r}") from None
    return value


def _validate(kind, p):
    dims = p.get("dims")
    if dims is not None:
        if not dims or any(b <= a for a, b in zip(dims, dims[1:])):
            raise ConfigError("dims", "must be a non-empty strictly increasing list")
        if dims[0] < 1:
            raise ConfigError("dims", "dimensions must be positive")
    for key in ("trials", "seeds", "n_per_class", "points", "test_points", "models", "directions"):
        if key in p and p[key] < 1:
            raise ConfigError(key, "must be >= 1")
    if "intrinsic_dim" in p and dims is not None:
        if p["intrinsic_dim"] < 1 or p["intrinsic_dim"] > dims[0]:
            raise ConfigError("intrinsic_dim", "must satisfy 1 <= M <= min(dims)")
    for key in ("epsilon", "sigma", "box_d", "attack_scale"):
        if key in p and not p[key] > 0:
            raise ConfigError(key, "must be positive")
    if "rho" in p and not 0 < p["rho"] <= 1:
        raise ConfigError("rho", "must lie in (0, 1]")
    if "k" in p and p["k"] < 2:
        raise ConfigError("k", "must be >= 2")
    if kind == "fragile_box":
        if any(k < 0 for k in p["ks"]):
            raise ConfigError("ks", "must be >= 0")
        if any(not d > 0 for d in p["ds"]):
            raise ConfigError("ds", "must be positive")
        if any(not s > 0 for s in p["sigmas"]):
            raise ConfigError("sigmas", "must be positive")
    allowed = _MANIFOLD_KEYS.get(kind, set())
    for key in p.get("manifold", {}):
        if key not in allowed:
            raise ConfigError(f"manifold.{key}", f"unknown manifold option for {kind}")
    try:
        TrainConfig(**p.get("train", {}))
    except DataError as exc:
        raise ConfigError("train", str(exc)) from None


# -- results -----------------------------------------------------------------

@dataclass(frozen=True)
class Row:
    experiment: str
    N: int
    metric: str
    value: float
    ci_lo: float
    ci_hi: float
    seeds: int


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    base_seed: int
    rows: list

    def __post_init__(self):
        self.rows = sorted(self.rows, key=lambda r: (r.N, r.metric))

    def get(self, metric: str, N: Optional[int] = None) -> Row:
        for r in self.rows:
            if r.metric == metric and (N is None or r.N == N):
                return r
        raise KeyError((metric, N))

    def series(self, metric: str) -> tuple[list, list]:
        rows = [r for r in self.rows if r.metric == metric]
        return [r.N for r in rows], [r.value for r in rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([r.experiment, r.N, r.metric, repr(float(r.value)),
                        repr(float(r.ci_lo)), repr(float(r.ci_hi)), r.seeds])
        return buf.getvalue()

    def provenance(self) -> dict:
        csv_text = self.to_csv()
        return {
            "experiment": self.config.kind,
            "config": self.config.to_dict(),
            "config_hash": self.config.hash,
            "code_version": __version__,
            "base_seed": self.base_seed,
            "csv_sha256": hashlib.sha256(csv_text.encode()).hexdigest(),
        }

    def write(self, out_dir, stem: Optional[str] = None) -> tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        stem = stem or self.config.kind
        csv_path, json_path = out_dir / f"{stem}.csv", out_dir / f"{stem}.json"
        csv_path.write_text(self.to_csv())
        json_path.write_text(json.dumps(self.provenance(), indent=2, sort_keys=True) + "\n")
        return csv_path, json_path


def read_rows(text: str) -> list:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != CSV_COLUMNS:
        raise DataError(f"result CSV must have columns {','.join(CSV_COLUMNS)}")
    rows = []
    for line in reader:
        try:
            rows.append(Row(line[0], int(line[1]), line[2], float(line[3]),
                            float(line[4]), float(line[5]), int(line[6])))
        except (IndexError, ValueError) as exc:
            raise DataError(f"bad result row {line!r}: {exc}") from exc
    return rows


def load_result(csv_path, sidecar_path=None) -> ExperimentResult:
    """Read a result pair and re-validate the config hash and CSV digest."""
    csv_path = Path(csv_path)
    sidecar_path = Path(sidecar_path) if sidecar_path else csv_path.with_suffix(".json")
    text = csv_path.read_text()
    meta = json.loads(sidecar_path.read_text())
    config = ExperimentConfig.from_dict(meta["config"])
    if config.hash != meta["config_hash"]:
        raise DataError("config hash in sidecar does not match its config")
    if hashlib.sha256(text.encode()).hexdigest() != meta["csv_sha256"]:
        raise DataError("CSV contents do not match the sidecar digest")
    return ExperimentResult(config, int(meta["base_seed"]), read_rows(text))


# -- experiments -------------------------------------------------------------

def _task_seed(base_seed: int, kind: str, N: int, s: int) -> SeedSpec:
    return SeedSpec(base_seed).child(kind, N, s)


def _median_rows(kind, N, metric, values):
    med, lo, hi = median_ci(values)
    return Row(kind, N, metric, med, lo, hi, len(values))


def _margin_collapse_task(task):
    cfg, base_seed, N, s = task
    seed = _task_seed(base_seed, cfg.kind, N, s)
    spec = subspace_gaussians_spec(N, cfg.intrinsic_dim, seed.child("manifold"),
                                   **cfg.params.get("manifold", {}))
    data = generate_subspace_gaussians(spec, cfg.n_per_class, seed.child("data"))
    model = train_logistic_regression(data, cfg.train_config(seed.child("train")))
    st = fragility_stats(model, data, cfg.epsilon)
    return N, st.shrink_factor, st.min_margin, st.frac_below


def run_margin_collapse(cfg: ExperimentConfig, base_seed: int, workers: int = 1) -> ExperimentResult:
    """Logistic regression on exactly-on-manifold Gaussians, N swept at fixed M."""
    _expect(cfg, "margin_collapse")
    tasks = [(cfg, base_seed, N, s) for N in cfg.dims for s in range(cfg.seeds)]
    out = pmap(_margin_collapse_task, tasks, workers)
    rows = []
    for N in cfg.dims:
        mine = [o for o in out if o[0] == N]
        for j, metric in enumerate(("shrink_factor", "min_margin", "frac_below"), start=1):
            rows.append(_median_rows(cfg.kind, N, metric, [o[j] for o in mine]))
    return ExperimentResult(cfg, base_seed, rows)


def _fragile_cell_task(task):
    k, d, sigma, trials, seed = task
    return fragile_box_mc(k, d, sigma, trials, seed)


def fragile_box_rows(kind, cells, trials, base_seed, workers=1, tag="fragile_box") -> list:
    """MC vs analytic rows for each ``(k, d, sigma)`` cell."""
    tasks = [(k, d, s, trials, SeedSpec(base_seed).child(tag, k, repr(d), repr(s)))
             for k, d, s in cells]
    counts = pmap(_fragile_cell_task, tasks, workers)
    rows = []
    for (k, d, s), escaped in zip(cells, counts):
        label = f"d={d:g},sigma={s:g}"
        lo, hi = wilson_interval(escaped, trials)
        exact = fragile_box_analytic(k, d, s)
        rows.append(Row(kind, k, f"mc[{label}]", escaped / trials, lo, hi, 1))
        rows.append(Row(kind, k, f"analytic[{label}]", exact, exact, exact, 1))
        rows.append(Row(kind, k, f"inside[{label}]", float(lo <= exact <= hi), 0.0, 1.0, 1))
    return rows


def run_fragile_box(cfg: ExperimentConfig, base_seed: int, workers: int = 1) -> ExperimentResult:
    _expect(cfg, "fragile_box")
    cells = [(k, d, s) for k in cfg.ks for d in cfg.ds for s in cfg.sigmas]
    return ExperimentResult(cfg, base_seed, fragile_box_rows(cfg.kind, cells, cfg.trials,
                                                             base_seed, workers))


def _noise_ball_task(task):
    cfg, base_seed, N, s = task
    seed = _task_seed(base_seed, cfg.kind, N, s)
    spec = subspace_gaussians_spec(N, cfg.intrinsic_dim, seed.child("manifold"),
                                   **cfg.params.get("manifold", {}))
    data = generate_subspace_gaussians(spec, cfg.n_per_class, seed.child("data"))
    model = train_mlp(data, cfg.hidden, cfg.train_config(seed.child("train")))
    idx = np.arange(min(cfg.points, data.n))
    probs = [
        noise_ball_misclassification(model, data.points[i], int(data.labels[i]), cfg.sigma,
                                     cfg.trials, seed.child("noise", int(i))).probability
        for i in idx
    ]
    return N, float(np.mean(probs))


def run_noise_ball_sweep(cfg: ExperimentConfig, base_seed: int, workers: int = 1) -> ExperimentResult:
    """MLP noise-ball misclassification vs N, plus the fragile-box oracle at k = floor(rho N)."""
    _expect(cfg, "noise_ball_sweep")
    tasks = [(cfg, base_seed, N, s) for N in cfg.dims for s in range(cfg.seeds)]
    out = pmap(_noise_ball_task, tasks, workers)
    rows = []
    for N in cfg.dims:
        rows.append(_median_rows(cfg.kind, N, "mlp_noise_ball",
                                 [p for n, p in out if n == N]))
    cells = [(int(math.floor(cfg.rho * N)), cfg.box_d, cfg.sigma) for N in cfg.dims]
    for N, row_group in zip(cfg.dims, _chunks(fragile_box_rows(
            cfg.kind, cells, cfg.trials, base_seed, workers, tag="noise_ball_box"), 3)):
        for r in row_group:
            name = r.metric.split("[")[0]
            rows.append(dataclasses.replace(r, N=N, metric=f"fragile_box_{name}"))
    return ExperimentResult(cfg, base_seed, rows)


def _chunks(seq, n):
    return [seq[i:i + n] for i in range(0, len(seq), n)]


def nearest_flip_distances(model, points, n_directions: int, seed: SeedSpec,
                           normal_direction: bool = True) -> np.ndarray:
    """Per point, the smallest flip distance over random unit directions.

    With ``normal_direction`` the normal of the local affine discriminant
    (pointing across it) joins the random candidates.
    """
    out = np.empty(len(points))
    for i, x in enumerate(points):
        D = seed.child(i).generator().standard_normal((n_directions, len(x)))
        if normal_direction:
            ll = local_linear_model(model, x)
            if np.any(ll.w_eff):
                score = float(ll.w_eff @ x + ll.b_eff)
                D = np.vstack([D, -np.sign(score or 1.0) * ll.w_eff])
        out[i] = boundary_distances(model, x, D).min()
    return out


def _sphere_task(task):
    cfg, base_seed, N, s = task
    seed = _task_seed(base_seed, cfg.kind, N, s)
    m = cfg.params.get("manifold", {})
    spec = concentric_spheres_spec(N, m.get("inner", 1.0), m.get("outer", 1.3))
    data = generate_concentric_spheres(spec, cfg.n_per_class, seed.child("data"))
    model = train_mlp(data, cfg.hidden, cfg.train_config(seed.child("train")))
    n_test = max(1, cfg.test_points // 2)
    test = generate_concentric_spheres(spec, n_test, seed.child("test"))
    correct = predict(model, test.points) == test.labels
    dists = nearest_flip_distances(model, test.points[correct], cfg.directions,
                                   seed.child("directions"), cfg.normal_direction)
    return N, dists, accuracy(model, data), accuracy(model, test)


def loglog_slope(dims, values) -> float:
    slope, _ = np.polyfit(np.log(np.asarray(dims, float)), np.log(np.asarray(values, float)), 1)
    return float(slope)


def run_sphere_scaling(cfg: ExperimentConfig, base_seed: int, workers: int = 1) -> ExperimentResult:
    """Distance from correctly classified test points to the nearest label flip vs N."""
    _expect(cfg, "sphere_scaling")
    tasks = [(cfg, base_seed, N, s) for N in cfg.dims for s in range(cfg.seeds)]
    out = pmap(_sphere_task, tasks, workers)
    rows, means = [], []
    for N in cfg.dims:
        mine = [o for o in out if o[0] == N]
        d = np.concatenate([o[1] for o in mine])
        d = d[np.isfinite(d)]
        if len(d) == 0:
            raise DataError(f"no finite flip distances at N={N}")
        m, lo, hi = mean_ci(d)
        means.append(m)
        rows.append(Row(cfg.kind, N, "mean_distance", m, lo, hi, len(mine)))
        rows.append(_median_rows(cfg.kind, N, "train_accuracy", [o[2] for o in mine]))
        rows.append(_median_rows(cfg.kind, N, "test_accuracy", [o[3] for o in mine]))
    if len(cfg.dims) >= 2:
        slope = loglog_slope(cfg.dims, means)
        rows.append(Row(cfg.kind, 0, "loglog_slope", slope, slope, slope, cfg.seeds))
    return ExperimentResult(cfg, base_seed, rows)


def _lid_task(task):
    cfg, base_seed, N, s = task
    seed = _task_seed(base_seed, cfg.kind, N, s)
    spec = folded_curve_spec(N, seed.child("manifold"), **cfg.params.get("manifold", {}))
    data = generate_folded_curve(spec, cfg.n_per_class, seed.child("data"))
    model = train_mlp(data, cfg.hidden, cfg.train_config(seed.child("train")))
    pick = seed.child("anchors").generator().choice(data.n, min(cfg.points, data.n), replace=False)
    pick.sort()
    natural = data.points[pick]
    adv, flips = [], 0
    for x, y in zip(natural, data.labels[pick]):
        res = gradient_sign_attack(model, x, int(y), cfg.epsilon)
        adv.append(res.adversarial)
        flips += res.success
    adv = np.array(adv)
    out = {"fgsm_success": flips / len(pick), "train_accuracy": accuracy(model, data)}
    for k in sorted(set(cfg.ks) | {cfg.k}):
        c = lid_contrast(natural, adv, data, k)
        out[f"mean_natural[k={k}]"] = c.mean_natural
        out[f"mean_adversarial[k={k}]"] = c.mean_adversarial
        out[f"rank_sum_p[k={k}]"] = c.rank_sum_p
    return N, out


def run_lid_contrast(cfg: ExperimentConfig, base_seed: int, workers: int = 1) -> ExperimentResult:
    """Folded curve -> MLP -> gradient-sign adversarials -> MLE local ID contrast."""
    _expect(cfg, "lid_contrast")
    tasks = [(cfg, base_seed, N, s) for N in cfg.dims for s in range(cfg.seeds)]
    out = pmap(_lid_task, tasks, workers)
    rows = []
    for N in cfg.dims:
        mine = [o for n, o in out if n == N]
        for metric in mine[0]:
            rows.append(_median_rows(cfg.kind, N, metric, [o[metric] for o in mine]))
    return ExperimentResult(cfg, base_seed, rows)


def transfer_rates(models, points, attack_scale: float) -> np.ndarray:
    """``R[i, j]``: fraction of points where source ``i``'s scaled minimal attack flips ``j``."""
    m = len(models)
    R = np.zeros((m, m))
    for i, src in enumerate(models):
        for x in points:
            res = minimal_linear_attack(src, x)
            scaled = dataclasses.replace(res, perturbation=attack_scale * res.perturbation)
            for j, tgt in enumerate(models):
                R[i, j] += transfer_attack(scaled, tgt)
    return R / len(points)


def _transfer_task(task):
    cfg, base_seed, N, s = task
    seed = _task_seed(base_seed, cfg.kind, N, s)
    spec = subspace_gaussians_spec(N, cfg.intrinsic_dim, seed.child("manifold"),
                                   **cfg.params.get("manifold", {}))
    models = []
    for i in range(cfg.models):
        data = generate_subspace_gaussians(spec, cfg.n_per_class, seed.child("data", i))
        models.append(train_logistic_regression(data, cfg.train_config(seed.child("train", i))))
    test = generate_subspace_gaussians(spec, max(1, cfg.points // 2), seed.child("test"))
    return N, transfer_rates(models, test.points, cfg.attack_scale)


def run_transfer_matrix(cfg: ExperimentConfig, base_seed: int, workers: int = 1) -> ExperimentResult:
    """Pairwise transfer of scaled minimal attacks between independently trained LR models."""
    _expect(cfg, "transfer_matrix")
    tasks = [(cfg, base_seed, N, s) for N in cfg.dims for s in range(cfg.seeds)]
    out = pmap(_transfer_task, tasks, workers)
    rows = []
    m = cfg.models
    for N in cfg.dims:
        mats = [R for n, R in out if n == N]
        for i in range(m):
            for j in range(m):
                rows.append(_median_rows(cfg.kind, N, f"transfer[{i}->{j}]",
                                         [R[i, j] for R in mats]))
        off = [R[~np.eye(m, dtype=bool)].mean() for R in mats] if m > 1 else [0.0]
        rows.append(_median_rows(cfg.kind, N, "transfer_offdiag_mean", off))
    return ExperimentResult(cfg, base_seed, rows)


RUNNERS = {
    "margin_collapse": run_margin_collapse,
    "noise_ball_sweep": run_noise_ball_sweep,
    "fragile_box": run_fragile_box,
    "sphere_scaling": run_sphere_scaling,
    "lid_contrast": run_lid_contrast,
    "transfer_matrix": run_transfer_matrix,
}


def _expect(cfg, kind):
    if cfg.kind != kind:
        raise ConfigError("kind", f"expected {kind}, got {cfg.kind}")


def run_experiment(cfg: ExperimentConfig, base_seed: int, workers: int = 1) -> ExperimentResult:
    return RUNNERS[cfg.kind](cfg, base_seed, workers)
