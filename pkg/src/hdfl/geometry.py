"""Vector geometry, seeded randomness and manifold-concentrated data generators.

Randomness
----------
All sampling goes through :class:`SeedSpec`. A spec ``(base_seed, stream_id)``
is turned into a single 64-bit key by

    derived = splitmix64(base_seed XOR splitmix64(stream_id))

and that key seeds numpy's Philox 4x64 counter-based bit generator. Normal
variates come from numpy's ziggurat sampler; everything is float64. Child
streams (``spec.child("data")``) re-use the same mixing with the parent's
derived key as the new base, so any sub-computation can be reproduced from
the base seed and a path of stream ids without reference to execution order.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import DataError, DimensionMismatchError, InvalidDimensionError

MASK64 = (1 << 64) - 1

KINDS = ("subspace_gaussians", "concentric_spheres", "folded_curve")


def splitmix64(x: int) -> int:
    """One step of the SplitMix64 output function."""
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def mix(base_seed: int, stream_id: int) -> int:
    return splitmix64((base_seed & MASK64) ^ splitmix64(stream_id & MASK64))


def _stream_id(tag: Union[int, str]) -> int:
    if isinstance(tag, str):
        return zlib.crc32(tag.encode("utf-8"))
    return int(tag) & MASK64


@dataclass(frozen=True)
class SeedSpec:
    base_seed: int
    stream_id: int = 0

    @property
    def derived(self) -> int:
        return mix(self.base_seed, self.stream_id)

    def child(self, *tags: Union[int, str]) -> "SeedSpec":
        spec = self
        for tag in tags:
            spec = SeedSpec(spec.derived, _stream_id(tag))
        return spec

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=self.derived))


def as_seed(seed: Union[SeedSpec, int]) -> SeedSpec:
    return seed if isinstance(seed, SeedSpec) else SeedSpec(int(seed))


@dataclass(frozen=True)
class Basis:
    """Orthonormal columns spanning an M-dimensional subspace of R^N."""

    columns: np.ndarray  # shape (N, M)

    @property
    def ambient_dim(self) -> int:
        return self.columns.shape[0]

    @property
    def intrinsic_dim(self) -> int:
        return self.columns.shape[1]

    def embed(self, coeffs: np.ndarray) -> np.ndarray:
        return np.asarray(coeffs, dtype=float) @ self.columns.T

    def orthonormality_error(self) -> float:
        gram = self.columns.T @ self.columns
        return float(np.max(np.abs(gram - np.eye(self.intrinsic_dim))))


def random_orthonormal_basis(N: int, M: int, seed: Union[SeedSpec, int]) -> Basis:
    """Gaussian N x M matrix orthonormalised by Gram-Schmidt with one full
    re-orthogonalisation pass (CGS2)."""
    if M < 1 or N < 1 or M > N:
        raise InvalidDimensionError(f"need 1 <= M <= N, got N={N}, M={M}")
    rng = as_seed(seed).generator()
    A = rng.standard_normal((N, M))
    Q = np.zeros((N, M))
    for j in range(M):
        v = A[:, j].copy()
        for _ in range(2):
            v -= Q[:, :j] @ (Q[:, :j].T @ v)
        nrm = np.linalg.norm(v)
        if nrm < 1e-12:
            raise InvalidDimensionError("Gaussian draw was numerically rank deficient")
        Q[:, j] = v / nrm
    return Basis(Q)


def decompose(v, basis: Basis) -> tuple[np.ndarray, np.ndarray]:
    """Split ``v`` into its projection onto span(basis) and the orthogonal rest."""
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != basis.ambient_dim:
        raise DimensionMismatchError(
            f"vector has dim {v.shape[-1]}, basis lives in R^{basis.ambient_dim}"
        )
    B = basis.columns
    parallel = (v @ B) @ B.T
    return parallel, v - parallel


@dataclass(frozen=True)
class ManifoldSpec:
    kind: str
    ambient_dim: int
    intrinsic_dim: int
    basis: Optional[Basis] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DataError(f"unknown manifold kind {self.kind!r}")
        if self.basis is not None and self.basis.ambient_dim != self.ambient_dim:
            raise DimensionMismatchError("basis ambient dimension differs from spec")


@dataclass(frozen=True)
class Dataset:
    points: np.ndarray  # shape (n, N)
    labels: np.ndarray  # shape (n,), values in {-1, +1}
    manifold: Optional[ManifoldSpec] = None
    seed: int = 0

    def __post_init__(self):
        if self.points.ndim != 2 or len(self.points) != len(self.labels):
            raise DataError("points must be (n, N) with one label per point")
        if not np.all(np.isin(self.labels, (-1, 1))):
            raise DataError("labels must be -1 or +1")
        if not np.all(np.isfinite(self.points)):
            raise DataError("points must be finite")

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def to_json(self) -> str:
        m = self.manifold
        doc = {
            "ambient_dim": self.dim,
            "intrinsic_dim": m.intrinsic_dim if m is not None else self.dim,
            "basis": m.basis.columns.tolist() if m is not None and m.basis is not None else None,
            "points": self.points.tolist(),
            "labels": [int(y) for y in self.labels],
            "seed": int(self.seed),
            "kind": m.kind if m is not None else None,
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "Dataset":
        try:
            doc = json.loads(text)
            points = np.asarray(doc["points"], dtype=float)
            labels = np.asarray(doc["labels"], dtype=np.int64)
            N = int(doc["ambient_dim"])
            if points.size == 0:
                points = points.reshape(0, N)
            manifold = None
            if doc.get("kind") is not None:
                basis = None
                if doc.get("basis") is not None:
                    basis = Basis(np.asarray(doc["basis"], dtype=float))
                manifold = ManifoldSpec(doc["kind"], N, int(doc["intrinsic_dim"]), basis)
            seed = int(doc["seed"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed dataset document: {exc}") from exc
        if points.shape[1] != N:
            raise DataError("ambient_dim does not match point dimension")
        return cls(points, labels, manifold, seed)


def _balanced_labels(n_per_class: int) -> np.ndarray:
    return np.concatenate([-np.ones(n_per_class, np.int64), np.ones(n_per_class, np.int64)])


# -- subspace Gaussians ------------------------------------------------------

def subspace_gaussians_spec(
    N: int,
    M: int,
    seed: Union[SeedSpec, int],
    separation: Optional[float] = None,
    scale: float = 1.0,
    ambient_noise: float = 0.0,
) -> ManifoldSpec:
    """Two Gaussian classes on a random M-dimensional subspace of R^N.

    Class means are ``-/+ separation/2`` along the first basis direction;
    ``separation`` defaults to ``6 * scale``. ``ambient_noise`` is the
    per-coordinate std of optional isotropic off-manifold noise (off by
    default, so points sit exactly in the subspace).
    """
    if not 1 <= M <= N:
        raise InvalidDimensionError(f"need 1 <= M <= N, got N={N}, M={M}")
    if separation is None:
        separation = 6.0 * scale
    mean = np.zeros(M)
    mean[0] = separation / 2.0
    basis = random_orthonormal_basis(N, M, as_seed(seed).child("basis"))
    return ManifoldSpec(
        "subspace_gaussians", N, M, basis,
        {"means": [(-mean).tolist(), mean.tolist()], "scale": float(scale),
         "ambient_noise": float(ambient_noise)},
    )


def generate_subspace_gaussians(
    spec: ManifoldSpec, n_per_class: int, seed: Union[SeedSpec, int]
) -> Dataset:
    if spec.kind != "subspace_gaussians":
        raise DataError(f"expected a subspace_gaussians spec, got {spec.kind}")
    if n_per_class < 1:
        raise DataError("n_per_class must be >= 1")
    seed = as_seed(seed)
    rng = seed.generator()
    M = spec.intrinsic_dim
    scale = spec.params.get("scale", 1.0)
    means = np.asarray(spec.params["means"], dtype=float)
    coeffs = []
    for mean in means:
        coeffs.append(mean + scale * rng.standard_normal((n_per_class, M)))
    points = spec.basis.embed(np.vstack(coeffs))
    noise = spec.params.get("ambient_noise", 0.0)
    if noise > 0:
        points = points + noise * rng.standard_normal(points.shape)
    return Dataset(points, _balanced_labels(n_per_class), spec, seed.derived)


# -- concentric spheres ------------------------------------------------------

def concentric_spheres_spec(N: int, inner: float = 1.0, outer: float = 1.3) -> ManifoldSpec:
    if N < 2:
        raise InvalidDimensionError("spheres need N >= 2")
    if inner <= 0 or outer <= 0:
        raise DataError("radii must be positive")
    if not inner < outer:
        raise DataError("inner radius must be smaller than outer radius")
    return ManifoldSpec("concentric_spheres", N, N - 1, None,
                        {"inner": float(inner), "outer": float(outer)})


def sample_sphere(n: int, N: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((n, N))
    return radius * g / np.linalg.norm(g, axis=1, keepdims=True)


def generate_concentric_spheres(
    spec: ManifoldSpec, n_per_class: int, seed: Union[SeedSpec, int]
) -> Dataset:
    """Class -1 uniform on the inner sphere, class +1 on the outer one."""
    if spec.kind != "concentric_spheres":
        raise DataError(f"expected a concentric_spheres spec, got {spec.kind}")
    if n_per_class < 1:
        raise DataError("n_per_class must be >= 1")
    r1, r2 = spec.params["inner"], spec.params["outer"]
    if r1 <= 0 or r2 <= 0:
        raise DataError("radii must be positive")
    seed = as_seed(seed)
    rng = seed.generator()
    N = spec.ambient_dim
    points = np.vstack([sample_sphere(n_per_class, N, r1, rng),
                        sample_sphere(n_per_class, N, r2, rng)])
    return Dataset(points, _balanced_labels(n_per_class), spec, seed.derived)


# -- folded curve ------------------------------------------------------------

def folded_curve_spec(
    N: int,
    seed: Union[SeedSpec, int],
    gap: float = 1.0,
    arm_length: float = 4.0,
    noise: Optional[float] = None,
) -> ManifoldSpec:
    """A hairpin: two anti-parallel arms ``gap`` apart joined by a half circle.

    ``noise`` is the expected Euclidean norm of the isotropic ambient noise
    added to each point (per-coordinate std ``noise / sqrt(N)``); default
    ``gap / 20``.
    """
    if gap <= 0:
        raise DataError("fold gap must be positive")
    if arm_length <= 0:
        raise DataError("arm length must be positive")
    if N < 2:
        raise InvalidDimensionError("the hairpin needs a 2-d plane, N >= 2")
    if noise is None:
        noise = gap / 20.0
    basis = random_orthonormal_basis(N, 2, as_seed(seed).child("basis"))
    return ManifoldSpec("folded_curve", N, 1, basis,
                        {"gap": float(gap), "arm_length": float(arm_length),
                         "noise": float(noise)})


def folded_curve_point(t, gap: float, arm_length: float) -> np.ndarray:
    """Planar hairpin coordinates for curve parameter ``t`` in [-1, 1].

    ``t`` is proportional to arc length; ``t = 0`` is the fold apex and
    ``t = -1``, ``t = +1`` are the free ends of the two arms.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    L, rad = arm_length, gap / 2.0
    total = 2 * L + np.pi * rad
    s = (t + 1.0) / 2.0 * total
    out = np.empty((len(t), 2))
    arm1 = s <= L
    arc = (s > L) & (s < L + np.pi * rad)
    arm2 = s >= L + np.pi * rad
    out[arm1, 0] = L - s[arm1]
    out[arm1, 1] = 0.0
    phi = (s[arc] - L) / rad  # 0 -> pi around centre (0, rad)
    out[arc, 0] = -rad * np.sin(phi)
    out[arc, 1] = rad - rad * np.cos(phi)
    out[arm2, 0] = s[arm2] - L - np.pi * rad
    out[arm2, 1] = gap
    return out


def generate_folded_curve(
    spec: ManifoldSpec, n_per_class: int, seed: Union[SeedSpec, int]
) -> Dataset:
    """Labels split at the apex: t < 0 is class -1, t >= 0 class +1."""
    if spec.kind != "folded_curve":
        raise DataError(f"expected a folded_curve spec, got {spec.kind}")
    if n_per_class < 1:
        raise DataError("n_per_class must be >= 1")
    gap = spec.params["gap"]
    if gap <= 0:
        raise DataError("fold gap must be positive")
    seed = as_seed(seed)
    rng = seed.generator()
    t = np.concatenate([-rng.uniform(0.0, 1.0, n_per_class),
                        rng.uniform(0.0, 1.0, n_per_class)])
    t[:n_per_class] = np.minimum(t[:n_per_class], -np.finfo(float).tiny)
    plane = folded_curve_point(t, gap, spec.params["arm_length"])
    points = spec.basis.embed(plane)
    noise = spec.params.get("noise", 0.0)
    if noise > 0:
        N = spec.ambient_dim
        points = points + noise / np.sqrt(N) * rng.standard_normal(points.shape)
    return Dataset(points, _balanced_labels(n_per_class), spec, seed.derived)


def curve_parameters(data: Dataset) -> np.ndarray:
    """Recover ``t`` for noiseless folded-curve points by projecting to the plane.

    Only exact for points on the curve; used to pick apex vs. arm points.
    """
    spec = data.manifold
    plane = data.points @ spec.basis.columns
    gap, L = spec.params["gap"], spec.params["arm_length"]
    rad = gap / 2.0
    total = 2 * L + np.pi * rad
    x, y = plane[:, 0], plane[:, 1]
    s = np.where(
        x >= 0,
        np.where(y < rad, L - x, L + np.pi * rad + x),
        L + rad * np.arctan2(-x, rad - y),
    )
    return 2.0 * s / total - 1.0


def generate(spec: ManifoldSpec, n_per_class: int, seed: Union[SeedSpec, int]) -> Dataset:
    return {
        "subspace_gaussians": generate_subspace_gaussians,
        "concentric_spheres": generate_concentric_spheres,
        "folded_curve": generate_folded_curve,
    }[spec.kind](spec, n_per_class, seed)
