"""Object spaces and their metrics.

Three concrete spaces are supported: weighted-network graph Laplacians under
the Frobenius metric, univariate distributions represented by quantile
functions under the 2-Wasserstein metric, and centered planar landmark
configurations under the full Procrustes metric.  Each space carries a
closed-form (or iterative, for shapes) pointwise Frechet mean.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import (
    ConvergenceError,
    DegenerateShapeError,
    DimensionError,
    EmptyInputError,
    GridError,
    InvalidObjectError,
)

ROW_SUM_TOL = 1e-9
CENTER_TOL = 1e-9
MONOTONE_TOL = 1e-12

_POWER_ITER_TOL = 1e-12
_POWER_ITER_CAP = 10000


class ObjectSpace(Enum):
    """Tag identifying an object space; the kind determines the metric uniquely."""

    NETWORK = "network"
    DISTRIBUTION = "distribution"
    SHAPE = "shape"

    @property
    def metric_name(self) -> str:
        return {
            "network": "frobenius",
            "distribution": "wasserstein2",
            "shape": "full_procrustes",
        }[self.value]


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class GraphLaplacian:
    """Graph Laplacian L = D - A of a weighted undirected network.

    Invariants checked at construction: bit-exact symmetry, row sums within
    ``ROW_SUM_TOL`` of zero, and non-positive off-diagonal entries
    (nonnegative edge weights).  Violations raise, they are never repaired.
    """

    entries: np.ndarray

    def __post_init__(self):
        mat = np.ascontiguousarray(self.entries, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] < 1:
            raise DimensionError(f"Laplacian entries must be square, got shape {mat.shape}")
        if not np.all(np.isfinite(mat)):
            raise InvalidObjectError("Laplacian entries must be finite")
        if not np.array_equal(mat, mat.T):
            raise InvalidObjectError("Laplacian must be symmetric (bit-exact)")
        row_sums = np.abs(mat.sum(axis=1))
        if row_sums.max() > ROW_SUM_TOL:
            raise InvalidObjectError(
                f"Laplacian row sums must vanish: max |sum| = {row_sums.max():.3e} > {ROW_SUM_TOL}"
            )
        off = mat[~np.eye(mat.shape[0], dtype=bool)]
        if off.size and off.max() > 0.0:
            raise InvalidObjectError("Laplacian off-diagonal entries must be <= 0")
        object.__setattr__(self, "entries", _freeze(mat))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


def laplacian_from_adjacency(adjacency: np.ndarray) -> GraphLaplacian:
    """Convert a symmetric nonnegative adjacency matrix to its graph Laplacian."""
    a = np.asarray(adjacency, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"adjacency must be square, got shape {a.shape}")
    if not np.array_equal(a, a.T):
        raise InvalidObjectError("adjacency must be symmetric (bit-exact)")
    if a.min() < 0.0:
        raise InvalidObjectError("adjacency entries must be nonnegative")
    return GraphLaplacian(np.diag(a.sum(axis=1)) - a)


@dataclass(frozen=True)
class QuantileDistribution:
    """Univariate distribution stored as its quantile function on a probability grid."""

    prob_grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        p = np.ascontiguousarray(self.prob_grid, dtype=float)
        q = np.ascontiguousarray(self.values, dtype=float)
        if p.ndim != 1 or q.ndim != 1 or p.shape != q.shape or p.size < 2:
            raise DimensionError(
                f"prob_grid and values must be 1-d of equal length >= 2, got {p.shape} and {q.shape}"
            )
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(q))):
            raise InvalidObjectError("quantile data must be finite")
        if p[0] <= 0.0 or p[-1] >= 1.0 or np.any(np.diff(p) <= 0.0):
            raise GridError("prob_grid must be strictly increasing inside (0, 1)")
        if np.any(np.diff(q) < -MONOTONE_TOL):
            raise InvalidObjectError(
                f"quantile values must be nondecreasing within {MONOTONE_TOL}"
            )
        object.__setattr__(self, "prob_grid", _freeze(p))
        object.__setattr__(self, "values", _freeze(q))

    @property
    def num_quantiles(self) -> int:
        return self.prob_grid.size


@dataclass(frozen=True)
class PlanarShape:
    """Centered planar landmark configuration as complex coordinates."""

    coords: np.ndarray

    def __post_init__(self):
        z = np.ascontiguousarray(self.coords, dtype=complex)
        if z.ndim != 1 or z.size < 2:
            raise DimensionError(f"coords must be 1-d with k >= 2 landmarks, got shape {z.shape}")
        if not np.all(np.isfinite(z)):
            raise InvalidObjectError("landmark coordinates must be finite")
        if abs(z.sum()) > CENTER_TOL:
            raise InvalidObjectError(
                f"shape must be centered: |sum coords| = {abs(z.sum()):.3e} > {CENTER_TOL}"
            )
        if np.vdot(z, z).real <= 0.0:
            raise DegenerateShapeError("shape has zero norm")
        object.__setattr__(self, "coords", _freeze(z))

    @property
    def k(self) -> int:
        return self.coords.size


def frobenius_distance(a: GraphLaplacian, b: GraphLaplacian) -> float:
    """Frobenius distance sqrt(sum (a_ij - b_ij)^2) between two graph Laplacians."""
    if a.dim != b.dim:
        raise DimensionError(f"Laplacian dimensions differ: {a.dim} vs {b.dim}")
    diff = a.entries - b.entries
    return float(np.sqrt(np.sum(diff * diff)))


def prob_grid_weights(prob_grid: np.ndarray) -> np.ndarray:
    """Quadrature weights over [0, 1] for a probability grid.

    Interior intervals use the trapezoid rule; the end intervals [0, p_1] and
    [p_M, 1] extend the integrand by its boundary value, so the weights sum
    to one.
    """
    p = np.asarray(prob_grid, dtype=float)
    w = np.empty_like(p)
    w[0] = p[0] + (p[1] - p[0]) / 2.0
    w[-1] = (1.0 - p[-1]) + (p[-1] - p[-2]) / 2.0
    if p.size > 2:
        w[1:-1] = (p[2:] - p[:-2]) / 2.0
    return w


def wasserstein_distance(a: QuantileDistribution, b: QuantileDistribution) -> float:
    """2-Wasserstein distance: the L2 distance between the quantile functions."""
    if not np.array_equal(a.prob_grid, b.prob_grid):
        raise GridError("quantile functions must share the same probability grid")
    w = prob_grid_weights(a.prob_grid)
    diff = a.values - b.values
    return float(np.sqrt(np.sum(w * diff * diff)))


def procrustes_distance(y: PlanarShape, z: PlanarShape) -> float:
    """Full Procrustes distance between centered planar configurations.

    Equals sqrt(1 - |<y, z>|^2 / (|y|^2 |z|^2)) with the Hermitian inner
    product, hence invariant to rotation and scaling of either argument.
    """
    if y.k != z.k:
        raise DimensionError(f"landmark counts differ: {y.k} vs {z.k}")
    ny = np.vdot(y.coords, y.coords).real
    nz = np.vdot(z.coords, z.coords).real
    if ny <= 0.0 or nz <= 0.0:
        raise DegenerateShapeError("cannot compare a zero-norm shape")
    inner = np.vdot(y.coords, z.coords)
    ratio = (inner * inner.conjugate()).real / (ny * nz)
    return float(np.sqrt(np.clip(1.0 - ratio, 0.0, 1.0)))


def distance(a, b, space: ObjectSpace) -> float:
    """Metric of the tagged space, dispatched on the space kind."""
    if space is ObjectSpace.NETWORK:
        return frobenius_distance(a, b)
    if space is ObjectSpace.DISTRIBUTION:
        return wasserstein_distance(a, b)
    return procrustes_distance(a, b)


def _procrustes_mean(shapes: Sequence[PlanarShape]) -> PlanarShape:
    """Full Procrustes mean: dominant eigenvector of sum_i z_i z_i^* / |z_i|^2.

    Power iteration with a deterministic start (the normalized first shape);
    if the start lies in the null space it is perturbed by 1e-8 in the first
    coordinate.  Tolerance 1e-12 on the phase-aligned iterate difference,
    capped at 10000 iterations.
    """
    k = shapes[0].k
    s_mat = np.zeros((k, k), dtype=complex)
    for shape in shapes:
        z = shape.coords
        s_mat += np.outer(z, z.conj()) / np.vdot(z, z).real

    v = shapes[0].coords / np.linalg.norm(shapes[0].coords)
    if np.linalg.norm(s_mat @ v) < 1e-14 * np.trace(s_mat).real:
        v = v.copy()
        v[0] += 1e-8
        v = v / np.linalg.norm(v)

    for iteration in range(1, _POWER_ITER_CAP + 1):
        w = s_mat @ v
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            raise ConvergenceError("power iteration collapsed to zero", iterations=iteration)
        w = w / norm_w
        overlap = np.vdot(v, w)
        if abs(overlap) > 0.0:
            w = w * (overlap.conjugate() / abs(overlap))
        if np.linalg.norm(w - v) <= _POWER_ITER_TOL:
            v = w
            break
        v = w
    else:
        raise ConvergenceError(
            f"Procrustes mean power iteration did not converge in {_POWER_ITER_CAP} iterations",
            iterations=_POWER_ITER_CAP,
        )

    v = v - v.mean()
    return PlanarShape(v / np.linalg.norm(v))


def pointwise_frechet_mean(objects: Sequence, space: ObjectSpace):
    """Frechet mean of a homogeneous list of objects from the tagged space.

    Networks and distributions use their closed forms (entrywise average,
    pointwise average quantile function); shapes use the full Procrustes mean.
    """
    if len(objects) == 0:
        raise EmptyInputError("cannot average an empty list of objects")
    if space is ObjectSpace.NETWORK:
        dim = objects[0].dim
        if any(o.dim != dim for o in objects):
            raise DimensionError("all Laplacians must share the same node count")
        stack = np.stack([o.entries for o in objects])
        return GraphLaplacian(stack.mean(axis=0))
    if space is ObjectSpace.DISTRIBUTION:
        grid = objects[0].prob_grid
        for o in objects[1:]:
            if not np.array_equal(o.prob_grid, grid):
                raise GridError("all quantile functions must share the same probability grid")
        stack = np.stack([o.values for o in objects])
        return QuantileDistribution(grid, stack.mean(axis=0))
    if any(o.k != objects[0].k for o in objects):
        raise DimensionError("all shapes must share the same landmark count")
    return _procrustes_mean(objects)


def frechet_functional(objects: Sequence, candidate, space: ObjectSpace) -> float:
    """Sample Frechet functional (1/n) sum_i d^2(x_i, candidate)."""
    if len(objects) == 0:
        raise EmptyInputError("cannot evaluate a Frechet functional on an empty sample")
    total = 0.0
    for obj in objects:
        d = distance(obj, candidate, space)
        total += d * d
    return total / len(objects)


def candidate_frechet_mean(objects: Sequence, candidates: Sequence, space: ObjectSpace):
    """Minimize the sample Frechet functional over a finite candidate set.

    Returns the best candidate and its functional value; ties are broken by
    the lowest candidate index.
    """
    if len(objects) == 0:
        raise EmptyInputError("cannot evaluate a Frechet functional on an empty sample")
    if len(candidates) == 0:
        raise EmptyInputError("candidate set is empty")
    values = [frechet_functional(objects, c, space) for c in candidates]
    best = int(np.argmin(values))
    return candidates[best], values[best]
