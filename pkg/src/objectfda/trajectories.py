"""Sampled object trajectories, mean trajectories, and variance trajectories."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence

import numpy as np

from .errors import DimensionError, GridError, InvalidObjectError, ObjectFdaError
from .spaces import (
    GraphLaplacian,
    ObjectSpace,
    PlanarShape,
    QuantileDistribution,
    distance,
    pointwise_frechet_mean,
)

_OBJECT_TYPES = {
    ObjectSpace.NETWORK: GraphLaplacian,
    ObjectSpace.DISTRIBUTION: QuantileDistribution,
    ObjectSpace.SHAPE: PlanarShape,
}

Provenance = Literal["estimated", "supplied-oracle"]


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing time points with trapezoid quadrature weights."""

    points: np.ndarray
    weights: np.ndarray = field(init=False)

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise GridError(f"time grid needs at least 2 points, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise GridError("time grid points must be finite")
        if np.any(np.diff(pts) <= 0.0):
            raise GridError("time grid points must be strictly increasing")
        w = np.empty_like(pts)
        w[0] = (pts[1] - pts[0]) / 2.0
        w[-1] = (pts[-1] - pts[-2]) / 2.0
        if pts.size > 2:
            w[1:-1] = (pts[2:] - pts[:-2]) / 2.0
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, m: int, t_min: float = 0.0, t_max: float = 1.0) -> "TimeGrid":
        return cls(np.linspace(t_min, t_max, m))

    @property
    def m(self) -> int:
        return self.points.size

    def matches(self, other: "TimeGrid") -> bool:
        return np.array_equal(self.points, other.points)


@dataclass(frozen=True)
class ObjectTrajectorySample:
    """n subjects observed as objects from one space on a shared time grid."""

    space: ObjectSpace
    grid: TimeGrid
    subjects: tuple
    subject_ids: tuple
    groups: Optional[tuple] = None

    def __post_init__(self):
        subjects = tuple(tuple(traj) for traj in self.subjects)
        ids = tuple(str(s) for s in self.subject_ids)
        object.__setattr__(self, "subjects", subjects)
        object.__setattr__(self, "subject_ids", ids)
        if len(subjects) < 1:
            raise InvalidObjectError("a sample needs at least one subject")
        if len(ids) != len(subjects):
            raise DimensionError(
                f"{len(ids)} subject ids for {len(subjects)} subjects"
            )
        if self.groups is not None:
            groups = tuple(str(g) for g in self.groups)
            if len(groups) != len(subjects):
                raise DimensionError(
                    f"{len(groups)} group labels for {len(subjects)} subjects"
                )
            object.__setattr__(self, "groups", groups)
        expected_type = _OBJECT_TYPES[self.space]
        m = self.grid.m
        for sid, traj in zip(ids, subjects):
            if len(traj) != m:
                raise DimensionError(
                    f"subject '{sid}' has {len(traj)} objects for a grid of {m} points"
                )
            for k, obj in enumerate(traj):
                if not isinstance(obj, expected_type):
                    raise InvalidObjectError(
                        f"subject '{sid}' grid index {k}: expected "
                        f"{expected_type.__name__}, got {type(obj).__name__}"
                    )
        self._check_homogeneity()

    def _check_homogeneity(self):
        first = self.subjects[0][0]
        if self.space is ObjectSpace.NETWORK:
            dim = first.dim
            for sid, traj in zip(self.subject_ids, self.subjects):
                for k, obj in enumerate(traj):
                    if obj.dim != dim:
                        raise DimensionError(
                            f"subject '{sid}' grid index {k}: node count {obj.dim} != {dim}"
                        )
        elif self.space is ObjectSpace.DISTRIBUTION:
            pgrid = first.prob_grid
            for sid, traj in zip(self.subject_ids, self.subjects):
                for k, obj in enumerate(traj):
                    if not np.array_equal(obj.prob_grid, pgrid):
                        raise GridError(
                            f"subject '{sid}' grid index {k}: probability grid differs "
                            "from the shared grid"
                        )
        else:
            k_landmarks = first.k
            for sid, traj in zip(self.subject_ids, self.subjects):
                for k, obj in enumerate(traj):
                    if obj.k != k_landmarks:
                        raise DimensionError(
                            f"subject '{sid}' grid index {k}: landmark count "
                            f"{obj.k} != {k_landmarks}"
                        )

    @property
    def n(self) -> int:
        return len(self.subjects)

    @property
    def m(self) -> int:
        return self.grid.m

    def slice_at(self, k: int) -> list:
        """Objects of all subjects at grid index k, in subject order."""
        return [traj[k] for traj in self.subjects]


@dataclass(frozen=True)
class MeanTrajectory:
    """Pointwise Frechet mean objects on the grid, estimated or supplied as an oracle."""

    space: ObjectSpace
    grid: TimeGrid
    objects: tuple
    provenance: Provenance

    def __post_init__(self):
        objects = tuple(self.objects)
        object.__setattr__(self, "objects", objects)
        if self.provenance not in ("estimated", "supplied-oracle"):
            raise InvalidObjectError(f"unknown provenance '{self.provenance}'")
        if len(objects) != self.grid.m:
            raise DimensionError(
                f"{len(objects)} mean objects for a grid of {self.grid.m} points"
            )
        expected_type = _OBJECT_TYPES[self.space]
        for k, obj in enumerate(objects):
            if not isinstance(obj, expected_type):
                raise InvalidObjectError(
                    f"grid index {k}: expected {expected_type.__name__}, "
                    f"got {type(obj).__name__}"
                )


@dataclass(frozen=True)
class VarianceMatrix:
    """Squared-distance (variance) trajectories, one row per subject.

    ``oracle`` is true when the distances were taken to a supplied true mean
    rather than to an estimated one.
    """

    grid: TimeGrid
    values: np.ndarray
    oracle: bool = False

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=float)
        if vals.ndim != 2 or vals.shape[1] != self.grid.m:
            raise DimensionError(
                f"variance values must be n x {self.grid.m}, got shape {vals.shape}"
            )
        if vals.shape[0] < 1:
            raise InvalidObjectError("variance matrix needs at least one subject row")
        if not np.all(np.isfinite(vals)):
            raise InvalidObjectError("variance values must be finite")
        # tolerate metric round-off of at most 1e-15 below zero
        if vals.min() < -1e-15:
            raise InvalidObjectError(
                f"variance values must be nonnegative, min = {vals.min():.3e}"
            )
        vals = np.maximum(vals, 0.0)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]


def frechet_mean_trajectory(sample: ObjectTrajectorySample) -> MeanTrajectory:
    """Estimate the mean trajectory by the pointwise Frechet mean at each grid point."""
    objects = []
    for k in range(sample.m):
        try:
            objects.append(pointwise_frechet_mean(sample.slice_at(k), sample.space))
        except ObjectFdaError as exc:
            wrapped = type(exc)(f"grid index {k}: {exc}")
            if hasattr(exc, "iterations"):
                wrapped.iterations = exc.iterations
            raise wrapped from exc
    return MeanTrajectory(sample.space, sample.grid, tuple(objects), "estimated")


def variance_trajectories(
    sample: ObjectTrajectorySample, mean: MeanTrajectory
) -> VarianceMatrix:
    """Squared distances of every subject to the mean trajectory, pointwise."""
    if sample.space is not mean.space:
        raise GridError(
            f"sample space '{sample.space.value}' does not match mean space "
            f"'{mean.space.value}'"
        )
    if not sample.grid.matches(mean.grid):
        raise GridError("sample and mean trajectory are on different time grids")
    values = np.empty((sample.n, sample.m))
    for i, traj in enumerate(sample.subjects):
        for k, obj in enumerate(traj):
            d = distance(obj, mean.objects[k], sample.space)
            values[i, k] = d * d
    return VarianceMatrix(sample.grid, values, oracle=(mean.provenance == "supplied-oracle"))
