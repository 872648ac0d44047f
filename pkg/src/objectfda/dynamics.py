"""Empirical dynamics of the variance trajectories.

Fits the linear drift model  dW/dt = beta(t) W(t) + Z(t)  for the centered
trajectories W_i = V_i - nu via the pointwise moment ratio
beta(t) = cov(W, W') / var(W), with R^2(t) the explained-variance fraction
and var{Z}(t) the residual drift variance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    DimensionError,
    GridError,
    InsufficientSampleError,
    ParameterError,
)
from .trajectories import TimeGrid, VarianceMatrix

VARIANCE_FLOOR = 1e-12

REGIME_CENTRIPETAL = "centripetal"
REGIME_CENTRIFUGAL = "centrifugal"
REGIME_UNDEFINED = "undefined"


@dataclass(frozen=True)
class DynamicsResult:
    """beta(t), R^2(t), drift variance, and regime labels on the grid.

    Points where the centered variance or its derivative carries essentially
    no variation are flagged 'undefined' and left as NaN, never interpolated.
    """

    grid: TimeGrid
    beta: np.ndarray
    r_squared: np.ndarray
    drift_var: np.ndarray
    regime: tuple
    bandwidth: float

    def __post_init__(self):
        m = self.grid.m
        for name in ("beta", "r_squared", "drift_var"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=float)
            if arr.shape != (m,):
                raise DimensionError(f"{name} must have length {m}, got shape {arr.shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        regime = tuple(self.regime)
        if len(regime) != m:
            raise DimensionError(f"{len(regime)} regime labels for {m} grid points")
        object.__setattr__(self, "regime", regime)


def smooth_trajectories(v: VarianceMatrix, bandwidth: float) -> np.ndarray:
    """Per-subject local-linear smoother with a Gaussian kernel.

    Bandwidth zero returns the input unchanged; local-linear fits reproduce
    straight lines exactly for any bandwidth.
    """
    if bandwidth < 0.0:
        raise ParameterError(f"bandwidth must be >= 0, got {bandwidth}")
    if bandwidth == 0.0:
        return v.values.copy()
    t = v.grid.points
    offsets = t[:, None] - t[None, :]  # offsets[i, k] = t_i - t_k, eval point k
    kern = np.exp(-(offsets * offsets) / (2.0 * bandwidth * bandwidth))
    s0 = kern.sum(axis=0)
    s1 = (kern * offsets).sum(axis=0)
    s2 = (kern * offsets * offsets).sum(axis=0)
    t0 = v.values @ kern
    t1 = v.values @ (kern * offsets)
    denom = s0 * s2 - s1 * s1
    # bandwidths far below the grid spacing degenerate to a kernel average
    safe = denom > 1e-14 * np.maximum(s0 * s2, 1e-300)
    fitted = np.where(safe, (s2 * t0 - s1 * t1), t0)
    fitted /= np.where(safe, denom, s0)
    return fitted


def derivative_trajectories(smoothed: np.ndarray, grid: TimeGrid) -> np.ndarray:
    """Rowwise derivatives by three-point differences on a possibly non-uniform grid.

    Interior points use the centered three-point formula; the end points use
    one-sided second-order formulas.  Exact for quadratic trajectories.
    """
    y = np.atleast_2d(np.asarray(smoothed, dtype=float))
    t = grid.points
    m = t.size
    if m < 3:
        raise GridError(f"derivatives need m >= 3 grid points, got m = {m}")
    if y.shape[1] != m:
        raise DimensionError(f"trajectories have {y.shape[1]} columns for {m} grid points")

    d = np.empty_like(y)
    h1 = t[1:-1] - t[:-2]
    h2 = t[2:] - t[1:-1]
    d[:, 1:-1] = (
        -h2 / (h1 * (h1 + h2)) * y[:, :-2]
        + (h2 - h1) / (h1 * h2) * y[:, 1:-1]
        + h1 / (h2 * (h1 + h2)) * y[:, 2:]
    )
    a1 = t[1] - t[0]
    a2 = t[2] - t[1]
    d[:, 0] = (
        -(2.0 * a1 + a2) / (a1 * (a1 + a2)) * y[:, 0]
        + (a1 + a2) / (a1 * a2) * y[:, 1]
        - a1 / (a2 * (a1 + a2)) * y[:, 2]
    )
    b1 = t[-2] - t[-3]
    b2 = t[-1] - t[-2]
    d[:, -1] = (
        b2 / (b1 * (b1 + b2)) * y[:, -3]
        - (b1 + b2) / (b1 * b2) * y[:, -2]
        + (b1 + 2.0 * b2) / (b2 * (b1 + b2)) * y[:, -1]
    )
    return d if np.asarray(smoothed).ndim == 2 else d[0]


def dynamics_fit(
    values: np.ndarray,
    derivatives: np.ndarray,
    nu_hat: np.ndarray,
    dnu_hat: np.ndarray,
    grid: TimeGrid,
    bandwidth: float = 0.0,
) -> DynamicsResult:
    """Pointwise moment-ratio fit of the linear dynamics model.

    All moments use divisor n.  A grid point is flagged undefined when the
    centered variance or centered derivative variance falls below 1e-12.
    """
    v = np.atleast_2d(np.asarray(values, dtype=float))
    dv = np.atleast_2d(np.asarray(derivatives, dtype=float))
    if v.shape != dv.shape:
        raise DimensionError(f"values {v.shape} and derivatives {dv.shape} differ in shape")
    if v.shape[1] != grid.m:
        raise DimensionError(f"values have {v.shape[1]} columns for {grid.m} grid points")
    n = v.shape[0]
    if n < 2:
        raise InsufficientSampleError(f"dynamics fit needs n >= 2 subjects, got n = {n}")

    w = v - np.asarray(nu_hat, dtype=float)
    wp = dv - np.asarray(dnu_hat, dtype=float)
    wc = w - w.mean(axis=0)
    wpc = wp - wp.mean(axis=0)
    var_w = (wc * wc).mean(axis=0)
    var_wp = (wpc * wpc).mean(axis=0)
    cov = (wc * wpc).mean(axis=0)

    defined = (var_w >= VARIANCE_FLOOR) & (var_wp >= VARIANCE_FLOOR)
    beta = np.full(grid.m, np.nan)
    r_squared = np.full(grid.m, np.nan)
    np.divide(cov, var_w, out=beta, where=defined)
    np.divide(cov * cov, var_w * var_wp, out=r_squared, where=defined)
    r_squared = np.where(defined, np.clip(r_squared, 0.0, 1.0), np.nan)
    drift_var = np.where(defined, np.maximum(var_wp - beta * beta * var_w, 0.0), np.nan)

    regime = tuple(
        REGIME_UNDEFINED
        if not defined[k] or beta[k] == 0.0
        else (REGIME_CENTRIPETAL if beta[k] < 0.0 else REGIME_CENTRIFUGAL)
        for k in range(grid.m)
    )
    return DynamicsResult(grid, beta, r_squared, drift_var, regime, bandwidth)


def estimate_dynamics(v: VarianceMatrix, bandwidth: float = 0.0) -> DynamicsResult:
    """Smooth, differentiate, and fit the dynamics model for a variance matrix."""
    smoothed = smooth_trajectories(v, bandwidth)
    derivs = derivative_trajectories(smoothed, v.grid)
    nu = smoothed.mean(axis=0)
    dnu = derivs.mean(axis=0)
    return dynamics_fit(smoothed, derivs, nu, dnu, v.grid, bandwidth)


def default_bandwidth(grid: TimeGrid) -> float:
    """Default smoothing bandwidth: a tenth of the time span."""
    return 0.1 * float(grid.points[-1] - grid.points[0])
