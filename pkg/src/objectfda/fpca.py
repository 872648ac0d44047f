"""Functional principal component analysis of variance trajectories.

The covariance surface is the raw empirical one (divisor n, no smoothing).
Eigenanalysis runs on the quadrature-symmetrized matrix
W^{1/2} C W^{1/2} with a deterministic cyclic Jacobi solver, so repeated runs
on identical input are bit-identical.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from .errors import (
    ConvergenceError,
    DimensionError,
    InsufficientSampleError,
    NumericalError,
    ParameterError,
)
from .trajectories import TimeGrid, VarianceMatrix

logger = logging.getLogger(__name__)

EIGENVALUE_CLAMP = -1e-10
_JACOBI_TOL = 1e-14
_JACOBI_MAX_SWEEPS = 100
_RANK_RTOL = 1e-12


@dataclass(frozen=True)
class CovarianceSurface:
    """Empirical covariance surface on the time grid, symmetric by construction."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=float)
        m = self.grid.m
        if vals.shape != (m, m):
            raise DimensionError(f"surface must be {m} x {m}, got shape {vals.shape}")
        # mirror the upper triangle so symmetry is bit-exact
        vals = np.triu(vals) + np.triu(vals, 1).T
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class FpcaResult:
    """Mean variance function, covariance surface, eigenpairs, scores, and FVE."""

    grid: TimeGrid
    nu_hat: np.ndarray
    surface: CovarianceSurface
    eigenvalues: np.ndarray       # (J,) descending, clamped >= 0
    eigenfunctions: np.ndarray    # (J, m) on the grid
    eigengaps: np.ndarray         # (J,) delta_j = min_{l<=j} (lambda_l - lambda_{l+1})
    scores: np.ndarray            # (n, J)
    fve: np.ndarray               # (J,) cumulative fraction of variance explained
    degenerate: bool = False      # true when the surface had zero total variance

    @property
    def num_components(self) -> int:
        return self.eigenvalues.size


def mean_variance_function(v: VarianceMatrix) -> np.ndarray:
    """Columnwise average of the variance trajectories."""
    return v.values.mean(axis=0)


def covariance_surface(v: VarianceMatrix) -> CovarianceSurface:
    """Empirical covariance surface (1/n) sum_i V_i(s) V_i(t) - nu(s) nu(t)."""
    if v.n < 2:
        raise InsufficientSampleError(f"covariance needs n >= 2 subjects, got n = {v.n}")
    nu = v.values.mean(axis=0)
    c = v.values.T @ v.values / v.n - np.outer(nu, nu)
    return CovarianceSurface(v.grid, c)


def _jacobi_eigh(matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Rotations sweep the upper triangle in row order until every off-diagonal
    entry falls below 1e-14 relative to the Frobenius norm of the input
    (cap 100 sweeps).  Returns (eigenvalues, column-eigenvector matrix) in
    the solver's natural order.
    """
    a = matrix.copy()
    m = a.shape[0]
    vecs = np.eye(m)
    scale = float(np.sqrt(np.sum(matrix * matrix)))
    if scale == 0.0:
        return np.zeros(m), vecs
    thresh = _JACOBI_TOL * scale
    off_mask = ~np.eye(m, dtype=bool)

    for sweep in range(1, _JACOBI_MAX_SWEEPS + 1):
        if np.max(np.abs(a[off_mask])) <= thresh:
            return np.diag(a).copy(), vecs
        for p in range(m - 1):
            for q in range(p + 1, m):
                apq = a[p, q]
                if abs(apq) <= thresh:
                    continue
                app = a[p, p]
                aqq = a[q, q]
                theta = (aqq - app) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 1.0 / (2.0 * theta)
                else:
                    t = np.sign(theta) if theta != 0.0 else 1.0
                    t = t / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c

                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                # exact 2x2 block of the rotation, free of round-off residue
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0

                vec_p = vecs[:, p].copy()
                vec_q = vecs[:, q].copy()
                vecs[:, p] = c * vec_p - s * vec_q
                vecs[:, q] = s * vec_p + c * vec_q

    if np.max(np.abs(a[off_mask])) <= thresh:
        return np.diag(a).copy(), vecs
    raise ConvergenceError(
        f"Jacobi sweep cap of {_JACOBI_MAX_SWEEPS} reached without convergence",
        iterations=_JACOBI_MAX_SWEEPS,
    )


def _fix_signs(phis: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Deterministic sign convention for eigenfunctions.

    An eigenfunction is negated when its quadrature integral is negative; if
    the integral is below 1e-12 in magnitude, the first grid value exceeding
    1e-8 in magnitude is made positive instead.
    """
    fixed = phis.copy()
    for j in range(fixed.shape[0]):
        integral = float(np.sum(weights * fixed[j]))
        if abs(integral) >= 1e-12:
            if integral < 0.0:
                fixed[j] = -fixed[j]
        else:
            nonzero = np.nonzero(np.abs(fixed[j]) > 1e-8)[0]
            if nonzero.size and fixed[j, nonzero[0]] < 0.0:
                fixed[j] = -fixed[j]
    return fixed


def eigen_decompose(
    surface: CovarianceSurface, num_components: Union[int, str] = "all"
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Quadrature-weighted eigendecomposition of a covariance surface.

    Solves W^{1/2} C W^{1/2} u = lambda u and back-transforms the
    eigenvectors to eigenfunctions phi = W^{-1/2} u that are orthonormal
    under the grid's quadrature weights.  Eigenvalues in [-1e-10, 0) are
    clamped to zero; anything lower raises NumericalError.

    Returns (eigenvalues, eigenfunctions, eigengaps) truncated to
    ``num_components`` when it is an integer.
    """
    w = surface.grid.weights
    sqrt_w = np.sqrt(w)
    kernel = sqrt_w[:, None] * surface.values * sqrt_w[None, :]
    kernel = np.triu(kernel) + np.triu(kernel, 1).T

    raw_vals, raw_vecs = _jacobi_eigh(kernel)
    order = np.argsort(-raw_vals, kind="stable")
    lam = raw_vals[order]
    vecs = raw_vecs[:, order]

    if lam.size and lam[-1] < EIGENVALUE_CLAMP:
        raise NumericalError(
            f"covariance surface is not positive semidefinite: eigenvalue "
            f"{lam[-1]:.3e} < {EIGENVALUE_CLAMP}"
        )
    lam = np.where(lam < 0.0, 0.0, lam)

    phis = _fix_signs((vecs / sqrt_w[:, None]).T, w)

    padded = np.append(lam, 0.0)
    gaps = np.minimum.accumulate(padded[:-1] - padded[1:])

    if num_components == "all":
        return lam, phis, gaps
    j = int(num_components)
    if j < 1:
        raise ParameterError(f"num_components must be >= 1 or 'all', got {num_components}")
    j = min(j, lam.size)
    return lam[:j], phis[:j], gaps[:j]


def fpc_scores(
    v: VarianceMatrix, nu_hat: np.ndarray, eigenfunctions: np.ndarray
) -> np.ndarray:
    """Projection scores int (V_i - nu) phi_j dt under the grid quadrature."""
    nu = np.asarray(nu_hat, dtype=float)
    phis = np.atleast_2d(np.asarray(eigenfunctions, dtype=float))
    if nu.shape != (v.m,):
        raise DimensionError(f"nu_hat must have length {v.m}, got shape {nu.shape}")
    if phis.shape[1] != v.m:
        raise DimensionError(
            f"eigenfunctions must have {v.m} columns, got shape {phis.shape}"
        )
    centered = v.values - nu
    return centered @ (phis * v.grid.weights).T


def fraction_variance_explained(eigenvalues: np.ndarray) -> Tuple[np.ndarray, bool]:
    """Cumulative normalized eigenvalue sums; flags the all-zero spectrum."""
    lam = np.asarray(eigenvalues, dtype=float)
    total = lam.sum()
    if total <= 0.0:
        return np.zeros_like(lam), True
    return np.cumsum(lam) / total, False


def modes_of_variation(
    nu_hat: np.ndarray, eigenvalue: float, eigenfunction: np.ndarray, multiplier: float
) -> np.ndarray:
    """Mode of variation nu +/- c sqrt(lambda) phi; requires eigenvalue >= 0."""
    return np.asarray(nu_hat, dtype=float) + multiplier * np.sqrt(eigenvalue) * np.asarray(
        eigenfunction, dtype=float
    )


def spectrum_rank(eigenvalues: np.ndarray) -> int:
    """Numerical rank: eigenvalues above 1e-12 relative to the largest."""
    lam = np.asarray(eigenvalues, dtype=float)
    if lam.size == 0 or lam[0] <= 0.0:
        return 0
    return int(np.count_nonzero(lam > _RANK_RTOL * lam[0]))


def select_num_components(
    eigenvalues: np.ndarray, fve_threshold: float
) -> int:
    """Smallest J whose cumulative FVE reaches the threshold, capped at the rank."""
    if not 0.0 < fve_threshold <= 1.0:
        raise ParameterError(f"fve threshold must be in (0, 1], got {fve_threshold}")
    rank = spectrum_rank(eigenvalues)
    if rank == 0:
        return 0
    fve, _ = fraction_variance_explained(eigenvalues)
    return min(int(np.searchsorted(fve, fve_threshold - 1e-15) + 1), rank)


def fit_fpca(
    v: VarianceMatrix,
    num_components: Union[int, str, None] = None,
    fve_threshold: float = 0.95,
) -> FpcaResult:
    """Full FPCA of a variance matrix.

    ``num_components`` may be an integer J (truncated to the numerical rank,
    with a logged note), "all" for the complete spectrum, or None to select J
    by the FVE threshold.  The FVE entries are always fractions of the total
    variance, so a truncated result has a final FVE below one.
    """
    nu = mean_variance_function(v)
    surface = covariance_surface(v)
    lam_all, phi_all, gaps_all = eigen_decompose(surface, "all")
    fve_all, degenerate = fraction_variance_explained(lam_all)
    rank = spectrum_rank(lam_all)

    if num_components == "all":
        j = lam_all.size
    elif num_components is None:
        j = select_num_components(lam_all, fve_threshold) if not degenerate else 0
        j = max(j, 1) if lam_all.size else 0
    else:
        j = int(num_components)
        if j < 1:
            raise ParameterError(f"num_components must be >= 1, got {num_components}")
        if j > rank:
            logger.info(
                "requested %d components but the spectrum has rank %d; truncating",
                j,
                rank,
            )
            j = max(rank, 1)
        j = min(j, lam_all.size)

    lam = lam_all[:j]
    phis = phi_all[:j]
    scores = fpc_scores(v, nu, phis) if j else np.zeros((v.n, 0))
    return FpcaResult(
        grid=v.grid,
        nu_hat=nu,
        surface=surface,
        eigenvalues=lam,
        eigenfunctions=phis,
        eigengaps=gaps_all[:j],
        scores=scores,
        fve=fve_all[:j],
        degenerate=degenerate,
    )
