"""Background and observation error covariances and the factor of B.

The background covariance B is carried together with a lower-triangular
factor V satisfying B = V V^T, which preconditions the minimization (the
control variable is w with increment V w).  The observation covariance R
is restricted to a diagonal, so its inverse is an elementwise division.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, FactorizationFailure, InvalidArgument
from .geometry import (
    Decomposition,
    Grid1D,
    interface_restriction,
    restrict_matrix,
    subdomain_restriction,
)


@dataclass(frozen=True)
class CovarianceModel:
    """Background covariance B with factor V, B = V V^T.

    kind is "identity" or "gaussian"; length_scale and sigma_b are only
    set for the gaussian kind.  Construction checks shapes and exact
    symmetry of b; the factor residual is the job of factor_check, so a
    deliberately corrupted v_factor can still be constructed in tests.
    """

    b: np.ndarray
    v_factor: np.ndarray
    kind: str
    length_scale: float | None = None
    sigma_b: float | None = None

    def __post_init__(self):
        b = np.asarray(self.b, dtype=float)
        v = np.asarray(self.v_factor, dtype=float)
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise DimensionMismatch(f"b must be square, got shape {b.shape}")
        if v.shape != b.shape:
            raise DimensionMismatch(
                f"v_factor shape {v.shape} does not match b shape {b.shape}"
            )
        if np.max(np.abs(b - b.T)) != 0.0:
            raise InvalidArgument("b must be exactly symmetric")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "v_factor", v)

    @property
    def n_points(self) -> int:
        return self.b.shape[0]


@dataclass(frozen=True)
class ObsCovariance:
    """Diagonal observation error covariance, stored as its diagonal."""

    r_diag: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.r_diag, dtype=float).reshape(-1)
        if r.size and not np.all(r > 0.0):
            raise InvalidArgument("observation variances must be positive")
        object.__setattr__(self, "r_diag", r)

    @property
    def nobs(self) -> int:
        return int(self.r_diag.size)


def _cholesky_lower(b: np.ndarray, what: str) -> np.ndarray:
    try:
        return np.linalg.cholesky(b)
    except np.linalg.LinAlgError as exc:
        raise FactorizationFailure(f"{what} is not numerically SPD") from exc


def build_gaussian_covariance(grid: Grid1D, length_scale: float,
                              sigma_b: float) -> CovarianceModel:
    """Squared-exponential covariance on the grid coordinates.

    b[p, q] = sigma_b^2 * exp(-(x_p - x_q)^2 / (2 * length_scale^2)) with a
    diagonal jitter of 1e-10 * sigma_b^2; the kernel alone is numerically
    rank-deficient once length_scale spans several grid spacings.
    """
    if length_scale <= 0.0:
        raise InvalidArgument("length_scale must be positive")
    if sigma_b <= 0.0:
        raise InvalidArgument("sigma_b must be positive")
    dx = grid.coords[:, None] - grid.coords[None, :]
    b = sigma_b**2 * np.exp(-(dx**2) / (2.0 * length_scale**2))
    b[np.diag_indices_from(b)] += 1e-10 * sigma_b**2
    v = _cholesky_lower(b, "gaussian background covariance")
    return CovarianceModel(
        b=b,
        v_factor=v,
        kind="gaussian",
        length_scale=float(length_scale),
        sigma_b=float(sigma_b),
    )


def identity_covariance(grid: Grid1D) -> CovarianceModel:
    """B = I with factor V = I."""
    return CovarianceModel(
        b=np.eye(grid.n_points),
        v_factor=np.eye(grid.n_points),
        kind="identity",
    )


def factor_check(model: CovarianceModel) -> float:
    """Max-abs residual of the factorization, max |B - V V^T|."""
    return float(np.max(np.abs(model.b - model.v_factor @ model.v_factor.T)))


def interface_coupling(model: CovarianceModel, dec: Decomposition,
                       i: int, j: int):
    """Interface rows of V against the two neighboring column blocks.

    Returns (p_i, p_j) where p_i holds the entries of V at the interface
    rows of subdomain i toward j and the columns of subdomain i, and p_j
    the same rows against the columns of subdomain j.  The pair defines
    the interface penalty 0.5 * ||p_i w_i - p_j w_j||^2, so the stiffness
    contribution on subdomain i is p_i^T p_i and the coupling block toward
    j is p_i^T p_j.
    """
    if model.n_points != dec.grid.n_points:
        raise DimensionMismatch(
            f"covariance is {model.n_points} points, grid is "
            f"{dec.grid.n_points}"
        )
    gamma = interface_restriction(dec, i, j)
    p_i = restrict_matrix(gamma, subdomain_restriction(dec, i), model.v_factor)
    p_j = restrict_matrix(gamma, subdomain_restriction(dec, j), model.v_factor)
    return p_i, p_j
