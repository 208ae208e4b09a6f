"""Point observations, the innovation vector, and synthetic instances."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .covariance import CovarianceModel, ObsCovariance
from .errors import DimensionMismatch, InvalidArgument
from .geometry import Grid1D, SelectionMap


@dataclass(frozen=True)
class ObservationSet:
    """Observed values v at distinct grid points plus their error model.

    h_op realizes the observation operator H as an nobs x NP selection,
    one unit entry per row; applying it to a state returns the state at
    obs_indices.
    """

    obs_indices: np.ndarray
    values: np.ndarray
    h_op: SelectionMap
    r_cov: ObsCovariance

    def __post_init__(self):
        idx = np.asarray(self.obs_indices, dtype=np.intp).reshape(-1)
        vals = np.asarray(self.values, dtype=float).reshape(-1)
        if idx.size > 1 and not np.all(np.diff(idx) > 0):
            raise InvalidArgument("obs_indices must be strictly increasing")
        if vals.size != idx.size:
            raise DimensionMismatch(
                f"{idx.size} observation points but {vals.size} values"
            )
        if self.r_cov.nobs != idx.size:
            raise DimensionMismatch(
                f"{idx.size} observation points but {self.r_cov.nobs} variances"
            )
        if idx.size > self.h_op.source_dim:
            raise InvalidArgument("more observations than grid points")
        if not np.array_equal(self.h_op.selected_indices, idx):
            raise InvalidArgument("h_op must select exactly obs_indices")
        object.__setattr__(self, "obs_indices", idx)
        object.__setattr__(self, "values", vals)

    @property
    def nobs(self) -> int:
        return int(self.obs_indices.size)


def point_observations(grid: Grid1D, obs_indices, values,
                       r_diag) -> ObservationSet:
    """Build an ObservationSet for given points, values, and variances."""
    idx = np.asarray(obs_indices, dtype=np.intp).reshape(-1)
    return ObservationSet(
        obs_indices=idx,
        values=values,
        h_op=SelectionMap(grid.n_points, idx),
        r_cov=ObsCovariance(r_diag),
    )


@dataclass(frozen=True)
class ProblemInstance:
    """One assimilation problem: grid, covariances, observations, background."""

    grid: Grid1D
    cov: CovarianceModel
    obs: ObservationSet
    u_background: np.ndarray
    u_truth: np.ndarray | None = None
    seed: int | None = None

    def __post_init__(self):
        n = self.grid.n_points
        ub = np.asarray(self.u_background, dtype=float).reshape(-1)
        if self.cov.n_points != n:
            raise DimensionMismatch(
                f"covariance is {self.cov.n_points} points, grid is {n}"
            )
        if ub.size != n:
            raise DimensionMismatch(
                f"u_background has {ub.size} entries, grid has {n}"
            )
        if self.obs.h_op.source_dim != n:
            raise DimensionMismatch("observation operator does not match grid")
        object.__setattr__(self, "u_background", ub)
        if self.u_truth is not None:
            ut = np.asarray(self.u_truth, dtype=float).reshape(-1)
            if ut.size != n:
                raise DimensionMismatch(
                    f"u_truth has {ut.size} entries, grid has {n}"
                )
            object.__setattr__(self, "u_truth", ut)


def innovation(inst: ProblemInstance) -> np.ndarray:
    """Observation-minus-background misfit d = v - H u^b."""
    return inst.obs.values - inst.obs.h_op.restrict(inst.u_background)


def local_observation_positions(obs: ObservationSet, start: int, stop: int):
    """Observations falling in the half-open index window [start, stop).

    Returns (sel, local): positions into the observation list and the
    observed grid indices shifted to window coordinates.  An observation
    sitting in an overlap region is picked up by every window containing
    it.
    """
    mask = (obs.obs_indices >= start) & (obs.obs_indices < stop)
    sel = np.nonzero(mask)[0]
    return sel, obs.obs_indices[sel] - start


def synthesize(grid: Grid1D, cov: CovarianceModel, nobs: int,
               sigma_o: float, seed: int) -> ProblemInstance:
    """Deterministic synthetic truth, background, and observations.

    Draws, in order, z then z' then eps from a PCG64 generator seeded with
    `seed`; the truth is V z, the background adds V z' (background errors
    then have covariance B), and observations add sigma_o-scaled noise to
    the truth at nobs equispaced points, obs_indices[k] = floor(k*n/nobs).
    sigma_o = 0 gives noiseless observations with unit variances standing
    in for the degenerate error model.
    """
    n = grid.n_points
    if not 0 <= nobs <= n:
        raise InvalidArgument(f"nobs must lie in 0..{n}, got {nobs}")
    if sigma_o < 0.0:
        raise InvalidArgument("sigma_o must be >= 0")
    if cov.n_points != n:
        raise DimensionMismatch(
            f"covariance is {cov.n_points} points, grid is {n}"
        )

    rng = np.random.Generator(np.random.PCG64(seed))
    z = rng.standard_normal(n)
    z_prime = rng.standard_normal(n)
    eps = rng.standard_normal(nobs)

    u_truth = cov.v_factor @ z
    u_background = u_truth + cov.v_factor @ z_prime
    obs_idx = np.array([(k * n) // nobs for k in range(nobs)], dtype=np.intp)
    values = u_truth[obs_idx] + sigma_o * eps
    variance = sigma_o**2 if sigma_o > 0.0 else 1.0
    obs = point_observations(grid, obs_idx, values, np.full(nobs, variance))
    return ProblemInstance(
        grid=grid,
        cov=cov,
        obs=obs,
        u_background=u_background,
        u_truth=u_truth,
        seed=seed,
    )
