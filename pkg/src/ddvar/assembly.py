"""Assembly of the global and per-subdomain linear systems.

The preconditioned cost is

    J(w) = 1/2 w^T w + 1/2 (H V w - d)^T R^{-1} (H V w - d)

whose stationarity condition is a w = c with a = V^T H^T R^{-1} H V + I and
c = V^T H^T R^{-1} d.  Each subdomain gets the same structure built from the
local blocks V_i, H_i, R_i, d_i.  The uncoupled scheme stops there; the
coupled scheme adds, per neighbor j, the interface penalty stiffness
p_i^T p_i to the matrix and carries the coupling block a_ij = p_i^T p_j,
which multiplies the neighbor iterate on the right-hand side during the
fixed-point sweep.

The right-hand side c_i is computed by one shared code path regardless of
scheme, which is what makes the cross-scheme equality of c_i hold to the
bit, not merely to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .covariance import interface_coupling
from .errors import (
    DimensionMismatch,
    InvalidArgument,
    MissingNeighbor,
)
from .geometry import Decomposition
from .observation import (
    ProblemInstance,
    innovation,
    local_observation_positions,
)

SCHEME_MPS = "mps"
SCHEME_DDDA = "ddda"
_SCHEMES = (SCHEME_MPS, SCHEME_DDDA)


@dataclass(frozen=True)
class GlobalSystem:
    """Normal equations of the full-domain cost: a w = c."""

    a: np.ndarray
    c: np.ndarray


@dataclass(frozen=True)
class LocalSystem:
    """One subdomain's system a_i w_i = c_i (+ coupling for the mps scheme).

    couplings holds (j, a_ij) pairs in ascending neighbor order and is
    empty for the ddda scheme.  penalty_pairs keeps the raw interface
    factors (j, p_i, p_j) behind the penalty so diagnostics can evaluate
    p_i w_i - p_j w_j without reassembling.
    """

    subdomain: int
    scheme: str
    a: np.ndarray
    c: np.ndarray
    couplings: tuple = ()
    penalty_pairs: tuple = ()

    @property
    def size(self) -> int:
        return int(self.c.size)


def _weighted_normal(m: np.ndarray, r_inv: np.ndarray, d: np.ndarray):
    # base = m^T R^{-1} m + I and rhs = m^T R^{-1} d; the lone code path
    # for both schemes and for the global system.
    n = m.shape[1]
    a = m.T @ (r_inv[:, None] * m) + np.eye(n)
    c = m.T @ (r_inv * d)
    return a, c


def assemble_global(inst: ProblemInstance) -> GlobalSystem:
    """Build a = V^T H^T R^{-1} H V + I and c = V^T H^T R^{-1} d.

    H is a point selection, so H V is a row slice of the factor V.  With
    no observations the system degenerates to a = I, c = 0.
    """
    m = inst.cov.v_factor[inst.obs.obs_indices, :]
    r_inv = 1.0 / inst.obs.r_cov.r_diag
    a, c = _weighted_normal(m, r_inv, innovation(inst))
    return GlobalSystem(a=a, c=c)


def assemble_local(inst: ProblemInstance, dec: Decomposition, i: int,
                   scheme: str) -> LocalSystem:
    """Build subdomain i's system for the given scheme.

    Both schemes share a_i = V_i^T H_i^T R_i^{-1} H_i V_i + I_i and
    c_i = V_i^T H_i^T R_i^{-1} d_i, where V_i is the subdomain block of V
    and H_i, R_i, d_i keep exactly the observations whose grid point lies
    in subdomain i.  The mps scheme then adds sum_j p_i^T p_i, accumulated
    in ascending neighbor order so that reports can recompose the sum and
    land on identical floats.
    """
    if scheme not in _SCHEMES:
        raise InvalidArgument(
            f"scheme must be one of {_SCHEMES}, got {scheme!r}"
        )
    idx = dec.indices(i)
    start, stop = dec.subdomains[i]
    v_i = inst.cov.v_factor[np.ix_(idx, idx)]

    sel, local_pts = local_observation_positions(inst.obs, start, stop)
    d = innovation(inst)
    m_i = v_i[local_pts, :]
    r_inv_i = 1.0 / inst.obs.r_cov.r_diag[sel]
    a, c = _weighted_normal(m_i, r_inv_i, d[sel])

    couplings = []
    pairs = []
    if scheme == SCHEME_MPS:
        g_sum = None
        for j in dec.neighbors(i):
            p_i, p_j = interface_coupling(inst.cov, dec, i, j)
            g = p_i.T @ p_i
            g_sum = g if g_sum is None else g_sum + g
            couplings.append((j, p_i.T @ p_j))
            pairs.append((j, p_i, p_j))
        if g_sum is not None:
            a = a + g_sum

    return LocalSystem(
        subdomain=i,
        scheme=scheme,
        a=a,
        c=c,
        couplings=tuple(couplings),
        penalty_pairs=tuple(pairs),
    )


def cost_w(inst: ProblemInstance, w: np.ndarray) -> float:
    """Evaluate J(w) = 1/2 w^T w + 1/2 (H V w - d)^T R^{-1} (H V w - d)."""
    w = np.asarray(w, dtype=float)
    n = inst.grid.n_points
    if w.shape != (n,):
        raise DimensionMismatch(f"w has shape {w.shape}, expected ({n},)")
    misfit = inst.cov.v_factor[inst.obs.obs_indices, :] @ w - innovation(inst)
    r_inv = 1.0 / inst.obs.r_cov.r_diag
    return 0.5 * float(w @ w) + 0.5 * float(misfit @ (r_inv * misfit))


def local_gradient(sys: LocalSystem, w_i: np.ndarray,
                   neighbor_ws=None) -> np.ndarray:
    """Gradient of the coupled local cost at w_i given neighbor iterates.

    Equals a_i w_i - c_i - sum_j a_ij w_j, the residual of the fixed-point
    system; it vanishes exactly at the local solve.  neighbor_ws maps
    neighbor id to that subdomain's current iterate and may be omitted
    only when the subdomain has no couplings.
    """
    if sys.scheme != SCHEME_MPS:
        raise InvalidArgument(
            "local_gradient is defined for the coupled (mps) scheme"
        )
    w_i = np.asarray(w_i, dtype=float)
    if w_i.shape != (sys.size,):
        raise DimensionMismatch(
            f"w has shape {w_i.shape}, expected ({sys.size},)"
        )
    g = sys.a @ w_i - sys.c
    for j, a_ij in sys.couplings:
        if neighbor_ws is None or j not in neighbor_ws:
            raise MissingNeighbor(
                f"subdomain {sys.subdomain} needs the iterate of neighbor {j}"
            )
        w_j = np.asarray(neighbor_ws[j], dtype=float)
        if w_j.shape != (a_ij.shape[1],):
            raise DimensionMismatch(
                f"neighbor {j} iterate has shape {w_j.shape}, expected "
                f"({a_ij.shape[1]},)"
            )
        g = g - a_ij @ w_j
    return g
