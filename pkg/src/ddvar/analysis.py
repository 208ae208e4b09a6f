"""Physical-space updates, patching, and the scheme-equivalence checks.

A control vector w_i lives in the preconditioned space of its subdomain;
local_update maps it back to a physical increment on the subdomain, patch
recombines the subdomain states into the full-domain analysis, and
equivalence_report measures, on one instance, every quantity behind the
claim that the coupled and uncoupled schemes produce the same solution:
identical right-hand sides, the exact penalty structure of the coupled
matrices, and the interface agreement that turns uncoupled solutions into
fixed points of the coupled sweep.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .assembly import (
    SCHEME_DDDA,
    SCHEME_MPS,
    assemble_global,
    assemble_local,
    cost_w,
)
from .covariance import interface_coupling
from .errors import (
    DimensionMismatch,
    InvalidArgument,
    MissingNeighbor,
    UncoveredPoint,
)
from .geometry import Decomposition, decompose_uniform
from .observation import ProblemInstance
from .solvers import (
    IterationHistory,
    SolverOptions,
    _factorize,
    fixed_point_residual,
    solve_ddda,
    solve_global,
    solve_mps,
)

V_TIMES_W = "v_times_w"
BINV_V_TIMES_W = "binv_v_times_w"
_CONVENTIONS = (V_TIMES_W, BINV_V_TIMES_W)

SCHEME_GLOBAL = "global"


@dataclass(frozen=True)
class AssimilationResult:
    """Analysis state plus the control vectors and run diagnostics.

    history is empty for the direct schemes.  diagnostics carries
    global_cost (cost of the analysis through its control-space
    equivalent), interface_mismatch, and vs_global_linf (sup-norm distance
    to the single-domain analysis under the same update convention).
    """

    u_analysis: np.ndarray
    per_subdomain_w: tuple
    scheme: str
    history: IterationHistory
    diagnostics: dict


def local_update(inst: ProblemInstance, dec: Decomposition, i: int,
                 w_i: np.ndarray, convention: str = V_TIMES_W) -> np.ndarray:
    """Subdomain analysis from its control vector.

    v_times_w (default): u_i = u_i^b + V_i w_i, the increment under which
    the quadratic cost is exactly the cost of the returned state.
    binv_v_times_w: u_i = u_i^b + B_i^{-1} V_i w_i, the literal update of
    the preconditioned derivation; the two coincide when B = I.
    """
    if convention not in _CONVENTIONS:
        raise InvalidArgument(
            f"convention must be one of {_CONVENTIONS}, got {convention!r}"
        )
    idx = dec.indices(i)
    w_i = np.asarray(w_i, dtype=float)
    if w_i.shape != (idx.size,):
        raise DimensionMismatch(
            f"w has shape {w_i.shape}, expected ({idx.size},)"
        )
    v_i = inst.cov.v_factor[np.ix_(idx, idx)]
    u_b = inst.u_background[idx]
    increment = v_i @ w_i
    if convention == V_TIMES_W:
        return u_b + increment
    b_i = inst.cov.b[np.ix_(idx, idx)]
    factor = _factorize(b_i, f"subdomain {i} covariance block")
    return u_b + scipy.linalg.cho_solve(factor, increment)


def patch(dec: Decomposition, local_us) -> np.ndarray:
    """Recombine per-subdomain states into the full-domain vector.

    Points in a single subdomain take its value; points shared by several
    take the value of the highest subdomain index.  Implemented by writing
    subdomains in ascending order so later ones overwrite shared points.
    """
    if len(local_us) != dec.j_sub:
        raise DimensionMismatch(
            f"{len(local_us)} local vectors for {dec.j_sub} subdomains"
        )
    n = dec.grid.n_points
    out = np.zeros(n)
    covered = np.zeros(n, dtype=bool)
    for i in range(dec.j_sub):
        u_i = np.asarray(local_us[i], dtype=float)
        if u_i.shape != (dec.size(i),):
            raise DimensionMismatch(
                f"local vector {i} has shape {u_i.shape}, expected "
                f"({dec.size(i)},)"
            )
        idx = dec.indices(i)
        out[idx] = u_i
        covered[idx] = True
    if not covered.all():
        missing = np.nonzero(~covered)[0].tolist()
        raise UncoveredPoint(f"grid points {missing} belong to no subdomain")
    return out


def interface_mismatch(locals_, ws) -> float:
    """Max over coupled pairs of the interface gap ||p_i w_i - p_j w_j||_inf.

    When this vanishes for the uncoupled solutions, those solutions
    satisfy the coupled systems verbatim; on generic data it is a
    reported diagnostic, not an error.
    """
    if len(ws) != len(locals_):
        raise DimensionMismatch(
            f"{len(ws)} iterates for {len(locals_)} subdomains"
        )
    for sys in locals_:
        if sys.scheme != SCHEME_MPS:
            raise InvalidArgument(
                "interface_mismatch needs the coupled local systems"
            )
    pos = {sys.subdomain: k for k, sys in enumerate(locals_)}
    vecs = []
    for sys, w in zip(locals_, ws):
        w = np.asarray(w, dtype=float)
        if w.shape != (sys.size,):
            raise DimensionMismatch(
                f"iterate for subdomain {sys.subdomain} has shape {w.shape}, "
                f"expected ({sys.size},)"
            )
        vecs.append(w)
    worst = 0.0
    for k, sys in enumerate(locals_):
        for j, p_i, p_j in sys.penalty_pairs:
            if j not in pos:
                raise MissingNeighbor(
                    f"subdomain {sys.subdomain} couples to {j}, which is "
                    "absent from the system list"
                )
            gap = p_i @ vecs[k] - p_j @ vecs[pos[j]]
            if gap.size:
                worst = max(worst, float(np.max(np.abs(gap))))
    return worst


def control_equivalent(inst: ProblemInstance, u: np.ndarray) -> np.ndarray:
    """The w with u = u^b + V w, by one triangular solve."""
    u = np.asarray(u, dtype=float)
    n = inst.grid.n_points
    if u.shape != (n,):
        raise DimensionMismatch(f"u has shape {u.shape}, expected ({n},)")
    return scipy.linalg.solve_triangular(
        inst.cov.v_factor, u - inst.u_background, lower=True
    )


def _interface_gap(inst, dec, ws) -> float:
    # Same quantity as interface_mismatch, evaluated straight from the
    # covariance factor so uncoupled runs need no coupled assembly.
    worst = 0.0
    for i in range(dec.j_sub):
        for j in dec.neighbors(i):
            p_i, p_j = interface_coupling(inst.cov, dec, i, j)
            gap = p_i @ ws[i] - p_j @ ws[j]
            if gap.size:
                worst = max(worst, float(np.max(np.abs(gap))))
    return worst


def _iterate_cost(inst, dec, convention):
    def cost_of(ws):
        u = patch(dec, [
            local_update(inst, dec, i, ws[i], convention)
            for i in range(dec.j_sub)
        ])
        return cost_w(inst, control_equivalent(inst, u))
    return cost_of


def assimilate(inst: ProblemInstance, dec: Decomposition, method: str,
               opts: SolverOptions | None = None,
               convention: str = V_TIMES_W) -> AssimilationResult:
    """Run one scheme end to end and return the patched analysis.

    method is "global", "mps", or "ddda".  The single-domain analysis is
    always computed alongside as the reference for vs_global_linf.
    """
    opts = opts if opts is not None else SolverOptions()
    if method not in (SCHEME_GLOBAL, SCHEME_MPS, SCHEME_DDDA):
        raise InvalidArgument(
            f"method must be one of ('global', 'mps', 'ddda'), got {method!r}"
        )

    w_star = solve_global(assemble_global(inst), opts)
    whole = decompose_uniform(inst.grid, 1, 0)
    u_global = local_update(inst, whole, 0, w_star, convention)

    if method == SCHEME_GLOBAL:
        u = u_global
        per_w = (w_star,)
        history = IterationHistory(converged=True)
        gap = 0.0
    elif method == SCHEME_DDDA:
        locals_ = [
            assemble_local(inst, dec, i, SCHEME_DDDA)
            for i in range(dec.j_sub)
        ]
        ws = solve_ddda(locals_, opts)
        u = patch(dec, [
            local_update(inst, dec, i, ws[i], convention)
            for i in range(dec.j_sub)
        ])
        per_w = tuple(ws)
        history = IterationHistory(converged=True)
        gap = _interface_gap(inst, dec, ws)
    else:
        locals_ = [
            assemble_local(inst, dec, i, SCHEME_MPS)
            for i in range(dec.j_sub)
        ]
        ws, history = solve_mps(
            locals_, None, opts, cost_fn=_iterate_cost(inst, dec, convention)
        )
        u = patch(dec, [
            local_update(inst, dec, i, ws[i], convention)
            for i in range(dec.j_sub)
        ])
        per_w = tuple(ws)
        gap = interface_mismatch(locals_, ws)

    diagnostics = {
        "global_cost": cost_w(inst, control_equivalent(inst, u)),
        "interface_mismatch": float(gap),
        "vs_global_linf": float(np.max(np.abs(u - u_global))),
    }
    return AssimilationResult(
        u_analysis=u,
        per_subdomain_w=per_w,
        scheme=method,
        history=history,
        diagnostics=diagnostics,
    )


@dataclass(frozen=True)
class EquivalenceReport:
    """Measured equivalence of the two schemes on one instance.

    c_equal and a_structure_exact are identities that hold on any data;
    the remaining numbers quantify how far the uncoupled solutions are
    from being a fixed point of the coupled sweep and how far the two
    schemes' solutions and costs sit from each other and from the
    single-domain solve.  mps_converged flags whether the sweep hit its
    stop test inside the iteration budget.
    """

    c_equal: bool
    a_structure_exact: bool
    interface_mismatch: float
    ddda_in_mps_residual: float
    w_delta_linf: float
    cost_global: float
    cost_mps: float
    cost_ddda: float
    iters_mps: int
    mps_converged: bool
    history: IterationHistory = field(compare=False, repr=False)

    def to_dict(self) -> dict:
        return {
            "c_equal": self.c_equal,
            "a_structure_exact": self.a_structure_exact,
            "interface_mismatch": self.interface_mismatch,
            "ddda_in_mps_residual": self.ddda_in_mps_residual,
            "w_delta_linf": self.w_delta_linf,
            "cost_global": self.cost_global,
            "cost_mps": self.cost_mps,
            "cost_ddda": self.cost_ddda,
            "iters_mps": self.iters_mps,
            "mps_converged": self.mps_converged,
        }


def equivalence_report(inst: ProblemInstance, dec: Decomposition,
                       opts: SolverOptions | None = None,
                       convention: str = V_TIMES_W) -> EquivalenceReport:
    """Solve both schemes and measure every equivalence quantity.

    Mismatch is data, not an error: the report never raises on a nonzero
    gap, it only records it.
    """
    opts = opts if opts is not None else SolverOptions()
    mps_locals = [
        assemble_local(inst, dec, i, SCHEME_MPS) for i in range(dec.j_sub)
    ]
    dd_locals = [
        assemble_local(inst, dec, i, SCHEME_DDDA) for i in range(dec.j_sub)
    ]

    c_equal = all(
        m.c.tobytes() == d.c.tobytes()
        for m, d in zip(mps_locals, dd_locals)
    )

    structure_dev = 0.0
    for m_sys, d_sys in zip(mps_locals, dd_locals):
        if m_sys.penalty_pairs:
            g_sum = None
            for _, p_i, _ in m_sys.penalty_pairs:
                g = p_i.T @ p_i
                g_sum = g if g_sum is None else g_sum + g
            recomposed = d_sys.a + g_sum
        else:
            recomposed = d_sys.a
        structure_dev = max(
            structure_dev, float(np.max(np.abs(m_sys.a - recomposed)))
        )

    ws_dd = solve_ddda(dd_locals, opts)
    cost_fn = _iterate_cost(inst, dec, convention)
    ws_mps, history = solve_mps(mps_locals, None, opts, cost_fn=cost_fn)
    w_star = solve_global(assemble_global(inst), opts)

    w_delta = max(
        float(np.max(np.abs(wm - wd))) for wm, wd in zip(ws_mps, ws_dd)
    )
    return EquivalenceReport(
        c_equal=c_equal,
        a_structure_exact=structure_dev == 0.0,
        interface_mismatch=interface_mismatch(mps_locals, ws_dd),
        ddda_in_mps_residual=float(
            np.max(fixed_point_residual(mps_locals, ws_dd))
        ),
        w_delta_linf=w_delta,
        cost_global=cost_w(inst, w_star),
        cost_mps=cost_fn(ws_mps),
        cost_ddda=cost_fn(ws_dd),
        iters_mps=history.iterations,
        mps_converged=history.converged,
        history=history,
    )
