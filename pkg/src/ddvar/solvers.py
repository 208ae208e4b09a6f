"""Direct, per-subdomain, and fixed-point solvers.

The global system and every uncoupled local system are solved once, by a
dense Cholesky factorization by default.  The coupled scheme iterates

    a_i w_i^{n+1} = c_i + sum_j a_ij w_j^n

with every subdomain in an iteration consuming only iteration-n neighbor
values, a Jacobi-style parallel sweep.  The stop test fires when the
largest successive-iterate change drops to tol, or when every fixed-point
residual is already below tol * kappa with kappa = 1 + max_i ||a_i||_inf
(which lets a coupling-free system stop after its first, already exact,
solve).  Running out of iterations is reported through the history flag,
never raised, so the best iterate stays available.

Subdomain solves within one iteration are data-parallel over immutable
inputs; with threads > 1 they run on a thread pool.  Each local solve
performs the same floating-point operations in the same order no matter
where it runs, so results do not depend on the degree of parallelism.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .assembly import SCHEME_DDDA, SCHEME_MPS, GlobalSystem, LocalSystem
from .errors import (
    DimensionMismatch,
    FactorizationFailure,
    InvalidArgument,
    MissingNeighbor,
)

DIRECT_CHOLESKY = "direct_cholesky"
CONJUGATE_GRADIENT = "cg"


@dataclass
class SolverOptions:
    """Knobs shared by all solvers.

    tol and max_iters control the fixed-point sweep; local_solver picks
    the per-subdomain kernel (dense Cholesky, or conjugate gradients with
    cg_tol / cg_max); threads caps the worker pool, 1 meaning serial.
    """

    tol: float = 1e-12
    max_iters: int = 500
    local_solver: str = DIRECT_CHOLESKY
    cg_tol: float = 1e-14
    cg_max: int | None = None
    threads: int = 1

    def __post_init__(self):
        if self.tol <= 0.0:
            raise InvalidArgument("tol must be positive")
        if self.max_iters < 1:
            raise InvalidArgument("max_iters must be >= 1")
        if self.local_solver not in (DIRECT_CHOLESKY, CONJUGATE_GRADIENT):
            raise InvalidArgument(
                f"local_solver must be {DIRECT_CHOLESKY!r} or "
                f"{CONJUGATE_GRADIENT!r}"
            )
        if self.cg_tol <= 0.0:
            raise InvalidArgument("cg_tol must be positive")
        if self.cg_max is not None and self.cg_max < 1:
            raise InvalidArgument("cg_max must be >= 1")
        if self.threads < 1:
            raise InvalidArgument("threads must be >= 1")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    max_delta: float
    global_cost: float
    residual_norms: tuple


@dataclass
class IterationHistory:
    """Per-iteration trace of the fixed-point sweep."""

    records: list = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.records)

    def append(self, record: IterationRecord) -> None:
        if self.records and record.iteration <= self.records[-1].iteration:
            raise InvalidArgument("iteration records must be appended in order")
        self.records.append(record)


def _factorize(a: np.ndarray, what: str):
    try:
        return scipy.linalg.cho_factor(a, lower=True)
    except np.linalg.LinAlgError as exc:
        raise FactorizationFailure(f"{what} is not numerically SPD") from exc


def conjugate_gradient(a: np.ndarray, b: np.ndarray, tol: float,
                       max_iter: int) -> np.ndarray:
    """Plain conjugate gradients for an SPD matrix, zero start."""
    x = np.zeros_like(b, dtype=float)
    r = b.astype(float).copy()
    p = r.copy()
    rs = float(r @ r)
    target = tol * max(1.0, math.sqrt(float(b @ b)))
    for _ in range(max_iter):
        if math.sqrt(rs) <= target:
            break
        ap = a @ p
        alpha = rs / float(p @ ap)
        x = x + alpha * p
        r = r - alpha * ap
        rs_new = float(r @ r)
        p = r + (rs_new / rs) * p
        rs = rs_new
    return x


class _LocalKernel:
    """One subdomain's solve, factored once and reused every iteration."""

    def __init__(self, sys: LocalSystem, opts: SolverOptions):
        self._sys = sys
        self._opts = opts
        if opts.local_solver == DIRECT_CHOLESKY:
            self._factor = _factorize(sys.a, f"subdomain {sys.subdomain} matrix")
        else:
            self._factor = None

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self._factor is not None:
            return scipy.linalg.cho_solve(self._factor, rhs)
        opts = self._opts
        max_iter = opts.cg_max if opts.cg_max is not None else 10 * rhs.size
        return conjugate_gradient(self._sys.a, rhs, opts.cg_tol, max_iter)


def _map_ordered(fn, count: int, threads: int):
    # Results gathered by index, so the outcome is identical whether the
    # tasks ran serially or on a pool.
    if threads == 1 or count <= 1:
        return [fn(k) for k in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(count)))


def _positions(locals_: list) -> dict:
    pos = {}
    for k, sys in enumerate(locals_):
        if sys.subdomain in pos:
            raise InvalidArgument(
                f"subdomain {sys.subdomain} appears twice in the system list"
            )
        pos[sys.subdomain] = k
    return pos


def solve_global(sys: GlobalSystem, opts: SolverOptions | None = None):
    """Solve a w = c for the full-domain system."""
    opts = opts if opts is not None else SolverOptions()
    if opts.local_solver == DIRECT_CHOLESKY:
        return scipy.linalg.cho_solve(_factorize(sys.a, "global matrix"), sys.c)
    max_iter = opts.cg_max if opts.cg_max is not None else 10 * sys.c.size
    return conjugate_gradient(sys.a, sys.c, opts.cg_tol, max_iter)


def solve_ddda(locals_: list, opts: SolverOptions | None = None):
    """Solve every uncoupled local system independently, one solve each.

    The right-hand sides carry no iteration index, so a single solve per
    subdomain is the entire scheme; repeating it cannot change anything.
    """
    opts = opts if opts is not None else SolverOptions()
    for sys in locals_:
        if sys.scheme != SCHEME_DDDA:
            raise InvalidArgument(
                f"subdomain {sys.subdomain} was assembled for scheme "
                f"{sys.scheme!r}, expected {SCHEME_DDDA!r}"
            )

    def solve_one(k: int) -> np.ndarray:
        sys = locals_[k]
        return _LocalKernel(sys, opts).solve(sys.c)

    return _map_ordered(solve_one, len(locals_), opts.threads)


def solve_mps(locals_: list, w0=None, opts: SolverOptions | None = None,
              cost_fn=None):
    """Run the parallel fixed-point sweep over the coupled local systems.

    w0 defaults to all zeros (analysis starts at the background).  cost_fn,
    when given, is called once per iteration with the fresh iterate list
    and its value lands in the history; otherwise the cost column is NaN.
    Returns (iterates, history); history.converged is False when the
    iteration budget ran out.
    """
    opts = opts if opts is not None else SolverOptions()
    if not locals_:
        raise InvalidArgument("need at least one local system")
    for sys in locals_:
        if sys.scheme != SCHEME_MPS:
            raise InvalidArgument(
                f"subdomain {sys.subdomain} was assembled for scheme "
                f"{sys.scheme!r}, expected {SCHEME_MPS!r}"
            )
    pos = _positions(locals_)
    for sys in locals_:
        for j, _ in sys.couplings:
            if j not in pos:
                raise MissingNeighbor(
                    f"subdomain {sys.subdomain} couples to {j}, which is "
                    "absent from the system list"
                )

    if w0 is None:
        ws = [np.zeros(sys.size) for sys in locals_]
    else:
        if len(w0) != len(locals_):
            raise DimensionMismatch(
                f"{len(w0)} start vectors for {len(locals_)} subdomains"
            )
        ws = []
        for sys, w in zip(locals_, w0):
            w = np.asarray(w, dtype=float)
            if w.shape != (sys.size,):
                raise DimensionMismatch(
                    f"start vector for subdomain {sys.subdomain} has shape "
                    f"{w.shape}, expected ({sys.size},)"
                )
            ws.append(w.copy())

    kernels = [_LocalKernel(sys, opts) for sys in locals_]
    kappa = 1.0 + max(
        float(np.max(np.sum(np.abs(sys.a), axis=1))) for sys in locals_
    )

    history = IterationHistory()
    for n in range(1, opts.max_iters + 1):

        def sweep(k: int) -> np.ndarray:
            sys = locals_[k]
            rhs = sys.c
            for j, a_ij in sys.couplings:
                rhs = rhs + a_ij @ ws[pos[j]]
            return kernels[k].solve(rhs)

        new_ws = _map_ordered(sweep, len(locals_), opts.threads)
        max_delta = max(
            float(np.max(np.abs(new - old))) if new.size else 0.0
            for new, old in zip(new_ws, ws)
        )
        residuals = fixed_point_residual(locals_, new_ws)
        cost = cost_fn(new_ws) if cost_fn is not None else math.nan
        history.append(
            IterationRecord(
                iteration=n,
                max_delta=max_delta,
                global_cost=float(cost),
                residual_norms=tuple(float(r) for r in residuals),
            )
        )
        ws = new_ws
        if max_delta <= opts.tol or float(np.max(residuals)) <= opts.tol * kappa:
            history.converged = True
            break

    return ws, history


def fixed_point_residual(locals_: list, ws) -> np.ndarray:
    """Per-subdomain sup-norm of a_i w_i - c_i - sum_j a_ij w_j.

    Zero exactly at a fixed point of the sweep.  Accepts uncoupled systems
    too, where it degenerates to the plain linear residual, and accepts
    iterates from either scheme, which is how the uncoupled solutions are
    measured against the coupled systems.
    """
    if len(ws) != len(locals_):
        raise DimensionMismatch(
            f"{len(ws)} iterates for {len(locals_)} subdomains"
        )
    pos = _positions(locals_)
    vecs = []
    for sys, w in zip(locals_, ws):
        w = np.asarray(w, dtype=float)
        if w.shape != (sys.size,):
            raise DimensionMismatch(
                f"iterate for subdomain {sys.subdomain} has shape {w.shape}, "
                f"expected ({sys.size},)"
            )
        vecs.append(w)
    out = []
    for sys, w in zip(locals_, vecs):
        r = sys.a @ w - sys.c
        for j, a_ij in sys.couplings:
            r = r - a_ij @ vecs[pos[j]]
        out.append(float(np.max(np.abs(r))) if r.size else 0.0)
    return np.asarray(out)
