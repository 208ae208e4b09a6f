"""Shared builders for the test suite plus acceptance reporting.

Acceptance tests register one line per criterion through
record_acceptance; a terminal-summary hook prints the collected lines
after the run so the verdict is visible even with captured output.
"""

import numpy as np

from ddvar import (
    Grid1D,
    ProblemInstance,
    build_gaussian_covariance,
    decompose_uniform,
    identity_covariance,
    point_observations,
    synthesize,
)


def make_instance(n=30, j_sub=2, halo=1, nobs=None, seed=0, kind="gaussian",
                  length_scale=2.0, sigma_b=1.0, sigma_o=0.1):
    """Seeded random instance plus a matching decomposition."""
    grid = Grid1D.uniform(n)
    if kind == "identity":
        cov = identity_covariance(grid)
    else:
        cov = build_gaussian_covariance(grid, length_scale, sigma_b)
    if nobs is None:
        nobs = max(1, n // 5)
    inst = synthesize(grid, cov, nobs, sigma_o, seed)
    dec = decompose_uniform(grid, j_sub, halo)
    return inst, dec


def mirror_symmetric_instance():
    """Two-subdomain instance invariant under the reflection p -> 39 - p.

    Background, observation placement, and innovation values are all
    symmetric, and every observation sits at the extreme ends of the
    domain, far from the seam, so each subdomain's increment has decayed
    to nothing by the time it reaches the interface.  That makes the
    uncoupled solutions agree on the interfaces to well below 1e-10 and
    turns them into a fixed point of the coupled sweep.
    """
    n = 40
    grid = Grid1D.uniform(n)
    cov = build_gaussian_covariance(grid, 2.0, 1.0)
    t = grid.coords - (n - 1) / 2.0
    u_background = np.exp(-((t / 10.0) ** 2))
    obs_idx = np.array([0, 1, 2, 3, 36, 37, 38, 39])
    offsets = np.array([0.5, -0.3, 0.2, 0.1, 0.1, 0.2, -0.3, 0.5])
    values = u_background[obs_idx] + offsets
    obs = point_observations(grid, obs_idx, values, np.full(8, 0.01))
    inst = ProblemInstance(
        grid=grid, cov=cov, obs=obs, u_background=u_background
    )
    return inst, decompose_uniform(grid, 2, 2)


_ACCEPTANCE_LINES = []


def record_acceptance(number, title, ok, detail=""):
    tag = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    line = f"[acceptance {number:02d}] {tag} {title}{suffix}"
    _ACCEPTANCE_LINES.append((number, line))
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for _, line in sorted(_ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
