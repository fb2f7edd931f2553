"""Thin adapter around the conic engines.

All subproblems are cvxpy problems (linear objective over linear, SOC and
PSD constraints). This wrapper normalizes engine status reporting, times
the solve, retries on the fallback engine when the primary one fails or
reports an inaccurate solution, and audits primal residuals so accepted
solutions are known-feasible to tolerance.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np

DEFAULT_ENGINE = "CLARABEL"
FALLBACK_ENGINE = "SCS"

_STATUS_MAP = {
    cp.OPTIMAL: "optimal",
    cp.OPTIMAL_INACCURATE: "inaccurate",
    cp.INFEASIBLE: "infeasible",
    cp.INFEASIBLE_INACCURATE: "infeasible",
    cp.UNBOUNDED: "error",
    cp.UNBOUNDED_INACCURATE: "error",
}

RESIDUAL_TOL = 1e-6


@dataclass
class ConicSolution:
    """Normalized outcome of one conic solve."""

    status: str                      # optimal | inaccurate | infeasible | error
    objective: float = None
    solve_time: float = 0.0
    engine: str = ""
    message: str = ""
    max_residual: float = 0.0

    @property
    def ok(self):
        return self.status == "optimal"

    @property
    def usable(self):
        return self.status in ("optimal", "inaccurate")


def _engine_kwargs(engine):
    if engine == "SCS":
        return {"eps": 1e-7, "max_iters": 50000}
    return {}


def _try_engine(problem, engine):
    start = time.perf_counter()
    try:
        with warnings.catch_warnings():
            # the residual audit decides whether an inaccurate solution is
            # kept, so cvxpy's advisory warning is just noise here
            warnings.filterwarnings(
                "ignore", message="Solution may be inaccurate")
            warnings.filterwarnings(
                "ignore", message=r"Constraint #\d+ contains too many")
            problem.solve(solver=engine, **_engine_kwargs(engine))
        status = _STATUS_MAP.get(problem.status, "error")
        msg = "" if status != "error" else f"engine status {problem.status}"
    except (cp.SolverError, Exception) as exc:  # engine crashes surface as error
        status, msg = "error", f"{type(exc).__name__}: {exc}"
    return status, msg, time.perf_counter() - start


def audit_residuals(problem):
    """Largest primal constraint violation of the current variable values."""
    worst = 0.0
    for con in problem.constraints:
        v = con.violation()
        worst = max(worst, float(np.max(v)) if np.ndim(v) else float(v))
    return worst


def solve_conic(problem: cp.Problem, engine=DEFAULT_ENGINE,
                fallback=FALLBACK_ENGINE, audit=True) -> ConicSolution:
    """Solve with the primary engine, falling back once if it fails.

    A solution is downgraded to 'inaccurate' if the residual audit exceeds
    RESIDUAL_TOL even though the engine claimed optimality.
    """
    status, msg, elapsed = _try_engine(problem, engine)
    used = engine
    if status == "inaccurate" and audit:
        resid = audit_residuals(problem)
        if resid <= RESIDUAL_TOL:
            # feasible to tolerance; keep it rather than paying for a retry
            # (an engine switch also invalidates the cached compilation)
            return ConicSolution(status="inaccurate", engine=used,
                                 message=msg, solve_time=elapsed,
                                 objective=float(problem.value),
                                 max_residual=resid)
    if status in ("error", "inaccurate") and fallback and fallback != engine:
        status2, msg2, elapsed2 = _try_engine(problem, fallback)
        # keep the fallback result unless it is strictly worse
        if status2 == "optimal" or (status2 != "error" and status == "error"):
            status, msg, used = status2, msg2, fallback
        elapsed += elapsed2

    sol = ConicSolution(status=status, engine=used, message=msg,
                        solve_time=elapsed)
    if status in ("optimal", "inaccurate"):
        sol.objective = float(problem.value)
        if audit:
            sol.max_residual = audit_residuals(problem)
            if sol.max_residual > RESIDUAL_TOL and status == "optimal":
                sol.status = "inaccurate"
                sol.message = (f"residual {sol.max_residual:.2e} above "
                               f"{RESIDUAL_TOL:.0e}")
    return sol
