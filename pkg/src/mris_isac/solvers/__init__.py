"""Conic subproblem solvers: beamformer SDP, beam assignment, PDD phases."""

from .conic import ConicSolution, solve_conic  # noqa: F401
from .pdd import PddState, project_unit_modulus  # noqa: F401
