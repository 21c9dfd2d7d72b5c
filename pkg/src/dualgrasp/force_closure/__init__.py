from .oracle import cone_directions, oracle_check
from .perturbation import WrenchSet, perturbation_eval
from .problem import (
    GRAVITY,
    LOSS_THRESHOLD,
    ConeProgram,
    ConeSolution,
    ExternalWrench,
    assemble,
    label,
    loss_of,
    solve,
    solve_many,
)
from .socp import SolverOptions, project_ball, project_contact_set, project_friction_cone, solve_batch

__all__ = [
    "GRAVITY",
    "LOSS_THRESHOLD",
    "ConeProgram",
    "ConeSolution",
    "ExternalWrench",
    "SolverOptions",
    "WrenchSet",
    "assemble",
    "cone_directions",
    "label",
    "loss_of",
    "oracle_check",
    "perturbation_eval",
    "project_ball",
    "project_contact_set",
    "project_friction_cone",
    "solve",
    "solve_batch",
    "solve_many",
]
