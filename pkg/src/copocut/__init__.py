"""Copositive cutting planes and Benders decomposition for block QCQPs."""
from .model import (INF, BlockFeasibleSet, BlockQcqpInstance, CutPool, EnvelopeCertificate,
                    LiftedProgram, QuadraticCertificate, QuadraticForm, check_membership,
                    eval_phi_block)
from .oracle import brute_force_min, check_set_copositivity, solve_global
from .envelope import (EnvelopeSolver, evaluate_envelope, find_improving_ray,
                       search_convex_quadratic, solve_quadratic_dual)
from .benders import BendersConfig, audit_cuts, run_benders
from .instances import GeneratorConfig, fixture, generate_instance

__version__ = "0.1.0"

__all__ = [
    "INF", "BlockFeasibleSet", "BlockQcqpInstance", "CutPool", "EnvelopeCertificate",
    "LiftedProgram", "QuadraticCertificate", "QuadraticForm", "check_membership",
    "eval_phi_block", "brute_force_min", "check_set_copositivity", "solve_global",
    "EnvelopeSolver", "evaluate_envelope", "find_improving_ray", "search_convex_quadratic",
    "solve_quadratic_dual", "BendersConfig", "audit_cuts", "run_benders", "GeneratorConfig",
    "fixture", "generate_instance",
]
