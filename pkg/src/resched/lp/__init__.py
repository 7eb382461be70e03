"""Factor-revealing LP: primal construction, closed-form dual, simplex and LP files."""

from .dual import (DUAL_FAMILIES, TIGHT_FAMILIES, DualReport, DualSolution, build_dual,
                   check_against_primal, check_identities, dual_objective, dual_vector,
                   objective_closed_form, verify_dual)
from .lpformat import LPParseError, ParsedLP, export_lp, lp_text, read_lp
from .primal import (FAMILIES, PrimalLP, PrimalReport, build_primal, build_primal_lp,
                     check_primal_point, point_from_partition)
from .simplex import SimplexResult, UnboundedError, simplex_max, solve_primal_exact

__all__ = [
    "DUAL_FAMILIES", "TIGHT_FAMILIES", "DualReport", "DualSolution", "build_dual",
    "check_against_primal", "check_identities", "dual_objective", "dual_vector",
    "objective_closed_form", "verify_dual", "LPParseError", "ParsedLP", "export_lp", "lp_text",
    "read_lp", "FAMILIES", "PrimalLP", "PrimalReport", "build_primal", "build_primal_lp",
    "check_primal_point", "point_from_partition", "SimplexResult", "UnboundedError",
    "simplex_max", "solve_primal_exact",
]
