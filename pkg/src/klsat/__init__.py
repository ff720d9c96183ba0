"""Random sparse linear constraint satisfaction: generation, LP solving,
local heuristics and the b-matching relaxation."""

from .config import __version__
from .instance import Instance, generate_instance, neighborhood
from .lp import Solution, solve_glp
from .pool import Pool, WeightDistSpec, check_condition_a, check_condition_b, standard_pool

__all__ = [
    "Instance", "Pool", "Solution", "WeightDistSpec", "__version__", "check_condition_a",
    "check_condition_b", "generate_instance", "neighborhood", "standard_pool", "solve_glp",
]
