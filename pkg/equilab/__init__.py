__version__ = "0.1.0"

from .field_poly import MvPolynomial, PolySystem, SystemKind, degree2_independent, evaluate, linear_combination, parse_polynomial
from .region import AxisBox, Complement, ConvexPolytope, EuclideanBall, FullTorus, Region, region_from_spec
from .dyadic import Anchor, AnchoredCube, DyadicCover, build_cover, choose_depth, cover_diagnostics, draw_anchor
from .expsum import exp_sum_cube, exp_sum_region, fk_ratio, max_exp_sum
from .discrepancy import Box, FractionalPointSet, discrepancy_of_system, extreme_discrepancy_exact, ks_bound
from .variety import SolutionSet, count_in_region, fouvry_cube_residual, lang_weil_residual, solve_system, theorem3_residual
from .config import ExperimentConfig, load_config, validate_config
from .engine import ExperimentRunner
from .baseline import check_baselines

__all__ = [
	"MvPolynomial",
	"PolySystem",
	"SystemKind",
	"parse_polynomial",
	"evaluate",
	"linear_combination",
	"degree2_independent",
	"Region",
	"FullTorus",
	"AxisBox",
	"EuclideanBall",
	"ConvexPolytope",
	"Complement",
	"region_from_spec",
	"Anchor",
	"AnchoredCube",
	"DyadicCover",
	"draw_anchor",
	"build_cover",
	"choose_depth",
	"cover_diagnostics",
	"exp_sum_cube",
	"exp_sum_region",
	"max_exp_sum",
	"fk_ratio",
	"FractionalPointSet",
	"Box",
	"extreme_discrepancy_exact",
	"ks_bound",
	"discrepancy_of_system",
	"SolutionSet",
	"solve_system",
	"count_in_region",
	"lang_weil_residual",
	"fouvry_cube_residual",
	"theorem3_residual",
	"ExperimentConfig",
	"validate_config",
	"load_config",
	"ExperimentRunner",
	"check_baselines",
]
