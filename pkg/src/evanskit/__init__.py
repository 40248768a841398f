"""Evans function computation by centered exterior products, polar coordinates and conjugation."""

__version__ = "0.1.0"

from .errors import (BudgetError, ConfigError, DegeneracyError, DimensionError, EvansError, HomotopyError,
                     NearZeroError, NumericalError, SingularityError, SplitError, StepSizeError, StiefelWarning,
                     SubspaceError)
from .evans import (EvansEvaluator, EvansSample, WindingResult, evans_from_conjugators, evans_from_exterior,
                    evans_from_polar, sample_contour, winding_number, winding_of_function)
from .kato import Contour, PolarState, init_exterior, init_polar, kato_path, loop_closure_error
from .problems import (EvansSystem, ScalarTestbed, build_problem, burgers_shock, constant_coefficient,
                       convected_heat, exp_perturbed, sech_potential)
from .shooting import MeshSpec, shoot_exterior, shoot_polar, stiefel_error

__all__ = [
    "BudgetError", "ConfigError", "DegeneracyError", "DimensionError", "EvansError", "HomotopyError",
    "NearZeroError", "NumericalError", "SingularityError", "SplitError", "StepSizeError", "StiefelWarning",
    "SubspaceError", "EvansEvaluator", "EvansSample", "WindingResult", "evans_from_conjugators",
    "evans_from_exterior", "evans_from_polar", "sample_contour", "winding_number", "winding_of_function",
    "Contour", "PolarState", "init_exterior", "init_polar", "kato_path", "loop_closure_error", "EvansSystem",
    "ScalarTestbed", "build_problem", "burgers_shock", "constant_coefficient", "convected_heat",
    "exp_perturbed", "sech_potential", "MeshSpec", "shoot_exterior", "shoot_polar", "stiefel_error",
]
