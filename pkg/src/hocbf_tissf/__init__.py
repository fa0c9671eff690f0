"""High-order CLF/CBF quadratic-program controllers with tunable input-to-state safety.

Closed-form pointwise controllers, a brute-force QP oracle for checking them,
and a simulation harness for the coupled pendulum/spring/cart benchmark.
"""

__version__ = "0.1.0"

from hocbf_tissf.barrier import BarrierSpec, ChainEval, affine_barrier, chain_set_margins, eval_chain, lower_bound_barrier
from hocbf_tissf.classk import ClassKKind, ClassKSpec
from hocbf_tissf.clf import ClfEval, LyapunovSpec, clf_set_margins, eval_clf_chain, tracking_clf
from hocbf_tissf.errors import ConfigError, DimensionError, DivergenceError, InfeasibleQP, UnsupportedOperation
from hocbf_tissf.oracle import TinyQP, solve_enumerate, verify_kkt
from hocbf_tissf.plant import PendulumParams, PlantModel, eval_dynamics, pendulum_spring_cart
from hocbf_tissf.solvers import (
    ConstraintRow,
    ControllerOutput,
    classify_region,
    minnorm_clf_cbf,
    safety_filter,
    tissf_filter,
    tissf_minnorm,
)
from hocbf_tissf.tissf import EpsilonForm, TissfParams, check_tunable_condition, epsilon_of, varrho_of

__all__ = [
    "BarrierSpec", "ChainEval", "affine_barrier", "chain_set_margins", "eval_chain", "lower_bound_barrier",
    "ClassKKind", "ClassKSpec",
    "ClfEval", "LyapunovSpec", "clf_set_margins", "eval_clf_chain", "tracking_clf",
    "ConfigError", "DimensionError", "DivergenceError", "InfeasibleQP", "UnsupportedOperation",
    "TinyQP", "solve_enumerate", "verify_kkt",
    "PendulumParams", "PlantModel", "eval_dynamics", "pendulum_spring_cart",
    "ConstraintRow", "ControllerOutput", "classify_region", "minnorm_clf_cbf", "safety_filter",
    "tissf_filter", "tissf_minnorm",
    "EpsilonForm", "TissfParams", "check_tunable_condition", "epsilon_of", "varrho_of",
]
