"""Linear-time-varying MPC for waypoint tracking with hard input constraints."""

from .controller import ControllerConfig, MpcController, state_references
from .model import INPUT_DIM, STATE_DIM, LtvModel, f_discrete, linearize, linearize_along, state_vector
from .qp import (CostWeights, InputBounds, MpcSolution, QpProblem, build_qp, direct_objective, dual_active_set,
                 kkt_residual, solve_qp)

__all__ = [
    "ControllerConfig", "CostWeights", "INPUT_DIM", "InputBounds", "LtvModel", "MpcController", "MpcSolution",
    "QpProblem", "STATE_DIM", "build_qp", "direct_objective", "dual_active_set", "f_discrete", "kkt_residual",
    "linearize", "linearize_along", "solve_qp", "state_references", "state_vector",
]
