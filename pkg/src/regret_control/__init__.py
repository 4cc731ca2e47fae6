"""Regret-optimal full-information control for discrete-time LTI plants."""

from .analysis import close_loop, oracle_regret, sweep, toeplitz_truncate, verify_model
from .errors import RegretControlError
from .linalg import riccati_doubling, solve_dare, solve_dlyap
from .lti import LtiRealization
from .plant import PlantModel, random_plant
from .simulate import DisturbanceSpec, batch_average, gen_disturbance, run_closed_loop
from .synthesis import (h2_controller, hinf_synthesize, lqr_synthesize, nehari_controller,
                        nehari_solve, regret_synthesize)

__version__ = "0.1.0"

__all__ = [
    "DisturbanceSpec", "LtiRealization", "PlantModel", "RegretControlError",
    "batch_average", "close_loop", "gen_disturbance", "h2_controller", "hinf_synthesize",
    "lqr_synthesize", "nehari_controller", "nehari_solve", "oracle_regret", "random_plant",
    "regret_synthesize", "riccati_doubling", "run_closed_loop", "solve_dare", "solve_dlyap",
    "sweep", "toeplitz_truncate", "verify_model",
]
