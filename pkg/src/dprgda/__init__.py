"""Differentially private recursive gradient descent-ascent for second-order
stationary points of nonconvex / strongly-concave minimax problems."""

from .core import (AlgoParams, BallProjection, MinimaxOracle, ParameterError, PrivacyBudget,
                   RandomSource, Unconstrained, project_y, sample_uniform_ball)
from .privacy import (InfeasibleBudgetError, NoiseScale, QueryClass, account, calibrate,
                      calibrate_noise, clip, gaussian_mechanism)
from .spider import EstimatorPair, InnerResult, IterateState, incremental_update, inner_loop, refresh
from .escape import RunOutcome, descent_step, enter_escape, escape_schedule, escape_step, run
from .problems import (MatrixSensing, QuadraticSaddle, generate_matrix_sensing, load_instance,
                       save_instance)
from .diagnostics import gradient_mapping, hvp, min_eigenvalue, sosp_check
from .baselines import dp_sgda, dp_spider_min
from .trajectory import Trajectory

__version__ = "0.1.0"
