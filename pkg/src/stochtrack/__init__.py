"""Classical and stochastic homotopy path tracking."""

from .errors import (
    NewtonDiverged,
    NonFiniteValue,
    SingularJacobian,
    SingularMatrix,
    StepFailed,
    TrackingError,
)
from .linalg import finite_diff_jacobian, lu_solve, norm2, norm_inf
from .problems import get_problem, make_example1, make_example2, make_example3, make_toy
from .stochastic import reanchor, step_stochastic, track_stochastic
from .system import ParametricSystem, PerturbationMask, PerturbedSystem, perturb, sample_mask
from .tracker import (
    PathPoint,
    Status,
    TrackerConfig,
    TrackReport,
    euler_predict,
    newton_correct,
    track_traditional,
)

__version__ = "0.1.0"
