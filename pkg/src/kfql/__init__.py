"""Kalman filter Q-learning with linear function approximation: KFQL
(full covariance), AKFQL (diagonal), a projected TD baseline, three
benchmark MDPs, and a reproducible experiment harness."""

from .core import (
    BasisVector,
    DiagonalCovariance,
    DimensionMismatchError,
    FullCovariance,
    NumericalCorruptionError,
    Observation,
    QEstimate,
    WeightBelief,
    dot,
    quadratic_form,
)
from .learners import (
    AKFQLLearner,
    DegenerateUpdateError,
    KFQLLearner,
    LearningRateSchedule,
    PTDLearner,
    SensorNoiseMethod,
    SuccessorSummary,
    kalman_gain_diag,
    kalman_gain_full,
    learning_rate,
    observe_diag,
    observe_full,
    predict,
    ptd_update,
    sample_target,
    sensor_noise,
)
from .basis import (
    CashierBasis,
    CashierBasisSpec,
    GridBasis,
    GridSpec,
    bilinear_features,
    carhill_grid,
    carhill_prior_mean,
    cartpole_grid,
    cashier_features,
)
from .envs import (
    CarHillEnv,
    CarHillParams,
    CarHillState,
    CartPoleEnv,
    CartPoleParams,
    CartPoleState,
    CashierEnv,
    CashierParams,
    EnvTransition,
    action_count,
    carhill_step,
    cartpole_step,
    cashier_step,
    random_routing,
)
from .harness import (
    GenerationConfig,
    LearningCurve,
    PolicySnapshot,
    RunAborted,
    boltzmann_select,
    evaluate,
    generate,
    greedy_select,
    run_experiment,
)

__version__ = "0.1.0"
