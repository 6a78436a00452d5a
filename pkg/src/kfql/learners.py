"""The three weight learners.

KFQL: Kalman observation updates on a full covariance (O(n^2) per step).
AKFQL: the same update restricted to the covariance diagonal (O(n)).
PTD: projected TD / Q-learning at a decaying global learning rate.

Pure functional forms are provided for each update; the *Learner classes
wrap them with in-place state for the generation loop.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    BasisVector,
    DiagonalCovariance,
    DimensionMismatchError,
    FullCovariance,
    Observation,
    QEstimate,
    WeightBelief,
    _clamp_variance,
    dot,
    quadratic_form,
)

NOISE_VARIANTS = ("policy", "average", "max", "boltzmann")


class DegenerateUpdateError(ArithmeticError):
    """Total observation variance (phi' Sigma phi + eps) is not positive."""


@dataclass(frozen=True)
class SensorNoiseMethod:
    """Heuristic for the observation variance: a constant floor epsilon0
    plus a gamma^2-scaled mix of the successor actions' Q-variances."""

    variant: str = "max"
    epsilon0: float = 0.0
    tau: float = 1.0  # boltzmann only

    def __post_init__(self):
        if self.variant not in NOISE_VARIANTS:
            raise ValueError(f"unknown sensor-noise variant {self.variant!r}")
        if self.epsilon0 < 0:
            raise ValueError("epsilon0 must be >= 0")
        if self.variant == "boltzmann" and not self.tau > 0:
            raise ValueError("boltzmann temperature must be > 0")


@dataclass(frozen=True)
class LearningRateSchedule:
    """alpha(t) = s * c / (c + t), decaying from s toward zero."""

    s: float
    c: float

    def __post_init__(self):
        if not (self.s > 0 and self.c > 0):
            raise ValueError("schedule parameters must be > 0")


def learning_rate(schedule: LearningRateSchedule, t: int) -> float:
    if t < 0:
        raise ValueError("step counter must be >= 0")
    return schedule.s * schedule.c / (schedule.c + t)


@dataclass
class SuccessorSummary:
    """What one transition tells us about the successor state: predicted
    Q mean and variance for every available action there."""

    q_means: np.ndarray
    q_vars: np.ndarray
    reward: float
    terminal: bool
    gamma: float

    def __post_init__(self):
        self.q_means = np.asarray(self.q_means, dtype=np.float64)
        self.q_vars = np.asarray(self.q_vars, dtype=np.float64)
        if self.terminal:
            if self.q_means.size:
                raise ValueError("terminal summary must have no actions")
        elif self.q_means.size < 1:
            raise ValueError("non-terminal summary needs >= 1 action")
        if self.q_means.shape != self.q_vars.shape:
            raise DimensionMismatchError("q_means/q_vars shape mismatch")


def sample_target(summary: SuccessorSummary) -> float:
    """One-step Q-learning target: reward plus discounted best successor
    mean; just the reward when the successor is terminal."""
    if summary.terminal:
        return float(summary.reward)
    return float(summary.reward + summary.gamma * summary.q_means.max())


def _boltzmann_weights(q_means: np.ndarray, tau: float) -> np.ndarray:
    # max-shifted exponents: q/tau can overflow for small tau
    z = q_means / tau
    z = z - z.max()
    w = np.exp(z)
    return w / w.sum()


def sensor_noise(method: SensorNoiseMethod, summary: SuccessorSummary) -> float:
    """Observation variance for the sample target under the chosen heuristic."""
    if summary.terminal:
        return method.epsilon0
    g2 = summary.gamma * summary.gamma
    v = summary.q_vars
    if method.variant == "policy":
        term = v[int(np.argmax(summary.q_means))]
    elif method.variant == "average":
        term = v.mean()
    elif method.variant == "max":
        term = v.max()
    else:
        term = float(_boltzmann_weights(summary.q_means, method.tau) @ v)
    return float(method.epsilon0 + g2 * term)


def predict(belief: WeightBelief, phi: BasisVector) -> QEstimate:
    return QEstimate(dot(phi, belief.mean), quadratic_form(phi, belief.covariance))


# ---------------------------------------------------------------------------
# full-covariance update


def kalman_gain_full(belief: WeightBelief, phi: BasisVector, eps: float) -> np.ndarray:
    cov = belief.covariance
    if not isinstance(cov, FullCovariance):
        raise TypeError("kalman_gain_full needs a full covariance")
    quad = quadratic_form(phi, cov)
    total = quad + eps
    if total <= 0:
        raise DegenerateUpdateError(
            f"total observation variance {total} <= 0; use epsilon0 > 0"
        )
    sigma_phi = cov.matrix[:, phi.indices] @ phi.values
    return sigma_phi / total


def observe_full(belief: WeightBelief, obs: Observation) -> WeightBelief:
    """Kalman observation update: returns the posterior belief.

    The covariance is re-symmetrized after the rank-one update to keep
    round-off drift bounded.
    """
    out = belief.copy()
    _observe_full_inplace(out.mean, out.covariance.matrix,
                          obs.phi.indices, obs.phi.values, obs.value, obs.noise)
    return out


def _observe_full_inplace(mean, cov, idx, val, nu, eps):
    sigma_phi = cov[:, idx] @ val
    quad = _clamp_variance(float(val @ sigma_phi[idx]))
    total = quad + eps
    if total <= 0:
        raise DegenerateUpdateError(
            f"total observation variance {total} <= 0; use epsilon0 > 0"
        )
    gain = sigma_phi / total
    innovation = nu - float(mean[idx] @ val)  # prior mean
    mean += gain * innovation
    cov -= np.outer(gain, sigma_phi)
    np.copyto(cov, (cov + cov.T) * 0.5)
    return gain


# ---------------------------------------------------------------------------
# diagonal update


def kalman_gain_diag(belief: WeightBelief, phi: BasisVector, eps: float) -> np.ndarray:
    cov = belief.covariance
    if not isinstance(cov, DiagonalCovariance):
        raise TypeError("kalman_gain_diag needs a diagonal covariance")
    d = quadratic_form(phi, cov) + eps
    if d <= 0:
        raise DegenerateUpdateError(
            f"total observation variance {d} <= 0; use epsilon0 > 0"
        )
    gain = np.zeros(belief.n)
    gain[phi.indices] = cov.variances[phi.indices] * phi.values / d
    return gain


def observe_diag(belief: WeightBelief, obs: Observation) -> WeightBelief:
    out = belief.copy()
    _observe_diag_inplace(out.mean, out.covariance.variances,
                          obs.phi.indices, obs.phi.values, obs.value, obs.noise)
    return out


def _observe_diag_inplace(mean, var, idx, val, nu, eps):
    vsub = var[idx]
    d = float((val * val) @ vsub) + eps
    if d <= 0:
        raise DegenerateUpdateError(
            f"total observation variance {d} <= 0; use epsilon0 > 0"
        )
    gain = vsub * val / d
    innovation = nu - float(mean[idx] @ val)
    mean[idx] += gain * innovation
    var[idx] = np.maximum(vsub * (1.0 - gain * val), 0.0)
    return gain


# ---------------------------------------------------------------------------
# projected TD


def ptd_update(weights: np.ndarray, schedule: LearningRateSchedule, t: int,
               phi: BasisVector, target: float) -> np.ndarray:
    """One gradient-style step toward the sample target; returns new weights."""
    out = np.array(weights, dtype=np.float64, copy=True)
    if out.shape != (phi.n,):
        raise DimensionMismatchError("weight length mismatch")
    alpha = learning_rate(schedule, t)
    residual = target - float(out[phi.indices] @ phi.values)
    out[phi.indices] += alpha * phi.values * residual
    return out


# ---------------------------------------------------------------------------
# stateful wrappers used by the generation loop


class KFQLLearner:
    kind = "KFQL"
    tracks_variance = True

    def __init__(self, prior_mean: np.ndarray, prior_variance,
                 noise: SensorNoiseMethod):
        self.mean = np.array(prior_mean, dtype=np.float64, copy=True)
        n = self.mean.size
        pv = np.asarray(prior_variance, dtype=np.float64)
        self.cov = np.diag(np.broadcast_to(pv, (n,)).copy())
        self.noise = noise
        self.n = n

    def q_mean(self, phi: BasisVector) -> float:
        return float(self.mean[phi.indices] @ phi.values)

    def q_var(self, phi: BasisVector) -> float:
        idx = phi.indices
        sub = self.cov[np.ix_(idx, idx)]
        return _clamp_variance(float(phi.values @ sub @ phi.values))

    def update(self, phi: BasisVector, summary: SuccessorSummary) -> None:
        nu = sample_target(summary)
        eps = sensor_noise(self.noise, summary)
        _observe_full_inplace(self.mean, self.cov, phi.indices, phi.values, nu, eps)

    def weights(self) -> np.ndarray:
        return self.mean.copy()

    def state_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.mean)) and np.all(np.isfinite(self.cov)))


class AKFQLLearner:
    kind = "AKFQL"
    tracks_variance = True

    def __init__(self, prior_mean: np.ndarray, prior_variance,
                 noise: SensorNoiseMethod):
        self.mean = np.array(prior_mean, dtype=np.float64, copy=True)
        n = self.mean.size
        pv = np.asarray(prior_variance, dtype=np.float64)
        self.var = np.broadcast_to(pv, (n,)).astype(np.float64).copy()
        self.noise = noise
        self.n = n

    def q_mean(self, phi: BasisVector) -> float:
        return float(self.mean[phi.indices] @ phi.values)

    def q_var(self, phi: BasisVector) -> float:
        v = phi.values
        return float((v * v) @ self.var[phi.indices])

    def update(self, phi: BasisVector, summary: SuccessorSummary) -> None:
        nu = sample_target(summary)
        eps = sensor_noise(self.noise, summary)
        _observe_diag_inplace(self.mean, self.var, phi.indices, phi.values, nu, eps)

    def weights(self) -> np.ndarray:
        return self.mean.copy()

    def state_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.mean)) and np.all(np.isfinite(self.var)))


class PTDLearner:
    kind = "PTD"
    tracks_variance = False

    def __init__(self, prior_mean: np.ndarray, schedule: LearningRateSchedule):
        self.mean = np.array(prior_mean, dtype=np.float64, copy=True)
        self.schedule = schedule
        self.t = 0  # counts update calls across the whole generation run
        self.n = self.mean.size

    def q_mean(self, phi: BasisVector) -> float:
        return float(self.mean[phi.indices] @ phi.values)

    def q_var(self, phi: BasisVector) -> float:
        return 0.0

    def update(self, phi: BasisVector, summary: SuccessorSummary) -> None:
        target = sample_target(summary)
        alpha = learning_rate(self.schedule, self.t)
        idx, val = phi.indices, phi.values
        residual = target - float(self.mean[idx] @ val)
        self.mean[idx] += alpha * val * residual
        self.t += 1

    def weights(self) -> np.ndarray:
        return self.mean.copy()

    def state_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.mean)))


Learner = KFQLLearner | AKFQLLearner | PTDLearner
