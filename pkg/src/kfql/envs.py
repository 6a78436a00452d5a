"""The three benchmark MDPs.

Each environment is a seeded, deterministic-given-seed simulator: `step`
takes the current state and an action index, consumes randomness only
from the caller-supplied generator, and returns an EnvTransition. The
physics inner loops are numba-compiled.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit


@dataclass
class EnvTransition:
    action: int
    next_state: object
    reward: float
    terminal: bool


# ---------------------------------------------------------------------------
# cart-pole


@dataclass
class CartPoleState:
    x: float
    x_dot: float
    theta: float  # radians from vertical, unwrapped
    omega: float


@dataclass(frozen=True)
class CartPoleParams:
    m_c: float = 8.0
    m_p: float = 2.0
    l: float = 0.5  # half-length of the pole
    g: float = 9.81
    mu_c: float = 0.001  # cart-track friction
    mu_p: float = 0.002  # pole-joint friction
    control_dt: float = 0.1
    substep_dt: float = 0.01
    force_set: tuple = (-5.0, 0.0, 5.0)
    noise_halfwidth: float = 2.0
    fail_angle: float = math.pi / 2
    init_angle_halfwidth: float = 0.05
    gamma: float = 1.0

    def __post_init__(self):
        ratio = self.control_dt / self.substep_dt
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("substep_dt must divide control_dt")

    @property
    def substeps(self) -> int:
        return int(round(self.control_dt / self.substep_dt))


@njit(cache=True)
def _cartpole_integrate(x, x_dot, theta, omega, force, n_sub, dt,
                        m_c, m_p, l, g, mu_c, mu_p):
    """Semi-implicit Euler (velocities first) over n_sub substeps of the
    friction-corrected cart-pole dynamics. The normal force uses the
    previous substep's angular acceleration (one-pass iteration), assumed
    positive."""
    total_mass = m_c + m_p
    theta_dd_prev = 0.0
    for _ in range(n_sub):
        sin_t = math.sin(theta)
        cos_t = math.cos(theta)
        n_c = total_mass * g - m_p * l * (theta_dd_prev * sin_t
                                          + omega * omega * cos_t)
        sgn = 0.0
        prod = n_c * x_dot
        if prod > 0.0:
            sgn = 1.0
        elif prod < 0.0:
            sgn = -1.0
        num = (g * sin_t
               + cos_t * ((-force - m_p * l * omega * omega
                           * (sin_t + mu_c * sgn * cos_t)) / total_mass
                          + mu_c * g * sgn)
               - mu_p * omega / (m_p * l))
        den = l * (4.0 / 3.0 - (m_p * cos_t / total_mass)
                   * (cos_t - mu_c * sgn))
        theta_dd = num / den
        x_dd = (force + m_p * l * (omega * omega * sin_t - theta_dd * cos_t)
                - mu_c * n_c * sgn) / total_mass
        x_dot += dt * x_dd
        omega += dt * theta_dd
        x += dt * x_dot
        theta += dt * omega
        theta_dd_prev = theta_dd
    return x, x_dot, theta, omega


def cartpole_step(params: CartPoleParams, state: CartPoleState, action: int,
                  rng: np.random.Generator) -> EnvTransition:
    """Apply the chosen force plus one uniform disturbance, held constant
    over the control interval. Reward 1 unless the step terminates."""
    if not 0 <= action < len(params.force_set):
        raise ValueError(f"invalid action {action}")
    force = params.force_set[action]
    if params.noise_halfwidth > 0:
        force += rng.uniform(-params.noise_halfwidth, params.noise_halfwidth)
    x, x_dot, theta, omega = _cartpole_integrate(
        state.x, state.x_dot, state.theta, state.omega, force,
        params.substeps, params.substep_dt,
        params.m_c, params.m_p, params.l, params.g, params.mu_c, params.mu_p)
    nxt = CartPoleState(x, x_dot, theta, omega)
    terminal = abs(theta) > params.fail_angle
    return EnvTransition(action, nxt, 0.0 if terminal else 1.0, terminal)


class CartPoleEnv:
    metric = "steps"
    default_eval_horizon = 72000

    def __init__(self, params: CartPoleParams = CartPoleParams()):
        self.params = params
        self.action_count = len(params.force_set)
        self.gamma = params.gamma
        self.default_eval_gamma = params.gamma

    def initial_state(self, rng: np.random.Generator) -> CartPoleState:
        hw = self.params.init_angle_halfwidth
        theta = rng.uniform(-hw, hw) if hw > 0 else 0.0
        return CartPoleState(0.0, 0.0, theta, 0.0)

    def step(self, state, action, rng) -> EnvTransition:
        return cartpole_step(self.params, state, action, rng)

    def basis_coords(self, state) -> tuple:
        return state.theta, state.omega


# ---------------------------------------------------------------------------
# cashier's nightmare (Klimov's problem)


@dataclass(frozen=True)
class CashierParams:
    d: int = 100  # queues
    k: int = 200  # jobs
    cost_mode: str = "linear"  # "linear": g_i = i/d; "uniform": g_i = 1/d
    gamma: float = 0.99

    def __post_init__(self):
        if self.cost_mode not in ("linear", "uniform"):
            raise ValueError(f"unknown cost_mode {self.cost_mode!r}")

    def cost_vector(self) -> np.ndarray:
        if self.cost_mode == "uniform":
            return np.full(self.d, 1.0 / self.d)
        return np.arange(1, self.d + 1, dtype=np.float64) / self.d


def random_routing(d: int, rng: np.random.Generator) -> np.ndarray:
    """Row-stochastic matrix with rows uniform on the simplex
    (normalized Exponential(1) draws)."""
    rows = rng.exponential(1.0, size=(d, d))
    return rows / rows.sum(axis=1, keepdims=True)


def cashier_step(params: CashierParams, state: np.ndarray, action: int,
                 rng: np.random.Generator, routing_cum: np.ndarray,
                 cost: np.ndarray) -> EnvTransition:
    """Service one queue: move one job to a destination sampled from the
    serviced queue's routing row. Serving an empty queue is a no-op.
    Reward is -g'x at the pre-transition state; never terminal."""
    if not 0 <= action < params.d:
        raise ValueError(f"invalid queue index {action}")
    reward = -float(cost @ state)
    nxt = state.copy()
    if nxt[action] > 0:
        nxt[action] -= 1
        j = int(np.searchsorted(routing_cum[action], rng.random(), side="right"))
        if j >= params.d:
            j = params.d - 1
        nxt[j] += 1
    return EnvTransition(action, nxt, reward, False)


class CashierEnv:
    metric = "mean_cost"
    default_eval_horizon = 1000

    def __init__(self, routing: np.ndarray, params: CashierParams = CashierParams()):
        routing = np.asarray(routing, dtype=np.float64)
        if routing.shape != (params.d, params.d):
            raise ValueError("routing matrix shape mismatch")
        self.params = params
        self.routing = routing
        self._routing_cum = np.cumsum(routing, axis=1)
        self.cost = params.cost_vector()
        self.action_count = params.d
        self.gamma = params.gamma
        self.default_eval_gamma = 1.0

    def initial_state(self, rng: np.random.Generator) -> np.ndarray:
        x = np.zeros(self.params.d, dtype=np.int64)
        queues = rng.integers(0, self.params.d, size=self.params.k)
        np.add.at(x, queues, 1)
        return x

    def step(self, state, action, rng) -> EnvTransition:
        return cashier_step(self.params, state, action, rng,
                            self._routing_cum, self.cost)


# ---------------------------------------------------------------------------
# car-hill


@dataclass
class CarHillState:
    p: float
    v: float


@dataclass(frozen=True)
class CarHillParams:
    m: float = 1.0
    g: float = 9.81
    control_dt: float = 0.1
    euler_dt: float = 0.001
    force_set: tuple = (-4.0, 4.0)
    gamma: float = 0.999
    start_p: float = -0.5
    start_v: float = 0.0

    def __post_init__(self):
        ratio = self.control_dt / self.euler_dt
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("euler_dt must divide control_dt")

    @property
    def substeps(self) -> int:
        return int(round(self.control_dt / self.euler_dt))


@njit(cache=True)
def _hill_slope_curvature(p):
    if p < 0.0:
        return 2.0 * p + 1.0, 2.0
    q = 1.0 + 5.0 * p * p
    return q ** -1.5, -15.0 * p * q ** -2.5


@njit(cache=True)
def _carhill_integrate(p, v, force, n_sub, dt, m, g):
    for _ in range(n_sub):
        hp, hpp = _hill_slope_curvature(p)
        denom = 1.0 + hp * hp
        accel = force / (m * denom) - g * hp / denom - v * v * hp * hpp / denom
        p += dt * v
        v += dt * accel
    return p, v


def carhill_reward(p: float, v: float) -> float:
    if p < -1.0 or abs(v) > 3.0:
        return -1.0
    if p > 1.0:  # and |v| <= 3 given the branch above
        return 1.0
    return 0.0


def carhill_step(params: CarHillParams, state: CarHillState,
                 action: int) -> EnvTransition:
    """Deterministic Euler integration over one control interval; reward
    evaluated on the post-integration state, terminal iff reward != 0."""
    if not 0 <= action < len(params.force_set):
        raise ValueError(f"invalid action {action}")
    p, v = _carhill_integrate(state.p, state.v, params.force_set[action],
                              params.substeps, params.euler_dt,
                              params.m, params.g)
    reward = carhill_reward(p, v)
    return EnvTransition(action, CarHillState(p, v), reward, reward != 0.0)


class CarHillEnv:
    metric = "discounted_return"
    default_eval_horizon = 1000

    def __init__(self, params: CarHillParams = CarHillParams()):
        self.params = params
        self.action_count = len(params.force_set)
        self.gamma = params.gamma
        self.default_eval_gamma = params.gamma

    def initial_state(self, rng: np.random.Generator) -> CarHillState:
        return CarHillState(self.params.start_p, self.params.start_v)

    def step(self, state, action, rng) -> EnvTransition:
        return carhill_step(self.params, state, action)

    def basis_coords(self, state) -> tuple:
        return state.p, state.v


def action_count(kind: str) -> int:
    counts = {"cartpole": 3, "cashier": 100, "carhill": 2}
    if kind not in counts:
        raise ValueError(f"unknown environment kind {kind!r}")
    return counts[kind]
