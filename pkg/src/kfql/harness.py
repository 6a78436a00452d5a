"""Policy generation, evaluation, and multi-run aggregation.

The generation loop follows the off-line protocol: explore with Boltzmann
action selection, update the learner once per visited state, snapshot the
weight mean at configured visit counts, and grade each snapshot's greedy
policy from fresh initial states.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import NumericalCorruptionError
from .learners import (
    AKFQLLearner,
    DegenerateUpdateError,
    KFQLLearner,
    LearningRateSchedule,
    PTDLearner,
    SensorNoiseMethod,
    SuccessorSummary,
)

LEARNER_KINDS = ("KFQL", "AKFQL", "PTD")

# weight-explosion guard: any predicted |Q| beyond this aborts the run
ABORT_Q_MAGNITUDE = 1e12
FINITE_CHECK_INTERVAL = 1000


class RunAborted(RuntimeError):
    def __init__(self, visited: int, reason: str):
        super().__init__(f"run aborted after {visited} visited states: {reason}")
        self.visited = visited
        self.reason = reason


@dataclass
class GenerationConfig:
    learner: str  # KFQL | AKFQL | PTD
    noise: SensorNoiseMethod = SensorNoiseMethod()
    prior_mean: float | np.ndarray = 0.0
    prior_variance: float | np.ndarray = 1.0
    schedule: Optional[LearningRateSchedule] = None  # PTD only
    tau_act: float = 2.0
    gamma: float = 1.0
    budget: int = 100_000
    snapshot_points: Optional[tuple] = None  # default: geometric grid

    def __post_init__(self):
        if self.learner not in LEARNER_KINDS:
            raise ValueError(f"unknown learner kind {self.learner!r}")
        if self.learner == "PTD" and self.schedule is None:
            raise ValueError("PTD requires a learning-rate schedule")
        if not self.tau_act > 0:
            raise ValueError("tau_act must be > 0")
        if self.budget < 0:
            raise ValueError("budget must be >= 0")
        if np.any(np.asarray(self.prior_variance) < 0):
            raise ValueError("prior variance must be >= 0")
        if self.snapshot_points is not None:
            pts = tuple(int(p) for p in self.snapshot_points)
            if any(p > self.budget for p in pts) or sorted(pts) != list(pts):
                raise ValueError("snapshot points must be sorted and <= budget")
            self.snapshot_points = pts

    def resolved_snapshots(self) -> tuple:
        if self.snapshot_points is not None:
            return self.snapshot_points
        return default_snapshot_points(self.budget)

    @property
    def method_name(self) -> str:
        return self.noise.variant if self.learner != "PTD" else "none"


def default_snapshot_points(budget: int, per_decade: int = 10) -> tuple:
    """Geometric grid (per_decade points per decade) over the last two
    decades of the budget, always ending at the budget itself."""
    if budget <= 0:
        return (0,)
    lo = max(1, budget // 100)
    pts = {budget}
    k = math.ceil(per_decade * math.log10(lo))
    while True:
        p = int(round(10 ** (k / per_decade)))
        if p > budget:
            break
        if p >= lo:
            pts.add(p)
        k += 1
    return tuple(sorted(pts))


@dataclass
class PolicySnapshot:
    visited_states: int
    weights: np.ndarray


@dataclass
class CurveRow:
    visited_states: int
    values: list  # one per completed run
    mean: float
    stderr: float


@dataclass
class LearningCurve:
    learner: str
    method: str
    rows: list
    runs: int
    aborted_runs: int
    abort_reasons: list = field(default_factory=list)


def boltzmann_select(q_means, tau: float, rng: np.random.Generator) -> int:
    """Sample an action with probability proportional to exp(q/tau)."""
    q = np.asarray(q_means, dtype=np.float64)
    z = q / tau
    z -= z.max()
    cum = np.cumsum(np.exp(z))
    pick = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
    return min(pick, q.size - 1)


def greedy_select(q_means) -> int:
    """Argmax with ties broken by lowest index."""
    return int(np.argmax(q_means))


def make_learner(config: GenerationConfig, n: int):
    prior = np.broadcast_to(np.asarray(config.prior_mean, dtype=np.float64),
                            (n,)).copy()
    if config.learner == "KFQL":
        return KFQLLearner(prior, config.prior_variance, config.noise)
    if config.learner == "AKFQL":
        return AKFQLLearner(prior, config.prior_variance, config.noise)
    return PTDLearner(prior, config.schedule)


def generation_seed(master_seed: int, run_index: int) -> np.random.SeedSequence:
    """Seed for a run's generation stream; depends only on the master seed
    and run index so learner/noise-method variants are paired."""
    return np.random.SeedSequence((master_seed, run_index, 0))


def evaluation_seed(master_seed: int, run_index: int,
                    snapshot_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence((master_seed, run_index, 1, snapshot_index))


def routing_seed(master_seed: int) -> np.random.SeedSequence:
    """Cashier routing-matrix stream: shared by every run of an experiment."""
    return np.random.SeedSequence((master_seed, 1000003))


def _successor_summary(learner, basis, transition, gamma) -> SuccessorSummary:
    if transition.terminal:
        return SuccessorSummary(np.empty(0), np.empty(0),
                                transition.reward, True, gamma)
    phis = basis.feature_matrix(transition.next_state)
    q_means = np.array([learner.q_mean(p) for p in phis])
    if learner.tracks_variance:
        q_vars = np.array([learner.q_var(p) for p in phis])
    else:
        q_vars = np.zeros(q_means.size)
    return SuccessorSummary(q_means, q_vars, transition.reward, False, gamma)


def generate(config: GenerationConfig, env, basis,
             rng: np.random.Generator) -> list[PolicySnapshot]:
    """Run the generation loop for config.budget visited states, returning
    one snapshot of the weight mean per configured visit count.

    Raises RunAborted when the weights go non-finite or a predicted Q
    exceeds the explosion guard (the numerical-instability signal)."""
    learner = make_learner(config, basis.n)
    points = config.resolved_snapshots()
    snapshots = []
    next_point = 0
    if points and points[0] == 0:
        snapshots.append(PolicySnapshot(0, learner.weights()))
        next_point = 1
    state = env.initial_state(rng)
    visited = 0
    tau = config.tau_act
    while visited < config.budget:
        phis = basis.feature_matrix(state)
        q = np.array([learner.q_mean(p) for p in phis])
        if not np.all(np.isfinite(q)) or np.abs(q).max() > ABORT_Q_MAGNITUDE:
            raise RunAborted(visited, "predicted Q out of range")
        action = boltzmann_select(q, tau, rng)
        transition = env.step(state, action, rng)
        summary = _successor_summary(learner, basis, transition, config.gamma)
        try:
            learner.update(phis[action], summary)
        except (DegenerateUpdateError, NumericalCorruptionError) as exc:
            raise RunAborted(visited, str(exc)) from exc
        visited += 1
        if visited % FINITE_CHECK_INTERVAL == 0 and not learner.state_finite():
            raise RunAborted(visited, "non-finite learner state")
        if next_point < len(points) and visited == points[next_point]:
            if not learner.state_finite():
                raise RunAborted(visited, "non-finite learner state")
            snapshots.append(PolicySnapshot(visited, learner.weights()))
            next_point += 1
        if transition.terminal:
            state = env.initial_state(rng)
        else:
            state = transition.next_state
    return snapshots


def _greedy_action(weights: np.ndarray, basis, state) -> int:
    best_a = 0
    best_q = -math.inf
    for a, phi in enumerate(basis.feature_matrix(state)):
        q = float(weights[phi.indices] @ phi.values)
        if q > best_q:
            best_q = q
            best_a = a
    return best_a


def evaluate(snapshot: PolicySnapshot, env, basis, trials: int, horizon: int,
             gamma_eval: float, rng: np.random.Generator) -> list[float]:
    """Grade the snapshot's greedy policy over fresh trials.

    Metric by environment: steps survived (cart-pole), discounted return
    (car-hill), or mean per-step cost g'x, lower is better (cashier)."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    weights = snapshot.weights
    results = []
    for _ in range(trials):
        state = env.initial_state(rng)
        if env.metric == "steps":
            steps = 0
            while steps < horizon:
                tr = env.step(state, _greedy_action(weights, basis, state), rng)
                if tr.terminal:
                    break
                steps += 1
                state = tr.next_state
            results.append(float(steps))
        elif env.metric == "discounted_return":
            total = 0.0
            for t in range(horizon):
                tr = env.step(state, _greedy_action(weights, basis, state), rng)
                total += (gamma_eval ** t) * tr.reward
                if tr.terminal:
                    break
                state = tr.next_state
            results.append(total)
        elif env.metric == "mean_cost":
            cost = 0.0
            for _t in range(horizon):
                tr = env.step(state, _greedy_action(weights, basis, state), rng)
                cost += -tr.reward
                state = tr.next_state
            results.append(cost / horizon)
        else:
            raise ValueError(f"unknown metric {env.metric!r}")
    return results


def run_one(config: GenerationConfig, env, basis, run_index: int,
            master_seed: int, trials: int, horizon: int, gamma_eval: float):
    """Generate + evaluate a single seeded run. Returns
    (run_index, {visited: mean performance}) or (run_index, RunAborted)."""
    gen_rng = np.random.default_rng(generation_seed(master_seed, run_index))
    try:
        snapshots = generate(config, env, basis, gen_rng)
    except RunAborted as aborted:
        return run_index, aborted
    row = {}
    for snap_idx, snap in enumerate(snapshots):
        eval_rng = np.random.default_rng(
            evaluation_seed(master_seed, run_index, snap_idx))
        perf = evaluate(snap, env, basis, trials, horizon, gamma_eval, eval_rng)
        row[snap.visited_states] = float(np.mean(perf))
    return run_index, row


def run_experiment(env, basis, configs: list[GenerationConfig], runs: int,
                   trials: int, master_seed: int, eval_horizon: int = None,
                   eval_gamma: float = None, threads: int = 1) -> list[LearningCurve]:
    """Execute `runs` seeded generate+evaluate pipelines per learner config
    and aggregate into one learning curve each. Aborted runs are excluded
    from the curve and counted."""
    if runs < 1:
        raise ValueError("runs must be >= 1")
    horizon = eval_horizon if eval_horizon is not None else env.default_eval_horizon
    gamma_eval = eval_gamma if eval_gamma is not None else env.default_eval_gamma
    curves = []
    for config in configs:
        tasks = [(config, env, basis, r, master_seed, trials, horizon, gamma_eval)
                 for r in range(runs)]
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                outcomes = list(pool.map(lambda args: run_one(*args), tasks))
        else:
            outcomes = [run_one(*args) for args in tasks]
        outcomes.sort(key=lambda pair: pair[0])
        completed = {}
        aborts = []
        for run_index, result in outcomes:
            if isinstance(result, RunAborted):
                aborts.append((run_index, result.visited, result.reason))
            else:
                completed[run_index] = result
        rows = []
        for point in config.resolved_snapshots():
            values = [completed[r][point] for r in sorted(completed)]
            if values:
                mean = float(np.mean(values))
                stderr = (float(np.std(values, ddof=1) / math.sqrt(len(values)))
                          if len(values) > 1 else 0.0)
            else:
                mean = math.nan
                stderr = math.nan
            rows.append(CurveRow(point, values, mean, stderr))
        curves.append(LearningCurve(config.learner, config.method_name, rows,
                                    runs, len(aborts), aborts))
    return curves
