"""End-to-end acceptance checks.

Each test prints one PASS/FAIL line. The first five are exact oracle
checks (closed-form Bayesian posterior, value iteration, algebraic
identities); the rest are scaled-down reproductions of the benchmark
orderings plus reproducibility checks, and take tens of minutes.

Run with: pytest tests/test_acceptance.py -v -s
"""
import copy
import csv
import dataclasses
import functools
import json
import math

import numpy as np
import pytest
import yaml

from kfql.basis import BasisVector
from kfql.cli import main as cli_main
from kfql.config import (
    PRESETS,
    build_environment,
    generation_config,
    load_preset,
    preset_names,
)
from kfql.core import WeightBelief, FullCovariance, Observation
from kfql.harness import (
    GenerationConfig,
    evaluation_seed,
    generate,
    generation_seed,
    run_experiment,
    RunAborted,
)
from kfql.learners import (
    KFQLLearner,
    PTDLearner,
    SensorNoiseMethod,
    LearningRateSchedule,
    SuccessorSummary,
    observe_full,
    observe_diag,
    sensor_noise,
)


def report(num: int, desc: str, ok: bool):
    print(f"\nCRITERION {num:2d} [{'PASS' if ok else 'FAIL'}] {desc}")
    assert ok, f"criterion {num} failed: {desc}"


def sparse(vec):
    vec = np.asarray(vec, dtype=float)
    idx = np.nonzero(vec)[0].astype(np.int64)
    return BasisVector(idx, vec[idx], vec.size)


# ---------------------------------------------------------------------------
# 1. sequential filter updates match the closed-form regression posterior


def conjugate_posterior(mu0, cov0, phis, values, noises):
    """Closed-form Bayesian linear-regression posterior after observing
    y_i = phi_i . w + N(0, eps_i)."""
    prec = np.linalg.inv(cov0)
    info = prec @ mu0
    for phi, y, eps in zip(phis, values, noises):
        prec = prec + np.outer(phi, phi) / eps
        info = info + phi * y / eps
    cov = np.linalg.inv(prec)
    return cov @ info, cov


def test_criterion_01_conjugacy_oracle():
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(25):
        n = int(rng.integers(1, 9))
        m = int(rng.integers(1, 201))
        mu0 = rng.normal(size=n)
        a = rng.normal(size=(n, n))
        cov0 = a @ a.T + np.eye(n)
        phis = rng.normal(size=(m, n))
        values = rng.normal(size=m) * 5
        noises = rng.uniform(0.1, 5.0, size=m)
        belief = WeightBelief(mu0.copy(), FullCovariance(cov0.copy()))
        for phi, y, eps in zip(phis, values, noises):
            belief = observe_full(belief, Observation(sparse(phi), y, eps))
        mu_ref, cov_ref = conjugate_posterior(mu0, cov0, phis, values, noises)
        worst = max(worst,
                    np.abs(belief.mean - mu_ref).max(),
                    np.abs(belief.covariance.matrix - cov_ref).max())
    report(1, f"conjugate-posterior oracle, max |err| = {worst:.2e} < 1e-8",
           worst < 1e-8)


# ---------------------------------------------------------------------------
# 2. one diagonal update equals the diagonal of one full update


def test_criterion_02_diagonal_consistency():
    from kfql.core import DiagonalCovariance
    rng = np.random.default_rng(202)
    worst = 0.0
    for _ in range(10_000):
        n = int(rng.integers(1, 7))
        mu = rng.normal(size=n)
        var = rng.uniform(0.01, 100.0, size=n)
        phi = sparse(rng.normal(size=n) * (rng.random(size=n) < 0.8))
        if phi.indices.size == 0:
            continue
        obs = Observation(phi, float(rng.normal() * 3),
                          float(rng.uniform(0.01, 10)))
        full = observe_full(
            WeightBelief(mu.copy(), FullCovariance(np.diag(var))), obs)
        diag = observe_diag(
            WeightBelief(mu.copy(), DiagonalCovariance(var.copy())), obs)
        worst = max(worst,
                    np.abs(full.mean - diag.mean).max(),
                    np.abs(np.diag(full.covariance.matrix)
                           - diag.covariance.variances).max())
    report(2, f"diagonal update == diagonal of full update, "
              f"max |err| = {worst:.2e} < 1e-12", worst < 1e-12)


# ---------------------------------------------------------------------------
# 3. predictive variance never increases across an update


def test_criterion_03_variance_contraction():
    from kfql.core import DiagonalCovariance, quadratic_form
    rng = np.random.default_rng(303)
    ok = True
    for _ in range(10_000):
        n = int(rng.integers(1, 7))
        phi = sparse(rng.normal(size=n))
        if phi.indices.size == 0:
            continue
        obs = Observation(phi, float(rng.normal()),
                          float(rng.uniform(1e-3, 10)))
        a = rng.normal(size=(n, n))
        cov = FullCovariance(a @ a.T + 1e-6 * np.eye(n))
        before = quadratic_form(phi, cov)
        after_full = observe_full(WeightBelief(rng.normal(size=n), cov), obs)
        ok &= quadratic_form(phi, after_full.covariance) <= before + 1e-12
        var = rng.uniform(1e-4, 50.0, size=n)
        dcov = DiagonalCovariance(var.copy())
        before = quadratic_form(phi, dcov)
        after_diag = observe_diag(
            WeightBelief(rng.normal(size=n), dcov), obs)
        ok &= quadratic_form(phi, after_diag.covariance) <= before + 1e-12
    report(3, "quadratic_form(phi, cov) non-increasing, both learners, "
              "10^4 PSD cases", ok)


# ---------------------------------------------------------------------------
# 4. sensor-noise identities


def test_criterion_04_sensor_noise_identities():
    rng = np.random.default_rng(404)
    ok = True
    for _ in range(10_000):
        k = int(rng.integers(1, 8))
        summary = SuccessorSummary(rng.normal(size=k) * 5,
                                   rng.uniform(0, 10, size=k),
                                   0.0, False, float(rng.uniform(0.5, 1.0)))
        eps0 = float(rng.uniform(0, 2))
        values = {v: sensor_noise(SensorNoiseMethod(v, eps0, tau=1.0), summary)
                  for v in ("policy", "average", "max", "boltzmann")}
        ok &= all(values["max"] >= values[v] - 1e-12 for v in values)

        zero = SuccessorSummary(summary.q_means, np.zeros(k), 0.0, False,
                                summary.gamma)
        ok &= all(sensor_noise(SensorNoiseMethod(v, eps0, tau=1.0), zero)
                  == pytest.approx(eps0, abs=1e-15)
                  for v in ("policy", "average", "max", "boltzmann"))

        hot = sensor_noise(SensorNoiseMethod("boltzmann", eps0, tau=1e9),
                           summary)
        avg = sensor_noise(SensorNoiseMethod("average", eps0), summary)
        ok &= abs(hot - avg) < 1e-6
    report(4, "zero-covariance -> eps0 for all methods; max dominates; "
              "boltzmann(tau=1e9) == average within 1e-6", ok)


# ---------------------------------------------------------------------------
# 5. tabular reduction against value iteration


MDP_NEXT = {(0, 0): 1, (0, 1): 0, (1, 0): 2, (1, 1): 0, (2, 0): 2, (2, 1): 1}
MDP_REWARD = {(0, 0): 1.0, (0, 1): 0.0, (1, 0): 2.0, (1, 1): -1.0,
              (2, 0): 0.5, (2, 1): 3.0}
MDP_GAMMA = 0.3


def mdp_q_star():
    q = np.zeros((3, 2))
    for _ in range(10_000):
        new = np.array([[MDP_REWARD[s, a]
                         + MDP_GAMMA * q[MDP_NEXT[s, a]].max()
                         for a in (0, 1)] for s in (0, 1, 2)])
        if np.abs(new - q).max() < 1e-13:
            break
        q = new
    return q


def sweep_learner(learner, sweeps):
    n = 6
    for _ in range(sweeps):
        for s in (0, 1, 2):
            for a in (0, 1):
                phi = BasisVector(np.array([a * 3 + s], dtype=np.int64),
                                  np.array([1.0]), n)
                s2 = MDP_NEXT[s, a]
                succ_q = np.array([learner.q_mean(BasisVector(
                    np.array([b * 3 + s2], dtype=np.int64),
                    np.array([1.0]), n)) for b in (0, 1)])
                succ_v = np.array([learner.q_var(BasisVector(
                    np.array([b * 3 + s2], dtype=np.int64),
                    np.array([1.0]), n)) for b in (0, 1)])
                learner.update(phi, SuccessorSummary(
                    succ_q, succ_v, MDP_REWARD[s, a], False, MDP_GAMMA))
    w = learner.weights()
    return np.array([[w[a * 3 + s] for a in (0, 1)] for s in (0, 1, 2)])


def test_criterion_05_tabular_reduction():
    q_star = mdp_q_star()
    ptd = PTDLearner(np.zeros(6), LearningRateSchedule(0.5, 1e5))
    err_ptd = np.abs(sweep_learner(ptd, 6_000) - q_star).max()
    kfql = KFQLLearner(np.zeros(6), 100.0,
                       SensorNoiseMethod("max", 1e-6))
    err_kfql = np.abs(sweep_learner(kfql, 6_000) - q_star).max()
    report(5, f"3-state MDP: PTD err {err_ptd:.2e} < 1e-3, "
              f"KFQL err {err_kfql:.2e} < 1e-2",
           err_ptd < 1e-3 and err_kfql < 1e-2)


# ---------------------------------------------------------------------------
# 6-9. scaled benchmark orderings (shared heavy runs)


@functools.lru_cache(maxsize=None)
def preset_final_curves(preset: str, kinds: tuple):
    """Run the preset's learners (final snapshot only) and return
    {learner_kind: LearningCurve}."""
    cfg = load_preset(preset)
    env, basis = build_environment(cfg)
    gconfigs = []
    for ls in cfg.learners:
        if ls.kind not in kinds:
            continue
        g = generation_config(ls, cfg.environment.kind, basis.n)
        gconfigs.append(dataclasses.replace(g, snapshot_points=(g.budget,)))
    curves = run_experiment(env, basis, gconfigs, cfg.runs, cfg.trials,
                            cfg.seed)
    return {c.learner: c for c in curves}


def final_row(curve):
    return curve.rows[-1]


def test_criterion_06_cartpole_ordering():
    curves = preset_final_curves("cartpole-paper", ("AKFQL", "PTD"))
    akfql, ptd = final_row(curves["AKFQL"]), final_row(curves["PTD"])
    long_runs = sum(v > 10_000 for v in akfql.values)
    ok = (akfql.mean >= 5 * ptd.mean
          and long_runs > len(akfql.values) / 2)
    report(6, f"cart-pole: AKFQL mean {akfql.mean:.0f} >= 5x PTD mean "
              f"{ptd.mean:.0f}; {long_runs}/{len(akfql.values)} runs "
              f"> 10000 steps", ok)


def test_criterion_07_carhill_ordering():
    curves = preset_final_curves("carhill-paper", ("AKFQL", "PTD"))
    akfql, ptd = final_row(curves["AKFQL"]), final_row(curves["PTD"])
    positive = sum(v > 0 for v in akfql.values)
    ok = positive >= 6 and akfql.mean > ptd.mean
    report(7, f"car-hill: AKFQL positive return in {positive}/10 runs "
              f"(need >= 6); mean {akfql.mean:.3f} > PTD {ptd.mean:.3f}", ok)


def random_policy_cashier_cost(runs=10, horizon=1000):
    cfg = load_preset("cashier-paper")
    env, _basis = build_environment(cfg)
    costs = []
    for run in range(runs):
        rng = np.random.default_rng(evaluation_seed(cfg.seed, run, 0))
        state = env.initial_state(rng)
        total = 0.0
        for _ in range(horizon):
            tr = env.step(state, int(rng.integers(env.action_count)), rng)
            total += -tr.reward
            state = tr.next_state
        costs.append(total / horizon)
    return float(np.mean(costs))


def test_criterion_08_cashier_ordering():
    curves = preset_final_curves("cashier-paper", ("AKFQL", "PTD"))
    akfql, ptd = final_row(curves["AKFQL"]), final_row(curves["PTD"])
    rand_cost = random_policy_cashier_cost()
    ok = akfql.mean <= 0.9 * rand_cost and akfql.mean <= ptd.mean
    report(8, f"cashier: AKFQL cost {akfql.mean:.1f} <= 0.9 x random "
              f"{rand_cost:.1f} and <= PTD {ptd.mean:.1f}", ok)


def test_criterion_09_instability_surfacing(tmp_path):
    # (a) full-covariance learner at tight constant noise aborts on some runs
    cfg = load_preset("carhill-paper")
    env, basis = build_environment(cfg)
    ls = copy.deepcopy(cfg.learners[1])
    assert ls.kind == "KFQL"
    ls.epsilon0 = 0.0
    ls.budget = 100_000
    gconfig = generation_config(ls, cfg.environment.kind, basis.n)
    gconfig = dataclasses.replace(gconfig, snapshot_points=(ls.budget,))
    aborts = 0
    for run in range(3):
        try:
            generate(gconfig, env, basis,
                     np.random.default_rng(generation_seed(cfg.seed, run)))
        except RunAborted:
            aborts += 1

    # (b) the diagonal learner never aborted in the criteria 6-8 runs
    akfql_aborts = sum(
        preset_final_curves(p, ("AKFQL", "PTD"))["AKFQL"].aborted_runs
        for p in ("cartpole-paper", "carhill-paper", "cashier-paper"))

    # (c) aborted-run counts are recorded in the manifest
    out = tmp_path / "smoke"
    cli_main(["run", "--config", "smoke", "--out", str(out)])
    manifest = json.loads((out / "manifest.json").read_text())
    counts_present = all("count" in entry
                         for entry in manifest["aborted_runs"].values())

    ok = aborts >= 1 and akfql_aborts == 0 and counts_present
    report(9, f"instability: KFQL tight-noise aborts {aborts}/3 runs "
              f"(need >= 1); AKFQL aborts in criteria 6-8: {akfql_aborts} "
              f"(need 0); manifest records counts: {counts_present}", ok)


# ---------------------------------------------------------------------------
# 10. sensor-noise method comparison on cart-pole


def test_criterion_10_noise_method_comparison(tmp_path):
    # the methods' final means are within one standard error of each other
    # at 10 runs, so this comparison uses a larger sample to stabilize the
    # ordering (the criterion fixes only the budget)
    cfg = copy.deepcopy(PRESETS["cartpole-paper"])
    cfg["runs"] = 40
    cfg["trials"] = 3
    cfg["learners"] = [dict(cfg["learners"][0],
                            snapshots=[cfg["learners"][0]["budget"]])]
    path = tmp_path / "noise.yaml"
    path.write_text(yaml.safe_dump(cfg))
    out = tmp_path / "nc"
    code = cli_main(["noise-compare", "--config", str(path),
                     "--out", str(out)])
    assert code == 0
    finals = {}
    with open(out / "noise_compare.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            if row["run"] == "mean":
                finals[row["method"], int(row["visited_states"])] = \
                    float(row["performance"])
    budget = cfg["learners"][0]["budget"]
    avg = finals["average", budget]
    pol = finals["policy", budget]
    boltz = finals["boltzmann", budget]
    ok = avg >= boltz and pol >= boltz
    report(10, f"noise methods on cart-pole: average {avg:.0f} and policy "
               f"{pol:.0f} >= boltzmann {boltz:.0f}", ok)


# ---------------------------------------------------------------------------
# 11. reproducibility: replay every preset, byte-identical reruns


def scaled_overrides(preset: str):
    over = ["--set", "runs=2", "--set", "trials=2",
            "--set", "eval_horizon=200"]
    for i in range(len(PRESETS[preset]["learners"])):
        over += ["--set", f"learners.{i}.budget=400",
                 "--set", f"learners.{i}.snapshots=[0, 400]"]
    return over


def test_criterion_11_replay_all_presets(tmp_path):
    ok = True
    detail = []
    for preset in preset_names():
        out = tmp_path / preset
        over = [] if preset == "smoke" else scaled_overrides(preset)
        code = cli_main(["run", "--config", preset, "--out", str(out), *over])
        replay = cli_main(["replay", str(out / "manifest.json")])
        detail.append(f"{preset}: run={code} replay={replay}")
        ok &= code == 0 and replay == 0

    # single-threaded reruns are byte-identical
    a, b = tmp_path / "rerun_a", tmp_path / "rerun_b"
    for out in (a, b):
        cli_main(["run", "--config", "smoke", "--out", str(out)])
    for f in sorted(a.glob("*.csv")):
        ok &= f.read_bytes() == (b / f.name).read_bytes()
    report(11, "replay OK on all presets (" + "; ".join(detail)
               + "); smoke reruns byte-identical", ok)
