"""Command-line front end.

Subcommands:
  run            execute an experiment config, write per-learner CSV curves
                 plus a manifest sufficient to regenerate them
  noise-compare  run one learner under all four sensor-noise methods
  replay         re-execute a manifest and verify byte-identical outputs
  presets        list (or print) the compiled-in benchmark configs
  validate       parse and check a config without running it

Exit codes: 0 success, 1 config error, 2 runtime/instability error,
3 replay mismatch.
"""
from __future__ import annotations

import argparse
import copy
import hashlib
import json
import sys
import tempfile
from pathlib import Path

import yaml

from .config import (
    ConfigError,
    ExperimentConfig,
    PRESETS,
    build_environment,
    generation_config,
    load_preset,
    parse_config,
    parse_config_dict,
    preset_names,
    serialize_config,
)
from .harness import run_experiment

CSV_HEADER = "learner,method,visited_states,run,performance"


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def curve_to_csv(curve) -> str:
    lines = [CSV_HEADER]
    for row in curve.rows:
        for run_index, value in enumerate(row.values):
            lines.append(f"{curve.learner},{curve.method},{row.visited_states},"
                         f"{run_index},{_fmt(value)}")
        lines.append(f"{curve.learner},{curve.method},{row.visited_states},"
                     f"mean,{_fmt(row.mean)}")
        lines.append(f"{curve.learner},{curve.method},{row.visited_states},"
                     f"stderr,{_fmt(row.stderr)}")
    return "\n".join(lines) + "\n"


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _config_fingerprint(config_dict: dict) -> str:
    # the seed is replayable state, not configuration: keep it out of the hash
    d = copy.deepcopy(config_dict)
    d.pop("seed", None)
    return _sha256(json.dumps(d, sort_keys=True).encode())


def _load_config(path_or_preset: str, overrides, seed_override) -> ExperimentConfig:
    path = Path(path_or_preset)
    if path.is_file():
        raw = yaml.safe_load(path.read_text())
        if raw is None:
            raise ConfigError("<root>: empty config; required keys: "
                              "environment (with kind), learners")
        name = path.stem
    elif path_or_preset in PRESETS:
        raw = copy.deepcopy(PRESETS[path_or_preset])
        name = path_or_preset
    else:
        raise ConfigError(f"config {path_or_preset!r} is neither a file nor a "
                          f"preset (presets: {preset_names()})")
    for item in overrides or []:
        _apply_override(raw, item)
    if seed_override is not None:
        raw["seed"] = seed_override
    return parse_config_dict(raw, name)


def _apply_override(raw: dict, item: str) -> None:
    if "=" not in item:
        raise ConfigError(f"--set {item!r}: expected key=value")
    key, _, text = item.partition("=")
    value = yaml.safe_load(text)
    node = raw
    parts = key.split(".")
    for part in parts[:-1]:
        if isinstance(node, list):
            node = node[int(part)]
        else:
            node = node.setdefault(part, {})
    last = parts[-1]
    if isinstance(node, list):
        node[int(last)] = value
    else:
        node[last] = value


def _execute(config: ExperimentConfig, command: str, threads: int):
    """Run the experiment (or its four-method variant) and return
    (files: name -> bytes, abort info)."""
    env, basis = build_environment(config)
    horizon = config.eval_horizon
    gamma_eval = config.eval_gamma
    files = {}
    aborted = {}
    if command == "run":
        gconfigs = [generation_config(ls, config.environment.kind, basis.n)
                    for ls in config.learners]
        curves = run_experiment(env, basis, gconfigs, config.runs, config.trials,
                                config.seed, horizon, gamma_eval, threads)
        for i, curve in enumerate(curves):
            name = f"curve_{i:02d}_{curve.learner.lower()}.csv"
            files[name] = curve_to_csv(curve).encode()
            aborted[f"{curve.learner}#{i}"] = {
                "count": curve.aborted_runs,
                "details": [list(a) for a in curve.abort_reasons],
            }
    else:  # noise-compare
        if len(config.learners) != 1:
            raise ConfigError("learners: noise-compare needs exactly one learner")
        base = config.learners[0]
        if base.kind == "PTD":
            raise ConfigError("learners.0.kind: PTD has no sensor-noise method")
        combined = [CSV_HEADER]
        for method in ("policy", "average", "max", "boltzmann"):
            ls = copy.deepcopy(base)
            ls.noise_method = method
            gconfig = generation_config(ls, config.environment.kind, basis.n)
            curve = run_experiment(env, basis, [gconfig], config.runs,
                                   config.trials, config.seed, horizon,
                                   gamma_eval, threads)[0]
            body = curve_to_csv(curve).splitlines()[1:]
            combined.extend(body)
            aborted[f"{curve.learner}-{method}"] = {
                "count": curve.aborted_runs,
                "details": [list(a) for a in curve.abort_reasons],
            }
        files["noise_compare.csv"] = ("\n".join(combined) + "\n").encode()
    return files, aborted


def _write_outputs(out_dir: Path, config: ExperimentConfig, command: str,
                   threads: int, files: dict, aborted: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, data in files.items():
        (out_dir / name).write_bytes(data)
    config_dict = config.to_dict()
    manifest = {
        "command": command,
        "config": config_dict,
        "config_hash": _config_fingerprint(config_dict),
        "seed": config.seed,
        "threads": threads,
        "outputs": {name: _sha256(data) for name, data in sorted(files.items())},
        "aborted_runs": aborted,
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _all_runs_aborted(config: ExperimentConfig, aborted: dict) -> bool:
    return aborted and all(entry["count"] >= config.runs
                           for entry in aborted.values())


def cmd_run(args, command: str = "run") -> int:
    config = _load_config(args.config, args.set, args.seed)
    files, aborted = _execute(config, command, args.threads)
    out_dir = Path(args.out) if args.out else Path(f"kfql-out/{config.name}")
    _write_outputs(out_dir, config, command, args.threads, files, aborted)
    aborted_total = sum(e["count"] for e in aborted.values())
    print(f"wrote {len(files)} file(s) + manifest.json to {out_dir}"
          f" ({aborted_total} aborted run(s))")
    if _all_runs_aborted(config, aborted):
        print("error: every run aborted (numerical instability)", file=sys.stderr)
        return 2
    return 0


def cmd_replay(args) -> int:
    manifest_path = Path(args.manifest)
    try:
        manifest = json.loads(manifest_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read manifest: {exc}", file=sys.stderr)
        return 1
    config_dict = manifest["config"]
    if _config_fingerprint(config_dict) != manifest["config_hash"]:
        print("error: config-hash mismatch: manifest config was edited after "
              "the recorded run", file=sys.stderr)
        return 1
    raw = copy.deepcopy(config_dict)
    raw["environment"] = {k: v for k, v in raw["environment"].items() if v}
    raw["learners"] = [
        {k: v for k, v in ls.items() if v is not None} for ls in raw["learners"]]
    raw = {k: v for k, v in raw.items() if v is not None}
    raw["seed"] = manifest["seed"]
    config = parse_config_dict(raw, raw.get("name", "replay"))
    files, _aborted = _execute(config, manifest["command"], threads=1)
    mismatches = []
    for name, recorded in manifest["outputs"].items():
        actual = _sha256(files.get(name, b""))
        if actual != recorded:
            mismatches.append(name)
    if mismatches:
        print(f"replay FAILED: differing hashes for {mismatches}", file=sys.stderr)
        return 3
    print(f"replay OK: {len(manifest['outputs'])} output(s) reproduced exactly")
    return 0


def cmd_presets(args) -> int:
    if args.show:
        print(serialize_config(load_preset(args.show)), end="")
    else:
        for name in preset_names():
            print(name)
    return 0


def cmd_validate(args) -> int:
    config = _load_config(args.config, args.set, args.seed)
    build_environment(config)
    print(f"config OK: {config.name} ({config.environment.kind}, "
          f"{len(config.learners)} learner(s), {config.runs} run(s))")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kfql", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True,
                       help="config file path or preset name")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the master seed")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads; 1 guarantees bit-reproducibility")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="config override, dotted key path (repeatable)")

    add_common(sub.add_parser("run", help="execute an experiment"))
    add_common(sub.add_parser("noise-compare",
                              help="run all four sensor-noise methods"))
    replay = sub.add_parser("replay", help="verify a recorded run reproduces")
    replay.add_argument("manifest", help="path to a manifest.json")
    presets = sub.add_parser("presets", help="list built-in configs")
    presets.add_argument("--show", default=None, help="print one preset as YAML")
    validate = sub.add_parser("validate", help="check a config without running")
    add_common(validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args, "run")
        if args.command == "noise-compare":
            return cmd_run(args, "noise-compare")
        if args.command == "replay":
            return cmd_replay(args)
        if args.command == "presets":
            return cmd_presets(args)
        return cmd_validate(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
