"""Command line entry point: ``fedsched <subcommand> [options]``."""

from __future__ import annotations

import argparse
from pathlib import Path

from .baselines import PolicyKind
from .config import RunConfig, load_config
from .harness import (ExperimentSpec, convergence_trace, dump_policy_surface, run_episode,
                      run_sweep, write_manifest, write_metrics, write_trace)
from .learning import LearningConfig
from .model import ConfigError, default_config


def _load(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig(default_config(), LearningConfig(), {})
    return load_config(path)


def _common(p: argparse.ArgumentParser, horizon: int = 5000) -> None:
    p.add_argument("--config", help="TOML configuration file (defaults if omitted)")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--horizon", type=int, default=horizon, help="iterations to simulate")
    p.add_argument("--burn-in", type=int, default=1000, dest="burn_in",
                   help="iterations excluded from averages")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedsched", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one episode, write metrics and trace")
    _common(p)
    p.add_argument("--policy", default="proposed", choices=[k.value for k in PolicyKind])

    p = sub.add_parser("sweep", help="run the [experiment] section of a config file")
    _common(p)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(horizon=None, burn_in=None, seed=None, out=None)

    p = sub.add_parser("policy-dump", help="train online, then tabulate one device's policy")
    _common(p)
    p.add_argument("--device", type=int, default=0)

    p = sub.add_parser("convergence", help="per-iteration value-table changes")
    _common(p)
    p.add_argument("--device", type=int, default=0)
    return parser


def _simulate(args, rc: RunConfig, out: Path) -> None:
    rec, rows = run_episode(rc.system, args.policy, args.seed, args.horizon, args.burn_in,
                            rc.learning, trace=True,
                            csi_cutoff=rc.experiment.get("csi_cutoff"))
    write_metrics(out / "metrics.csv", [rec])
    write_trace(out / "trace.csv", rows)
    write_manifest(out / "manifest.json", rc.system, [args.seed], rc.learning,
                   extra={"command": "simulate", "policy": args.policy,
                          "horizon": args.horizon, "burn_in": args.burn_in})
    print(f"{args.policy}: utility {rec.utility:.4f}, worst outage {max(rec.outage):.4f}")


def _sweep(args, rc: RunConfig) -> None:
    exp = dict(rc.experiment)
    if "variable" not in exp or "values" not in exp:
        raise ConfigError("experiment", "sweep needs 'variable' and 'values'")
    for key in ("horizon", "burn_in", "out"):
        val = getattr(args, key)
        if val is not None:
            exp["output" if key == "out" else key] = val
    if args.seed is not None:
        exp["seeds"] = [args.seed]
    spec = ExperimentSpec(base=rc.system, learning=rc.learning,
                          output=exp.pop("output", "out"), **exp)
    records = run_sweep(spec, workers=args.workers)
    print(f"{len(records)} runs written to {spec.output}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        rc = _load(args.config)
    except ConfigError as err:
        print(f"config error: {err}")
        return 2
    if args.command == "sweep":
        try:
            _sweep(args, rc)
        except (ConfigError, ValueError, TypeError) as err:
            print(f"experiment error: {err}")
            return 2
        return 0
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.command == "simulate":
        _simulate(args, rc, out)
    elif args.command == "policy-dump":
        _, _, state = run_episode(rc.system, "proposed", args.seed, args.horizon,
                                  min(args.burn_in, args.horizon - 1), rc.learning,
                                  return_learner=True)
        dump_policy_surface(rc.system, state, out / "policy_surface.csv", args.device, rc.learning)
        write_manifest(out / "manifest.json", rc.system, [args.seed], rc.learning,
                       extra={"command": "policy-dump", "device": args.device,
                              "horizon": args.horizon})
    elif args.command == "convergence":
        convergence_trace(rc.system, args.seed, args.horizon, rc.learning, args.device,
                          out / "convergence.csv")
        write_manifest(out / "manifest.json", rc.system, [args.seed], rc.learning,
                       extra={"command": "convergence", "device": args.device,
                              "horizon": args.horizon})
    return 0


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
