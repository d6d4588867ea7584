"""Command-line interface.

Subcommands:
  run                execute an experiment sweep from a config file
  gen-instance       write a synthetic dataset CSV (plus optional spec JSON)
  probe-sensitivity  noise-free neighboring-dataset sensitivity probe
  verify             run the fast invariant suite; exit 0 iff all pass
"""

import argparse
import json
import sys

import numpy as np

from . import bench, selfcheck
from .bench import ExperimentConfig, build_instance, parse_config_text
from .losses import LOSS_KINDS


def _parse_set_overrides(pairs):
    text = "\n".join(pairs or [])
    return parse_config_text(text)


def cmd_run(args):
    overrides = _parse_set_overrides(args.set)
    if args.out is not None:
        overrides["output"] = args.out
    if args.config:
        cfg = ExperimentConfig.from_file(args.config, overrides)
    else:
        cfg = ExperimentConfig(overrides)
    log = []
    rows = bench.run_experiment(cfg, log=log)
    for line in log:
        print(f"[skip/fail] {line}", file=sys.stderr)
    ok = sum(r.certified for r in rows)
    print(f"{len(rows)} rows ({ok} certified)"
          + (f" -> {cfg['output']}" if cfg["output"] else ""))
    if cfg["output"] is None:
        for row in rows:
            print(",".join(str(v) for v in row.to_csv_row()))
    return 0


def cmd_gen_instance(args):
    params = {
        "tail_index": args.tail_index,
        "G_k": args.G_k,
        "G_2": args.G_2,
        "bias": args.bias,
        "epsilon": args.epsilon,
        "zeta": args.zeta,
        "sign": args.sign,
    }
    dataset, spec = build_instance(
        args.kind, args.n, args.d, args.seed, params, args.radius
    )
    dataset.to_csv(args.out)
    summary = {
        "kind": spec.kind,
        "n": spec.n,
        "d": spec.d,
        "seed": spec.seed,
        "loss": spec.loss,
        "vacuous": spec.vacuous,
        "mu": None if spec.mu is None else [float(v) for v in spec.mu],
        "domain_radius": spec.domain_radius,
        "moment": {
            "k": spec.moment.k,
            "G_k": spec.moment.G_k,
            "G_2": spec.moment.G_2,
            "G_1": spec.moment.G_1,
        },
        "params": {
            key: val for key, val in spec.params.items()
            if not isinstance(val, (list, np.ndarray)) or key == "nu"
        },
    }
    if args.spec_out:
        with open(args.spec_out, "w") as fh:
            json.dump(summary, fh, indent=2)
    print(f"wrote {dataset.n} samples to {args.out}")
    print(json.dumps(summary))
    return 0


def cmd_probe_sensitivity(args):
    kinds = list(LOSS_KINDS) if args.loss == "all" else [args.loss]
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for kind in kinds:
        report = bench.sensitivity_probe(kind, args.pairs, rng, n=args.n)
        if args.out:
            path = args.out if len(kinds) == 1 else \
                args.out.replace(".csv", f"_{kind}.csv")
            report.to_csv(path)
        print(
            f"{kind}: max stage-1 ratio {report.max_stage1_ratio:.4f}, "
            f"max stage-2 ratio {report.max_stage2_ratio:.4f} "
            f"over {args.pairs} pairs"
        )
        worst = max(worst, report.max_stage1_ratio, report.max_stage2_ratio)
    if worst > 1.0:
        print("SENSITIVITY VIOLATION: ratio above 1", file=sys.stderr)
        return 1
    return 0


def cmd_verify(args):
    results = selfcheck.run_all(seed=args.seed)
    failures = 0
    for name, ok, detail in results:
        status = "PASS" if ok else "FAIL"
        print(f"[{status}] {name}: {detail}")
        failures += 0 if ok else 1
    print(f"{len(results) - failures}/{len(results)} checks passed")
    return 0 if failures == 0 else 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="privopt",
        description=(
            "Pure epsilon-DP stochastic convex optimization benchmark tools"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment sweep")
    p_run.add_argument("--config", help="flat key=value config file")
    p_run.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key (repeatable)")
    p_run.add_argument("--out", help="output CSV path (overrides config)")
    p_run.set_defaults(func=cmd_run)

    p_gen = sub.add_parser("gen-instance", help="generate a synthetic dataset")
    p_gen.add_argument("--kind", required=True,
                       choices=["pareto_linear", "packing_hard", "two_point"])
    p_gen.add_argument("--n", type=int, required=True)
    p_gen.add_argument("--d", type=int, default=1)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True, help="dataset CSV path")
    p_gen.add_argument("--spec-out", help="optional instance spec JSON path")
    p_gen.add_argument("--tail-index", dest="tail_index", type=float, default=2.0)
    p_gen.add_argument("--G-k", dest="G_k", type=float, default=1.0)
    p_gen.add_argument("--G-2", dest="G_2", type=float, default=1.0)
    p_gen.add_argument("--bias", type=float, default=0.5)
    p_gen.add_argument("--epsilon", type=float, default=1.0)
    p_gen.add_argument("--zeta", type=float, default=0.25)
    p_gen.add_argument("--sign", type=int, default=1, choices=[-1, 0, 1])
    p_gen.add_argument("--radius", type=float, default=1.0)
    p_gen.set_defaults(func=cmd_gen_instance)

    p_probe = sub.add_parser("probe-sensitivity",
                             help="neighboring-dataset sensitivity probe")
    p_probe.add_argument("--loss", default="all",
                         choices=["all", *LOSS_KINDS])
    p_probe.add_argument("--pairs", type=int, default=200)
    p_probe.add_argument("--n", type=int, default=6)
    p_probe.add_argument("--seed", type=int, default=0)
    p_probe.add_argument("--out", help="per-pair CSV path")
    p_probe.set_defaults(func=cmd_probe_sensitivity)

    p_verify = sub.add_parser("verify", help="run the invariant suite")
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.set_defaults(func=cmd_verify)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
