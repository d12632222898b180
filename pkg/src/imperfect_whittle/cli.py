"""Command-line entry point: ``imperfect-whittle {run-experiment,sweep-index,certify}``."""
from __future__ import annotations

import argparse
import sys

from . import experiments, presets
from .belief import TransitionMatrix
from .errors import ConfigError
from .index import DEFAULT_ITERS
from .models import ArmModel


def _int_list(text):
    return [int(x) for x in text.split(",") if x.strip()]


def _str_list(text):
    return [x.strip() for x in text.split(",") if x.strip()]


def _u64(text):
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _add_source(p):
    g = p.add_argument_group("parameter source")
    g.add_argument("--system", help="bundled arm system id (1-4)")
    g.add_argument("--example", help="bundled example id (1-16); sets system, eps and beta")
    g.add_argument("--config", metavar="PATH", help="JSON config file")
    g.add_argument("--eps", type=float, help="false-alarm probability Pr(O=0|S=1)")
    g.add_argument("--beta", type=float, help="discount factor")


def _add_arm(p):
    g = p.add_argument_group("single arm")
    g.add_argument("--figure", choices=["1", "2"], help="index-plot preset")
    g.add_argument("--arm", type=int, help="0-based arm of --system/--example")
    g.add_argument("--p01", type=float)
    g.add_argument("--p11", type=float)
    g.add_argument("--reward", type=float, default=None, help="arm reward B (default 1)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="imperfect-whittle", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run-experiment", help="compare policies by Monte Carlo")
    _add_source(p)
    p.add_argument("--policies", type=_str_list, help="comma list of whittle[:N], myopic, random")
    p.add_argument("--horizons", type=_int_list, help="comma list of horizons")
    p.add_argument("--episodes", type=int)
    p.add_argument("--iters", type=int, help=f"index iteration count (default {DEFAULT_ITERS})")
    p.add_argument("--seed", type=_u64)
    p.add_argument("--M", type=int, dest="M", help=f"arms activated per slot (default {experiments.DEFAULT_M})")
    p.add_argument("--arms", type=_int_list, help="0-based subset of the system's arms")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for experiment cells")
    p.add_argument("--out", metavar="PATH")

    for name, helptext in (("sweep-index", "tabulate W(w) on a grid"),
                           ("certify", "report threshold and indexability conditions")):
        p = sub.add_parser(name, help=helptext)
        _add_source(p)
        _add_arm(p)
        p.add_argument("--iters", type=int, default=DEFAULT_ITERS)
        p.add_argument("--grid", type=float, default=0.01, metavar="STEP")
        p.add_argument("--out", metavar="PATH")
    return ap


def _experiment_spec(args) -> experiments.ExperimentSpec:
    if args.config:
        d = experiments.read_config(args.config)
    elif args.example:
        d = {"example": args.example}
    elif args.system:
        d = {"system": args.system}
    else:
        raise ConfigError("give one of --system, --example or --config")
    overrides = {
        "eps": args.eps, "beta": args.beta, "policies": args.policies, "horizons": args.horizons,
        "episodes": args.episodes, "iters": args.iters, "seed": args.seed, "M": args.M,
        "arm_subset": args.arms,
    }
    d.update({k: v for k, v in overrides.items() if v is not None})
    return experiments.ExperimentSpec.from_dict(d)


def _single_arm_sources(args):
    """Resolve (arms, eps, beta, fields) for sweep-index and certify."""
    eps, beta = args.eps, args.beta
    fields = {}
    if args.config:
        spec = experiments.load_spec(args.config)
        arms = list(spec.config.arms)
        eps = spec.config.eps if eps is None else eps
        beta = spec.config.beta if beta is None else beta
        fields["config"] = args.config
    elif args.figure:
        f = presets.figure(args.figure)
        arms = [ArmModel.of(f["p01"], f["p11"], f["B"])]
        eps = f["eps"] if eps is None else eps
        beta = f["beta"] if beta is None else beta
        fields["figure"] = args.figure
    elif args.example or args.system:
        if args.example:
            ex = presets.example(args.example)
            arms = list(presets.system_arms(ex["system"]))
            eps = ex["eps"] if eps is None else eps
            beta = ex["beta"] if beta is None else beta
            fields.update(example=args.example, system=ex["system"])
        else:
            arms = list(presets.system_arms(args.system))
            fields["system"] = args.system
    elif args.p01 is not None and args.p11 is not None:
        try:
            arms = [ArmModel(TransitionMatrix(args.p01, args.p11), 1.0)]
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    else:
        raise ConfigError("give one of --figure, --example, --system, --config or --p01/--p11")
    if args.arm is not None:
        if not 0 <= args.arm < len(arms):
            raise ConfigError(f"--arm {args.arm} out of range for {len(arms)} arms")
        arms = [arms[args.arm]]
        fields["arm"] = args.arm
    if args.reward is not None:
        arms = [ArmModel(a.P, args.reward) for a in arms]
    if eps is None or beta is None:
        raise ConfigError("eps and beta are required (--eps, --beta)")
    if not (0.0 < eps < 1.0) or not (0.0 < beta < 1.0):
        raise ConfigError("need 0 < eps < 1 and 0 < beta < 1")
    fields.update(eps=eps, beta=beta, iters=args.iters, grid=args.grid,
                  arms=[{"p01": a.P.p01, "p11": a.P.p11, "B": a.B} for a in arms])
    return arms, eps, beta, fields


def _emit(text, path):
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run-experiment":
            spec = _experiment_spec(args)
            results = experiments.run_experiment(spec, jobs=args.jobs)
            _emit(experiments.experiment_csv(spec, results), args.out)
        elif args.command == "sweep-index":
            arms, eps, beta, fields = _single_arm_sources(args)
            if len(arms) != 1:
                raise ConfigError("sweep-index needs a single arm (use --arm)")
            sw = experiments.sweep_index(arms[0].P, eps, beta, arms[0].B, args.iters, args.grid)
            _emit(experiments.sweep_csv(sw, fields), args.out)
        else:
            arms, eps, beta, fields = _single_arm_sources(args)
            cert = experiments.certify(arms, eps, beta, args.iters, args.grid)
            _emit(experiments.certificate_csv(cert, fields), args.out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
