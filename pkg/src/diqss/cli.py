"""Command line front end.

Exit codes: 0 success, 2 configuration error, 3 domain error, 4 no threshold
in range, 5 Monte Carlo validation failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import figures, keyrate, montecarlo, thresholds
from .errors import DomainError, NoThresholdError
from .params import FiberModel, ProtocolParams
from .strategies import KINDS, StrategyConfig

EXIT_OK, EXIT_CONFIG, EXIT_DOMAIN, EXIT_NO_THRESHOLD, EXIT_VALIDATION = 0, 2, 3, 4, 5
OUTPUT_DIR_ENV = "DIQSS_OUTPUT_DIR"

FIBER_FLAGS = ("eta_d", "eta_c", "alpha", "distance")


class ConfigError(Exception):
    pass


def _sig6(x):
    if isinstance(x, float):
        return float(f"{x:.6g}")
    if isinstance(x, dict):
        return {k: _sig6(v) for k, v in x.items()}
    if isinstance(x, list):
        return [_sig6(v) for v in x]
    return x


def read_config(path: str) -> dict:
    """Flat ``key = value`` file; keys are flag names (dashes or underscores)."""
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{n}: expected key = value")
        out[key.strip().replace("-", "_")] = value.strip().strip('"').strip("'")
    return out


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value file; flags override it")
    p.add_argument("--strategy", choices=KINDS, default="none")
    p.add_argument("--q", type=float, default=0.0, help="preprocessing flip probability")
    p.add_argument("--fidelity", type=float, default=1.0, help="channel fidelity F")
    p.add_argument("--source-fidelity", type=float, default=1.0, help="GHZ source fidelity F_s")
    p.add_argument("--source-model", choices=("phase_flip", "qber_only"), default="phase_flip")
    p.add_argument("--eta", type=float, help="global detection efficiency")
    p.add_argument("--eta-d", type=float, help="detector efficiency (fiber model)")
    p.add_argument("--eta-c", type=float, help="coupling efficiency (fiber model)")
    p.add_argument("--alpha", type=float, help="fiber attenuation in dB/km (default 0.2)")
    p.add_argument("--distance", type=float, help="source-to-user distance in km")
    p.add_argument("--output", help="write the result here instead of stdout")
    p.add_argument("--format", choices=("json", "csv"), default=None, help="default: csv for sweep, json otherwise")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="diqss", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rate", help="evaluate a key-rate lower bound")
    _common(p)

    p = sub.add_parser("threshold", help="solve for a threshold")
    _common(p)
    p.add_argument("--var", choices=("eta", "delta", "F", "d", "eta_c", "all"), required=True)
    p.add_argument("--bracket", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--tol", type=float, default=1e-7)

    p = sub.add_parser("sweep", help="rate of several strategies over a grid")
    _common(p)
    p.add_argument("--var", choices=thresholds.VARIABLES, required=True)
    p.add_argument("--start", type=float, required=True)
    p.add_argument("--stop", type=float, required=True)
    p.add_argument("--steps", type=int, default=101)
    p.add_argument(
        "--strategies",
        default="none,preprocess:0.2,postselect,advanced:0.2",
        help="comma list of kind[:q]",
    )
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("simulate", help="seeded Monte Carlo run")
    _common(p)
    p.add_argument("--rounds", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--qber-fraction", type=float, default=1.0)
    p.add_argument("--validate", action="store_true", help="compare against the closed forms")
    p.add_argument("--k-sigma", type=float, default=4.0)

    p = sub.add_parser("reproduce", help="regenerate a figure's data as CSV")
    p.add_argument("figure", type=int)
    p.add_argument("--output", help=f"CSV path (default ${OUTPUT_DIR_ENV}/figN.csv or ./figN.csv)")
    return parser


def _parse(argv: list[str] | None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        # re-parse with config values as defaults so explicit flags win
        cfg = read_config(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in sub._actions}
        unknown = sorted(set(cfg) - set(known))
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        typed = {}
        for k, v in cfg.items():
            act = known[k]
            if act.nargs == 0:
                typed[k] = v.lower() in ("1", "true", "yes", "on")
            elif act.type is not None:
                typed[k] = act.type(v)
            else:
                typed[k] = v
        sub.set_defaults(**typed)
        args = parser.parse_args(argv)
    return args


def params_from_args(args: argparse.Namespace, variable: str | None = None) -> ProtocolParams:
    """Protocol parameters from flags.

    Threshold commands may omit ``--eta``: it defaults to 1, and the fiber
    variables ``d`` / ``eta_c`` default to the standard fiber model.
    """
    fiber_given = {k: getattr(args, k) for k in FIBER_FLAGS if getattr(args, k) is not None}
    if fiber_given and args.eta is not None:
        raise ConfigError("give either --eta or fiber parameters, not both")
    try:
        common = dict(
            fidelity=args.fidelity,
            source_fidelity=args.source_fidelity,
            strategy=StrategyConfig(args.strategy, args.q),
            source_model=args.source_model,
        )
        if fiber_given or variable in ("d", "eta_c"):
            return ProtocolParams(fiber=FiberModel(**fiber_given), **common)
        if args.eta is None:
            if variable is None:
                raise ConfigError("give --eta or fiber parameters (--eta-d, --eta-c, --alpha, --distance)")
            return ProtocolParams(eta=1.0, **common)
        return ProtocolParams(eta=args.eta, **common)
    except DomainError as e:
        raise ConfigError(str(e)) from e


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _emit_record(record: dict, args) -> None:
    if args.format == "csv":
        flat = {k: v for k, v in record.items() if not isinstance(v, (dict, list))}
        text = ",".join(flat) + "\n" + ",".join(str(v) for v in flat.values()) + "\n"
    else:
        text = json.dumps(record, indent=2) + "\n"
    _emit(text, args.output)


def cmd_rate(args) -> int:
    p = params_from_args(args)
    br = keyrate.key_rate(p)
    rec = _sig6(br.as_dict())
    rec["eta"] = _sig6(p.global_eta)
    _emit_record(rec, args)
    return EXIT_OK


def cmd_threshold(args) -> int:
    p = params_from_args(args, args.var)
    if args.var == "all":
        suite = thresholds.threshold_suite(p)
        rec = {k: (v.as_dict() if v else None) for k, v in suite.items()}
        _emit(json.dumps(rec, indent=2) + "\n", args.output)
        return EXIT_OK
    bracket = tuple(args.bracket) if args.bracket else None
    res = thresholds.find_threshold(p, args.var, bracket, args.tol)
    _emit_record(res.as_dict(), args)
    return EXIT_OK


def _parse_strategies(text: str) -> list[StrategyConfig]:
    out = []
    for item in text.split(","):
        kind, _, q = item.strip().partition(":")
        out.append(StrategyConfig(kind, float(q) if q else 0.0))
    return out


def cmd_sweep(args) -> int:
    if args.steps < 2:
        raise ConfigError("--steps must be at least 2")
    base = params_from_args(args, args.var)
    try:
        strategies = _parse_strategies(args.strategies)
    except (DomainError, ValueError) as e:
        raise ConfigError(f"bad --strategies: {e}") from e
    curves = {thresholds.strategy_label(st): replace(base, strategy=st) for st in strategies}
    grid = np.linspace(args.start, args.stop, args.steps)
    rows = thresholds.sweep(args.var, grid, curves, workers=args.workers)
    if args.format == "json":  # csv unless asked
        _emit(json.dumps(rows, indent=2) + "\n", args.output)
    else:
        _emit(figures.write_csv(args.var, rows, curves, [f"sweep: {args.var}"]), args.output)
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.rounds < 1:
        raise ConfigError(f"--rounds must be at least 1, got {args.rounds}")
    p = params_from_args(args)
    kw = dict(workers=args.workers, qber_fraction=args.qber_fraction)
    if args.validate:
        v = montecarlo.validate_against_analytic(p, args.rounds, args.seed, args.k_sigma, **kw)
        _emit(json.dumps(_jsonable(v.as_dict()), indent=2) + "\n", args.output)
        return EXIT_OK if v.passed else EXIT_VALIDATION
    rep = montecarlo.simulate(p, args.rounds, args.seed, **kw)
    _emit(json.dumps(_jsonable(rep.as_dict()), indent=2) + "\n", args.output)
    return EXIT_OK


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, float) and not np.isfinite(x):
        return None
    return x


def cmd_reproduce(args) -> int:
    if args.figure not in figures.FIGURES:
        raise ConfigError(f"unknown figure {args.figure}; expected one of {figures.FIGURES}")
    text = figures.reproduce(args.figure)
    out = args.output
    if out is None:
        out = str(Path(os.environ.get(OUTPUT_DIR_ENV, ".")) / f"fig{args.figure}.csv")
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    Path(out).write_text(text)
    print(out)
    return EXIT_OK


COMMANDS = {
    "rate": cmd_rate,
    "threshold": cmd_threshold,
    "sweep": cmd_sweep,
    "simulate": cmd_simulate,
    "reproduce": cmd_reproduce,
}


def main(argv: list[str] | None = None) -> int:
    try:
        args = _parse(argv)
    except SystemExit as e:
        return int(e.code or 0)
    except (ConfigError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NoThresholdError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NO_THRESHOLD
    except DomainError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
