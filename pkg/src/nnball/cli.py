"""Command line entry point: ``nnball <subcommand> [options]``.

Exit codes: 0 when every asserted check passes, 2 when a check fails,
1 on usage or configuration errors.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import logging
import os
import sys
import time
from typing import Optional, Sequence

from . import __version__
from ._accel import backend
from .conditions import verify_conditions
from .config import ConfigError, build_config, config_hash, config_to_dict, parse_model
from .report import atomic_write, dump_json, reports_to_csv, reports_to_summary
from .selfcheck import verify_kernels
from .simulate import (
    ExperimentConfig,
    substream_seed,
    verify_factorial_moments,
    verify_gumbel,
    verify_mean_bound,
    verify_pit,
    verify_poisson_count,
    verify_poissonized_tail,
    verify_tail_bound,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger("nnball")

SUBCOMMANDS = {
    "gumbel": "gumbel",
    "poisson-count": "poisson_count",
    "tail-bound": "tail_bound",
    "poissonized-tail": "poissonized_tail",
    "mean-bound": "mean_bound",
    "moments": "factorial_moments",
    "conditions": "conditions",
    "pit": "pit",
    "all": None,
}

VERIFIERS = {
    "gumbel": verify_gumbel,
    "poisson_count": verify_poisson_count,
    "tail_bound": verify_tail_bound,
    "poissonized_tail": verify_poissonized_tail,
    "mean_bound": verify_mean_bound,
    "factorial_moments": verify_factorial_moments,
    "pit": verify_pit,
    "conditions": verify_conditions,
    "kernels": verify_kernels,
}

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2

PIT_MODELS = ("uniform1d", "power1d:theta=2", "mirrorpower1d:theta=2", "uniformsquare2d",
              "gaussian:d=1,sigma=1", "gaussian:d=2,sigma=1")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _number_list(text: str) -> list:
    out = []
    for tok in filter(None, (t.strip() for t in text.replace(" ", ",").split(","))):
        try:
            v = float(tok)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {tok!r}") from None
        out.append(int(v) if v.is_integer() else v)
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _u64(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML run configuration")
    common.add_argument("--seed", type=_u64, metavar="U64", help="master seed")
    common.add_argument("--n", type=_number_list, metavar="LIST", help="sample sizes, comma separated")
    common.add_argument("--y", type=_number_list, metavar="LIST", help="thresholds, comma separated")
    common.add_argument("--trials", type=_positive_int, metavar="M", help="Monte Carlo replications")
    common.add_argument("--model", metavar="NAME", help='model spec, e.g. "power1d:theta=2"')
    common.add_argument("--out", metavar="DIR", help="output directory (default $NNBALL_OUT or ./nnball_out)")
    common.add_argument("--threads", type=_positive_int, metavar="K",
                        help="worker threads (default: CPU count); never changes results")
    common.add_argument("-q", "--quiet", action="store_true", help="only print failures")

    parser = _Parser(prog="nnball", description="Nearest-neighbor-ball probability experiments.")
    parser.add_argument("--version", action="version", version=f"nnball {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND", parser_class=_Parser)
    sub.required = True
    helps = {
        "gumbel": "KS distance of the centered maximum to the Gumbel law",
        "poisson-count": "exceedance counts against Poisson",
        "tail-bound": "fixed-n tail probability against the universal bound",
        "poissonized-tail": "tail probability for Poisson sample size",
        "mean-bound": "mean of the positive part and the Gumbel mean",
        "moments": "factorial moments of exceedance counts",
        "conditions": "density condition probes",
        "pit": "probability integral transform uniformity",
        "all": "full acceptance run with a fixed seed schedule",
    }
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def _single_config(args, experiment: str) -> ExperimentConfig:
    raw = {}
    if args.config:
        try:
            with open(args.config, "rb") as fh:
                raw = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config: no such file: {args.config}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config: malformed TOML: {exc}") from None
    if "experiment" in raw and raw["experiment"].replace("-", "_") not in (experiment, "moments"):
        log.warning("config experiment %r overridden by subcommand", raw["experiment"])
    raw["experiment"] = experiment
    if experiment == "poissonized_tail":
        raw.setdefault("mode", "poissonized")
    for key, attr in (("seed", "seed"), ("n_values", "n"), ("y_grid", "y"),
                      ("trials", "trials"), ("model", "model"), ("threads", "threads")):
        value = getattr(args, attr)
        if value is not None:
            raw[key] = value
    raw.setdefault("threads", os.cpu_count() or 1)
    return build_config(raw)


def run_experiment(config: ExperimentConfig) -> list:
    return [VERIFIERS[config.experiment](config)]


def all_schedule(seed: int, trials: Optional[int] = None, threads: int = 1) -> list:
    """The acceptance runs in their fixed order.  Each item draws its own derived seed."""
    items = []

    def add(experiment, model, n_values, y_grid=(0.0,), m=None, checks=None, **kw):
        i = len(items)
        cfg = ExperimentConfig(
            model=parse_model(model), n_values=tuple(n_values), y_grid=tuple(y_grid),
            trials=trials or m or 1, seed=substream_seed(seed, 0, i, "all"),
            experiment=experiment, threads=threads,
            mode="poissonized" if experiment == "poissonized_tail" else "fixed_n", **kw)
        items.append((cfg, checks))

    for model in ("uniform1d", "uniformsquare2d", "gaussian:d=1,sigma=1", "power1d:theta=2"):
        add("tail_bound", model, (64, 256, 1024), (0, 1, 2, 3, 4), 5000)
    for model in ("uniform1d", "uniformsquare2d"):
        add("gumbel", model, (64, 256, 1024, 4096), (), 2000)
    add("poisson_count", "uniform1d", (4096,), (0, 1), 5000)
    add("poissonized_tail", "uniform1d", (256, 1024), (2, 3, 4), 5000)
    add("mean_bound", "uniform1d", (4096,), (), 5000)
    add("factorial_moments", "uniform1d", (1024, 4096), (0,), 10_000)
    add("conditions", "uniform1d", (2,), checks=("int", "doubling", "convex_half", "cone"),
        condition_trials=100_000, delta=0.05, cone_a=(0.01, 0.1))
    add("conditions", "uniformsquare2d", (2,), checks=("doubling",), condition_trials=100_000)
    add("conditions", "power1d:theta=3", (2,), checks=("convex_half",), condition_trials=100_000)
    for model in PIT_MODELS:
        add("kernels", model, (2,))
    for model in PIT_MODELS:
        add("pit", model, (2,), pit_m=10_000)
    return items


def run_all(items) -> list:
    reports = []
    for cfg, checks in items:
        t0 = time.perf_counter()
        if cfg.experiment == "conditions":
            rep = verify_conditions(cfg, checks)
        else:
            rep = VERIFIERS[cfg.experiment](cfg)
        log.info("%s %s: %.1fs", cfg.experiment, cfg.model.label, time.perf_counter() - t0)
        reports.append(rep)
    return reports


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def write_outputs(out_dir: str, reports, effective: dict, seed: int, started: str,
                  command: str) -> bool:
    paths = {name: os.path.join(out_dir, name) for name in ("report.csv", "summary.json", "manifest.json")}
    summary = reports_to_summary(reports)
    passed = summary["pass"]
    summary["exit_code"] = EXIT_OK if passed else EXIT_FAIL
    atomic_write(paths["report.csv"], reports_to_csv(reports))
    atomic_write(paths["summary.json"], dump_json(summary))
    manifest = {
        "artifact": "nnball",
        "version": __version__,
        "command": command,
        "backend": backend(),
        "seed": seed,
        "config_hash": config_hash(effective),
        "effective_config": effective,
        "started": started,
        "finished": _now(),
        "outputs": {k: os.path.abspath(v) for k, v in paths.items()},
    }
    atomic_write(paths["manifest.json"], dump_json(manifest))
    return passed


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    started = _now()
    out_dir = args.out or os.environ.get("NNBALL_OUT") or "nnball_out"
    try:
        if args.command == "all":
            given = [f"--{k}" for k in ("config", "n", "y", "model") if getattr(args, k) is not None]
            if given:
                raise ConfigError(f"{given[0]}: not accepted by 'all'; it runs a fixed schedule")
            seed = 0 if args.seed is None else args.seed
            threads = args.threads or os.cpu_count() or 1
            items = all_schedule(seed, args.trials, threads)
            effective = {"command": "all", "seed": seed, "trials": args.trials, "threads": threads,
                         "items": [dict(config_to_dict(c), checks=list(ch or ())) for c, ch in items]}
            reports = run_all(items)
        else:
            config = _single_config(args, SUBCOMMANDS[args.command])
            seed = config.seed
            effective = dict(config_to_dict(config), command=args.command)
            reports = run_experiment(config)
    except ConfigError as exc:
        print(f"nnball: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    passed = write_outputs(out_dir, reports, effective, seed, started, args.command)
    for rep in reports:
        if rep.passed and args.quiet:
            continue
        print(f"{'PASS' if rep.passed else 'FAIL'}  {rep.experiment:<18} {rep.model}")
        for note in rep.notes:
            print(f"      note: {note}")
    print(f"{'all checks passed' if passed else 'some checks FAILED'}; outputs in {os.path.abspath(out_dir)}")
    return EXIT_OK if passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
