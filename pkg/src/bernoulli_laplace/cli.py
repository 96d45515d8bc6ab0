"""Command-line entry point.

    bl-lab verify --out report.csv
    bl-lab profile --regime critical --alpha 1 --n 10000 --theta-min 0 --theta-max 0 --theta-steps 1

Exit codes: 0 all checks passed, 1 a check failed, 2 usage or I/O error,
3 numeric-integrity error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from .config import SUITES, ExperimentConfig, config_from_dict, load_config
from .errors import ContractError, DomainError, NumericIntegrityError
from .report import atomic_write, render
from .suites import exit_status, run_suites

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("bernoulli_laplace")

# subcommand -> suites it runs
COMMAND_SUITES = {
    "profile": ("profile",),
    "moments": ("moments", "stationarity"),
    "couplings": ("couplings",),
    "asymptotics": ("asymptotics",),
    "verify": SUITES,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _ladder(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(float(x)) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config file; flags override its values")
    common.add_argument("--n", type=_ladder, help="n ladder, comma separated (e.g. 512,2048,8192)")
    common.add_argument("--k", type=int, help="fix k instead of the regime's canonical choice")
    common.add_argument("--regime", choices=("large", "critical", "small"))
    common.add_argument("--alpha", type=float, help="k^2/n limit for the critical regime")
    common.add_argument("--time-form", choices=("quarter-log-n", "half-log-k"))
    common.add_argument("--theta-min", type=float)
    common.add_argument("--theta-max", type=float)
    common.add_argument("--theta-steps", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--samples", type=int, help="Monte Carlo sample count")
    common.add_argument("--out", help="report path (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--workers", type=int, help="worker threads")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="bl-lab", description="Bernoulli-Laplace urn limit-profile verification")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMAND_SUITES:
        p = sub.add_parser(name, parents=[common], help=f"run the {name} checks")
        if name == "verify":
            p.add_argument("--only", help="comma-separated subset of suites (empty string runs nothing)")
    return parser


def effective_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    overrides: dict = {}
    if args.command == "verify":
        suites = COMMAND_SUITES["verify"]
        if args.only is not None:
            suites = tuple(s.strip() for s in args.only.split(",") if s.strip())
        overrides["suites"] = suites
    else:
        overrides["suites"] = COMMAND_SUITES[args.command]
    if args.command == "profile":
        overrides["all_regimes"] = False
    if args.regime or args.alpha is not None or args.time_form:
        regime = {"kind": args.regime or cfg.regime.kind}
        if args.alpha is not None:
            regime["alpha"] = args.alpha
        if args.time_form:
            regime["time_form"] = args.time_form
        overrides["regime"] = regime
    grid = {}
    for key, val in (("min", args.theta_min), ("max", args.theta_max), ("steps", args.theta_steps)):
        if val is not None:
            grid[key] = val
    if grid:
        base = cfg.theta_grid
        grid.setdefault("min", base.lo)
        grid.setdefault("max", base.hi)
        grid.setdefault("steps", base.steps)
        overrides["theta_grid"] = grid
    if args.n:
        overrides["n_ladder"] = list(args.n)
    for key in ("k", "seed", "samples", "out", "format", "workers"):
        val = getattr(args, key)
        if val is not None:
            overrides["output" if key == "out" else key] = val
    return config_from_dict(overrides, cfg)


def _sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".config.json")


def write_outputs(cfg: ExperimentConfig, rows) -> None:
    """Report to cfg.output (or stdout); the effective config goes to a JSON sidecar."""
    text = render(rows, cfg.format)
    if cfg.output is None:
        sys.stdout.write(text)
        return
    path = Path(cfg.output)
    atomic_write(_sidecar(path), json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    atomic_write(path, text)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = effective_config(args)
    except (ContractError, DomainError, ValueError, TypeError) as exc:
        print(f"bl-lab: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        start = time.perf_counter()
        rows = run_suites(cfg)
        log.info("ran %d checks in %.1f s", len(rows), time.perf_counter() - start)
        write_outputs(cfg, rows)
    except NumericIntegrityError as exc:
        print(f"bl-lab: numeric integrity failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"bl-lab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ContractError, DomainError) as exc:
        print(f"bl-lab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for row in rows:
        if not row.passed:
            print(f"FAIL {row.suite}/{row.label} n={row.n} theta={row.theta}: "
                  f"{row.gap if row.gap is not None else row.value:.6g} > {row.tolerance:.6g}", file=sys.stderr)
    return exit_status(rows)

