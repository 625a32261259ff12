"""Command line entry point: ``urllc-codesign <subcommand> [options]``.

Exit status: 0 success, 1 validation failures, 2 bad config or arguments,
3 I/O errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .codesign import InfeasibleError
from .config import DEFAULT_CONFIG_PATH, ConfigError, default_config, load_config
from .experiments import format_rows, run_capacity, run_sweep_horizon, run_trace, run_tradeoff, write_rows
from .prediction import load_trace_csv
from .specfun import DomainError
from .validation import format_report, run_checks

log = logging.getLogger("urllc_codesign")


def _load(args):
    if args.config is not None:
        cfg = load_config(args.config)
    elif DEFAULT_CONFIG_PATH.exists():
        cfg = load_config(DEFAULT_CONFIG_PATH)
    else:
        cfg = default_config()
    changes = {}
    if args.seed is not None:
        changes["rng_seed"] = args.seed
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        changes["workers"] = args.workers
    if args.out is not None:
        changes["output_path"] = Path(args.out)
    return replace(cfg, **changes) if changes else cfg


def _link_params(cfg) -> str:
    link = cfg.scenario.link
    return f"data_fraction={link.data_fraction:g} snr_loss={link.snr_loss:g} (linear)"


def _emit(rows, cfg):
    # the CSV keeps its fixed columns, so the link parameters go to stderr
    print(f"# {_link_params(cfg)}", file=sys.stderr)
    if cfg.output_path is None:
        sys.stdout.write(format_rows(rows))
    else:
        write_rows(rows, cfg.output_path)
        log.info("wrote %d rows to %s", len(rows), cfg.output_path)


def _sweep_horizon(args):
    cfg = _load(args)
    _emit(run_sweep_horizon(replace(cfg, output_path=None)), cfg)
    return 0


def _tradeoff(args):
    cfg = _load(args)
    _emit(run_tradeoff(replace(cfg, output_path=None)), cfg)
    return 0


def _capacity(args):
    cfg = _load(args)
    _emit(run_capacity(replace(cfg, output_path=None)), cfg)
    return 0


def _validate(args):
    cfg = _load(args)
    checks = run_checks(cfg)
    report = format_report(checks) + f"# {_link_params(cfg)}\n"
    if cfg.output_path is not None:
        cfg.output_path.parent.mkdir(parents=True, exist_ok=True)
        cfg.output_path.write_text(report, encoding="utf-8")
    sys.stdout.write(report)
    return 0 if all(c.passed for c in checks) else 1


def _eval_trace(args):
    locations = load_trace_csv(args.trace)
    rows = run_trace(locations, args.horizons, args.threshold, args.slot_ms)
    if args.out is None:
        sys.stdout.write(format_rows(rows))
    else:
        write_rows(rows, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="urllc-codesign",
        description="Prediction and communication co-design experiments.",
    )
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", type=Path, help=f"TOML config (default: {DEFAULT_CONFIG_PATH.name})")
        sp.add_argument("--out", type=Path, help="output file (default: config 'output', else stdout)")
        sp.add_argument("--seed", type=int, help="overrides the config seed")
        sp.add_argument("--workers", type=int, help="threads for independent points")

    for name, fn, helptext in (
        ("sweep-horizon", _sweep_horizon, "error components versus prediction horizon"),
        ("tradeoff", _tradeoff, "co-design versus no prediction over delay bound or bandwidth"),
        ("capacity", _capacity, "cell capacity: worst-case bandwidth or exceedance probability"),
        ("validate", _validate, "run the oracle and invariant checks"),
    ):
        sp = sub.add_parser(name, help=helptext)
        common(sp)
        sp.set_defaults(func=fn)

    sp = sub.add_parser("eval-trace", help="empirical prediction error on a location trace")
    sp.add_argument("trace", type=Path, help="single-column CSV of positions (m)")
    sp.add_argument("--horizons", type=float, nargs="+", default=[10.0, 20.0, 50.0, 100.0], help="ms")
    sp.add_argument("--threshold", type=float, default=0.1, help="m")
    sp.add_argument("--slot-ms", type=float, default=1.0, help="trace sampling interval in ms")
    sp.add_argument("--out", type=Path)
    sp.set_defaults(func=_eval_trace)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ConfigError, DomainError, InfeasibleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
