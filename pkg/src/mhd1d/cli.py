"""Command-line entry point: ``mhd1d {simulate,audit,sweep,verify}``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import SCENARIOS, ConfigError, parse_config, preset
from .records import fmt
from .scenarios import EXIT_ASSERT, EXIT_CONFIG, EXIT_OK, operator_audit, run_scenario, sweep

__all__ = ["main", "load_config"]


def load_config(source: str, overrides: dict | None = None):
    """A config file path, or the bare name of a scenario preset."""
    path = Path(source)
    if path.is_file():
        return parse_config(path.read_text(), overrides)
    if source in SCENARIOS:
        return parse_config(f"scenario = {source}\n", overrides)
    raise ConfigError(f"no config file {source!r} and no scenario of that name")


def _overrides(args) -> dict:
    out = {}
    if args.seed is not None:
        out["seed"] = args.seed
    if args.out is not None:
        out["out_dir"] = args.out
    return out


def _print_summary(summary: dict, quiet: bool) -> None:
    if quiet:
        return
    print(f"status,{summary.get('status', '')}")
    if "error" in summary:
        print(f"error,{summary['error']}")
    for c in summary.get("assertions", []):
        val = c["value"]
        if isinstance(val, (list, tuple)):
            val = ";".join(fmt(v) for v in val)
        elif val is None:
            val = ""
        elif not isinstance(val, str):
            val = fmt(val)
        thr = c["threshold"]
        if isinstance(thr, (list, tuple)):
            thr = ";".join(fmt(v) for v in thr)
        elif thr is None:
            thr = ""
        else:
            thr = fmt(thr)
        print(f"assert,{c['name']},{val},{thr},{'pass' if c['pass'] else 'fail'}")


def _cmd_simulate(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    code, summary = run_scenario(cfg, cfg.out_dir)
    _print_summary(summary, args.quiet)
    if not args.quiet and code != EXIT_CONFIG:
        print(f"output,{cfg.out_dir}")
    return code


def _cmd_audit(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    if cfg.scenario != "operator_audit":
        cfg = cfg.replace(scenario="operator_audit")
    try:
        code, summary = operator_audit(cfg, Path(cfg.out_dir))
    except ConfigError as e:
        code, summary = EXIT_CONFIG, {"status": "config_error", "error": str(e)}
    _print_summary(summary, args.quiet)
    return code


def _cmd_sweep(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    values = [v for v in args.values.split(",") if v.strip()]
    try:
        values = [float(v) for v in values]
    except ValueError:
        raise ConfigError(f"--values must be comma-separated numbers, got {args.values!r}") from None
    rows, text = sweep(cfg, args.axis, values, cfg.out_dir, workers=args.workers)
    if not args.quiet:
        sys.stdout.write(text)
    return EXIT_OK if all(r["exit_code"] == 0 for r in rows) else EXIT_ASSERT


def _cmd_verify(args) -> int:
    from .acceptance import run_all

    only = None
    if args.only:
        only = {int(x) for x in args.only.split(",") if x.strip()}
    echo = None if args.quiet else print
    results = run_all(seed=args.seed or 0, only=only, echo=echo)
    return EXIT_OK if all(r.passed for r in results) else EXIT_ASSERT


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory (overrides out_dir)")
    common.add_argument("--seed", type=int, help="seed for randomized audits")
    common.add_argument("--quiet", action="store_true", help="suppress stdout")

    p = argparse.ArgumentParser(prog="mhd1d", description="1-D MHD pseudo-spectral simulator and e-basis operator lab")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="run one scenario")
    s.add_argument("config", help="config file or scenario name")
    s.set_defaults(func=_cmd_simulate)

    a = sub.add_parser("audit", parents=[common], help="operator matrix audit")
    a.add_argument("config", help="config file or scenario name")
    a.set_defaults(func=_cmd_audit)

    w = sub.add_parser("sweep", parents=[common], help="parameter sweep")
    w.add_argument("config", help="config file or scenario name")
    w.add_argument("--axis", required=True, choices=["q", "eps", "N", "dt"])
    w.add_argument("--values", required=True, help="comma-separated values")
    w.add_argument("--workers", type=int, default=None, help="parallel processes")
    w.set_defaults(func=_cmd_sweep)

    v = sub.add_parser("verify", parents=[common], help="run the acceptance criteria")
    v.add_argument("--only", help="comma-separated criterion numbers")
    v.set_defaults(func=_cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        if not getattr(args, "quiet", False):
            print(f"status,config_error\nerror,{e}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
