"""Command-line entry point.

Exit codes: 0 success, 1 domain failure (failed certificate, singular
coefficient matrix, incomplete generated POVM), 2 usage or config error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .algebra import DynTomoError, span_rank
from .experiment import ConfigError, ExperimentConfig, run_pipeline, run_sweep
from .measurement import BUILTIN_NAMES, OperatorSet, builtin, completeness_residual, is_ic, is_sic, sic_overlaps
from .tomography import verify_theorem

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _fmt(x) -> str:
    return f"{x:.12g}"


def _load_config(path: str) -> ExperimentConfig:
    try:
        obj = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON: {exc}") from exc
    seed = os.environ.get("TOMO_SEED")
    if seed is not None:
        try:
            seed = int(seed)
        except ValueError:
            raise ConfigError("TOMO_SEED", f"must be an integer, got {seed!r}") from None
        if seed < 0:
            raise ConfigError("TOMO_SEED", "must be non-negative")
    return ExperimentConfig.from_dict(obj, master_seed=seed)


def cmd_verify(args) -> int:
    cert = verify_theorem(args.theorem)
    if args.json:
        print(json.dumps(cert.to_dict(), indent=2))
    else:
        print(cert.format_text())
    return EXIT_OK if cert.passed else EXIT_FAIL


def cmd_run(args) -> int:
    cfg = _load_config(args.config)
    report = run_pipeline(cfg)
    Path(args.out).write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    if not report.ok:
        print(f"error: {report.error['type']}: {report.error['message']}", file=sys.stderr)
        return EXIT_FAIL
    agg = report.aggregate()
    print(
        f"trials={agg['trials']} mean_fidelity={agg['mean_fidelity']:.6f} "
        f"min_fidelity={agg['min_fidelity']:.6f} cond(Gamma)={_fmt(agg['condition'])} report={args.out}"
    )
    return EXIT_OK


def _parse_shots(text: str) -> list[int]:
    try:
        shots = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated positive integers, got {text!r}") from None
    if not shots or any(s < 1 for s in shots):
        raise argparse.ArgumentTypeError(f"expected comma-separated positive integers, got {text!r}")
    return shots


def cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    result, reports = run_sweep(cfg, args.shots)
    failed = next((r for r in reports if not r.ok), None)
    if failed is not None:
        print(f"error: {failed.error['type']}: {failed.error['message']}", file=sys.stderr)
        return EXIT_FAIL
    text = result.to_csv()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def inspect_set(s: OperatorSet) -> dict:
    mins = [e.min_eigenvalue for e in s.effects]
    d = s.dim
    resid = completeness_residual(s)
    info = {
        "dim": d,
        "n_effects": len(s),
        "effects": [{"label": e.label, "min_eigenvalue": m} for e, m in zip(s.effects, mins)],
        "positive": bool(min(mins) >= -1e-9),
        "completeness_residual": resid,
        "complete": bool(resid <= 1e-9),
        "span_rank": span_rank(s.mats),
        "dim_squared": d * d,
        "ic": is_ic(s),
        "sic": is_sic(s),
    }
    if len(s) > 1:
        ov = sic_overlaps(s)
        info["overlap_min"] = float(ov.min())
        info["overlap_max"] = float(ov.max())
    return info


def cmd_inspect(args) -> int:
    try:
        if args.file:
            s = OperatorSet.from_json(json.loads(Path(args.file).read_text()))
        else:
            s = builtin(args.name)
    except (OSError, ValueError, DynTomoError) as exc:
        print(f"error: cannot load operator set: {exc}", file=sys.stderr)
        return EXIT_USAGE
    info = inspect_set(s)
    if args.json:
        print(json.dumps(info, indent=2))
        return EXIT_OK
    yn = {True: "yes", False: "no"}
    print(f"{info['n_effects']} effects, dimension {info['dim']}")
    for e in info["effects"]:
        print(f"  {e['label']}: min eigenvalue {_fmt(e['min_eigenvalue'])}")
    print(f"positivity: {yn[info['positive']]}")
    print(f"completeness: {yn[info['complete']]} (residual {_fmt(info['completeness_residual'])})")
    print(f"span rank: {info['span_rank']} of {info['dim_squared']}")
    print(f"IC: {yn[info['ic']]}")
    sic_line = f"SIC: {yn[info['sic']]}"
    if "overlap_min" in info:
        sic_line += f" (overlaps {_fmt(info['overlap_min'])} .. {_fmt(info['overlap_max'])}, target {_fmt(1 / (info['dim'] + 1))})"
    print(sic_line)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dyntomo", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="check the proof obligations of one theorem configuration")
    v.add_argument("--theorem", type=int, choices=(2, 3, 4), required=True)
    v.add_argument("--json", action="store_true")
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("run", help="run a configured experiment and write a JSON report")
    r.add_argument("--config", required=True)
    r.add_argument("--out", default="report.json")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="sweep shot counts and emit CSV statistics")
    s.add_argument("--config", required=True)
    s.add_argument("--shots", type=_parse_shots, required=True, help="comma-separated shot counts")
    s.add_argument("--out")
    s.set_defaults(func=cmd_sweep)

    i = sub.add_parser("inspect", help="analyse a builtin or JSON operator set")
    src = i.add_mutually_exclusive_group(required=True)
    src.add_argument("name", nargs="?", choices=BUILTIN_NAMES)
    src.add_argument("--file")
    i.add_argument("--json", action="store_true")
    i.set_defaults(func=cmd_inspect)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DynTomoError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
