"""Command line interface: ``threshnet analyze | synth | dfa``.

Exit codes: 0 success, 2 input/validation error, 3 numerical failure,
4 I/O error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import os
import sys
from typing import Optional, Sequence

import numpy as np

from ._validation import NumericalError, ValidationError
from .correlation import DEFAULT_MULTIPLIERS
from .dfa import dfa, write_dfa
from .market_data import write_prices, write_sectors
from .pipeline import DFA_SERIES, RunConfig, run_pipeline
from .synthetic import MarketSpec, Regime, generate_panel

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4

logger = logging.getLogger("threshnet")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _span(text: str) -> tuple[int, int]:
    try:
        a, b = text.split(":")
        return int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected START:END, got {text!r}") from None


def _regime(text: str) -> Regime:
    try:
        a, b, v = text.split(":")
        return Regime(int(a), int(b), float(v))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected START:END:VOL, got {text!r}") from None


def _jobs(text: str) -> int:
    if text == "auto":
        return os.cpu_count() or 1
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or 'auto', got {text!r}") from None


def _kinds(text: str) -> tuple[str, ...]:
    if text == "both":
        return ("static", "dynamic")
    if text not in ("static", "dynamic"):
        raise argparse.ArgumentTypeError("threshold must be static, dynamic or both")
    return (text,)


# keys accepted in the [analyze] section of a --config file
_CONFIG_PARSERS = {
    "sectors": str,
    "threshold": _kinds,
    "multipliers": _floats,
    "dfa_series": lambda s: [x.strip() for x in s.split(",") if x.strip()],
    "window": lambda s: [_span(w) for w in s.split(",") if w.strip()],
    "fit_range": _span,
    "top_m": int,
    "jobs": _jobs,
    "out": str,
}


def _read_config(path: str) -> dict:
    parser = configparser.ConfigParser()
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if not text.lstrip().startswith("["):
        text = "[analyze]\n" + text
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ValidationError(f"cannot parse config {path}: {exc}") from None
    if not parser.has_section("analyze"):
        return {}
    values = {}
    for key, raw in parser.items("analyze"):
        key = key.replace("-", "_")
        if key not in _CONFIG_PARSERS:
            raise ValidationError(f"unknown config key {key!r} in {path}")
        try:
            values[key] = _CONFIG_PARSERS[key](raw)
        except argparse.ArgumentTypeError as exc:
            raise ValidationError(f"config key {key!r}: {exc}") from None
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="threshnet", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="full pipeline on a price CSV")
    a.add_argument("prices")
    a.add_argument("--sectors")
    a.add_argument("--config", help="key = value file; flags override it")
    a.add_argument("--threshold", type=_kinds, help="static, dynamic or both (default both)")
    a.add_argument("--multipliers", type=_floats,
                   help=f"comma-separated (default {','.join(f'{m:g}' for m in DEFAULT_MULTIPLIERS)})")
    a.add_argument("--dfa-series", type=lambda s: [x for x in s.split(",") if x],
                   help=f"subset of {','.join(DFA_SERIES)}")
    a.add_argument("--window", type=_span, action="append", help="START:END, repeatable")
    a.add_argument("--fit-range", type=_span, help="DFA fit range SMALL:LARGE in days")
    a.add_argument("--top-m", type=int)
    a.add_argument("--jobs", type=_jobs, help="worker processes or 'auto' (default 1)")
    a.add_argument("--out")

    s = sub.add_parser("synth", help="write a synthetic price panel and sector map")
    s.add_argument("--n-stocks", type=int, default=50)
    s.add_argument("--n-days", type=int, default=2000)
    s.add_argument("--beta", type=float, default=1.0)
    s.add_argument("--n-sectors", type=int, default=1)
    s.add_argument("--gamma", type=float, default=0.0)
    s.add_argument("--sigma", type=float, default=1.0)
    s.add_argument("--regime", type=_regime, action="append", default=[], help="START:END:VOL, repeatable")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)

    d = sub.add_parser("dfa", help="DFA of a single-column CSV (empty cells are gaps)")
    d.add_argument("series")
    d.add_argument("--column", help="column name when the file has a header and several columns")
    d.add_argument("--fit-range", type=_span)
    d.add_argument("--crossover", action="store_true")
    d.add_argument("--out", help="directory for dfa_<name>.csv/.json")
    return parser


def _cmd_analyze(args) -> int:
    opts = _read_config(args.config) if args.config else {}
    flags = {
        "sectors": args.sectors, "threshold": args.threshold, "multipliers": args.multipliers,
        "dfa_series": args.dfa_series, "window": args.window, "fit_range": args.fit_range,
        "top_m": args.top_m, "jobs": args.jobs, "out": args.out,
    }
    opts.update({k: v for k, v in flags.items() if v is not None})
    if "out" not in opts:
        raise ValidationError("an output directory is required (--out)")
    config = RunConfig(
        input_prices=args.prices,
        output_dir=opts["out"],
        input_sectors=opts.get("sectors"),
        threshold_kinds=opts.get("threshold", ("static", "dynamic")),
        multipliers=opts.get("multipliers", DEFAULT_MULTIPLIERS),
        dfa_series=opts.get("dfa_series", DFA_SERIES),
        windows=opts.get("window", ()),
        fit_range=opts.get("fit_range"),
        top_m=opts.get("top_m", 4),
        parallelism=opts.get("jobs", 1),
    )
    manifest = run_pipeline(config)
    print(f"wrote {len(manifest['artifacts']) + 1} files to {config.output_dir}")
    return EXIT_OK


def _cmd_synth(args) -> int:
    spec = MarketSpec(
        n_stocks=args.n_stocks, n_days=args.n_days, market_beta=args.beta,
        n_sectors=args.n_sectors, sector_gamma=args.gamma, noise_sigma=args.sigma,
        regimes=tuple(args.regime), seed=args.seed,
    )
    panel = generate_panel(spec)
    os.makedirs(args.out, exist_ok=True)
    write_prices(panel, os.path.join(args.out, "prices.csv"))
    write_sectors(panel.sectors, os.path.join(args.out, "sectors.csv"))
    print(f"wrote {panel.n_stocks} stocks x {panel.n_days + 1} dates to {args.out}")
    return EXIT_OK


def _read_series(path: str, column: Optional[str]) -> np.ndarray:
    with open(path, encoding="utf-8-sig", newline="") as fh:
        rows = list(csv.reader(fh))
    # a blank line is an empty cell in a one-column file; only trailing ones are dropped
    while rows and not any(c.strip() for c in rows[-1]):
        rows.pop()
    if not rows:
        raise ValidationError(f"{path} is empty")

    def number(cell):
        try:
            return float(cell)
        except ValueError:
            return None

    header = None
    if any(c.strip() and number(c) is None for c in rows[0]):
        header, rows = [c.strip() for c in rows[0]], rows[1:]
    col = 0
    if column is not None:
        if header is None or column not in header:
            raise ValidationError(f"column {column!r} not found in {path}")
        col = header.index(column)
    elif max(len(r) for r in rows) > 1:
        raise ValidationError(f"{path} has {max(len(r) for r in rows)} columns; choose one with --column")
    values = []
    for r, row in enumerate(rows, start=2 if header else 1):
        cell = row[col].strip() if col < len(row) else ""
        if cell == "":
            values.append(np.nan)
            continue
        v = number(cell)
        if v is None:
            raise ValidationError(f"non-numeric value {cell!r} at ({r},{col + 1})")
        values.append(v)
    return np.array(values)


def _cmd_dfa(args) -> int:
    series = _read_series(args.series, args.column)
    result = dfa(series, fit_range=args.fit_range, crossover=args.crossover)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        name = args.column or os.path.splitext(os.path.basename(args.series))[0]
        write_dfa(result, os.path.join(args.out, f"dfa_{name}.csv"),
                  os.path.join(args.out, f"dfa_{name}.json"))
    print(json.dumps(result.to_dict(), sort_keys=True))
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"analyze": _cmd_analyze, "synth": _cmd_synth, "dfa": _cmd_dfa}[args.command]
    try:
        return handler(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
