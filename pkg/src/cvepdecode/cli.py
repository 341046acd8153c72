"""Command-line front end.

Subcommands: codes, simulate, decode, curve, sweep, stats. Results go to
--out (or stdout); diagnostics go to stderr. Exit codes: 0 success,
1 usage, 2 data error, 3 numerical failure. Every run with an --out file
writes a reproducibility stanza next to it (<out>.meta.json).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

from . import __version__
from .archive import read_archive, write_archive
from .codegen import default_code_set, load_codes, save_codes
from .errors import DataError, DegenerateSample, NumericalError
from .evaluate import (
    ALPHA,
    CURVE_CSV_HEADER,
    SWEEP_CSV_HEADER,
    DecoderBank,
    bandpass_sweep,
    canonical_tag,
    curve_csv_rows,
    decode_session,
    decoding_curve,
    filtered_session,
    sweep_csv_rows,
    wilcoxon_one_sided,
)
from .simulate import ForwardModel, synthesize_session

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="cvepdecode", description=__doc__)
    parser.add_argument("--config", help="JSON file with default flag values; flags win")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("codes", help="emit the modulated stimulus code subset")
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--out", help="output file (default: stdout)")

    p = sub.add_parser("simulate", help="write a synthetic session archive")
    p.add_argument("--snr", type=float, default=math.inf,
                   help="signal-to-noise ratio in dB (inf = noiseless, -inf = pure noise)")
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", choices=["white", "pink"], default="white")
    p.add_argument("--duration", type=float, default=31.5)
    p.add_argument("--n-codes", type=int, default=20)
    p.add_argument("--codes", dest="codes_file", help="read codes from file instead")
    p.add_argument("--out", required=True)

    p = sub.add_parser("decode", help="per-trial predictions for one method")
    p.add_argument("--method", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--duration", type=float, default=31.5)
    p.add_argument("--out", help="predictions CSV (default: stdout)")

    p = sub.add_parser("curve", help="decoding curve over trial durations")
    p.add_argument("--method", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", help="curve CSV (default: stdout)")

    p = sub.add_parser("sweep", help="bandpass cutoff sweep")
    p.add_argument("--axis", choices=["highpass", "lowpass"], required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--methods", default="cca_e1,cca_ec,umm_t11,umm_tcw")
    p.add_argument("--out", help="sweep CSV (default: stdout)")

    p = sub.add_parser("stats", help="one-sided paired Wilcoxon between two curves")
    p.add_argument("--a", required=True, help="curve CSV, tested as the larger side")
    p.add_argument("--b", required=True)
    p.add_argument("--out", help="JSON report (default: stdout)")
    return parser


def _apply_config(parser: _Parser, argv: list[str]) -> argparse.Namespace:
    probe = _Parser(add_help=False)
    probe.add_argument("--config")
    known, _ = probe.parse_known_args(argv)
    args = parser.parse_args(argv)
    if known.config:
        try:
            with open(known.config) as fh:
                defaults = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"unreadable config file: {exc}") from exc
        explicit = _explicit_dests(argv)
        for key, value in defaults.items():
            dest = key.replace("-", "_")
            if hasattr(args, dest) and dest not in explicit:
                setattr(args, dest, value)
    return args


def _explicit_dests(argv: list[str]) -> set[str]:
    dests = set()
    for token in argv:
        if token.startswith("--"):
            dests.add(token[2:].split("=", 1)[0].replace("-", "_"))
    return dests


def _emit(text: str, out_path, args) -> None:
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
        _write_meta(out_path, args)
    else:
        sys.stdout.write(text)


def _write_meta(out_path, args) -> None:
    config = {k: v for k, v in vars(args).items() if k not in ("command",)}
    stanza = {
        "tool": "cvepdecode",
        "version": __version__,
        "command": args.command,
        "config": {k: (None if v is None else v if not isinstance(v, float) or math.isfinite(v) else str(v)) for k, v in config.items()},
    }
    with open(str(out_path) + ".meta.json", "w") as fh:
        json.dump(stanza, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _cmd_codes(args) -> int:
    codes = default_code_set(args.n)
    text = "".join(c.to_line() + "\n" for c in codes)
    _emit(text, args.out, args)
    return EXIT_OK


def _snr_db_to_ratio(db: float) -> float:
    if math.isinf(db):
        return math.inf if db > 0 else 0.0
    return 10.0 ** (db / 10.0)


def _cmd_simulate(args) -> int:
    codes = load_codes(args.codes_file) if args.codes_file else default_code_set(args.n_codes)
    model = ForwardModel(snr=_snr_db_to_ratio(args.snr), noise=args.noise)
    session = synthesize_session(
        args.runs, model, seed=args.seed, codes=codes, dur_s=args.duration
    )
    write_archive(session, args.out)
    _write_meta(args.out, args)
    return EXIT_OK


def _cmd_decode(args) -> int:
    session = read_archive(args.infile)
    tag = canonical_tag(args.method)
    bank = DecoderBank(session.codes, max_dur_s=args.duration)
    outcomes = decode_session(session, tag, args.duration, bank)
    lines = ["trial,true_label,predicted,correct,confidence"]
    for i, (trial, outcome) in enumerate(zip(session.trials, outcomes)):
        true = trial.code_index_true
        correct = "" if true is None else int(outcome.label == true)
        true_s = "" if true is None else str(true)
        lines.append(f"{i},{true_s},{outcome.label},{correct},{outcome.confidence:.6f}")
    _emit("\n".join(lines) + "\n", args.out, args)
    return EXIT_OK


def _cmd_curve(args) -> int:
    session = read_archive(args.infile)
    tag = canonical_tag(args.method)
    max_dur = session.trials[0].n_samples / session.fs
    durations = None
    if max_dur < 31.5:
        from .evaluate import DEFAULT_DURATIONS_S
        durations = tuple(d for d in DEFAULT_DURATIONS_S if d <= max_dur + 1e-9)
    curve = decoding_curve(session, tag, durations_s=durations)
    seed = session.seed if session.seed is not None else ""
    text = CURVE_CSV_HEADER + "\n" + "\n".join(curve_csv_rows(curve, seed)) + "\n"
    _emit(text, args.out, args)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    session = read_archive(args.infile)
    tags = [canonical_tag(t) for t in args.methods.split(",") if t.strip()]
    duration = session.trials[0].n_samples / session.fs
    grid = bandpass_sweep(
        lambda hp, lp: filtered_session(session, hp, lp),
        tags,
        args.axis,
        duration_s=duration,
    )
    text = SWEEP_CSV_HEADER + "\n" + "\n".join(sweep_csv_rows(grid)) + "\n"
    _emit(text, args.out, args)
    return EXIT_OK


def _read_curve_csv(path) -> dict:
    points = {}
    try:
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                key = (row["duration_s"], row.get("seed", ""))
                points[key] = float(row["accuracy"])
    except (OSError, KeyError, ValueError) as exc:
        raise DataError(f"unreadable curve CSV {path}: {exc}") from exc
    if not points:
        raise DataError(f"no rows in curve CSV {path}")
    return points


def _cmd_stats(args) -> int:
    pa = _read_curve_csv(args.a)
    pb = _read_curve_csv(args.b)
    keys = sorted(set(pa) & set(pb))
    if not keys:
        raise DataError("curves share no (duration, seed) points")
    a = [pa[k] for k in keys]
    b = [pb[k] for k in keys]
    statistic, p = wilcoxon_one_sided(a, b)
    report = {
        "test": "one-sided paired Wilcoxon signed-rank (H1: a > b)",
        "n_pairs": len(keys),
        "statistic": statistic,
        "p_value": p,
        "alpha": ALPHA,
        "significant": bool(p < ALPHA),
    }
    _emit(json.dumps(report, indent=2, sort_keys=True) + "\n", args.out, args)
    return EXIT_OK


_COMMANDS = {
    "codes": _cmd_codes,
    "simulate": _cmd_simulate,
    "decode": _cmd_decode,
    "curve": _cmd_curve,
    "sweep": _cmd_sweep,
    "stats": _cmd_stats,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        args = _apply_config(parser, argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DegenerateSample as exc:
        print(f"degenerate sample: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
