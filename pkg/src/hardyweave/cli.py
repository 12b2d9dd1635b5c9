"""Command-line front end.

Exit codes: 0 success, 1 usage or parse error, 2 physics gate failure
(cancellation failed, empty post-selection, paradox verdict false).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from collections.abc import Sequence

import numpy as np

from .analysis import conditional_state, fit_loglog_slope, noise_ratios, scan_alpha
from .dsl import compile_circuit, parse_circuit, parse_complex, run_compiled
from .errors import ConfigError, HardyweaveError, ParseError, PhysicsGateError, UnsupportedParam
from .fock import QuantumState, prune
from .pipeline import (
    DEFAULT_ALPHA,
    DEFAULT_BETA,
    DEFAULT_GAMMA,
    DEFAULT_PUMP_N_MAX,
    DEFAULT_Q,
    DEFAULT_TOL,
    LaserConfig,
    run_full,
)

SCHEMA_VERSION = "1"
EXIT_OK, EXIT_USAGE, EXIT_PHYSICS = 0, 1, 2

SCAN_COLUMNS = (
    "index", "alpha", "beta", "gamma_re", "gamma_im", "q_re", "q_im", "ratio_triple", "ratio_two_pair", "p_dd",
)

# stage name in the pipeline -> label in reports
HARDY_STAGES = (
    ("hardy", "hardy_state"),
    ("final_signal", "signal_side_split"),
    ("final_idler", "idler_side_split"),
    ("final", "both_sides_split"),
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _complex_arg(text: str) -> complex:
    try:
        return parse_complex(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid complex number {text!r}") from None


def _cx(z: complex) -> dict:
    z = complex(z)
    return {"re": z.real, "im": z.imag}


def _num(x: float | None):
    if x is None or not math.isfinite(x):
        return None
    return x


def _basis_label(state: QuantumState, occ) -> str:
    parts = [m if n == 1 else f"{m}^{n}" for m, n in zip(state.modes, occ) if n]
    return ",".join(parts) if parts else "vacuum"


def _amplitudes(state: QuantumState) -> list[dict]:
    state, _ = prune(state)
    rows = [(_basis_label(state, occ), amp) for occ, amp in state.items()]
    return [{"basis": label, "amplitude": _cx(amp)} for label, amp in sorted(rows)]


def _emit(record: dict, out) -> None:
    out.write(json.dumps(record, indent=2, allow_nan=False) + "\n")


def _fmt_c(z: complex) -> str:
    return f"{z.real:+.12f}{z.imag:+.12f}i"


def _gate_record(command: str, inputs: dict, err: HardyweaveError) -> dict:
    error = {"type": type(err).__name__, "stage": err.stage, "message": str(err)}
    if hasattr(err, "residual"):
        error["residual"] = _num(err.residual)
    return {"schema_version": SCHEMA_VERSION, "command": command, "inputs": inputs, "status": "rejected", "error": error}


# --- hardy ---------------------------------------------------------------------


def cmd_hardy(args, out, err) -> int:
    inputs = {
        "alpha": _cx(args.alpha),
        "beta": _cx(args.beta),
        "gamma": _cx(args.gamma),
        "q": _cx(args.q),
        "pump_n_max": args.pump_n_max,
        "tol": args.tol,
    }
    try:
        cfg = LaserConfig(args.alpha, args.beta, args.gamma, args.pump_n_max)
    except ConfigError as exc:
        raise UsageError(str(exc)) from None
    try:
        report = run_full(cfg, args.q, tol=args.tol)
    except PhysicsGateError as exc:
        where = f" at stage {exc.stage!r}" if exc.stage else ""
        err.write(f"rejected{where}: {type(exc).__name__}: {exc}\n")
        if args.format == "json":
            _emit(_gate_record("hardy", inputs, exc), out)
        return EXIT_PHYSICS

    signal_side, idler_side = report.stage("final_signal"), report.stage("final_idler")
    amp_dsvi = abs(signal_side.amplitude({"d_S": 1, "v_I": 1}))
    amp_vsdi = abs(idler_side.amplitude({"v_S": 1, "d_I": 1}))
    p_dd = report.detection_table[("d_S", "d_I")]
    verdict = report.uu_amplitude < 1e-9 and amp_dsvi < 1e-9 and amp_vsdi < 1e-9 and p_dd > 0
    partner_s = conditional_state(signal_side, "d_S")
    partner_i = conditional_state(idler_side, "d_I")
    noise = noise_ratios(cfg, args.q)
    table = {f"{s},{i}": p for (s, i), p in report.detection_table.items()}

    if args.format == "json":
        results = {
            "condition5_residual": _num(report.condition5_residual),
            "cancellation_residual": report.cancellation_residual,
            "factorization_residual": report.factorization_residual,
            "stages": {label: _amplitudes(report.stage(name)) for name, label in HARDY_STAGES},
            "detection_table": table,
            "partner_after_d_S": _amplitudes(partner_s),
            "partner_after_d_I": _amplitudes(partner_i),
            "noise": {
                "pair_amp": noise.pair_amp,
                "triple_amp": noise.triple_amp,
                "two_pair_amp": noise.two_pair_amp,
                "ratio_triple": _num(noise.ratio_triple),
                "ratio_two_pair": _num(noise.ratio_two_pair),
            },
            "paradox": {
                "amp_uu": report.uu_amplitude,
                "amp_dSvI": amp_dsvi,
                "amp_vSdI": amp_vsdi,
                "p_dd": p_dd,
                "verdict": bool(verdict),
            },
        }
        _emit({"schema_version": SCHEMA_VERSION, "command": "hardy", "inputs": inputs, "results": results}, out)
    else:
        out.write(f"condition (alpha*beta = 2*q*gamma) residual: {report.condition5_residual:.3e}\n")
        out.write(f"|u_S u_I> residual after post-selection:   {report.cancellation_residual:.3e}\n")
        for name, label in HARDY_STAGES:
            out.write(f"\n[{label}]\n")
            for row in _amplitudes(report.stage(name)):
                amp = complex(row["amplitude"]["re"], row["amplitude"]["im"])
                out.write(f"  {row['basis']:<10} {_fmt_c(amp)}\n")
        out.write("\n[detection probabilities]\n")
        for key, p in table.items():
            out.write(f"  {key:<10} {p:.12f}\n")
        out.write(f"\n[noise] triple/pair = {noise.ratio_triple:.6g}, two-pair/pair = {noise.ratio_two_pair:.6g}\n")
        out.write(f"\npartner after a d_S click: {', '.join(r['basis'] for r in _amplitudes(partner_s))}\n")
        out.write(f"partner after a d_I click: {', '.join(r['basis'] for r in _amplitudes(partner_i))}\n")
        out.write(f"P(d_S d_I) = {p_dd:.12f}\n")
        out.write(f"paradox verdict: {'holds' if verdict else 'fails'}\n")
    return EXIT_OK if verdict else EXIT_PHYSICS


# --- run -----------------------------------------------------------------------


def cmd_run(args, out, err) -> int:
    path = args.file
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    try:
        circuit = parse_circuit(text)
        compiled = compile_circuit(circuit, cutoff=args.cutoff)
    except ParseError as exc:
        if exc.span is not None:
            err.write(f"{path}:{exc.span.line}:{exc.span.column}: {type(exc).__name__}: {exc.message}\n")
        else:
            err.write(f"{path}: {type(exc).__name__}: {exc.message}\n")
        return EXIT_USAGE
    except UnsupportedParam as exc:
        err.write(f"{path}: UnsupportedParam: {exc}\n")
        return EXIT_USAGE

    inputs = {"file": path, "cutoff": args.cutoff, "emit_stages": args.emit_stages}
    try:
        result = run_compiled(compiled)
    except PhysicsGateError as exc:
        err.write(f"rejected: {type(exc).__name__}: {exc}\n")
        if args.format == "json":
            _emit(_gate_record("run", inputs, exc), out)
        return EXIT_PHYSICS

    if args.format == "json":
        results = {
            "elements": {kind: circuit.count(kind) for kind in sorted({e.kind for e in circuit.elements})},
            "detectors": list(compiled.detectors),
            "condition5_residuals": [_num(r) for r in result.condition5_residuals],
            "detection_table": result.detection_table,
        }
        if args.emit_stages:
            results["stages"] = [{"stage": name, "amplitudes": _amplitudes(s)} for name, s in result.stage_states]
        _emit({"schema_version": SCHEMA_VERSION, "command": "run", "inputs": inputs, "results": results}, out)
    else:
        if args.emit_stages:
            for name, state in result.stage_states:
                out.write(f"[{name}]\n")
                for row in _amplitudes(state):
                    amp = complex(row["amplitude"]["re"], row["amplitude"]["im"])
                    out.write(f"  {row['basis']:<24} {_fmt_c(amp)}\n")
            out.write("\n")
        out.write("[detection probabilities]\n")
        for key, p in result.detection_table.items():
            out.write(f"  {key:<16} {p:.12f}\n")
    return EXIT_OK


# --- scan ----------------------------------------------------------------------


def _grid(args) -> list[float]:
    if args.values is not None:
        try:
            values = [float(v) for v in args.values.split(",") if v.strip()]
        except ValueError:
            raise UsageError(f"--values must be comma-separated numbers, got {args.values!r}") from None
    else:
        if args.range is None:
            raise UsageError("give either --range START STOP or --values")
        start, stop = args.range
        if args.steps < 2:
            raise UsageError("--steps must be at least 2")
        if start <= 0 or stop <= 0:
            raise UsageError("--range endpoints must be positive")
        spaced = np.geomspace if args.spacing == "log" else np.linspace
        values = [float(v) for v in spaced(start, stop, args.steps)]
    if len(values) < 2:
        raise UsageError("a scan needs at least 2 grid points")
    if any(not (v > 0) for v in values):
        raise UsageError("scan values must be positive")
    return values


def cmd_scan(args, out, err) -> int:
    alphas = _grid(args)
    try:
        points = scan_alpha(alphas, args.q, satisfy_condition5=args.satisfy_condition5, gamma=args.gamma)
    except ConfigError as exc:
        raise UsageError(str(exc)) from None
    rows = [
        {
            "index": i,
            "alpha": p.alpha,
            "beta": p.beta,
            "gamma_re": p.gamma.real,
            "gamma_im": p.gamma.imag,
            "q_re": p.q.real,
            "q_im": p.q.imag,
            "ratio_triple": _num(p.ratio_triple),
            "ratio_two_pair": _num(p.ratio_two_pair),
            "p_dd": _num(p.p_dd),
        }
        for i, p in enumerate(points)
    ]
    slopes = {}
    for col in ("ratio_triple", "ratio_two_pair"):
        usable = [(r["alpha"], r[col]) for r in rows if r[col] not in (None, 0)]
        slopes[col] = fit_loglog_slope(*zip(*usable)) if len(usable) >= 2 else None

    if args.format == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=SCAN_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for r in rows:
            writer.writerow({k: ("" if r[k] is None else repr(r[k]) if isinstance(r[k], float) else r[k]) for k in SCAN_COLUMNS})
        out.write(buf.getvalue())
    elif args.format == "json":
        inputs = {
            "param": args.param,
            "values": alphas,
            "q": _cx(args.q),
            "satisfy_condition5": args.satisfy_condition5,
            "gamma": None if args.satisfy_condition5 else _cx(args.gamma),
        }
        results = {"columns": list(SCAN_COLUMNS), "rows": rows, "slopes": slopes}
        _emit({"schema_version": SCHEMA_VERSION, "command": "scan", "inputs": inputs, "results": results}, out)
    else:
        out.write(f"{'alpha':>12} {'triple/pair':>14} {'two-pair/pair':>14} {'P(dd)':>14}\n")
        for r in rows:
            pdd = "rejected" if r["p_dd"] is None else f"{r['p_dd']:.12f}"
            out.write(f"{r['alpha']:>12.6g} {r['ratio_triple']:>14.6g} {r['ratio_two_pair']:>14.6g} {pdd:>14}\n")
        for col, slope in slopes.items():
            out.write(f"log-log slope of {col}: {'n/a' if slope is None else f'{slope:.6f}'}\n")
    return EXIT_OK


# --- entry point ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hardyweave", description="Simulate Hardy's experiment with three lasers.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("hardy", help="run the built-in experiment end to end")
    p.add_argument("--alpha", type=_complex_arg, default=complex(DEFAULT_ALPHA))
    p.add_argument("--beta", type=_complex_arg, default=complex(DEFAULT_BETA))
    p.add_argument("--gamma", type=_complex_arg, default=complex(DEFAULT_GAMMA))
    p.add_argument("--q", type=_complex_arg, default=complex(DEFAULT_Q))
    p.add_argument("--pump-n-max", type=int, default=DEFAULT_PUMP_N_MAX)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_hardy)

    p = sub.add_parser("run", help="execute a .circ file")
    p.add_argument("file")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--emit-stages", action="store_true", help="dump the state after every element")
    p.add_argument("--cutoff", type=int, default=3)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("scan", help="noise ratios and P(d_S d_I) over a grid of laser amplitudes")
    p.add_argument("--param", choices=("alpha",), default="alpha")
    p.add_argument("--range", nargs=2, type=float, metavar=("START", "STOP"))
    p.add_argument("--steps", type=int, default=5)
    p.add_argument("--values", help="explicit comma-separated grid, overrides --range")
    p.add_argument("--spacing", choices=("log", "linear"), default="log")
    p.add_argument("--q", type=_complex_arg, default=complex(DEFAULT_Q))
    p.add_argument("--gamma", type=_complex_arg, default=complex(DEFAULT_GAMMA),
                   help="pump amplitude when alpha*beta = 2*q*gamma is not enforced")
    p.add_argument("--satisfy-condition5", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--format", choices=("text", "json", "csv"), default="csv")
    p.set_defaults(func=cmd_scan)
    return parser


def main(argv: Sequence[str] | None = None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        args = build_parser().parse_args(argv)
        return args.func(args, out, err)
    except UsageError as exc:
        err.write(f"{exc}\n")
        return EXIT_USAGE
    except PhysicsGateError as exc:
        err.write(f"rejected: {type(exc).__name__}: {exc}\n")
        return EXIT_PHYSICS
    except HardyweaveError as exc:
        err.write(f"error: {type(exc).__name__}: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
