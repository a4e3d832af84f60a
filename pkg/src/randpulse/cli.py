"""Command-line front end.

Subcommands:
  eval        evaluate an arithmetic expression (JSON report)
  sweep       run a circuit over a (p0, p1) grid (CSV)
  randomness  randomness report for one circuit output (JSON)
  oracle      exact stationary output rate of a counter circuit (JSON)

Every output embeds a manifest (tool version, subcommand, effective
options, seed, timestamp); re-running with the same options reproduces
the artifact byte for byte apart from the timestamp line.

Exit codes: 0 success, 2 usage or parse error, 3 compile or range
error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from datetime import datetime, timezone
from typing import Mapping, Sequence

from . import __version__
from .analysis import (
    OracleUnsupportedError,
    build_chain,
    grid_values,
    randomness_report,
    stationary_output,
    sweep,
)
from .circuits import CIRCUIT_KINDS, FEEDBACK_KINDS, make_circuit, run_circuit
from .core import (
    ConfigurationError,
    InputDomainError,
    SimulationConfig,
)
from .netlist import (
    CompileError,
    CompileOptions,
    ExpressionError,
    compile_expression,
    evaluate,
)

_TOOL = "randpulse"

_DEFAULTS: dict[str, object] = {
    "cycles": 1_048_576,
    "seed": 1,
    "warmup": None,  # auto: settle 16 * 2**bits bins per counter circuit
    "bits": None,  # auto: the kind's native counter width
    "steps": 19,
    "max_lag": 16,
    "adder": "mux",
    "divider": "counter",
    "subtractor": "counter",
    "div_bits": 8,
    "sub_bits": None,  # family default: 4 for counter, 8 otherwise
}

_INT_KEYS = {"cycles", "seed", "bits", "steps", "max_lag", "div_bits", "sub_bits"}
_CHOICE_KEYS = {
    "adder": ("mux", "or"),
    "divider": ("counter", "lfsr", "trff"),
    "subtractor": ("counter", "lfsr", "trff"),
}


def _warmup_flag(text: str) -> object:
    if text == "auto":
        return "auto"
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or 'auto', got {text!r}")
    if value < 0:
        raise argparse.ArgumentTypeError("warmup must be >= 0")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=_TOOL,
        description="Random pulse train circuit simulator and calculator.",
    )
    parser.add_argument("--version", action="version", version=f"{_TOOL} {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_common(p: argparse.ArgumentParser, *, simulation: bool = True) -> None:
        p.add_argument("--config", help="key=value defaults file; flags take precedence")
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--seed", type=int, default=None, help="base RNG seed (default 1)")
        if simulation:
            p.add_argument(
                "--cycles", type=int, default=None,
                help="measured bins per run (default 1048576)",
            )
            p.add_argument(
                "--warmup", type=_warmup_flag, default=None,
                help="settling bins dropped before measuring (default auto)",
            )

    p_eval = sub.add_parser("eval", help="evaluate an expression over pulse circuits")
    p_eval.add_argument("expression", help="e.g. '(a+b)*c/d'")
    p_eval.add_argument("bindings", nargs="*", metavar="name=value")
    p_eval.add_argument("--adder", choices=_CHOICE_KEYS["adder"], default=None)
    p_eval.add_argument("--divider", choices=_CHOICE_KEYS["divider"], default=None)
    p_eval.add_argument("--subtractor", choices=_CHOICE_KEYS["subtractor"], default=None)
    p_eval.add_argument("--div-bits", type=int, default=None, dest="div_bits")
    p_eval.add_argument("--sub-bits", type=int, default=None, dest="sub_bits")
    add_common(p_eval)
    p_eval.set_defaults(func=_cmd_eval)

    p_sweep = sub.add_parser("sweep", help="map a circuit's transfer function to CSV")
    p_sweep.add_argument("kind", choices=sorted(CIRCUIT_KINDS))
    p_sweep.add_argument("--bits", type=int, default=None, help="counter width")
    p_sweep.add_argument("--steps", type=int, default=None, help="grid points per axis")
    add_common(p_sweep)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_rand = sub.add_parser("randomness", help="randomness report for a circuit output")
    p_rand.add_argument("kind", choices=sorted(CIRCUIT_KINDS))
    p_rand.add_argument("p0", type=float)
    p_rand.add_argument("p1", type=float)
    p_rand.add_argument("--bits", type=int, default=None, help="counter width")
    p_rand.add_argument("--max-lag", type=int, default=None, dest="max_lag")
    add_common(p_rand)
    p_rand.set_defaults(func=_cmd_randomness)

    p_oracle = sub.add_parser("oracle", help="exact stationary rate of a counter circuit")
    p_oracle.add_argument("kind")
    p_oracle.add_argument("bits", type=int)
    p_oracle.add_argument("p0", type=float)
    p_oracle.add_argument("p1", type=float)
    add_common(p_oracle, simulation=False)
    p_oracle.set_defaults(func=_cmd_oracle)

    return parser


# ---------------------------------------------------------------------------
# Option resolution: flag > config file > default


def _load_config(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise InputDomainError(
                    f"{path}:{lineno}: expected key=value, got {line!r}"
                )
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def _convert(key: str, text: str) -> object:
    if key in ("warmup", "bits"):
        if text == "auto":
            return "auto"
        try:
            return int(text)
        except ValueError:
            raise InputDomainError(
                f"config {key} must be an integer or 'auto', got {text!r}"
            )
    if key in _INT_KEYS:
        try:
            return int(text)
        except ValueError:
            raise InputDomainError(f"config {key} must be an integer, got {text!r}")
    if key in _CHOICE_KEYS:
        if text not in _CHOICE_KEYS[key]:
            raise InputDomainError(
                f"config {key} must be one of {_CHOICE_KEYS[key]}, got {text!r}"
            )
    return text


def _settings(args: argparse.Namespace, keys: Sequence[str]) -> dict[str, object]:
    config = _load_config(args.config) if args.config else {}
    unknown = sorted(set(config) - set(keys))
    if unknown:
        raise InputDomainError(f"config keys not used by this subcommand: {', '.join(unknown)}")
    merged: dict[str, object] = {}
    for key in keys:
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag
        elif key in config:
            merged[key] = _convert(key, config[key])
        else:
            merged[key] = _DEFAULTS[key]
    for auto_key in ("warmup", "bits"):
        if merged.get(auto_key) == "auto":
            merged[auto_key] = None
    return merged


def _sim_config(settings: Mapping[str, object]) -> SimulationConfig:
    return SimulationConfig(
        cycles=settings["cycles"], warmup=settings["warmup"], seed=settings["seed"]
    )


# ---------------------------------------------------------------------------
# Output helpers


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _manifest(subcommand: str, options: Mapping[str, object], seed: int) -> dict:
    return {
        "tool": _TOOL,
        "version": __version__,
        "subcommand": subcommand,
        "options": dict(sorted(options.items())),
        "seed": seed,
        "timestamp": _now(),
    }


def _emit(text: str, out_path: str | None) -> None:
    if out_path is None:
        sys.stdout.write(text)
    else:
        with open(out_path, "w", encoding="utf-8") as handle:
            handle.write(text)


def _emit_json(payload: dict, out_path: str | None) -> None:
    _emit(json.dumps(payload, indent=2, sort_keys=True) + "\n", out_path)


def _opt_str(value: object) -> str:
    return "auto" if value is None else str(value)


# ---------------------------------------------------------------------------
# Subcommands


def _parse_bindings(pairs: Sequence[str]) -> dict[str, float]:
    bindings: dict[str, float] = {}
    for pair in pairs:
        name, sep, value = pair.partition("=")
        name = name.strip()
        if not sep or not name:
            raise InputDomainError(f"bindings take the form name=value, got {pair!r}")
        try:
            bindings[name] = float(value)
        except ValueError:
            raise InputDomainError(f"binding {name!r} needs a numeric value, got {value!r}")
    return bindings


def _cmd_eval(args: argparse.Namespace) -> int:
    settings = _settings(
        args,
        ("cycles", "seed", "warmup", "adder", "divider", "subtractor",
         "div_bits", "sub_bits"),
    )
    options = CompileOptions(
        adder=settings["adder"],
        divider=settings["divider"],
        subtractor=settings["subtractor"],
        divider_bits=settings["div_bits"],
        subtractor_bits=settings["sub_bits"],
    )
    netlist = compile_expression(args.expression, options)
    bindings = _parse_bindings(args.bindings)
    result = evaluate(netlist, bindings, _sim_config(settings))
    shown_options = {
        "adder": options.adder,
        "divider": options.divider,
        "subtractor": options.subtractor,
        "divider_bits": options.divider_bits,
        "subtractor_bits": options.resolved_subtractor_bits(),
    }
    manifest_options = dict(shown_options)
    manifest_options.update(
        expression=args.expression,
        bindings=" ".join(f"{k}={bindings[k]}" for k in sorted(bindings)),
        cycles=settings["cycles"],
        warmup=_opt_str(settings["warmup"]),
    )
    payload = {
        "expression": args.expression,
        "bindings": bindings,
        "options": shown_options,
        "estimate": result.estimate,
        "scale_exponent": result.scale,
        "scaled_value": result.value,
        "ideal_estimate": result.ideal_estimate,
        "ideal_value": result.ideal_value,
        "per_node_rates": result.node_rates,
        "netlist": netlist.describe(),
        "warnings": result.warnings,
        "seed": settings["seed"],
        "cycles": settings["cycles"],
        "warmup": result.warmup,
        "manifest": _manifest("eval", manifest_options, settings["seed"]),
    }
    _emit_json(payload, args.out)
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    settings = _settings(args, ("cycles", "seed", "warmup", "bits", "steps"))
    bits = settings["bits"]
    if bits is not None and args.kind not in FEEDBACK_KINDS:
        raise ConfigurationError(f"{args.kind} has no counter width")
    grid = grid_values(settings["steps"])
    result = sweep(args.kind, grid, _sim_config(settings), bits=bits)
    options = {
        "kind": args.kind,
        "bits": _opt_str(bits),
        "steps": settings["steps"],
        "cycles": settings["cycles"],
        "warmup": _opt_str(settings["warmup"]),
    }
    manifest = _manifest("sweep", options, settings["seed"])
    lines = [
        f"# tool: {_TOOL} {__version__}",
        "# subcommand: sweep",
        "# options: " + " ".join(f"{k}={v}" for k, v in sorted(options.items())),
        f"# seed: {settings['seed']}",
        f"# timestamp: {manifest['timestamp']}",
        f"# mean_abs_error: {result.mean_abs_error:.6f}",
        f"# max_abs_error: {result.max_abs_error:.6f}",
        "p0,p1,estimate,ideal,abs_error",
    ]
    for i, p0 in enumerate(result.p0_values):
        for j, p1 in enumerate(result.p1_values):
            lines.append(
                f"{p0:.6f},{p1:.6f},{result.estimates[i, j]:.6f},"
                f"{result.ideals[i, j]:.6f},{result.abs_errors[i, j]:.6f}"
            )
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def _cmd_randomness(args: argparse.Namespace) -> int:
    settings = _settings(args, ("cycles", "seed", "warmup", "bits", "max_lag"))
    bits = settings["bits"]
    if bits is not None and args.kind not in FEEDBACK_KINDS:
        raise ConfigurationError(f"{args.kind} has no counter width")
    circuit = make_circuit(args.kind, bits=bits, seed=settings["seed"])
    stream = run_circuit(circuit, (args.p0, args.p1), _sim_config(settings))
    report = randomness_report(stream, max_lag=settings["max_lag"])
    options = {
        "kind": args.kind,
        "bits": _opt_str(bits),
        "p0": args.p0,
        "p1": args.p1,
        "cycles": settings["cycles"],
        "warmup": _opt_str(settings["warmup"]),
        "max_lag": settings["max_lag"],
    }
    payload = {
        "kind": args.kind,
        "bits": getattr(circuit, "bits", None),  # the width actually used
        "p0": args.p0,
        "p1": args.p1,
        "length": report.length,
        "rate": report.rate,
        "iid_bound": report.iid_bound,
        "autocorrelations": report.autocorrelations,
        "one_run_histogram": {str(k): v for k, v in report.one_run_histogram.items()},
        "zero_run_histogram": {str(k): v for k, v in report.zero_run_histogram.items()},
        "longest_one_run": report.longest_one_run,
        "longest_zero_run": report.longest_zero_run,
        "chi2_zero_runs": asdict(report.chi2_zero_runs) if report.chi2_zero_runs else None,
        "chi2_one_runs": asdict(report.chi2_one_runs) if report.chi2_one_runs else None,
        "degenerate": report.degenerate,
        "warnings": report.notes,
        "manifest": _manifest("randomness", options, settings["seed"]),
    }
    _emit_json(payload, args.out)
    return 0


def _cmd_oracle(args: argparse.Namespace) -> int:
    settings = _settings(args, ("seed",))
    chain = build_chain(args.kind, args.bits, args.p0, args.p1)
    rate = stationary_output(chain)
    options = {"kind": args.kind, "bits": args.bits, "p0": args.p0, "p1": args.p1}
    payload = {
        "kind": args.kind,
        "bits": args.bits,
        "p0": args.p0,
        "p1": args.p1,
        "stationary_rate": float(f"{rate:.12g}"),
        "manifest": _manifest("oracle", options, settings["seed"]),
    }
    _emit_json(payload, args.out)
    return 0


# ---------------------------------------------------------------------------


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed usage/message
        code = exc.code if exc.code is not None else 0
        return code if isinstance(code, int) else 2
    try:
        return args.func(args)
    except (
        ExpressionError,
        InputDomainError,
        OracleUnsupportedError,
        ConfigurationError,
    ) as exc:
        # bad values or an unsupported request: a usage problem
        print(f"{_TOOL}: error: {exc}", file=sys.stderr)
        return 2
    except CompileError as exc:
        # the expression parsed but cannot be realized as pulse hardware
        print(f"{_TOOL}: error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"{_TOOL}: error: {exc}", file=sys.stderr)
        return 4


def main_entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":  # pragma: no cover
    main_entry()
