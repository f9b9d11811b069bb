"""Command-line interface.

Exit codes: 0 success, 1 malformed input, 2 infeasible spectrum,
3 precision exhausted, 4 a check ran but did not pass.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from typing import Optional

import mpmath
from mpmath import mpf

from .chain import ValidationError, chain_from_json, chain_to_json
from .forward import spectrum
from .numerics import PrecisionConfig, PrecisionExhausted, to_decimal
from .plan import (InfeasibleSpectrum, TargetSpectrum, build_plan, feasibility_violations,
                   spectrum_from_json, spectrum_to_json)
from .synthesis import ADAPTIVE, FAITHFUL, synthesize
from .verify import DimensionError, five_dof_bound, necessity_fuzz, verify

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_PRECISION, EXIT_FAILED = 0, 1, 2, 3, 4
COMMANDS = ("feasible", "synth", "analyze", "verify", "fuzz", "bound5")


class InputError(ValueError):
    pass


@dataclass
class CommandConfig:
    command: str
    input_path: str = "-"
    output_path: str = "-"
    mode: str = ADAPTIVE
    mantissa_bits: Optional[int] = None
    cluster_tol: Optional[str] = None
    seed: object = 0
    float64: bool = False
    trials: int = 1000
    n_max: int = 6
    csv_path: Optional[str] = None

    def precision(self, default: int = 256) -> PrecisionConfig:
        return PrecisionConfig(self.mantissa_bits or default)


def _read(path: str):
    text = sys.stdin.read() if path == "-" else open(path, encoding="utf-8").read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def _floatify(obj):
    """Turn decimal strings back into JSON numbers for --float64 output."""
    if isinstance(obj, dict):
        return {k: _floatify(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_floatify(v) for v in obj]
    if isinstance(obj, str):
        try:
            return float(obj)
        except ValueError:
            return obj
    return obj


def _write(cfg: CommandConfig, obj) -> None:
    if cfg.float64:
        obj = _floatify(obj)
    text = json.dumps(obj, indent=2) + "\n"
    if cfg.output_path == "-":
        sys.stdout.write(text)
    else:
        with open(cfg.output_path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _spectrum_input(obj):
    if isinstance(obj, dict) and "spectrum" in obj:
        obj = obj["spectrum"]
    return spectrum_from_json(obj)


def _chain_input(obj):
    if isinstance(obj, dict) and "chain" in obj:
        obj = obj["chain"]
    return chain_from_json(obj)


def _cluster_tol(cfg: CommandConfig):
    return None if cfg.cluster_tol is None else mpf(cfg.cluster_tol)


def _cmd_feasible(cfg: CommandConfig) -> int:
    spec, _ = _spectrum_input(_read(cfg.input_path))
    bad = feasibility_violations(spec)
    _write(cfg, {"feasible": not bad,
                 "violations": [{"index": i, "mult": t, "limit": i} for i, t in bad]})
    return EXIT_OK if not bad else EXIT_INFEASIBLE


def _cmd_synth(cfg: CommandConfig) -> int:
    spec, pinned = _spectrum_input(_read(cfg.input_path))
    plan = build_plan(spec, pinned)
    result = synthesize(spec, plan, cfg.mode, cfg.precision())
    bits = result.precision_used
    tol = _cluster_tol(cfg)
    check = verify(result.chain, spec, plan, PrecisionConfig(bits),
                   result.verification_tol() if tol is None else tol)
    if cfg.csv_path:
        with open(cfg.csv_path, "w", encoding="utf-8") as fh:
            fh.write(result.trace_csv())
    _write(cfg, {
        "chain": chain_to_json(result.chain, bits),
        "spectrum": spectrum_to_json(spec, plan.pinned_masses, bits),
        "pinned_indices": list(plan.pinned_indices),
        "mode": result.mode,
        "precision_used": bits,
        "verified": check.all_green,
        "trace": result.trace_json(),
    })
    return EXIT_OK if check.all_green else EXIT_FAILED


def _cmd_analyze(cfg: CommandConfig) -> int:
    chain = _chain_input(_read(cfg.input_path))
    pc = cfg.precision()
    report = spectrum(chain, pc, _cluster_tol(cfg))
    _write(cfg, report.to_json(pc.mantissa_bits))
    return EXIT_OK


def _cmd_verify(cfg: CommandConfig) -> int:
    obj = _read(cfg.input_path)
    if not isinstance(obj, dict) or "chain" not in obj or "spectrum" not in obj:
        raise InputError("verify: expected an object with 'chain' and 'spectrum'")
    bits = cfg.mantissa_bits or obj.get("precision_used") or 256
    if isinstance(bits, bool) or not isinstance(bits, int):
        raise InputError("verify: precision_used must be an integer")
    pc = PrecisionConfig(bits)
    with pc.workprec():
        chain = chain_from_json(obj["chain"])
        spec, pinned = spectrum_from_json(obj["spectrum"])
    plan = build_plan(spec, pinned) if pinned is not None else None
    report = verify(chain, spec, plan, pc, _cluster_tol(cfg))
    _write(cfg, report.to_json(pc.mantissa_bits))
    return EXIT_OK if report.all_green else EXIT_FAILED


def _cmd_fuzz(cfg: CommandConfig) -> int:
    pc = cfg.precision(default=96)
    summary = necessity_fuzz(cfg.trials, cfg.n_max, cfg.seed, pc, _cluster_tol(cfg))
    _write(cfg, summary.to_json())
    return EXIT_OK if summary.violations == 0 else EXIT_FAILED


def _cmd_bound5(cfg: CommandConfig) -> int:
    obj = _read(cfg.input_path)
    chain = _chain_input(obj)
    if isinstance(obj, dict) and "lambdas" in obj:
        lambdas = spectrum_from_json({"lambdas": obj["lambdas"], "mults": [1] * len(obj["lambdas"])})[0].lambdas
    else:
        lambdas = _spectrum_input(obj)[0].lambdas
    lhs, rhs, holds = five_dof_bound(chain, lambdas)
    _write(cfg, {"lhs": to_decimal(lhs, 64), "rhs": to_decimal(rhs, 64), "holds": holds})
    return EXIT_OK if holds else EXIT_FAILED


_HANDLERS = {
    "feasible": _cmd_feasible,
    "synth": _cmd_synth,
    "analyze": _cmd_analyze,
    "verify": _cmd_verify,
    "fuzz": _cmd_fuzz,
    "bound5": _cmd_bound5,
}


def run(cfg: CommandConfig) -> int:
    try:
        # decimal inputs are parsed at the working precision
        with mpmath.workprec(cfg.mantissa_bits or 256):
            return _HANDLERS[cfg.command](cfg)
    except InfeasibleSpectrum as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except PrecisionExhausted as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECISION
    except (InputError, ValidationError, DimensionError, ValueError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="inerter-iep", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("input", nargs="?", default="-", help="input JSON file ('-' for stdin)")
    common.add_argument("-o", "--output", default="-", help="output file ('-' for stdout)")
    common.add_argument("--bits", type=int, default=None, help="mantissa bits")
    common.add_argument("--cluster-tol", default=None, help="relative multiplicity window")
    common.add_argument("--float64", action="store_true", help="emit JSON numbers instead of decimal strings")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("feasible", parents=[common], help="check t_i <= i")
    synth = sub.add_parser("synth", parents=[common], help="build a chain for a spectrum")
    synth.add_argument("--mode", choices=(ADAPTIVE, FAITHFUL), default=ADAPTIVE)
    synth.add_argument("--csv", default=None, help="also write the step trace as CSV")
    sub.add_parser("analyze", parents=[common], help="spectrum of a chain")
    sub.add_parser("verify", parents=[common], help="certify a chain against a spectrum")
    fuzz = sub.add_parser("fuzz", parents=[common], help="random-chain multiplicity check")
    fuzz.add_argument("--seed", default="0")
    fuzz.add_argument("--trials", type=int, default=1000)
    fuzz.add_argument("--n-max", type=int, default=6)
    sub.add_parser("bound5", parents=[common], help="five-mass ratio bound")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = CommandConfig(
        command=args.command,
        input_path=args.input,
        output_path=args.output,
        mode=getattr(args, "mode", ADAPTIVE),
        mantissa_bits=args.bits,
        cluster_tol=args.cluster_tol,
        seed=getattr(args, "seed", 0),
        float64=args.float64,
        trials=getattr(args, "trials", 1000),
        n_max=getattr(args, "n_max", 6),
        csv_path=getattr(args, "csv", None),
    )
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
