"""``qroof`` command-line interface.

Exit codes: 0 success, 1 input or domain error (one ``error: ...`` line on
stderr), 2 verification failure (failing witnesses written to disk).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io
from .convexify import OptimizerConfig, SandwichError, convex_hull, convex_roof, fenchel_biconjugate
from .ensembles import coarse_grain
from .functionals import SpectralFunctional
from .monotones import EnergyConstraint, InputError, MonotoneSpec, entanglement_monotone, holevo_capacity_estimate
from .states import BipartiteShape, ConstraintError, ShapeError, StateError
from .verify import SUITES, run_suite

EXIT_OK, EXIT_ERROR, EXIT_VERIFY = 0, 1, 2
SWEEP_PARAMS = {"alpha": "alpha:a={}", "p": "renyi:p={}", "n": "hn:n={}"}


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def fmt(v: float) -> str:
    return f"{v:#.9g}"


def _config(args) -> OptimizerConfig:
    return OptimizerConfig(restarts=args.restarts, max_iters=args.max_iters, tol=args.tol, seed=args.seed)


def _functional(args):
    return SpectralFunctional.parse(args.functional, args.log_base)


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _emit_result(args, value, payload=None):
    print(fmt(value))
    if args.out and payload is not None:
        io.save_json(payload, args.out)


# ------------------------------------------------------------------ commands


def cmd_eval(args):
    rho, _ = io.load_state(args.state)
    print(fmt(_functional(args)(rho)))


def cmd_hull(args):
    rho, _ = io.load_state(args.state)
    r = convex_hull(_functional(args), rho, _config(args))
    _emit_result(args, r.value, {"schema_version": io.SCHEMA_VERSION, **r.to_dict()})


def cmd_roof(args):
    rho, _ = io.load_state(args.state)
    r = convex_roof(_functional(args), rho, _config(args))
    _emit_result(args, r.value, {"schema_version": io.SCHEMA_VERSION, **r.to_dict()})


def cmd_closure(args):
    rho, _ = io.load_state(args.state)
    r = fenchel_biconjugate(_functional(args), rho, _config(args), norm_cap=args.norm_cap)
    _emit_result(args, r.value, {
        "schema_version": io.SCHEMA_VERSION,
        "value": r.value,
        "upper_bound": r.upper_bound,
        "hull_value": r.hull_value,
        "rounds": r.rounds,
        "converged": r.converged,
        "dual_operator": io.matrix_to_list(r.dual_operator),
    })


def _spec(args, text=None):
    shape = BipartiteShape.parse(args.dims)
    spec = MonotoneSpec.parse(text or args.spec, shape, args.log_base)
    side = "trace_out_A" if args.keep == "B" else "trace_out_B"
    return MonotoneSpec(spec.base_functional, shape, side)


def cmd_monotone(args):
    spec = _spec(args)
    omega, _ = io.load_state(args.state)
    r = entanglement_monotone(spec, omega, _config(args))
    _emit_result(args, r.value, {"schema_version": io.SCHEMA_VERSION, **r.to_dict()})


def cmd_verify(args):
    report = run_suite(args.suite, args.trials, args.seed, _config(args))
    data = report.to_dict()
    _write(args.out, json.dumps(data, indent=2) + "\n")
    if not report.passed:
        wpath = Path(args.witness_out or f"qroof-{args.suite}-failures.json")
        io.save_json({"schema_version": io.SCHEMA_VERSION, "suite": args.suite,
                      "failures": [t.to_dict(with_witnesses=True) for t in report.failures]}, wpath)
        print(f"verification failed: {len(report.failures)} of {len(report.trials)} trials; witnesses in {wpath}",
              file=sys.stderr)
        return EXIT_VERIFY
    if args.out not in (None, "-"):
        print(f"{data['n_passed']} of {data['n_trials']} trials passed")
    return EXIT_OK


def parse_range(text):
    try:
        lo, hi, step = (float(x) for x in text.split(":"))
    except ValueError as exc:
        raise CliError(f"malformed range {text!r}; expected start:stop:step") from exc
    if step <= 0 or hi < lo:
        raise CliError(f"malformed range {text!r}; need start <= stop and step > 0")
    count = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return [round(lo + i * step, 12) for i in range(count)]


def cmd_sweep(args):
    grid = sorted(parse_range(args.range))
    if args.param == "n":
        grid = [int(round(g)) for g in grid]
    state, _ = io.load_state(args.state)
    cfg = _config(args)
    lines = ["param,value,converged,gap"]
    prev, seed = None, []
    for g in grid:
        text = SWEEP_PARAMS[args.param].format(g)
        if args.dims:
            spec = _spec(args, text)
            r = entanglement_monotone(spec, state, cfg, inits=seed)
        else:
            r = convex_hull(SpectralFunctional.parse(text, args.log_base), state, cfg)
        seed = [r.witness] if args.dims else []
        gap = 0.0 if prev is None else abs(r.value - prev)
        prev = r.value
        lines.append(f"{g:g},{fmt(r.value)},{str(r.converged).lower()},{fmt(gap)}")
    _write(args.out, "\n".join(lines) + "\n")


def cmd_capacity(args):
    ch = io.load_channel(args.channel)
    con = None
    if args.hamiltonian:
        if args.energy is None:
            raise CliError("--hamiltonian needs --energy")
        con = EnergyConstraint(io.load_matrix(args.hamiltonian), args.energy)
    sched = [float(x) for x in args.p_schedule.split(",")] if args.p_schedule else None
    cfg = OptimizerConfig(restarts=args.restarts if args.restarts_given else 8, max_iters=args.max_iters,
                          tol=args.tol, seed=args.seed)
    r = holevo_capacity_estimate(ch, con, sched, cfg, log_base=args.log_base)
    print(f"extrapolated {fmt(r.extrapolated)}")
    print(f"chi_oracle {fmt(r.chi_oracle)}")
    if args.out:
        io.save_json({
            "schema_version": io.SCHEMA_VERSION,
            "per_p": [{"p": p, "value": v} for p, v in r.per_p],
            "extrapolated": r.extrapolated,
            "chi_oracle": r.chi_oracle,
        }, args.out)


def cmd_coarsen(args):
    e = io.load_ensemble(args.ensemble)
    splitter = None
    if args.hamiltonian:
        if args.threshold is None:
            raise CliError("--hamiltonian needs --threshold")
        splitter = (io.load_matrix(args.hamiltonian), args.threshold)
    out = coarse_grain(e, args.diameter, splitter)
    data = {"schema_version": io.SCHEMA_VERSION, **io.ensemble_to_dict(out)}
    _write(args.out, json.dumps(data, indent=2) + "\n")
    if args.out not in (None, "-"):
        print(f"{len(e)} atoms -> {len(out)} atoms")


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--log-base", type=float, default=2.0)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--restarts", type=int, default=None)
    common.add_argument("--max-iters", type=int, default=2000)
    common.add_argument("--tol", type=float, default=1e-8)
    common.add_argument("--out", default=None, help="output file (JSON, or CSV for sweep)")

    p = _Parser(prog="qroof", description="Convex hulls, roofs and entanglement monotones of quantum states.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("eval", parents=[common], help="evaluate a functional at a state")
    s.add_argument("--functional", required=True)
    s.add_argument("--state", required=True)
    s.set_defaults(run=cmd_eval)

    for name, fn, text in (("hull", cmd_hull, "convex hull"), ("roof", cmd_roof, "convex roof")):
        s = sub.add_parser(name, parents=[common], help=f"{text} of a functional at a state")
        s.add_argument("--functional", required=True)
        s.add_argument("--state", required=True)
        s.set_defaults(run=fn)

    s = sub.add_parser("closure", parents=[common], help="convex closure (Fenchel biconjugate)")
    s.add_argument("--functional", required=True)
    s.add_argument("--state", required=True)
    s.add_argument("--norm-cap", type=float, default=None)
    s.set_defaults(run=cmd_closure)

    s = sub.add_parser("monotone", parents=[common], help="convex-roof entanglement monotone")
    s.add_argument("--spec", required=True, help="eof or a functional descriptor")
    s.add_argument("--dims", required=True, help="e.g. 2x2")
    s.add_argument("--state", required=True)
    s.add_argument("--keep", choices=("A", "B"), default="A", help="factor kept by the partial trace")
    s.set_defaults(run=cmd_monotone)

    s = sub.add_parser("verify", parents=[common], help="run a verification suite")
    s.add_argument("--suite", required=True, choices=SUITES)
    s.add_argument("--trials", type=int, default=None)
    s.add_argument("--witness-out", default=None)
    s.set_defaults(run=cmd_verify)

    s = sub.add_parser("sweep", parents=[common], help="sweep a functional parameter, CSV output")
    s.add_argument("--param", required=True, choices=sorted(SWEEP_PARAMS))
    s.add_argument("--range", required=True, help="start:stop:step")
    s.add_argument("--state", required=True)
    s.add_argument("--dims", default=None, help="bipartite dims; sweeps the monotone instead of the hull")
    s.add_argument("--keep", choices=("A", "B"), default="A")
    s.set_defaults(run=cmd_sweep)

    s = sub.add_parser("capacity", parents=[common], help="Holevo capacity estimate of a channel")
    s.add_argument("--channel", required=True)
    s.add_argument("--hamiltonian", default=None)
    s.add_argument("--energy", type=float, default=None)
    s.add_argument("--p-schedule", default=None, help="comma separated, decreasing, > 1")
    s.set_defaults(run=cmd_capacity)

    s = sub.add_parser("coarsen", parents=[common], help="barycenter-preserving coarse-graining of an ensemble")
    s.add_argument("--ensemble", required=True)
    s.add_argument("--diameter", type=float, required=True)
    s.add_argument("--hamiltonian", default=None)
    s.add_argument("--threshold", type=float, default=None)
    s.set_defaults(run=cmd_coarsen)
    return p


DOMAIN_ERRORS = (CliError, ValueError, StateError, ShapeError, ConstraintError, InputError, SandwichError,
                 OSError, KeyError, TypeError)


def _one_line(exc):
    msg = str(exc).strip().splitlines()
    text = msg[0] if msg else type(exc).__name__
    if isinstance(exc, KeyError):
        text = f"missing field {text}"
    return text


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        args.restarts_given = args.restarts is not None
        if args.restarts is None:
            args.restarts = OptimizerConfig().restarts
        code = args.run(args)
    except DOMAIN_ERRORS as exc:
        print(f"error: {_one_line(exc)}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
