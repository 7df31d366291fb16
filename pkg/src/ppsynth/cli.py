"""Command-line interface: compile formulas to protocols, inspect stats,
simulate, and run the verification checks, all over the JSON interchange
format.

Exit codes: 0 success / all checks pass, 1 verification failure, 2 usage or
parse error.
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys

from . import construct_large, construct_small, fixtures, pipeline, verify
from .formula import (
    Atom,
    FormulaError,
    MOD_THRESHOLD,
    REMAINDER,
    THRESHOLD,
    evaluate,
    ge_bound,
    normalize_threshold,
    parse,
    reduce_mod_threshold,
)
from .protocol import ProtocolError, from_json, to_json


def _emit(obj, out: str | None) -> None:
    text = json.dumps(obj, sort_keys=True, indent=1)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _load_protocol(path: str):
    with open(path) as fh:
        text = fh.read()
    obj = json.loads(text)
    if "stage_stats" in obj:
        obj = obj["protocol"]
    return from_json(json.dumps(obj))


def _parse_input(text: str) -> dict[str, int]:
    v: dict[str, int] = {}
    if text.strip():
        for part in text.split(","):
            name, _, num = part.partition("=")
            v[name.strip()] = int(num)
    return v


def _single_atom(phi) -> Atom:
    if not isinstance(phi.node, Atom):
        raise FormulaError("this mode requires a single atomic formula")
    return phi.node


def _enumerate_inputs(variables, max_size: int, exact: int | None = None):
    sizes = [exact] if exact is not None else list(range(0, max_size + 1))
    for total in sizes:
        for combo in itertools.combinations_with_replacement(
                range(len(variables)), total):
            v = {x: 0 for x in variables}
            for i in combo:
                v[variables[i]] += 1
            yield v


def cmd_compile(args) -> int:
    phi = parse(args.formula)
    mode = args.mode
    if mode == "full":
        result = pipeline.compile(phi)
        _emit(result.to_json_obj(), args.out)
        return 0
    if mode == "large":
        protocol, _ = construct_large.compile_large(phi)
    elif mode == "small":
        protocol = pipeline.compile_small_half(phi)
    elif mode == "rdi-threshold":
        atom = _single_atom(phi)
        if atom.kind != THRESHOLD:
            raise FormulaError("rdi-threshold requires a threshold atom")
        norm, _ = normalize_threshold(atom)
        protocol = construct_large.build_threshold_rdi(dict(norm.coeffs),
                                                       ge_bound(norm))
    elif mode == "rdi-remainder":
        atom = _single_atom(phi)
        if atom.kind not in (REMAINDER, MOD_THRESHOLD):
            raise FormulaError("rdi-remainder requires a modular atom")
        if atom.kind == REMAINDER:
            raise FormulaError(
                "use the mod-threshold form 'a.v >= b (mod m)' for this mode")
        atom = reduce_mod_threshold(atom)
        protocol = construct_large.build_remainder_rdi(
            dict(atom.coeffs), atom.bound, atom.modulus)
    elif mode == "greater-sum":
        atom = _single_atom(phi)
        if atom.kind != THRESHOLD:
            raise FormulaError("greater-sum requires a threshold atom")
        if args.size is None:
            raise FormulaError("greater-sum requires --size")
        alpha = {x: c for x, c in atom.coeffs if c >= 0}
        beta = {x: -c for x, c in atom.coeffs if c < 0}
        protocol = construct_small.build_greater_sum_halting(
            alpha, beta, args.size, atom.bound)
    else:
        raise FormulaError(f"unknown mode {mode!r}")
    _emit(json.loads(to_json(protocol)), args.out)
    return 0


def cmd_stats(args) -> int:
    with open(args.protocol) as fh:
        obj = json.load(fh)
    if "stage_stats" in obj:
        _emit(obj["stage_stats"], None)
        return 0
    p = from_json(json.dumps(obj))
    _emit({
        "states": p.state_count(),
        "transitions": p.transition_count(),
        "helpers": sum(p.leaders.values()),
        "max_width": p.max_width(),
        "flavor": p.flavor,
        "variables": list(p.variables),
    }, None)
    return 0


def cmd_simulate(args) -> int:
    p = _load_protocol(args.protocol)
    v = _parse_input(args.input)
    res = verify.simulate(p, v, seed=args.seed, max_steps=args.max_steps,
                          stability_window=args.window)
    _emit(res.to_json_obj(), None)
    return 0


def _guarded_expected(phi, guard: str):
    if guard == "none":
        return lambda v: evaluate(phi, v)
    kind, _, num = guard.partition(":")
    ell = int(num)
    if kind == "ge":
        return lambda v: 1 if sum(v.values()) < ell else evaluate(phi, v)
    if kind == "lt":
        return lambda v: 1 if sum(v.values()) >= ell else evaluate(phi, v)
    raise FormulaError(f"unknown guard {guard!r}")


def cmd_verify(args) -> int:
    p = _load_protocol(args.protocol)
    phi = parse(args.formula)
    expected = _guarded_expected(phi, args.guard)
    inputs = []
    for v in _enumerate_inputs(p.variables, args.max_size):
        if sum(v.values()) + sum(p.leaders.values()) >= 2:
            inputs.append(v)
    report = verify.check_computes(p, expected, inputs,
                                   node_cap=args.node_cap, jobs=args.jobs)
    _emit(report.to_json_obj(), None)
    return 0 if report.ok else 1


def cmd_check_rdi(args) -> int:
    phi = parse(args.formula)
    atom = _single_atom(phi)
    if args.kind == "threshold":
        if atom.kind != THRESHOLD:
            raise FormulaError("--kind threshold requires a threshold atom")
        norm, neg = normalize_threshold(atom)
        rdi = construct_large.build_threshold_rdi(dict(norm.coeffs),
                                                  ge_bound(norm))
        phi_w = (lambda w: 1 - evaluate(phi, w)) if neg \
            else (lambda w: evaluate(phi, w))
    else:
        if atom.kind != MOD_THRESHOLD:
            raise FormulaError(
                "--kind remainder requires a mod-threshold atom "
                "'a.v >= b (mod m)'")
        atom = reduce_mod_threshold(atom)
        rdi = construct_large.build_remainder_rdi(
            dict(atom.coeffs), atom.bound, atom.modulus)
        phi_w = lambda w: evaluate(phi, w)  # noqa: E731
    report = verify.check_rdi(rdi, phi_w, max_depth=args.depth,
                              max_pop=args.max_pop)
    _emit(report.to_json_obj(), None)
    return 0 if report.ok else 1


def cmd_check_halting(args) -> int:
    p = _load_protocol(args.protocol)
    inputs = list(_enumerate_inputs(p.variables, args.size, exact=args.size))
    report = verify.check_halting(p, inputs)
    _emit(report.to_json_obj(), None)
    return 0 if report.ok else 1


def cmd_fixtures(args) -> int:
    p = fixtures.get_fixture(args.name, args.n)
    _emit(p.to_json_obj(), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ppsynth",
        description="Compile linear-arithmetic predicates into succinct "
                    "population protocols; verify and simulate them.")
    sub = ap.add_subparsers(dest="verb", required=True)

    c = sub.add_parser("compile", help="compile a formula to a protocol")
    c.add_argument("--formula", required=True)
    c.add_argument("--mode", default="full",
                   choices=["large", "small", "full", "rdi-threshold",
                            "rdi-remainder", "greater-sum"])
    c.add_argument("--size", type=int, default=None)
    c.add_argument("--out", default=None)
    c.set_defaults(func=cmd_compile)

    s = sub.add_parser("stats", help="protocol or compilation statistics")
    s.add_argument("--protocol", required=True)
    s.set_defaults(func=cmd_stats)

    m = sub.add_parser("simulate", help="run the fair stochastic simulator")
    m.add_argument("--protocol", required=True)
    m.add_argument("--input", required=True)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--max-steps", type=int, default=500_000)
    m.add_argument("--window", type=int, default=verify.DEFAULT_WINDOW)
    m.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify", help="exhaustive bottom-SCC verification")
    v.add_argument("--protocol", required=True)
    v.add_argument("--formula", required=True)
    v.add_argument("--guard", default="none")
    v.add_argument("--max-size", type=int, required=True)
    v.add_argument("--node-cap", type=int, default=None)
    v.add_argument("--jobs", type=int, default=1)
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("check-rdi", help="check dynamic-initialization properties")
    r.add_argument("--formula", required=True)
    r.add_argument("--kind", required=True, choices=["threshold", "remainder"])
    r.add_argument("--max-pop", type=int, default=3)
    r.add_argument("--depth", type=int, default=12)
    r.set_defaults(func=cmd_check_rdi)

    h = sub.add_parser("check-halting", help="check the halting property")
    h.add_argument("--protocol", required=True)
    h.add_argument("--size", type=int, required=True)
    h.set_defaults(func=cmd_check_halting)

    f = sub.add_parser("fixtures", help="emit a reference protocol")
    f.add_argument("--name", required=True, choices=["pn", "ppn"])
    f.add_argument("--n", type=int, required=True)
    f.add_argument("--out", default=None)
    f.set_defaults(func=cmd_fixtures)
    return ap


def run(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    try:
        return args.func(args)
    except (FormulaError, ProtocolError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
