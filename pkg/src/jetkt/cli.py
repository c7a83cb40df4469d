"""Command line front end: ``jetkt <command> problem.eq [flags]``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import conslaw, koszultate
from .cdiff import cdiff_adjoint
from .dsl import ParseError, ProblemFile, parse_problem
from .expr import Q
from .jetcalc import NonConfluentError, ReductionError, Section, euler, ideal_decompose, linearize

log = logging.getLogger("jetkt")

COMMANDS = (
    "linearize",
    "adjoint",
    "euler",
    "reduce",
    "kt-check",
    "kt-homology",
    "cosymmetries",
    "conservation-check",
    "to-cosymmetry",
    "compare",
)

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_VALIDATION, EXIT_REJECTED = 0, 1, 2, 3, 4


class ValidationFailure(Exception):
    pass


class Rejected(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="jetkt", description="Jet-space calculus, Koszul-Tate homology and conservation laws.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("problem", help="problem file (.eq)")
    p.add_argument("--jet-order", type=int, default=2, metavar="N")
    p.add_argument("--degree", type=int, default=2, metavar="D")
    p.add_argument("--base-degree", type=int, default=0, metavar="B")
    p.add_argument("--antighost", type=int, default=None, metavar="P")
    p.add_argument("--bound", type=int, default=2, metavar="K")
    p.add_argument("--json", action="store_true", help="emit JSON")
    p.add_argument("--output", metavar="FILE", help="write output to FILE")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


# ------------------------------------------------------------------ helpers


def _problem_json(pf: ProblemFile) -> dict:
    ctx = pf.ctx
    return {
        "name": pf.name,
        "independents": list(pf.independents),
        "dependents": list(pf.dependents),
        "equations": [f"{ctx.render_symbol(lead)} = {rhs.render()}" for lead, rhs in pf.equations],
        "compat": [name for name, _ in pf.compat],
    }


def _system(pf: ProblemFile):
    try:
        return pf.system()
    except NonConfluentError as e:
        raise ValidationFailure(f"equations are not compatible: {e}") from e
    except ValueError as e:
        raise ValidationFailure(str(e)) from e


def _setup(pf: ProblemFile):
    try:
        return koszultate.kt_setup(_system(pf), pf.compat_ops())
    except koszultate.KTSetupError as e:
        raise ValidationFailure(str(e)) from e


def _field_names(ctx, fields) -> list:
    return [ctx.render_symbol(ctx.field_symbol(f)) for f in fields]


def _sec(sec) -> list:
    return [c.render() for c in sec]


# ------------------------------------------------------------------ commands


def cmd_linearize(pf, args):
    system = _system(pf)
    out = [{"name": "F", "operator": linearize(system.F).render()}]
    for name, f in pf.densities:
        out.append({"name": name, "operator": linearize(f, extended=True).render()})
    return out


def cmd_adjoint(pf, args):
    system = _system(pf)
    return [{"name": "F", "operator": cdiff_adjoint(linearize(system.F)).render()}]


def cmd_euler(pf, args):
    ctx = pf.full_ctx
    fields = ctx.fields(antifields=True)
    names = _field_names(ctx, fields)
    out = []
    for name, f in pf.densities:
        e = euler(f, fields, right=True)
        out.append({"name": name, "euler": {n: c.render() for n, c in zip(names, e) if c}})
    return out


def cmd_reduce(pf, args):
    system = _system(pf)
    setup = _setup(pf) if pf.densities else None
    out = []

    def one(name, f, sys_):
        lam, nf = ideal_decompose(f, sys_)
        return {"name": name, "normal_form": nf.render(), "Lambda": lam.render()}

    try:
        for name, f in pf.densities:
            out.append(one(name, f, setup.system))
        for name, comps in pf.cosymmetries:
            for k, c in enumerate(comps):
                out.append(one(f"{name}[{k + 1}]", c, system))
        for name, comps in pf.currents:
            for k, c in enumerate(comps):
                out.append(one(f"{name}[{k + 1}]", c, system))
    except ReductionError as e:
        raise Rejected(str(e)) from e
    return out


def _trunc(args, antighost) -> koszultate.TruncationSpec:
    try:
        return koszultate.TruncationSpec(antighost, args.jet_order, args.degree, args.base_degree)
    except ValueError as e:
        raise Rejected(str(e)) from e


def cmd_kt_check(pf, args):
    setup = _setup(pf)
    p = 2 if args.antighost is None else args.antighost
    report = koszultate.kt_delta_squared_check(setup, _trunc(args, p))
    return [{
        "summary": report.summary(),
        "delta_squared_zero": report.passed,
        "basis_size": report.basis_size,
        "failures": [list(f) for f in report.failures[:20]],
        "compatibility_on_shell": koszultate.check_compatibility(setup),
        "tiers": list(setup.tiers),
    }]


def cmd_kt_homology(pf, args):
    setup = _setup(pf)
    p = 1 if args.antighost is None else args.antighost
    trunc = _trunc(args, p + 1)
    try:
        res = koszultate.truncated_homology(setup, trunc, p)
    except koszultate.TruncationError as e:
        raise Rejected(str(e)) from e
    names = _field_names(setup.ctx, setup.fields())
    return [{
        "summary": res.summary(),
        "antighost": p,
        "dim": res.dim,
        "stable": res.stable,
        "next_dim": res.next_dim,
        "window_size": res.window_size,
        "cycles": res.cycles,
        "boundaries": res.boundaries,
        "representatives": [{n: c.render() for n, c in zip(names, r) if c} for r in res.representatives],
        "densities": [d.render() for d in res.densities],
    }]


def cmd_cosymmetries(pf, args):
    system = _system(pf)
    try:
        basis = conslaw.cosymmetry_solve(system, _trunc(args, 1))
    except conslaw.ConsLawError as e:
        raise Rejected(str(e)) from e
    return [{"psi": c.render(), "order": c.order, "degree": c.degree} for c in basis]


def cmd_conservation_check(pf, args):
    system = _system(pf)
    out = []
    for name, flux in pf.currents:
        ok, lam = conslaw.current_divergence_check(system, conslaw.make_current(system, flux))
        out.append({"name": name, "kind": "current", "conserved": ok, "Lambda": lam.render()})
    for name, comps in pf.cosymmetries:
        sec = Section(comps, "P1_hat")
        eq5 = conslaw.check_cosymmetry(system, sec).is_zero()
        res = conslaw.prop41_residual(system, sec)
        out.append({"name": name, "kind": "cosymmetry", "on_shell_cosymmetry": eq5,
                    "prop41_residual": _sec(res), "prop41_residual_zero": res.is_zero()})
    return out


def cmd_to_cosymmetry(pf, args):
    system = _system(pf)
    out = []
    failed = []
    for name, flux in pf.currents:
        try:
            cos = conslaw.current_to_cosymmetry(system, conslaw.make_current(system, flux))
            out.append({"name": name, "psi": cos.render()})
        except conslaw.ConsLawError as e:
            out.append({"name": name, "error": str(e)})
            failed.append(name)
    if failed:
        raise Rejected(f"not conserved: {', '.join(failed)}", out)
    return out


def cmd_compare(pf, args):
    if pf.compat:
        raise ValidationFailure("the comparison needs a normal equation (no compat operators)")
    system = _system(pf)
    report = conslaw.compare_routes(system, _trunc(args, 1), args.bound)
    return [report.to_dict()]


HANDLERS = {
    "linearize": cmd_linearize,
    "adjoint": cmd_adjoint,
    "euler": cmd_euler,
    "reduce": cmd_reduce,
    "kt-check": cmd_kt_check,
    "kt-homology": cmd_kt_homology,
    "cosymmetries": cmd_cosymmetries,
    "conservation-check": cmd_conservation_check,
    "to-cosymmetry": cmd_to_cosymmetry,
    "compare": cmd_compare,
}


# ------------------------------------------------------------------ output


def _bounds(args) -> dict:
    return {
        "jet_order": args.jet_order,
        "degree": args.degree,
        "base_degree": args.base_degree,
        "antighost": args.antighost,
        "bound": args.bound,
    }


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, int, str)) or x is None:
        return x
    if isinstance(x, type(Q(0))):
        return str(x)
    return str(x)


def _text(x, indent=0) -> list:
    pad = "  " * indent
    lines = []
    if isinstance(x, dict):
        for k, v in x.items():
            if isinstance(v, dict) and v or isinstance(v, list) and not all(isinstance(i, str) for i in v):
                lines.append(f"{pad}{k}:")
                lines.extend(_text(v, indent + 1))
            elif isinstance(v, list):
                lines.append(f"{pad}{k}: [{', '.join(map(str, v))}]")
            else:
                lines.append(f"{pad}{k}: {v}")
    elif isinstance(x, list):
        for i, v in enumerate(x):
            if isinstance(v, (dict, list)):
                lines.append(f"{pad}- [{i + 1}]")
                lines.extend(_text(v, indent + 1))
            else:
                lines.append(f"{pad}- {v}")
    else:
        lines.append(f"{pad}{x}")
    return lines


def render_output(pf, args, results, error=None) -> str:
    if args.json:
        doc = {"problem": _problem_json(pf), "command": args.command, "bounds": _bounds(args),
               "results": _jsonable(results)}
        if error is not None:
            doc["error"] = error
        return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"
    if args.command in ("kt-check", "kt-homology") and results:
        head = [results[0]["summary"]]
        rest = {k: v for k, v in results[0].items() if k != "summary"}
        return "\n".join(head + _text(_jsonable(rest))) + "\n"
    lines = [f"# {args.command} {pf.name}"]
    lines += _text(_jsonable(results))
    if error is not None:
        lines.append(f"error: {error}")
    return "\n".join(lines) + "\n"


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=stderr,
                        format="%(name)s: %(message)s")
    threads = os.environ.get("JETKT_THREADS")
    if threads:
        log.info("JETKT_THREADS=%s (advisory; assembly runs in-process)", threads)
    path = Path(args.problem)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        print(f"jetkt: cannot read {path}: {e}", file=stderr)
        return EXIT_USAGE
    try:
        pf = parse_problem(text, name=path.stem)
    except ParseError as e:
        print(f"{path}:{e.line}:{e.col}: {e.code} {e.message}", file=stderr)
        return EXIT_PARSE
    code, error, results = EXIT_OK, None, []
    try:
        results = HANDLERS[args.command](pf, args)
    except ValidationFailure as e:
        code, error = EXIT_VALIDATION, str(e)
    except Rejected as e:
        code, error = EXIT_REJECTED, str(e.args[0])
        if len(e.args) > 1:
            results = e.args[1]
    except (koszultate.TruncationError, ReductionError, conslaw.ConsLawError) as e:
        code, error = EXIT_REJECTED, str(e)
    text = render_output(pf, args, results, error)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        stdout.write(text)
    if error is not None:
        print(f"jetkt: {error}", file=stderr)
    return code


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
