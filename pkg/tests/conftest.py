import random
from pathlib import Path

import pytest

from jetkt.cdiff import CDiffOp
from jetkt.expr import DiffPoly, JetContext, Q, multi_indices
from jetkt.jetcalc import EquationSystem
from jetkt.koszultate import kt_setup

ROOT = Path(__file__).resolve().parent.parent
PROBLEMS = ROOT / "problems"


def xt_context():
    return JetContext(("x", "t"), ("u",))


def kdv_system():
    ctx = xt_context()
    s = ctx.sigma
    u, ux, uxxx = ctx.u(), ctx.u(0, s(x=1)), ctx.u(0, s(x=3))
    return EquationSystem(ctx, [(ctx.jet(0, s(t=1)), u * ux + uxxx)])


def heat_system():
    ctx = xt_context()
    s = ctx.sigma
    return EquationSystem(ctx, [(ctx.jet(0, s(t=1)), ctx.u(0, s(x=2)))])


def burgers_system():
    ctx = xt_context()
    s = ctx.sigma
    u, ux, uxx = ctx.u(), ctx.u(0, s(x=1)), ctx.u(0, s(x=2))
    return EquationSystem(ctx, [(ctx.jet(0, s(t=1)), u * ux + uxx)])


def grad_system():
    ctx = JetContext(("x", "y"), ("u",))
    s = ctx.sigma
    zero = ctx.const(0)
    return EquationSystem(ctx, [(ctx.jet(0, s(x=1)), zero), (ctx.jet(0, s(y=1)), zero)])


def grad_compat(ctx, sign=1):
    s = ctx.sigma
    return CDiffOp(ctx, 1, 2, {(0, 0): {s(y=1): ctx.const(1)}, (0, 1): {s(x=1): ctx.const(-sign)}})


def grad_setup(sign=1):
    system = grad_system()
    return kt_setup(system, [grad_compat(system.ctx, sign)])


def grad3_setup():
    """Gradient system in three variables with compat chain curl, div."""
    ctx = JetContext(("x", "y", "z"), ("u",))
    s = ctx.sigma
    zero, one, m1 = ctx.const(0), ctx.const(1), ctx.const(-1)
    system = EquationSystem(ctx, [(ctx.jet(0, s(**{v: 1})), zero) for v in "xyz"])
    curl = CDiffOp(ctx, 3, 3, {
        (0, 1): {s(z=1): one}, (0, 2): {s(y=1): m1},
        (1, 2): {s(x=1): one}, (1, 0): {s(z=1): m1},
        (2, 0): {s(y=1): one}, (2, 1): {s(x=1): m1},
    })
    div = CDiffOp(ctx, 1, 3, {(0, 0): {s(x=1): one}, (0, 1): {s(y=1): one}, (0, 2): {s(z=1): one}})
    return kt_setup(system, [curl, div])


@pytest.fixture
def rnd():
    return random.Random(20261016)


def even_symbols(ctx, max_order=2, base=True):
    syms = [ctx.base(i) for i in range(ctx.n)] if base else []
    for j in range(ctx.m):
        syms += [ctx.jet(j, sg) for sg in multi_indices(ctx.n, max_order)]
    return syms


def random_poly(rnd, ctx, symbols, terms=3, max_degree=3, coef=3) -> DiffPoly:
    """Random polynomial in the given (even or odd) symbols; odd squares vanish naturally."""
    acc = DiffPoly(ctx)
    for _ in range(terms):
        p = ctx.const(Q(rnd.randint(-coef, coef) or 1, rnd.randint(1, 2)))
        for _ in range(rnd.randint(0, max_degree)):
            p = p * DiffPoly.symbol(ctx, rnd.choice(symbols))
        acc = acc + p
    return acc


def random_operator(rnd, ctx, rows, cols, max_order=2, symbols=None) -> CDiffOp:
    symbols = symbols or even_symbols(ctx, 1)
    entries = {}
    for r in range(rows):
        for c in range(cols):
            ent = {}
            for sg in rnd.sample(multi_indices(ctx.n, max_order), 2):
                f = random_poly(rnd, ctx, symbols, terms=2, max_degree=2)
                if f:
                    ent[sg] = f
            if ent:
                entries[(r, c)] = ent
    return CDiffOp(ctx, rows, cols, entries)


# ------------------------------------------------------- acceptance report

ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
