"""Random samples on the antifield side, shared by unit and acceptance tests."""

from jetkt.cdiff import MultiLinOp
from jetkt.expr import DiffPoly, Q, multi_indices
from jetkt.jetcalc import Section
from jetkt.koszultate import TruncationSpec, window


def window_monomials(setup, antighosts, jet_order=1, degree=1):
    trunc = TruncationSpec(max(antighosts), jet_order, degree, 0)
    out = []
    for p in antighosts:
        out += window(setup, trunc, p)
    return out


def random_khat(rnd, setup, monomials, terms=3):
    """Random kappa-hat section with mixed-parity coefficients."""
    ctx = setup.ctx
    return [DiffPoly(ctx, {m: Q(rnd.randint(-3, 3)) for m in rnd.sample(monomials, terms)})
            for _ in setup.fields()]


def random_multilinear(rnd, setup, arities=(0, 1, 1, 2), terms=2):
    """Random graded-homogeneous element of F(alpha) (x) P_hat.

    Each component gets a few monomials (u-coefficient) * (argument
    coordinates); the argument parity always matches the slot parity so the
    element is even overall.
    """
    ctx = setup.ctx
    fields = setup.fields()
    args = [ctx.field_symbol(f, s) for f in fields for s in multi_indices(ctx.n, 1)]
    coefs = window(setup, TruncationSpec(0, 1, 1, 0), 0)
    comps = []
    for f in fields:
        acc = DiffPoly(ctx)
        for _ in range(terms):
            picked = [rnd.choice(args) for _ in range(rnd.choice(arities))]
            if sum(s.var for s in picked) % 2 != f[1] % 2:
                continue
            p = DiffPoly(ctx, {rnd.choice(coefs): Q(rnd.randint(1, 3))})
            for s in picked:
                p = p * DiffPoly.symbol(ctx, s)
            acc = acc + p
        comps.append(acc)
    parities = [f[1] & 1 for f in fields]
    return MultiLinOp(Section(comps, "kappa_hat", parities), fields)
