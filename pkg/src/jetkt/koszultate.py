"""Koszul-Tate data for an equation with a (possibly empty) compatibility chain.

Antifields of tier i are coordinates along P_i (odd for odd i).  The
differential is the odd evolutionary field whose generator is
``Phi = F + Delta_1(c^1) + ... + Delta_{k-2}(c^{k-2})``:

    delta(c^1_a)     = F_a
    delta(c^{i+1}_b) = (Delta_i c^i)_b

Homology of the complex of densities modulo divergences is computed in
finite windows, identifying a density class with its Euler image.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field, replace

from .cdiff import CDiffOp, MultiLinOp, cdiff_adjoint, cdiff_apply, cdiff_compose
from .expr import ANTI, BASE, DEP, DiffPoly, JetContext, Q, multi_indices
from .jetcalc import EquationSystem, Section, _apply_derivation, euler, linearize, total_derivative_sigma
from .linalg import Echelon, nullspace, rref

log = logging.getLogger(__name__)


class KTSetupError(ValueError):
    def __init__(self, message, residue=None):
        super().__init__(message)
        self.residue = residue


class TruncationError(ValueError):
    def __init__(self, message, required=None):
        super().__init__(message)
        self.required = required


@dataclass(frozen=True)
class TruncationSpec:
    antighost_max: int = 2
    jet_order_max: int = 2
    poly_degree_max: int = 2
    base_degree_max: int = 0

    def __post_init__(self):
        for k, v in self.__dict__.items():
            if not isinstance(v, int) or v < 0:
                raise ValueError(f"{k} must be a nonnegative integer")

    def widen(self, **kw) -> "TruncationSpec":
        return replace(self, **kw)


def retag(f: DiffPoly, ctx: JetContext) -> DiffPoly:
    """Move a polynomial to a context that declares at least its symbols."""
    return DiffPoly._raw(ctx, dict(f.terms))


def _retag_op(op: CDiffOp, ctx, row_parities, col_parities) -> CDiffOp:
    return CDiffOp(ctx, op.rows, op.cols,
                   {k: {s: retag(a, ctx) for s, a in e.items()} for k, e in op.entries.items()},
                   row_parities, col_parities)


class KTSetup:
    """Validated Koszul-Tate data.  Build through :func:`kt_setup`."""

    def __init__(self, system: EquationSystem, compat_ops):
        ranks = [system.rank] + [op.rows for op in compat_ops]
        self.ctx = system.ctx.with_tiers(ranks)
        ctx = self.ctx
        self.base_system = system
        self.system = EquationSystem(
            ctx, [(lead, retag(rhs, ctx)) for lead, rhs in system.equations], check_confluence=False)
        self.compat_ops = [
            _retag_op(op, ctx, [(i + 2) & 1] * op.rows, [(i + 1) & 1] * op.cols)
            for i, op in enumerate(compat_ops)
        ]
        self.F = Section([retag(f, ctx) for f in system.F], "P1")
        self.phi: dict = {}
        for a, fa in enumerate(self.F):
            self.phi[(ANTI, 1, a)] = fa
        for i, op in enumerate(self.compat_ops):
            tier = i + 1
            coords = [ctx.c(tier, b) for b in range(ranks[i])]
            img = cdiff_apply(op, coords)
            for b, g in enumerate(img):
                self.phi[(ANTI, tier + 1, b)] = g
        self._images: dict = {}

    @property
    def k(self) -> int:
        return len(self.compat_ops) + 2

    @property
    def tiers(self) -> tuple:
        return self.ctx.tiers

    @property
    def is_normal(self) -> bool:
        return not self.compat_ops

    def fields(self) -> list:
        return self.ctx.antifield_fields()

    def _image(self, s):
        if s.kind != ANTI:
            return None
        r = self._images.get(s)
        if r is None:
            r = total_derivative_sigma(self.phi[s.field], s.sigma)
            self._images[s] = r
        return r

    def delta(self, f: DiffPoly) -> DiffPoly:
        return _apply_derivation(f, self._image, odd=True)

    def lift(self, f: DiffPoly) -> DiffPoly:
        return retag(f, self.ctx)


def kt_setup(system: EquationSystem, compat_ops=()) -> KTSetup:
    compat_ops = list(compat_ops)
    prev = system.rank
    for i, op in enumerate(compat_ops):
        if op.cols != prev:
            raise KTSetupError(f"Delta_{i + 1} expects {op.cols} inputs but P_{i + 1} has rank {prev}")
        for e in op.entries.values():
            for a in e.values():
                if any(s.kind == ANTI for s in a.symbols()):
                    raise KTSetupError(f"Delta_{i + 1} has antifield-dependent coefficients")
        prev = op.rows
    setup = KTSetup(system, compat_ops)
    if setup.compat_ops:
        res = cdiff_apply(setup.compat_ops[0], list(setup.F))
        if not res.is_zero():
            raise KTSetupError("Delta_1(F) is not identically zero", res)
    for i in range(len(setup.compat_ops) - 1):
        comp = cdiff_compose(setup.compat_ops[i + 1], setup.compat_ops[i])
        if not comp.is_zero():
            raise KTSetupError(f"Delta_{i + 2} o Delta_{i + 1} is not zero", comp)
    return setup


def kt_delta(setup: KTSetup, f: DiffPoly) -> DiffPoly:
    return setup.delta(setup.lift(f))


def check_compatibility(setup: KTSetup) -> bool:
    """Delta_1 o l_F vanishes on the equation (Delta_1 is a compatibility operator)."""
    if not setup.compat_ops:
        return True
    comp = cdiff_compose(setup.compat_ops[0], linearize(setup.F))
    return comp.map_coefficients(setup.system.reduce).is_zero()


# ------------------------------------------------------------- windows


def _antifield_monomials(symbols, p):
    """Monomials in antifield symbols of total antighost exactly p."""
    out = []

    def rec(start, remaining, acc):
        if remaining == 0:
            out.append(tuple(acc))
            return
        for k in range(start, len(symbols)):
            s = symbols[k]
            g = s.var
            if g > remaining:
                continue
            acc.append(s)
            rec(k + 1 if s.var & 1 else k, remaining - g, acc)
            acc.pop()

    rec(0, p, [])
    return out


def _bounded_monomials(symbols, max_degree):
    out = []
    for d in range(max_degree + 1):
        out.extend(itertools.combinations_with_replacement(symbols, d))
    return out


def window(setup: KTSetup, trunc: TruncationSpec, p: int) -> list:
    """Basis monomials of antighost p inside the truncation window."""
    ctx = setup.ctx
    sigmas = multi_indices(ctx.n, trunc.jet_order_max)
    anti = sorted(ctx.field_symbol(f, s) for f in setup.fields() for s in sigmas)
    deps = sorted(ctx.field_symbol(f, s) for f in ctx.fields() for s in sigmas)
    bases = [ctx.base(i) for i in range(ctx.n)]
    a_part = _antifield_monomials(anti, p)
    u_part = _bounded_monomials(deps, trunc.poly_degree_max)
    x_part = _bounded_monomials(bases, trunc.base_degree_max)
    return [x + u + a for a in a_part for u in u_part for x in x_part]


# ------------------------------------------------------------ delta^2 check


@dataclass
class DeltaSquaredReport:
    basis_size: int
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def summary(self) -> str:
        status = "PASS" if self.passed else f"FAIL ({len(self.failures)} nonzero)"
        return f"delta^2 = 0: {status} ({self.basis_size} basis elements)"


def kt_delta_squared_check(setup: KTSetup, trunc: TruncationSpec) -> DeltaSquaredReport:
    ctx = setup.ctx
    report = DeltaSquaredReport(0)
    for p in range(1, trunc.antighost_max + 1):
        for m in window(setup, trunc, p):
            report.basis_size += 1
            f = DiffPoly._raw(ctx, {m: Q(1)})
            dd = setup.delta(setup.delta(f))
            if dd:
                report.failures.append((f.render(), dd.render()))
    return report


# ------------------------------------------------------- the kappa-hat side


def _tier_slices(setup: KTSetup) -> list:
    out, start = [], 0
    for r in setup.tiers:
        out.append(slice(start, start + r))
        start += r
    return out


def _coefficient_parity_split(f: DiffPoly):
    even, odd = {}, {}
    for m, c in f.terms.items():
        (odd if sum(s.var & 1 for s in m if s.kind == ANTI) & 1 else even)[m] = c
    return DiffPoly._raw(f.ctx, even), DiffPoly._raw(f.ctx, odd)


def _as_khat(setup, theta) -> tuple:
    if isinstance(theta, MultiLinOp):
        return list(theta.element), True
    return list(theta), False


def _wrap_khat(setup, comps, as_mlo):
    parities = [var & 1 for (_, var, _) in setup.fields()]
    sec = Section(comps, "kappa_hat", parities)
    return MultiLinOp(sec, setup.fields()) if as_mlo else sec


def lphi_star(setup: KTSetup, theta):
    """l_Phi^*(theta) = (-1)^{p(theta)} Delta^* o theta, extended linearly.

    Delta^*(p_1, p_2, ...) = (Delta_1^*(p_2), -Delta_2^*(p_3), ...); the parity
    of a homogeneous theta counts both its coefficient and its slot P_hat_i.
    With this overall sign the right Euler operator intertwines delta on
    densities with delta + l_Phi^* on kappa-hat.
    """
    comps, as_mlo = _as_khat(setup, theta)
    ctx = setup.ctx
    slices = _tier_slices(setup)
    out = [DiffPoly(ctx) for _ in comps]
    for i, op in enumerate(setup.compat_ops):
        adj = cdiff_adjoint(op)  # P_hat_{i+2} -> P_hat_{i+1}
        src = comps[slices[i + 1]]
        even = [_coefficient_parity_split(g)[0] for g in src]
        odd = [_coefficient_parity_split(g)[1] for g in src]
        slot_parity = (i + 2) & 1
        tier_sign = -1 if i & 1 else 1
        for part, cpar in ((even, 0), (odd, 1)):
            if all(not g for g in part):
                continue
            img = cdiff_apply(adj, part)
            sign = tier_sign * (-1 if (cpar + slot_parity) & 1 else 1)
            for b, g in enumerate(img):
                k = slices[i].start + b
                out[k] = out[k] + (g if sign > 0 else -g)
    return _wrap_khat(setup, out, as_mlo)


def kt_delta_khat(setup: KTSetup, theta):
    comps, as_mlo = _as_khat(setup, theta)
    return _wrap_khat(setup, [setup.delta(g) for g in comps], as_mlo)


def total_differential(setup: KTSetup, psi):
    """(delta + l_Phi^*)(psi) on kappa-hat elements or multilinear operators."""
    comps, as_mlo = _as_khat(setup, psi)
    a = kt_delta_khat(setup, comps)
    b = lphi_star(setup, comps)
    return _wrap_khat(setup, [x + y for x, y in zip(a, b)], as_mlo)


def coordinate_section(setup: KTSetup) -> list:
    return [DiffPoly.symbol(setup.ctx, setup.ctx.field_symbol(f)) for f in setup.fields()]


# ---------------------------------------------------------------- homology


def _vector(sec: Section) -> dict:
    out = {}
    for k, comp in enumerate(sec):
        for m, c in comp.terms.items():
            out[(k, m)] = c
    return out


def _euler_vector(setup: KTSetup, f: DiffPoly, antighost: int) -> dict:
    targets = setup.fields() if antighost > 0 else setup.ctx.fields()
    return _vector(euler(f, targets, right=True))


@dataclass
class HomologyResult:
    antighost: int
    dim: int
    representatives: list
    window_size: int
    cycles: int
    boundaries: int
    trunc: TruncationSpec
    stable: bool | None = None
    next_dim: int | None = None
    densities: list = field(default_factory=list)

    def summary(self) -> str:
        flag = {True: "stable", False: "UNSTABLE", None: "unchecked"}[self.stable]
        return f"H_{self.antighost}: dim {self.dim} ({flag}; window {self.window_size})"


def _homology_once(setup: KTSetup, trunc: TruncationSpec, p: int) -> HomologyResult:
    ctx = setup.ctx
    basis = window(setup, trunc, p)
    upper = window(setup, trunc, p + 1)
    log.info("homology H_%d: window %d, upper window %d", p, len(basis), len(upper))
    dens = [DiffPoly._raw(ctx, {m: Q(1)}) for m in basis]
    w_vecs = [_euler_vector(setup, f, p) for f in dens]
    d_vecs = [_euler_vector(setup, setup.delta(f), p - 1) for f in dens]
    kernel = nullspace(d_vecs)
    cycles = []
    for combo in kernel:
        z: dict = {}
        for k, a in combo.items():
            for key, c in w_vecs[k].items():
                v = z.get(key, 0) + a * c
                if v:
                    z[key] = v
                else:
                    z.pop(key, None)
        if z:
            cycles.append(z)
    cycles = rref(cycles, key=_cycle_key)
    bnd = Echelon()
    for g in upper:
        bnd.add(_euler_vector(setup, setup.delta(DiffPoly._raw(ctx, {g: Q(1)})), p))
    n_boundaries = bnd.rank
    reps = []
    for z in reversed(cycles):
        if bnd.add(z) is None:
            reps.append(z)
    sections = [_devector(setup, z) for z in reps]
    res = HomologyResult(p, len(reps), sections, len(basis), len(cycles), n_boundaries, trunc)
    res.densities = [density_from_euler(setup, sec) for sec in sections]
    return res


def _cycle_key(key):
    k, m = key
    return monomial_rank(m) + (k,)


def monomial_rank(m: tuple) -> tuple:
    """Ranking used to pick pivots: highest jet order, then degree, then symbols."""
    order = max((s.order for s in m if s.kind != BASE), default=0)
    udeg = sum(1 for s in m if s.kind == DEP)
    return (order, udeg, len(m), m)


def _devector(setup: KTSetup, vec: dict) -> Section:
    ctx = setup.ctx
    comps = [dict() for _ in setup.fields()]
    for (k, m), c in vec.items():
        comps[k][m] = c
    parities = [var & 1 for (_, var, _) in setup.fields()]
    return Section([DiffPoly(ctx, t) for t in comps], "kappa_hat", parities)


def density_from_euler(setup: KTSetup, image) -> DiffPoly:
    """A density whose antifield Euler image is ``image``.

    For f of antifield degree d, f = (1/d) sum_v E_v(f) c_v modulo total
    divergences (right Euler derivatives), and E_v(f) has antifield degree d - 1.
    """
    ctx = setup.ctx
    out = DiffPoly(ctx)
    for fld, comp in zip(setup.fields(), image):
        coord = DiffPoly.symbol(ctx, ctx.field_symbol(fld))
        by_deg: dict = {}
        for m, c in comp.terms.items():
            d = sum(1 for s in m if s.kind == ANTI) + 1
            by_deg.setdefault(d, {})[m] = c
        for d, terms in by_deg.items():
            out = out + (DiffPoly._raw(ctx, terms) * coord).scale(Q(1, d))
    return out


def truncated_homology(setup: KTSetup, trunc: TruncationSpec, p: int, check_stability: bool = True) -> HomologyResult:
    if p < 1:
        raise TruncationError("antighost must be at least 1")
    if trunc.antighost_max < p + 1:
        raise TruncationError(
            f"window must contain antighost {p + 1} to compute boundaries",
            required=trunc.widen(antighost_max=p + 1),
        )
    res = _homology_once(setup, trunc, p)
    if check_stability:
        nxt = _homology_once(setup, trunc.widen(jet_order_max=trunc.jet_order_max + 1), p)
        res.next_dim = nxt.dim
        res.stable = nxt.dim == res.dim
    return res


__all__ = [
    "KTSetup",
    "KTSetupError",
    "TruncationError",
    "TruncationSpec",
    "HomologyResult",
    "DeltaSquaredReport",
    "kt_setup",
    "kt_delta",
    "kt_delta_khat",
    "kt_delta_squared_check",
    "lphi_star",
    "total_differential",
    "truncated_homology",
    "check_compatibility",
    "window",
    "monomial_rank",
    "density_from_euler",
    "coordinate_section",
]
