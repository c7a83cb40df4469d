"""Conservation laws: cosymmetries, the two characterizations and their comparison.

Everything is a bounded linear ansatz solved exactly; negative answers are
always reported together with the bound they hold up to.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .cdiff import CDiffOp, cdiff_adjoint, cdiff_apply, cdiff_compose
from .expr import BASE, DEP, DiffPoly, Q, multi_indices
from .jetcalc import (
    EquationSystem,
    HorizontalForm,
    Section,
    horizontal_d,
    ideal_decompose,
    linearize,
    total_derivative,
)
from .koszultate import TruncationSpec, _bounded_monomials, monomial_rank
from .linalg import nullspace, rref, solve

log = logging.getLogger(__name__)


class ConsLawError(ValueError):
    pass


@dataclass
class Cosymmetry:
    psi: Section
    provenance: str = "solver"

    @property
    def order(self) -> int:
        return max((c.jet_order() for c in self.psi), default=0)

    @property
    def degree(self) -> int:
        return max((c.degree() for c in self.psi), default=0)

    def render(self) -> list:
        return self.psi.render()


@dataclass
class ConservedCurrent:
    omega: HorizontalForm
    Lambda: CDiffOp

    def flux(self) -> list:
        return self.omega.current()


# ------------------------------------------------------------ helpers


def _as_section(psi, target="P1_hat") -> Section:
    if isinstance(psi, Cosymmetry):
        return psi.psi
    if isinstance(psi, Section):
        return psi
    if isinstance(psi, DiffPoly):
        return Section([psi], target)
    return Section(list(psi), target)


def _poly_vec(f: DiffPoly, tag, out: dict):
    for m, c in f.terms.items():
        out[tag + (m,)] = c


def _section_vec(sec, reduce=None, tag=()) -> dict:
    out: dict = {}
    for k, comp in enumerate(sec):
        _poly_vec(reduce(comp) if reduce else comp, tag + (k,), out)
    return out


def _op_vec(op: CDiffOp, reduce=None, tag=()) -> dict:
    out: dict = {}
    for (r, c), ent in op.entries.items():
        for s, a in ent.items():
            _poly_vec(reduce(a) if reduce else a, tag + (r, c, s), out)
    return out


def _vec_add(a: dict, b: dict) -> dict:
    out = dict(a)
    for k, v in b.items():
        w = out.get(k, 0) + v
        if w:
            out[k] = w
        else:
            out.pop(k, None)
    return out


def _symbols(system: EquationSystem, max_order: int, on_shell: bool) -> list:
    ctx = system.ctx
    out = []
    for fld in ctx.fields():
        for sig in multi_indices(ctx.n, max_order):
            s = ctx.field_symbol(fld, sig)
            if not (on_shell and system.is_principal(s)):
                out.append(s)
    return sorted(out)


def ansatz_monomials(system: EquationSystem, jet_order: int, degree: int, base_degree: int,
                     on_shell: bool = True) -> list:
    """Products of a base monomial and a jet monomial inside the window."""
    ctx = system.ctx
    jets = _symbols(system, jet_order, on_shell)
    bases = [ctx.base(i) for i in range(ctx.n)]
    xs = _bounded_monomials(bases, base_degree)
    us = _bounded_monomials(jets, degree)
    return [x + u for u in us for x in xs]


def _base_degree(f: DiffPoly) -> int:
    return f.degree(kinds=(BASE,))


def _min_degree(sec) -> int:
    degs = [sum(1 for s in m if s.kind == DEP) for comp in sec for m in comp.terms]
    return min(degs, default=0)


def lF_star(system: EquationSystem) -> CDiffOp:
    return cdiff_adjoint(linearize(system.F))


def _row_operator(ops, ctx, cols) -> CDiffOp:
    entries = {}
    for r, op in enumerate(ops):
        for (_, c), e in op.entries.items():
            entries[(r, c)] = e
    return CDiffOp(ctx, len(ops), cols, entries)


def _unit_op(ctx, rows, cols, r, c, sigma, mono) -> CDiffOp:
    return CDiffOp(ctx, rows, cols, {(r, c): {sigma: DiffPoly._raw(ctx, {mono: Q(1)})}})


def _assemble_op(ctx, rows, cols, keys, sol) -> CDiffOp:
    entries: dict = {}
    for k, a in sol.items():
        r, c, s, m = keys[k]
        ent = entries.setdefault((r, c), {})
        term = DiffPoly._raw(ctx, {m: Q(a)})
        ent[s] = ent[s] + term if s in ent else term
    return CDiffOp(ctx, rows, cols, entries)


# ------------------------------------------------------------ cosymmetries


def check_cosymmetry(system: EquationSystem, psi) -> Section:
    """The on-shell residual of l_F^*(psi); zero for cosymmetries."""
    sec = _as_section(psi)
    return cdiff_apply(lF_star(system), list(sec)).map(system.reduce)


def cosymmetry_solve(system: EquationSystem, bounds: TruncationSpec) -> list:
    """Basis of solutions of l_F^*(psi) = 0 on the equation inside ``bounds``."""
    ctx = system.ctx
    monos = ansatz_monomials(system, bounds.jet_order_max, bounds.poly_degree_max, bounds.base_degree_max)
    if not monos:
        raise ConsLawError("empty ansatz; raise --jet-order, --degree or --base-degree")
    op = lF_star(system)
    keys = [(a, m) for a in range(system.rank) for m in monos]
    log.info("cosymmetry ansatz: %d unknowns", len(keys))
    columns = []
    for a, m in keys:
        comps = [DiffPoly(ctx) for _ in range(system.rank)]
        comps[a] = DiffPoly._raw(ctx, {m: Q(1)})
        columns.append(_section_vec(cdiff_apply(op, comps), system.reduce))
    vectors = []
    for combo in nullspace(columns):
        v: dict = {}
        for k, c in combo.items():
            v[keys[k]] = c
        vectors.append(v)
    basis = rref(vectors, key=lambda key: monomial_rank(key[1]) + (key[0],))
    basis.reverse()
    out = []
    for vec in basis:
        comps = [dict() for _ in range(system.rank)]
        for (a, m), c in vec.items():
            comps[a][m] = c
        cos = Cosymmetry(Section([DiffPoly(ctx, t) for t in comps], "P1_hat"))
        if not check_cosymmetry(system, cos).is_zero():
            raise AssertionError("solver produced a non-cosymmetry")
        out.append(cos)
    return out


# ------------------------------------------------- the Koszul-Tate route


def prop41_residual(system: EquationSystem, psi) -> Section:
    """l_F^*(psi) + l_psi^*(F), computed identically (off shell)."""
    sec = _as_section(psi)
    a = cdiff_apply(lF_star(system), list(sec))
    b = cdiff_apply(cdiff_adjoint(linearize(sec)), list(system.F))
    return Section([x + y for x, y in zip(a, b)], "kappa_hat")


@dataclass
class ThetaVerdict:
    member: bool
    bound: int
    witness: CDiffOp | None = None
    certified_nonmember: bool = False

    @property
    def label(self) -> str:
        return "member" if self.member else "not_found_up_to_bound"

    def to_dict(self) -> dict:
        d = {"verdict": self.label, "bound": self.bound}
        if self.witness is not None:
            d["witness"] = self.witness.render()
        if self.certified_nonmember:
            d["certified_nonmember"] = "restriction to the equation is nonzero"
        return d


def theta_membership(system: EquationSystem, psi, bound: int) -> ThetaVerdict:
    """Search a skew-adjoint box of order <= bound with box(F) = psi."""
    ctx = system.ctx
    sec = _as_section(psi)
    r = system.rank
    if sec.is_zero():
        return ThetaVerdict(True, bound, CDiffOp.zero(ctx, r, r))
    if any(system.reduce(c) for c in sec):
        # every element of Theta vanishes on the equation
        return ThetaVerdict(False, bound, None, certified_nonmember=True)
    order = max(c.jet_order() for c in sec)
    degree = max(0, max(c.degree() for c in sec) - _min_degree(system.F))
    base = max(_base_degree(c) for c in sec)
    monos = ansatz_monomials(system, order, degree, base, on_shell=False)
    sigmas = multi_indices(ctx.n, bound)
    keys = [(a, b, s, m) for a in range(r) for b in range(r) for s in sigmas for m in monos]
    log.info("theta ansatz: %d unknowns", len(keys))
    F = list(system.F)
    columns = []
    for key in keys:
        op = _unit_op(ctx, r, r, *key)
        v = _section_vec(cdiff_apply(op, F), tag=("F",))
        skew = op + cdiff_adjoint(op)
        v.update(_op_vec(skew, tag=("S",)))
        columns.append(v)
    sol = solve(columns, _section_vec(sec, tag=("F",)))
    if sol is None:
        return ThetaVerdict(False, bound)
    return ThetaVerdict(True, bound, _assemble_op(ctx, r, r, keys, sol))


# ------------------------------------------- the spectral-sequence route


@dataclass
class Prop42Verdict:
    certified: bool
    bound: int
    Delta: CDiffOp
    nabla: CDiffOp | None = None
    trivial: bool = False

    @property
    def label(self) -> str:
        return "certified" if self.certified else "not_found_up_to_bound"

    def to_dict(self) -> dict:
        d = {"verdict": self.label, "bound": self.bound, "Delta": self.Delta.render(),
             "trivial_on_equation": self.trivial}
        if self.nabla is not None:
            d["nabla"] = self.nabla.render()
        return d


def canonical_delta(system: EquationSystem, psi) -> CDiffOp:
    """Delta with l_F^*(psi) = Delta(F), read off from the reduction trace."""
    sec = _as_section(psi)
    residual = cdiff_apply(lF_star(system), list(sec))
    rows = []
    for j, comp in enumerate(residual):
        lam, nf = ideal_decompose(comp, system)
        if nf:
            raise ConsLawError(f"l_F^*(psi) component {j} does not vanish on the equation")
        rows.append(lam)
    return _row_operator(rows, system.ctx, system.rank)


def prop42_certificate(system: EquationSystem, psi, bound: int) -> Prop42Verdict:
    """Search a self-adjoint nabla with l_psi + Delta^* = nabla o l_F on the equation."""
    ctx = system.ctx
    sec = _as_section(psi).map(system.reduce)
    r = system.rank
    Delta = canonical_delta(system, sec)
    trivial = sec.is_zero()
    T = linearize(sec) + cdiff_adjoint(Delta)
    target = _op_vec(T, system.reduce, tag=("C",))
    zero = CDiffOp.zero(ctx, r, r)
    if not target:
        return Prop42Verdict(True, bound, Delta, zero, trivial)
    lF = linearize(system.F)
    order = max(c.jet_order() for c in sec)
    degree = max(c.degree() for c in sec)
    base = max(_base_degree(c) for c in sec)
    monos = ansatz_monomials(system, order, degree, base)
    sigmas = multi_indices(ctx.n, bound)
    keys = [(a, b, s, m) for a in range(r) for b in range(r) for s in sigmas for m in monos]
    log.info("nabla ansatz: %d unknowns", len(keys))
    columns = []
    for key in keys:
        op = _unit_op(ctx, r, r, *key)
        v = _op_vec(cdiff_compose(op, lF), system.reduce, tag=("C",))
        v.update(_op_vec(op - cdiff_adjoint(op), system.reduce, tag=("S",)))
        columns.append(v)
    sol = solve(columns, target)
    if sol is None:
        return Prop42Verdict(False, bound, Delta, None, trivial)
    return Prop42Verdict(True, bound, Delta, _assemble_op(ctx, r, r, keys, sol), trivial)


def verify_certificate(system: EquationSystem, psi, verdict: Prop42Verdict) -> bool:
    """Re-check the certificate identities directly on the equation."""
    if not verdict.certified:
        return False
    sec = _as_section(psi).map(system.reduce)
    lhs = linearize(sec) + cdiff_adjoint(verdict.Delta)
    rhs = cdiff_compose(verdict.nabla, linearize(system.F))
    same = (lhs - rhs).map_coefficients(system.reduce).is_zero()
    selfadj = (verdict.nabla - cdiff_adjoint(verdict.nabla)).map_coefficients(system.reduce).is_zero()
    ident = cdiff_apply(verdict.Delta, list(system.F))
    eq5 = cdiff_apply(lF_star(system), list(sec))
    return same and selfadj and all(not (a - b) for a, b in zip(ident, eq5))


# ------------------------------------------------------- currents


def make_current(system: EquationSystem, flux) -> HorizontalForm:
    return HorizontalForm.from_current(system.ctx, list(flux))


def current_divergence_check(system: EquationSystem, omega: HorizontalForm):
    """(conserved, Lambda) with coefficient of d-bar omega = Lambda(F) + remainder."""
    if omega.degree != system.ctx.n - 1:
        raise ConsLawError("a conserved current is a horizontal (n-1)-form")
    top = horizontal_d(omega).top_coefficient()
    lam, nf = ideal_decompose(top, system)
    return (not nf, lam)


def current_to_cosymmetry(system: EquationSystem, omega) -> Cosymmetry:
    if isinstance(omega, ConservedCurrent):
        omega = omega.omega
    ok, lam = current_divergence_check(system, omega)
    if not ok:
        raise ConsLawError("current is not conserved on the equation")
    one = [system.ctx.const(1)]
    psi = cdiff_apply(cdiff_adjoint(lam), one).map(system.reduce)
    return Cosymmetry(Section(list(psi), "P1_hat"), provenance="current")


def integrate_divergence(system: EquationSystem, f: DiffPoly):
    """A polynomial current P with sum_i D_i P_i = f, or None within the natural window."""
    ctx = system.ctx
    if not f:
        return [DiffPoly(ctx) for _ in range(ctx.n)]
    order = max(f.jet_order() - 1, 0)
    monos = ansatz_monomials(system, order, f.degree(), _base_degree(f) + 1, on_shell=False)
    keys = [(i, m) for i in range(ctx.n) for m in monos]
    columns = []
    for i, m in keys:
        columns.append(_section_vec([total_derivative(DiffPoly._raw(ctx, {m: Q(1)}), i)]))
    sol = solve(columns, _section_vec([f]))
    if sol is None:
        return None
    flux = [dict() for _ in range(ctx.n)]
    for k, a in sol.items():
        i, m = keys[k]
        flux[i][m] = a
    return [DiffPoly(ctx, t) for t in flux]


def cosymmetry_to_current(system: EquationSystem, psi):
    """Integrate <psi, F> when it is a total divergence identically."""
    sec = _as_section(psi)
    if not prop41_residual(system, sec).is_zero():
        return None
    pairing = DiffPoly(system.ctx)
    for a, b in zip(sec, system.F):
        pairing = pairing + a * b
    flux = integrate_divergence(system, pairing)
    if flux is None:
        return None
    omega = make_current(system, flux)
    ok, lam = current_divergence_check(system, omega)
    return ConservedCurrent(omega, lam) if ok else None


def round_trip(system: EquationSystem, cos: Cosymmetry) -> dict:
    cur = cosymmetry_to_current(system, cos)
    if cur is None:
        return {"status": "skipped"}
    back = current_to_cosymmetry(system, cur)
    same = all(not system.reduce(a - b) for a, b in zip(back.psi, _as_section(cos)))
    return {"status": "ok" if same else "mismatch", "current": cur, "psi": back}


# ------------------------------------------------------- comparison


def demonstration_probes(system: EquationSystem) -> list:
    """Elements of the equation ideal used to contrast the two triviality notions.

    ``D_x(F)`` has the order-1 skew witness D_x.  ``u D_x(F) + u_x F / 2`` has
    the witness u D_x + u_x / 2 and no witness of order 0.
    """
    ctx = system.ctx
    F0 = system.F[0]
    u = ctx.u(0)
    ux = ctx.u(0, ctx.sigma(**{ctx.independents[0]: 1}))
    first = total_derivative(F0, 0)
    constructed = u * first + (ux * F0).scale(Q(1, 2))

    def embed(g):
        comps = [DiffPoly(ctx) for _ in range(system.rank)]
        comps[0] = g
        return Section(comps, "P1_hat")

    dx = ctx.independents[0]
    return [(f"D_{dx}(F)", embed(first)), (f"u*D_{dx}(F) + 1/2*u_{dx}*F", embed(constructed))]


@dataclass
class CompareReport:
    bounds: TruncationSpec
    bound: int
    entries: list = field(default_factory=list)
    probes: list = field(default_factory=list)

    @property
    def nontrivial_both(self) -> int:
        return sum(1 for e in self.entries if e["route41_nontrivial"] and e["route42_nontrivial"])

    def to_dict(self) -> dict:
        return {
            "basis_dimension": len(self.entries),
            "nontrivial_route41": sum(1 for e in self.entries if e["route41_nontrivial"]),
            "nontrivial_route42": sum(1 for e in self.entries if e["route42_nontrivial"]),
            "basis": [
                {
                    "psi": e["psi"].render(),
                    "prop42": e["prop42"].to_dict(),
                    "prop41_residual_zero": e["prop41_residual_zero"],
                    "theta": e["theta"].to_dict(),
                }
                for e in self.entries
            ],
            "probes": [
                {
                    "name": p["name"],
                    "psi": p["psi"].render(),
                    "route42_trivial": p["route42_trivial"],
                    "route41": [v.to_dict() for v in p["route41"]],
                }
                for p in self.probes
            ],
        }


def compare_routes(system: EquationSystem, bounds: TruncationSpec, bound: int = 2, compat_ops=()) -> CompareReport:
    if compat_ops:
        raise ConsLawError("the comparison assumes a normal equation (no compatibility operators)")
    report = CompareReport(bounds, bound)
    for cos in cosymmetry_solve(system, bounds):
        cert = prop42_certificate(system, cos, bound)
        residual_zero = prop41_residual(system, cos).is_zero()
        theta = theta_membership(system, cos, bound)
        report.entries.append({
            "psi": cos.psi,
            "prop42": cert,
            "prop41_residual_zero": residual_zero,
            "theta": theta,
            "route41_nontrivial": residual_zero and not theta.member,
            "route42_nontrivial": cert.certified and not cert.trivial,
        })
    for name, psi in demonstration_probes(system):
        trivial42 = all(not system.reduce(c) for c in psi)
        verdicts = [theta_membership(system, psi, b) for b in range(0, max(bound, 1) + 1)]
        report.probes.append({"name": name, "psi": psi, "route42_trivial": trivial42, "route41": verdicts})
    return report


__all__ = [
    "Cosymmetry",
    "ConservedCurrent",
    "ConsLawError",
    "ThetaVerdict",
    "Prop42Verdict",
    "CompareReport",
    "ansatz_monomials",
    "check_cosymmetry",
    "cosymmetry_solve",
    "prop41_residual",
    "theta_membership",
    "prop42_certificate",
    "verify_certificate",
    "canonical_delta",
    "make_current",
    "current_divergence_check",
    "current_to_cosymmetry",
    "integrate_divergence",
    "cosymmetry_to_current",
    "round_trip",
    "compare_routes",
    "demonstration_probes",
]
