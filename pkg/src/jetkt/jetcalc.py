"""Differential calculus on jet spaces and horizontal jets of antifields.

Total derivatives act on every non-base symbol by prolongation, so on
antifield coordinates they behave exactly as on the original jets.  The
Euler operator, linearizations and evolutionary fields are taken with
respect to a chosen set of *fields* (dependents, antifields, or both).

Equations are given in solved form ``leading = rhs``; the principal symbols
are the derivatives of leadings, and reduction modulo the equation ideal is
the terminating rewrite that eliminates them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

from .expr import (
    ANTI,
    BASE,
    DEP,
    DiffPoly,
    JetContext,
    JetSymbol,
    Q,
    mi_add,
    mi_le,
    mi_sub,
    mi_unit,
    mono_mul,
    mono_parity,
    partial_derivative,
    substitute,
)


class NonConfluentError(ValueError):
    """Cross-derivatives of two equations reduce to different normal forms."""

    def __init__(self, pair, difference):
        super().__init__(f"equations {pair[0]} and {pair[1]} are not confluent")
        self.pair = pair
        self.difference = difference


class ReductionError(RuntimeError):
    pass


# ---------------------------------------------------------------- sections


class Section:
    """A vector of polynomials: an element of a module such as kappa or P_i.

    ``parities`` are the parities of the module's basis elements (not of the
    coefficients); they only matter for graded adjoints.
    """

    __slots__ = ("components", "target", "parities")

    def __init__(self, components: Sequence[DiffPoly], target: str = "kappa", parities=None):
        self.components = tuple(components)
        self.target = target
        self.parities = tuple(parities) if parities is not None else (0,) * len(self.components)
        if len(self.parities) != len(self.components):
            raise ValueError("parities do not match component count")

    @property
    def ctx(self) -> JetContext:
        return self.components[0].ctx

    def __len__(self):
        return len(self.components)

    def __getitem__(self, k):
        return self.components[k]

    def __iter__(self):
        return iter(self.components)

    def _same(self, comps):
        return Section(comps, self.target, self.parities)

    def __add__(self, other: "Section") -> "Section":
        if len(other) != len(self):
            raise ValueError("rank mismatch")
        return self._same([a + b for a, b in zip(self, other)])

    def __sub__(self, other: "Section") -> "Section":
        if len(other) != len(self):
            raise ValueError("rank mismatch")
        return self._same([a - b for a, b in zip(self, other)])

    def __neg__(self):
        return self._same([-a for a in self])

    def scale(self, c) -> "Section":
        return self._same([a * c for a in self])

    def map(self, fn) -> "Section":
        return self._same([fn(a) for a in self])

    def is_zero(self) -> bool:
        return all(not a for a in self)

    def __eq__(self, other):
        if not isinstance(other, Section):
            return NotImplemented
        return self.components == other.components

    __hash__ = None

    def render(self) -> list:
        return [a.render() for a in self]

    def __repr__(self):
        return f"Section({self.target}, {self.render()})"


def as_section(f) -> Section:
    if isinstance(f, Section):
        return f
    return Section([f])


# ------------------------------------------------------- total derivatives


@lru_cache(maxsize=1 << 20)
def _d_mono(m: tuple, i: int) -> tuple:
    out: dict = {}
    for k, s in enumerate(m):
        if s.kind == BASE:
            if s.var != i:
                continue
            img = ()
        else:
            img = (s.prolong(i),)
        sg1, t = mono_mul(m[:k], img)
        if not sg1:
            continue
        sg2, t = mono_mul(t, m[k + 1:])
        if not sg2:
            continue
        out[t] = out.get(t, 0) + sg1 * sg2
    return tuple((mm, c) for mm, c in out.items() if c)


def total_derivative(f: DiffPoly, i: int) -> DiffPoly:
    if not 0 <= i < f.ctx.n:
        raise IndexError(f"no independent variable with index {i}")
    out: dict = {}
    for m, c in f.terms.items():
        for mm, k in _d_mono(m, i):
            v = c * k
            w = out.get(mm)
            out[mm] = v if w is None else w + v
    return DiffPoly._raw(f.ctx, {m: c for m, c in out.items() if c})


def total_derivative_sigma(f: DiffPoly, sigma) -> DiffPoly:
    for i, k in enumerate(sigma):
        for _ in range(k):
            f = total_derivative(f, i)
    return f


def _minus_d_sigma(f: DiffPoly, sigma) -> DiffPoly:
    g = total_derivative_sigma(f, sigma)
    return -g if sum(sigma) & 1 else g


# ------------------------------------------------------------ derivations


def _apply_derivation(f: DiffPoly, image, odd: bool) -> DiffPoly:
    """Apply the derivation sending each symbol ``s`` to ``image(s)``.

    ``image`` returns a DiffPoly or None (for symbols it kills).  For odd
    derivations the Koszul sign of the prefix is applied.
    """
    ctx = f.ctx
    out: dict = {}
    for m, c in f.terms.items():
        prefix_parity = 0
        for k, s in enumerate(m):
            img = image(s)
            if img is not None and img.terms:
                coef = -c if (odd and prefix_parity) else c
                pre, post = m[:k], m[k + 1:]
                for im, ic in img.terms.items():
                    sg1, t = mono_mul(pre, im)
                    if not sg1:
                        continue
                    sg2, t = mono_mul(t, post)
                    if not sg2:
                        continue
                    v = coef * ic if sg1 * sg2 > 0 else -(coef * ic)
                    w = out.get(t)
                    out[t] = v if w is None else w + v
            if s.kind == ANTI and s.var & 1:
                prefix_parity ^= 1
    return DiffPoly._raw(ctx, {m: c for m, c in out.items() if c})


def evolutionary_apply(phi: Mapping, f: DiffPoly) -> DiffPoly:
    """Ev_phi(f) = sum D_sigma(phi^v) * dF/dv_sigma with Koszul signs.

    ``phi`` maps field keys ``(kind, var, comp)`` to generating polynomials,
    or is a :class:`Section` over the dependents.
    """
    if isinstance(phi, Section):
        phi = {(DEP, j, 0): g for j, g in enumerate(phi)}
    parities = set()
    for (kind, var, _), g in phi.items():
        if g:
            p = g.parity
            if p is None:
                raise ValueError("generating section must be parity-homogeneous")
            parities.add(p ^ (var & 1 if kind == ANTI else 0))
    if len(parities) > 1:
        raise ValueError("evolutionary field of mixed parity")
    odd = parities == {1}
    cache: dict = {}

    def image(s):
        if s.kind == BASE:
            return None
        g = phi.get(s.field)
        if g is None:
            return None
        r = cache.get(s)
        if r is None:
            r = total_derivative_sigma(g, s.sigma)
            cache[s] = r
        return r

    return _apply_derivation(f, image, odd)


# ---------------------------------------------------- linearization, Euler


def _field_parity(fld) -> int:
    kind, var, _ = fld
    return var & 1 if kind == ANTI else 0


def linearize(f, extended: bool = False, fields=None, row_parities=None):
    """Linearization l_f = sum (df/dv_sigma) D_sigma as a CDiffOp.

    Columns are the dependents, plus antifields when ``extended``; an explicit
    ``fields`` list overrides both.
    """
    from .cdiff import CDiffOp

    sec = as_section(f)
    ctx = sec.ctx
    if fields is None:
        fields = ctx.fields(antifields=extended)
    col = {fld: k for k, fld in enumerate(fields)}
    entries: dict = {}
    for r, fr in enumerate(sec):
        seen = set()
        for m in fr.terms:
            for s in m:
                if s.kind != BASE and s.field in col and s not in seen:
                    seen.add(s)
        for s in sorted(seen):
            d = partial_derivative(fr, s)
            if d:
                entries.setdefault((r, col[s.field]), {})[s.sigma] = d
    rows = row_parities if row_parities is not None else sec.parities
    return CDiffOp(ctx, len(sec), len(fields), entries, rows, [_field_parity(f) for f in fields])


def euler(density: DiffPoly, targets=None, right: bool = False) -> Section:
    """Variational derivative E(f)_v = sum_sigma (-D)_sigma (df/dv_sigma).

    Derivatives are left derivatives unless ``right``; the two differ by
    (-1)^{p(m) + 1} on monomials m for odd fields v.
    """
    ctx = density.ctx
    if targets is None:
        targets = ctx.fields()
    by_field: dict = {}
    for m in density.terms:
        for s in m:
            if s.kind != BASE:
                by_field.setdefault(s.field, set()).add(s)
    flipped = None
    comps = []
    for fld in targets:
        src = density
        if right and _field_parity(fld):
            if flipped is None:
                flipped = DiffPoly._raw(ctx, {m: (c if mono_parity(m) else -c) for m, c in density.terms.items()})
            src = flipped
        acc = DiffPoly(ctx)
        for s in sorted(by_field.get(tuple(fld), ())):
            d = partial_derivative(src, s)
            if d:
                acc = acc + _minus_d_sigma(d, s.sigma)
        comps.append(acc)
    return Section(comps, "kappa_hat", [_field_parity(f) for f in targets])


# -------------------------------------------------------- horizontal forms


@dataclass(frozen=True)
class HorizontalForm:
    """Horizontal q-form: increasing index tuples -> coefficients."""

    ctx: JetContext
    degree: int
    components: dict = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for idx, c in self.components.items():
            idx = tuple(idx)
            if len(idx) != self.degree or list(idx) != sorted(set(idx)):
                raise ValueError(f"bad index tuple {idx} for a {self.degree}-form")
            if c:
                clean[idx] = c
        object.__setattr__(self, "components", clean)

    @classmethod
    def from_current(cls, ctx: JetContext, flux: Sequence[DiffPoly]) -> "HorizontalForm":
        """(n-1)-form whose horizontal differential is (sum_i D_i P_i) dx_1^...^dx_n."""
        n = ctx.n
        if len(flux) != n:
            raise ValueError("current needs one component per independent variable")
        comps = {}
        for i, p in enumerate(flux):
            idx = tuple(k for k in range(n) if k != i)
            comps[idx] = -p if i & 1 else p
        return cls(ctx, n - 1, comps)

    def current(self) -> list:
        """Inverse of :meth:`from_current`."""
        n = self.ctx.n
        if self.degree != n - 1:
            raise ValueError("not an (n-1)-form")
        out = []
        for i in range(n):
            c = self.components.get(tuple(k for k in range(n) if k != i), DiffPoly(self.ctx))
            out.append(-c if i & 1 else c)
        return out

    def top_coefficient(self) -> DiffPoly:
        if self.degree != self.ctx.n:
            raise ValueError("not a top-degree form")
        return self.components.get(tuple(range(self.ctx.n)), DiffPoly(self.ctx))

    def is_zero(self) -> bool:
        return not self.components

    def __add__(self, other: "HorizontalForm") -> "HorizontalForm":
        if other.degree != self.degree:
            raise ValueError("degree mismatch")
        comps = dict(self.components)
        for k, v in other.components.items():
            comps[k] = comps[k] + v if k in comps else v
        return HorizontalForm(self.ctx, self.degree, comps)

    def render(self) -> dict:
        names = self.ctx.independents
        return {
            "^".join("d" + names[i] for i in idx) or "1": c.render()
            for idx, c in sorted(self.components.items())
        }


def horizontal_d(omega: HorizontalForm) -> HorizontalForm:
    n = omega.ctx.n
    if omega.degree >= n:
        return HorizontalForm(omega.ctx, omega.degree + 1, {})
    comps: dict = {}
    for idx, c in omega.components.items():
        for j in range(n):
            if j in idx:
                continue
            d = total_derivative(c, j)
            if not d:
                continue
            before = sum(1 for i in idx if i < j)
            new = tuple(sorted(idx + (j,)))
            term = -d if before & 1 else d
            comps[new] = comps[new] + term if new in comps else term
    return HorizontalForm(omega.ctx, omega.degree + 1, comps)


# -------------------------------------------------------- equation systems


class EquationSystem:
    """Equations ``F_a = leading_a - rhs_a`` in autoreduced solved form."""

    def __init__(self, ctx: JetContext, equations: Sequence, check_confluence: bool = True):
        self.ctx = ctx
        self.equations = [(lead, rhs) for lead, rhs in equations]
        if not self.equations:
            raise ValueError("empty equation system")
        self._leads_by_var: dict = {}
        for a, (lead, rhs) in enumerate(self.equations):
            if not isinstance(lead, JetSymbol) or lead.kind != DEP:
                raise ValueError("leading term must be a dependent jet symbol")
            if rhs.ctx != ctx:
                raise ValueError("rhs in a different context")
            if any(s.kind == ANTI for s in rhs.symbols()):
                raise ValueError("rhs may not contain antifields")
            for b, (other, _) in enumerate(self.equations[:a]):
                if other.var == lead.var and (mi_le(other.sigma, lead.sigma) or mi_le(lead.sigma, other.sigma)):
                    raise ValueError(f"leading of equation {a} is a derivative of (or equal to) leading of {b}")
            self._leads_by_var.setdefault(lead.var, []).append((a, lead.sigma))
        for a, (lead, rhs) in enumerate(self.equations):
            bad = [s for s in rhs.symbols() if self.is_principal(s)]
            if bad:
                raise ValueError(f"rhs of equation {a} contains principal symbol {ctx.render_symbol(bad[0])}")
        self._nf_cache: dict = {}
        self._depth = 0
        if check_confluence:
            self.check_confluence()

    @property
    def rank(self) -> int:
        return len(self.equations)

    @property
    def F(self) -> Section:
        return Section([DiffPoly.symbol(self.ctx, lead) - rhs for lead, rhs in self.equations], "P1")

    def order(self) -> int:
        return max(max(lead.order, rhs.jet_order()) for lead, rhs in self.equations)

    def is_principal(self, s: JetSymbol) -> bool:
        return self._divisor(s) is not None

    def _divisor(self, s: JetSymbol):
        if s.kind != DEP:
            return None
        for a, sig in self._leads_by_var.get(s.var, ()):
            if mi_le(sig, s.sigma):
                return a, mi_sub(s.sigma, sig)
        return None

    def check_confluence(self):
        for var, leads in self._leads_by_var.items():
            for x in range(len(leads)):
                for y in range(x + 1, len(leads)):
                    (a, sa), (b, sb) = leads[x], leads[y]
                    lcm = tuple(max(p, q) for p, q in zip(sa, sb))
                    ga = self.reduce(total_derivative_sigma(self.equations[a][1], mi_sub(lcm, sa)))
                    gb = self.reduce(total_derivative_sigma(self.equations[b][1], mi_sub(lcm, sb)))
                    if ga != gb:
                        raise NonConfluentError((a, b), ga - gb)

    # normal forms -----------------------------------------------------

    def _symbol_nf(self, s: JetSymbol):
        hit = self._nf_cache.get(s)
        if hit is not None:
            return hit
        div = self._divisor(s)
        if div is None:
            res = (DiffPoly.symbol(self.ctx, s), {})
        else:
            self._depth += 1
            if self._depth > 200:
                self._depth = 0
                raise ReductionError("reduction does not terminate; check the ranking of the system")
            try:
                a, tau = div
                g = total_derivative_sigma(self.equations[a][1], tau)
                nf, lam = self._poly_nf(g)
            finally:
                self._depth -= 1
            lam = dict(lam)
            key = (a, tau)
            lam[key] = lam[key] + 1 if key in lam else self.ctx.const(1)
            res = (nf, lam)
        self._nf_cache[s] = res
        return res

    def _poly_nf(self, g: DiffPoly):
        ctx = self.ctx
        nf_total = DiffPoly(ctx)
        lam_total: dict = {}
        for m, c in g.terms.items():
            prefix = ctx.const(c)
            for k, s in enumerate(m):
                nf_s, lam_s = self._symbol_nf(s)
                if lam_s:
                    suffix = DiffPoly._raw(ctx, {m[k + 1:]: Q(1)})
                    outer = prefix * suffix
                    for key, coef in lam_s.items():
                        add = outer * coef
                        lam_total[key] = lam_total[key] + add if key in lam_total else add
                prefix = prefix * nf_s
                if not prefix:
                    break
            nf_total = nf_total + prefix
        return nf_total, {k: v for k, v in lam_total.items() if v}

    def reduce(self, f: DiffPoly) -> DiffPoly:
        rule = {}
        for s in f.symbols():
            if self.is_principal(s):
                rule[s] = self._symbol_nf(s)[0]
        return substitute(f, rule) if rule else f

    def decompose(self, f: DiffPoly):
        nf, lam = self._poly_nf(f)
        return lam, nf


def reduce_mod_equation(f, system: EquationSystem):
    if isinstance(f, Section):
        return f.map(system.reduce)
    return system.reduce(f)


def ideal_decompose(f: DiffPoly, system: EquationSystem):
    """Return ``(Lambda, r)`` with ``f = Lambda(F) + r`` and r the normal form."""
    from .cdiff import CDiffOp

    lam, nf = system.decompose(f)
    entries: dict = {}
    for (a, tau), coef in lam.items():
        entries.setdefault((0, a), {})[tau] = coef
    op = CDiffOp(system.ctx, 1, system.rank, entries)
    return op, nf


def jet_symbols(ctx: JetContext, max_order: int, fields=None) -> list:
    """All jet symbols of the given fields up to ``max_order``, in symbol order."""
    from .expr import multi_indices

    if fields is None:
        fields = ctx.fields()
    out = [ctx.field_symbol(fld, sig) for fld in fields for sig in multi_indices(ctx.n, max_order)]
    return sorted(out)


def d_unit(ctx: JetContext, i: int):
    return mi_unit(ctx.n, i)


__all__ = [
    "Section",
    "HorizontalForm",
    "EquationSystem",
    "NonConfluentError",
    "ReductionError",
    "total_derivative",
    "total_derivative_sigma",
    "linearize",
    "euler",
    "evolutionary_apply",
    "horizontal_d",
    "reduce_mod_equation",
    "ideal_decompose",
    "jet_symbols",
    "mi_add",
]
