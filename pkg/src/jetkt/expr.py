"""Graded-commutative differential polynomials over jet and antifield coordinates.

A :class:`DiffPoly` is a finite map from canonical monomials to exact
rational coefficients.  Monomials are sorted tuples of :class:`JetSymbol`;
odd symbols (antifields of odd tier) anticommute and square to zero.

The global symbol order is: base coordinates, then dependent jets by
``(j, |sigma|, sigma)``, then antifields by ``(tier, component, |sigma|, sigma)``.
Derivatives with respect to odd symbols are *left* derivatives.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping, NamedTuple

try:
    from gmpy2 import mpq as Q
except ImportError:  # pragma: no cover
    from fractions import Fraction as Q

__all__ = [
    "Q",
    "ContextError",
    "ParityError",
    "JetContext",
    "JetSymbol",
    "MultiIndex",
    "DiffPoly",
    "mi_unit",
    "mi_add",
    "mi_sub",
    "mi_le",
    "mi_binom",
    "mi_below",
    "mono_mul",
    "poly_arith",
    "partial_derivative",
    "substitute",
]

BASE, DEP, ANTI = 0, 1, 2

MultiIndex = tuple  # counts per independent variable, length n


class ContextError(ValueError):
    """Operands live in different jet contexts."""


class ParityError(ValueError):
    """A substitution or operator mixes parities."""


def mi_unit(n: int, i: int) -> MultiIndex:
    return tuple(1 if k == i else 0 for k in range(n))


def mi_add(a: MultiIndex, b: MultiIndex) -> MultiIndex:
    return tuple(x + y for x, y in zip(a, b))


def mi_sub(a: MultiIndex, b: MultiIndex) -> MultiIndex:
    return tuple(x - y for x, y in zip(a, b))


def mi_le(a: MultiIndex, b: MultiIndex) -> bool:
    return all(x <= y for x, y in zip(a, b))


def mi_binom(a: MultiIndex, b: MultiIndex) -> int:
    from math import comb

    r = 1
    for x, y in zip(a, b):
        r *= comb(x, y)
    return r


@lru_cache(maxsize=None)
def mi_below(a: MultiIndex) -> tuple:
    """All multi-indices rho <= a, componentwise."""
    out = [()]
    for x in a:
        out = [r + (k,) for r in out for k in range(x + 1)]
    return tuple(out)


@lru_cache(maxsize=None)
def multi_indices(n: int, max_order: int) -> tuple:
    """All multi-indices of length n with order <= max_order, graded order."""
    out = []
    for order in range(max_order + 1):
        out.extend(sorted(_compositions(n, order)))
    return tuple(out)


def _compositions(n, total):
    if n == 1:
        yield (total,)
        return
    for k in range(total + 1):
        for rest in _compositions(n - 1, total - k):
            yield (k,) + rest


class JetSymbol(NamedTuple):
    """A coordinate: base ``x_i``, jet ``u^j_sigma`` or antifield ``c^{tier}_{b,sigma}``.

    ``var`` is the base index, the dependent index or the tier (all 0-based
    except tiers, which start at 1).  ``comp`` is the antifield component.
    """

    kind: int
    var: int
    comp: int
    order: int
    sigma: tuple

    @property
    def parity(self) -> int:
        return self.var & 1 if self.kind == ANTI else 0

    @property
    def antighost(self) -> int:
        return self.var if self.kind == ANTI else 0

    @property
    def field(self) -> tuple:
        """Key of the underlying field, ignoring derivatives."""
        return (self.kind, self.var, self.comp)

    def prolong(self, i: int) -> "JetSymbol":
        s = list(self.sigma)
        s[i] += 1
        return JetSymbol(self.kind, self.var, self.comp, self.order + 1, tuple(s))

    def with_sigma(self, sigma: MultiIndex) -> "JetSymbol":
        return JetSymbol(self.kind, self.var, self.comp, sum(sigma), tuple(sigma))


@dataclass(frozen=True)
class JetContext:
    """Variable declarations shared by every polynomial of a computation.

    ``tiers[i]`` is the rank of antifield tier ``i + 1``.
    """

    independents: tuple
    dependents: tuple
    tiers: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "independents", tuple(self.independents))
        object.__setattr__(self, "dependents", tuple(self.dependents))
        object.__setattr__(self, "tiers", tuple(self.tiers))
        if not self.independents or not self.dependents:
            raise ValueError("need at least one independent and one dependent variable")
        names = list(self.independents) + list(self.dependents)
        if len(set(names)) != len(names):
            raise ValueError("duplicate variable names")

    @property
    def n(self) -> int:
        return len(self.independents)

    @property
    def m(self) -> int:
        return len(self.dependents)

    def zero_index(self) -> MultiIndex:
        return (0,) * self.n

    def base(self, i: int) -> JetSymbol:
        if not 0 <= i < self.n:
            raise IndexError(i)
        return JetSymbol(BASE, i, 0, 0, ())

    def jet(self, j: int, sigma: MultiIndex | None = None) -> JetSymbol:
        if not 0 <= j < self.m:
            raise IndexError(j)
        sigma = self.zero_index() if sigma is None else tuple(sigma)
        return JetSymbol(DEP, j, 0, sum(sigma), sigma)

    def anti(self, tier: int, comp: int, sigma: MultiIndex | None = None) -> JetSymbol:
        if not 1 <= tier <= len(self.tiers) or not 0 <= comp < self.tiers[tier - 1]:
            raise IndexError((tier, comp))
        sigma = self.zero_index() if sigma is None else tuple(sigma)
        return JetSymbol(ANTI, tier, comp, sum(sigma), sigma)

    def with_tiers(self, tiers) -> "JetContext":
        return JetContext(self.independents, self.dependents, tuple(tiers))

    def extended(self, extra_dependents) -> "JetContext":
        return JetContext(self.independents, self.dependents + tuple(extra_dependents), self.tiers)

    def fields(self, antifields: bool = False) -> list:
        """Field keys of dependents (and antifields) in symbol order."""
        out = [(DEP, j, 0) for j in range(self.m)]
        if antifields:
            out += self.antifield_fields()
        return out

    def antifield_fields(self) -> list:
        return [(ANTI, t + 1, b) for t, r in enumerate(self.tiers) for b in range(r)]

    def field_symbol(self, field, sigma: MultiIndex | None = None) -> JetSymbol:
        kind, var, comp = field
        sigma = self.zero_index() if sigma is None else tuple(sigma)
        return JetSymbol(kind, var, comp, sum(sigma), sigma)

    # polynomial constructors
    def const(self, c) -> "DiffPoly":
        c = Q(c)
        return DiffPoly(self, {(): c} if c else {})

    def x(self, i: int) -> "DiffPoly":
        return DiffPoly.symbol(self, self.base(i))

    def u(self, j: int = 0, sigma: MultiIndex | None = None) -> "DiffPoly":
        return DiffPoly.symbol(self, self.jet(j, sigma))

    def c(self, tier: int, comp: int = 0, sigma: MultiIndex | None = None) -> "DiffPoly":
        return DiffPoly.symbol(self, self.anti(tier, comp, sigma))

    def sigma(self, **counts) -> MultiIndex:
        """Multi-index from keyword counts, e.g. ``ctx.sigma(x=2, t=1)``."""
        return tuple(counts.get(name, 0) for name in self.independents)

    def render_symbol(self, s: JetSymbol) -> str:
        if s.kind == BASE:
            return self.independents[s.var]
        head = f"u[{s.var + 1}]" if s.kind == DEP else f"c{s.var}[{s.comp + 1}]"
        if not s.order:
            return head
        return head + "_{" + render_sigma(self, s.sigma) + "}"


def render_sigma(ctx: JetContext, sigma: MultiIndex) -> str:
    parts = []
    for name, k in zip(ctx.independents, sigma):
        if k == 1:
            parts.append(name)
        elif k > 1:
            parts.append(f"{name}^{k}")
    return " ".join(parts)


def _is_odd(s) -> bool:
    return s.kind == ANTI and s.var & 1


@lru_cache(maxsize=1 << 20)
def mono_mul(a: tuple, b: tuple):
    """Product of two canonical monomials: ``(sign, monomial)``; sign 0 if it vanishes."""
    if not a:
        return 1, b
    if not b:
        return 1, a
    if a[-1] <= b[0]:
        if _is_odd(b[0]) and a[-1] == b[0]:
            return 0, None
        return 1, a + b
    # odd count of the unconsumed tail of a
    odd_tail = [0] * (len(a) + 1)
    for k in range(len(a) - 1, -1, -1):
        odd_tail[k] = odd_tail[k + 1] + (1 if _is_odd(a[k]) else 0)
    out = []
    sign = 1
    i = j = 0
    la, lb = len(a), len(b)
    while i < la and j < lb:
        x, y = a[i], b[j]
        if x < y:
            out.append(x)
            i += 1
        elif y < x:
            if _is_odd(y) and odd_tail[i] & 1:
                sign = -sign
            out.append(y)
            j += 1
        else:
            if _is_odd(x):
                return 0, None
            out.append(x)
            i += 1
    out.extend(a[i:])
    out.extend(b[j:])
    return sign, tuple(out)


def mono_parity(m: tuple) -> int:
    p = 0
    for s in m:
        if s.kind == ANTI:
            p ^= s.var & 1
    return p


def mono_antighost(m: tuple) -> int:
    return sum(s.var for s in m if s.kind == ANTI)


def _coerce(c):
    return c if type(c) is type(Q(0)) else Q(c)


class DiffPoly:
    """Exact polynomial in jet symbols; immutable by convention."""

    __slots__ = ("ctx", "terms")

    def __init__(self, ctx: JetContext, terms: Mapping | None = None):
        self.ctx = ctx
        self.terms = {} if terms is None else {m: c for m, c in terms.items() if c}

    @classmethod
    def _raw(cls, ctx, terms):
        obj = cls.__new__(cls)
        obj.ctx = ctx
        obj.terms = terms
        return obj

    @classmethod
    def symbol(cls, ctx: JetContext, s: JetSymbol) -> "DiffPoly":
        return cls._raw(ctx, {(s,): Q(1)})

    # introspection
    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self):
        return bool(self.terms)

    def symbols(self) -> set:
        return {s for m in self.terms for s in m}

    @property
    def parity(self):
        """0 or 1 for homogeneous polynomials, None otherwise (0 for zero)."""
        ps = {mono_parity(m) for m in self.terms}
        if len(ps) > 1:
            return None
        return ps.pop() if ps else 0

    @property
    def antighost(self):
        gs = {mono_antighost(m) for m in self.terms}
        if len(gs) > 1:
            return None
        return gs.pop() if gs else 0

    def degree(self, kinds=(DEP,)) -> int:
        return max((sum(1 for s in m if s.kind in kinds) for m in self.terms), default=0)

    def jet_order(self) -> int:
        return max((s.order for m in self.terms for s in m if s.kind != BASE), default=0)

    def constant_term(self):
        return self.terms.get((), Q(0))

    def sorted_items(self) -> list:
        """Terms in canonical order: (antighost, total degree, symbol order)."""
        return sorted(self.terms.items(), key=lambda it: (mono_antighost(it[0]), len(it[0]), it[0]))

    def split_antighost(self) -> dict:
        out = {}
        for m, c in self.terms.items():
            out.setdefault(mono_antighost(m), {})[m] = c
        return {g: DiffPoly._raw(self.ctx, t) for g, t in out.items()}

    # arithmetic
    def _check(self, other: "DiffPoly"):
        if other.ctx is not self.ctx and other.ctx != self.ctx:
            raise ContextError("operands belong to different jet contexts")

    def _lift(self, other):
        if isinstance(other, DiffPoly):
            self._check(other)
            return other
        return self.ctx.const(other)

    def __add__(self, other):
        other = self._lift(other)
        if not other.terms:
            return self
        out = dict(self.terms)
        for m, c in other.terms.items():
            v = out.get(m)
            if v is None:
                out[m] = c
            else:
                v = v + c
                if v:
                    out[m] = v
                else:
                    del out[m]
        return DiffPoly._raw(self.ctx, out)

    __radd__ = __add__

    def __neg__(self):
        return DiffPoly._raw(self.ctx, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def scale(self, c) -> "DiffPoly":
        c = _coerce(c)
        if not c:
            return DiffPoly._raw(self.ctx, {})
        return DiffPoly._raw(self.ctx, {m: v * c for m, v in self.terms.items()})

    def __mul__(self, other):
        if not isinstance(other, DiffPoly):
            return self.scale(other)
        self._check(other)
        out: dict = {}
        for ma, ca in self.terms.items():
            for mb, cb in other.terms.items():
                sign, m = mono_mul(ma, mb)
                if not sign:
                    continue
                v = ca * cb if sign > 0 else -(ca * cb)
                w = out.get(m)
                out[m] = v if w is None else w + v
        return DiffPoly._raw(self.ctx, {m: c for m, c in out.items() if c})

    def __rmul__(self, other):
        return self.scale(other)

    def __truediv__(self, c):
        return self.scale(1 / Q(c))

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative power")
        result = self.ctx.const(1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __eq__(self, other):
        if isinstance(other, DiffPoly):
            return (other.ctx is self.ctx or other.ctx == self.ctx) and self.terms == other.terms
        if isinstance(other, (int, type(Q(0)))) or hasattr(other, "denominator"):
            return self.terms == ({(): Q(other)} if other else {})
        return NotImplemented

    __hash__ = None

    def __repr__(self):
        return f"DiffPoly({self.render()})"

    def render(self) -> str:
        items = self.sorted_items()
        if not items:
            return "0"
        out = []
        for k, (m, c) in enumerate(items):
            neg = c < 0
            a = -c if neg else c
            body = render_monomial(self.ctx, m)
            if not body:
                piece = str(a)
            elif a == 1:
                piece = body
            else:
                piece = f"{a}*{body}"
            if k == 0:
                out.append("-" + piece if neg else piece)
            else:
                out.append((" - " if neg else " + ") + piece)
        return "".join(out)

    __str__ = render


def render_monomial(ctx: JetContext, m: tuple) -> str:
    parts = []
    k = 0
    while k < len(m):
        s = m[k]
        e = 1
        while k + e < len(m) and m[k + e] == s:
            e += 1
        name = ctx.render_symbol(s)
        parts.append(name if e == 1 else f"{name}^{e}")
        k += e
    return "*".join(parts)


def poly_arith(a: DiffPoly, b: DiffPoly, op: str) -> DiffPoly:
    if op == "add":
        return a + b
    if op == "mul":
        return a * b
    raise ValueError(f"unknown op {op!r}")


def _mono_partial(m: tuple, s: JetSymbol):
    """Left derivative of a monomial: ``(coefficient, monomial)`` or None."""
    if s not in m:
        return None
    k = m.index(s)
    if _is_odd(s):
        before = sum(1 for t in m[:k] if _is_odd(t))
        return (-1 if before & 1 else 1), m[:k] + m[k + 1:]
    e = m.count(s)
    return e, m[:k] + m[k + 1:]


def partial_derivative(f: DiffPoly, s: JetSymbol) -> DiffPoly:
    out = {}
    for m, c in f.terms.items():
        r = _mono_partial(m, s)
        if r is not None:
            k, mm = r
            v = c * k
            out[mm] = out.get(mm, 0) + v
    return DiffPoly(f.ctx, out)


def substitute(f: DiffPoly, rule: Mapping[JetSymbol, DiffPoly]) -> DiffPoly:
    """Homomorphic extension of ``rule`` (symbols not in the rule are kept)."""
    for s, r in rule.items():
        p = r.parity
        if r and (p is None or p != s.parity):
            raise ParityError(f"replacement for {f.ctx.render_symbol(s)} has wrong parity")
    if not rule:
        return f
    result = DiffPoly(f.ctx)
    cache = {}
    for m, c in f.terms.items():
        term = f.ctx.const(c)
        for s in m:
            r = cache.get(s)
            if r is None:
                r = rule[s] if s in rule else DiffPoly.symbol(f.ctx, s)
                cache[s] = r
            term = term * r
            if not term:
                break
        result = result + term
    return result


def from_terms(ctx: JetContext, pairs: Iterable) -> DiffPoly:
    """Build a polynomial from ``(coefficient, [symbols])`` pairs in any order."""
    out = DiffPoly(ctx)
    for c, syms in pairs:
        t = ctx.const(c)
        for s in syms:
            t = t * DiffPoly.symbol(ctx, s)
        out = out + t
    return out
