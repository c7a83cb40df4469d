"""Matrix operators in total derivatives and graded symmetric multilinear operators.

Operators are kept in normal order, coefficients to the left of ``D_sigma``.
The formal adjoint transposes and integrates by parts,
``(a D_sigma)* = (-1)^|sigma| D_sigma o a``, with the Koszul sign
``(-1)^(p_r p_c)`` attached to the transposition of an entry between a row
module of parity ``p_r`` and a column module of parity ``p_c``.  On purely
even modules this is the classical formal adjoint.
"""

from __future__ import annotations

from typing import Mapping

from .expr import (
    ANTI,
    DiffPoly,
    JetContext,
    Q,
    mi_add,
    mi_below,
    mi_binom,
    mi_sub,
    render_sigma,
)
from .jetcalc import Section, euler, linearize, total_derivative_sigma


class SignatureError(ValueError):
    pass


def _merge(entry: dict, sigma, coef: DiffPoly):
    if not coef:
        return
    old = entry.get(sigma)
    new = coef if old is None else old + coef
    if new:
        entry[sigma] = new
    else:
        entry.pop(sigma, None)


class CDiffOp:
    """``entries[(r, c)] = {sigma: coefficient}`` meaning sum a_sigma D_sigma."""

    __slots__ = ("ctx", "rows", "cols", "entries", "row_parities", "col_parities")

    def __init__(self, ctx: JetContext, rows: int, cols: int, entries: Mapping | None = None,
                 row_parities=None, col_parities=None):
        self.ctx = ctx
        self.rows = rows
        self.cols = cols
        self.row_parities = tuple(row_parities) if row_parities is not None else (0,) * rows
        self.col_parities = tuple(col_parities) if col_parities is not None else (0,) * cols
        clean = {}
        for (r, c), ent in (entries or {}).items():
            if not (0 <= r < rows and 0 <= c < cols):
                raise SignatureError(f"entry {(r, c)} outside a {rows}x{cols} operator")
            e = {tuple(s): a for s, a in ent.items() if a}
            if e:
                clean[(r, c)] = e
        self.entries = clean

    # constructors ----------------------------------------------------
    @classmethod
    def zero(cls, ctx, rows, cols, row_parities=None, col_parities=None):
        return cls(ctx, rows, cols, {}, row_parities, col_parities)

    @classmethod
    def identity(cls, ctx, k, parities=None):
        z = ctx.zero_index()
        return cls(ctx, k, k, {(i, i): {z: ctx.const(1)} for i in range(k)}, parities, parities)

    @classmethod
    def scalar(cls, ctx, terms: Mapping):
        """1x1 operator from ``{sigma: coefficient}``."""
        return cls(ctx, 1, 1, {(0, 0): dict(terms)})

    @classmethod
    def multiplication(cls, a: DiffPoly):
        return cls.scalar(a.ctx, {a.ctx.zero_index(): a})

    @classmethod
    def derivative(cls, ctx, sigma):
        return cls.scalar(ctx, {tuple(sigma): ctx.const(1)})

    # structure ---------------------------------------------------------
    def signature(self):
        return (self.rows, self.cols)

    def is_zero(self) -> bool:
        return not self.entries

    def order(self) -> int:
        return max((sum(s) for e in self.entries.values() for s in e), default=0)

    def entry(self, r, c) -> dict:
        return self.entries.get((r, c), {})

    def __eq__(self, other):
        if not isinstance(other, CDiffOp):
            return NotImplemented
        return self.signature() == other.signature() and self.entries == other.entries

    __hash__ = None

    def _like(self, entries, rows=None, cols=None, rp=None, cp=None):
        return CDiffOp(self.ctx, self.rows if rows is None else rows, self.cols if cols is None else cols,
                       entries, self.row_parities if rp is None else rp,
                       self.col_parities if cp is None else cp)

    def map_coefficients(self, fn) -> "CDiffOp":
        return self._like({k: {s: fn(a) for s, a in e.items()} for k, e in self.entries.items()})

    def __add__(self, other: "CDiffOp") -> "CDiffOp":
        if other.signature() != self.signature():
            raise SignatureError("operator shapes differ")
        out = {k: dict(e) for k, e in self.entries.items()}
        for k, e in other.entries.items():
            tgt = out.setdefault(k, {})
            for s, a in e.items():
                _merge(tgt, s, a)
        return self._like(out)

    def __neg__(self):
        return self.map_coefficients(lambda a: -a)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c) -> "CDiffOp":
        return self.map_coefficients(lambda a: a * c)

    def left_multiply(self, a: DiffPoly) -> "CDiffOp":
        return self.map_coefficients(lambda b: a * b)

    def transpose_shape(self):
        return (self.cols, self.rows)

    # rendering ---------------------------------------------------------
    def render_entry(self, r, c) -> str:
        ent = self.entry(r, c)
        if not ent:
            return "0"
        parts = []
        for s in sorted(ent, key=lambda s: (sum(s), s)):
            a = ent[s]
            if not sum(s):
                parts.append(a.render())
                continue
            d = "D_{" + render_sigma(self.ctx, s) + "}"
            txt = a.render()
            if txt == "1":
                parts.append(d)
            elif txt == "-1":
                parts.append("-" + d)
            elif len(a.terms) == 1:
                parts.append(f"{txt}*{d}")
            else:
                parts.append(f"({txt})*{d}")
        out = parts[0]
        for p in parts[1:]:
            out += " - " + p[1:] if p.startswith("-") else " + " + p
        return out

    def render(self) -> list:
        return [[self.render_entry(r, c) for c in range(self.cols)] for r in range(self.rows)]

    def __repr__(self):
        return f"CDiffOp({self.render()})"


# -------------------------------------------------------------- operations


def cdiff_apply(op: CDiffOp, p) -> Section:
    comps = list(p) if not isinstance(p, DiffPoly) else [p]
    if len(comps) != op.cols:
        raise SignatureError(f"operator expects {op.cols} components, got {len(comps)}")
    out = [DiffPoly(op.ctx) for _ in range(op.rows)]
    for (r, c), ent in op.entries.items():
        for s, a in ent.items():
            d = total_derivative_sigma(comps[c], s)
            if d:
                out[r] = out[r] + a * d
    return Section(out, "image", op.row_parities)


def _compose_scalar(left: dict, right: dict, out: dict):
    """(sum a_s D_s) o (sum b_t D_t), accumulated into ``out``."""
    for s, a in left.items():
        for t, b in right.items():
            for rho in mi_below(s):
                db = total_derivative_sigma(b, rho)
                if not db:
                    continue
                coef = a * db
                k = mi_binom(s, rho)
                if k != 1:
                    coef = coef * k
                _merge(out, mi_add(mi_sub(s, rho), t), coef)


def cdiff_compose(left: CDiffOp, right: CDiffOp) -> CDiffOp:
    if left.cols != right.rows:
        raise SignatureError(f"cannot compose {left.signature()} after {right.signature()}")
    out: dict = {}
    by_row: dict = {}
    for (m, c), e in right.entries.items():
        by_row.setdefault(m, []).append((c, e))
    for (r, m), e in left.entries.items():
        for c, e2 in by_row.get(m, ()):
            _compose_scalar(e, e2, out.setdefault((r, c), {}))
    return CDiffOp(left.ctx, left.rows, right.cols, out, left.row_parities, right.col_parities)


def _adjoint_scalar(ent: dict, sign: int) -> dict:
    out: dict = {}
    for s, a in ent.items():
        base = -1 if sum(s) & 1 else 1
        for rho in mi_below(s):
            da = total_derivative_sigma(a, rho)
            if not da:
                continue
            _merge(out, mi_sub(s, rho), da * (sign * base * mi_binom(s, rho)))
    return out


def cdiff_adjoint(op: CDiffOp) -> CDiffOp:
    out = {}
    for (r, c), e in op.entries.items():
        sign = -1 if (op.row_parities[r] & op.col_parities[c]) else 1
        out[(c, r)] = _adjoint_scalar(e, sign)
    return CDiffOp(op.ctx, op.cols, op.rows, out, op.col_parities, op.row_parities)


def is_selfadjoint(op: CDiffOp, reduce=None) -> bool:
    diff = op - cdiff_adjoint(op)
    if reduce is not None:
        diff = diff.map_coefficients(reduce)
    return diff.is_zero()


# ------------------------------------------------------ multilinear operators


class MultiLinOp:
    """Graded symmetric multilinear C-differential operator P x ... x P -> P_hat.

    Stored as the element of ``F^pol(alpha) (x) P_hat`` it corresponds to:
    ``psi_r`` is a polynomial in the argument fields, and its part of degree
    d is the arity-d piece.  Evaluating the arity-d piece on d copies of the
    coordinate section recovers ``psi``.
    """

    def __init__(self, element: Section, fields):
        self.fields = list(fields)
        if len(element) != len(self.fields):
            raise SignatureError("target rank differs from the argument module rank")
        self.element = element
        self.parities = tuple(_field_parity(f) for f in self.fields)

    @property
    def ctx(self):
        return self.element.ctx

    def _degrees(self) -> set:
        keys = set(self.fields)
        return {sum(1 for s in m if s.field in keys) for comp in self.element for m in comp.terms}

    @property
    def arity(self):
        ds = self._degrees()
        if len(ds) > 1:
            return None
        return ds.pop() if ds else 0

    def homogeneous_parts(self) -> dict:
        keys = set(self.fields)
        parts: dict = {}
        for r, comp in enumerate(self.element):
            for m, c in comp.terms.items():
                d = sum(1 for s in m if s.field in keys)
                parts.setdefault(d, [dict() for _ in self.fields])[r][m] = c
        return {
            d: MultiLinOp(Section([DiffPoly(self.ctx, t) for t in comps], "kappa_hat", self.parities),
                          self.fields)
            for d, comps in parts.items()
        }

    def tensor(self) -> dict:
        """Coefficient tensor ``{(row, ((field, sigma), ...)): coefficient}``."""
        keys = set(self.fields)
        out: dict = {}
        for r, comp in enumerate(self.element):
            for m, c in comp.terms.items():
                slots = tuple((s.field, s.sigma) for s in m if s.field in keys)
                rest = tuple(s for s in m if s.field not in keys)
                key = (r, slots)
                # argument symbols sit after the coefficient symbols, which are even
                term = DiffPoly(self.ctx, {rest: c})
                out[key] = out[key] + term if key in out else term
        return out

    def first_argument_operator(self) -> CDiffOp:
        """The operator p -> psi(p, c, ..., c), i.e. l_psi / arity (per homogeneous part)."""
        total = None
        for d, part in self.homogeneous_parts().items():
            if d == 0:
                continue
            op = linearize(part.element, fields=self.fields, row_parities=self.parities).scale(Q(1, d))
            total = op if total is None else total + op
        if total is None:
            n = len(self.fields)
            total = CDiffOp.zero(self.ctx, n, n, self.parities, self.parities)
        return total

    def adjoint_element(self) -> "MultiLinOp":
        """psi*: the adjoint in the first argument, part by part.

        For a d-linear part, full symmetrization gives S = (psi + d psi*) / (d + 1).
        """
        out = None
        for d, part in self.homogeneous_parts().items():
            if d == 0:
                piece = part
            else:
                piece = (selfadjoint_project(part).scale(d + 1) - part).scale(Q(1, d))
            out = piece if out is None else out + piece
        if out is None:
            return self
        return out

    def is_selfadjoint(self) -> bool:
        return selfadjoint_project(self) == self

    def __add__(self, other):
        return MultiLinOp(self.element + other.element, self.fields)

    def __sub__(self, other):
        return MultiLinOp(self.element - other.element, self.fields)

    def scale(self, c):
        return MultiLinOp(self.element.scale(c), self.fields)

    def is_zero(self):
        return self.element.is_zero()

    def __eq__(self, other):
        if not isinstance(other, MultiLinOp):
            return NotImplemented
        return self.fields == other.fields and self.element == other.element

    __hash__ = None

    def __repr__(self):
        return f"MultiLinOp({self.element.render()})"


def _field_parity(f) -> int:
    kind, var, _ = f
    return var & 1 if kind == ANTI else 0


def pairing(a, b) -> DiffPoly:
    """<a, b> = sum_k a_k b_k."""
    out = None
    for x, y in zip(a, b):
        t = x * y
        out = t if out is None else out + t
    return out


def selfadjoint_project(psi: MultiLinOp) -> MultiLinOp:
    """Projector onto self-adjoint (variational) elements.

    The arity-d part is sent to E(<psi_d, c>) / (d + 1), with the argument
    coordinates c placed on the right and right derivatives in E: the full
    graded symmetrization of the (d+1)-linear form.  For d = 1 this is
    (psi + psi*) / 2; arity 0 is fixed.
    """
    ctx = psi.ctx
    coords = [DiffPoly.symbol(ctx, ctx.field_symbol(f)) for f in psi.fields]
    comps = [DiffPoly(ctx) for _ in psi.fields]
    for d, part in psi.homogeneous_parts().items():
        if d == 0:
            img = part.element
        else:
            img = euler(pairing(part.element, coords), psi.fields, right=True).scale(Q(1, d + 1))
        comps = [a + b for a, b in zip(comps, img)]
    return MultiLinOp(Section(comps, "kappa_hat", psi.parities), psi.fields)


__all__ = [
    "CDiffOp",
    "MultiLinOp",
    "SignatureError",
    "cdiff_apply",
    "cdiff_compose",
    "cdiff_adjoint",
    "is_selfadjoint",
    "selfadjoint_project",
    "pairing",
]
