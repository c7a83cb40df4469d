"""The ``.eq`` problem language: lexer, parser, evaluator and canonical renderer.

    independent x, t;
    dependent u;
    equation u_t = u*u_x + u_xxx;
    antifield c : 1 tier 1;
    compat Delta1 = [D_y, -D_x];
    density rho = u^2;
    cosymmetry psi = [u];
    current J = [-1/2*u^2 - u_xx, u];

Subscript letters name independent variables; repetition gives
multiplicity, so ``u_xxt`` is u differentiated twice in x and once in t.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .cdiff import CDiffOp, cdiff_compose
from .expr import ANTI, BASE, DEP, DiffPoly, JetContext, JetSymbol, Q
from .jetcalc import EquationSystem

KEYWORDS = {"independent", "dependent", "antifield", "tier", "equation", "compat", "density", "cosymmetry", "current"}
MAX_EXPONENT = 16
MAX_DEPTH = 100
MAX_TERMS = 20000
MAX_SUBSCRIPT = 24


class ParseError(ValueError):
    def __init__(self, code: str, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {code} {message}")
        self.code = code
        self.message = message
        self.line = line
        self.col = col


# ------------------------------------------------------------------ lexer

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<ident>[A-Za-z][A-Za-z0-9_]*)
  | (?P<int>[0-9]+)
  | (?P<punct>[;,:=+\-*/^()\[\]])
    """,
    re.VERBOSE,
)


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list:
    out = []
    pos, line, line_start = 0, 1, 0
    n = len(text)
    while pos < n:
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError("E_LEX", f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        tok = m.group()
        if kind != "ws":
            if kind == "int" and len(tok) > 60:
                raise ParseError("E_LEX", "integer literal too long", line, pos - line_start + 1)
            out.append(Token(kind if kind != "punct" else tok, tok, line, pos - line_start + 1))
        nl = tok.count("\n")
        if nl:
            line += nl
            line_start = pos + tok.rindex("\n") + 1
        pos = m.end()
    out.append(Token("eof", "", line, pos - line_start + 1))
    return out


# ------------------------------------------------------------------ parser


class _Parser:
    def __init__(self, tokens):
        self.toks = tokens
        self.i = 0
        self.depth = 0

    def peek(self) -> Token:
        return self.toks[self.i]

    def next(self) -> Token:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def expect(self, kind: str, what: str = None) -> Token:
        t = self.peek()
        if t.kind != kind:
            found = t.text or "end of input"
            raise ParseError("E_SYNTAX", f"expected {what or kind!r}, found {found!r}", t.line, t.col)
        return self.next()

    def name(self, what="a name") -> Token:
        t = self.expect("ident", what)
        if t.text in KEYWORDS:
            raise ParseError("E_SYNTAX", f"keyword {t.text!r} used as a name", t.line, t.col)
        return t

    # statements
    def statements(self) -> list:
        out = []
        while self.peek().kind != "eof":
            out.append(self.statement())
        return out

    def statement(self):
        t = self.expect("ident", "a statement keyword")
        kw = t.text
        if kw in ("independent", "dependent"):
            names = [self.name()]
            while self.peek().kind == ",":
                self.next()
                names.append(self.name())
            node = (kw, names, t)
        elif kw == "antifield":
            nm = self.name()
            self.expect(":")
            comp = self.expect("int", "a component number")
            tk = self.expect("ident", "'tier'")
            if tk.text != "tier":
                raise ParseError("E_SYNTAX", "expected 'tier'", tk.line, tk.col)
            tier = self.expect("int", "a tier number")
            node = (kw, nm, int(comp.text), int(tier.text), t)
        elif kw == "equation":
            lhs = self.expr()
            self.expect("=")
            rhs = self.expr()
            node = (kw, lhs, rhs, t)
        elif kw in ("compat", "density", "cosymmetry", "current"):
            nm = self.name()
            self.expect("=")
            node = (kw, nm, self.expr_or_list(), t)
        else:
            raise ParseError("E_SYNTAX", f"unknown statement {kw!r}", t.line, t.col)
        self.expect(";")
        return node

    def expr_or_list(self):
        if self.peek().kind == "[":
            t = self.next()
            self._enter()
            items = [self.expr_or_list()]
            while self.peek().kind == ",":
                self.next()
                items.append(self.expr_or_list())
            self.expect("]")
            self.depth -= 1
            return ("list", items, t)
        return self.expr()

    # expressions
    def _enter(self):
        self.depth += 1
        if self.depth > MAX_DEPTH:
            t = self.peek()
            raise ParseError("E_SYNTAX", "expression nested too deeply", t.line, t.col)

    def expr(self):
        self._enter()
        node = self.term()
        while self.peek().kind in ("+", "-"):
            t = self.next()
            node = ("add" if t.kind == "+" else "sub", node, self.term(), t)
        self.depth -= 1
        return node

    def term(self):
        node = self.unary()
        while self.peek().kind in ("*", "/"):
            t = self.next()
            node = ("mul" if t.kind == "*" else "div", node, self.unary(), t)
        return node

    def unary(self):
        if self.peek().kind == "-":
            t = self.next()
            self._enter()
            node = ("neg", self.unary(), t)
            self.depth -= 1
            return node
        if self.peek().kind == "+":
            self.next()
            self._enter()
            node = self.unary()
            self.depth -= 1
            return node
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek().kind == "^":
            t = self.next()
            e = self.expect("int", "an integer exponent")
            k = int(e.text)
            if k > MAX_EXPONENT:
                raise ParseError("E_SYNTAX", f"exponent larger than {MAX_EXPONENT}", e.line, e.col)
            return ("pow", base, k, t)
        return base

    def atom(self):
        t = self.peek()
        if t.kind == "int":
            self.next()
            return ("num", int(t.text), t)
        if t.kind == "ident":
            self.next()
            if t.text in KEYWORDS:
                raise ParseError("E_SYNTAX", f"keyword {t.text!r} in an expression", t.line, t.col)
            return ("name", t.text, t)
        if t.kind == "(":
            self.next()
            node = self.expr()
            self.expect(")")
            return node
        found = t.text or "end of input"
        raise ParseError("E_SYNTAX", f"expected an expression, found {found!r}", t.line, t.col)


# ---------------------------------------------------------------- problem


@dataclass
class ProblemFile:
    name: str
    independents: tuple
    dependents: tuple
    equations: list  # (leading JetSymbol, rhs DiffPoly) in the base context
    ctx: JetContext  # base context (no antifields)
    full_ctx: JetContext  # with antifield tiers
    antifields: dict = field(default_factory=dict)  # name -> (tier, comp) 1-based comp
    compat: list = field(default_factory=list)  # (name, CDiffOp) in the base context
    densities: list = field(default_factory=list)  # (name, DiffPoly) in full_ctx
    cosymmetries: list = field(default_factory=list)  # (name, [DiffPoly]) in ctx
    currents: list = field(default_factory=list)  # (name, [DiffPoly]) in ctx

    def system(self, check_confluence: bool = True) -> EquationSystem:
        return EquationSystem(self.ctx, self.equations, check_confluence=check_confluence)

    def compat_ops(self) -> list:
        return [op for _, op in self.compat]

    def __eq__(self, other):
        if not isinstance(other, ProblemFile):
            return NotImplemented
        return render_problem(self) == render_problem(other)


def _pos(node):
    t = node[-1]
    return t.line, t.col


class _Evaluator:
    def __init__(self, ctx: JetContext, antifields: dict, operators: bool = False, reject: str | None = None):
        self.ctx = ctx
        self.antifields = antifields
        self.operators = operators
        self.reject = reject
        self.indep = {name: i for i, name in enumerate(ctx.independents)}
        self.dep = {name: j for j, name in enumerate(ctx.dependents)}

    def _sigma(self, sub: str, node):
        if not sub or len(sub) > MAX_SUBSCRIPT:
            raise ParseError("E_UNKNOWN_SYMBOL", f"bad subscript {sub!r}", *_pos(node))
        counts = [0] * self.ctx.n
        for ch in sub:
            i = self.indep.get(ch)
            if i is None:
                raise ParseError("E_UNKNOWN_SYMBOL", f"{ch!r} is not an independent variable", *_pos(node))
            counts[i] += 1
        return tuple(counts)

    def symbol(self, name: str, node):
        """Resolve a name to a JetSymbol, or ('D', sigma) for an operator."""
        if name in self.indep:
            return self.ctx.base(self.indep[name])
        head, _, sub = name.partition("_")
        if head == "D" and sub and "D" not in self.dep:
            return ("D", self._sigma(sub, node))
        sigma = self._sigma(sub, node) if sub else self.ctx.zero_index()
        if head in self.dep and (sub or name == head):
            return self.ctx.jet(self.dep[head], sigma)
        if head in self.antifields and (sub or name == head):
            if self.reject:
                raise ParseError("E_PARITY", f"antifield {head!r} not allowed in {self.reject}", *_pos(node))
            tier, comp = self.antifields[head]
            return self.ctx.anti(tier, comp - 1, sigma)
        raise ParseError("E_UNKNOWN_SYMBOL", f"unknown symbol {name!r}", *_pos(node))

    def _op(self, v):
        if isinstance(v, CDiffOp):
            return v
        return CDiffOp.multiplication(v)

    def _check_size(self, v, node):
        terms = len(v.terms) if isinstance(v, DiffPoly) else sum(
            len(a.terms) for e in v.entries.values() for a in e.values())
        if terms > MAX_TERMS:
            raise ParseError("E_SYNTAX", "expression too large", *_pos(node))
        return v

    def _binary(self, kind, a, b, node):
        if kind in ("add", "sub"):
            if isinstance(a, CDiffOp) or isinstance(b, CDiffOp):
                a, b = self._op(a), self._op(b)
            return self._check_size(a + b if kind == "add" else a - b, node)
        if kind == "mul":
            if isinstance(a, CDiffOp) or isinstance(b, CDiffOp):
                return self._check_size(cdiff_compose(self._op(a), self._op(b)), node)
            return self._check_size(a * b, node)
        if isinstance(b, CDiffOp) or set(b.terms) - {()} or not b.terms:
            raise ParseError("E_SYNTAX", "division only by a nonzero number", *_pos(node))
        return a.scale(1 / b.terms[()])

    def eval(self, node):
        kind = node[0]
        ctx = self.ctx
        if kind == "num":
            return ctx.const(node[1])
        if kind == "name":
            s = self.symbol(node[1], node)
            if isinstance(s, tuple) and s[0] == "D":
                if not self.operators:
                    raise ParseError("E_SYNTAX", "total derivative operators are only allowed in compat", *_pos(node))
                return CDiffOp.derivative(ctx, s[1])
            return DiffPoly.symbol(ctx, s)
        if kind == "list":
            raise ParseError("E_SYNTAX", "unexpected list", *_pos(node))
        if kind == "neg":
            v = self.eval(node[1])
            return -v
        if kind in ("add", "sub", "mul", "div"):
            # left-deep chains are folded iteratively
            chain = []
            while node[0] in ("add", "sub", "mul", "div"):
                chain.append(node)
                node = node[1]
            acc = self.eval(node)
            for op_node in reversed(chain):
                acc = self._binary(op_node[0], acc, self.eval(op_node[2]), op_node)
            return acc
        if kind == "pow":
            a = self.eval(node[1])
            k = node[2]
            if isinstance(a, CDiffOp):
                out = CDiffOp.identity(ctx, 1)
                for _ in range(k):
                    out = self._check_size(cdiff_compose(out, a), node)
                return out
            out = ctx.const(1)
            for _ in range(k):
                out = self._check_size(out * a, node)
            return out
        raise ParseError("E_SYNTAX", f"unexpected node {kind}", *_pos(node))


def _list_items(node) -> list:
    return node[1] if node[0] == "list" else [node]


def _check_names(names, node, seen):
    for t in names:
        if t.text in seen:
            raise ParseError("E_SYNTAX", f"name {t.text!r} declared twice", t.line, t.col)
        seen.add(t.text)


def parse_problem(text: str, name: str = "problem") -> ProblemFile:
    stmts = _Parser(tokenize(text)).statements()
    indep, dep, seen = [], [], set()
    antifields: dict = {}
    for st in stmts:
        if st[0] == "independent":
            _check_names(st[1], st, seen)
            for t in st[1]:
                if len(t.text) != 1 or t.text == "D":
                    raise ParseError("E_SYNTAX", "independent variables must be single letters other than D",
                                     t.line, t.col)
                indep.append(t.text)
        elif st[0] == "dependent":
            _check_names(st[1], st, seen)
            for t in st[1]:
                if "_" in t.text or t.text == "D":
                    raise ParseError("E_SYNTAX", "dependent names may not contain '_' or be 'D'", t.line, t.col)
                dep.append(t.text)
        elif st[0] == "antifield":
            t = st[1]
            _check_names([t], st, seen)
            if "_" in t.text or t.text == "D":
                raise ParseError("E_SYNTAX", "antifield names may not contain '_' or be 'D'", t.line, t.col)
            if st[2] < 1 or st[3] < 1:
                raise ParseError("E_SYNTAX", "components and tiers are numbered from 1", t.line, t.col)
            antifields[t.text] = (st[3], st[2])
    kw = stmts[0][-1] if stmts else None
    if not indep or not dep:
        line, col = (kw.line, kw.col) if kw else (1, 1)
        raise ParseError("E_SYNTAX", "need independent and dependent declarations", line, col)
    ctx = JetContext(tuple(indep), tuple(dep))
    base_ev = _Evaluator(ctx, antifields, reject="an equation")

    equations = []
    eq_nodes = []
    for st in stmts:
        if st[0] != "equation":
            continue
        lhs_node, rhs_node = st[1], st[2]
        if lhs_node[0] != "name":
            raise ParseError("E_SOLVED_FORM", "left side must be a single derivative symbol", *_pos(st))
        lead = base_ev.symbol(lhs_node[1], lhs_node)
        if not isinstance(lead, JetSymbol) or lead.kind != DEP:
            raise ParseError("E_SOLVED_FORM", "left side must be a derivative of a dependent variable", *_pos(lhs_node))
        rhs = base_ev.eval(_single(rhs_node))
        for other, onode in eq_nodes:
            if other.var == lead.var and (all(a <= b for a, b in zip(other.sigma, lead.sigma))
                                          or all(b <= a for a, b in zip(other.sigma, lead.sigma))):
                raise ParseError("E_DUPLICATE_LEADING",
                                 f"leading symbol {lhs_node[1]} overlaps an earlier leading symbol", *_pos(lhs_node))
        eq_nodes.append((lead, lhs_node))
        equations.append((lead, rhs))
    if not equations:
        line, col = (kw.line, kw.col) if kw else (1, 1)
        raise ParseError("E_SOLVED_FORM", "no equation given", line, col)
    leads = [lead for lead, _ in equations]
    for (lead, rhs), (_, node) in zip(equations, eq_nodes):
        for s in rhs.symbols():
            if s.kind == DEP and any(l.var == s.var and all(a <= b for a, b in zip(l.sigma, s.sigma)) for l in leads):
                raise ParseError("E_SOLVED_FORM", f"right side contains the principal symbol {render_symbol(ctx, s, {})}",
                                 *_pos(node))

    compat = []
    op_ev = _Evaluator(ctx, antifields, operators=True, reject="operator coefficients")
    ranks = [len(equations)]
    for st in stmts:
        if st[0] != "compat":
            continue
        node = st[2]
        rows = _list_items(node)
        if rows and rows[0][0] != "list":
            rows = [node]
        matrix = []
        for r in rows:
            if r[0] != "list":
                raise ParseError("E_SYNTAX", "compatibility operator must be a bracketed row or matrix", *_pos(r))
            matrix.append([_eval_op(op_ev, e) for e in r[1]])
        widths = {len(r) for r in matrix}
        if len(widths) != 1 or widths.pop() != ranks[-1]:
            raise ParseError("E_SHAPE", f"{st[1].text} must have {ranks[-1]} columns in every row", *_pos(node))
        entries = {}
        for i, row in enumerate(matrix):
            for j, op in enumerate(row):
                e = op.entries.get((0, 0))
                if e:
                    entries[(i, j)] = e
        compat.append((st[1].text, CDiffOp(ctx, len(matrix), ranks[-1], entries)))
        ranks.append(len(matrix))

    for st in stmts:
        if st[0] == "antifield":
            tier, comp = antifields[st[1].text]
            if tier > len(ranks) or comp > ranks[tier - 1]:
                raise ParseError("E_UNKNOWN_SYMBOL", f"antifield {st[1].text} refers to a missing component",
                                 st[1].line, st[1].col)
    full = ctx.with_tiers(ranks)
    full_ev = _Evaluator(full, antifields)
    pf = ProblemFile(name, tuple(indep), tuple(dep), equations, ctx, full, antifields, compat)
    for st in stmts:
        kind = st[0]
        if kind == "density":
            pf.densities.append((st[1].text, full_ev.eval(_single(st[2]))))
        elif kind in ("cosymmetry", "current"):
            items = _list_items(st[2])
            ev = _Evaluator(ctx, antifields, reject=f"a {kind}")
            vals = [ev.eval(_single(e)) for e in items]
            if kind == "cosymmetry" and len(vals) != len(equations):
                raise ParseError("E_SHAPE", f"cosymmetry needs {len(equations)} components", *_pos(st[2]))
            if kind == "current" and len(vals) != ctx.n:
                raise ParseError("E_SHAPE", f"current needs {ctx.n} components", *_pos(st[2]))
            (pf.cosymmetries if kind == "cosymmetry" else pf.currents).append((st[1].text, vals))
    return pf


def _single(node):
    if node[0] == "list":
        raise ParseError("E_SYNTAX", "expected a single expression", *_pos(node))
    return node


def _eval_op(ev: _Evaluator, node) -> CDiffOp:
    v = ev.eval(_single(node))
    op = v if isinstance(v, CDiffOp) else CDiffOp.multiplication(v)
    return op


# ---------------------------------------------------------------- rendering


def render_symbol(ctx: JetContext, s: JetSymbol, anti_names: dict) -> str:
    if s.kind == BASE:
        return ctx.independents[s.var]
    if s.kind == DEP:
        head = ctx.dependents[s.var]
    else:
        head = anti_names.get((s.var, s.comp + 1))
        if head is None:
            head = f"c{s.var}x{s.comp + 1}"
    if not s.order:
        return head
    return head + "_" + "".join(ctx.independents[i] * k for i, k in enumerate(s.sigma))


def _render_coef_mono(c, mono_text: str, first: bool) -> str:
    neg = c < 0
    a = -c if neg else c
    if mono_text:
        body = mono_text if a == 1 else f"{a}*{mono_text}"
    else:
        body = f"{a}"
    if first:
        return ("-" if neg else "") + body
    return (" - " if neg else " + ") + body


def render_poly(f: DiffPoly, anti_names: dict | None = None) -> str:
    anti_names = anti_names or {}
    if not f.terms:
        return "0"
    out = []
    for k, (m, c) in enumerate(f.sorted_items()):
        factors = []
        i = 0
        while i < len(m):
            j = i
            while j < len(m) and m[j] == m[i]:
                j += 1
            name = render_symbol(f.ctx, m[i], anti_names)
            factors.append(name if j - i == 1 else f"{name}^{j - i}")
            i = j
        out.append(_render_coef_mono(c, "*".join(factors), k == 0))
    return "".join(out)


def render_op_entry(ctx: JetContext, ent: dict) -> str:
    if not ent:
        return "0"
    pieces = []
    for s in sorted(ent, key=lambda s: (sum(s), s)):
        a = ent[s]
        d = "D_" + "".join(ctx.independents[i] * k for i, k in enumerate(s)) if sum(s) else ""
        for m, c in a.sorted_items():
            mono = render_poly(DiffPoly._raw(ctx, {m: Q(1)})) if m else ""
            text = "*".join(x for x in (mono, d) if x)
            pieces.append((c, text))
    out = []
    for k, (c, text) in enumerate(pieces):
        out.append(_render_coef_mono(c, text, k == 0))
    return "".join(out)


def render_problem(pf: ProblemFile) -> str:
    ctx = pf.ctx
    names = {v: k for k, v in pf.antifields.items()}
    lines = [f"independent {', '.join(pf.independents)};", f"dependent {', '.join(pf.dependents)};"]
    for lead, rhs in pf.equations:
        lines.append(f"equation {render_symbol(ctx, lead, names)} = {render_poly(rhs, names)};")
    for nm, (tier, comp) in sorted(pf.antifields.items(), key=lambda it: (it[1], it[0])):
        lines.append(f"antifield {nm} : {comp} tier {tier};")
    for nm, op in pf.compat:
        rows = ["[" + ", ".join(render_op_entry(ctx, op.entry(r, c)) for c in range(op.cols)) + "]"
                for r in range(op.rows)]
        body = rows[0] if len(rows) == 1 else "[" + ", ".join(rows) + "]"
        lines.append(f"compat {nm} = {body};")
    for nm, f in pf.densities:
        lines.append(f"density {nm} = {render_poly(f, names)};")
    for nm, comps in pf.cosymmetries:
        lines.append(f"cosymmetry {nm} = [{', '.join(render_poly(c, names) for c in comps)}];")
    for nm, comps in pf.currents:
        lines.append(f"current {nm} = [{', '.join(render_poly(c, names) for c in comps)}];")
    return "\n".join(lines) + "\n"


__all__ = ["ParseError", "ProblemFile", "parse_problem", "render_problem", "render_poly", "tokenize"]
