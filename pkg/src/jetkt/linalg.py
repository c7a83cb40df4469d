"""Exact sparse elimination over the rationals.

Vectors are dicts ``{column_key: coefficient}``.  Column keys must be
mutually comparable; the pivot of a row is its smallest key, which makes
elimination (and every basis returned here) deterministic.
"""

from __future__ import annotations

import heapq

from .expr import Q


def _axpy(target: dict, row: dict, factor):
    """target -= factor * row, in place."""
    for k, v in row.items():
        w = target.get(k)
        if w is None:
            target[k] = -factor * v
        else:
            w = w - factor * v
            if w:
                target[k] = w
            else:
                del target[k]


class Echelon:
    """Incremental row echelon form; optionally tracks input combinations."""

    def __init__(self, track: bool = False):
        self.pivots: dict = {}  # pivot key -> (row, combo); row[pivot] == 1
        self.track = track

    def __len__(self):
        return len(self.pivots)

    @property
    def rank(self) -> int:
        return len(self.pivots)

    def reduce(self, vec: dict, combo: dict | None = None):
        """Reduce ``vec`` against the stored pivots; returns (remainder, combo)."""
        v = dict(vec)
        heap = [k for k in v if k in self.pivots]
        heapq.heapify(heap)
        while heap:
            k = heapq.heappop(heap)
            c = v.get(k)
            if not c:
                continue
            row, rcombo = self.pivots[k]
            for kk in row:
                if kk not in v and kk in self.pivots:
                    heapq.heappush(heap, kk)
            _axpy(v, row, c)
            if combo is not None and rcombo is not None:
                _axpy(combo, rcombo, c)
        return v, combo

    def add(self, vec: dict, tag=None) -> dict | None:
        """Insert a vector.  Returns None if it was independent, otherwise the
        dependency (a combination of earlier tags minus this one, when tracking)."""
        combo = {tag: Q(1)} if self.track else None
        v, combo = self.reduce(vec, combo)
        if not v:
            return combo if self.track else {}
        p = min(v)
        inv = 1 / Q(v[p])
        row = {k: c * inv for k, c in v.items()}
        if combo is not None:
            combo = {k: c * inv for k, c in combo.items()}
        self.pivots[p] = (row, combo)
        return None

    def contains(self, vec: dict) -> bool:
        return not self.reduce(vec)[0]


def rank(vectors) -> int:
    e = Echelon()
    for v in vectors:
        e.add(v)
    return e.rank


def nullspace(columns) -> list:
    """Basis of ``{a : sum_k a_k columns[k] = 0}`` as dicts ``{k: a_k}``."""
    e = Echelon(track=True)
    out = []
    for k, col in enumerate(columns):
        dep = e.add(col, tag=k)
        if dep is not None:
            out.append({kk: c for kk, c in dep.items() if c})
    return out


def solve(columns, rhs: dict):
    """One solution ``a`` of ``sum_k a_k columns[k] = rhs`` or None."""
    e = Echelon(track=True)
    for k, col in enumerate(columns):
        e.add(col, tag=k)
    rem, combo = e.reduce(rhs, {})
    if rem:
        return None
    # rhs - sum combo_k col_k == 0  with combo accumulated with negative sign
    return {k: -c for k, c in combo.items() if c}


def rref(vectors, key=None) -> list:
    """Reduced row echelon basis of the span; pivots chosen as the largest key
    under ``key`` and normalised to 1.  Rows are sorted by pivot."""
    if key is None:
        key = lambda k: k  # noqa: E731
    def remap(v):
        return {_Desc(key(k), k): c for k, c in v.items()}

    e = Echelon()
    for v in vectors:
        e.add(remap(v))
    rows = {p: dict(e.pivots[p][0]) for p in e.pivots}
    # back-substitute so each pivot column appears in exactly one row
    pivs = sorted(rows)
    for p in reversed(pivs):
        for q in pivs:
            if q == p:
                continue
            c = rows[q].get(p)
            if c:
                _axpy(rows[q], rows[p], c)
    return [{k.raw: c for k, c in rows[p].items()} for p in pivs]


class _Desc:
    """Wrapper inverting an order so that ``min`` picks the largest key."""

    __slots__ = ("k", "raw")

    def __init__(self, k, raw):
        self.k = k
        self.raw = raw

    def __lt__(self, other):
        return other.k < self.k

    def __eq__(self, other):
        return self.k == other.k

    def __hash__(self):
        return hash(self.k)

    def __le__(self, other):
        return self == other or self < other

    def __gt__(self, other):
        return other < self
