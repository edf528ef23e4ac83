"""Locally consistent partial matchings on the n x n grid.

A partial matching is locally consistent when it extends to a perfect
matching of ``S x T`` where ``S`` (rows) and ``T`` (columns) are unions of
disjoint even-sized intervals of total size at most ``48 t``.
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Optional

from .grid_core import (
    Cell,
    DominoMatching,
    Figure,
    StructureError,
    canonical_domino,
    is_white,
    max_bipartite_matching,
    neighbors,
    perimeter_points,
)

WITNESS_FACTOR = 48
COVER_FACTOR = 6


class CapacityError(ValueError):
    """A size bound required by a construction is exceeded."""


class BoundaryError(ValueError):
    """An interval cannot be padded inside ``[1, n]``."""


class InfeasibleError(ValueError):
    """Dent configuration violates the onion matcher's preconditions."""


# partial matchings ------------------------------------------------------


@dataclass(frozen=True)
class PartialMatching:
    edges: frozenset

    def __init__(self, edges: Iterable = ()):
        canon = frozenset(canonical_domino(tuple(a), tuple(b)) for a, b in edges)
        seen: set[Cell] = set()
        for a, b in canon:
            if a in seen or b in seen:
                raise StructureError("partial matching is not node-disjoint")
            seen.add(a)
            seen.add(b)
        object.__setattr__(self, "edges", canon)

    @property
    def size(self) -> int:
        return len(self.edges)

    def __len__(self) -> int:
        return len(self.edges)

    def nodes(self) -> set[Cell]:
        return {c for e in self.edges for c in e}

    def partner(self, v: Cell) -> Optional[Cell]:
        for a, b in self.edges:
            if a == v:
                return b
            if b == v:
                return a
        return None

    def add(self, a: Cell, b: Cell) -> "PartialMatching":
        return PartialMatching(set(self.edges) | {(a, b)})

    def within(self, n: int) -> bool:
        return all(1 <= r <= n and 1 <= c <= n for r, c in self.nodes())

    def sorted_edges(self) -> list:
        return sorted(self.edges)

    def to_json(self) -> str:
        return json.dumps([[list(a), list(b)] for a, b in self.sorted_edges()])

    @classmethod
    def from_json(cls, text: str) -> "PartialMatching":
        return cls((tuple(a), tuple(b)) for a, b in json.loads(text))


# intervals ----------------------------------------------------------------


@dataclass(frozen=True)
class IntervalUnion:
    """Sorted, pairwise disjoint and non-adjacent closed integer intervals."""

    intervals: tuple = ()

    @classmethod
    def from_points(cls, points: Iterable[int]) -> "IntervalUnion":
        pts = sorted(set(points))
        out = []
        for p in pts:
            if out and out[-1][1] + 1 == p:
                out[-1][1] = p
            else:
                out.append([p, p])
        return cls(tuple((lo, hi) for lo, hi in out))

    @property
    def size(self) -> int:
        return sum(hi - lo + 1 for lo, hi in self.intervals)

    def points(self) -> list[int]:
        return [p for lo, hi in self.intervals for p in range(lo, hi + 1)]

    def point_set(self) -> set[int]:
        return set(self.points())

    def __contains__(self, p: int) -> bool:
        return any(lo <= p <= hi for lo, hi in self.intervals)

    def is_even(self) -> bool:
        return all((hi - lo + 1) % 2 == 0 for lo, hi in self.intervals)

    def union(self, points: Iterable[int]) -> "IntervalUnion":
        return IntervalUnion.from_points(self.point_set() | set(points))

    def clip(self, n: int) -> "IntervalUnion":
        return IntervalUnion.from_points(p for p in self.points() if 1 <= p <= n)

    def containing(self, p: int) -> Optional[tuple[int, int]]:
        for iv in self.intervals:
            if iv[0] <= p <= iv[1]:
                return iv
        return None

    def to_list(self) -> list:
        return [list(iv) for iv in self.intervals]


@dataclass(frozen=True)
class LeftRightProfile:
    interval: tuple
    K: tuple
    f_l: tuple
    f_r: tuple

    def nonnegative(self) -> bool:
        return min(self.f_l) >= 0 and min(self.f_r) >= 0


def profile(interval: tuple[int, int], K: Iterable[int]) -> LeftRightProfile:
    """Left and right functions of an interval with respect to ``K``."""
    a, b = interval
    counts = Counter(k for k in K if a <= k <= b)

    def delta(i: int) -> float:
        return 2 if counts[i] == 0 else -counts[i] / 2

    f_l = [0.0]
    for i in range(a + 1, b + 1):
        f_l.append(f_l[-1] + delta(i))
    f_r = [0.0]
    for i in range(b - 1, a - 1, -1):
        f_r.append(f_r[-1] + delta(i))
    f_r.reverse()
    return LeftRightProfile((a, b), tuple(sorted(counts.elements())), tuple(f_l), tuple(f_r))


def well_covers(cover: IntervalUnion, K: Iterable[int]) -> bool:
    K = list(K)
    if any(k not in cover for k in K):
        return False
    return all(profile(iv, K).nonnegative() for iv in cover.intervals)


def _greedy_cover(K: list[int]) -> set[int]:
    S: set[int] = set()
    for p in K:
        S.add(p)
        for step in (-1, 1):
            q, added = p, 0
            while added < 2:
                q += step
                if q not in S:
                    S.add(q)
                    added += 1
    return S


def _pad(cover: IntervalUnion, n: Optional[int]) -> IntervalUnion:
    # padding can merge with a neighbour, so rescan after each step
    while not cover.is_even():
        lo, hi = next(iv for iv in cover.intervals if (iv[1] - iv[0] + 1) % 2)
        if n is None or hi + 1 <= n:
            cover = cover.union([hi + 1])
        elif lo - 1 >= 1:
            cover = cover.union([lo - 1])
        else:
            raise BoundaryError(f"cannot pad interval [{lo}, {hi}] inside [1, {n}]")
    return cover


def well_cover(K: Iterable[int], n: int) -> IntervalUnion:
    """Even intervals of total size at most ``6|K|`` that well cover ``K``.

    Points are added one at a time; each claims the two nearest free points
    on either side.  The result may reach outside ``[1, n]``; callers clip.
    Odd intervals are padded on the right when the new point stays at most
    ``n``, else on the left when it stays at least 1.
    """
    K = list(K)
    for k in K:
        if not 1 <= k <= n:
            raise ValueError(f"point {k} outside [1, {n}]")
    return _pad(IntervalUnion.from_points(_greedy_cover(K)), n)


def _normalize(cover: IntervalUnion, n: int, required: set[int]) -> Optional[IntervalUnion]:
    """Clip to ``[1, n]`` and make every interval even, keeping ``required``."""
    cover = cover.clip(n)
    while not cover.is_even():
        lo, hi = next(iv for iv in cover.intervals if (iv[1] - iv[0] + 1) % 2)
        if hi + 1 <= n:
            cover = cover.union([hi + 1])
        elif lo - 1 >= 1:
            cover = cover.union([lo - 1])
        elif hi not in required:
            cover = IntervalUnion.from_points(p for p in cover.points() if p != hi)
        elif lo not in required:
            cover = IntervalUnion.from_points(p for p in cover.points() if p != lo)
        else:
            return None
    return cover


# witnesses ---------------------------------------------------------------


@dataclass(frozen=True)
class ExtensionWitness:
    S: IntervalUnion
    T: IntervalUnion
    matching: DominoMatching

    def cells(self) -> set[Cell]:
        return {(r, c) for r in self.S.points() for c in self.T.points()}

    def verify(self, M: PartialMatching, bound: Optional[int] = None) -> bool:
        if not (self.S.is_even() and self.T.is_even()):
            return False
        if not M.edges <= self.matching.dominoes:
            return False
        if bound is not None and (self.S.size > bound or self.T.size > bound):
            return False
        return self.matching.is_perfect_on(self.cells())

    def to_json(self) -> str:
        return json.dumps(
            {
                "S": self.S.to_list(),
                "T": self.T.to_list(),
                "matching": [[list(a), list(b)] for a, b in sorted(self.matching.dominoes)],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "ExtensionWitness":
        raw = json.loads(text)
        return cls(
            IntervalUnion(tuple(tuple(iv) for iv in raw["S"])),
            IntervalUnion(tuple(tuple(iv) for iv in raw["T"])),
            DominoMatching((tuple(a), tuple(b)) for a, b in raw["matching"]),
        )


def complete_matching(
    rows: list[int], cols: list[int], fixed: Iterable = ()
) -> Optional[DominoMatching]:
    """Perfect matching of ``rows x cols`` containing ``fixed``, if any.

    Starts from the horizontal pairing inside each even column run so only
    the cells displaced by ``fixed`` need augmenting paths.
    """
    fixed = list(fixed)
    used = {c for e in fixed for c in e}
    cells = {(r, c) for r in rows for c in cols} - used
    blacks = sorted(c for c in cells if not is_white(c))
    if len(blacks) * 2 != len(cells):
        return None
    adj = {b: [x for x in neighbors(b) if x in cells] for b in blacks}
    initial = {}
    col_runs = IntervalUnion.from_points(cols).intervals
    for r in rows:
        for lo, hi in col_runs:
            for c in range(lo, hi, 2):
                a, b = (r, c), (r, c + 1)
                if a in cells and b in cells:
                    w, bl = (a, b) if is_white(a) else (b, a)
                    initial[w] = bl
    match_w = max_bipartite_matching(blacks, adj, initial)
    if len(match_w) != len(blacks):
        return None
    return DominoMatching(list(match_w.items()) + fixed)


_cache: dict = {}


def is_locally_consistent(M: PartialMatching, n: int) -> Optional[ExtensionWitness]:
    """Witness of local consistency, or ``None`` if the construction fails.

    The tight even cover of the rows and columns used by ``M`` is tried
    first; otherwise ``S`` and ``T`` are well covers of the first and second
    coordinates of the perimeter points of ``M``'s components, clipped to
    the grid and padded to even intervals.
    """
    key = (M.edges, n)
    if key in _cache:
        return _cache[key]
    if not M.within(n):
        raise StructureError("matching leaves the grid")
    if not M.edges:
        witness = ExtensionWitness(IntervalUnion(), IntervalUnion(), DominoMatching(()))
        _cache[key] = witness
        return witness
    K1: list[int] = []
    K2: list[int] = []
    for comp in Figure(M.nodes()).components():
        for r, c in perimeter_points(comp):
            K1.append(r)
            K2.append(c)
    rows = {r for r, _ in M.nodes()}
    cols = {c for _, c in M.nodes()}
    witness = None
    # the tight cover of M's own rows and columns often suffices
    candidates = [
        (IntervalUnion.from_points(rows), IntervalUnion.from_points(cols)),
        (_unbounded_cover(K1), _unbounded_cover(K2)),
    ]
    for S, T in candidates:
        S, T = _normalize(S, n, rows), _normalize(T, n, cols)
        if S is None or T is None or not (rows <= S.point_set() and cols <= T.point_set()):
            continue
        matching = complete_matching(S.points(), T.points(), M.edges)
        if matching is not None:
            witness = ExtensionWitness(S, T, matching)
            break
    if len(_cache) > 200000:
        _cache.clear()
    _cache[key] = witness
    return witness


def _unbounded_cover(K: list[int]) -> IntervalUnion:
    # perimeter coordinates may be 0 or n, so pad without a boundary
    return _pad(IntervalUnion.from_points(_greedy_cover(K)), None)


def consistency_cache_clear() -> None:
    _cache.clear()


def _partner_choice(points: set[int], b: int, n: int) -> int:
    """Nearest value ``b2`` making ``points + {b, b2}`` even intervals."""
    base = points | {b}
    for dist in range(1, n + 1):
        for cand in (b - dist, b + dist):
            if 1 <= cand <= n and cand not in base:
                if IntervalUnion.from_points(base | {cand}).is_even():
                    return cand
    raise CapacityError(f"no partner value for {b} inside [1, {n}]")


def extend_with_node(M: PartialMatching, witness: ExtensionWitness, v: Cell, n: int):
    """Find a partner for ``v`` keeping ``M`` locally consistent.

    Returns ``(partner, M', witness')``; ``S`` and ``T`` grow by at most two
    elements each.
    """
    if M.size > n / 50 - 9:
        raise CapacityError(f"matching of size {M.size} exceeds n/50 - 9 at n={n}")
    if v in M.nodes():
        raise ValueError(f"{v} is already matched")
    a, b = v
    if not (1 <= a <= n and 1 <= b <= n):
        raise StructureError(f"{v} outside the grid")
    S, T = witness.S, witness.T
    dominoes = set(witness.matching.dominoes)
    if a in S and b in T:
        partner = witness.matching.partner_map()[v]
        new_M = M.add(v, partner)
        return partner, new_M, ExtensionWitness(S, T, DominoMatching(dominoes))
    if b not in T:
        b2 = _partner_choice(T.point_set(), b, n)
        for lo, hi in S.intervals:
            for r in range(lo, hi, 2):
                dominoes.add(canonical_domino((r, b), (r + 1, b)))
                dominoes.add(canonical_domino((r, b2), (r + 1, b2)))
        T = T.union([b, b2])
    if a not in S:
        a2 = _partner_choice(S.point_set(), a, n)
        for lo, hi in T.intervals:
            for c in range(lo, hi, 2):
                dominoes.add(canonical_domino((a, c), (a, c + 1)))
                dominoes.add(canonical_domino((a2, c), (a2, c + 1)))
        S = S.union([a, a2])
    matching = DominoMatching(dominoes)
    partner = matching.partner_map()[v]
    return partner, M.add(v, partner), ExtensionWitness(S, T, matching)


# onion matcher ------------------------------------------------------------


def ring_cells(r0: int, c0: int, side: int) -> list[Cell]:
    """Boundary cells of a square, clockwise from the top-left corner."""
    if side == 1:
        return [(r0, c0)]
    r1, c1 = r0 + side - 1, c0 + side - 1
    out = [(r0, c) for c in range(c0, c1)]
    out += [(r, c1) for r in range(r0, r1)]
    out += [(r1, c) for c in range(c1, c0, -1)]
    out += [(r, c0) for r in range(r1, r0, -1)]
    return out


def corner_distance(cell: Cell, r0: int, c0: int, side: int) -> int:
    """Distance along the boundary from a boundary cell to the nearest corner."""
    r, c = cell
    r1, c1 = r0 + side - 1, c0 + side - 1
    if r in (r0, r1):
        return min(c - c0, c1 - c)
    return min(r - r0, r1 - r)


def _inward(cell: Cell, r0: int, c0: int, side: int) -> Cell:
    r, c = cell
    r1, c1 = r0 + side - 1, c0 + side - 1
    if r == r0:
        return (r + 1, c)
    if r == r1:
        return (r - 1, c)
    if c == c0:
        return (r, c + 1)
    return (r, c - 1)


def match_square_with_dents(
    side: int, dents: Iterable[Cell], M_bound: Optional[int] = None, origin: Cell = (1, 1)
) -> DominoMatching:
    """Deterministic perfect matching of a square minus boundary dents.

    Rings are peeled from the outside.  On each ring the scan starts after
    the smallest dent and pairs cells clockwise; a segment of odd length
    between two dents sends one cell inward, which becomes a dent of the
    next ring.
    """
    r0, c0 = origin
    dents = {tuple(d) for d in dents}
    if M_bound is None:
        M_bound = len(dents)
    square = {(r, c) for r in range(r0, r0 + side) for c in range(c0, c0 + side)}
    boundary = set(ring_cells(r0, c0, side)) if side > 0 else set()
    if not dents <= boundary:
        raise InfeasibleError("dents must lie on the boundary")
    if len(dents) > M_bound:
        raise InfeasibleError(f"{len(dents)} dents exceed the bound {M_bound}")
    if side > 1 and any(corner_distance(d, r0, c0, side) < M_bound for d in dents):
        raise InfeasibleError(f"a dent lies within {M_bound} of a corner")
    whites = sum(1 for c in square - dents if is_white(c))
    if whites * 2 != len(square - dents):
        raise InfeasibleError("dented square is not color balanced")

    dominoes = []
    cur = set(dents)
    while side > 0:
        ring = ring_cells(r0, c0, side)
        if side == 1:
            if ring[0] not in cur:
                raise InfeasibleError("centre cell left unmatched")
            break
        corners = {ring[0], ring[side - 1], ring[2 * side - 2], ring[3 * side - 3]}
        nxt: set[Cell] = set()
        if not cur:
            segments = [ring]
        else:
            start = ring.index(min(cur))
            ring = ring[start:] + ring[:start]
            marks = [i for i, cell in enumerate(ring) if cell in cur] + [len(ring)]
            segments = [ring[marks[i] + 1 : marks[i + 1]] for i in range(len(marks) - 1)]
        for seg in segments:
            if len(seg) % 2:
                if seg[-1] not in corners:
                    left, seg = seg[-1], seg[:-1]
                elif seg[0] not in corners:
                    left, seg = seg[0], seg[1:]
                else:
                    raise InfeasibleError("odd segment pinned between corners")
                inner = _inward(left, r0, c0, side)
                dominoes.append((left, inner))
                nxt.add(inner)
            for i in range(0, len(seg), 2):
                dominoes.append((seg[i], seg[i + 1]))
        cur = nxt
        r0, c0, side = r0 + 1, c0 + 1, side - 2
    if side == 0 and cur:
        raise InfeasibleError("dents pushed past the centre")
    return DominoMatching(dominoes)
