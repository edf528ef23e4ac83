"""Grid geometry: figures, oriented perimeters, edge costs and domino tilings.

Cells are ``(row, col)`` pairs with 1-based indices.  A cell is white when
``row + col`` is even, so the corner ``(1, 1)`` is white.  Cell ``(r, c)``
occupies the unit square whose lattice corners are ``(r-1, c-1)`` and
``(r, c)``; perimeter edges run between such lattice points.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Optional

Cell = tuple[int, int]
Point = tuple[int, int]
Edge = tuple[Point, Point]
Domino = tuple[Cell, Cell]

NEIGHBOR_STEPS = ((-1, 0), (0, 1), (1, 0), (0, -1))


class StructureError(ValueError):
    """A perimeter or figure is malformed."""


def is_white(cell: Cell) -> bool:
    return (cell[0] + cell[1]) % 2 == 0


def color(cell: Cell) -> str:
    return "white" if is_white(cell) else "black"


def neighbors(cell: Cell) -> list[Cell]:
    r, c = cell
    return [(r + dr, c + dc) for dr, dc in NEIGHBOR_STEPS]


def canonical_domino(a: Cell, b: Cell) -> Domino:
    if abs(a[0] - b[0]) + abs(a[1] - b[1]) != 1:
        raise StructureError(f"cells {a} and {b} are not adjacent")
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class Figure:
    """A finite set of grid cells."""

    cells: frozenset

    def __init__(self, cells: Iterable[Cell]):
        object.__setattr__(self, "cells", frozenset((int(r), int(c)) for r, c in cells))

    def __len__(self) -> int:
        return len(self.cells)

    def __contains__(self, cell) -> bool:
        return cell in self.cells

    def __iter__(self):
        return iter(sorted(self.cells))

    @cached_property
    def white_count(self) -> int:
        return sum(1 for cell in self.cells if is_white(cell))

    @cached_property
    def black_count(self) -> int:
        return len(self.cells) - self.white_count

    def components(self) -> list["Figure"]:
        """Edge-connected components, ordered by their smallest cell."""
        seen: set[Cell] = set()
        out = []
        for start in sorted(self.cells):
            if start in seen:
                continue
            comp = [start]
            seen.add(start)
            queue = deque([start])
            while queue:
                cur = queue.popleft()
                for nb in neighbors(cur):
                    if nb in self.cells and nb not in seen:
                        seen.add(nb)
                        comp.append(nb)
                        queue.append(nb)
            out.append(Figure(comp))
        return out

    def holes(self) -> list["Figure"]:
        """Bounded components of the complement inside the bounding box."""
        if not self.cells:
            return []
        rows = [r for r, _ in self.cells]
        cols = [c for _, c in self.cells]
        r0, r1, c0, c1 = min(rows) - 1, max(rows) + 1, min(cols) - 1, max(cols) + 1
        free = {
            (r, c)
            for r in range(r0, r1 + 1)
            for c in range(c0, c1 + 1)
            if (r, c) not in self.cells
        }
        out = []
        for comp in Figure(free).components():
            touches_frame = any(
                r in (r0, r1) or c in (c0, c1) for r, c in comp.cells
            )
            if not touches_frame:
                out.append(comp)
        return out

    def bounding_box(self) -> tuple[int, int, int, int]:
        rows = [r for r, _ in self.cells]
        cols = [c for _, c in self.cells]
        return min(rows), max(rows), min(cols), max(cols)

    # serialization ---------------------------------------------------

    def to_text(self) -> str:
        return "".join(f"{r} {c}\n" for r, c in sorted(self.cells))

    @classmethod
    def from_text(cls, text: str) -> "Figure":
        cells = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise StructureError(f"line {lineno}: expected 'row col', got {line!r}")
            cells.append((int(parts[0]), int(parts[1])))
        return cls(cells)

    def to_json(self) -> str:
        return json.dumps([list(cell) for cell in sorted(self.cells)])

    @classmethod
    def from_json(cls, text: str) -> "Figure":
        return cls(tuple(item) for item in json.loads(text))


# perimeters -------------------------------------------------------------

_CLOCKWISE_CORNERS = ((-1, -1), (-1, 0), (0, 0), (0, -1))


def _cell_edges(cell: Cell) -> list[Edge]:
    r, c = cell
    pts = [(r + dr, c + dc) for dr, dc in _CLOCKWISE_CORNERS]
    return [(pts[i], pts[(i + 1) % 4]) for i in range(4)]


def right_cell(edge: Edge) -> Cell:
    """The cell lying to the right of a directed unit edge."""
    (r0, c0), (r1, c1) = edge
    dr, dc = r1 - r0, c1 - c0
    if (dr, dc) == (0, 1):
        return (r0 + 1, c1)
    if (dr, dc) == (0, -1):
        return (r0, c0)
    if (dr, dc) == (1, 0):
        return (r1, c0)
    if (dr, dc) == (-1, 0):
        return (r0, c0 + 1)
    raise StructureError(f"{edge} is not a unit lattice edge")


def edge_cost(edge: Edge) -> int:
    return 1 if is_white(right_cell(edge)) else -1


@dataclass(frozen=True)
class OrientedPerimeter:
    """A closed directed lattice path; ``kind`` is ``"outer"`` or ``"hole"``."""

    edges: tuple
    kind: str

    def signed_area2(self) -> int:
        total = 0
        for (r0, c0), (r1, c1) in self.edges:
            total += c0 * r1 - c1 * r0
        return total

    def validate(self) -> None:
        if not self.edges:
            raise StructureError("empty perimeter")
        if self.kind not in ("outer", "hole"):
            raise StructureError(f"unknown perimeter kind {self.kind!r}")
        for i, edge in enumerate(self.edges):
            right_cell(edge)
            nxt = self.edges[(i + 1) % len(self.edges)]
            if edge[1] != nxt[0]:
                raise StructureError(f"perimeter breaks between edges {i} and {i + 1}")
        area = self.signed_area2()
        if (self.kind == "outer") != (area > 0):
            raise StructureError(f"{self.kind} perimeter has the wrong orientation")


def path_cost(perimeter: OrientedPerimeter) -> int:
    """Sum of +1 (white cell on the right) / -1 (black cell on the right)."""
    perimeter.validate()
    return sum(edge_cost(e) for e in perimeter.edges)


_TURN_ORDER = {
    # incoming direction -> outgoing preference: right, straight, left
    (0, 1): ((1, 0), (0, 1), (-1, 0)),
    (1, 0): ((0, -1), (1, 0), (0, 1)),
    (0, -1): ((-1, 0), (0, -1), (1, 0)),
    (-1, 0): ((0, 1), (-1, 0), (0, -1)),
}


def perimeters(figure: Figure) -> list[OrientedPerimeter]:
    """Trace all perimeter cycles with the figure on the right of every edge.

    At pinch points (two cells meeting only at a corner) the tracer turns
    right first, which keeps diagonal neighbours on separate cycles.
    """
    directed: set[Edge] = set()
    for cell in figure.cells:
        for edge in _cell_edges(cell):
            directed.add(edge)
    boundary = {e for e in directed if (e[1], e[0]) not in directed}
    outgoing: dict[Point, list[Edge]] = {}
    for e in boundary:
        outgoing.setdefault(e[0], []).append(e)
    unused = set(boundary)
    cycles = []
    for start in sorted(boundary):
        if start not in unused:
            continue
        path = [start]
        unused.discard(start)
        cur = start
        while True:
            d_in = (cur[1][0] - cur[0][0], cur[1][1] - cur[0][1])
            nxt = None
            for d in _TURN_ORDER[d_in]:
                cand = (cur[1], (cur[1][0] + d[0], cur[1][1] + d[1]))
                if cand in unused:
                    nxt = cand
                    break
            if nxt is None:
                if cur[1] != start[0]:
                    raise StructureError("perimeter tracing failed to close")
                break
            unused.discard(nxt)
            path.append(nxt)
            cur = nxt
        per = OrientedPerimeter(tuple(path), "outer")
        if per.signed_area2() < 0:
            per = OrientedPerimeter(tuple(path), "hole")
        cycles.append(per)
    return cycles


def perimeter_points(figure: Figure) -> list[Point]:
    """Lattice points on the perimeter, one entry per cycle visit."""
    pts = []
    for per in perimeters(figure):
        pts.extend(e[0] for e in per.edges)
    return pts


def verify_boundary_identity(figure: Figure) -> bool:
    """Total perimeter cost equals ``4 * (white - black)``."""
    total = sum(path_cost(p) for p in perimeters(figure))
    return total == 4 * (figure.white_count - figure.black_count)


# matchings ---------------------------------------------------------------


@dataclass(frozen=True)
class DominoMatching:
    dominoes: frozenset

    def __init__(self, dominoes: Iterable[Domino]):
        object.__setattr__(
            self, "dominoes", frozenset(canonical_domino(a, b) for a, b in dominoes)
        )

    def __len__(self) -> int:
        return len(self.dominoes)

    def covered(self) -> set[Cell]:
        out: set[Cell] = set()
        for a, b in self.dominoes:
            out.add(a)
            out.add(b)
        return out

    def partner_map(self) -> dict[Cell, Cell]:
        out = {}
        for a, b in self.dominoes:
            out[a] = b
            out[b] = a
        return out

    def is_perfect_on(self, cells: Iterable[Cell]) -> bool:
        target = set(cells)
        seen: set[Cell] = set()
        for a, b in self.dominoes:
            if a in seen or b in seen or is_white(a) == is_white(b):
                return False
            seen.add(a)
            seen.add(b)
        return seen == target


def max_bipartite_matching(left: list, adj: dict, initial: Optional[dict] = None) -> dict:
    """Maximum matching by augmenting paths; ``adj[u]`` lists right vertices.

    Left vertices and their adjacency lists are scanned in the given order,
    so the result is deterministic.  ``initial`` (right -> left) seeds the
    search.  Returns a map right -> left.
    """
    match_r: dict = dict(initial or {})
    match_l: dict = {u: v for v, u in match_r.items()}
    # greedy start
    for u in left:
        if u in match_l:
            continue
        for v in adj[u]:
            if v not in match_r:
                match_r[v] = u
                match_l[u] = v
                break
    for root in left:
        if root in match_l:
            continue
        # iterative DFS over alternating paths
        parent: dict = {}
        visited: set = set()
        stack = [(root, iter(adj[root]))]
        found = None
        while stack and found is None:
            u, it = stack[-1]
            advanced = False
            for v in it:
                if v in visited:
                    continue
                visited.add(v)
                parent[v] = u
                if v not in match_r:
                    found = v
                    break
                w = match_r[v]
                stack.append((w, iter(adj[w])))
                advanced = True
                break
            if found is None and not advanced:
                stack.pop()
        if found is None:
            continue
        v = found
        while True:
            u = parent[v]
            prev = match_l.get(u)
            match_r[v] = u
            match_l[u] = v
            if u == root:
                break
            v = prev
    return match_r


def _figure_matching(figure: Figure) -> tuple[list[Cell], dict[Cell, Cell]]:
    blacks = sorted(c for c in figure.cells if not is_white(c))
    adj = {b: [n for n in neighbors(b) if n in figure.cells] for b in blacks}
    return blacks, max_bipartite_matching(blacks, adj)


def tile(figure: Figure) -> Optional[DominoMatching]:
    """A perfect domino tiling of the figure, or ``None`` if none exists."""
    if figure.white_count != figure.black_count:
        return None
    blacks, match_w = _figure_matching(figure)
    if len(match_w) != len(blacks):
        return None
    return DominoMatching((w, b) for w, b in match_w.items())


def find_negative_certificate(figure: Figure) -> Optional[Figure]:
    """A connected white-bounded sub-figure ``L + N(L)`` of negative cost.

    Returns ``None`` when the figure is tileable.  Figures with more white
    than black cells have no such certificate and are rejected.
    """
    if figure.white_count > figure.black_count:
        raise ValueError("figure has more white than black cells")
    blacks, match_w = _figure_matching(figure)
    match_b = {b: w for w, b in match_w.items()}
    free = [b for b in blacks if b not in match_b]
    if not free:
        return None
    # blacks reachable from a free black by alternating paths
    reach_b = set(free)
    reach_w: set[Cell] = set()
    queue = deque(free)
    while queue:
        b = queue.popleft()
        for w in neighbors(b):
            if w in figure.cells and w not in reach_w:
                reach_w.add(w)
                nb = match_w.get(w)
                if nb is not None and nb not in reach_b:
                    reach_b.add(nb)
                    queue.append(nb)
    sub = Figure(reach_b | reach_w)
    for comp in sub.components():
        if comp.black_count > comp.white_count:
            return comp
    raise AssertionError("Hall violator without a deficient component")


def is_white_bounded(sub: Figure, parent: Figure) -> bool:
    """Every perimeter edge of ``sub`` interior to ``parent`` has white on its right."""
    for per in perimeters(sub):
        for edge in per.edges:
            inside = right_cell(edge)
            outside = right_cell((edge[1], edge[0]))
            if outside in parent.cells and not is_white(inside):
                return False
    return True


def count_perfect_matchings(figure: Figure) -> int:
    """Brute-force count of domino tilings (small figures only)."""
    cells = sorted(figure.cells)

    def rec(remaining: frozenset) -> int:
        if not remaining:
            return 1
        first = min(remaining)
        total = 0
        for nb in ((first[0], first[1] + 1), (first[0] + 1, first[1])):
            if nb in remaining:
                total += rec(remaining - {first, nb})
        return total

    return rec(frozenset(cells))
