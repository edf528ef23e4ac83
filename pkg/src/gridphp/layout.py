"""Bricks, mini-squares, super-squares and routed augmenting paths.

The grid minus its first row and column is tiled by ``B x B`` bricks.
Super-squares are ``5 D^2 R`` bricks wide and hold ``D`` mini-squares of
``4 D R`` bricks along their diagonal.  Every pair of mini-squares in
adjacent super-squares is joined by ``R`` bundles of three paths: two
variable paths attached at the mini-square's own color and one fixed
path attached at the opposite color.

Brick coordinates ``(I, J)`` are 0-based; brick ``(I, J)`` covers cell
rows ``2 + B I .. 1 + B (I + 1)`` and the same columns.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

from .grid_core import Cell, DominoMatching, canonical_domino, is_white
from .matching_engine import corner_distance, match_square_with_dents

PAPER_BRICK = 30


class LayoutError(ValueError):
    pass


MiniId = tuple  # (a, b, i): super-square row, column, diagonal index
PathId = tuple  # (pair, k, slot): slot 0/1 variable, 2 fixed


def super_color_white(ss: tuple) -> bool:
    return (ss[0] + ss[1]) % 2 == 0


class MiniGraph:
    """Mini-squares and their path groups without any cell geometry."""

    def __init__(self, m: int, delta: int, R: int, n: Optional[int] = None):
        if m < 1 or m % 2 == 0:
            raise LayoutError(f"the reduced grid side must be odd, got {m}")
        if delta < 1 or R < 1:
            raise LayoutError("delta and R must be positive")
        self.m, self.delta, self.R = m, delta, R
        self.n = n if n is not None else 1 + m * 150 * delta * delta * R

    survivor: MiniId = (0, 0, 0)

    @cached_property
    def supers(self) -> list[tuple]:
        return [(a, b) for a in range(self.m) for b in range(self.m)]

    @cached_property
    def minis(self) -> list[MiniId]:
        return [(a, b, i) for a, b in self.supers for i in range(self.delta)]

    @cached_property
    def super_pairs(self) -> list[tuple]:
        """Adjacent super-squares as (upper-or-left, lower-or-right)."""
        out = []
        for a, b in self.supers:
            if b + 1 < self.m:
                out.append(((a, b), (a, b + 1)))
            if a + 1 < self.m:
                out.append(((a, b), (a + 1, b)))
        return sorted(out)

    @cached_property
    def pairs(self) -> list[tuple]:
        """Mini-square pairs in adjacent super-squares, first one upper/left."""
        out = []
        for s1, s2 in self.super_pairs:
            for i in range(self.delta):
                for j in range(self.delta):
                    out.append(((*s1, i), (*s2, j)))
        return out

    @cached_property
    def pair_index(self) -> dict:
        return {p: idx for idx, p in enumerate(self.pairs)}

    @cached_property
    def neighbors(self) -> dict:
        out: dict = {s: [] for s in self.minis}
        for s1, s2 in self.pairs:
            out[s1].append(s2)
            out[s2].append(s1)
        return {s: sorted(v) for s, v in out.items()}

    def pair_of(self, s1: MiniId, s2: MiniId) -> tuple:
        p = (s1, s2) if (s1, s2) in self.pair_index else (s2, s1)
        if p not in self.pair_index:
            raise KeyError(f"{s1} and {s2} are not in adjacent super-squares")
        return p

    @property
    def width(self) -> int:
        return 2 * self.R

    def group_paths(self, pair: tuple) -> list[PathId]:
        """Variable paths of a pair in group-vector order."""
        return [(pair, k, slot) for k in range(self.R) for slot in (0, 1)]

    def fixed_paths(self, pair: tuple) -> list[PathId]:
        return [(pair, k, 2) for k in range(self.R)]

    def super_of(self, s: MiniId) -> tuple:
        return (s[0], s[1])

    def direction(self, s: MiniId, other: MiniId) -> int:
        """0 up, 1 right, 2 down, 3 left: where ``other``'s super-square lies."""
        da, db = other[0] - s[0], other[1] - s[1]
        return {(-1, 0): 0, (0, 1): 1, (1, 0): 2, (0, -1): 3}[(da, db)]

    def reduced_node(self, ss: tuple) -> tuple:
        return (ss[0] + 1, ss[1] + 1)


@dataclass(frozen=True)
class LayoutParams:
    n: int
    delta: int = 1
    R: int = 1
    brick: int = PAPER_BRICK
    restart_cap: int = 1000

    @property
    def super_bricks(self) -> int:
        return 5 * self.delta**2 * self.R

    @property
    def mini_bricks(self) -> int:
        return 4 * self.delta * self.R

    @property
    def T(self) -> int:
        return self.super_bricks * self.brick

    @property
    def mini_side(self) -> int:
        return self.mini_bricks * self.brick

    @property
    def survivor_side(self) -> int:
        return self.mini_side + 1

    @property
    def m(self) -> int:
        return (self.n - 1) // self.T

    @property
    def slot_base(self) -> int:
        return (self.brick // 2 - 3) & ~1

    def validate(self) -> None:
        if self.n < 1 or self.n % 2 == 0:
            raise LayoutError(f"n must be odd, got {self.n}")
        if self.brick < 10 or self.brick % 2:
            raise LayoutError("brick side must be even and at least 10")
        if self.delta < 1 or self.R < 1:
            raise LayoutError("delta and R must be positive")
        if (self.n - 1) % self.brick:
            raise LayoutError(f"n must be 1 modulo the brick side {self.brick}")
        if (self.n - 1) % self.T:
            raise LayoutError(f"n - 1 = {self.n - 1} is not a multiple of T = {self.T}")
        if self.m % 2 == 0 or self.m < 1:
            raise LayoutError(f"(n - 1) / T = {self.m} must be a positive odd integer")


@dataclass
class Route:
    """Geometry of one path: bricks crossed and the dominoes of type 1."""

    bricks: list
    dents: list  # per brick: (entry cell, exit cell)
    dominoes: list  # attachment, crossings, attachment
    sides: list  # per brick: (entry side, exit side)

    @property
    def start(self) -> Cell:
        return self.dominoes[0][0]

    @property
    def end(self) -> Cell:
        return self.dominoes[-1][1]


_OPPOSITE = {"L": "R", "R": "L", "T": "B", "B": "T"}
_STEP = {"L": (0, -1), "R": (0, 1), "T": (-1, 0), "B": (1, 0)}


class Layout(MiniGraph):
    """Cell-level layout of bricks, mini-squares and paths."""

    def __init__(self, params: LayoutParams):
        params.validate()
        self.params = params
        super().__init__(params.m, params.delta, params.R, params.n)
        self.B = params.brick
        self.L = params.super_bricks
        self.M = params.mini_bricks
        self.routes: dict = {}
        self.brick_paths: dict = {}
        self.attachments: dict = {s: [] for s in self.minis}
        for pair in self.pairs:
            for k in range(self.R):
                self._route_bundle(pair, k)
        self.check_disjoint_paths()

    # geometry -----------------------------------------------------------

    def brick_origin(self, brick: tuple) -> Cell:
        return (2 + self.B * brick[0], 2 + self.B * brick[1])

    def mini_brick(self, s: MiniId) -> tuple:
        a, b, i = s
        return (self.L * a + self.M * i, self.L * b + self.M * i)

    def mini_box(self, s: MiniId) -> tuple:
        """(row, col, side) of a mini-square's top-left cell."""
        if s == self.survivor:
            return (1, 1, self.params.survivor_side)
        r, c = self.brick_origin(self.mini_brick(s))
        return (r, c, self.params.mini_side)

    def mini_of_brick(self, brick: tuple) -> Optional[MiniId]:
        I, J = brick
        a, i_row = divmod(I, self.L)
        b, i_col = divmod(J, self.L)
        i, rem = divmod(i_row, self.M)
        if i < self.delta and i_col // self.M == i:
            return (a, b, i)
        return None

    @cached_property
    def n_bricks(self) -> int:
        return (self.params.n - 1) // self.B

    def outside_bricks(self) -> list[tuple]:
        return [
            (I, J)
            for I in range(self.n_bricks)
            for J in range(self.n_bricks)
            if self.mini_of_brick((I, J)) is None
        ]

    def _cell(self, brick: tuple, side: str, offset: int) -> Cell:
        r0, c0 = self.brick_origin(brick)
        last = self.B - 1
        return {
            "L": (r0 + offset, c0),
            "R": (r0 + offset, c0 + last),
            "T": (r0, c0 + offset),
            "B": (r0 + last, c0 + offset),
        }[side]

    def _flip(self, offset: int) -> int:
        base = self.params.slot_base
        return base + ((offset - base) ^ 1)

    # routing ------------------------------------------------------------

    def _bundle_bricks(self, pair: tuple, k: int) -> list[tuple]:
        (a, b, i), (a2, b2, j) = pair
        D, R, L, M = self.delta, self.R, self.L, self.M
        out_idx = D * R + 2 * (j * R + k)
        in_idx = D * R + 2 * (i * R + k) + 1
        connector = M * D + (i * D + j) * R + k
        horizontal = b2 == b + 1
        if horizontal:
            r1, r2 = L * a + M * i + out_idx, L * a + M * j + in_idx
            c = L * b + connector
            seq = [(r1, col) for col in range(L * b + M * (i + 1), c + 1)]
            step = 1 if r2 > r1 else -1
            seq += [(row, c) for row in range(r1 + step, r2 + step, step)]
            seq += [(r2, col) for col in range(c + 1, L * b2 + M * j)]
        else:
            c1, c2 = L * b + M * i + out_idx, L * b + M * j + in_idx
            rr = L * a + connector
            seq = [(row, c1) for row in range(L * a + M * (i + 1), rr + 1)]
            step = 1 if c2 > c1 else -1
            seq += [(rr, col) for col in range(c1 + step, c2 + step, step)]
            seq += [(row, c2) for row in range(rr + 1, L * a2 + M * j)]
        return seq

    def _route_bundle(self, pair: tuple, k: int) -> None:
        s1, s2 = pair
        bricks = self._bundle_bricks(pair, k)
        horizontal = s2[1] == s1[1] + 1
        first_side = "L" if horizontal else "T"
        base = self.params.slot_base
        white_mini = super_color_white(self.super_of(s1))
        var_offsets, fixed_offsets = [], []
        for o in range(base, base + 4):
            e1 = self._cell(bricks[0], first_side, o)
            dr, dc = _STEP[first_side]
            a0 = (e1[0] + dr, e1[1] + dc)
            (var_offsets if is_white(a0) == white_mini else fixed_offsets).append(o)
        offsets = {0: var_offsets[0], 1: var_offsets[1], 2: fixed_offsets[0]}
        for slot in (0, 1, 2):
            pid = (pair, k, slot)
            route = self._trace(bricks, first_side, offsets[slot], "R" if horizontal else "B")
            self.routes[pid] = route
            for brick in bricks:
                self.brick_paths.setdefault(brick, []).append(pid)
            self.attachments[s1].append((pid, route.start))
            self.attachments[s2].append((pid, route.end))
            want = is_white(route.start) == white_mini
            if want != (slot != 2) or is_white(route.end) == is_white(route.start):
                raise LayoutError(f"attachment colors wrong for path {pid}")

    def _trace(self, bricks: list, first_side: str, offset: int, last_side: str) -> Route:
        dents, dominoes, sides = [], [], []
        entry_side, o = first_side, offset
        e = self._cell(bricks[0], entry_side, o)
        dr, dc = _STEP[entry_side]
        dominoes.append(((e[0] + dr, e[1] + dc), e))
        for idx, brick in enumerate(bricks):
            if idx + 1 < len(bricks):
                nxt = bricks[idx + 1]
                delta = (nxt[0] - brick[0], nxt[1] - brick[1])
            else:
                delta = _STEP[last_side]
            exit_side = {v: k for k, v in _STEP.items()}[delta]
            if exit_side == entry_side:
                raise LayoutError("route doubles back")
            if exit_side != _OPPOSITE[entry_side]:
                if is_white(self._cell(brick, exit_side, o)) == is_white(e):
                    o = self._flip(o)
            x = self._cell(brick, exit_side, o)
            if is_white(x) == is_white(e):
                raise LayoutError(f"unbalanced dents in brick {brick}")
            dents.append((e, x))
            sides.append((entry_side, exit_side))
            nxt_cell = (x[0] + delta[0], x[1] + delta[1])
            dominoes.append((x, nxt_cell))
            entry_side = _OPPOSITE[exit_side]
            e = nxt_cell
        return Route(list(bricks), dents, dominoes, sides)

    # checks ---------------------------------------------------------------

    def check_disjoint_paths(self) -> dict:
        """At most one horizontal and one vertical bundle per outside brick."""
        worst = {"horizontal": 0, "vertical": 0}
        for brick, pids in self.brick_paths.items():
            if self.mini_of_brick(brick) is not None:
                raise LayoutError(f"path enters mini-square brick {brick}")
            if not (0 <= brick[0] < self.n_bricks and 0 <= brick[1] < self.n_bricks):
                raise LayoutError(f"path leaves the grid at brick {brick}")
            h, v = set(), set()
            for pid in pids:
                bundle = (pid[0], pid[1])
                route = self.routes[pid]
                for side in route.sides[route.bricks.index(brick)]:
                    (h if side in "LR" else v).add(bundle)
            worst["horizontal"] = max(worst["horizontal"], len(h))
            worst["vertical"] = max(worst["vertical"], len(v))
            if len(h) > 1 or len(v) > 1:
                raise LayoutError(f"brick {brick} carries {len(h)} horizontal and {len(v)} vertical bundles")
        return worst

    def path_counts(self) -> dict:
        out = {}
        for pair in self.pairs:
            kinds = [pid[2] for pid in self.routes if pid[0] == pair]
            out[pair] = (sum(1 for s in kinds if s < 2), sum(1 for s in kinds if s == 2))
        return out

    # matchings --------------------------------------------------------------

    def path_value(self, y: dict, pid: PathId) -> int:
        """Type of a path; fixed paths are always type 1."""
        if pid[2] == 2:
            return 1
        return y[pid]

    def brick_matching(self, brick: tuple, types: dict) -> DominoMatching:
        dents = []
        for pid in self.brick_paths.get(brick, []):
            if types[pid]:
                route = self.routes[pid]
                dents.extend(route.dents[route.bricks.index(brick)])
        return onion(self.B, self.brick_origin(brick), dents, relaxed=self.B < PAPER_BRICK)

    def mini_matching(self, s: MiniId, types: dict, extra: tuple = ()) -> DominoMatching:
        r, c, side = self.mini_box(s)
        dents = [cell for pid, cell in self.attachments[s] if types[pid]]
        dents.extend(extra)
        return onion(side, (r, c), dents)

    def strip_matching(self) -> list:
        n, start = self.params.n, self.params.survivor_side + 1
        out = [((1, c), (1, c + 1)) for c in range(start, n, 2)]
        out += [((r, 1), (r + 1, 1)) for r in range(start, n, 2)]
        return out

    def survivor_spare(self) -> Cell:
        """A white top-row cell of the survivor used as its extra dent."""
        c = self.params.survivor_side // 2
        return (1, c if c % 2 else c + 1)

    def all_types(self, y: dict) -> dict:
        return {pid: self.path_value(y, pid) for pid in self.routes}

    def assemble_matching(self, y: dict) -> DominoMatching:
        """Matching of the grid determined by the path types ``y``.

        Every mini-square must see exactly half of its variable paths of
        type 1; the survivor's spare cell is left uncovered.
        """
        types = self.all_types(y)
        dominoes = list(self.strip_matching())
        for pid, route in self.routes.items():
            if types[pid]:
                dominoes.extend(route.dominoes)
        for brick in self.outside_bricks():
            dominoes.extend(self.brick_matching(brick, types).dominoes)
        for s in self.minis:
            extra = (self.survivor_spare(),) if s == self.survivor else ()
            dominoes.extend(self.mini_matching(s, types, extra).dominoes)
        return DominoMatching(dominoes)


_onion_cache: dict = {}


def onion(side: int, origin: Cell, dents, relaxed: bool = False) -> DominoMatching:
    """Translated, cached call of the onion matcher."""
    r0, c0 = origin
    rel = frozenset((r - r0, c - c0) for r, c in dents)
    parity = (r0 + c0) % 2
    key = (side, parity, rel, relaxed)
    if key not in _onion_cache:
        base = (1 + parity, 1)
        cells = [(r + base[0], c + base[1]) for r, c in rel]
        bound = len(cells)
        if relaxed and side > 1 and cells:
            bound = min(bound, min(corner_distance(d, base[0], base[1], side) for d in cells))
        m = match_square_with_dents(side, cells, bound, base)
        _onion_cache[key] = [
            ((a[0] - base[0], a[1] - base[1]), (b[0] - base[0], b[1] - base[1]))
            for a, b in m.dominoes
        ]
        if len(_onion_cache) > 5000:
            _onion_cache.pop(next(iter(_onion_cache)))
    return DominoMatching(
        ((a[0] + r0, a[1] + c0), (b[0] + r0, b[1] + c0)) for a, b in _onion_cache[key]
    )
