"""Sampling of almost complete matchings, full and partial restrictions,
and the substitution that turns the parent instance into the reduced one.
"""
from __future__ import annotations

import itertools
import json
import math
import random
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Mapping, Optional

from .bijection import bits_to_mask, choose_path, is_lopsided
from .formula_core import (
    TRUE,
    Const,
    Formula,
    Not,
    Or,
    Var,
    apply_substitution,
    disj,
    disjuncts,
    edge_var,
    equivalent,
    evaluate,
    exactly_one,
    generate_php,
    incident_edges,
    is_literal,
    parse_edge_var,
    simplify,
    variables,
)
from .grid_core import canonical_domino
from .layout import Layout, LayoutError, MiniGraph

DEFAULT_CAP = 1000


class SamplingError(RuntimeError):
    """The restart cap was exceeded."""

    def __init__(self, message: str, diagnostics: dict):
        super().__init__(message)
        self.diagnostics = diagnostics


# tau ---------------------------------------------------------------------


@dataclass(frozen=True)
class TauAssignment:
    """Type bits of all variable paths, one 2R-vector per mini-square pair."""

    groups: tuple  # sorted ((pair, bits), ...)

    @classmethod
    def from_dict(cls, d: Mapping) -> "TauAssignment":
        return cls(tuple(sorted((p, tuple(bits)) for p, bits in d.items())))

    @cached_property
    def as_dict(self) -> dict:
        return dict(self.groups)

    def bit(self, pid) -> int:
        pair, k, slot = pid
        return self.as_dict[pair][2 * k + slot]

    def y(self) -> dict:
        out = {}
        for pair, bits in self.groups:
            for idx, b in enumerate(bits):
                out[(pair, idx // 2, idx % 2)] = b
        return out

    def mini_sums(self, system: MiniGraph) -> dict:
        """Signed imbalance around each mini-square (0 means exactly half true)."""
        out = {s: 0 for s in system.minis}
        for pair, bits in self.groups:
            d = 2 * sum(bits) - len(bits)
            out[pair[0]] += d
            out[pair[1]] += d
        return out

    def to_json(self) -> list:
        return [[list(map(list, pair)), list(bits)] for pair, bits in self.groups]


def _cycles(system: MiniGraph) -> list:
    """Alternating 4-cycles of mini-square pairs; flipping one keeps balance."""
    out = []
    D = system.delta
    for s1, s2 in system.super_pairs:
        for i, k in combinations(range(D), 2):
            for j in range(D):
                for l in range(D):
                    if j == l:
                        continue
                    out.append(
                        (
                            ((*s1, i), (*s2, j), 1),
                            ((*s1, k), (*s2, j), -1),
                            ((*s1, k), (*s2, l), 1),
                            ((*s1, i), (*s2, l), -1),
                        )
                    )
    for a in range(system.m - 1):
        for b in range(system.m - 1):
            for al in range(D):
                for be in range(D):
                    for ga in range(D):
                        for de in range(D):
                            A, Bm = (a, b, al), (a, b + 1, be)
                            C, Dd = (a + 1, b + 1, ga), (a + 1, b, de)
                            out.append(((A, Bm, 1), (Bm, C, -1), (Dd, C, 1), (A, Dd, -1)))
    return out


def sample_tau(system: MiniGraph, rng: random.Random, steps: Optional[int] = None,
               cap: int = DEFAULT_CAP):
    """Approximately uniform balanced assignment without lopsided groups.

    Starts from independent half-true groups and runs a Metropolis chain of
    in-group swaps and alternating 4-cycle moves, both of which keep every
    mini-square balanced.  Returns ``(tau, restarts)``.
    """
    width, R = system.width, system.R
    pairs = system.pairs
    cycles = _cycles(system)
    steps = steps if steps is not None else 20 * len(pairs)
    restarts = 0
    while True:
        state = {}
        for p in pairs:
            on = set(rng.sample(range(width), R))
            state[p] = [1 if i in on else 0 for i in range(width)]
        for _ in range(steps):
            if not cycles or rng.random() < 0.5:
                bits = state[pairs[rng.randrange(len(pairs))]]
                i, j = rng.randrange(width), rng.randrange(width)
                bits[i], bits[j] = bits[j], bits[i]
                continue
            cyc = cycles[rng.randrange(len(cycles))]
            sign = 1 if rng.random() < 0.5 else -1
            moves, ratio, ok = [], 1.0, True
            for s1, s2, d in cyc:
                bits = state[system.pair_of(s1, s2)]
                want = 0 if d * sign > 0 else 1
                cand = [i for i, b in enumerate(bits) if b == want]
                if not cand:
                    ok = False
                    break
                # reverse move chooses among the opposite bits after the flip
                ratio *= len(cand) / (width - len(cand) + 1)
                moves.append((bits, rng.choice(cand)))
            if ok and rng.random() < min(1.0, ratio):
                for bits, i in moves:
                    bits[i] ^= 1
        if not any(is_lopsided(bits) for bits in state.values()):
            return TauAssignment.from_dict(state), restarts
        restarts += 1
        if restarts > cap:
            raise SamplingError(
                f"tau sampling exceeded {cap} restarts",
                {"stage": "tau", "restarts": restarts, "R": R, "groups": len(pairs)},
            )


def sample_advice(system: MiniGraph, rng: random.Random) -> dict:
    return {p: (rng.randrange(2), rng.randrange(2)) for p in system.pairs}


def pi1_super_pairs(m: int) -> list:
    """Fixed matching of all super-squares except the top-left one."""
    out = [((a, 0), (a + 1, 0)) for a in range(1, m - 1, 2)]
    for a in range(m):
        out += [((a, b), (a, b + 1)) for b in range(1, m - 1, 2)]
    return out


# full restrictions -----------------------------------------------------------


@dataclass
class Sigma:
    """A full restriction: tau, chosen mini-squares, advice and chosen paths."""

    system: MiniGraph
    tau: TauAssignment
    U: dict  # super-square -> diagonal index
    B: dict
    y: dict = field(default_factory=dict)
    chosen: dict = field(default_factory=dict)  # mini pair -> chosen path
    pi1: list = field(default_factory=list)
    restarts: int = 0

    def chosen_mini(self, ss: tuple) -> tuple:
        return (*ss, self.U[ss])

    @property
    def U_minis(self) -> set:
        return {self.chosen_mini(ss) for ss in self.U}

    def reduced_var(self, pair: tuple) -> str:
        s1, s2 = pair
        sys = self.system
        return edge_var(sys.reduced_node(s1[:2]), sys.reduced_node(s2[:2]))

    def z_names(self) -> dict:
        """Chosen path -> name of its reduced variable."""
        return {pid: self.reduced_var(pair) for pair, pid in self.chosen.items()}


def build_sigma(system: MiniGraph, tau: TauAssignment, U: dict, B: dict) -> Sigma:
    """Steps three and four: choose paths for adjacent chosen mini-squares."""
    sig = Sigma(system, tau, dict(U), dict(B))
    sig.y = tau.y()
    pi1_ss = pi1_super_pairs(system.m)
    sig.pi1 = [system.pair_of(sig.chosen_mini(a), sig.chosen_mini(b)) for a, b in pi1_ss]
    for pair in sig.pi1:
        bits = tau.as_dict[pair]
        idx = choose_path(bits, "lower", B[pair])
        pid = system.group_paths(pair)[idx]
        sig.y[pid] = 0
        sig.chosen[pair] = pid
    pi1_set = set(sig.pi1)
    for s1, s2 in system.super_pairs:
        pair = system.pair_of(sig.chosen_mini(s1), sig.chosen_mini(s2))
        if pair in pi1_set:
            continue
        bits = tau.as_dict[pair]
        idx = choose_path(bits, "raise", B[pair])
        sig.chosen[pair] = system.group_paths(pair)[idx]
    return sig


def sample_sigma(system: MiniGraph, rng: random.Random, cap: int = DEFAULT_CAP,
                 tau_steps: Optional[int] = None) -> Sigma:
    tau, restarts = sample_tau(system, rng, steps=tau_steps, cap=cap)
    U = {}
    for ss in system.supers:
        U[ss] = 0 if ss == (0, 0) else rng.randrange(system.delta)
    B = sample_advice(system, rng)
    sig = build_sigma(system, tau, U, B)
    sig.restarts = restarts
    return sig


class SubstitutionMap(Mapping):
    """Images of edge variables: constants, literals or small disjunctions.

    Edges absent from both ``ones`` and ``forms`` map to 0.
    """

    def __init__(self, n: int, ones: set, forms: dict):
        self.n = n
        self.ones = ones
        self.forms = forms

    def image_of_edge(self, a, b) -> Formula:
        d = canonical_domino(a, b)
        if d in self.forms:
            return self.forms[d]
        return TRUE if d in self.ones else Const(0)

    def __getitem__(self, name: str) -> Formula:
        a, b = parse_edge_var(name)
        if not all(1 <= x <= self.n for x in (*a, *b)):
            raise KeyError(name)
        return self.image_of_edge(a, b)

    def __contains__(self, name) -> bool:
        try:
            self[name]
        except (KeyError, ValueError):
            return False
        return True

    def __iter__(self):
        n = self.n
        for r in range(1, n + 1):
            for c in range(1, n + 1):
                if c < n:
                    yield edge_var((r, c), (r, c + 1))
                if r < n:
                    yield edge_var((r, c), (r + 1, c))

    def __len__(self) -> int:
        return 2 * self.n * (self.n - 1)


def substitution(layout: Layout, sig: Sigma) -> SubstitutionMap:
    """Substitution induced by a full restriction on the cell grid."""
    if layout.m < 3:
        raise LayoutError("full restrictions need a reduced grid of side at least 3")
    names = sig.z_names()
    types = layout.all_types(sig.y)
    ones: set = set(canonical_domino(a, b) for a, b in layout.strip_matching())
    forms: dict = {}
    for pid, route in layout.routes.items():
        if pid in names:
            for a, b in route.dominoes:
                forms[canonical_domino(a, b)] = Var(names[pid])
        elif types[pid]:
            ones.update(canonical_domino(a, b) for a, b in route.dominoes)
    for brick in layout.outside_bricks():
        live = [pid for pid in layout.brick_paths.get(brick, []) if pid in names]
        if not live:
            ones.update(layout.brick_matching(brick, types).dominoes)
            continue
        if len(live) > 1:
            raise LayoutError(f"brick {brick} carries {len(live)} chosen paths")
        (pid,) = live
        m0 = layout.brick_matching(brick, {**types, pid: 0}).dominoes
        m1 = layout.brick_matching(brick, {**types, pid: 1}).dominoes
        z = Var(names[pid])
        ones.update(m0 & m1)
        for d in m1 - m0:
            forms[d] = z
        for d in m0 - m1:
            forms[d] = Not(z)
    U = sig.U_minis
    for s in layout.minis:
        if s not in U:
            ones.update(layout.mini_matching(s, types).dominoes)
            continue
        zs = sorted(pid for pid, _ in layout.attachments[s] if pid in names)
        if not zs:
            raise LayoutError(f"chosen mini-square {s} has no chosen path")
        base = {**types, **{pid: 0 for pid in zs}}
        per = [layout.mini_matching(s, {**base, pid: 1}).dominoes for pid in zs]
        union = set().union(*per)
        for d in union:
            holders = [names[pid] for pid, m in zip(zs, per) if d in m]
            if len(holders) == len(zs):
                ones.add(d)
            else:
                forms[d] = disj(Var(z) for z in sorted(holders))
    return SubstitutionMap(layout.params.n, ones, forms)


def sample_full_restriction(layout: Layout, rng: random.Random, cap: int = DEFAULT_CAP):
    """Returns ``(sigma, substitution, reduced instance)``."""
    sig = sample_sigma(layout, rng, cap)
    return sig, substitution(layout, sig), generate_php(layout.m)


def is_small_image(f: Formula) -> bool:
    if isinstance(f, Const) or is_literal(f):
        return True
    parts = disjuncts(f)
    return len(parts) <= 3 and all(is_literal(p) for p in parts)


def _node_clauses(images) -> list:
    names = [f"v{i}" for i in range(len(images))]
    sub = dict(zip(names, images))
    return [apply_substitution(c, sub) for c in exactly_one(names)]


def _classify_node(images: tuple, target_vars: tuple) -> tuple:
    """How the exactly-one axioms of a node look after substitution.

    ``target_vars`` are the reduced variables of the node's owner, or None
    for nodes outside every chosen mini-square.  Returns
    ``(kind, clause_kinds)``: kind is ``"true"`` when the clauses hold
    identically, ``"exactly-one"`` when they are equivalent to the owner's
    exactly-one constraint, ``"implied"`` when they only follow from it and
    ``"broken"`` otherwise.
    """
    clauses = _node_clauses(images)
    zs = set().union(*(variables(c) for c in clauses)) if clauses else set()
    if target_vars is None:
        target_vars = tuple(zs)
    elif not zs <= set(target_vars):
        return "broken", ("broken",) * len(clauses)
    zs = sorted(target_vars)
    target = exactly_one(zs)
    envs = [dict(zip(zs, bits)) for bits in itertools.product((0, 1), repeat=len(zs))]

    def holds_all(env, fs):
        return all(evaluate(f, env) for f in fs)

    good = [env for env in envs if holds_all(env, target)]
    if all(holds_all(env, clauses) for env in envs):
        kind = "true"
    elif all(holds_all(env, clauses) == holds_all(env, target) for env in envs):
        kind = "exactly-one"
    elif all(holds_all(env, clauses) for env in good):
        kind = "implied"
    else:
        kind = "broken"
    clause_kinds = []
    target_set = {frozenset(disjuncts(t)) for t in target}
    for c in clauses:
        if c == TRUE:
            clause_kinds.append("const")
        elif all(evaluate(c, env) for env in envs):
            clause_kinds.append("tautology")
        elif frozenset(disjuncts(c)) in target_set:
            clause_kinds.append("axiom")
        elif all(evaluate(c, env) for env in good):
            clause_kinds.append("implied")
        else:
            clause_kinds.append("broken")
    return kind, tuple(clause_kinds)


def verify_full_restriction(layout: Layout, sig: Sigma, sub: SubstitutionMap) -> dict:
    """Check every parent axiom against the reduced instance.

    Each node's clauses must only mention reduced variables of the chosen
    mini-square it lies in, and each clause on its own must be constant, a
    tautology, a reduced axiom or follow from the reduced axioms.  Every
    reduced node must be the exact image of at least one parent node.
    """
    n = layout.params.n
    reduced = generate_php(layout.m)
    expected = {}
    for ss in layout.supers:
        expected[sig.chosen_mini(ss)] = tuple(incident_edges(layout.m, layout.reduced_node(ss)))
    problems = []
    bad_images = [d for d, f in sub.forms.items() if not is_small_image(f)]
    if bad_images:
        problems.append(f"{len(bad_images)} images are not small disjunctions")
    cache: dict = {}
    clause_cache: dict = {}
    counts = {"true": 0, "exactly-one": 0, "implied": 0, "constant": 0}
    clause_counts: dict = {}
    per_owner: dict = {s: set() for s in expected}
    forms, ones = sub.forms, sub.ones
    for r in range(1, n + 1):
        for c in range(1, n + 1):
            v = (r, c)
            imgs = []
            const_ones = 0
            symbolic = False
            for d in _incident_dominoes(n, v):
                if d in forms:
                    imgs.append(forms[d])
                    symbolic = True
                elif d in ones:
                    imgs.append(TRUE)
                    const_ones += 1
                else:
                    imgs.append(Const(0))
            if not symbolic:
                if const_ones != 1:
                    problems.append(f"node {v} has {const_ones} edges fixed to 1")
                counts["constant"] += 1
                continue
            owner = _owner(layout, sig, v)
            target = expected[owner] if owner is not None else None
            key = (tuple(imgs), target)
            if key not in cache:
                cache[key] = _classify_node(*key)
            kind, ck = cache[key]
            if owner is not None:
                key = tuple(imgs)
                if key not in clause_cache:
                    clause_cache[key] = _node_clauses(key)
                per_owner[owner].update(clause_cache[key])
            for k in ck:
                clause_counts[k] = clause_counts.get(k, 0) + 1
            if kind == "broken" or "broken" in ck:
                problems.append(f"node {v} does not reduce to a reduced axiom")
                continue
            if owner is None and kind != "true":
                problems.append(f"node {v} outside the chosen mini-squares is not constant")
                continue
            counts[kind] += 1
    for owner, clauses in per_owner.items():
        zs = expected[owner]
        target = exactly_one(zs)
        for bits in itertools.product((0, 1), repeat=len(zs)):
            env = dict(zip(zs, bits))
            if all(evaluate(c, env) for c in clauses) != all(evaluate(t, env) for t in target):
                problems.append(f"chosen mini-square {owner} does not yield its reduced axioms")
                break
    return {
        "problems": problems,
        "nodes": counts,
        "clauses": clause_counts,
        "reduced_vars": len(reduced.variables),
    }


def _incident_dominoes(n: int, v) -> list:
    r, c = v
    out = []
    for w in ((r - 1, c), (r, c - 1), (r, c + 1), (r + 1, c)):
        if 1 <= w[0] <= n and 1 <= w[1] <= n:
            out.append(canonical_domino(v, w))
    return out


def _owner(layout: Layout, sig: Sigma, v) -> Optional[tuple]:
    for s in sig.U_minis:
        r, c, side = layout.mini_box(s)
        if r <= v[0] < r + side and c <= v[1] < c + side:
            return s
    return None


# partial restrictions ----------------------------------------------------------


@dataclass
class PartialRestriction:
    sigma: Sigma
    pi2: tuple  # sorted mini pairs
    pi2_paths: dict  # pair -> flipped path
    restarts: dict

    @property
    def system(self) -> MiniGraph:
        return self.sigma.system

    @property
    def tau(self) -> TauAssignment:
        return self.sigma.tau

    @property
    def U(self) -> dict:
        return self.sigma.U

    @property
    def B(self) -> dict:
        return self.sigma.B

    @property
    def y(self) -> dict:
        out = dict(self.sigma.y)
        for pid in self.pi2_paths.values():
            out[pid] = 0
        return out

    @cached_property
    def live(self) -> set:
        out = set(self.sigma.U_minis)
        for s1, s2 in self.pi2:
            out.update((s1, s2))
        return out

    @cached_property
    def pi2_partner(self) -> dict:
        out = {}
        for s1, s2 in self.pi2:
            out[s1] = s2
            out[s2] = s1
        return out

    def key(self) -> tuple:
        """Identity of the sampled quadruple (tau, U, pi2, B)."""
        return (
            self.tau.groups,
            tuple(sorted(self.U.items())),
            tuple(sorted(self.pi2)),
            tuple(sorted(self.B.items())),
        )

    def undetermined(self) -> list:
        """Variable paths whose value is open: both end points live."""
        return [
            pid
            for pair in self.system.pairs
            if pair[0] in self.live and pair[1] in self.live
            for pid in self.system.group_paths(pair)
        ]

    def to_json(self) -> dict:
        return {
            "tau": self.tau.to_json(),
            "U": [[list(ss), i] for ss, i in sorted(self.U.items())],
            "pi2": [[list(a), list(b)] for a, b in self.pi2],
            "B": [[list(map(list, p)), list(b)] for p, b in sorted(self.B.items())],
            "restarts": self.restarts,
        }


def default_k(system: MiniGraph, C: float) -> int:
    return int(round(C * system.m**2 * math.log(system.n)))


def balance_bounds(system: MiniGraph, C: float) -> tuple:
    L = math.log(system.n)
    return 4 * C * L, C * L / 4


def pick_pi2(system: MiniGraph, rng: random.Random, U_minis: set, k: int) -> Optional[list]:
    """Sequential uniform picks of mini-square-disjoint pairs avoiding ``U``."""
    used = set(U_minis)
    picks = []
    for _ in range(k):
        avail = [p for p in system.pairs if p[0] not in used and p[1] not in used]
        if not avail:
            return None
        p = avail[rng.randrange(len(avail))]
        picks.append(p)
        used.update(p)
    return picks


def is_balanced(system: MiniGraph, pi2, max_per_super: float, min_per_pair: float) -> bool:
    per_super = {ss: 0 for ss in system.supers}
    per_pair = {sp: 0 for sp in system.super_pairs}
    for s1, s2 in pi2:
        per_super[s1[:2]] += 1
        per_super[s2[:2]] += 1
        per_pair[(s1[:2], s2[:2])] += 1
    if any(v > max_per_super for v in per_super.values()):
        return False
    return not any(v < min_per_pair for v in per_pair.values())


def apply_pi2(sig: Sigma, pi2) -> dict:
    """Lower one type-1 path of every pi2 pair; returns pair -> path."""
    out = {}
    for pair in sorted(pi2):
        bits = sig.tau.as_dict[pair]
        idx = choose_path(bits, "lower", sig.B[pair])
        out[pair] = sig.system.group_paths(pair)[idx]
    return out


def sample_partial_restriction(
    system: MiniGraph,
    rng: random.Random,
    k: Optional[int] = None,
    C: float = 0.0,
    max_per_super: Optional[float] = None,
    min_per_pair: Optional[float] = None,
    cap: int = DEFAULT_CAP,
    tau_steps: Optional[int] = None,
) -> PartialRestriction:
    sig = sample_sigma(system, rng, cap, tau_steps)
    if k is None:
        k = default_k(system, C)
    hi, lo = balance_bounds(system, C)
    hi = hi if max_per_super is None else max_per_super
    lo = lo if min_per_pair is None else min_per_pair
    redo = 0
    while True:
        picks = pick_pi2(system, rng, sig.U_minis, k)
        if picks is not None and is_balanced(system, picks, hi, lo):
            break
        redo += 1
        if redo > cap:
            raise SamplingError(
                f"pi2 sampling exceeded {cap} restarts",
                {"stage": "pi2", "restarts": redo, "k": k, "max_per_super": hi,
                 "min_per_pair": lo},
            )
    pi2 = tuple(sorted(picks))
    return PartialRestriction(sig, pi2, apply_pi2(sig, pi2), {"tau": sig.restarts, "pi2": redo})


def restriction_from_parts(system: MiniGraph, tau: TauAssignment, U: dict, pi2, B: dict):
    """Rebuild a partial restriction from its quadruple."""
    sig = build_sigma(system, tau, U, B)
    pi2 = tuple(sorted(pi2))
    return PartialRestriction(sig, pi2, apply_pi2(sig, pi2), {"tau": 0, "pi2": 0})
