"""Decision trees that query partners of nodes, and t-evaluations.

A query node asks "to which node is v matched?" and has one child per
admissible answer.  Nodes are grid cells for trees over the parent grid;
the switching code reuses the same class with mini-squares as nodes.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Optional

from .formula_core import (
    TRUE,
    Const,
    FregeProof,
    Not,
    Or,
    PHPInstance,
    Var,
    Verdict,
    parse_edge_var,
    subformulas,
)
from .grid_core import canonical_domino, neighbors
from .matching_engine import CapacityError, InfeasibleError, PartialMatching, is_locally_consistent


def _answer_key(a):
    # None (no partner) sorts first, then coordinates
    return (0, ()) if a is None else (1, tuple(a))


@dataclass(frozen=True)
class MatchQueryTree:
    """Leaf when ``node`` is None; ``children`` is a tuple of (answer, subtree)."""

    node: object = None
    children: tuple = ()
    value: object = None

    @classmethod
    def leaf(cls, value) -> "MatchQueryTree":
        return cls(None, (), value)

    @classmethod
    def query(cls, node, children: Iterable) -> "MatchQueryTree":
        kids = tuple(sorted(children, key=lambda kv: _answer_key(kv[0])))
        return cls(node, kids, None)

    @property
    def is_leaf(self) -> bool:
        return self.node is None

    def child(self, answer) -> Optional["MatchQueryTree"]:
        for a, sub in self.children:
            if a == answer:
                return sub
        return None

    def depth(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(sub.depth() for _, sub in self.children)

    def size(self) -> int:
        return 1 + sum(sub.size() for _, sub in self.children)

    def branches(self, prefix: tuple = ()) -> Iterator[tuple]:
        """``(answers, leaf value)`` in depth-first order, children by answer."""
        if self.is_leaf:
            yield prefix, self.value
            return
        for a, sub in self.children:
            yield from sub.branches(prefix + ((self.node, a),))

    def leaf_values(self) -> set:
        return {v for _, v in self.branches()}

    def is_constant(self, b) -> bool:
        return self.leaf_values() == {b}

    def flip(self) -> "MatchQueryTree":
        if self.is_leaf:
            return MatchQueryTree.leaf(1 - self.value)
        return MatchQueryTree(self.node, tuple((a, s.flip()) for a, s in self.children))

    def same_shape(self, other: "MatchQueryTree") -> bool:
        if self.is_leaf or other.is_leaf:
            return self.is_leaf and other.is_leaf
        if self.node != other.node or len(self.children) != len(other.children):
            return False
        return all(
            a == b and s.same_shape(t) for (a, s), (b, t) in zip(self.children, other.children)
        )

    def to_obj(self):
        if self.is_leaf:
            return {"leaf": self.value}
        return {
            "query": _enc(self.node),
            "children": [[_enc(a), s.to_obj()] for a, s in self.children],
        }

    @classmethod
    def from_obj(cls, obj) -> "MatchQueryTree":
        if "leaf" in obj:
            return cls.leaf(obj["leaf"])
        return cls(
            _dec(obj["query"]),
            tuple((_dec(a), cls.from_obj(s)) for a, s in obj["children"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_obj())

    @classmethod
    def from_json(cls, text: str) -> "MatchQueryTree":
        return cls.from_obj(json.loads(text))


def _enc(x):
    return None if x is None else list(x)


def _dec(x):
    return None if x is None else tuple(x)


# consistency on the grid -------------------------------------------------------


def _partner_map(pairs) -> dict:
    out = {}
    for a, b in pairs:
        out[a] = b
        out[b] = a
    return out


def consistent_with(pairs: Iterable, n: int) -> bool:
    """Node-disjoint and locally consistent as a partial matching."""
    pairs = list(pairs)
    nodes = [v for p in pairs for v in p]
    if len(nodes) != len(set(nodes)):
        return False
    if not pairs:
        return True
    return is_locally_consistent(PartialMatching(pairs), n) is not None


def grid_answers(v, known: dict, n: int) -> list:
    """Partners of ``v`` that keep ``known`` (a partner map) consistent."""
    if v in known:
        return [known[v]]
    pairs = {canonical_domino(a, b) for a, b in known.items()}
    out = []
    for w in neighbors(v):
        if not (1 <= w[0] <= n and 1 <= w[1] <= n) or w in known:
            continue
        if consistent_with(pairs | {canonical_domino(v, w)}, n):
            out.append(w)
    return out


def restrict(tree: MatchQueryTree, tau: dict, admissible: Callable) -> Optional[MatchQueryTree]:
    """``tree`` under the partner map ``tau``.

    Queries answered by ``tau`` are spliced out; other queries keep the
    children for which ``admissible(known, v, w)`` holds.  Returns None when
    no branch survives.
    """

    def rec(t: MatchQueryTree, known: dict) -> Optional[MatchQueryTree]:
        if t.is_leaf:
            return t
        v = t.node
        if v in known:
            sub = t.child(known[v])
            return None if sub is None else rec(sub, known)
        kids = []
        for w, sub in t.children:
            if not admissible(known, v, w):
                continue
            nxt = dict(known)
            nxt[v] = w
            if w is not None:
                nxt[w] = v
            r = rec(sub, nxt)
            if r is not None:
                kids.append((w, r))
        if not kids:
            return None
        return MatchQueryTree(v, tuple(kids))

    return rec(tree, dict(tau))


def _grid_admissible(n: int) -> Callable:
    def ok(known: dict, v, w) -> bool:
        if w is None or w in known:
            return False
        pairs = {canonical_domino(a, b) for a, b in known.items()}
        return consistent_with(pairs | {canonical_domino(v, w)}, n)

    return ok


def prune(tree: MatchQueryTree, tau: PartialMatching, n: int) -> MatchQueryTree:
    """Keep exactly the branches consistent with ``tau`` (the tree under tau)."""
    if tree.depth() + len(tau) > n / 50:
        raise CapacityError(f"depth {tree.depth()} plus |tau| {len(tau)} exceeds n/50 = {n / 50}")
    out = restrict(tree, _partner_map(tau.edges), _grid_admissible(n))
    if out is None:
        raise InfeasibleError("no branch of the tree is consistent with tau")
    return out


# t-evaluations ------------------------------------------------------------------


def edge_nodes(name: str) -> tuple:
    a, b = parse_edge_var(name)
    return a, b


def natural_tree(name: str, n: int) -> MatchQueryTree:
    """Depth-one tree for an edge variable: ask the first end point."""
    a, b = edge_nodes(name)
    kids = [(w, MatchQueryTree.leaf(int(w == b))) for w in neighbors(a)
            if 1 <= w[0] <= n and 1 <= w[1] <= n]
    return MatchQueryTree.query(a, kids)


def _value(f, known: dict) -> Optional[int]:
    """Value of ``f`` when all its edge variables are decided by ``known``."""
    if isinstance(f, Const):
        return f.value
    if isinstance(f, Var):
        a, b = edge_nodes(f.name)
        if a in known:
            return int(known[a] == b)
        if b in known:
            return int(known[b] == a)
        return None
    if isinstance(f, Not):
        v = _value(f.arg, known)
        return None if v is None else 1 - v
    left, right = _value(f.left, known), _value(f.right, known)
    if left == 1 or right == 1:
        return 1
    if left is None or right is None:
        return None
    return 0


def _nodes_of(f) -> list:
    out = set()
    for g in subformulas(f):
        if isinstance(g, Var):
            out.update(edge_nodes(g.name))
    return sorted(out)


def full_tree(f, n: int, known: Optional[dict] = None) -> MatchQueryTree:
    """Ask end points of ``f``'s variables in order until its value is fixed."""
    nodes = _nodes_of(f)

    def rec(known: dict) -> MatchQueryTree:
        v = _value(f, known)
        if v is not None:
            return MatchQueryTree.leaf(v)
        nxt = next(u for u in nodes if u not in known)
        kids = []
        for w in grid_answers(nxt, known, n):
            k2 = dict(known)
            k2[nxt] = w
            k2[w] = nxt
            kids.append((w, rec(k2)))
        if not kids:
            raise InfeasibleError(f"node {nxt} has no consistent partner")
        return MatchQueryTree.query(nxt, kids)

    return rec(dict(known or {}))


@dataclass
class TEvaluation:
    """Formula -> tree map together with its depth bound and grid side."""

    trees: dict
    n: int
    t: int

    def __getitem__(self, f) -> MatchQueryTree:
        return self.trees[f]

    def __contains__(self, f) -> bool:
        return f in self.trees


def build_evaluation(formulas: Iterable, n: int, t: Optional[int] = None) -> TEvaluation:
    """Evaluation over the sub-formula closure of ``formulas``.

    Variables get their natural trees, negations flip their argument's tree
    and everything else asks end points until the value is decided.
    """
    trees: dict = {}

    def get(f):
        if f in trees:
            return trees[f]
        if isinstance(f, Const):
            tree = MatchQueryTree.leaf(f.value)
        elif isinstance(f, Var):
            tree = natural_tree(f.name, n)
        elif isinstance(f, Not):
            tree = get(f.arg).flip()
        else:
            get(f.left)
            get(f.right)
            tree = full_tree(f, n)
        trees[f] = tree
        return tree

    for f in formulas:
        get(f)
    depth = max((tr.depth() for tr in trees.values()), default=0)
    return TEvaluation(trees, n, depth if t is None else t)


@dataclass(frozen=True)
class Violation:
    formula: object
    prop: str  # "closure", "depth" or "1".."5"
    detail: str
    branch: tuple = ()

    def __str__(self):
        return f"property {self.prop} at {self.formula}: {self.detail}"


def _axiom_set(instance) -> set:
    if instance is None:
        return set()
    if isinstance(instance, PHPInstance):
        return set(instance.axioms)
    return set(instance)


def verify_evaluation(phi: TEvaluation, instance=None) -> list:
    """Violations of the five t-evaluation properties, closure and depth.

    At most one violation is reported per formula: the first in the order
    closure, depth, 1, 2, 3, 4, 5.

    ``instance`` is a PHP instance or just an iterable of its axioms.
    """
    n = phi.n
    adm = _grid_admissible(n)
    axioms = _axiom_set(instance)
    out = []
    for f, tree in phi.trees.items():
        found = []
        for g in subformulas(f):
            if g not in phi:
                found.append(Violation(f, "closure", f"sub-formula {g} missing"))
                break
        if tree.depth() > phi.t:
            found.append(Violation(f, "depth", f"depth {tree.depth()} exceeds {phi.t}"))
        if isinstance(f, Const):
            if not tree.is_constant(f.value):
                found.append(Violation(f, "1", f"constant {f.value} is not a {f.value}-tree"))
        if f in axioms:
            for br, v in tree.branches():
                if v != 1:
                    found.append(Violation(f, "2", "axiom tree has a 0-leaf", br))
                    break
        if isinstance(f, Var):
            if tree != natural_tree(f.name, n):
                found.append(Violation(f, "3", "not the natural depth-one tree"))
        if isinstance(f, Not) and f.arg in phi:
            if tree != phi[f.arg].flip():
                found.append(Violation(f, "4", "not the leaf-flipped tree of the argument"))
        if isinstance(f, Or) and f.left in phi and f.right in phi:
            for br, v in tree.branches():
                known = {}
                for a, b in br:
                    known[a] = b
                    known[b] = a
                parts = [restrict(phi[g], known, adm) for g in (f.left, f.right)]
                if v == 0:
                    good = all(p is None or p.is_constant(0) for p in parts)
                else:
                    good = any(p is not None and p.is_constant(1) for p in parts)
                if not good:
                    found.append(Violation(f, "5", f"{v}-leaf not justified by the disjuncts", br))
                    break
        if found:
            out.append(found[0])
    return out


def audit_proof(proof: FregeProof, phi: TEvaluation, n: int, t: Optional[int] = None,
                instance=None) -> Verdict:
    """Check that every line of ``proof`` is mapped to a 1-tree.

    Violations of the evaluation properties are reported at the first line
    whose formula contains the offending sub-formula.
    """
    t = phi.t if t is None else t
    if t > n / 150:
        raise CapacityError(f"t = {t} exceeds n/150 = {n / 150}")
    forms = [line.formula for line in proof.lines]
    for i, f in enumerate(forms, 1):
        for g in subformulas(f):
            if g not in phi:
                return Verdict(False, i, f"sub-formula {g} outside the evaluation")
    bad = verify_evaluation(phi, instance)
    if bad:
        for i, f in enumerate(forms, 1):
            subs = set(subformulas(f))
            hits = [v for v in bad if v.formula in subs]
            if hits:
                return Verdict(False, i, str(hits[0]))
        return Verdict(False, None, str(bad[0]))
    for i, f in enumerate(forms, 1):
        if not phi[f].is_constant(1):
            return Verdict(False, i, "line is not mapped to a 1-tree")
    return Verdict(True)
