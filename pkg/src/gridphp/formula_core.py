"""Formulas over negation and binary disjunction, Frege proofs, grid PHP.

Depth counts blocks of disjunctions along a path: a literal or a clause
has depth 1, and every change from disjunction through a negation back to
disjunction adds one.  Negating a literal adds nothing.
"""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Optional, Union


class FormulaError(ValueError):
    pass


class IncompleteSubstitution(FormulaError):
    pass


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Const:
    value: int

    def __str__(self):
        return str(self.value)


@dataclass(frozen=True)
class Not:
    arg: "Formula"

    def __str__(self):
        return f"~ {self.arg}"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"

    def __str__(self):
        return f"| {self.left} {self.right}"


Formula = Union[Var, Const, Not, Or]
TRUE = Const(1)
FALSE = Const(0)


def disj(parts: Iterable[Formula]) -> Formula:
    """Left-nested disjunction; the empty disjunction is the constant 0."""
    parts = list(parts)
    if not parts:
        return FALSE
    out = parts[0]
    for p in parts[1:]:
        out = Or(out, p)
    return out


def conj(parts: Iterable[Formula]) -> Formula:
    """Conjunction written as a negated disjunction of negations."""
    parts = list(parts)
    if not parts:
        return TRUE
    return Not(disj(Not(p) for p in parts))


def neg(f: Formula) -> Formula:
    return Not(f)


@lru_cache(maxsize=None)
def _blocks(f: Formula) -> int:
    if isinstance(f, (Var, Const)):
        return 0
    if isinstance(f, Not):
        return _blocks(f.arg)
    # an Or child continues the current block, anything else opens a new one
    return max(_blocks(c) if isinstance(c, Or) else _blocks(c) + 1 for c in (f.left, f.right))


def depth(f: Formula) -> int:
    return max(1, _blocks(f))


def subformulas(f: Formula) -> list[Formula]:
    out, seen = [], set()
    stack = [f]
    while stack:
        g = stack.pop()
        if g in seen:
            continue
        seen.add(g)
        out.append(g)
        if isinstance(g, Not):
            stack.append(g.arg)
        elif isinstance(g, Or):
            stack.extend((g.right, g.left))
    return out


def variables(f: Formula) -> set[str]:
    return {g.name for g in subformulas(f) if isinstance(g, Var)}


def evaluate(f: Formula, assignment: Mapping[str, int]) -> int:
    if isinstance(f, Var):
        return int(assignment[f.name])
    if isinstance(f, Const):
        return f.value
    if isinstance(f, Not):
        return 1 - evaluate(f.arg, assignment)
    return evaluate(f.left, assignment) or evaluate(f.right, assignment)


def disjuncts(f: Formula) -> list[Formula]:
    """Flatten nested disjunctions into their non-disjunction parts."""
    if isinstance(f, Or):
        return disjuncts(f.left) + disjuncts(f.right)
    return [f]


def is_literal(f: Formula) -> bool:
    return isinstance(f, Var) or (isinstance(f, Not) and isinstance(f.arg, Var))


# text format --------------------------------------------------------------

_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def parse_formula(text: str) -> Formula:
    tokens = text.split()
    pos = 0

    def rec() -> Formula:
        nonlocal pos
        if pos >= len(tokens):
            raise FormulaError("unexpected end of formula")
        tok = tokens[pos]
        pos += 1
        if tok == "~":
            return Not(rec())
        if tok == "|":
            left = rec()
            return Or(left, rec())
        if tok in ("0", "1"):
            return Const(int(tok))
        if _NAME.match(tok):
            return Var(tok)
        raise FormulaError(f"bad token {tok!r}")

    f = rec()
    if pos != len(tokens):
        raise FormulaError(f"trailing tokens: {' '.join(tokens[pos:])}")
    return f


def format_formula(f: Formula) -> str:
    return str(f)


def edge_var(a: tuple, b: tuple) -> str:
    (r1, c1), (r2, c2) = sorted((tuple(a), tuple(b)))
    return f"x_{r1}_{c1}_{r2}_{c2}"


def parse_edge_var(name: str) -> tuple:
    parts = name.split("_")
    if len(parts) != 5 or parts[0] != "x":
        raise FormulaError(f"not an edge variable: {name}")
    r1, c1, r2, c2 = map(int, parts[1:])
    return ((r1, c1), (r2, c2))


# PHP instances --------------------------------------------------------------


@dataclass(frozen=True)
class PHPInstance:
    n: int
    variables: tuple
    axioms: tuple
    node_axioms: dict = field(compare=False, hash=False, repr=False)

    def incident(self, node: tuple) -> list[str]:
        return incident_edges(self.n, node)


def incident_edges(n: int, node: tuple) -> list[str]:
    r, c = node
    out = []
    for dr, dc in ((-1, 0), (0, -1), (0, 1), (1, 0)):
        rr, cc = r + dr, c + dc
        if 1 <= rr <= n and 1 <= cc <= n:
            out.append(edge_var((r, c), (rr, cc)))
    return sorted(out)


def exactly_one(names: list[str]) -> list[Formula]:
    """One at-least-one clause plus pairwise at-most-one clauses."""
    clauses = [disj(Var(x) for x in names)]
    for x, y in itertools.combinations(names, 2):
        clauses.append(Or(Not(Var(x)), Not(Var(y))))
    return clauses


def generate_php(n: int) -> PHPInstance:
    """Perfect-matching contradiction on the odd ``n x n`` grid."""
    if n < 1 or n % 2 == 0:
        raise ValueError(f"n must be a positive odd integer, got {n}")
    names = set()
    node_axioms = {}
    axioms = []
    for r in range(1, n + 1):
        for c in range(1, n + 1):
            inc = incident_edges(n, (r, c))
            names.update(inc)
            clauses = exactly_one(inc)
            node_axioms[(r, c)] = tuple(clauses)
            axioms.extend(clauses)
    return PHPInstance(n, tuple(sorted(names)), tuple(axioms), node_axioms)


def validate_php(instance: PHPInstance) -> list[str]:
    """Problems with an instance compared to a freshly generated one."""
    ref = generate_php(instance.n)
    problems = []
    if set(instance.variables) != set(ref.variables):
        problems.append("variable set differs")
    if set(instance.axioms) != set(ref.axioms):
        problems.append("axiom set differs")
    return problems


# substitutions ----------------------------------------------------------------


def simplify(f: Formula) -> Formula:
    """Propagate constants through negations and disjunctions."""
    if isinstance(f, (Var, Const)):
        return f
    if isinstance(f, Not):
        g = simplify(f.arg)
        if isinstance(g, Const):
            return Const(1 - g.value)
        return Not(g)
    a, b = simplify(f.left), simplify(f.right)
    if a == TRUE or b == TRUE:
        return TRUE
    if a == FALSE:
        return b
    if b == FALSE:
        return a
    return Or(a, b)


def apply_substitution(
    f: Formula, sub: Mapping[str, Formula], partial: bool = False
) -> Formula:
    """Replace variables by formulas and simplify constants.

    Unmapped variables raise unless ``partial`` is set, in which case they
    are left in place.
    """
    cache: dict = {}

    def rec(g: Formula) -> Formula:
        if g in cache:
            return cache[g]
        if isinstance(g, Var):
            if g.name in sub:
                out = sub[g.name]
            elif partial:
                out = g
            else:
                raise IncompleteSubstitution(f"no image for variable {g.name}")
        elif isinstance(g, Const):
            out = g
        elif isinstance(g, Not):
            out = Not(rec(g.arg))
        else:
            out = Or(rec(g.left), rec(g.right))
        cache[g] = out
        return out

    return simplify(rec(f))


def equivalent(f: Formula, g: Formula, max_vars: int = 16) -> bool:
    names = sorted(variables(f) | variables(g))
    if len(names) > max_vars:
        raise ValueError("too many variables for a truth table")
    for bits in itertools.product((0, 1), repeat=len(names)):
        env = dict(zip(names, bits))
        if evaluate(f, env) != evaluate(g, env):
            return False
    return True


# proofs ------------------------------------------------------------------------

RULES = ("axiom", "excluded-middle", "expansion", "contraction", "association", "cut")
PREMISE_COUNT = {
    "axiom": 0,
    "excluded-middle": 0,
    "expansion": 1,
    "contraction": 1,
    "association": 1,
    "cut": 2,
}


@dataclass(frozen=True)
class ProofLine:
    formula: Formula
    rule: str
    premises: tuple = ()


@dataclass(frozen=True)
class FregeProof:
    lines: tuple

    def __len__(self):
        return len(self.lines)

    def to_text(self) -> str:
        out = []
        for i, line in enumerate(self.lines, 1):
            prem = " ".join(str(p) for p in line.premises)
            out.append(f"{i}: {line.formula} :: {line.rule} {prem}".rstrip())
        return "\n".join(out) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "FregeProof":
        lines = []
        for raw in text.splitlines():
            raw = raw.split("#", 1)[0].strip()
            if not raw:
                continue
            m = re.match(r"^(\d+)\s*:\s*(.*?)\s*::\s*(\S+)\s*(.*)$", raw)
            if not m:
                raise FormulaError(f"cannot parse proof line {raw!r}")
            num, body, rule, prem = m.groups()
            if int(num) != len(lines) + 1:
                raise FormulaError(f"line numbers must run consecutively, got {num}")
            premises = tuple(int(p) for p in prem.split())
            lines.append(ProofLine(parse_formula(body), rule, premises))
        return cls(tuple(lines))


@dataclass(frozen=True)
class Verdict:
    ok: bool
    line: Optional[int] = None
    reason: str = ""

    def __bool__(self):
        return self.ok


def rule_instance(rule: str, conclusion: Formula, premises: list[Formula]) -> Optional[str]:
    """``None`` if the conclusion follows by ``rule``, else why not."""
    if rule == "excluded-middle":
        if isinstance(conclusion, Or) and conclusion.right == Not(conclusion.left):
            return None
        return "not of the form p | ~p"
    if rule == "expansion":
        (p,) = premises
        if isinstance(conclusion, Or) and conclusion.left == p:
            return None
        return "conclusion is not premise | q"
    if rule == "contraction":
        (p,) = premises
        if isinstance(p, Or) and p.left == p.right == conclusion:
            return None
        return "premise is not conclusion | conclusion"
    if rule == "association":
        (p,) = premises
        if (
            isinstance(p, Or)
            and isinstance(p.right, Or)
            and conclusion == Or(Or(p.left, p.right.left), p.right.right)
        ):
            return None
        return "not p | (q | r) to (p | q) | r"
    if rule == "cut":
        a, b = premises
        if (
            isinstance(a, Or)
            and isinstance(b, Or)
            and b.left == Not(a.left)
            and conclusion == Or(a.right, b.right)
        ):
            return None
        return "not p | q, ~p | r to q | r"
    return f"unknown rule {rule!r}"


def check_proof(proof: FregeProof, axioms: Iterable[Formula], d: int) -> Verdict:
    """Check every line against its rule and the depth bound ``d``."""
    axiom_set = set(axioms)
    for i, line in enumerate(proof.lines, 1):
        if depth(line.formula) > d:
            return Verdict(False, i, f"depth {depth(line.formula)} exceeds {d}")
        if line.rule not in RULES:
            return Verdict(False, i, f"unknown rule {line.rule!r}")
        if len(line.premises) != PREMISE_COUNT[line.rule]:
            return Verdict(False, i, f"{line.rule} takes {PREMISE_COUNT[line.rule]} premises")
        for p in line.premises:
            if not 1 <= p < i:
                return Verdict(False, i, f"dangling premise {p}")
        if line.rule == "axiom":
            if line.formula not in axiom_set:
                return Verdict(False, i, "not an axiom of the instance")
            continue
        why = rule_instance(
            line.rule, line.formula, [proof.lines[p - 1].formula for p in line.premises]
        )
        if why is not None:
            return Verdict(False, i, f"bad {line.rule}: {why}")
    return Verdict(True)
