"""Canonical decision trees under partial restrictions, compression of a run
into a star quadruple plus a bit stream, and common decision trees.

Everything here works on mini-squares.  A formula part is a
``MatchQueryTree`` whose query nodes are mini-squares and whose answers are
the mini-square a node is matched with through an augmenting path, or
``None`` for a mini-square that is matched internally.  Under a partial
restriction dead mini-squares answer ``None``, a pi2 mini-square is matched
with its pi2 partner and chosen mini-squares are matched with each other
along the reduced grid, subject to local consistency there.
"""
from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

from .bijection import LopsidedError, choose_path, select
from .layout import MiniGraph
from .restriction import (
    PartialRestriction,
    TauAssignment,
    pi1_super_pairs,
    restriction_from_parts,
)
from .trees import MatchQueryTree, consistent_with

log = logging.getLogger(__name__)


class DecodeError(RuntimeError):
    pass


class EncodeError(RuntimeError):
    pass


def _pair(a, b) -> tuple:
    return (a, b) if a < b else (b, a)


def _pairs_of(partner: dict) -> set:
    return {_pair(a, b) for a, b in partner.items()}


class View:
    """What a partial restriction says about each mini-square."""

    def __init__(self, system: MiniGraph, chosen: set, pi2_partner: dict):
        self.system = system
        self.chosen = set(chosen)
        self.pi2 = dict(pi2_partner)
        self.live = self.chosen | set(self.pi2)

    @classmethod
    def of(cls, pr: PartialRestriction) -> "View":
        return cls(pr.system, pr.sigma.U_minis, pr.pi2_partner)

    def reduced(self, s) -> tuple:
        return self.system.reduced_node(s[:2])

    def chosen_ok(self, partner: dict) -> bool:
        """Chosen pairs in ``partner`` are locally consistent on the reduced grid."""
        pairs = [
            (self.reduced(a), self.reduced(b))
            for a, b in _pairs_of(partner)
            if a in self.chosen and b in self.chosen
        ]
        return consistent_with(pairs, self.system.m)

    def chosen_answers(self, c, known: dict) -> list:
        out = []
        for w in self.system.neighbors[c]:
            if w in self.chosen and w not in known:
                trial = dict(known)
                trial[c], trial[w] = w, c
                if self.chosen_ok(trial):
                    out.append(w)
        return out


def demands(view: View, steps, known: dict) -> Optional[dict]:
    """Pairs a branch needs on top of ``known``, or None if it cannot be followed."""
    need: dict = {}
    for s, a in steps:
        if s in known:
            if known[s] != a:
                return None
            continue
        if s in need:
            if need[s] != a:
                return None
            continue
        if s not in view.live:
            if a is not None:
                return None
            continue
        if a is None or a in known or a in need:
            return None
        if s in view.pi2:
            if view.pi2[s] != a:
                return None
        elif a not in view.chosen or a not in view.system.neighbors[s]:
            return None
        need[s] = a
        need[a] = s
    return need


def one_branches(parts: list) -> list:
    """``(tree index, branch index, steps)`` of every 1-leaf in the fixed order."""
    out = []
    for i, tree in enumerate(parts):
        for b, (steps, value) in enumerate(tree.branches()):
            if value == 1:
                out.append((i, b, steps))
    return out


def find_forceable(view: View, ones: list, known: dict):
    for i, b, steps in ones:
        need = demands(view, steps, known)
        if need is None:
            continue
        if need and not view.chosen_ok({**known, **need}):
            continue
        return i, b, steps, need
    return None


@dataclass(frozen=True)
class Stage:
    tree: int
    branch: int
    J_pi2: tuple
    J_chosen: tuple
    I: tuple  # pairs learned in this stage: pi2 pairs plus answered queries

    @property
    def J(self) -> tuple:
        return tuple(sorted(self.J_pi2 + self.J_chosen))

    def support(self) -> set:
        return {v for p in self.J for v in p}


@dataclass(frozen=True)
class CanonicalRun:
    stages: tuple
    label: Optional[int]  # None when the depth cap cut the branch
    queried: tuple
    answers: tuple  # (mini, partner) per query, in order
    stuck: bool = False

    @property
    def truncated(self) -> bool:
        return self.label is None

    def known(self) -> dict:
        out = {}
        for st in self.stages:
            for a, b in st.I:
                out[a], out[b] = b, a
        return out


def check_disjoint(run: CanonicalRun) -> list:
    """Violations of: J supports pairwise disjoint, J_j disjoint from I_i for i != j."""
    problems = []
    sups = [st.support() for st in run.stages]
    isups = [{v for p in st.I for v in p} for st in run.stages]
    for j, sj in enumerate(sups):
        for i in range(len(sups)):
            if i == j:
                continue
            if i < j and sj & sups[i]:
                problems.append(f"J supports of stages {i + 1} and {j + 1} meet")
            if sj & isups[i]:
                problems.append(f"J of stage {j + 1} meets I of stage {i + 1}")
    return problems


def canonical_tree(
    parts: list,
    pr,
    depth_cap: Optional[int] = None,
    initial: Optional[dict] = None,
    first_failure_only: bool = False,
):
    """The staged canonical decision tree of the disjunction of ``parts``.

    Returns ``(tree, runs)`` with one run per leaf in depth-first order.  A
    leaf whose value is None marks a branch cut by ``depth_cap``.  With
    ``first_failure_only`` construction stops at the first cut branch.
    """
    view = pr if isinstance(pr, View) else View.of(pr)
    ones = one_branches(parts)
    runs: list = []
    cut = [False]

    def finish(label, stages, queried, answers, stuck=False):
        runs.append(CanonicalRun(tuple(stages), label, tuple(queried), tuple(answers), stuck))
        if label is None:
            cut[0] = True
        return MatchQueryTree.leaf(label)

    def next_stage(known, stages, queried, answers):
        found = find_forceable(view, ones, known)
        if found is None:
            return finish(0, stages, queried, answers)
        i, b, steps, need = found
        if not need:
            return finish(1, stages, queried, answers)
        pairs = sorted(_pairs_of(need))
        J_pi2 = tuple(p for p in pairs if p[0] in view.pi2)
        J_chosen = tuple(p for p in pairs if p[0] in view.chosen)
        k2 = dict(known)
        for a, c in J_pi2:
            k2[a], k2[c] = c, a
        queue = sorted(v for p in J_chosen for v in p)
        stage = (i, b, J_pi2, J_chosen, list(J_pi2))
        return ask(queue, k2, stages, stage, steps, queried, answers)

    def ask(queue, known, stages, stage, steps, queried, answers):
        while queue and queue[0] in known:
            queue = queue[1:]
        if not queue:
            i, b, J_pi2, J_chosen, learned = stage
            done = stages + [Stage(i, b, J_pi2, J_chosen, tuple(sorted(learned)))]
            if demands(view, steps, known) == {}:
                return finish(1, done, queried, answers)
            return next_stage(known, done, queried, answers)
        if depth_cap is not None and len(queried) >= depth_cap:
            i, b, J_pi2, J_chosen, learned = stage
            done = stages + [Stage(i, b, J_pi2, J_chosen, tuple(sorted(learned)))]
            return finish(None, done, queried, answers)
        c = queue[0]
        options = view.chosen_answers(c, known)
        if not options:
            i, b, J_pi2, J_chosen, learned = stage
            done = stages + [Stage(i, b, J_pi2, J_chosen, tuple(sorted(learned)))]
            return finish(0, done, queried, answers, stuck=True)
        kids = []
        for w in options:
            if first_failure_only and cut[0]:
                break
            k2 = dict(known)
            k2[c], k2[w] = w, c
            st = stage[:4] + (stage[4] + [_pair(c, w)],)
            kids.append((w, ask(queue[1:], k2, stages, st, steps,
                                queried + [c], answers + [(c, w)])))
        return MatchQueryTree.query(c, kids)

    tree = next_stage(dict(initial or {}), [], [], [])
    return tree, runs


def canonical_depth(parts: list, pr, depth_cap: int) -> tuple:
    """``(depth reached, failed)`` where failure means more than ``depth_cap`` queries."""
    tree, runs = canonical_tree(parts, pr, depth_cap, first_failure_only=True)
    failed = any(r.truncated for r in runs)
    return tree.depth() + (1 if failed else 0), failed


# brute force -----------------------------------------------------------------


def _walk(tree: MatchQueryTree, answer: Callable) -> object:
    while not tree.is_leaf:
        sub = tree.child(answer(tree.node))
        if sub is None:
            return 0
        tree = sub
    return tree.value


def completions(view: View, minis, known: dict):
    """Partner maps extending ``known`` that match every chosen mini in ``minis``.

    Chosen mini-squares are matched with chosen neighbours so that the chosen
    pairs stay locally consistent on the reduced grid.
    """
    todo = sorted(s for s in set(minis) if s in view.chosen and s not in known)

    def rec(idx, cur):
        while idx < len(todo) and todo[idx] in cur:
            idx += 1
        if idx == len(todo):
            yield dict(cur)
            return
        c = todo[idx]
        for w in view.chosen_answers(c, cur):
            cur[c], cur[w] = w, c
            yield from rec(idx + 1, cur)
            del cur[c], cur[w]

    yield from rec(0, dict(known))


def disjunction_value(view: View, parts: list, partner: dict) -> int:
    def answer(s):
        if s in partner:
            return partner[s]
        if s in view.pi2:
            return view.pi2[s]
        return None

    return int(any(_walk(t, answer) == 1 for t in parts))


def mentioned_minis(parts: list) -> set:
    """Mini-squares queried or named as an answer anywhere in ``parts``."""
    out = set()

    def rec(t):
        if not t.is_leaf:
            out.add(t.node)
            for a, s in t.children:
                if a is not None:
                    out.add(a)
                rec(s)

    for t in parts:
        rec(t)
    return out


def check_leaves(parts: list, pr, tree: MatchQueryTree, runs: list) -> list:
    """Leaves whose label disagrees with some completion of their answers."""
    view = pr if isinstance(pr, View) else View.of(pr)
    minis = mentioned_minis(parts)
    bad = []
    for idx, run in enumerate(runs):
        if run.truncated:
            continue
        for comp in completions(view, minis, run.known()):
            if disjunction_value(view, parts, comp) != run.label:
                bad.append((idx, comp))
                break
    return bad


# formula families ------------------------------------------------------------


def branch_tree(system: MiniGraph, steps) -> MatchQueryTree:
    """Tree with one 1-branch: every other answer leads to a 0-leaf."""
    tree = MatchQueryTree.leaf(1)
    for s, a in reversed(list(steps)):
        kids = []
        for w in [None] + list(system.neighbors[s]):
            kids.append((w, tree if w == a else MatchQueryTree.leaf(0)))
        tree = MatchQueryTree.query(s, kids)
    return tree


def random_family(view: View, rng: random.Random, size: int, t: int,
                  forceable: bool = False) -> list:
    """``size`` branch trees of depth ``t`` over random live mini-squares.

    Answers are uniform over the possible partners.  With ``forceable`` each
    branch is built so that it can be followed under the restriction, which
    makes long runs common.
    """
    live = sorted(view.live)
    parts = []
    for _ in range(size):
        if t == 0:
            parts.append(MatchQueryTree.leaf(rng.randrange(2)))
            continue
        if forceable:
            steps = _followable_steps(view, rng, live, t)
        else:
            steps = [(s, rng.choice([None] + list(view.system.neighbors[s])))
                     for s in rng.sample(live, min(t, len(live)))]
        parts.append(branch_tree(view.system, steps))
    return parts


def _followable_steps(view: View, rng: random.Random, live: list, t: int) -> list:
    """Up to ``t`` steps whose answers are jointly allowed by the restriction."""
    need: dict = {}
    steps = []
    for s in rng.sample(live, len(live)):
        if len(steps) == t:
            break
        if s in need:
            continue
        if s in view.pi2:
            a = view.pi2[s]
            if a in need:
                continue
        else:
            opts = [w for w in view.system.neighbors[s]
                    if w in view.chosen and w not in need
                    and view.chosen_ok({**need, s: w, w: s})]
            if not opts:
                continue
            a = rng.choice(opts)
        need[s], need[a] = a, s
        steps.append((s, a))
    return steps


# star quadruples -------------------------------------------------------------


@dataclass
class StarQuadruple:
    system: MiniGraph
    tau: TauAssignment
    U: dict  # super-square -> mini index, None for a hole
    pi2: tuple
    B: dict
    forced: tuple  # J* pairs, matched and dead in the star restriction

    @property
    def holes(self) -> list:
        return sorted(ss for ss, i in self.U.items() if i is None)

    def live(self) -> set:
        out = {(*ss, i) for ss, i in self.U.items() if i is not None}
        for a, b in self.pi2:
            out.update((a, b))
        return out

    def to_json(self) -> dict:
        return {
            "tau": self.tau.to_json(),
            "U": [[list(ss), i] for ss, i in sorted(self.U.items())],
            "pi2": [[list(a), list(b)] for a, b in self.pi2],
            "B": [[list(map(list, p)), list(b)] for p, b in sorted(self.B.items())],
            "forced": [[list(a), list(b)] for a, b in self.forced],
            "holes": [list(h) for h in self.holes],
        }


class ExternalInfo:
    """Bit stream of fixed-width fields; the width of each field follows
    from what has been decoded so far."""

    def __init__(self, bits=None):
        self.bits = list(bits or [])
        self.pos = 0

    def write(self, value: int, width: int) -> None:
        if value < 0 or value >= 1 << width:
            raise EncodeError(f"value {value} does not fit in {width} bits")
        self.bits.extend((value >> (width - 1 - k)) & 1 for k in range(width))

    def read(self, width: int) -> int:
        if self.pos + width > len(self.bits):
            raise DecodeError("external information exhausted")
        v = 0
        for k in range(width):
            v = (v << 1) | self.bits[self.pos + k]
        self.pos += width
        return v

    def __len__(self) -> int:
        return len(self.bits)

    def to_hex(self) -> str:
        """Length in bits as 8 hex digits, then the bits packed MSB first."""
        padded = self.bits + [0] * (-len(self.bits) % 8)
        body = bytes(
            int("".join(map(str, padded[i:i + 8])), 2) for i in range(0, len(padded), 8)
        )
        return f"{len(self.bits):08x}" + body.hex()

    @classmethod
    def from_hex(cls, text: str) -> "ExternalInfo":
        n = int(text[:8], 16)
        bits = []
        for byte in bytes.fromhex(text[8:]):
            bits.extend((byte >> (7 - k)) & 1 for k in range(8))
        return cls(bits[:n])


QUERY_BITS = 8


def _width(count: int) -> int:
    return max(1, (count - 1).bit_length())


class _Channel:
    """Writes oracle answers when encoding, reads them back when decoding."""

    def __init__(self, info: ExternalInfo, writing: bool):
        self.info = info
        self.writing = writing

    def field(self, width: int, oracle: Callable[[], int]) -> int:
        if self.writing:
            v = oracle()
            self.info.write(v, width)
            return v
        return self.info.read(width)


def _mini(ss, idx):
    return (*ss, idx)


def _advice_for(bits: list, target: int) -> Optional[tuple]:
    for b in ((0, 0), (0, 1), (1, 0), (1, 1)):
        try:
            if choose_path(bits, "lower", b) == target:
                return b
        except LopsidedError:
            return None
    return None


def _raise_for_pi1(bits: list) -> tuple:
    """A path to raise and advice bits that make lowering pick it again."""
    try:
        first = [choose_path(bits, "raise", (0, 0))]
    except LopsidedError:
        first = []
    for p in first + [i for i, b in enumerate(bits) if b == 0]:
        if bits[p]:
            continue
        up = list(bits)
        up[p] = 1
        adv = _advice_for(up, p)
        if adv is not None:
            return p, adv
    raise EncodeError(f"no path of group {bits} can be raised and lowered back")


@dataclass
class _Plan:
    """Everything the encoder changes; also the oracle for the bit stream."""

    pr: PartialRestriction
    run: CanonicalRun
    J_chosen: list
    J_pi2: list
    replacements: dict = field(default_factory=dict)  # J chosen pair -> pi2 pair or None

    @cached_property
    def known(self) -> dict:
        return self.run.known()


def _group_index(system: MiniGraph, pid) -> int:
    return system.group_paths(pid[0]).index(pid)


def encode_run(pr: PartialRestriction, run: CanonicalRun, parts: list):
    """Compress ``(pr, run)`` into a star quadruple and external information."""
    system = pr.system
    sig = pr.sigma
    J_chosen = [p for st in run.stages for p in st.J_chosen]
    J_pi2 = [p for st in run.stages for p in st.J_pi2]
    U_star = dict(sig.U)
    pi2_star = [p for p in pr.pi2 if _pair(*p) not in set(J_pi2)]
    plan = _Plan(pr, run, J_chosen, J_pi2)
    for s1, s2 in J_chosen:
        ss1, ss2 = s1[:2], s2[:2]
        rep = None
        for q in pi2_star:
            if (q[0][:2], q[1][:2]) in ((ss1, ss2), (ss2, ss1)):
                rep = q
                break
        plan.replacements[(s1, s2)] = rep
        if rep is None:
            U_star[ss1] = U_star[ss2] = None
        else:
            pi2_star.remove(rep)
            for r in rep:
                U_star[r[:2]] = r[2]
    tau = {p: list(b) for p, b in sig.tau.groups}
    B_star = dict(sig.B)
    pi1 = set(pi1_super_pairs(system.m))
    for s1, s2 in J_chosen:
        pair = system.pair_of(s1, s2)
        if (pair[0][:2], pair[1][:2]) not in pi1:
            tau[pair][_group_index(system, sig.chosen[pair])] = 1
    # replacement groups first: a new pi1 group may be one of them
    for rep in plan.replacements.values():
        if rep is not None:
            tau[rep][_group_index(system, pr.pi2_paths[rep])] = 0
    for A, X in sorted(pi1):
        old = system.pair_of(_mini(A, sig.U[A]), _mini(X, sig.U[X]))
        new = None
        if U_star[A] is not None and U_star[X] is not None:
            new = system.pair_of(_mini(A, U_star[A]), _mini(X, U_star[X]))
        if new == old:
            continue
        if new is not None:
            p, adv = _raise_for_pi1(tau[new])
            tau[new][p] = 1
            B_star[new] = adv
        if _pair(*old) not in {_pair(*q) for q in J_chosen}:
            tau[old][_group_index(system, sig.chosen[old])] = 0
    star = StarQuadruple(
        system,
        TauAssignment.from_dict(tau),
        U_star,
        tuple(sorted(pi2_star)),
        B_star,
        tuple(sorted(_pair(*p) for p in J_chosen + J_pi2)),
    )
    info = ExternalInfo()
    result, stages, _ = _replay(star, parts, _Channel(info, True), plan)
    if [(st[0], st[1]) for st in stages] != [(st.tree, st.branch) for st in run.stages]:
        raise EncodeError("replay found different forceable branches")
    if result.key() != pr.key():
        raise EncodeError("replay does not reproduce the restriction")
    return star, info


def decode_run(star: StarQuadruple, info: ExternalInfo, parts: list) -> PartialRestriction:
    """Rebuild the partial restriction that ``encode_run`` compressed."""
    reader = ExternalInfo(info.bits)
    result, _, skipped = _replay(star, parts, _Channel(reader, False), None)
    if reader.pos != len(reader.bits):
        raise DecodeError(f"{len(reader.bits) - reader.pos} bits of external information left over")
    log.info("decode skipped %d premature branches", skipped)
    return result


def _replay(star: StarQuadruple, parts: list, ch: _Channel, plan: Optional[_Plan]):
    system = star.system
    sig = plan.pr.sigma if plan is not None else None
    forced: dict = {}
    for a, b in star.forced:
        forced[a], forced[b] = b, a
    live = star.live()
    ones = one_branches(parts)
    known: dict = {}
    chosen_known: set = set()
    flags: dict = {}  # signature read for a forced mini: chosen or not
    stages = []
    skipped = 0
    J_chosen_all: list = []
    J_pi2_all: list = []
    nb_width = _width(max(len(v) for v in system.neighbors.values()))
    budget = ch.field(QUERY_BITS, lambda: len(plan.run.queried))

    def chosen_pairs(partner: dict) -> list:
        return [
            (system.reduced_node(a[:2]), system.reduced_node(b[:2]))
            for a, b in _pairs_of(partner)
            if a in chosen_known and b in chosen_known
        ]

    while forced:
        found = None
        for i, b, steps in ones:
            need: dict = {}
            ok = True
            for s, a in steps:
                if s in known:
                    ok = known[s] == a
                elif s in forced:
                    ok = forced[s] == a
                    if ok:
                        need[s], need[a] = a, s
                elif s in live:
                    ok = False
                else:
                    ok = a is None
                if not ok:
                    break
            if not ok:
                continue
            for s in sorted(need):
                if s in flags:
                    continue
                sig_bits = ch.field(3, lambda s=s: _signature(system, sig, s, forced[s]))
                if sig_bits & 3 != system.direction(s, forced[s]):
                    raise DecodeError(f"signature of {s} points the wrong way")
                flags[s] = bool(sig_bits >> 2)
            for s in need:
                if flags[s] != flags[need[s]]:
                    raise DecodeError(f"pair {s}, {need[s]} has mixed signatures")
            trial = chosen_known | {s for s in need if flags[s]}
            pairs = [
                (system.reduced_node(a[:2]), system.reduced_node(c[:2]))
                for a, c in _pairs_of({**known, **need})
                if a in trial and c in trial
            ]
            if consistent_with(pairs, system.m):
                found = (i, b, need)
                break
            skipped += 1
        if found is None:
            raise DecodeError("no forced branch is consistent with the information so far")
        i, b, need = found
        pairs = sorted(_pairs_of(need))
        J_pi2 = [p for p in pairs if not flags[p[0]]]
        J_chosen = [p for p in pairs if flags[p[0]]]
        J_pi2_all += J_pi2
        J_chosen_all += J_chosen
        for a, c in J_pi2:
            known[a], known[c] = c, a
        for a, c in J_chosen:
            chosen_known.update((a, c))
        for c in sorted(v for p in J_chosen for v in p):
            if c in known:
                continue
            if budget == 0:
                break
            budget -= 1
            cands = system.neighbors[c]
            idx = ch.field(nb_width, lambda c=c, cands=cands: cands.index(plan.known[c]))
            if idx >= len(cands):
                raise DecodeError("partner index out of range")
            w = cands[idx]
            known[c], known[w] = w, c
            chosen_known.update((c, w))
        for p in pairs:
            for v in p:
                del forced[v]
        stages.append((i, b, tuple(J_pi2), tuple(J_chosen)))
        if budget == 0 and any(v not in known for p in J_chosen for v in p):
            break  # the run stopped inside this stage
    result = _rebuild(star, ch, plan, J_chosen_all, J_pi2_all)
    return result, stages, skipped


def _signature(system: MiniGraph, sig, s, partner) -> int:
    return (int(s in sig.U_minis) << 2) | system.direction(s, partner)


def _rebuild(star: StarQuadruple, ch: _Channel, plan: Optional[_Plan], J_chosen, J_pi2):
    system = star.system
    sig = plan.pr.sigma if plan is not None else None
    U = dict(star.U)
    pi2 = set(star.pi2) | {system.pair_of(a, b) for a, b in J_pi2}
    replacements = []
    for s1, s2 in J_chosen:
        r1, r2 = U[s1[:2]], U[s2[:2]]
        if (r1 is None) != (r2 is None):
            raise DecodeError("a hole without its twin")
        if r1 is not None:
            rep = system.pair_of(_mini(s1[:2], r1), _mini(s2[:2], r2))
            pi2.add(rep)
            replacements.append(rep)
        U[s1[:2]], U[s2[:2]] = s1[2], s2[2]
    if any(i is None for i in U.values()):
        raise DecodeError("a hole remains after reconstruction")
    tau = {p: list(b) for p, b in star.tau.groups}
    B = dict(star.B)
    width = _width(system.width)
    pi1 = set(pi1_super_pairs(system.m))
    J_chosen_pairs = {system.pair_of(a, b) for a, b in J_chosen}
    for A, X in sorted(pi1):
        old = system.pair_of(_mini(A, U[A]), _mini(X, U[X]))
        new = None
        if star.U[A] is not None and star.U[X] is not None:
            new = system.pair_of(_mini(A, star.U[A]), _mini(X, star.U[X]))
        if new == old:
            continue
        if new is not None:
            p = choose_path(tau[new], "lower", star.B[new])
            tau[new][p] = 0
            bits = ch.field(2, lambda new=new: 2 * sig.B[new][0] + sig.B[new][1])
            B[new] = (bits >> 1, bits & 1)
        if old not in J_chosen_pairs:
            L = ch.field(width, lambda old=old: _group_index(system, sig.chosen[old]))
            tau[old][L] = 1
    for pair in sorted(J_chosen_pairs):
        if (pair[0][:2], pair[1][:2]) in pi1:
            continue
        P = ch.field(width, lambda pair=pair: _group_index(system, sig.chosen[pair]))
        tau[pair][P] = 0
    for rep in replacements:
        Q = ch.field(width, lambda rep=rep: _group_index(system, plan.pr.pi2_paths[rep]))
        tau[rep][Q] = 1
    return restriction_from_parts(system, TauAssignment.from_dict(tau), U, sorted(pi2), B)


def star_forces_first(star: StarQuadruple, parts: list, run: CanonicalRun) -> bool:
    """The first forceable branch of ``run`` is forced to one by the star restriction."""
    if not run.stages:
        return True
    st = run.stages[0]
    steps = next(s for i, b, s in one_branches(parts) if (i, b) == (st.tree, st.branch))
    forced = {}
    for a, b in star.forced:
        forced[a], forced[b] = b, a
    live = star.live()
    for s, a in steps:
        if s in forced:
            if forced[s] != a:
                return False
        elif s in live or a is not None:
            return False
    return True


# common decision trees ---------------------------------------------------------


@dataclass
class CommonResult:
    tree: MatchQueryTree  # leaves carry an index into ``leaves``
    leaves: list  # per leaf: {family index: canonical tree of depth <= ell}
    stages: list  # per processed long branch: (family, J pairs, queries)
    failed: bool


def common_tree(families: list, pr, ell: int, depth_cap: Optional[int] = None) -> CommonResult:
    """A common decision tree after which every family has depth at most ``ell``."""
    view = pr if isinstance(pr, View) else View.of(pr)
    leaves: list = []
    stages: list = []
    failed = [False]

    def rec(m_start: int, known: dict, depth: int) -> MatchQueryTree:
        for m in range(m_start, len(families)):
            tree, runs = canonical_tree(families[m], view, ell, known, first_failure_only=True)
            long = next((r for r in runs if r.truncated), None)
            if long is None:
                continue
            learned = {}
            for st in long.stages:
                for a, b in st.I:
                    learned[a], learned[b] = b, a
            k2 = dict(known)
            ask = []
            for s in sorted(learned):
                if s in view.pi2:
                    k2[s] = view.pi2[s]
                elif s not in k2 and s in view.chosen:
                    ask.append(s)
            J = [p for st in long.stages for p in st.J]
            stages.append((m, J, len(ask)))
            return query(ask, m, k2, depth)
        per = {}
        for m, fam in enumerate(families):
            per[m] = canonical_tree(fam, view, None, known)[0]
        leaves.append(per)
        return MatchQueryTree.leaf(len(leaves) - 1)

    def query(ask, m, known, depth):
        while ask and ask[0] in known:
            ask = ask[1:]
        if not ask:
            return rec(m, known, depth)
        if depth_cap is not None and depth >= depth_cap:
            failed[0] = True
            leaves.append(None)
            return MatchQueryTree.leaf(len(leaves) - 1)
        c = ask[0]
        kids = []
        for w in view.chosen_answers(c, known):
            k2 = dict(known)
            k2[c], k2[w] = w, c
            kids.append((w, query(ask[1:], m, k2, depth + 1)))
        if not kids:
            leaves.append({})
            return MatchQueryTree.leaf(len(leaves) - 1)
        return MatchQueryTree.query(c, kids)

    tree = rec(0, {}, 0)
    return CommonResult(tree, leaves, stages, failed[0])
