"""Acceptance suite: one test per criterion.

A summary with one PASS/FAIL line per criterion is printed at the end of
the pytest run.
"""
import itertools
import random
import time

import pytest

from gridphp.bijection import ParameterError, f_table, popcount, slice_sets
from gridphp.experiments import ExperimentConfig, run_switch_mc
from gridphp.formula_core import (
    TRUE,
    FregeProof,
    Not,
    ProofLine,
    Var,
    check_proof,
    parse_formula,
    subformulas,
    validate_php,
)
from gridphp.grid_core import (
    Figure,
    find_negative_certificate,
    is_white,
    path_cost,
    perimeters,
    tile,
)
from gridphp.layout import Layout, LayoutParams, MiniGraph
from gridphp.matching_engine import (
    InfeasibleError,
    PartialMatching,
    corner_distance,
    extend_with_node,
    is_locally_consistent,
    match_square_with_dents,
    profile,
    ring_cells,
    well_cover,
)
from gridphp.restriction import (
    is_small_image,
    sample_full_restriction,
    sample_partial_restriction,
    verify_full_restriction,
)
from gridphp.switching import (
    ExternalInfo,
    View,
    canonical_tree,
    check_disjoint,
    check_leaves,
    decode_run,
    encode_run,
    random_family,
)
from gridphp.trees import MatchQueryTree, TEvaluation, audit_proof, build_evaluation, verify_evaluation


def _detail(record_property, text):
    record_property("detail", text)


# 1 ---------------------------------------------------------------------------


def _translate(fig, dr, dc):
    return Figure((r + dr, c + dc) for r, c in fig.cells)


@pytest.mark.criterion(1)
def test_tiling_certificate_equivalence(record_property):
    cells = [(r, c) for r in range(1, 5) for c in range(1, 6)]
    start = time.time()
    mismatches = 0
    for mask in range(1 << len(cells)):
        fig = Figure([cells[i] for i in range(len(cells)) if mask >> i & 1])
        # a surplus of white cells is checked on the colour-swapped copy
        probe = fig if fig.white_count <= fig.black_count else _translate(fig, 0, 1)
        tiled = tile(fig) is not None
        cert = find_negative_certificate(probe)
        if tiled == (cert is not None):
            mismatches += 1
    secs = time.time() - start
    _detail(record_property, f"{1 << len(cells)} figures, {mismatches} mismatches, {secs:.0f}s")
    assert mismatches == 0
    assert secs < 300


# 2 ---------------------------------------------------------------------------


@pytest.mark.criterion(2)
def test_boundary_identity(record_property):
    rng = random.Random(2)
    bad = 0
    for _ in range(10_000):
        density = rng.random()
        fig = Figure(
            (r, c) for r in range(1, 13) for c in range(1, 13) if rng.random() < density
        )
        total = sum(path_cost(p) for p in perimeters(fig))
        if total != 4 * (fig.white_count - fig.black_count):
            bad += 1
    _detail(record_property, f"10000 figures, {bad} violations")
    assert bad == 0


# 3 ---------------------------------------------------------------------------


@pytest.mark.criterion(3)
def test_well_cover_contract(record_property):
    rng = random.Random(3)
    bad = 0
    for _ in range(10_000):
        K = [rng.randint(1, 200) for _ in range(rng.randint(1, 12))]
        cover = well_cover(K, 200)
        ok = cover.is_even() and cover.size <= 6 * len(K)
        ok = ok and all(k in cover for k in K)
        ok = ok and all(profile(iv, K).nonnegative() for iv in cover.intervals)
        bad += not ok
    _detail(record_property, f"10000 multisets, {bad} violations")
    assert bad == 0


# 4 ---------------------------------------------------------------------------


@pytest.mark.criterion(4)
def test_extension(record_property):
    n = 500
    bound = int(n / 50 - 9)
    rng = random.Random(4)
    bad = 0
    for _ in range(10_000):
        size = rng.randint(0, bound)
        edges, used = [], set()
        while len(edges) < size:
            a = (rng.randint(1, n), rng.randint(1, n))
            b = rng.choice([(a[0] + 1, a[1]), (a[0], a[1] + 1)])
            if b[0] > n or b[1] > n or a in used or b in used:
                continue
            edges.append((a, b))
            used.update((a, b))
        M = PartialMatching(edges)
        w = is_locally_consistent(M, n)
        if w is None:
            continue
        while True:
            v = (rng.randint(1, n), rng.randint(1, n))
            if v not in used:
                break
        partner, M2, w2 = extend_with_node(M, w, v, n)
        ok = M2.partner(v) == partner and w2.verify(M2)
        ok = ok and w2.S.size - w.S.size <= 2 and w2.T.size - w.T.size <= 2
        ok = ok and tile(Figure(w2.cells())) is not None
        bad += not ok
    _detail(record_property, f"10000 extensions at n={n}, |M| <= {bound}, {bad} failures")
    assert bad == 0


# 5 ---------------------------------------------------------------------------


def _window_edges(r0, c0, side, n):
    out = []
    for r in range(r0, r0 + side):
        for c in range(c0, c0 + side):
            if r + 1 < r0 + side and r + 1 <= n:
                out.append(((r, c), (r + 1, c)))
            if c + 1 < c0 + side and c + 1 <= n:
                out.append(((r, c), (r, c + 1)))
    return out


def _matchings(edges, k):
    for size in range(k + 1):
        for combo in itertools.combinations(edges, size):
            nodes = [v for e in combo for v in e]
            if len(set(nodes)) == len(nodes):
                yield combo


@pytest.mark.criterion(5)
def test_sub_matchings(record_property):
    n = 30
    # every matching of size <= 4 inside a 4 x 4 window, with the window at
    # a corner, on an edge and in the middle of the 30 x 30 grid
    windows = [(1, 1), (1, 14), (14, 14), (27, 27)]
    checked = subsets = bad = 0
    for r0, c0 in windows:
        for combo in _matchings(_window_edges(r0, c0, 4, n), 4):
            M = PartialMatching(combo)
            if is_locally_consistent(M, n) is None:
                continue
            checked += 1
            for size in range(len(combo) + 1):
                for sub in itertools.combinations(combo, size):
                    subsets += 1
                    Ms = PartialMatching(sub)
                    w = is_locally_consistent(Ms, n)
                    if w is None or not w.verify(Ms) or w.S.size + w.T.size > 48 * len(sub):
                        bad += 1
    _detail(record_property, f"{checked} matchings, {subsets} subsets, {bad} failures")
    assert checked > 0 and bad == 0


# 6 ---------------------------------------------------------------------------


def _dent_sets(side):
    odd = side % 2
    by_side = {}
    for cell in ring_cells(1, 1, side):
        if corner_distance(cell, 1, 1, side) == 0:
            continue
        r, c = cell
        key = "T" if r == 1 else "B" if r == side else "L" if c == 1 else "R"
        by_side.setdefault(key, []).append(cell)
    for D in range(0, 10):
        pool = [c for cells in by_side.values() for c in cells if corner_distance(c, 1, 1, side) >= D]
        for combo in itertools.combinations(pool, D):
            per = {}
            for cell in combo:
                key = next(k for k, v in by_side.items() if cell in v)
                per[key] = per.get(key, 0) + 1
            whites = sum(is_white(c) for c in combo)
            if odd:
                # at most two per side plus one extra white dent
                if whites != D - whites + 1 or sum(max(0, v - 2) for v in per.values()) > 1:
                    continue
            elif 2 * whites != D or max(per.values(), default=0) > 2:
                continue
            yield combo


@pytest.mark.criterion(6)
def test_onion_matcher(record_property):
    total = bad = 0
    for side in list(range(2, 13, 2)) + list(range(3, 12, 2)):
        square = {(r, c) for r in range(1, side + 1) for c in range(1, side + 1)}
        for dents in _dent_sets(side):
            total += 1
            try:
                dm = match_square_with_dents(side, dents)
            except InfeasibleError:
                bad += 1
                continue
            bad += not dm.is_perfect_on(square - set(dents))
    _detail(record_property, f"{total} dent configurations, {bad} failures")
    assert total > 0 and bad == 0


# 7 ---------------------------------------------------------------------------


@pytest.mark.criterion(7)
def test_layout_invariants(record_property):
    notes = []
    for params in (LayoutParams(451, 1, 1), LayoutParams(3601, 2, 2)):
        start = time.time()
        layout = Layout(params)
        worst = layout.check_disjoint_paths()
        counts = layout.path_counts()
        secs = time.time() - start
        assert worst["horizontal"] <= 1 and worst["vertical"] <= 1
        assert set(counts.values()) == {(2 * params.R, params.R)}
        assert len(counts) == len(layout.pairs)
        assert secs < 60
        notes.append(f"n={params.n}: {len(counts)} pairs in {secs:.1f}s")
    _detail(record_property, "; ".join(notes))


# 8 ---------------------------------------------------------------------------


@pytest.mark.criterion(8)
def test_restriction_validity(record_property):
    layout = Layout(LayoutParams(451, 1, 1))
    bad = 0
    for seed in range(100):
        sig, sub, reduced = sample_full_restriction(layout, random.Random(seed))
        rep = verify_full_restriction(layout, sig, sub)
        small = all(is_small_image(f) for f in sub.forms.values())
        if rep["problems"] or not small or validate_php(reduced) or reduced.n != 3:
            bad += 1
    _detail(record_property, f"100 restrictions at n=451, {bad} invalid")
    assert bad == 0


# 9 ---------------------------------------------------------------------------


@pytest.mark.criterion(9)
def test_almost_bijection(record_property):
    tables = bad = 0
    for width in range(2, 13, 2):
        for t in range(1, width // 2 + 1):
            try:
                table = f_table(width, t)
            except ParameterError:
                continue
            tables += 1
            upper, lower = slice_sets(width, t), slice_sets(width, t - 1)
            pre = {}
            for u in upper:
                lo = table[u]
                pre[lo] = pre.get(lo, 0) + 1
                if lo & ~u or popcount(lo) != t - 1:
                    bad += 1
            if set(pre) != set(lower) or max(pre.values()) > 4 or set(table) != set(upper):
                bad += 1
    _detail(record_property, f"{tables} slice maps for 2R <= 12, {bad} failures")
    assert tables > 0 and bad == 0


# 10 / 11 -----------------------------------------------------------------------

TOY = MiniGraph(3, 2, 2)


def _toy_restriction(rng, k=4):
    return sample_partial_restriction(TOY, rng, k=k, max_per_super=10, min_per_pair=0,
                                      tau_steps=100)


@pytest.mark.criterion(10)
def test_encode_decode_round_trip(record_property):
    found = exact = 0
    seed = 0
    while found < 100 and seed < 2000:
        rng = random.Random(10_000 + seed)
        seed += 1
        pr = _toy_restriction(rng, k=2)
        parts = random_family(View.of(pr), rng, 6, 4, forceable=True)
        _, runs = canonical_tree(parts, pr, depth_cap=2)
        long_runs = [r for r in runs if r.truncated]
        if not long_runs:
            continue
        run = long_runs[0]
        assert not check_disjoint(run)
        found += 1
        star, info = encode_run(pr, run, parts)
        back = decode_run(star, ExternalInfo.from_hex(info.to_hex()), parts)
        exact += back.key() == pr.key()
    _detail(record_property, f"{exact}/{found} long runs reproduced exactly")
    assert found == 100 and exact == found


@pytest.mark.criterion(11)
def test_canonical_tree_semantics(record_property):
    leaves = bad = 0
    for seed in range(100):
        rng = random.Random(20_000 + seed)
        pr = _toy_restriction(rng, k=seed % 5)
        parts = random_family(View.of(pr), rng, 4, 3, forceable=seed % 2 == 0)
        tree, runs = canonical_tree(parts, pr)
        leaves += len(runs)
        bad += len(check_leaves(parts, pr, tree, runs))
    _detail(record_property, f"{leaves} leaves checked against all completions, {bad} wrong")
    assert bad == 0


# 12 ---------------------------------------------------------------------------


@pytest.mark.criterion(12)
def test_switching_direction(record_property):
    base = dict(C=1.0, m=3, R=2, t=2, s=1, family_size=4, trials=10_000,
                tau_steps=100, max_per_super=10, min_per_pair=0)
    rates = {}
    for delta, k in ((1, 0), (2, 2)):
        rep = run_switch_mc(ExperimentConfig.from_dict({**base, "delta": delta, "k": k}))
        agg = rep.aggregate["failed"]
        assert agg["trials"] == 10_000
        rates[delta] = agg
    lo1, hi1 = rates[1]["wilson95"]
    lo2, hi2 = rates[2]["wilson95"]
    both_tiny = rates[1]["rate"] < 1e-3 and rates[2]["rate"] < 1e-3
    _detail(record_property, f"delta=1 rate {rates[1]['rate']:.4f} [{lo1:.4f}, {hi1:.4f}], "
                             f"delta=2 rate {rates[2]['rate']:.4f} [{lo2:.4f}, {hi2:.4f}]")
    assert rates[2]["rate"] <= rates[1]["rate"]
    assert hi2 < lo1 or both_tiny


# 13 ---------------------------------------------------------------------------


def _mutants(proof):
    lines = list(proof.lines)

    def swap(i, line):
        out = list(lines)
        out[i - 1] = line
        return FregeProof(tuple(out))

    cut = lines[19]
    assoc = lines[7]
    return {
        # conclusion of the cut on line 20 no longer drops the cut formula
        "bad cut": swap(20, ProofLine(parse_formula("| x_4_5_5_5 ~ x_5_5_5_6"), "cut", cut.premises)),
        # association that regroups to the right instead of the left
        "bad association": swap(8, ProofLine(lines[6].formula, "association", assoc.premises)),
        # excluded middle of a depth-4 formula
        "depth overflow": swap(17, ProofLine(
            parse_formula("| ~ | ~ | ~ | x_4_5_5_5 x_5_4_5_5 x_5_5_5_6 x_5_5_6_5 "
                          "~ ~ | ~ | ~ | x_4_5_5_5 x_5_4_5_5 x_5_5_5_6 x_5_5_6_5"),
            "excluded-middle")),
        "dangling premise": swap(19, ProofLine(lines[18].formula, "expansion", (19,))),
        "non-axiom leaf": swap(3, ProofLine(parse_formula("| ~ x_4_6_5_6 ~ x_5_6_5_7"), "axiom")),
    }


def _flip_first_leaf(tree):
    if tree.is_leaf:
        return MatchQueryTree.leaf(1 - tree.value)
    (ans, sub), *rest = tree.children
    return MatchQueryTree.query(tree.node, [(ans, _flip_first_leaf(sub))] + rest)


@pytest.mark.criterion(13)
def test_proof_checker_and_auditor(record_property, depth3_proof, depth3_axioms):
    proof, axioms = depth3_proof, depth3_axioms
    assert len(proof.lines) == 20
    assert check_proof(proof, axioms, 3).ok
    rejected = {}
    for name, mutant in _mutants(proof).items():
        rejected[name] = not check_proof(mutant, axioms, 3).ok
    assert all(rejected.values()), rejected

    forms = {TRUE}
    for line in proof.lines:
        forms.update(subformulas(line.formula))
    for ax in axioms:
        forms.update(subformulas(ax))
    phi = build_evaluation(forms, 451)
    assert not verify_evaluation(phi, axioms)
    assert audit_proof(proof, phi, 451, instance=axioms).ok

    def mutated(f, tree):
        trees = dict(phi.trees)
        trees[f] = tree
        return TEvaluation(trees, phi.n, phi.t)

    a = Var("x_4_5_5_5")
    axiom = axioms[1]
    or_line = proof.lines[6].formula
    seeded = {
        "1": (TRUE, MatchQueryTree.leaf(0)),
        "2": (axiom, _flip_first_leaf(phi[axiom])),
        "3": (a, MatchQueryTree.query((5, 5), [(w, MatchQueryTree.leaf(int(w == (4, 5))))
                                               for w in [(4, 5), (5, 4), (5, 6), (6, 5)]])),
        "4": (Not(a), phi[a]),
        "5": (or_line, _flip_first_leaf(phi[or_line])),
    }
    detected = {}
    for prop, (f, tree) in seeded.items():
        found = verify_evaluation(mutated(f, tree), axioms)
        detected[prop] = any(v.prop == prop and v.formula == f for v in found)
    # the disjunction on line 7 is first used there
    verdict = audit_proof(proof, mutated(*seeded["5"]), 451, instance=axioms)
    detected["5 at line 7"] = not verdict.ok and verdict.line == 7
    # an unsound extra line is not mapped to a 1-tree
    unsound = FregeProof(proof.lines + (ProofLine(a, "expansion", (1,)),))
    verdict = audit_proof(unsound, phi, 451, instance=axioms)
    detected["1-tree"] = not verdict.ok and verdict.line == 21
    _detail(record_property, f"5/5 mutants rejected, auditor caught {sum(detected.values())}"
                             f"/{len(detected)} seeded faults")
    assert all(detected.values()), detected
