import pytest

from gridphp.formula_core import FregeProof, Not, Or, ProofLine, Var, edge_var
from gridphp.matching_engine import CapacityError, InfeasibleError, PartialMatching
from gridphp.trees import (
    MatchQueryTree,
    TEvaluation,
    audit_proof,
    build_evaluation,
    full_tree,
    natural_tree,
    prune,
    verify_evaluation,
)

N = 451
L = MatchQueryTree.leaf


def test_tree_json_round_trip():
    t = MatchQueryTree.query((3, 3), [((3, 4), L(1)), ((2, 3), L(0))])
    assert MatchQueryTree.from_json(t.to_json()) == t
    assert t.children[0][0] == (2, 3)  # children sorted by answer
    assert t.depth() == 1 and t.size() == 3


def test_flip_and_constants():
    t = MatchQueryTree.query((3, 3), [((3, 4), L(1)), ((2, 3), L(0))])
    assert t.flip().flip() == t
    assert t.flip().leaf_values() == {0, 1}
    assert L(1).is_constant(1) and not t.is_constant(1)
    assert t.same_shape(t.flip())


def test_natural_tree_of_a_variable():
    t = natural_tree(edge_var((5, 5), (5, 6)), N)
    assert t.node == (5, 5) and len(t.children) == 4
    assert t.child((5, 6)).value == 1
    corner = natural_tree(edge_var((1, 1), (1, 2)), N)
    assert len(corner.children) == 2


def test_prune_keeps_consistent_branches():
    t = natural_tree(edge_var((5, 5), (5, 6)), N)
    tau = PartialMatching([((5, 6), (5, 7))])
    pruned = prune(t, tau, N)
    assert pruned.is_constant(0)
    assert {a for a, _ in pruned.children} == {(4, 5), (6, 5), (5, 4)}
    fixed = prune(t, PartialMatching([((5, 5), (5, 6))]), N)
    assert fixed == L(1)


def test_prune_capacity_and_infeasible():
    t = natural_tree(edge_var((5, 5), (5, 6)), 50)
    with pytest.raises(CapacityError):
        prune(t, PartialMatching([((20, 20), (20, 21))]), 50)
    trap = PartialMatching([((1, 2), (1, 3)), ((2, 1), (3, 1))])
    with pytest.raises(InfeasibleError):
        prune(natural_tree(edge_var((1, 1), (1, 2)), N), trap, N)


def test_full_tree_decides_the_formula():
    a, b = Var(edge_var((5, 5), (5, 6))), Var(edge_var((5, 5), (6, 5)))
    t = full_tree(Or(a, b), N)
    assert t.depth() == 1
    assert sorted(v for _, v in t.branches()) == [0, 0, 1, 1]


def test_built_evaluation_is_valid_on_axioms(depth3_axioms):
    phi = build_evaluation(depth3_axioms, N)
    assert verify_evaluation(phi, depth3_axioms) == []
    assert phi.t <= 3


def test_one_violation_per_formula(depth3_axioms):
    phi = build_evaluation(depth3_axioms, N)
    ax = depth3_axioms[0]
    trees = dict(phi.trees)
    trees[ax] = trees[ax].flip()  # breaks properties 2 and 5 at once
    bad = verify_evaluation(TEvaluation(trees, N, phi.t), depth3_axioms)
    assert [v.formula for v in bad] == [ax]
    assert bad[0].prop == "2"


def test_depth_violation_comes_first():
    v = Var(edge_var((5, 5), (5, 6)))
    phi = build_evaluation([Not(v)], N, t=0)
    props = {str(x.formula): x.prop for x in verify_evaluation(phi)}
    assert set(props.values()) == {"depth"}


def test_audit_accepts_and_rejects(depth3_proof, depth3_axioms):
    axiom_line = FregeProof((ProofLine(depth3_axioms[0], "axiom"),))
    phi = build_evaluation(depth3_axioms, N)
    assert audit_proof(axiom_line, phi, N, instance=depth3_axioms).ok
    v = audit_proof(depth3_proof, phi, N, instance=depth3_axioms)
    assert not v.ok and "outside the evaluation" in v.reason
    with pytest.raises(CapacityError):
        audit_proof(axiom_line, phi, 300, t=3)


def test_axioms_accepted_as_any_iterable(depth3_axioms):
    phi = build_evaluation(depth3_axioms, N)
    ax = depth3_axioms[0]
    phi.trees[ax] = phi.trees[ax].flip()
    assert verify_evaluation(phi, set(depth3_axioms)) == verify_evaluation(phi, depth3_axioms)
    assert [v.prop for v in verify_evaluation(phi)] == ["5"]
