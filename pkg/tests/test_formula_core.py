import pytest

from gridphp.formula_core import (
    FALSE,
    TRUE,
    FormulaError,
    FregeProof,
    IncompleteSubstitution,
    Not,
    Or,
    ProofLine,
    Var,
    apply_substitution,
    check_proof,
    conj,
    depth,
    disj,
    edge_var,
    equivalent,
    evaluate,
    exactly_one,
    generate_php,
    incident_edges,
    parse_edge_var,
    parse_formula,
    rule_instance,
    simplify,
    subformulas,
    validate_php,
)

p, q, r = Var("p"), Var("q"), Var("r")


def test_parse_and_print_round_trip():
    text = "| ~ | p q ~ r"
    f = parse_formula(text)
    assert str(f) == text
    assert f == Or(Not(Or(p, q)), Not(r))
    with pytest.raises(FormulaError):
        parse_formula("| p")
    with pytest.raises(FormulaError):
        parse_formula("p q")


@pytest.mark.parametrize(
    "text,d",
    [("p", 1), ("~ p", 1), ("| p q", 1), ("~ | p q", 1), ("| ~ | p q r", 2),
     ("| ~ | ~ | p q r p", 3), ("| | p q | r ~ p", 1)],
)
def test_depth_counts_alternations(text, d):
    assert depth(parse_formula(text)) == d


def test_disj_conj_and_evaluate():
    f = disj([p, q, r])
    assert evaluate(f, {"p": 0, "q": 0, "r": 1}) == 1
    g = conj([p, q])
    assert evaluate(g, {"p": 1, "q": 1}) == 1
    assert evaluate(g, {"p": 1, "q": 0}) == 0


def test_subformulas_are_closed():
    f = parse_formula("| ~ | p q r")
    subs = set(subformulas(f))
    assert {p, q, r, Or(p, q), Not(Or(p, q)), f} <= subs


def test_edge_vars():
    name = edge_var((2, 3), (1, 3))
    assert name == "x_1_3_2_3"
    assert parse_edge_var(name) == ((1, 3), (2, 3))
    assert len(incident_edges(5, (1, 1))) == 2
    assert len(incident_edges(5, (3, 3))) == 4


def test_exactly_one_semantics():
    names = ["a", "b", "c"]
    clauses = exactly_one(names)
    for bits in range(8):
        env = {n: (bits >> i) & 1 for i, n in enumerate(names)}
        assert all(evaluate(c, env) for c in clauses) == (sum(env.values()) == 1)


def test_generate_and_validate_php():
    inst = generate_php(3)
    assert validate_php(inst) == []
    assert len(inst.variables) == 12
    broken = type(inst)(inst.n, inst.variables, inst.axioms[1:], inst.node_axioms)
    assert validate_php(broken)
    with pytest.raises(ValueError):
        generate_php(4)


def test_simplify_and_substitution():
    assert simplify(Or(FALSE, Not(FALSE))) == TRUE
    f = Or(p, Not(q))
    assert apply_substitution(f, {"p": FALSE, "q": TRUE}) == FALSE
    assert apply_substitution(f, {"p": r}, partial=True) == Or(r, Not(q))
    with pytest.raises(IncompleteSubstitution):
        apply_substitution(f, {"p": r})
    assert equivalent(Not(Not(p)), p)
    assert not equivalent(p, q)


def test_rule_instances():
    assert rule_instance("excluded-middle", Or(p, Not(p)), []) is None
    assert rule_instance("expansion", Or(p, q), [p]) is None
    assert rule_instance("contraction", p, [Or(p, p)]) is None
    assert rule_instance("association", Or(Or(p, q), r), [Or(p, Or(q, r))]) is None
    assert rule_instance("cut", Or(q, r), [Or(p, q), Or(Not(p), r)]) is None
    assert rule_instance("cut", Or(r, q), [Or(p, q), Or(Not(p), r)]) is not None
    assert rule_instance("modus", p, []) is not None


def test_one_line_axiom_proof():
    inst = generate_php(3)
    proof = FregeProof((ProofLine(inst.axioms[0], "axiom"),))
    assert check_proof(proof, inst.axioms, 1).ok


def test_fixture_proof_checks(depth3_proof, depth3_axioms):
    assert len(depth3_proof) == 20
    assert check_proof(depth3_proof, depth3_axioms, 3).ok
    v = check_proof(depth3_proof, depth3_axioms, 2)
    assert not v.ok and "depth" in v.reason


def test_proof_text_round_trip(depth3_proof):
    assert FregeProof.from_text(depth3_proof.to_text()) == depth3_proof
    with pytest.raises(FormulaError):
        FregeProof.from_text("2: p :: axiom\n")


def test_wrong_premise_count():
    proof = FregeProof((ProofLine(Or(p, Not(p)), "excluded-middle"),
                        ProofLine(Or(Or(p, Not(p)), q), "expansion", (1, 1))))
    v = check_proof(proof, [], 3)
    assert not v.ok and v.line == 2
