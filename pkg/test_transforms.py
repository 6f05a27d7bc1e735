from dataclasses import replace

import pytest

from toolkits.capgram.derivation import SearchBudget, enumerate_language, replay_labels
from toolkits.capgram.errors import CapacityError, GrammarError, TransformError
from toolkits.capgram.grammar import CapacityFunction, Grammar, Rule
from toolkits.capgram.fileformat import parse_grammar_file
from toolkits.capgram.randomized import random_capacity, random_grammar
from toolkits.capgram.regulated import ControlMode, check_index_bound, enumerate_regulated, is_matrix_shuffle
from toolkits.capgram.transforms import (
    Provenance,
    cf_fin_to_cf_cb,
    closure_construct,
    gs_cb_to_blockwise,
    gs_cb_to_matrix_fin,
    normalize_capacity_to_one,
    normalize_regulated_capacity,
    vector_cb_to_vector_fin,
)


def words(g, k, n):
    return enumerate_language(g, k, SearchBudget(max_terminal_len=n)).words


def test_normalize_capacity(gs_small):
    g = gs_small.grammar
    k = CapacityFunction.constant(g.nonterminals, 2)
    g1, ones, prov = normalize_capacity_to_one(g, k)
    assert g1.nonterminals == ("S.1", "S.2", "A.1", "A.2", "B.1", "B.2")
    assert g1.start == "S.1"
    assert ones.is_one
    # S -> A B has 2 * 2 * 2 variants
    assert [r.label for r in g1.rules if prov.rule_map[r.label] == "r1"] == [f"r1.{i}" for i in range(1, 9)]
    assert set(prov.rule_map.values()) == {"r1", "r2", "r3", "r4"}
    assert words(g1, ones, 8) == words(g, k, 8)


def test_normalize_needs_finite_capacity(gs_small):
    g = gs_small.grammar
    with pytest.raises(CapacityError):
        normalize_capacity_to_one(g, CapacityFunction({"S": 1, "A": None, "B": 1}))
    with pytest.raises(TransformError):
        normalize_capacity_to_one(g, CapacityFunction.constant(g.nonterminals, 3), rule_budget=10)


def test_normalize_random_grammars(rng):
    for _ in range(5):
        g = random_grammar(rng, max_nonterminals=3, max_rules=5)
        k = random_capacity(rng, g, max_bound=2)
        g1, ones, _ = normalize_capacity_to_one(g, k)
        before = enumerate_language(g, k, SearchBudget(max_terminal_len=5))
        after = enumerate_language(g1, ones, SearchBudget(max_terminal_len=5))
        assert before.exhaustive and after.exhaustive
        assert after.words == before.words


def test_blockwise(gs_small):
    g, k = gs_small.grammar, gs_small.capacity
    g2, prov = gs_cb_to_blockwise(g, k)
    labels = [r.label for r in g2.rules]
    assert labels[:4] == ["r1", "r1.1", "r1.2", "r1.3"]
    assert g2.rule("r1.1").lhs == ("S", "A")
    assert g2.rule("r1.2").lhs == ("A", "S")
    assert all(prov.rule_map[label] is not None for label in labels)
    assert words(g2, k, 8) == words(g, k, 8)


def test_blockwise_needs_capacity_one(gs_small):
    g = gs_small.grammar
    with pytest.raises(TransformError):
        gs_cb_to_blockwise(g, CapacityFunction.constant(g.nonterminals, 2))


def test_matrix_fin(gs_small):
    g, k = gs_small.grammar, gs_small.capacity
    rg, prov = gs_cb_to_matrix_fin(g, k)
    assert rg.mode is ControlMode.MATRIX
    assert rg.restriction.kind == "index"
    assert rg.restriction.index == 6
    assert rg.matrices[0].label == "m_start"
    assert rg.matrices[-1].label == "m_end"
    result = enumerate_regulated(rg, SearchBudget(max_terminal_len=8), with_witnesses=True)
    assert result.exhaustive
    assert result.words == words(g, k, 8)
    enc = prov.encoding
    for witness in result.witnesses.values():
        for i in witness.boundaries()[1:-1]:
            assert enc.shape_ok(witness.forms[i].symbols)
        assert prov.lift(witness.labels)[0] == "r1"


def test_matrix_fin_normalizes_larger_capacity(gs_small):
    g = gs_small.grammar
    k = CapacityFunction.constant(g.nonterminals, 2)
    rg, prov = gs_cb_to_matrix_fin(g, k)
    assert prov.transform == "cap1+mat-fin"
    assert set(v for v in prov.rule_map.values() if v is not None) <= {"r1", "r2", "r3", "r4"}
    assert enumerate_regulated(rg, SearchBudget(max_terminal_len=6)).words == words(g, k, 6)


def test_cf_fin_to_cf_cb(anbn, abc_cb):
    g, k = cf_fin_to_cf_cb(anbn.grammar, 3)
    assert g is anbn.grammar
    assert k == CapacityFunction({"S": 3})
    with pytest.raises(GrammarError):
        cf_fin_to_cf_cb(abc_cb.grammar, 1)
    with pytest.raises(CapacityError):
        cf_fin_to_cf_cb(anbn.grammar, 0)


def test_union_and_concat(anbn, single_c):
    g1, g2 = anbn.grammar, single_c.grammar
    u, ones, prov = closure_construct("union", g1, g2)
    assert u.nonterminals == ("S'", "S_1", "S_2")
    assert prov.operand["r1_1"] == 0 and prov.operand["r1_2"] == 1
    assert set(words(u, ones, 6)) == {tuple("ab"), tuple("aabb"), tuple("aaabbb"), ("c",)}

    c, ones, prov = closure_construct("concat", g1, g2)
    assert set(words(c, ones, 7)) == {tuple("abc"), tuple("aabbc"), tuple("aaabbbc")}
    assert prov.lift(["init", "r1_1", "r2_1", "r1_2"], operand=0) == ("r1", "r2")


def test_star(anbn):
    s, ones, prov = closure_construct("star", anbn.grammar)
    assert s.start == "S'"
    assert set(words(s, ones, 4)) == {(), tuple("ab"), tuple("abab"), tuple("aabb")}
    assert prov.rule_map["loop"] is None


def test_homomorphism(anbn):
    h, ones, _ = closure_construct("homomorphism", anbn.grammar, mapping={"a": ("x", "y")})
    assert h.terminals == ("x", "y", "b")
    assert set(words(h, ones, 6)) == {tuple("xyb"), tuple("xyxybb")}
    with pytest.raises(TransformError):
        closure_construct("homomorphism", anbn.grammar)
    with pytest.raises(TransformError):
        closure_construct("reverse", anbn.grammar)


def test_vector_fin(samples):
    rg = parse_grammar_file(str(samples / "vector-copy.gr")).regulated
    out, prov = vector_cb_to_vector_fin(rg)
    assert out.mode is ControlMode.VECTOR
    assert out.restriction.kind == "none"
    assert out.base.start == "S'"
    b = SearchBudget(max_terminal_len=4)
    source = enumerate_regulated(rg, b, max_open=3)
    target = enumerate_regulated(out, b, max_open=3)
    assert target.words == source.words
    bound = 2 * len(rg.base.nonterminals) + 1
    assert check_index_bound(out, bound, b, max_open=3).holds is True
    assert prov.matrix_map["ma"] == "ma"
    assert prov.rule_map["a1"] == "a1"
    assert prov.rule_map["lock"] is None


def test_vector_fin_preconditions(samples):
    rg = parse_grammar_file(str(samples / "vector-copy.gr")).regulated
    with pytest.raises(TransformError):
        vector_cb_to_vector_fin(replace(rg, mode=ControlMode.MATRIX))
    two = CapacityFunction.constant(rg.base.nonterminals, 2)
    wide = replace(rg, restriction=replace(rg.restriction, capacity=two))
    with pytest.raises(TransformError):
        vector_cb_to_vector_fin(wide)
    normalized, prov = normalize_regulated_capacity(wide)
    assert normalized.restriction.capacity.is_one
    assert prov.matrix_map["m0.1"] == "m0"


def test_vector_fin_drops_doubling_matrices():
    g = Grammar(
        ("S", "A"),
        ("a",),
        "S",
        (Rule.of("r1", "S", "A"), Rule.of("r2", "A", "A A"), Rule.of("r3", "A", "a")),
        cf_flag=True,
    )
    from toolkits.capgram.regulated import Matrix, RegulatedGrammar, Restriction

    rg = RegulatedGrammar(
        g,
        tuple(Matrix(f"m{i}", (r,)) for i, r in enumerate(g.rules, start=1)),
        ControlMode.VECTOR,
        Restriction.of_capacity(CapacityFunction.ones(g.nonterminals)),
    )
    out, prov = vector_cb_to_vector_fin(rg)
    assert "m2" not in prov.matrix_map
    assert enumerate_regulated(out, SearchBudget(max_terminal_len=3)).words == [("a",)]


def test_provenance_render_and_compose():
    first = Provenance("cap1", {"r1.1": "r1", "r1.2": "r1"})
    second = Provenance("mat-fin", {"init": None, "r1.1/1": "r1.1"}, {"m_r1.1/1": "r1.1"})
    both = first.then(second)
    assert both.transform == "cap1+mat-fin"
    assert both.rule_map == {"init": None, "r1.1/1": "r1"}
    assert both.matrix_map == {"m_r1.1/1": "r1"}
    assert both.render() == "# transform: cap1+mat-fin\ninit <- ~\nr1.1/1 <- r1\nmatrix m_r1.1/1 <- r1\n"


def assert_lifts_replay(witnesses, prov, g, k):
    assert witnesses
    for word, witness in witnesses.items():
        lifted = prov.lift(witness.labels)
        replayed = replay_labels(g, lifted, k, word)
        assert replayed is not None, (word, lifted)
        assert replayed.result.symbols == word


def test_blockwise_witnesses_replay_in_source(gs_small):
    g, k = gs_small.grammar, gs_small.capacity
    g2, prov = gs_cb_to_blockwise(g, k)
    result = enumerate_language(g2, k, SearchBudget(max_terminal_len=8), with_witnesses=True)
    assert_lifts_replay(result.witnesses, prov, g, k)


@pytest.mark.parametrize("bound", [1, 2])
def test_matrix_fin_witnesses_replay_in_source(gs_small, bound):
    g = gs_small.grammar
    k = CapacityFunction.constant(g.nonterminals, bound)
    rg, prov = gs_cb_to_matrix_fin(g, k)
    result = enumerate_regulated(rg, SearchBudget(max_terminal_len=6), with_witnesses=True)
    assert_lifts_replay(result.witnesses, prov, g, k)


def test_vector_fin_witnesses_replay_in_source(samples):
    rg = parse_grammar_file(str(samples / "vector-copy.gr")).regulated
    out, prov = vector_cb_to_vector_fin(rg)
    result = enumerate_regulated(out, SearchBudget(max_terminal_len=4), max_open=3, with_witnesses=True)
    assert_lifts_replay(result.witnesses, prov, rg.base, rg.restriction.capacity)
    for witness in result.witnesses.values():
        assert is_matrix_shuffle(prov.lift(witness.labels), rg.matrices)
