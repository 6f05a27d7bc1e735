import pytest

from toolkits.capgram.derivation import (
    SearchBudget,
    SimplePattern,
    decide_membership,
    enumerate_language,
    filter_pattern,
    max_nonterminals_reached,
    replay_labels,
)
from toolkits.capgram.errors import DerivationError
from toolkits.capgram.grammar import CapacityFunction, Grammar, Rule, parse_word
from toolkits.capgram.randomized import random_capacity, random_grammar

ABC = [tuple("abc"), tuple("aabbcc"), tuple("aaabbbccc")]


def doubling():
    """S -> S S | a | ~: unbounded nonterminal growth, and forms may shrink."""
    rules = (Rule.of("r1", "S", "S S"), Rule.of("r2", "S", "a"), Rule.of("r3", "S", "~"))
    return Grammar(("S",), ("a",), "S", rules)


def test_enumerate_example(abc_cb):
    result = enumerate_language(abc_cb.grammar, abc_cb.capacity, SearchBudget(max_terminal_len=9))
    assert result.words == ABC
    assert result.exhaustive


def test_enumerate_anbn(anbn):
    result = enumerate_language(anbn.grammar, anbn.capacity, SearchBudget(max_terminal_len=6))
    assert result.words == [tuple("ab"), tuple("aabb"), tuple("aaabbb")]
    assert result.render() == "# exhaustive: true\nab\naabb\naaabbb\n"


def test_unbounded_capacity_is_not_exhaustive():
    g = doubling()
    result = enumerate_language(g, None, SearchBudget(max_terminal_len=3))
    assert result.words == [(), ("a",), ("a", "a"), ("a", "a", "a")]
    assert not result.exhaustive


def test_capacity_cuts_language():
    g = doubling()
    result = enumerate_language(g, CapacityFunction({"S": 1}), SearchBudget(max_terminal_len=3))
    assert result.words == [(), ("a",)]
    assert result.exhaustive


def test_index_bound():
    g = doubling()
    result = enumerate_language(g, None, SearchBudget(max_terminal_len=4), index_bound=2)
    assert result.words == [tuple("a" * n) for n in range(5)]
    assert result.exhaustive


def test_state_cap_makes_result_inexhaustive(abc_cb):
    result = enumerate_language(abc_cb.grammar, abc_cb.capacity, SearchBudget(max_terminal_len=9, max_states=5))
    assert not result.exhaustive
    assert result.states <= 5


def test_membership(abc_cb):
    g, k = abc_cb.grammar, abc_cb.capacity
    hit = decide_membership(parse_word("abc"), g, k)
    assert hit.verdict is True
    assert hit.witness.labels[0] == "r1"
    assert hit.witness.labels[-1] in ("r11", "r12")
    assert len(hit.witness.steps) == 8
    assert hit.witness.replay(g, k).symbols == tuple("abc")

    miss = decide_membership(parse_word("ab"), g, k)
    assert miss.verdict is False
    assert miss.label == "false"


def test_membership_rejects_undeclared_terminals(abc_cb):
    with pytest.raises(DerivationError):
        decide_membership(("z",), abc_cb.grammar, abc_cb.capacity)


def test_membership_unknown_when_budget_runs_out(abc_cb):
    result = decide_membership(parse_word("aabbcc"), abc_cb.grammar, abc_cb.capacity, SearchBudget(max_states=3))
    assert result.verdict is None
    assert result.label == "unknown"


def test_replay_labels(abc_cb):
    g, k = abc_cb.grammar, abc_cb.capacity
    witness = enumerate_language(g, k, SearchBudget(max_terminal_len=6), with_witnesses=True).witnesses[tuple("aabbcc")]
    replayed = replay_labels(g, witness.labels, k, tuple("aabbcc"))
    assert replayed is not None
    assert replayed.result.symbols == tuple("aabbcc")
    assert replay_labels(g, ("r1", "r11"), k) is None


def test_max_nonterminals_reached(abc_cb):
    best, closed = max_nonterminals_reached(abc_cb.grammar, abc_cb.capacity, SearchBudget(max_terminal_len=6))
    assert closed
    assert 4 <= best <= 7


def test_pattern():
    p = SimplePattern.parse("a*ccb*a*cb*")
    assert p.matches(tuple("accbacb"))
    assert p.matches(tuple("cccb"))
    assert not p.matches(tuple("acb"))
    assert SimplePattern.parse("x* y").matches(("x", "x", "y"))
    assert filter_pattern([tuple("cc"), tuple("ccc")], SimplePattern.parse("c c c")) == [tuple("ccc")]


def test_example_intersection(ccb):
    result = enumerate_language(ccb.grammar, ccb.capacity, SearchBudget(max_terminal_len=10))
    words = filter_pattern(result.words, SimplePattern.parse("a*ccb*a*cb*"))
    expected = {
        tuple("a" * n + "cc" + "b" * n + "a" * m + "c" + "b" * m)
        for n in range(1, 6)
        for m in range(1, n + 1)
        if 2 * n + 2 * m + 3 <= 10
    }
    assert result.exhaustive
    assert set(words) == expected


def test_max_nonterminals_reached_starts_at_axiom():
    g = Grammar(("S", "A"), ("a",), "S", (Rule.of("r1", "S", "a"), Rule.of("r2", "A", "a A")))
    assert max_nonterminals_reached(g, CapacityFunction({"S": 1, "A": 1})) == (1, True)
    best, closed = max_nonterminals_reached(doubling(), CapacityFunction({"S": 3}), SearchBudget(max_terminal_len=4))
    assert (best, closed) == (3, True)


def test_visited_set_loses_no_words(gs_small, anbn):
    for gf in (gs_small, anbn):
        deduped = enumerate_language(gf.grammar, gf.capacity, SearchBudget(max_terminal_len=8))
        naive = enumerate_language(gf.grammar, gf.capacity, SearchBudget(max_terminal_len=8, dedupe=False))
        assert deduped.exhaustive and naive.exhaustive
        assert naive.words == deduped.words


def test_visited_set_loses_no_words_random(rng):
    for _ in range(10):
        g = random_grammar(rng, max_nonterminals=3, max_rules=5)
        k = random_capacity(rng, g, max_bound=2)
        deduped = enumerate_language(g, k, SearchBudget(max_terminal_len=4))
        naive = enumerate_language(g, k, SearchBudget(max_terminal_len=4, max_states=20_000, dedupe=False))
        if deduped.exhaustive:
            assert set(naive.words) <= set(deduped.words)
            if naive.exhaustive:
                assert naive.words == deduped.words


def test_language_grows_with_capacity(gs_small):
    g = gs_small.grammar
    b = SearchBudget(max_terminal_len=8)
    one = enumerate_language(g, CapacityFunction.ones(g.nonterminals), b)
    two = enumerate_language(g, CapacityFunction.constant(g.nonterminals, 2), b)
    assert one.exhaustive and two.exhaustive
    assert set(one.words) <= set(two.words)


def test_language_grows_with_capacity_random(rng):
    for _ in range(10):
        g = random_grammar(rng, max_nonterminals=3, max_rules=5)
        k = random_capacity(rng, g, max_bound=2)
        wider = CapacityFunction({a: k[a] + 1 for a in g.nonterminals})
        b = SearchBudget(max_terminal_len=4)
        small = enumerate_language(g, k, b)
        large = enumerate_language(g, wider, b)
        if large.exhaustive:
            assert set(small.words) <= set(large.words)
