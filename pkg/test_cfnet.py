import pytest

from toolkits.capgram.cfnet import (
    attach_capacity,
    bisimulation_holds,
    build_cf_net,
    build_extended_net,
    capacity_mode,
    enumerate_controlled,
    export_dot,
    rule_profiles,
)
from toolkits.capgram.derivation import SearchBudget, enumerate_language
from toolkits.capgram.errors import CapacityError, GrammarError, PartitionError
from toolkits.capgram.fileformat import parse_partition_file
from toolkits.capgram.grammar import CapacityFunction, Grammar, Rule
from toolkits.capgram.petri import Marking, run_sequence


@pytest.fixture
def partition(samples):
    return parse_partition_file(str(samples / "ex-sec2.part")).labels


def test_build_cf_net(twin):
    cn = build_cf_net(twin.grammar)
    net = cn.net
    assert net.places == ("p_S", "p_A", "p_B")
    assert len(net.transitions) == 7
    assert net.pre("t_r0") == {"p_S": 1}
    assert net.post("t_r0") == {"p_A": 1, "p_B": 1}
    assert net.post("t_r1") == {}
    assert net.post("t_r3") == {"p_A": 1}
    assert cn.initial == Marking.of(net, {"p_S": 1})
    assert cn.place_of["A"] == "p_A"
    assert cn.transition_label["t_r5"] == "r5"


def test_arc_weight_counts_occurrences():
    g = Grammar(("S", "A"), ("a",), "S", (Rule.of("r1", "S", "A a A"), Rule.of("r2", "A", "a")))
    cn = build_cf_net(g)
    assert cn.net.weight("t_r1", "p_A") == 2
    assert rule_profiles(cn) == {"r1": ("S", {"A": 2}), "r2": ("A", {})}


def test_cf_net_needs_context_free_rules(abc_cb):
    with pytest.raises(GrammarError):
        build_cf_net(abc_cb.grammar)


def test_run_on_cf_net(twin):
    cn = build_cf_net(twin.grammar)
    m = run_sequence(cn.net, cn.initial, ["t_r0"])
    assert m == Marking.of(cn.net, {"p_A": 1, "p_B": 1})


def test_attach_capacity(twin):
    cn = build_cf_net(twin.grammar)
    capped = attach_capacity(cn, twin.capacity)
    assert capped.capacity["p_A"] == 1
    with pytest.raises(CapacityError):
        attach_capacity(cn, CapacityFunction({"S": 1, "A": None, "B": 1}))
    with pytest.raises(CapacityError):
        attach_capacity(cn, CapacityFunction({"S": 1}))


def test_capacitated_net_matches_capacity_bounded_grammar(twin):
    g, k = twin.grammar, twin.capacity
    b = SearchBudget(max_terminal_len=4)
    capped = attach_capacity(build_cf_net(g), k)
    controlled = enumerate_controlled(g, capped, b=b, with_witnesses=True)
    plain = enumerate_language(g, k, b)
    assert controlled.words == plain.words
    assert len(controlled.words) == 31
    assert controlled.exhaustive
    for run in controlled.witnesses.values():
        assert bisimulation_holds(run, capped.cf)


def test_s_net_language(twin, partition):
    en = build_extended_net(twin.grammar, "s", partition)
    assert en.shared == "q0"
    assert en.initial["q0"] == 1
    assert en.final == Marking.of(en.net, {"q0": 1})
    cm = capacity_mode(en, twin.capacity)
    result = enumerate_controlled(twin.grammar, en, cm, SearchBudget(max_terminal_len=4))
    expected = [tuple(w) for w in ("", "aa", "bb", "aaaa", "abab", "baba", "bbbb")]
    assert result.words == expected
    assert result.exhaustive
    assert result.max_control_tokens == 1


def test_c_net_language(twin, partition):
    g, k = twin.grammar, twin.capacity
    en = build_extended_net(g, "c", partition)
    assert len(en.control_places) == 7
    b = SearchBudget(max_terminal_len=4)
    words = set(enumerate_controlled(g, en, capacity_mode(en, k), b).words)
    assert {tuple("abab"), tuple("abba"), tuple("aa"), ()} <= words
    assert tuple("ab") not in words
    assert all(len(w) % 2 == 0 for w in words)
    assert words <= set(enumerate_language(g, k, b).words)


def test_weak_and_strong_capacity_agree_on_cycles(twin, partition):
    g, k = twin.grammar, twin.capacity
    b = SearchBudget(max_terminal_len=4)
    for kind in ("c", "s"):
        en = build_extended_net(g, kind, partition)
        weak = enumerate_controlled(g, en, capacity_mode(en, k, "weak"), b)
        strong = enumerate_controlled(g, en, capacity_mode(en, k, "strong"), b)
        assert weak.words == strong.words
        assert weak.max_control_tokens <= 1


def test_h_net(twin, partition):
    g, k = twin.grammar, twin.capacity
    en = build_extended_net(g, "h", partition)
    assert en.final == Marking.of(en.net, {})
    words = set(enumerate_controlled(g, en, capacity_mode(en, k), SearchBudget(max_terminal_len=4)).words)
    assert {(), tuple("aa"), tuple("abab")} <= words
    assert tuple("ab") not in words


def test_capacity_modes(twin, partition):
    en = build_extended_net(twin.grammar, "c", partition)
    weak = capacity_mode(en, twin.capacity, "weak")
    strong = capacity_mode(en, twin.capacity, "strong", control_capacity=2)
    q = en.control_places[0]
    assert weak.caps[q] is None
    assert strong.caps[q] == 2
    assert weak.caps["p_A"] == strong.caps["p_A"] == 1


def test_partition_errors(twin):
    g = twin.grammar
    with pytest.raises(PartitionError):
        build_extended_net(g, "c", [["r0"], ["r1", "r2"]])
    with pytest.raises(PartitionError):
        build_extended_net(g, "c", [["r0", "r0"], ["r1", "r2", "r3", "r4", "r5", "r6"]])
    with pytest.raises(PartitionError):
        build_extended_net(g, "c", [["r0"], [], ["r1", "r2", "r3", "r4", "r5", "r6"]])
    with pytest.raises(PartitionError):
        build_extended_net(g, "c", [["r0", "r9"], ["r1", "r2", "r3", "r4", "r5", "r6"]])
    with pytest.raises(PartitionError):
        build_extended_net(g, "x", [["r0", "r1", "r2", "r3", "r4", "r5", "r6"]])


def test_partition_accepts_transition_names(twin):
    en = build_extended_net(twin.grammar, "h", [["t_r0"], ["r1", "r2", "r3", "r4", "r5", "r6"]])
    assert en.partition[1] == ("t_r1", "t_r2", "t_r3", "t_r4", "t_r5", "t_r6")


def test_export_dot(twin):
    capped = attach_capacity(build_cf_net(twin.grammar), twin.capacity)
    dot = export_dot(capped)
    lines = dot.splitlines()
    assert lines[0] == "digraph net {"
    assert lines[-1] == "}"
    assert '  "p_S" [shape=circle, label="p_S\\ncap=1\\nm=1"];' in lines
    assert '  "p_A" [shape=circle, label="p_A\\ncap=1"];' in lines
    assert '  "t_r0" [shape=box, label="t_r0\\nr0: S -> A B"];' in lines
    assert '  "t_r0" -> "p_A";' in lines
    assert export_dot(capped) == dot


def test_export_dot_weights():
    g = Grammar(("S", "A"), ("a",), "S", (Rule.of("r1", "S", "A A"), Rule.of("r2", "A", "a")))
    dot = export_dot(build_cf_net(g))
    assert '  "t_r1" -> "p_A" [label="2"];' in dot


def test_c_net_cycles_fire_in_order(twin, partition):
    g, k = twin.grammar, twin.capacity
    en = build_extended_net(g, "c", partition)
    result = enumerate_controlled(g, en, capacity_mode(en, k), SearchBudget(max_terminal_len=4), with_witnesses=True)
    assert result.witnesses
    for run in result.witnesses.values():
        counts = {t: 0 for t in en.net.transitions}
        for t, m in zip((None,) + run.transitions, run.markings):
            if t is not None:
                counts[t] += 1
            for block, path in zip(en.partition, en.paths):
                assert sum(m[q] for q in path.places(en.net)) == 1
                fired = [counts[t] for t in block]
                assert all(x >= y for x, y in zip(fired, fired[1:]))
                assert fired[-1] >= fired[0] - 1
        for block in en.partition:
            assert len({counts[t] for t in block}) == 1


def test_control_caps_override_strong_capacity(twin, partition):
    en = build_extended_net(twin.grammar, "c", partition)
    cm = capacity_mode(en, twin.capacity, "strong", control_caps={"q3_2": 2})
    assert cm.caps["q3_2"] == 2
    assert cm.caps["q3_1"] == 1
    weak = capacity_mode(en, twin.capacity, "weak", control_caps={"q3_2": 2})
    assert weak.caps["q3_2"] is None
    with pytest.raises(CapacityError):
        capacity_mode(en, twin.capacity, "strong", control_caps={"p_A": 2})
