import pytest

from toolkits.capgram.errors import FileFormatError
from toolkits.capgram.fileformat import (
    format_grammar,
    format_grammar_file,
    format_net_file,
    format_partition,
    parse_grammar_file,
    parse_grammar_text,
    parse_net_text,
    parse_partition_file,
    parse_partition_text,
)
from toolkits.capgram.grammar import Grammar, Rule
from toolkits.capgram.regulated import ControlMode
from toolkits.capgram.transforms import gs_cb_to_matrix_fin

HEAD = "nonterminals: S A\nterminals: a b\nstart: S\n"

NET = """# two places, one transition
places: p1 p2
transitions: t1
arcs:
  p1 -> t1 @ 2;
  t1 -> p2;
marking: p1=2
capacity: p2=1
final: p2=1
"""


def parse_error(text, **kw):
    with pytest.raises(FileFormatError) as e:
        parse_grammar_text(text, **kw)
    return e.value


def test_parse_sample(abc_cb):
    g = abc_cb.grammar
    assert g.nonterminals == ("S", "A", "B", "C", "D", "E", "F")
    assert g.rule("r2").lhs == ("A", "B")
    assert g.rule("r11").rhs == ()
    assert abc_cb.has_capacity
    assert abc_cb.capacity.is_one
    assert abc_cb.regulated is None
    assert abc_cb.restriction.kind == "capacity"


def test_grammar_round_trip(abc_cb, samples):
    again = parse_grammar_text(format_grammar_file(abc_cb))
    assert again.grammar == abc_cb.grammar
    assert again.capacity == abc_cb.capacity
    vector = parse_grammar_file(str(samples / "vector-copy.gr"))
    again = parse_grammar_text(format_grammar_file(vector))
    assert again.regulated == vector.regulated
    assert again.regulated.mode is ControlMode.VECTOR


def test_generated_grammar_survives_writing(gs_small):
    rg, _ = gs_cb_to_matrix_fin(gs_small.grammar, gs_small.capacity)
    again = parse_grammar_text(format_grammar(rg.base, None, rg))
    assert again.regulated == rg
    assert again.regulated.restriction.index == 6


def test_unbounded_capacity_entry():
    gf = parse_grammar_text(HEAD + "capacity: S=* A=2\nrules:\n  r1: S -> A;\n  r2: A -> a;\n")
    assert gf.capacity["S"] is None
    assert gf.capacity["A"] == 2
    assert not gf.capacity.is_finite


def test_missing_capacity_means_unrestricted():
    gf = parse_grammar_text(HEAD + "rules:\n  r1: S -> a;\n")
    assert not gf.has_capacity
    assert gf.restriction.kind == "none"
    assert gf.capacity["S"] is None


def test_undeclared_symbol():
    e = parse_error(HEAD + "rules:\n  r1: S -> x;\n")
    assert e.line == 5
    assert "r1: undeclared symbol x" in str(e)
    assert str(e).startswith("5: ")


def test_duplicate_label():
    e = parse_error(HEAD + "rules:\n  r1: S -> a;\n  r1: S -> b;\n")
    assert e.line == 6
    assert "duplicate rule label r1 (first on line 5)" in str(e)


def test_zero_capacity():
    e = parse_error(HEAD + "capacity: S=0 A=1\nrules:\n  r1: S -> a;\n")
    assert e.line == 4
    assert "capacity of S must be at least 1, got 0" in str(e)


def test_terminal_in_lhs():
    e = parse_error(HEAD + "rules:\n  r1: a S -> a;\n")
    assert "terminal in lhs (a)" in str(e)


def test_missing_start():
    e = parse_error("nonterminals: S\nterminals: a\nrules:\n  r1: S -> a;\n")
    assert "missing section start:" in str(e)


def test_syntax_error_has_line():
    e = parse_error(HEAD + "rules:\n  r1: S -> (a;\n")
    assert e.line == 5
    assert "syntax error" in str(e)


def test_context_free_flag(samples):
    with pytest.raises(FileFormatError) as e:
        parse_grammar_file(str(samples / "ex31.gr"), cf=True)
    assert "lhs length > 1" in str(e.value)
    assert str(e.value).startswith(str(samples / "ex31.gr") + ":")
    assert parse_grammar_file(str(samples / "anbn.gr"), cf=True).grammar.cf_flag


def test_regulated_sections():
    rules = "rules:\n  r1: S -> A;\n  r2: A -> a;\nmatrices:\n  m1: (r1, r2);\n"
    assert "unknown mode 'parallel'" in str(parse_error(HEAD + rules + "mode: parallel\n"))
    both = parse_error(HEAD + "capacity: S=1 A=1\n" + rules + "index: 2\n")
    assert "not both" in str(both)
    assert "needs a matrices: section" in str(parse_error(HEAD + "rules:\n  r1: S -> a;\nmode: vector\n"))
    assert "unknown rule r3" in str(parse_error(HEAD + rules.replace("(r1, r2)", "(r1, r3)")))
    gf = parse_grammar_text(HEAD + rules + "mode: semi-matrix\nindex: 2\n")
    assert gf.regulated.mode is ControlMode.SEMI_MATRIX
    assert gf.restriction.index == 2


def test_duplicate_section():
    e = parse_error(HEAD + "start: A\nrules:\n  r1: S -> a;\n")
    assert e.line == 4
    assert "appears twice" in str(e)


def test_section_name_cannot_be_written_as_label():
    g = Grammar(("S",), ("a",), "S", (Rule.of("rules", "S", "a"),))
    with pytest.raises(FileFormatError):
        format_grammar(g)


def test_missing_file(tmp_path):
    with pytest.raises(FileFormatError) as e:
        parse_grammar_file(str(tmp_path / "nope.gr"))
    assert "cannot read file" in str(e.value)


def test_parse_net():
    nf = parse_net_text(NET)
    assert nf.net.places == ("p1", "p2")
    assert nf.net.weight("p1", "t1") == 2
    assert nf.net.weight("t1", "p2") == 1
    assert nf.marking["p1"] == 2
    assert nf.capacity["p1"] is None
    assert nf.capacity["p2"] == 1
    assert nf.final["p2"] == 1
    again = parse_net_text(format_net_file(nf))
    assert again.net == nf.net
    assert again.marking == nf.marking
    assert again.capacity == nf.capacity
    assert again.final == nf.final


def test_net_errors():
    with pytest.raises(FileFormatError) as e:
        parse_net_text("places: p1 p2\ntransitions: t1\narcs:\n  p1 -> p2;\n")
    assert e.value.line == 4
    assert "must join a place and a transition" in str(e.value)
    with pytest.raises(FileFormatError) as e:
        parse_net_text("places: p1\ntransitions: t1\narcs:\n  p1 -> t9;\n")
    assert "undeclared node t9" in str(e.value)
    with pytest.raises(FileFormatError):
        parse_net_text("places: p1\ntransitions: t1\nmarking: p1=-1\n")
    with pytest.raises(FileFormatError):
        parse_net_text("places: p1\nrules:\n")


def test_partition(samples):
    pf = parse_partition_file(str(samples / "ex-sec2.part"))
    assert [name for name, _ in pf.blocks] == ["T1", "T2", "T3", "T4"]
    assert pf.labels == [("r0",), ("r1", "r2"), ("r3", "r4"), ("r5", "r6")]
    assert parse_partition_text(format_partition(pf.labels)).labels == pf.labels


def test_partition_errors():
    with pytest.raises(FileFormatError):
        parse_partition_text("block: T1 = r0;\n")
    with pytest.raises(FileFormatError) as e:
        parse_partition_text("part: T1 = r0;\npart: T1 = r1;\n")
    assert e.value.line == 2
