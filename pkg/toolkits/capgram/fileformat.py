"""fileformat.py
Text formats for grammars, nets and partitions.

All three share one token-level syntax: section headers such as `rules:`, whitespace
separated symbols, `key=value` entries, labeled entries ending in `;` and `#` comments.
Parse errors carry the offending line.
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

from lark import Lark, Transformer
from lark.exceptions import UnexpectedInput

from .errors import FileFormatError
from .grammar import EMPTY_MARK, CapacityFunction, Grammar, Rule, validate_grammar
from .petri import CapacityAssignment, Marking, PetriNet
from .regulated import ControlMode, Matrix, RegulatedGrammar, Restriction

HEADERS = (
    "nonterminals", "terminals", "start", "capacity", "rules", "matrices", "mode", "index",
    "places", "transitions", "arcs", "marking", "final",
)
GRAMMAR_SECTIONS = ("nonterminals", "terminals", "start", "capacity", "rules", "matrices", "mode", "index")
NET_SECTIONS = ("places", "transitions", "arcs", "marking", "capacity", "final")

_SYNTAX = r"""
start: _item*
_item: header | symbol | assign | arc | labeled

header: HEADER
symbol: SYMBOL
assign: SYMBOL "=" SYMBOL
arc: SYMBOL _ARROW SYMBOL ["@" SYMBOL] ";"
labeled: SYMBOL ":" _body ";"
_body: production | group | members
production: lhs _ARROW rhs
lhs: SYMBOL+
rhs: SYMBOL+ | EMPTY
group: "(" SYMBOL ("," SYMBOL)* ")"
members: SYMBOL "=" SYMBOL+

HEADER.2: /(%s)[ \t]*:/
_ARROW.3: "->"
EMPTY: "~"
SYMBOL: /[^\s:;,()=#~@]+/
COMMENT: /#[^\n]*/

%%import common.WS
%%ignore WS
%%ignore COMMENT
""" % "|".join(HEADERS)


class _Item(NamedTuple):
    kind: str
    line: int
    label: Optional[str] = None
    values: Tuple = ()


class _ItemCollector(Transformer):
    def start(self, items):
        return items

    def header(self, c):
        (tok,) = c
        return _Item("header", tok.line, str(tok)[:-1].strip())

    def symbol(self, c):
        (tok,) = c
        return _Item("symbol", tok.line, str(tok))

    def assign(self, c):
        key, value = c
        return _Item("assign", key.line, str(key), (str(value),))

    def arc(self, c):
        src, dst, weight = c
        return _Item("arc", src.line, None, (str(src), str(dst), None if weight is None else str(weight)))

    def labeled(self, c):
        label, body = c
        kind, values = body
        return _Item(kind, label.line, str(label), values)

    def production(self, c):
        lhs, rhs = c
        return "production", (lhs, rhs)

    def lhs(self, c):
        return tuple(str(t) for t in c)

    def rhs(self, c):
        if len(c) == 1 and c[0].type == "EMPTY":
            return ()
        return tuple(str(t) for t in c)

    def group(self, c):
        return "group", tuple(str(t) for t in c)

    def members(self, c):
        name, *rest = c
        return "members", (str(name), tuple(str(t) for t in rest))


_parser = Lark(_SYNTAX, parser="lalr", lexer="contextual", transformer=_ItemCollector())


def _items(text: str, path: Optional[str]) -> List[_Item]:
    try:
        return _parser.parse(text)
    except UnexpectedInput as e:
        raise FileFormatError(f"syntax error near column {e.column}", getattr(e, "line", None), path) from e


def _sections(items: Sequence[_Item], allowed: Sequence[str], path: Optional[str]) -> Dict[str, Tuple[int, List[_Item]]]:
    sections: Dict[str, Tuple[int, List[_Item]]] = {}
    current: Optional[str] = None
    for item in items:
        if item.kind == "header":
            if item.label not in allowed:
                raise FileFormatError(f"section {item.label}: is not allowed here", item.line, path)
            if item.label in sections:
                raise FileFormatError(f"section {item.label}: appears twice", item.line, path)
            current = item.label
            sections[current] = (item.line, [])
        elif current is None:
            raise FileFormatError("entry outside of any section", item.line, path)
        else:
            sections[current][1].append(item)
    return sections


def _expect(items: Sequence[_Item], kind: str, section: str, path: Optional[str]) -> None:
    for item in items:
        if item.kind != kind:
            raise FileFormatError(f"unexpected {item.kind} entry in section {section}:", item.line, path)


def _symbols(sections, name: str, path: Optional[str]) -> Tuple[str, ...]:
    if name not in sections:
        return ()
    _, items = sections[name]
    _expect(items, "symbol", name, path)
    return tuple(item.label for item in items)


def _single(sections, name: str, path: Optional[str]) -> Optional[Tuple[str, int]]:
    if name not in sections:
        return None
    line, items = sections[name]
    _expect(items, "symbol", name, path)
    if len(items) != 1:
        raise FileFormatError(f"section {name}: takes exactly one value", line, path)
    return items[0].label, items[0].line


def _natural(text: str, line: int, path: Optional[str], what: str, minimum: int = 0) -> int:
    try:
        value = int(text)
    except ValueError:
        raise FileFormatError(f"{what} must be an integer, got {text!r}", line, path) from None
    if value < minimum:
        raise FileFormatError(f"{what} must be at least {minimum}, got {value}", line, path)
    return value


def _bounds(sections, name: str, declared: Sequence[str], path: Optional[str]) -> Dict[str, Optional[int]]:
    """`capacity:` entries A=3 or A=* over the declared symbols."""
    out: Dict[str, Optional[int]] = {}
    _, items = sections[name]
    _expect(items, "assign", name, path)
    for item in items:
        if item.label not in declared:
            raise FileFormatError(f"capacity for undeclared symbol {item.label}", item.line, path)
        if item.label in out:
            raise FileFormatError(f"capacity for {item.label} given twice", item.line, path)
        value = item.values[0]
        out[item.label] = None if value == "*" else _natural(value, item.line, path, f"capacity of {item.label}", 1)
    return out


def _tokens(sections, name: str, declared: Sequence[str], path: Optional[str]) -> Dict[str, int]:
    out: Dict[str, int] = {}
    _, items = sections[name]
    _expect(items, "assign", name, path)
    for item in items:
        if item.label not in declared:
            raise FileFormatError(f"{name} mentions undeclared place {item.label}", item.line, path)
        out[item.label] = _natural(item.values[0], item.line, path, f"tokens on {item.label}")
    return out


def read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise FileFormatError(f"cannot read file: {e.strerror}", None, path) from e


# --- grammars ---

@dataclass
class GrammarFile:
    grammar: Grammar
    capacity: CapacityFunction
    regulated: Optional[RegulatedGrammar] = None
    has_capacity: bool = False

    @property
    def restriction(self) -> Restriction:
        if self.regulated is not None:
            return self.regulated.restriction
        return Restriction.of_capacity(self.capacity) if self.has_capacity else Restriction.none()


def parse_grammar_text(text: str, path: Optional[str] = None, cf: bool = False) -> GrammarFile:
    sections = _sections(_items(text, path), GRAMMAR_SECTIONS, path)
    nonterminals = _symbols(sections, "nonterminals", path)
    terminals = _symbols(sections, "terminals", path)
    declared = set(nonterminals) | set(terminals)
    start = _single(sections, "start", path)
    if start is None:
        raise FileFormatError("missing section start:", None, path)
    if start[0] not in nonterminals:
        raise FileFormatError(f"start symbol {start[0]} is not a declared nonterminal", start[1], path)

    rules: List[Rule] = []
    labels: Dict[str, int] = {}
    if "rules" in sections:
        _, items = sections["rules"]
        _expect(items, "production", "rules", path)
        for item in items:
            if item.label in labels:
                raise FileFormatError(f"duplicate rule label {item.label} (first on line {labels[item.label]})", item.line, path)
            labels[item.label] = item.line
            lhs, rhs = item.values
            undeclared = [s for s in lhs + rhs if s not in declared]
            if undeclared:
                raise FileFormatError(f"{item.label}: undeclared symbol {undeclared[0]}", item.line, path)
            terminal_lhs = [s for s in lhs if s in terminals]
            if terminal_lhs:
                raise FileFormatError(f"{item.label}: terminal in lhs ({terminal_lhs[0]})", item.line, path)
            if cf and len(lhs) > 1:
                raise FileFormatError(f"{item.label}: lhs length > 1 in a context-free grammar", item.line, path)
            rules.append(Rule(item.label, lhs, rhs))
    matrices_given = "matrices" in sections
    grammar = Grammar(nonterminals, terminals, start[0], tuple(rules), cf_flag=cf or matrices_given)
    report = validate_grammar(grammar)
    if not report.ok:
        raise FileFormatError(f"invalid grammar:\n{report}", None, path)

    has_capacity = "capacity" in sections
    bounds = _bounds(sections, "capacity", nonterminals, path) if has_capacity else {}
    capacity = CapacityFunction({a: bounds.get(a) for a in nonterminals})

    index = _single(sections, "index", path)
    mode = _single(sections, "mode", path)
    if not matrices_given:
        for name, entry in (("mode", mode), ("index", index)):
            if entry is not None:
                raise FileFormatError(f"section {name}: needs a matrices: section", entry[1], path)
        return GrammarFile(grammar, capacity, None, has_capacity)

    matrices: List[Matrix] = []
    seen: Dict[str, int] = {}
    _, items = sections["matrices"]
    _expect(items, "group", "matrices", path)
    for item in items:
        if item.label in seen:
            raise FileFormatError(f"duplicate matrix label {item.label}", item.line, path)
        seen[item.label] = item.line
        unknown = [label for label in item.values if label not in grammar.rule_index]
        if unknown:
            raise FileFormatError(f"matrix {item.label}: unknown rule {unknown[0]}", item.line, path)
        matrices.append(Matrix(item.label, tuple(grammar.rule_index[label] for label in item.values)))
    try:
        control = ControlMode(mode[0]) if mode else ControlMode.MATRIX
    except ValueError:
        raise FileFormatError(f"unknown mode {mode[0]!r}; use matrix, vector or semi-matrix", mode[1], path) from None
    if index is not None and has_capacity:
        raise FileFormatError("give either capacity: or index:, not both", index[1], path)
    if index is not None:
        restriction = Restriction.of_index(_natural(index[0], index[1], path, "index", 1))
    elif has_capacity:
        restriction = Restriction.of_capacity(capacity)
    else:
        restriction = Restriction.none()
    regulated = RegulatedGrammar(grammar, tuple(matrices), control, restriction)
    return GrammarFile(grammar, capacity, regulated, has_capacity)


def parse_grammar_file(path: str, cf: bool = False) -> GrammarFile:
    return parse_grammar_text(read_text(path), str(path), cf)


def _check_label(label: str) -> str:
    if label in HEADERS:
        raise FileFormatError(f"label {label!r} is a section name and cannot be written")
    return label


def _bound_text(b: Optional[int]) -> str:
    return "*" if b is None else str(b)


def format_grammar(
    g: Grammar,
    k: Optional[CapacityFunction] = None,
    regulated: Optional[RegulatedGrammar] = None,
) -> str:
    """Inverse of parse_grammar_text; the capacity section is written whenever `k` is given."""
    lines = [
        f"nonterminals: {' '.join(g.nonterminals)}",
        f"terminals: {' '.join(g.terminals)}",
        f"start: {g.start}",
    ]
    if regulated is not None and regulated.restriction.kind == "capacity" and k is None:
        k = regulated.restriction.capacity
    if k is not None:
        lines.append("capacity: " + " ".join(f"{a}={_bound_text(k[a])}" for a in g.nonterminals))
    lines.append("rules:")
    for r in g.rules:
        rhs = " ".join(r.rhs) if r.rhs else EMPTY_MARK
        lines.append(f"  {_check_label(r.label)}: {' '.join(r.lhs)} -> {rhs};")
    if regulated is not None:
        lines.append("matrices:")
        for m in regulated.matrices:
            lines.append(f"  {_check_label(m.label)}: ({', '.join(m.labels)});")
        lines.append(f"mode: {regulated.mode.value}")
        if regulated.restriction.kind == "index":
            lines.append(f"index: {regulated.restriction.index}")
    return "\n".join(lines) + "\n"


def format_grammar_file(gf: GrammarFile) -> str:
    return format_grammar(gf.grammar, gf.capacity if gf.has_capacity else None, gf.regulated)


# --- nets ---

@dataclass
class NetFile:
    net: PetriNet
    marking: Marking
    capacity: Optional[CapacityAssignment] = None
    final: Optional[Marking] = None


def parse_net_text(text: str, path: Optional[str] = None) -> NetFile:
    sections = _sections(_items(text, path), NET_SECTIONS, path)
    places = _symbols(sections, "places", path)
    transitions = _symbols(sections, "transitions", path)
    nodes = set(places) | set(transitions)
    weights: Dict[Tuple[str, str], int] = {}
    if "arcs" in sections:
        _, items = sections["arcs"]
        _expect(items, "arc", "arcs", path)
        for item in items:
            src, dst, weight = item.values
            for x in (src, dst):
                if x not in nodes:
                    raise FileFormatError(f"arc mentions undeclared node {x}", item.line, path)
            if (src in places) == (dst in places):
                raise FileFormatError(f"arc {src} -> {dst} must join a place and a transition", item.line, path)
            if (src, dst) in weights:
                raise FileFormatError(f"arc {src} -> {dst} given twice", item.line, path)
            weights[(src, dst)] = 1 if weight is None else _natural(weight, item.line, path, "arc weight", 1)
    net = PetriNet(places, transitions, weights)
    marking = Marking.of(net, _tokens(sections, "marking", places, path) if "marking" in sections else {})
    capacity = None
    if "capacity" in sections:
        capacity = CapacityAssignment.of(net, _bounds(sections, "capacity", places, path))
    final = Marking.of(net, _tokens(sections, "final", places, path)) if "final" in sections else None
    return NetFile(net, marking, capacity, final)


def parse_net_file(path: str) -> NetFile:
    return parse_net_text(read_text(path), str(path))


def format_net(
    net: PetriNet,
    marking: Optional[Marking] = None,
    capacity: Optional[CapacityAssignment] = None,
    final: Optional[Marking] = None,
) -> str:
    lines = [
        f"places: {' '.join(net.places)}",
        f"transitions: {' '.join(net.transitions)}",
        "arcs:",
    ]
    for (x, y), w in net.weights.items():
        lines.append(f"  {x} -> {y}{'' if w == 1 else f' @ {w}'};")
    if marking is not None:
        lines.append("marking: " + " ".join(f"{p}={n}" for p, n in marking.tokens.items() if n))
    if capacity is not None:
        lines.append("capacity: " + " ".join(f"{p}={_bound_text(b)}" for p, b in capacity.cap.items()))
    if final is not None:
        lines.append("final: " + " ".join(f"{p}={n}" for p, n in final.tokens.items() if n))
    return "\n".join(lines) + "\n"


def format_net_file(nf: NetFile) -> str:
    return format_net(nf.net, nf.marking, nf.capacity, nf.final)


# --- partitions ---

@dataclass
class PartitionFile:
    blocks: List[Tuple[str, Tuple[str, ...]]] = field(default_factory=list)

    @property
    def labels(self) -> List[Tuple[str, ...]]:
        return [members for _, members in self.blocks]


def parse_partition_text(text: str, path: Optional[str] = None) -> PartitionFile:
    """Lines `part: T1 = r0 r1 r2;`."""
    out = PartitionFile()
    names: Dict[str, int] = {}
    for item in _items(text, path):
        if item.kind != "members" or item.label != "part":
            raise FileFormatError("expected `part: NAME = labels...;`", item.line, path)
        name, members = item.values
        if name in names:
            raise FileFormatError(f"block {name} declared twice", item.line, path)
        names[name] = item.line
        out.blocks.append((name, members))
    return out


def parse_partition_file(path: str) -> PartitionFile:
    return parse_partition_text(read_text(path), str(path))


def format_partition(blocks: Sequence[Sequence[str]], names: Optional[Sequence[str]] = None) -> str:
    names = list(names) if names is not None else [f"T{i}" for i in range(1, len(blocks) + 1)]
    return "".join(f"part: {name} = {' '.join(block)};\n" for name, block in zip(names, blocks))
