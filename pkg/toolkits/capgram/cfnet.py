"""cfnet.py
cf Petri nets built from context-free grammars, their h/c/s extensions with control
places, and the synchronized grammar/net derivation engine.

Names: the place of nonterminal A is "p_A", the transition of rule r is "t_r"; control
places are "q<i>_<j>" (and "q0" for the shared place of an s-net).
"""
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from .derivation import EnumerationResult, SearchBudget, SearchOutcome, breadth_first
from .errors import CapacityError, GrammarError, PartitionError
from .grammar import (
    CapacityFunction,
    Grammar,
    SententialForm,
    Word,
    apply_rule_at,
    ensure_valid,
    fresh_symbol,
    occurrences,
)
from .logger import get_logger
from .petri import (
    CapacityAssignment,
    Marking,
    PathSpec,
    PetriNet,
    fire_within,
    validate_paths,
)

logger = get_logger()

NET_KINDS = ("h", "c", "s")
CAPACITY_MODES = ("weak", "strong")


def place_name(nonterminal: str) -> str:
    return f"p_{nonterminal}"


def transition_name(label: str) -> str:
    return f"t_{label}"


@dataclass(frozen=True, eq=False)
class CfNet:
    """N = (P, T, F, φ, β, γ, ι) for a context-free grammar."""

    grammar: Grammar
    net: PetriNet
    place_label: Mapping[str, str]
    transition_label: Mapping[str, str]
    initial: Marking

    @property
    def place_of(self) -> Dict[str, str]:
        """β⁻¹: nonterminal -> place."""
        return {a: p for p, a in self.place_label.items()}

    @property
    def transition_of(self) -> Dict[str, str]:
        """γ⁻¹: rule label -> transition."""
        return {r: t for t, r in self.transition_label.items()}

    @property
    def grammar_places(self) -> Tuple[str, ...]:
        return tuple(self.place_label)


def build_cf_net(g: Grammar) -> CfNet:
    ensure_valid(g)
    non_cf = [r.label for r in g.rules if not r.is_context_free]
    if non_cf:
        raise GrammarError(f"cf nets need a context-free grammar; offending rules: {', '.join(non_cf)}")
    place_label = {place_name(a): a for a in g.nonterminals}
    transition_label = {transition_name(r.label): r.label for r in g.rules}
    if len(place_label) != len(g.nonterminals) or len(transition_label) != len(g.rules):
        raise GrammarError("nonterminal or rule names collide after prefixing")
    weights: Dict[Tuple[str, str], int] = {}
    for r in g.rules:
        t = transition_name(r.label)
        weights[(place_name(r.lhs[0]), t)] = 1
        for x in r.rhs:
            if x in g.nonterminal_set:
                arc = (t, place_name(x))
                weights[arc] = weights.get(arc, 0) + 1
    net = PetriNet(tuple(place_label), tuple(transition_label), weights)
    initial = Marking.of(net, {place_name(g.start): 1})
    logger.info(f"Built cf net with {len(net.places)} places and {len(net.transitions)} transitions")
    return CfNet(g, net, place_label, transition_label, initial)


def rule_profiles(cn: CfNet) -> Dict[str, Tuple[str, Dict[str, int]]]:
    """Read each rule back from the net: label -> (lhs nonterminal, nonterminal counts of rhs)."""
    out: Dict[str, Tuple[str, Dict[str, int]]] = {}
    for t, label in cn.transition_label.items():
        (p_in,) = cn.net.pre(t)
        counts = {cn.place_label[p]: w for p, w in cn.net.post(t).items() if p in cn.place_label}
        out[label] = (cn.place_label[p_in], counts)
    return out


@dataclass(frozen=True, eq=False)
class CapacitatedNet:
    cf: CfNet
    capacity: CapacityAssignment

    @property
    def net(self) -> PetriNet:
        return self.cf.net


def attach_capacity(cn: CfNet, k: CapacityFunction) -> CapacitatedNet:
    """cap(β⁻¹(A)) = κ(A); κ must be finite on every nonterminal."""
    caps: Dict[str, int] = {}
    for p, a in cn.place_label.items():
        if a not in k.bounds:
            raise CapacityError(f"capacity undefined for {a}")
        if k[a] is None:
            raise CapacityError(f"capacity of {a} is unbounded; a finite bound is required")
        caps[p] = k[a]
    return CapacitatedNet(cn, CapacityAssignment(caps))


@dataclass(frozen=True, eq=False)
class ExtendedNet:
    kind: str
    base: CfNet
    net: PetriNet
    control_places: Tuple[str, ...]
    zeta: Mapping[str, Optional[str]]
    initial: Marking
    final: Marking
    partition: Tuple[Tuple[str, ...], ...]
    paths: Tuple[PathSpec, ...]
    shared: Optional[str] = None

    @property
    def grammar(self) -> Grammar:
        return self.base.grammar


def _normalize_partition(cn: CfNet, partition: Sequence[Sequence[str]]) -> Tuple[Tuple[str, ...], ...]:
    by_label = cn.transition_of
    blocks: List[Tuple[str, ...]] = []
    seen: Dict[str, int] = {}
    for i, block in enumerate(partition, start=1):
        if not block:
            raise PartitionError(f"block T{i} is empty")
        ts = []
        for item in block:
            t = by_label.get(item, item if item in cn.transition_label else None)
            if t is None:
                raise PartitionError(f"block T{i}: unknown rule or transition {item!r}")
            if t in seen:
                raise PartitionError(f"{t} occurs in T{seen[t]} and T{i}")
            seen[t] = i
            ts.append(t)
        blocks.append(tuple(ts))
    missing = [t for t in cn.net.transitions if t not in seen]
    if missing:
        raise PartitionError(f"partition misses {', '.join(missing)}")
    return tuple(blocks)


def build_extended_net(g: Grammar, kind: str, partition: Sequence[Sequence[str]]) -> ExtendedNet:
    """Thread fresh control places through each block T_i in declared order.

    h: chain t1 q t2 q ... tk; c: cycle q1 t1 q2 ... tk q1 with the token on q1;
    s: every cycle passes through the shared place q0 holding the token.
    """
    if kind not in NET_KINDS:
        raise PartitionError(f"unknown net kind {kind!r}")
    cn = build_cf_net(g)
    blocks = _normalize_partition(cn, partition)
    taken = set(cn.net.places) | set(cn.net.transitions)

    def new_place(base: str) -> str:
        name = fresh_symbol(base, taken)
        taken.add(name)
        control.append(name)
        return name

    control: List[str] = []
    weights = dict(cn.net.weights)
    paths: List[PathSpec] = []
    tokens: Dict[str, int] = {}
    shared = new_place("q0") if kind == "s" else None
    if shared is not None:
        tokens[shared] = 1
    for i, block in enumerate(blocks, start=1):
        k = len(block)
        if kind == "h":
            qs = [new_place(f"q{i}_{j}") for j in range(1, k)]
            elements: List[str] = [block[0]]
            for q, t in zip(qs, block[1:]):
                elements += [q, t]
            paths.append(PathSpec("chain", tuple(elements)))
        else:
            if kind == "c":
                qs = [new_place(f"q{i}_{j}") for j in range(1, k + 1)]
                tokens[qs[0]] = 1
            else:
                qs = [shared] + [new_place(f"q{i}_{j}") for j in range(1, k)]
            elements = []
            for q, t in zip(qs, block):
                elements += [q, t]
            elements.append(qs[0])
            paths.append(PathSpec("cycle", tuple(elements)))
        for a, b in zip(paths[-1].elements, paths[-1].elements[1:]):
            weights[(a, b)] = 1
    net = PetriNet(cn.net.places + tuple(control), cn.net.transitions, weights)
    zeta: Dict[str, Optional[str]] = dict(cn.place_label)
    zeta.update({q: None for q in control})
    initial = Marking.of(net, {**cn.initial.tokens, **tokens})
    final = Marking.of(net, tokens)
    report = validate_paths(net, paths, shared=shared, partition=blocks)
    if not report.ok:
        raise PartitionError(f"control structure is inconsistent:\n{report}")
    logger.info(f"Built {kind}-net with {len(control)} control places over {len(blocks)} blocks")
    return ExtendedNet(kind, cn, net, tuple(control), zeta, initial, final, blocks, tuple(paths), shared)


@dataclass(frozen=True, eq=False)
class CapacityMode:
    """weak: finite caps on grammar places only; strong: finite caps on every place."""

    mode: str
    caps: CapacityAssignment

    def __post_init__(self) -> None:
        if self.mode not in CAPACITY_MODES:
            raise CapacityError(f"unknown capacity mode {self.mode!r}")


def capacity_mode(
    target: Union[CfNet, ExtendedNet],
    k: CapacityFunction,
    mode: str = "weak",
    control_capacity: int = 1,
    control_caps: Optional[Mapping[str, int]] = None,
) -> CapacityMode:
    """Caps from κ on the grammar places; under strong capacity every control place gets
    `control_capacity` unless `control_caps` names it."""
    base = target.base if isinstance(target, ExtendedNet) else target
    net = target.net
    caps: Dict[str, Optional[int]] = dict(attach_capacity(base, k).capacity.cap)
    control = target.control_places if isinstance(target, ExtendedNet) else ()
    named = dict(control_caps or {})
    unknown = sorted(set(named) - set(control))
    if unknown:
        raise CapacityError(f"not control places: {', '.join(unknown)}")
    for q in control:
        if mode == "strong":
            caps[q] = named.get(q, control_capacity)
        else:
            caps[q] = None
    return CapacityMode(mode, CapacityAssignment.of(net, caps))


def _check_capacity_mode(cm: CapacityMode, grammar_places: Sequence[str], net: PetriNet) -> None:
    grammar_set = set(grammar_places)
    for p in net.places:
        b = cm.caps[p]
        if p in grammar_set and b is None:
            raise CapacityError(f"{cm.mode} capacity needs a finite bound on {p}")
        if p not in grammar_set:
            if cm.mode == "weak" and b is not None:
                raise CapacityError(f"weak capacity constrains only grammar places, not {p}")
            if cm.mode == "strong" and b is None:
                raise CapacityError(f"strong capacity needs a finite bound on control place {p}")


@dataclass(frozen=True)
class ControlledRun:
    """A synchronized derivation: the grammar applies γ(t) while the net fires t."""

    steps: Tuple[Tuple[str, int], ...]
    forms: Tuple[SententialForm, ...]
    markings: Tuple[Marking, ...]

    @property
    def transitions(self) -> Tuple[str, ...]:
        return tuple(t for t, _ in self.steps)

    def labels(self, cn: CfNet) -> Tuple[str, ...]:
        return tuple(cn.transition_label[t] for t in self.transitions)


def bisimulation_holds(run: ControlledRun, cn: CfNet) -> bool:
    """marking(β⁻¹(A)) = |form|_A for every nonterminal A at every step."""
    for w, m in zip(run.forms, run.markings):
        for p, a in cn.place_label.items():
            if m[p] != w.count(a):
                return False
    return True


@dataclass
class ControlledEnumeration(EnumerationResult):
    max_control_tokens: int = 0


NetTarget = Union[CfNet, CapacitatedNet, ExtendedNet]


class _ControlledSearch:
    def __init__(self, g: Grammar, target: NetTarget, cm: Optional[CapacityMode], b: SearchBudget) -> None:
        if isinstance(target, ExtendedNet):
            self.cf, self.final, self.control = target.base, target.final, set(target.control_places)
        elif isinstance(target, CapacitatedNet):
            self.cf, self.final, self.control = target.cf, None, set()
        else:
            self.cf, self.final, self.control = target, None, set()
        self.net = target.net
        self.initial = target.initial if isinstance(target, ExtendedNet) else self.cf.initial
        if cm is not None:
            _check_capacity_mode(cm, self.cf.grammar_places, self.net)
            self.caps: Optional[CapacityAssignment] = cm.caps
        elif isinstance(target, CapacitatedNet):
            self.caps = target.capacity
        else:
            self.caps = None
        if self.cf.grammar.rules != g.rules or self.cf.grammar.start != g.start:
            raise GrammarError("the net was not built from this grammar")
        self.g = g
        self.b = b
        bound = None
        if self.caps is not None and all(self.caps[p] is not None for p in self.cf.grammar_places):
            bound = sum(self.caps[p] for p in self.cf.grammar_places)
        self.limit, self.lossless = b.form_limit(bound, g.is_non_contracting)
        self.lossy = False
        self.max_control_tokens = max((self.initial[q] for q in self.control), default=0)
        self.rule_of = {t: g.rule(label) for t, label in self.cf.transition_label.items()}

    def expand(self, state):
        w, m = state
        for t in self.net.transitions:
            nxt_m = fire_within(self.net, m, t, self.caps)
            if nxt_m is None:
                continue
            r = self.rule_of[t]
            for pos in occurrences(w, r.lhs):
                f = apply_rule_at(w, r, pos)
                if f.terminal_count > self.b.max_terminal_len:
                    continue
                if len(f) > self.limit:
                    if not self.lossless:
                        self.lossy = True
                    continue
                for q in self.control:
                    if nxt_m[q] > self.max_control_tokens:
                        self.max_control_tokens = nxt_m[q]
                yield (t, pos), (f, nxt_m)

    def accept(self, state) -> Optional[Word]:
        w, m = state
        if not w.is_terminal:
            return None
        if self.final is not None and m != self.final:
            return None
        return w.symbols

    def run(self) -> SearchOutcome:
        start = (self.g.axiom(), self.initial)
        if self.caps is not None and not self.caps.valid(self.initial):
            return SearchOutcome({}, True, 1)
        return breadth_first(start, self.expand, self.accept, self.b.max_states, self.b.dedupe)


def enumerate_controlled(
    g: Grammar,
    target: NetTarget,
    cm: Optional[CapacityMode] = None,
    b: SearchBudget = SearchBudget(),
    with_witnesses: bool = False,
) -> ControlledEnumeration:
    """Words with a successful synchronized derivation, every marking valid under the caps.

    Extended nets accept at marking τ; a capacitated cf net accepts any terminal form.
    """
    search = _ControlledSearch(g, target, cm, b)
    outcome = search.run()
    exhaustive = outcome.closed and not search.lossy
    words = g.sort_words(outcome.found)
    logger.info(
        f"Enumerated {len(words)} net-controlled words from {outcome.states} states "
        f"(exhaustive={exhaustive})"
    )
    witnesses = {}
    if with_witnesses:
        for word in words:
            steps, states = SearchOutcome.path(outcome.found[word])
            witnesses[word] = ControlledRun(
                tuple(steps), tuple(w for w, _ in states), tuple(m for _, m in states)
            )
    return ControlledEnumeration(
        words, exhaustive, outcome.states, witnesses, max_control_tokens=search.max_control_tokens
    )


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _join_lines(parts: Sequence[str]) -> str:
    # DOT line break inside a label
    return "\\n".join(parts)


def export_dot(
    target: Union[PetriNet, NetTarget],
    marking: Optional[Marking] = None,
    capacity: Optional[CapacityAssignment] = None,
) -> str:
    """DOT digraph: places as circles, transitions as boxes, weights > 1 as edge labels.

    Nodes and edges are emitted in sorted order so the text is stable for a fixed net.
    """
    rule_text: Dict[str, str] = {}
    if isinstance(target, PetriNet):
        net = target
    else:
        net = target.net
        if isinstance(target, CapacitatedNet):
            cf = target.cf
        elif isinstance(target, ExtendedNet):
            cf = target.base
        else:
            cf = target
        for t, label in cf.transition_label.items():
            rule_text[t] = str(cf.grammar.rule(label))
        if marking is None:
            marking = target.initial if isinstance(target, ExtendedNet) else cf.initial
        if capacity is None and isinstance(target, CapacitatedNet):
            capacity = target.capacity
    lines = ["digraph net {", "  rankdir=LR;"]
    for p in sorted(net.places):
        parts = [_quote(p)[1:-1]]
        if capacity is not None and capacity[p] is not None:
            parts.append(f"cap={capacity[p]}")
        if marking is not None and marking[p]:
            parts.append(f"m={marking[p]}")
        lines.append(f"  {_quote(p)} [shape=circle, label=\"{_join_lines(parts)}\"];")
    for t in sorted(net.transitions):
        parts = [_quote(t)[1:-1]]
        if t in rule_text:
            parts.append(_quote(rule_text[t])[1:-1])
        lines.append(f"  {_quote(t)} [shape=box, label=\"{_join_lines(parts)}\"];")
    for (x, y), w in sorted(net.weights.items()):
        attr = f" [label=\"{w}\"]" if w > 1 else ""
        lines.append(f"  {_quote(x)} -> {_quote(y)}{attr};")
    lines.append("}")
    return "\n".join(lines) + "\n"
