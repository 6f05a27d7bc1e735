"""regulated.py
Matrix, vector and semi-matrix grammars, optionally restricted by capacity or index.

Control is kept as a sorted tuple of open matrix instances (matrix index, next rule position):
- matrix mode: at most one open instance, which must be finished before another starts;
- vector mode: any number (capped by max_open) of interleaved instances;
- semi-matrix mode: per matrix at most `semi_streams` running streams, each cycling through
  the matrix; a stream back at position 0 is idle.
A derivation is complete when nothing is open.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

from .derivation import (
    EnumerationResult,
    SearchBudget,
    SearchOutcome,
    breadth_first,
)
from .errors import GrammarError, ValidationReport
from .grammar import (
    CapacityFunction,
    Grammar,
    Rule,
    SententialForm,
    Word,
    apply_rule_at,
    capacity_ok,
    occurrences,
    validate_grammar,
)
from .logger import get_logger

logger = get_logger()

ControlState = Tuple[Tuple[int, int], ...]
EMPTY_CONTROL: ControlState = ()


class ControlMode(Enum):
    MATRIX = "matrix"
    VECTOR = "vector"
    SEMI_MATRIX = "semi-matrix"


@dataclass(frozen=True)
class Matrix:
    label: str
    rules: Tuple[Rule, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "rules", tuple(self.rules))
        if not self.rules:
            raise GrammarError(f"matrix {self.label} is empty")
        for r in self.rules:
            if not r.is_context_free:
                raise GrammarError(f"matrix {self.label}: rule {r.label} is not context-free")

    @property
    def labels(self) -> Tuple[str, ...]:
        return tuple(r.label for r in self.rules)

    def __str__(self) -> str:
        return f"{self.label}: ({', '.join(self.labels)})"


@dataclass(frozen=True)
class Restriction:
    kind: str = "none"
    capacity: Optional[CapacityFunction] = None
    index: Optional[int] = None

    @classmethod
    def none(cls) -> "Restriction":
        return cls()

    @classmethod
    def of_capacity(cls, k: CapacityFunction) -> "Restriction":
        return cls("capacity", capacity=k)

    @classmethod
    def of_index(cls, k: int) -> "Restriction":
        if k < 1:
            raise GrammarError("index bound must be at least 1")
        return cls("index", index=k)

    def admits(self, w: SententialForm) -> bool:
        if self.kind == "capacity":
            return capacity_ok(w, self.capacity)
        if self.kind == "index":
            return w.nonterminal_count <= self.index
        return True


@dataclass(frozen=True)
class RegulatedGrammar:
    base: Grammar
    matrices: Tuple[Matrix, ...]
    mode: ControlMode = ControlMode.MATRIX
    restriction: Restriction = field(default_factory=Restriction)

    def __post_init__(self) -> None:
        object.__setattr__(self, "matrices", tuple(self.matrices))

    @classmethod
    def from_grammar(
        cls,
        g: Grammar,
        mode: ControlMode = ControlMode.MATRIX,
        restriction: Optional[Restriction] = None,
    ) -> "RegulatedGrammar":
        """Every rule as a singleton matrix; matrix mode then behaves like the plain grammar."""
        matrices = tuple(Matrix(f"m_{r.label}", (r,)) for r in g.rules)
        return cls(g, matrices, mode, restriction or Restriction.none())

    def matrix(self, label: str) -> Matrix:
        for m in self.matrices:
            if m.label == label:
                return m
        raise GrammarError(f"unknown matrix {label!r}")


def validate_regulated(g: RegulatedGrammar) -> ValidationReport:
    report = validate_grammar(g.base)
    for r in g.base.rules:
        if not r.is_context_free:
            report.add(f"{r.label}: regulated grammars need context-free rules")
    labels = set()
    for m in g.matrices:
        if m.label in labels:
            report.add(f"duplicate matrix label {m.label}")
        labels.add(m.label)
        for r in m.rules:
            if g.base.rule_index.get(r.label) != r:
                report.add(f"matrix {m.label}: rule {r.label} is not a rule of the grammar")
    if g.restriction.kind == "capacity":
        report.extend(g.restriction.capacity.validate_for(g.base))
    return report


class RegulatedSuccessor(NamedTuple):
    rule: Rule
    position: int
    form: SententialForm
    control: ControlState
    matrix: str


class _RegulatedSearch:
    def __init__(
        self,
        g: RegulatedGrammar,
        b: SearchBudget,
        max_open: int = 8,
        semi_streams: int = 1,
        index_bound: Optional[int] = None,
    ) -> None:
        self.g = g
        self.b = b
        self.max_open = max_open
        self.semi_streams = semi_streams
        self.index_bound = index_bound
        bound = None
        r = g.restriction
        if r.kind == "capacity" and r.capacity.is_finite:
            bound = r.capacity.total()
        elif r.kind == "index":
            bound = r.index
        if index_bound is not None:
            bound = index_bound if bound is None else min(bound, index_bound)
        self.limit, self.lossless = b.form_limit(bound, g.base.is_non_contracting)
        self.lossy = False
        self.capped = False

    def _apply(self, w: SententialForm, r: Rule) -> List[Tuple[int, SententialForm]]:
        out = []
        for pos in occurrences(w, r.lhs):
            nxt = apply_rule_at(w, r, pos)
            if self.g.restriction.admits(nxt):
                out.append((pos, nxt))
        return out

    @staticmethod
    def _advance(cs: ControlState, slot: int, m: Matrix) -> ControlState:
        i, pos = cs[slot]
        rest = cs[:slot] + cs[slot + 1:]
        if pos + 1 < len(m.rules):
            rest = rest + ((i, pos + 1),)
        return tuple(sorted(rest))

    def _may_open(self, cs: ControlState, i: int) -> bool:
        mode = self.g.mode
        if mode is ControlMode.MATRIX:
            return not cs
        if mode is ControlMode.VECTOR:
            if len(cs) < self.max_open:
                return True
            # a one-rule matrix opens and closes in the same step
            if len(self.g.matrices[i].rules) == 1:
                return True
            self.capped = True
            return False
        return sum(1 for j, _ in cs if j == i) < self.semi_streams

    def successors(self, w: SententialForm, cs: ControlState) -> List[RegulatedSuccessor]:
        out: List[RegulatedSuccessor] = []
        matrices = self.g.matrices
        seen_slots = set()
        for slot, (i, pos) in enumerate(cs):
            if (i, pos) in seen_slots:
                continue
            seen_slots.add((i, pos))
            m = matrices[i]
            r = m.rules[pos]
            nxt_cs = self._advance(cs, slot, m)
            for p, nxt in self._apply(w, r):
                out.append(RegulatedSuccessor(r, p, nxt, nxt_cs, m.label))
        present = set(w.symbols)
        for i, m in enumerate(matrices):
            r = m.rules[0]
            if r.lhs[0] not in present:
                continue
            if not self._may_open(cs, i):
                continue
            opened = tuple(sorted(cs + ((i, 0),)))
            nxt_cs = self._advance(opened, opened.index((i, 0)), m)
            for p, nxt in self._apply(w, r):
                out.append(RegulatedSuccessor(r, p, nxt, nxt_cs, m.label))
        return out

    def expand(self, state):
        w, cs = state
        for s in self.successors(w, cs):
            f = s.form
            if f.terminal_count > self.b.max_terminal_len:
                continue
            if self.index_bound is not None and f.nonterminal_count > self.index_bound:
                continue
            if len(f) > self.limit:
                if not self.lossless:
                    self.lossy = True
                continue
            yield (s.rule.label, s.position, s.matrix), (f, s.control)

    @staticmethod
    def accept(state) -> Optional[Word]:
        w, cs = state
        if not cs and w.is_terminal:
            return w.symbols
        return None

    def run(self) -> SearchOutcome:
        axiom = self.g.base.axiom()
        if not self.g.restriction.admits(axiom):
            return SearchOutcome({}, True, 1)
        return breadth_first((axiom, EMPTY_CONTROL), self.expand, self.accept, self.b.max_states, self.b.dedupe)


def regulated_successors(
    w: SententialForm,
    cs: ControlState,
    g: RegulatedGrammar,
    max_open: int = 8,
    semi_streams: int = 1,
) -> List[RegulatedSuccessor]:
    """One-step successors honouring both the sentential-form restriction and the control mode."""
    return _RegulatedSearch(g, SearchBudget(), max_open, semi_streams).successors(w, cs)


@dataclass(frozen=True)
class RegulatedDerivation:
    steps: Tuple[Tuple[str, int, str], ...]
    forms: Tuple[SententialForm, ...]
    controls: Tuple[ControlState, ...]

    @property
    def labels(self) -> Tuple[str, ...]:
        return tuple(label for label, _, _ in self.steps)

    @property
    def index(self) -> int:
        return max(w.nonterminal_count for w in self.forms)

    def boundaries(self) -> List[int]:
        """Indices of forms reached with no matrix open."""
        return [i for i, cs in enumerate(self.controls) if not cs]


def _regulated_derivation(node) -> RegulatedDerivation:
    steps, states = SearchOutcome.path(node)
    return RegulatedDerivation(tuple(steps), tuple(w for w, _ in states), tuple(cs for _, cs in states))


def enumerate_regulated(
    g: RegulatedGrammar,
    b: SearchBudget = SearchBudget(),
    max_open: int = 8,
    semi_streams: int = 1,
    index_bound: Optional[int] = None,
    with_witnesses: bool = False,
) -> EnumerationResult:
    """Terminal words reached with empty control, in (length, terminal order) order."""
    report = validate_regulated(g)
    if not report.ok:
        raise GrammarError(f"invalid regulated grammar:\n{report}")
    search = _RegulatedSearch(g, b, max_open, semi_streams, index_bound)
    outcome = search.run()
    exhaustive = outcome.closed and not search.lossy and not search.capped
    if search.capped:
        logger.warning(f"Vector search hit max_open={max_open}; result is not exhaustive")
    words = g.base.sort_words(outcome.found)
    logger.info(
        f"Enumerated {len(words)} words in {g.mode.value} mode from {outcome.states} states "
        f"(exhaustive={exhaustive})"
    )
    witnesses = {w: _regulated_derivation(outcome.found[w]) for w in words} if with_witnesses else {}
    return EnumerationResult(words, exhaustive, outcome.states, witnesses)


@dataclass
class IndexCheck:
    holds: Optional[bool]
    counterexample: Optional[Word]
    witness: Optional[RegulatedDerivation]
    exhaustive: bool


def check_index_bound(
    g: RegulatedGrammar,
    k: int,
    b: SearchBudget = SearchBudget(),
    max_open: int = 8,
    semi_streams: int = 1,
) -> IndexCheck:
    """Does every word found within the budget have a derivation of index <= k?

    The counterexample is the shortest word reachable only through forms with more than k
    nonterminals, together with one of its derivations.
    """
    full = enumerate_regulated(g, b, max_open, semi_streams, with_witnesses=True)
    bounded = enumerate_regulated(g, b, max_open, semi_streams, index_bound=k)
    reached = set(bounded.words)
    missing = [w for w in full.words if w not in reached]
    if not missing:
        return IndexCheck(True, None, None, full.exhaustive)
    word = missing[0]
    holds = False if bounded.exhaustive else None
    return IndexCheck(holds, word, full.witnesses[word], full.exhaustive)


def is_matrix_shuffle(labels: Sequence[str], matrices: Sequence[Matrix]) -> bool:
    """Is the label sequence a shuffle of complete copies of the given matrices?"""
    seqs = [m.labels for m in matrices]

    def walk(i: int, open_: Tuple[Tuple[int, int], ...], memo: Dict) -> bool:
        key = (i, open_)
        if key in memo:
            return memo[key]
        if i == len(labels):
            memo[key] = not open_
            return memo[key]
        label = labels[i]
        ok = False
        for slot, (m, pos) in enumerate(open_):
            if seqs[m][pos] == label:
                rest = open_[:slot] + open_[slot + 1:]
                if pos + 1 < len(seqs[m]):
                    rest = rest + ((m, pos + 1),)
                if walk(i + 1, tuple(sorted(rest)), memo):
                    ok = True
                    break
        if not ok:
            for m, seq in enumerate(seqs):
                if seq[0] == label:
                    rest = open_ + (((m, 1),) if len(seq) > 1 else ())
                    if walk(i + 1, tuple(sorted(rest)), memo):
                        ok = True
                        break
        memo[key] = ok
        return ok

    return walk(0, (), {})
