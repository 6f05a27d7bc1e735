"""derivation.py
Exhaustive capacity-respecting derivation search.

Breadth-first over sentential forms with a visited set. Terminals are never rewritten
(every lhs is a nonterminal string), so a form whose terminal count exceeds the length
bound can be dropped without losing words.
"""
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, Hashable, Iterable, List, NamedTuple, Optional, Sequence, Tuple

from .errors import CapgramError, DerivationError
from .grammar import (
    CapacityFunction,
    Grammar,
    Rule,
    SententialForm,
    Word,
    apply_rule_at,
    capacity_ok,
    ensure_valid,
    format_word,
)
from .logger import get_logger

logger = get_logger()


@dataclass(frozen=True)
class SearchBudget:
    max_terminal_len: int = 10
    max_form_len: Optional[int] = None
    max_states: int = 2_000_000
    dedupe: bool = True
    form_slack: int = 16

    def __post_init__(self) -> None:
        if self.max_terminal_len < 0 or self.max_states < 1 or self.form_slack < 0:
            raise CapgramError(f"invalid search budget {self}")
        if self.max_form_len is not None and self.max_form_len < self.max_terminal_len:
            raise CapgramError("max_form_len must be at least max_terminal_len")

    def form_limit(self, nonterminal_bound: Optional[int], non_contracting: bool) -> Tuple[int, bool]:
        """(form length cutoff, whether cutting there can never lose a word).

        `nonterminal_bound` is the most nonterminals any admissible form can carry
        (Σ κ for an all-finite capacity, k for an index bound), None when unknown.
        """
        ell = self.max_terminal_len
        if self.max_form_len is not None:
            limit = self.max_form_len
        elif nonterminal_bound is not None:
            limit = ell + nonterminal_bound
        else:
            limit = ell + self.form_slack
        if non_contracting:
            # forms never shrink, so anything longer than ell is dead
            return min(limit, ell), True
        lossless = nonterminal_bound is not None and limit >= ell + nonterminal_bound
        return limit, lossless


def nonterminal_bound(k: Optional[CapacityFunction], index_bound: Optional[int], g: Grammar) -> Optional[int]:
    bounds = []
    if k is not None and all(k[a] is not None for a in g.nonterminals):
        bounds.append(sum(k[a] for a in g.nonterminals))
    if index_bound is not None:
        bounds.append(index_bound)
    return min(bounds) if bounds else None


# --- generic breadth-first driver, shared with the regulated and net-controlled engines ---

class _Node(NamedTuple):
    state: Any
    parent: Optional["_Node"]
    step: Any


@dataclass
class SearchOutcome:
    found: Dict[Word, _Node]
    closed: bool
    states: int
    stopped: bool = False

    @staticmethod
    def path(node: _Node) -> Tuple[List[Any], List[Any]]:
        """(steps, states) from the initial state to `node`."""
        steps: List[Any] = []
        states: List[Any] = []
        while node is not None:
            states.append(node.state)
            if node.parent is not None:
                steps.append(node.step)
            node = node.parent
        return steps[::-1], states[::-1]


def breadth_first(
    initial: Hashable,
    expand: Callable[[Any], Iterable[Tuple[Any, Hashable]]],
    accept: Callable[[Any], Optional[Word]],
    max_states: int,
    dedupe: bool = True,
    stop: Optional[Callable[[Word], bool]] = None,
) -> SearchOutcome:
    """Explore states level by level.

    `closed` is True when the frontier emptied before `max_states` states were discovered.
    `stop` ends the search early once it returns True for an accepted word.
    """
    root = _Node(initial, None, None)
    queue = deque([root])
    seen = {initial}
    discovered = 1
    found: Dict[Word, _Node] = {}
    while queue:
        node = queue.popleft()
        word = accept(node.state)
        if word is not None and word not in found:
            found[word] = node
            if stop is not None and stop(word):
                return SearchOutcome(found, False, discovered, stopped=True)
        for step, nxt in expand(node.state):
            if dedupe:
                if nxt in seen:
                    continue
                seen.add(nxt)
            discovered += 1
            if discovered > max_states:
                logger.warning(f"Search stopped at max_states={max_states}")
                return SearchOutcome(found, False, discovered - 1)
            queue.append(_Node(nxt, node, step))
    return SearchOutcome(found, True, discovered)


# --- derivations ---

class Successor(NamedTuple):
    rule: Rule
    position: int
    form: SententialForm


@dataclass(frozen=True)
class Derivation:
    """Steps (rule label, position) with the forms they produce, axiom first."""

    steps: Tuple[Tuple[str, int], ...]
    forms: Tuple[SententialForm, ...]

    @property
    def labels(self) -> Tuple[str, ...]:
        return tuple(label for label, _ in self.steps)

    @property
    def result(self) -> SententialForm:
        return self.forms[-1]

    @property
    def index(self) -> int:
        return max(w.nonterminal_count for w in self.forms)

    def replay(self, g: Grammar, k: Optional[CapacityFunction] = None) -> SententialForm:
        """Re-apply the steps from the axiom; raises DerivationError on any mismatch."""
        w = g.axiom()
        if self.forms and w != self.forms[0]:
            raise DerivationError(f"derivation does not start at {g.start}")
        for i, (label, pos) in enumerate(self.steps, start=1):
            w = apply_rule_at(w, g.rule(label), pos)
            if w != self.forms[i]:
                raise DerivationError(f"step {i} ({label}@{pos}) gives {w}, recorded {self.forms[i]}")
            if k is not None and not capacity_ok(w, k):
                raise DerivationError(f"step {i} ({label}@{pos}) violates capacity: {w}")
        return w

    def __str__(self) -> str:
        return " => ".join(str(w) for w in self.forms)


def successors(w: SententialForm, g: Grammar, k: Optional[CapacityFunction] = None) -> List[Successor]:
    """One-step successors that respect κ, in rule order then position order."""
    syms = w.symbols
    n = len(syms)
    table = g.rules_by_lhs
    max_len = g.max_lhs_len
    hits: List[Tuple[int, int, Rule]] = []
    for i in range(n):
        if syms[i] not in w.nonterminals:
            continue
        for length in range(1, min(max_len, n - i) + 1):
            for idx, r in table.get(syms[i:i + length], ()):
                hits.append((idx, i, r))
    hits.sort(key=lambda h: (h[0], h[1]))
    out: List[Successor] = []
    for _, pos, r in hits:
        nxt = apply_rule_at(w, r, pos)
        if k is None or capacity_ok(nxt, k):
            out.append(Successor(r, pos, nxt))
    return out


@dataclass
class EnumerationResult:
    words: List[Word]
    exhaustive: bool
    states: int = 0
    witnesses: Dict[Word, Any] = field(default_factory=dict)

    def render(self) -> str:
        lines = [f"# exhaustive: {'true' if self.exhaustive else 'false'}"]
        lines.extend(format_word(w) for w in self.words)
        return "\n".join(lines) + "\n"


class _PlainSearch:
    def __init__(
        self,
        g: Grammar,
        k: Optional[CapacityFunction],
        b: SearchBudget,
        index_bound: Optional[int] = None,
        target: Optional[Word] = None,
    ) -> None:
        self.g = g
        self.k = k
        self.b = b
        self.index_bound = index_bound
        self.target = target
        self.limit, self.lossless = b.form_limit(nonterminal_bound(k, index_bound, g), g.is_non_contracting)
        self.lossy = False
        if target is not None:
            self.target_counts: Dict[str, int] = {}
            for a in target:
                self.target_counts[a] = self.target_counts.get(a, 0) + 1

    def admissible(self, w: SententialForm) -> bool:
        if w.terminal_count > self.b.max_terminal_len:
            return False
        if self.index_bound is not None and w.nonterminal_count > self.index_bound:
            return False
        if len(w) > self.limit:
            if not self.lossless:
                self.lossy = True
            return False
        if self.target is not None and not self._fits_target(w):
            return False
        return True

    def _fits_target(self, w: SententialForm) -> bool:
        syms = w.symbols
        nts = w.nonterminals
        target = self.target
        i = 0
        while i < len(syms) and syms[i] not in nts:
            if i >= len(target) or syms[i] != target[i]:
                return False
            i += 1
        if i == len(syms):
            return syms == target
        j = 1
        while syms[-j] not in nts:
            if j > len(target) or syms[-j] != target[-j]:
                return False
            j += 1
        seen: Dict[str, int] = {}
        for s in syms:
            if s not in nts:
                seen[s] = seen.get(s, 0) + 1
                if seen[s] > self.target_counts.get(s, 0):
                    return False
        return True

    def expand(self, w: SententialForm):
        for s in successors(w, self.g, self.k):
            if self.admissible(s.form):
                yield (s.rule.label, s.position), s.form

    @staticmethod
    def accept(w: SententialForm) -> Optional[Word]:
        return w.symbols if w.is_terminal else None

    def run(self, stop: Optional[Callable[[Word], bool]] = None) -> SearchOutcome:
        axiom = self.g.axiom()
        if self.k is not None and not capacity_ok(axiom, self.k):
            return SearchOutcome({}, True, 1)
        return breadth_first(axiom, self.expand, self.accept, self.b.max_states, self.b.dedupe, stop)


def _derivation_of(node: _Node) -> Derivation:
    steps, forms = SearchOutcome.path(node)
    return Derivation(tuple(steps), tuple(forms))


def enumerate_language(
    g: Grammar,
    k: Optional[CapacityFunction] = None,
    b: SearchBudget = SearchBudget(),
    index_bound: Optional[int] = None,
    with_witnesses: bool = False,
) -> EnumerationResult:
    """All terminal words of length <= b.max_terminal_len derivable under κ (and index bound).

    The result is exhaustive iff the visited-set search closed without hitting max_states and
    no form was cut by a length bound that could have hidden a word.
    """
    ensure_valid(g)
    search = _PlainSearch(g, k, b, index_bound)
    outcome = search.run()
    exhaustive = outcome.closed and not search.lossy
    words = g.sort_words(outcome.found)
    logger.info(
        f"Enumerated {len(words)} words from {outcome.states} forms (exhaustive={exhaustive}, "
        f"max_len={b.max_terminal_len})"
    )
    witnesses = {w: _derivation_of(outcome.found[w]) for w in words} if with_witnesses else {}
    return EnumerationResult(words, exhaustive, outcome.states, witnesses)


@dataclass
class MembershipResult:
    verdict: Optional[bool]
    witness: Optional[Derivation]
    exhaustive: bool
    states: int = 0

    @property
    def label(self) -> str:
        return {True: "true", False: "false", None: "unknown"}[self.verdict]


def decide_membership(
    word: Sequence[str],
    g: Grammar,
    k: Optional[CapacityFunction] = None,
    b: SearchBudget = SearchBudget(),
    index_bound: Optional[int] = None,
) -> MembershipResult:
    """True with a witness, False only after an exhaustive search, None when the budget ran out."""
    ensure_valid(g)
    word = tuple(word)
    undeclared = [a for a in word if a not in g.terminal_set]
    if undeclared:
        raise DerivationError(f"word uses undeclared terminals: {', '.join(sorted(set(undeclared)))}")
    max_form_len = b.max_form_len
    if max_form_len is not None and max_form_len < len(word):
        max_form_len = len(word)
    budget = replace(b, max_terminal_len=len(word), max_form_len=max_form_len)
    search = _PlainSearch(g, k, budget, index_bound, target=word)
    outcome = search.run(stop=lambda w: w == word)
    if word in outcome.found:
        witness = _derivation_of(outcome.found[word])
        logger.info(f"Member {format_word(word)} after {outcome.states} forms, {len(witness.steps)} steps")
        return MembershipResult(True, witness, outcome.closed, outcome.states)
    if outcome.closed and not search.lossy:
        return MembershipResult(False, None, True, outcome.states)
    return MembershipResult(None, None, False, outcome.states)


def replay_labels(
    g: Grammar,
    labels: Sequence[str],
    k: Optional[CapacityFunction] = None,
    word: Optional[Sequence[str]] = None,
) -> Optional[Derivation]:
    """Find positions for a rule-label sequence so that it derives `word` (any terminal word when
    `word` is None) with every form respecting κ. Returns None when no placement works."""
    rules = [g.rule(label) for label in labels]
    target = tuple(word) if word is not None else None

    def search(w: SententialForm, i: int, steps: List[Tuple[str, int]], forms: List[SententialForm]):
        if i == len(rules):
            if w.is_terminal and (target is None or w.symbols == target):
                return Derivation(tuple(steps), tuple(forms))
            return None
        r = rules[i]
        n = len(r.lhs)
        for pos in range(len(w.symbols) - n + 1):
            if w.symbols[pos:pos + n] != r.lhs:
                continue
            nxt = apply_rule_at(w, r, pos)
            if k is not None and not capacity_ok(nxt, k):
                continue
            found = search(nxt, i + 1, steps + [(r.label, pos)], forms + [nxt])
            if found is not None:
                return found
        return None

    axiom = g.axiom()
    return search(axiom, 0, [], [axiom])


def max_nonterminals_reached(
    g: Grammar,
    k: Optional[CapacityFunction] = None,
    b: SearchBudget = SearchBudget(),
) -> Tuple[int, bool]:
    """Largest |β|_V over reachable forms within the budget; the grammar is nonterminal
    bounded by this value when the flag says the search closed."""
    ensure_valid(g)
    search = _PlainSearch(g, k, b)
    axiom = g.axiom()
    if k is not None and not capacity_ok(axiom, k):
        return 0, True
    best = [axiom.nonterminal_count]

    def accept(w: SententialForm) -> Optional[Word]:
        if w.nonterminal_count > best[0]:
            best[0] = w.nonterminal_count
        return search.accept(w)

    outcome = breadth_first(axiom, search.expand, accept, b.max_states, b.dedupe)
    return best[0], outcome.closed and not search.lossy


@dataclass(frozen=True)
class PatternAtom:
    symbol: str
    starred: bool = False


@dataclass(frozen=True)
class SimplePattern:
    """Concatenation of literal and starred-literal atoms, e.g. a*ccb*a*cb*."""

    atoms: Tuple[PatternAtom, ...]

    @classmethod
    def parse(cls, text: str) -> "SimplePattern":
        """Whitespace-separated atoms ("a* c c"), or one character per atom when no space occurs."""
        atoms: List[PatternAtom] = []
        text = text.strip()
        if any(c.isspace() for c in text):
            for tok in text.split():
                starred = tok.endswith("*")
                symbol = tok[:-1] if starred else tok
                if not symbol:
                    raise CapgramError(f"bad pattern atom {tok!r}")
                atoms.append(PatternAtom(symbol, starred))
        else:
            i = 0
            while i < len(text):
                if text[i] == "*":
                    raise CapgramError(f"dangling '*' in pattern {text!r}")
                starred = i + 1 < len(text) and text[i + 1] == "*"
                atoms.append(PatternAtom(text[i], starred))
                i += 2 if starred else 1
        return cls(tuple(atoms))

    def _closure(self, states: set) -> set:
        out = set(states)
        for i in sorted(states):
            j = i
            while j < len(self.atoms) and self.atoms[j].starred:
                j += 1
                out.add(j)
        return out

    def matches(self, word: Sequence[str]) -> bool:
        current = self._closure({0})
        for a in word:
            nxt = set()
            for i in current:
                if i < len(self.atoms) and self.atoms[i].symbol == a:
                    nxt.add(i if self.atoms[i].starred else i + 1)
            if not nxt:
                return False
            current = self._closure(nxt)
        return len(self.atoms) in current


def filter_pattern(words: Sequence[Word], p: SimplePattern) -> List[Word]:
    return [w for w in words if p.matches(w)]
