"""grammar.py
Phrase-structure grammars (Ginsburg-Spanier style), capacity functions and sentential forms.

Symbols are plain strings; whether a symbol is a nonterminal or a terminal is decided by the
grammar's alphabets. Generated alphabets (renamed copies, block symbols, barred symbols) are
therefore just longer names.
"""
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

from .errors import CapacityError, DerivationError, GrammarError, ValidationReport

Word = Tuple[str, ...]

EMPTY_MARK = "~"


def _as_symbols(value: Union[str, Sequence[str]]) -> Word:
    if isinstance(value, str):
        parts = value.split()
        if parts == [EMPTY_MARK]:
            return ()
        return tuple(parts)
    return tuple(value)


def parse_word(text: str) -> Word:
    """Split a word given on the command line or in a test.

    Whitespace-separated tokens when the text contains whitespace, otherwise one symbol per
    character. The empty string and "~" both denote the empty word.
    """
    text = text.strip()
    if not text or text == EMPTY_MARK:
        return ()
    if any(c.isspace() for c in text):
        return tuple(text.split())
    return tuple(text)


def format_word(word: Sequence[str], empty: str = "(empty)") -> str:
    """Render a word; single-character symbols are concatenated, longer ones space-separated."""
    if not word:
        return empty
    if all(len(s) == 1 for s in word):
        return "".join(word)
    return " ".join(word)


def fresh_symbol(base: str, taken: Iterable[str]) -> str:
    """Return `base`, primed as often as needed to avoid every name in `taken`."""
    taken = set(taken)
    name = base
    while name in taken:
        name += "'"
    return name


@dataclass(frozen=True)
class Rule:
    label: str
    lhs: Word
    rhs: Word

    def __post_init__(self) -> None:
        object.__setattr__(self, "lhs", tuple(self.lhs))
        object.__setattr__(self, "rhs", tuple(self.rhs))

    @classmethod
    def of(cls, label: str, lhs: Union[str, Sequence[str]], rhs: Union[str, Sequence[str]]) -> "Rule":
        """Build a rule from whitespace-separated strings ("~" or "" is the empty word)."""
        return cls(label, _as_symbols(lhs), _as_symbols(rhs))

    @property
    def is_context_free(self) -> bool:
        return len(self.lhs) == 1

    @property
    def is_erasing(self) -> bool:
        return not self.rhs

    def __str__(self) -> str:
        rhs = " ".join(self.rhs) if self.rhs else EMPTY_MARK
        return f"{self.label}: {' '.join(self.lhs)} -> {rhs}"


@dataclass(frozen=True)
class Grammar:
    """G = (V, Σ, S, R); nonterminal and terminal tuples keep their declared order."""

    nonterminals: Tuple[str, ...]
    terminals: Tuple[str, ...]
    start: str
    rules: Tuple[Rule, ...]
    cf_flag: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "nonterminals", tuple(self.nonterminals))
        object.__setattr__(self, "terminals", tuple(self.terminals))
        object.__setattr__(self, "rules", tuple(self.rules))

    @cached_property
    def nonterminal_set(self) -> FrozenSet[str]:
        return frozenset(self.nonterminals)

    @cached_property
    def terminal_set(self) -> FrozenSet[str]:
        return frozenset(self.terminals)

    @cached_property
    def rule_index(self) -> Dict[str, Rule]:
        return {r.label: r for r in self.rules}

    @cached_property
    def rule_order(self) -> Dict[str, int]:
        return {r.label: i for i, r in enumerate(self.rules)}

    @cached_property
    def rules_by_lhs(self) -> Dict[Word, List[Tuple[int, Rule]]]:
        table: Dict[Word, List[Tuple[int, Rule]]] = {}
        for i, r in enumerate(self.rules):
            table.setdefault(r.lhs, []).append((i, r))
        return table

    @cached_property
    def max_lhs_len(self) -> int:
        return max((len(r.lhs) for r in self.rules), default=0)

    @cached_property
    def is_erasing(self) -> bool:
        """Metadata flag: the grammar has λ-rules (MAT vs MAT^λ style distinction)."""
        return any(r.is_erasing for r in self.rules)

    @cached_property
    def is_non_contracting(self) -> bool:
        return all(len(r.rhs) >= len(r.lhs) for r in self.rules)

    @cached_property
    def terminal_rank(self) -> Dict[str, int]:
        return {a: i for i, a in enumerate(self.terminals)}

    def rule(self, label: str) -> Rule:
        try:
            return self.rule_index[label]
        except KeyError:
            raise GrammarError(f"unknown rule label {label!r}") from None

    def form(self, symbols: Sequence[str]) -> "SententialForm":
        return SententialForm.of(symbols, self.nonterminal_set)

    def axiom(self) -> "SententialForm":
        return self.form((self.start,))

    def word_key(self, word: Sequence[str]) -> Tuple[int, Tuple[int, ...]]:
        """Sort key: length first, then lexicographic in declared terminal order."""
        rank = self.terminal_rank
        return len(word), tuple(rank.get(a, len(rank)) for a in word)

    def sort_words(self, words: Iterable[Word]) -> List[Word]:
        return sorted(set(words), key=self.word_key)


def validate_grammar(g: Grammar) -> ValidationReport:
    """Report every invariant violation of `g`; the report is empty iff `g` is well-formed."""
    report = ValidationReport()
    overlap = g.nonterminal_set & g.terminal_set
    if overlap:
        report.add(f"alphabets not disjoint: {', '.join(sorted(overlap))}")
    if len(g.nonterminal_set) != len(g.nonterminals):
        report.add("duplicate nonterminal declaration")
    if len(g.terminal_set) != len(g.terminals):
        report.add("duplicate terminal declaration")
    if g.start not in g.nonterminal_set:
        report.add(f"start symbol {g.start!r} is not a nonterminal")
    seen = set()
    for r in g.rules:
        if r.label in seen:
            report.add(f"duplicate rule label {r.label}")
        seen.add(r.label)
        if not r.lhs:
            report.add(f"{r.label}: empty lhs")
        for s in r.lhs:
            if s in g.terminal_set:
                report.add(f"{r.label}: terminal in lhs ({s})")
            elif s not in g.nonterminal_set:
                report.add(f"{r.label}: undeclared symbol {s} in lhs")
        for s in r.rhs:
            if s not in g.nonterminal_set and s not in g.terminal_set:
                report.add(f"{r.label}: undeclared symbol {s} in rhs")
        if g.cf_flag and len(r.lhs) > 1:
            report.add(f"{r.label}: lhs length > 1 in a context-free grammar")
    return report


def ensure_valid(g: Grammar) -> Grammar:
    report = validate_grammar(g)
    if not report.ok:
        raise GrammarError(f"invalid grammar:\n{report}")
    return g


@dataclass(frozen=True, eq=False)
class CapacityFunction:
    """κ: V -> positive integers; None marks an unbounded nonterminal."""

    bounds: Mapping[str, Optional[int]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "bounds", dict(self.bounds))
        for a, b in self.bounds.items():
            if b is not None and (isinstance(b, bool) or not isinstance(b, int) or b < 1):
                raise CapacityError(f"capacity of {a} must be a positive integer or unbounded, got {b!r}")

    def __eq__(self, other: object) -> bool:
        return isinstance(other, CapacityFunction) and self.bounds == other.bounds

    def __hash__(self) -> int:
        return hash(frozenset(self.bounds.items()))

    def __getitem__(self, symbol: str) -> Optional[int]:
        return self.bounds.get(symbol)

    @classmethod
    def ones(cls, nonterminals: Iterable[str]) -> "CapacityFunction":
        return cls({a: 1 for a in nonterminals})

    @classmethod
    def constant(cls, nonterminals: Iterable[str], k: int) -> "CapacityFunction":
        return cls({a: k for a in nonterminals})

    @classmethod
    def unbounded(cls, nonterminals: Iterable[str]) -> "CapacityFunction":
        return cls({a: None for a in nonterminals})

    @property
    def is_finite(self) -> bool:
        return all(b is not None for b in self.bounds.values())

    @property
    def is_one(self) -> bool:
        return all(b == 1 for b in self.bounds.values())

    def total(self) -> int:
        """Σ κ(A) over the finite entries."""
        return sum(b for b in self.bounds.values() if b is not None)

    def admits(self, counts: Mapping[str, int]) -> bool:
        for a, n in counts.items():
            b = self.bounds.get(a)
            if b is not None and n > b:
                return False
        return True

    def validate_for(self, g: Grammar) -> ValidationReport:
        report = ValidationReport()
        missing = [a for a in g.nonterminals if a not in self.bounds]
        extra = [a for a in self.bounds if a not in g.nonterminal_set]
        if missing:
            report.add(f"capacity undefined for {', '.join(missing)}")
        if extra:
            report.add(f"capacity defined for non-nonterminals {', '.join(sorted(extra))}")
        return report

    def __str__(self) -> str:
        return " ".join(f"{a}={'*' if b is None else b}" for a, b in self.bounds.items())


class SententialForm:
    """A string over V ∪ Σ with cached occurrence counts of its nonterminals.

    Immutable by convention; equality and hashing look at the symbols only.
    """

    __slots__ = ("symbols", "nonterminals", "counts", "terminal_count")

    def __init__(
        self,
        symbols: Word,
        nonterminals: FrozenSet[str],
        counts: Dict[str, int],
        terminal_count: int,
    ) -> None:
        self.symbols = symbols
        self.nonterminals = nonterminals
        self.counts = counts
        self.terminal_count = terminal_count

    @classmethod
    def of(cls, symbols: Sequence[str], nonterminals: FrozenSet[str]) -> "SententialForm":
        symbols = tuple(symbols)
        counts: Dict[str, int] = {}
        terminals = 0
        for s in symbols:
            if s in nonterminals:
                counts[s] = counts.get(s, 0) + 1
            else:
                terminals += 1
        return cls(symbols, nonterminals, counts, terminals)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, SententialForm):
            return self.symbols == other.symbols
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.symbols)

    def __len__(self) -> int:
        return len(self.symbols)

    def __iter__(self) -> Iterator[str]:
        return iter(self.symbols)

    def __repr__(self) -> str:
        return f"SententialForm({format_word(self.symbols, empty='λ')!r})"

    def __str__(self) -> str:
        return format_word(self.symbols, empty="λ")

    def count(self, symbol: str) -> int:
        if symbol in self.nonterminals:
            return self.counts.get(symbol, 0)
        return self.symbols.count(symbol)

    @property
    def nonterminal_count(self) -> int:
        return len(self.symbols) - self.terminal_count

    @property
    def is_terminal(self) -> bool:
        return self.terminal_count == len(self.symbols)

    def counts_consistent(self) -> bool:
        fresh = SententialForm.of(self.symbols, self.nonterminals)
        return fresh.counts == self.counts and fresh.terminal_count == self.terminal_count


def apply_rule_at(w: SententialForm, r: Rule, pos: int) -> SententialForm:
    """x1·u·x2 ⇒ x1·v·x2 for r = u -> v with u starting at `pos`; `w` is left untouched."""
    end = pos + len(r.lhs)
    if pos < 0 or end > len(w.symbols) or w.symbols[pos:end] != r.lhs:
        raise DerivationError(f"lhs of {r.label} does not occur at position {pos} of {w}")
    nts = w.nonterminals
    counts = dict(w.counts)
    terminals = w.terminal_count
    for s in r.lhs:
        if s in nts:
            n = counts[s] - 1
            if n:
                counts[s] = n
            else:
                del counts[s]
        else:
            terminals -= 1
    for s in r.rhs:
        if s in nts:
            counts[s] = counts.get(s, 0) + 1
        else:
            terminals += 1
    return SententialForm(w.symbols[:pos] + r.rhs + w.symbols[end:], nts, counts, terminals)


def occurrences(w: SententialForm, lhs: Word) -> List[int]:
    n = len(lhs)
    syms = w.symbols
    return [i for i in range(len(syms) - n + 1) if syms[i:i + n] == lhs]


def capacity_ok(w: SententialForm, k: CapacityFunction) -> bool:
    return k.admits(w.counts)


@dataclass(frozen=True)
class BlockDecomposition:
    """w = x1 β1 x2 β2 ... xn βn x(n+1); gaps has n+1 entries, blocks has n."""

    gaps: Tuple[Word, ...]
    blocks: Tuple[Word, ...]

    def concat(self) -> Word:
        out: List[str] = []
        for gap, block in zip(self.gaps, self.blocks):
            out.extend(gap)
            out.extend(block)
        out.extend(self.gaps[-1])
        return tuple(out)

    def segments(self) -> List[Tuple[Word, Word]]:
        """(gap, block) pairs followed by the trailing gap paired with λ."""
        return list(zip(self.gaps, self.blocks + ((),)))


def decompose_blocks(w: SententialForm) -> BlockDecomposition:
    gaps: List[Word] = []
    blocks: List[Word] = []
    current: List[str] = []
    in_block = False
    for s in w.symbols:
        is_nt = s in w.nonterminals
        if is_nt != in_block:
            (blocks if in_block else gaps).append(tuple(current))
            current = []
            in_block = is_nt
        current.append(s)
    if in_block:
        blocks.append(tuple(current))
        gaps.append(())
    else:
        gaps.append(tuple(current))
    return BlockDecomposition(tuple(gaps), tuple(blocks))


def is_one_step(x: SententialForm, y: SententialForm, g: Grammar) -> bool:
    for r in g.rules:
        for pos in occurrences(x, r.lhs):
            if apply_rule_at(x, r, pos) == y:
                return True
    return False


def derivation_index(forms: Sequence[SententialForm], g: Optional[Grammar] = None) -> int:
    """Maximal nonterminal count over the forms of a derivation.

    When `g` is given, consecutive forms are checked to be related by one derivation step.
    """
    if g is not None:
        for i in range(len(forms) - 1):
            if not is_one_step(forms[i], forms[i + 1], g):
                raise DerivationError(f"forms {i} and {i + 1} are not related by one step: {forms[i]} / {forms[i + 1]}")
    return max((w.nonterminal_count for w in forms), default=0)
