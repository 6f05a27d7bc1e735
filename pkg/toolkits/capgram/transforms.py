"""transforms.py
Constructive grammar transformations. Each returns the new grammar together with a
Provenance that maps every emitted rule back to the source rule it simulates.
"""
from collections import deque
from dataclasses import dataclass, field
from itertools import permutations, product
from math import prod
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .errors import CapacityError, GrammarError, TransformError
from .grammar import (
    CapacityFunction,
    Grammar,
    Rule,
    SententialForm,
    Word,
    decompose_blocks,
    ensure_valid,
    fresh_symbol,
)
from .logger import get_logger
from .regulated import ControlMode, Matrix, RegulatedGrammar, Restriction, validate_regulated

logger = get_logger()

DEFAULT_SYMBOL_BUDGET = 10_000
DEFAULT_RULE_BUDGET = 200_000


@dataclass
class Provenance:
    """new rule label -> source rule label (None for bookkeeping rules)."""

    transform: str
    rule_map: Dict[str, Optional[str]] = field(default_factory=dict)
    matrix_map: Dict[str, Optional[str]] = field(default_factory=dict)
    operand: Dict[str, int] = field(default_factory=dict)
    encoding: Optional["BlockEncoding"] = None

    def lift(self, labels: Iterable[str], operand: Optional[int] = None) -> Tuple[str, ...]:
        """Source labels of a witness, bookkeeping steps dropped."""
        out = []
        for label in labels:
            src = self.rule_map.get(label)
            if src is None:
                continue
            if operand is not None and self.operand.get(label, 0) != operand:
                continue
            out.append(src)
        return tuple(out)

    def then(self, later: "Provenance") -> "Provenance":
        """Provenance of applying `later` to the output of this transform."""
        return Provenance(
            f"{self.transform}+{later.transform}",
            {new: (self.rule_map.get(src) if src is not None else None) for new, src in later.rule_map.items()},
            {new: (self.rule_map.get(src, src) if src is not None else None) for new, src in later.matrix_map.items()},
            dict(later.operand),
            later.encoding,
        )

    def render(self) -> str:
        lines = [f"# transform: {self.transform}"]
        for new, src in self.rule_map.items():
            tag = f" [{self.operand[new] + 1}]" if new in self.operand else ""
            lines.append(f"{new} <- {src if src is not None else '~'}{tag}")
        for new, src in self.matrix_map.items():
            lines.append(f"matrix {new} <- {src if src is not None else '~'}")
        return "\n".join(lines) + "\n"


def _check_budget(what: str, n: int, budget: int) -> None:
    if n > budget:
        raise TransformError(f"{what} would reach {n}, above the budget of {budget}")


def _all_symbols(g: Grammar) -> set:
    return set(g.nonterminals) | set(g.terminals)


# --- capacity normalization ---

def _copies(g: Grammar, k: CapacityFunction, symbol_budget: int) -> Dict[str, Tuple[str, ...]]:
    """h(A) = {A.1, ..., A.κ(A)}."""
    for a in g.nonterminals:
        if a not in k.bounds:
            raise CapacityError(f"capacity undefined for {a}")
        if k[a] is None:
            raise CapacityError(f"capacity of {a} is unbounded; normalization needs finite bounds")
    _check_budget("nonterminal count", sum(k[a] for a in g.nonterminals), symbol_budget)
    taken = set(g.terminals)
    h: Dict[str, Tuple[str, ...]] = {}
    for a in g.nonterminals:
        names = []
        for i in range(1, k[a] + 1):
            name = fresh_symbol(f"{a}.{i}", taken)
            taken.add(name)
            names.append(name)
        h[a] = tuple(names)
    return h


def _variant_count(r: Rule, h: Mapping[str, Tuple[str, ...]]) -> int:
    return prod(len(h.get(s, (s,))) for s in r.lhs + r.rhs)


def _variants(r: Rule, h: Mapping[str, Tuple[str, ...]], used: set) -> List[Rule]:
    lhs_choices = product(*(h.get(s, (s,)) for s in r.lhs))
    rhs_options = [h.get(s, (s,)) for s in r.rhs]
    pairs = [(lhs, rhs) for lhs in lhs_choices for rhs in product(*rhs_options)]
    out = []
    for n, (lhs, rhs) in enumerate(pairs, start=1):
        base = r.label if len(pairs) == 1 else f"{r.label}.{n}"
        label = fresh_symbol(base, used)
        used.add(label)
        out.append(Rule(label, lhs, rhs))
    return out


def normalize_capacity_to_one(
    g: Grammar,
    k: CapacityFunction,
    symbol_budget: int = DEFAULT_SYMBOL_BUDGET,
    rule_budget: int = DEFAULT_RULE_BUDGET,
) -> Tuple[Grammar, CapacityFunction, Provenance]:
    """Replace every nonterminal A by κ(A) copies and every rule by all its copy variants;
    the result under capacity 1 generates what (g, κ) generates."""
    ensure_valid(g)
    h = _copies(g, k, symbol_budget)
    _check_budget("rule count", sum(_variant_count(r, h) for r in g.rules), rule_budget)
    used: set = set()
    rules: List[Rule] = []
    prov = Provenance("cap1")
    for r in g.rules:
        for v in _variants(r, h, used):
            rules.append(v)
            prov.rule_map[v.label] = r.label
    nonterminals = tuple(c for a in g.nonterminals for c in h[a])
    out = Grammar(nonterminals, g.terminals, h[g.start][0], tuple(rules), g.cf_flag)
    logger.info(f"Normalized capacity: {len(nonterminals)} nonterminals, {len(rules)} rules")
    return out, CapacityFunction.ones(nonterminals), prov


def normalize_regulated_capacity(
    g: RegulatedGrammar,
    symbol_budget: int = DEFAULT_SYMBOL_BUDGET,
    rule_budget: int = DEFAULT_RULE_BUDGET,
) -> Tuple[RegulatedGrammar, Provenance]:
    """The same substitution applied matrix-wise: each matrix becomes every combination of
    variants of its rules."""
    if g.restriction.kind != "capacity":
        raise TransformError("capacity normalization needs a capacity-restricted grammar")
    base, ones, prov = normalize_capacity_to_one(g.base, g.restriction.capacity, symbol_budget, rule_budget)
    by_source: Dict[str, List[Rule]] = {}
    for r in base.rules:
        by_source.setdefault(prov.rule_map[r.label], []).append(r)
    _check_budget(
        "matrix count",
        sum(prod(len(by_source[r.label]) for r in m.rules) for m in g.matrices),
        rule_budget,
    )
    matrices: List[Matrix] = []
    used = {m.label for m in g.matrices}
    for m in g.matrices:
        combos = list(product(*(by_source[r.label] for r in m.rules)))
        for n, combo in enumerate(combos, start=1):
            label = m.label if len(combos) == 1 else fresh_symbol(f"{m.label}.{n}", used)
            used.add(label)
            matrices.append(Matrix(label, combo))
            prov.matrix_map[label] = m.label
    out = RegulatedGrammar(base, tuple(matrices), g.mode, Restriction.of_capacity(ones))
    return out, prov


# --- blockwise rules and the matrix grammar of finite index ---

def _require_one(k: Optional[CapacityFunction]) -> None:
    if k is not None and not k.is_one:
        raise TransformError("this construction needs capacity 1; normalize the capacity first")


def _contexts(rest: Sequence[str]) -> Iterable[Tuple[Word, Word]]:
    """All (α1, α2) over `rest` whose concatenation is repetition-free, shortest first."""
    for j in range(len(rest) + 1):
        for perm in permutations(rest, j):
            for split in range(j + 1):
                yield perm[:split], perm[split:]


def gs_cb_to_blockwise(
    g: Grammar,
    k: Optional[CapacityFunction] = None,
    rule_budget: int = DEFAULT_RULE_BUDGET,
) -> Tuple[Grammar, Provenance]:
    """R' = {α1 α α2 -> α1 β α2 : α -> β in R, α1 α α2 repetition-free}; R is kept as is."""
    ensure_valid(g)
    _require_one(k)
    prov = Provenance("blockwise")
    rules: List[Rule] = []
    used = {r.label for r in g.rules}
    for r in g.rules:
        rules.append(r)
        prov.rule_map[r.label] = r.label
        if len(set(r.lhs)) != len(r.lhs):
            continue
        rest = [a for a in g.nonterminals if a not in r.lhs]
        n = 0
        for left, right in _contexts(rest):
            if not left and not right:
                continue
            n += 1
            label = fresh_symbol(f"{r.label}.{n}", used)
            used.add(label)
            rules.append(Rule(label, left + r.lhs + right, left + r.rhs + right))
            prov.rule_map[label] = r.label
            if len(rules) > rule_budget:
                _check_budget("rule count", len(rules), rule_budget)
    out = Grammar(g.nonterminals, g.terminals, g.start, tuple(rules), g.cf_flag)
    logger.info(f"Blockwise closure: {len(g.rules)} rules became {len(rules)}")
    return out, prov


@dataclass(frozen=True)
class BlockEncoding:
    """How the matrix grammar encodes a sentential form: block symbols for the maximal
    nonterminal blocks, then one presence marker (A or its barred copy) per nonterminal."""

    start: str
    blocks: Mapping[str, Word]
    barred: Mapping[str, str]
    order: Tuple[str, ...]

    def shape_ok(self, symbols: Sequence[str]) -> bool:
        """[β]γ shape: blocks and terminals, then γ in declared order with A unbarred iff A
        occurs in some block."""
        symbols = tuple(symbols)
        if symbols == (self.start,):
            return True
        m = len(self.order)
        if len(symbols) < m:
            return False
        head, gamma = symbols[:-m], symbols[-m:]
        inside: List[str] = []
        for s in head:
            if s in self.blocks:
                inside.extend(self.blocks[s])
            elif s in self.barred or s in self.barred.values() or s == self.start:
                return False
        if len(set(inside)) != len(inside):
            return False
        present = set(inside)
        for a, s in zip(self.order, gamma):
            if s == a:
                if a not in present:
                    return False
            elif s == self.barred[a]:
                if a in present:
                    return False
            else:
                return False
        return True


def gs_cb_to_matrix_fin(
    g: Grammar,
    k: Optional[CapacityFunction] = None,
    symbol_budget: int = DEFAULT_SYMBOL_BUDGET,
    rule_budget: int = DEFAULT_RULE_BUDGET,
) -> Tuple[RegulatedGrammar, Provenance]:
    """Matrix grammar of finite index simulating a capacity-bounded grammar.

    Each simulated form x1 β1 x2 ... βn x(n+1) is encoded as x1 [β1] x2 ... [βn] x(n+1) γ.
    Block symbols are minted lazily, starting from [S], for the blockwise rules that can
    actually fire; rules whose result repeats a nonterminal inside one block are skipped.
    """
    ensure_valid(g)
    prov_norm: Optional[Provenance] = None
    if k is not None and not k.is_one:
        g, k, prov_norm = normalize_capacity_to_one(g, k, symbol_budget, rule_budget)
    nts = g.nonterminals
    taken = _all_symbols(g)
    barred: Dict[str, str] = {}
    for a in nts:
        barred[a] = fresh_symbol(f"{a}_bar", taken)
        taken.add(barred[a])
    start = fresh_symbol(f"{g.start}'", taken)
    taken.add(start)

    block_name: Dict[Word, str] = {}
    block_order: List[str] = []

    def block(word: Word) -> str:
        if word not in block_name:
            name = fresh_symbol("[" + "|".join(word) + "]", taken)
            taken.add(name)
            block_name[word] = name
            block_order.append(name)
            queue.append(word)
            _check_budget("block symbol count", len(block_order), symbol_budget)
        return block_name[word]

    rules: List[Rule] = []
    matrices: List[Matrix] = []
    prov = Provenance("mat-fin")
    aux = {}
    for a in nts:
        aux[("bar", a)] = Rule(f"bar_{a}", (a,), (barred[a],))
        aux[("unbar", a)] = Rule(f"unbar_{a}", (barred[a],), (a,))
        aux[("erase", a)] = Rule(f"erase_{a}", (barred[a],), ())
    used_aux = set()

    queue: deque = deque()
    # S' -> [S] S A1_bar ... Am_bar
    start_rule = Rule("init", (start,), (block((g.start,)), g.start) + tuple(barred[a] for a in nts if a != g.start))
    counter: Dict[str, int] = {}
    while queue:
        beta = queue.popleft()
        for r in g.rules:
            n = len(r.lhs)
            for i in range(len(beta) - n + 1):
                if beta[i:i + n] != r.lhs:
                    continue
                result = beta[:i] + r.rhs + beta[i + n:]
                nt_result = [s for s in result if s in g.nonterminal_set]
                if len(set(nt_result)) != len(nt_result):
                    continue
                parts = decompose_blocks(SententialForm.of(result, g.nonterminal_set))
                rhs: List[str] = []
                for gap, blk in parts.segments():
                    rhs.extend(gap)
                    if blk:
                        rhs.append(block(blk))
                counter[r.label] = counter.get(r.label, 0) + 1
                label = f"{r.label}/{counter[r.label]}"
                main = Rule(label, (block_name[beta],), tuple(rhs))
                before, after = set(beta), set(nt_result)
                steps = [main]
                steps += [aux[("bar", a)] for a in nts if a in before and a not in after]
                steps += [aux[("unbar", a)] for a in nts if a not in before and a in after]
                used_aux.update(s.label for s in steps[1:])
                rules.append(main)
                prov.rule_map[label] = r.label
                matrices.append(Matrix(f"m_{label}", tuple(steps)))
                prov.matrix_map[f"m_{label}"] = r.label
                _check_budget("rule count", len(rules), rule_budget)

    order = (g.start,) + tuple(a for a in nts if a != g.start)
    # only applicable once every marker is barred, i.e. no nonterminal is left
    end = Matrix("m_end", tuple(aux[("erase", a)] for a in order))
    rules = (
        [start_rule]
        + rules
        + [r for r in aux.values() if r.label in used_aux or r.label.startswith("erase_")]
    )
    prov.rule_map = {"init": None, **prov.rule_map}
    for r in rules:
        prov.rule_map.setdefault(r.label, None)
    matrices = [Matrix("m_start", (start_rule,))] + matrices + [end]
    prov.matrix_map = {"m_start": None, **prov.matrix_map, "m_end": None}
    nonterminals = (start,) + tuple(block_order) + order + tuple(barred[a] for a in order)
    base = Grammar(nonterminals, g.terminals, start, tuple(rules), cf_flag=True)
    # blocks are nonempty and pairwise disjoint, so at most |V| of them next to the |V| markers
    out = RegulatedGrammar(base, tuple(matrices), ControlMode.MATRIX, Restriction.of_index(2 * len(nts)))
    prov.encoding = BlockEncoding(start, {v: w for w, v in block_name.items()}, barred, order)
    logger.info(f"Matrix grammar: {len(block_order)} block symbols, {len(matrices)} matrices")
    if prov_norm is not None:
        prov = prov_norm.then(prov)
    return out, prov


# --- context-free grammars of finite index and closure properties ---

def cf_fin_to_cf_cb(g: Grammar, k: int) -> Tuple[Grammar, CapacityFunction]:
    """Pair a context-free grammar with the constant capacity k."""
    ensure_valid(g)
    if not all(r.is_context_free for r in g.rules):
        raise GrammarError("a context-free grammar is required")
    if k < 1:
        raise CapacityError(f"capacity must be at least 1, got {k}")
    return g, CapacityFunction.constant(g.nonterminals, k)


def rename_nonterminals(g: Grammar, tag: str, avoid: Iterable[str] = ()) -> Tuple[Grammar, Dict[str, str]]:
    """Suffix `_tag` to every nonterminal and rule label."""
    taken = set(g.terminals) | set(avoid)
    names: Dict[str, str] = {}
    for a in g.nonterminals:
        names[a] = fresh_symbol(f"{a}_{tag}", taken)
        taken.add(names[a])
    rules = tuple(
        Rule(f"{r.label}_{tag}", tuple(names[s] for s in r.lhs), tuple(names.get(s, s) for s in r.rhs))
        for r in g.rules
    )
    renamed = Grammar(tuple(names[a] for a in g.nonterminals), g.terminals, names[g.start], rules, g.cf_flag)
    return renamed, names


def _capacity_one_input(g: Grammar, k: Optional[CapacityFunction]) -> Tuple[Grammar, Dict[str, Optional[str]]]:
    """The grammar under capacity 1 and a map from its rule labels to those of `g`."""
    if k is not None and not k.is_one:
        g1, _, norm = normalize_capacity_to_one(g, k)
        return g1, dict(norm.rule_map)
    return g, {r.label: r.label for r in g.rules}


CLOSURE_OPS = ("union", "concat", "star", "homomorphism")


def closure_construct(
    op: str,
    g1: Grammar,
    g2: Optional[Grammar] = None,
    mapping: Optional[Mapping[str, Sequence[str]]] = None,
    k1: Optional[CapacityFunction] = None,
    k2: Optional[CapacityFunction] = None,
) -> Tuple[Grammar, CapacityFunction, Provenance]:
    """Union, concatenation, Kleene star and homomorphic image of capacity-1 grammars.

    Inputs with another capacity are normalized first; union and concatenation rename both
    operands apart with the suffixes _1 and _2.
    """
    if op not in CLOSURE_OPS:
        raise TransformError(f"unknown closure operation {op!r}")
    ensure_valid(g1)
    prov = Provenance(op)
    if op in ("union", "concat"):
        if g2 is None:
            raise TransformError(f"{op} needs two grammars")
        ensure_valid(g2)
        a, map1 = _capacity_one_input(g1, k1)
        b, map2 = _capacity_one_input(g2, k2)
        left, _ = rename_nonterminals(a, "1", avoid=b.terminals)
        right, _ = rename_nonterminals(b, "2", avoid=set(a.terminals) | set(left.nonterminals))
        for operand, (src, renamed, mapping_) in enumerate(((a, left, map1), (b, right, map2))):
            for r, r_new in zip(src.rules, renamed.rules):
                prov.rule_map[r_new.label] = mapping_[r.label]
                prov.operand[r_new.label] = operand
        terminals = left.terminals + tuple(a for a in right.terminals if a not in left.terminal_set)
        clash = (set(left.nonterminals) | set(right.nonterminals)) & set(terminals)
        if clash:
            raise TransformError(f"alphabet collision after renaming: {', '.join(sorted(clash))}")
        taken = set(left.nonterminals) | set(right.nonterminals) | set(terminals)
        start = fresh_symbol("S'", taken)
        labels = {r.label for r in left.rules} | {r.label for r in right.rules}
        if op == "union":
            extra = [
                Rule(fresh_symbol("start_1", labels), (start,), (left.start,)),
                Rule(fresh_symbol("start_2", labels), (start,), (right.start,)),
            ]
        else:
            extra = [Rule(fresh_symbol("init", labels), (start,), (left.start, right.start))]
        rules = tuple(extra) + left.rules + right.rules
        nonterminals = (start,) + left.nonterminals + right.nonterminals
        prov.rule_map = {**{r.label: None for r in extra}, **prov.rule_map}
        out = Grammar(nonterminals, terminals, start, rules, left.cf_flag and right.cf_flag)
    elif op == "star":
        g, prov.rule_map = _capacity_one_input(g1, k1)
        taken = _all_symbols(g)
        start = fresh_symbol("S'", taken)
        labels = {r.label for r in g.rules}
        loop = Rule(fresh_symbol("loop", labels), (start,), (g.start, start))
        stop = Rule(fresh_symbol("stop", labels | {loop.label}), (start,), ())
        prov.rule_map = {loop.label: None, stop.label: None, **prov.rule_map}
        out = Grammar((start,) + g.nonterminals, g.terminals, start, (loop, stop) + g.rules, g.cf_flag)
    else:
        if mapping is None:
            raise TransformError("homomorphism needs a terminal mapping")
        g, prov.rule_map = _capacity_one_input(g1, k1)
        image = {a: tuple(mapping.get(a, (a,))) for a in g.terminals}
        terminals: List[str] = []
        for a in g.terminals:
            for b in image[a]:
                if b not in terminals:
                    terminals.append(b)
        clash = set(terminals) & g.nonterminal_set
        if clash:
            raise TransformError(f"homomorphic image collides with nonterminals: {', '.join(sorted(clash))}")
        rules = tuple(
            Rule(r.label, r.lhs, tuple(b for s in r.rhs for b in (image[s] if s in image else (s,))))
            for r in g.rules
        )
        out = Grammar(g.nonterminals, tuple(terminals), g.start, rules, g.cf_flag)
    ensure_valid(out)
    logger.info(f"Closure {op}: {len(out.nonterminals)} nonterminals, {len(out.rules)} rules")
    return out, CapacityFunction.ones(out.nonterminals), prov


# --- vector grammars with capacity 1 to vector grammars of finite index ---

def _split_repeated(g: RegulatedGrammar) -> Tuple[List[Rule], List[Tuple[str, Tuple[Rule, ...]]], Dict[str, str]]:
    """Give every occurrence of a rule inside the matrices its own label."""
    used = {r.label for r in g.base.rules}
    seen: set = set()
    source: Dict[str, str] = {r.label: r.label for r in g.base.rules}
    extra: List[Rule] = []
    matrices = []
    for m in g.matrices:
        rules = []
        for r in m.rules:
            if r.label in seen:
                label = fresh_symbol(f"{r.label}'", used)
                used.add(label)
                copy = Rule(label, r.lhs, r.rhs)
                extra.append(copy)
                source[label] = r.label
                rules.append(copy)
            else:
                seen.add(r.label)
                rules.append(r)
        matrices.append((m.label, tuple(rules)))
    return list(g.base.rules) + extra, matrices, source


def vector_cb_to_vector_fin(
    g: RegulatedGrammar,
    symbol_budget: int = DEFAULT_SYMBOL_BUDGET,
    rule_budget: int = DEFAULT_RULE_BUDGET,
) -> Tuple[RegulatedGrammar, Provenance]:
    """Vector grammar of index at most 2|V|+1 for a vector grammar under capacity 1.

    Every rule r: A -> α becomes μ(r) = (C -> C', s_0, ..., s_m, r, C' -> C) where
    s_i = B_i -> B'_i when A = A_i and A_i does not occur in α, and s_i = B'_i -> B_i when
    A ≠ A_i and A_i occurs once in α. B_i marks A_i present, B'_i absent; the C/C' lock keeps
    the μ(r) from interleaving.
    """
    report = validate_regulated(g)
    if not report.ok:
        raise GrammarError(f"invalid regulated grammar:\n{report}")
    if g.mode is not ControlMode.VECTOR:
        raise TransformError(f"vector_cb_to_vector_fin needs a vector grammar, got {g.mode.value} mode")
    if g.restriction.kind != "capacity" or not g.restriction.capacity.is_one:
        raise TransformError("vector_cb_to_vector_fin needs capacity 1; normalize the capacity first")
    base = g.base
    order = (base.start,) + tuple(a for a in base.nonterminals if a != base.start)
    _check_budget("nonterminal count", 3 * len(order) + 3, symbol_budget)
    taken = _all_symbols(base)

    def fresh(name: str) -> str:
        out = fresh_symbol(name, taken)
        taken.add(out)
        return out

    on = {a: fresh(f"B[{a}]") for a in order}
    off = {a: fresh(f"B'[{a}]") for a in order}
    lock = fresh("C")
    held = fresh(f"{lock}'")
    start = fresh("S'")

    rules, split, source = _split_repeated(g)
    labels = {r.label for r in rules}

    def rule(name: str, lhs: Word, rhs: Word) -> Rule:
        label = fresh_symbol(name, labels)
        labels.add(label)
        return Rule(label, lhs, rhs)

    acquire = rule("lock", (lock,), (held,))
    release = rule("unlock", (held,), (lock,))
    drop = {a: rule(f"drop_{a}", (on[a],), (off[a],)) for a in order}
    add = {a: rule(f"add_{a}", (off[a],), (on[a],)) for a in order}
    start_rule = rule("init", (start,), (base.start, on[base.start]) + tuple(off[a] for a in order[1:]) + (lock,))
    finish = [rule("end_lock", (lock,), ())] + [rule(f"end_{a}", (off[a],), ()) for a in order]

    def mu(r: Rule) -> Tuple[Rule, ...]:
        (a,) = r.lhs
        steps = [acquire]
        for x in order:
            n = r.rhs.count(x)
            if x == a and n == 0:
                steps.append(drop[x])
            elif x != a and n == 1:
                steps.append(add[x])
        return tuple(steps) + (r, release)

    prov = Provenance("vec-fin")
    matrices = [Matrix("m_start", (start_rule,))]
    prov.matrix_map["m_start"] = None
    kept_rules: Dict[str, Rule] = {}
    taken_m = {"m_start", "m_end"}
    for label, m_rules in split:
        if any(r.rhs.count(x) >= 2 for r in m_rules for x in order):
            logger.info(f"Dropping matrix {label}: a rule doubles a nonterminal")
            continue
        flat = tuple(s for r in m_rules for s in mu(r))
        name = fresh_symbol(label, taken_m)
        taken_m.add(name)
        matrices.append(Matrix(name, flat))
        prov.matrix_map[name] = label
        for r in m_rules:
            kept_rules[r.label] = r
    end_name = fresh_symbol("m_end", {m.label for m in matrices})
    matrices.append(Matrix(end_name, tuple(finish)))
    prov.matrix_map[end_name] = None

    all_rules = (
        [start_rule, acquire, release]
        + [drop[a] for a in order]
        + [add[a] for a in order]
        + finish
        + [r for r in rules if r.label in kept_rules]
    )
    _check_budget("rule count", len(all_rules), rule_budget)
    for r in all_rules:
        prov.rule_map[r.label] = source.get(r.label) if r.label in kept_rules else None
    nonterminals = (start,) + order + tuple(on[a] for a in order) + tuple(off[a] for a in order) + (lock, held)
    out_base = Grammar(nonterminals, base.terminals, start, tuple(all_rules), cf_flag=True)
    out = RegulatedGrammar(out_base, tuple(matrices), ControlMode.VECTOR, Restriction.none())
    logger.info(f"Vector grammar of finite index: {len(matrices)} matrices, {len(all_rules)} rules")
    return out, prov
