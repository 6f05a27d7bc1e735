"""randomized.py
Seeded generators for the property suites.

Every function takes an explicit `random.Random`; nothing here touches the global generator,
so a suite is reproduced by its seed alone (RunConfig.seed, CAPGRAM_SEED).
"""
import random
from typing import Dict, List, Optional, Sequence, Tuple

from .grammar import CapacityFunction, Grammar, Rule
from .petri import CapacityAssignment, Marking, PetriNet
from .regulated import ControlMode, Matrix, RegulatedGrammar, Restriction

_NONTERMINALS = ("S", "A", "B", "C", "D", "E")


def _nonterminals(rng: random.Random, max_nonterminals: int) -> Tuple[str, ...]:
    n = rng.randint(1, min(max_nonterminals, len(_NONTERMINALS)))
    return _NONTERMINALS[:n]


def _rhs(rng: random.Random, nonterminals: Sequence[str], terminals: Sequence[str], max_rhs: int) -> Tuple[str, ...]:
    length = rng.randint(0, max_rhs)
    symbols = list(nonterminals) + list(terminals) * 2
    return tuple(rng.choice(symbols) for _ in range(length))


def _ensure_terminating(rules: List[Rule], nonterminals: Sequence[str], terminals: Sequence[str], rng: random.Random) -> None:
    """Every nonterminal gets at least one rule with a terminal-only rhs."""
    covered = {r.lhs[0] for r in rules if len(r.lhs) == 1 and all(s in terminals for s in r.rhs)}
    for a in nonterminals:
        if a not in covered:
            rules.append(Rule(f"r{len(rules) + 1}", (a,), (rng.choice(terminals),)))


def random_cfg(
    rng: random.Random,
    max_nonterminals: int = 3,
    max_rules: int = 6,
    terminals: Sequence[str] = ("a", "b"),
    max_rhs: int = 3,
) -> Grammar:
    nts = _nonterminals(rng, max_nonterminals)
    rules = [
        Rule(f"r{i}", (rng.choice(nts),), _rhs(rng, nts, terminals, max_rhs))
        for i in range(1, rng.randint(1, max_rules) + 1)
    ]
    if not any(r.lhs == ("S",) for r in rules):
        rules[0] = Rule(rules[0].label, ("S",), rules[0].rhs)
    _ensure_terminating(rules, nts, terminals, rng)
    return Grammar(nts, tuple(terminals), "S", tuple(rules), cf_flag=True)


def random_grammar(
    rng: random.Random,
    max_nonterminals: int = 4,
    max_rules: int = 8,
    terminals: Sequence[str] = ("a", "b"),
    max_lhs: int = 2,
    max_rhs: int = 3,
) -> Grammar:
    """A Ginsburg-Spanier grammar: left-hand sides are nonempty nonterminal strings."""
    nts = _nonterminals(rng, max_nonterminals)
    rules = []
    for i in range(1, rng.randint(1, max_rules) + 1):
        lhs = tuple(rng.choice(nts) for _ in range(rng.randint(1, max_lhs)))
        rules.append(Rule(f"r{i}", lhs, _rhs(rng, nts, terminals, max_rhs)))
    if not any(r.lhs == ("S",) for r in rules):
        rules[0] = Rule(rules[0].label, ("S",), rules[0].rhs)
    _ensure_terminating(rules, nts, terminals, rng)
    return Grammar(nts, tuple(terminals), "S", tuple(rules))


def random_capacity(rng: random.Random, g: Grammar, max_bound: int = 3) -> CapacityFunction:
    return CapacityFunction({a: rng.randint(1, max_bound) for a in g.nonterminals})


def random_vector_grammar(
    rng: random.Random,
    max_nonterminals: int = 3,
    max_matrices: int = 3,
    terminals: Sequence[str] = ("a", "b"),
    max_matrix_len: int = 2,
) -> RegulatedGrammar:
    """A vector grammar under capacity 1 whose first matrix starts from S."""
    nts = _nonterminals(rng, max_nonterminals)
    rules: List[Rule] = []
    matrices: List[Matrix] = []
    for i in range(1, rng.randint(1, max_matrices) + 1):
        members = []
        for _ in range(rng.randint(1, max_matrix_len)):
            r = Rule(f"r{len(rules) + 1}", (rng.choice(nts),), _rhs(rng, nts, terminals, 2))
            rules.append(r)
            members.append(r)
        matrices.append(Matrix(f"m{i}", tuple(members)))
    if matrices[0].rules[0].lhs != ("S",):
        first = matrices[0].rules[0]
        fixed = Rule(first.label, ("S",), first.rhs)
        rules[0] = fixed
        matrices[0] = Matrix(matrices[0].label, (fixed,) + matrices[0].rules[1:])
    for a in nts:
        r = Rule(f"r{len(rules) + 1}", (a,), (rng.choice(terminals),))
        rules.append(r)
        matrices.append(Matrix(f"m{len(matrices) + 1}", (r,)))
    g = Grammar(nts, tuple(terminals), "S", tuple(rules), cf_flag=True)
    return RegulatedGrammar(g, tuple(matrices), ControlMode.VECTOR, Restriction.of_capacity(CapacityFunction.ones(nts)))


def random_partition(rng: random.Random, labels: Sequence[str], max_block: int = 3) -> List[Tuple[str, ...]]:
    shuffled = list(labels)
    rng.shuffle(shuffled)
    blocks: List[Tuple[str, ...]] = []
    while shuffled:
        k = rng.randint(1, min(max_block, len(shuffled)))
        blocks.append(tuple(shuffled[:k]))
        shuffled = shuffled[k:]
    return blocks


def random_net(
    rng: random.Random,
    max_places: int = 4,
    max_transitions: int = 4,
    max_weight: int = 2,
    arc_probability: float = 0.4,
) -> PetriNet:
    places = tuple(f"p{i}" for i in range(1, rng.randint(1, max_places) + 1))
    transitions = tuple(f"t{i}" for i in range(1, rng.randint(1, max_transitions) + 1))
    weights: Dict[Tuple[str, str], int] = {}
    for p in places:
        for t in transitions:
            if rng.random() < arc_probability:
                weights[(p, t)] = rng.randint(1, max_weight)
            if rng.random() < arc_probability:
                weights[(t, p)] = rng.randint(1, max_weight)
    return PetriNet(places, transitions, weights)


def random_marking(rng: random.Random, n: PetriNet, max_tokens: int = 3) -> Marking:
    return Marking.of(n, {p: rng.randint(0, max_tokens) for p in n.places})


def random_capacity_assignment(
    rng: random.Random,
    n: PetriNet,
    at_least: Optional[Marking] = None,
    max_cap: int = 4,
    unbounded_probability: float = 0.2,
) -> CapacityAssignment:
    """Caps that the marking `at_least` (if given) already respects."""
    caps: Dict[str, Optional[int]] = {}
    for p in n.places:
        floor = max(1, at_least[p]) if at_least is not None else 1
        caps[p] = None if rng.random() < unbounded_probability else rng.randint(floor, max(floor, max_cap))
    return CapacityAssignment.of(n, caps)
