"""petri.py
Place/transition nets with arc weights, markings, place capacities and path structures.
"""
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

from .errors import FiringError, NetError, ValidationReport
from .logger import get_logger

logger = get_logger()

Arc = Tuple[str, str]

INSUFFICIENT_INPUT = "insufficient input"
CAPACITY_OVERFLOW = "capacity overflow"


@dataclass(frozen=True, eq=False)
class PetriNet:
    """N = (P, T, F, φ); `weights` maps each arc of F to its weight, absent pairs weigh 0."""

    places: Tuple[str, ...]
    transitions: Tuple[str, ...]
    weights: Mapping[Arc, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "places", tuple(self.places))
        object.__setattr__(self, "transitions", tuple(self.transitions))
        object.__setattr__(self, "weights", dict(self.weights))
        clash = set(self.places) & set(self.transitions)
        if clash:
            raise NetError(f"places and transitions overlap: {', '.join(sorted(clash))}")
        places, transitions = set(self.places), set(self.transitions)
        for (x, y), w in self.weights.items():
            if not ((x in places and y in transitions) or (x in transitions and y in places)):
                raise NetError(f"arc ({x}, {y}) must connect a place and a transition")
            if not isinstance(w, int) or w < 1:
                raise NetError(f"arc ({x}, {y}) needs a positive weight, got {w!r}")

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, PetriNet)
            and self.places == other.places
            and self.transitions == other.transitions
            and self.weights == other.weights
        )

    def __hash__(self) -> int:
        return hash((self.places, self.transitions, frozenset(self.weights.items())))

    @cached_property
    def arcs(self) -> FrozenSet[Arc]:
        return frozenset(self.weights)

    @cached_property
    def _pre(self) -> Dict[str, Dict[str, int]]:
        pre: Dict[str, Dict[str, int]] = {t: {} for t in self.transitions}
        for (x, y), w in self.weights.items():
            if y in pre:
                pre[y][x] = w
        return pre

    @cached_property
    def _post(self) -> Dict[str, Dict[str, int]]:
        post: Dict[str, Dict[str, int]] = {t: {} for t in self.transitions}
        for (x, y), w in self.weights.items():
            if x in post:
                post[x][y] = w
        return post

    def weight(self, x: str, y: str) -> int:
        return self.weights.get((x, y), 0)

    def pre(self, t: str) -> Dict[str, int]:
        """Input places of t with φ(p, t)."""
        self._check_transition(t)
        return self._pre[t]

    def post(self, t: str) -> Dict[str, int]:
        """Output places of t with φ(t, p)."""
        self._check_transition(t)
        return self._post[t]

    def _check_transition(self, t: str) -> None:
        if t not in self._pre:
            raise NetError(f"unknown transition {t!r}")


@dataclass(frozen=True, eq=False)
class Marking:
    """μ: P -> N, stored for every place of the net (zeros included)."""

    tokens: Mapping[str, int]

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", dict(self.tokens))

    @classmethod
    def of(cls, net: PetriNet, tokens: Optional[Mapping[str, int]] = None) -> "Marking":
        tokens = dict(tokens or {})
        unknown = set(tokens) - set(net.places)
        if unknown:
            raise NetError(f"marking mentions unknown places: {', '.join(sorted(unknown))}")
        return cls({p: tokens.get(p, 0) for p in net.places})

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Marking) and self.tokens == other.tokens

    def __hash__(self) -> int:
        return hash(frozenset(self.tokens.items()))

    def __getitem__(self, place: str) -> int:
        return self.tokens.get(place, 0)

    def total(self, places: Optional[Iterable[str]] = None) -> int:
        if places is None:
            return sum(self.tokens.values())
        return sum(self.tokens.get(p, 0) for p in places)

    def __str__(self) -> str:
        return " ".join(f"{p}={n}" for p, n in self.tokens.items())


@dataclass(frozen=True, eq=False)
class CapacityAssignment:
    """κ: P -> positive integers; None marks an unbounded place."""

    cap: Mapping[str, Optional[int]]

    def __post_init__(self) -> None:
        object.__setattr__(self, "cap", dict(self.cap))
        for p, b in self.cap.items():
            if b is not None and (isinstance(b, bool) or not isinstance(b, int) or b < 1):
                raise NetError(f"capacity of {p} must be a positive integer or unbounded, got {b!r}")

    @classmethod
    def of(cls, net: PetriNet, cap: Optional[Mapping[str, Optional[int]]] = None) -> "CapacityAssignment":
        cap = dict(cap or {})
        unknown = set(cap) - set(net.places)
        if unknown:
            raise NetError(f"capacity mentions unknown places: {', '.join(sorted(unknown))}")
        return cls({p: cap.get(p) for p in net.places})

    @classmethod
    def uniform(cls, net: PetriNet, k: int) -> "CapacityAssignment":
        return cls({p: k for p in net.places})

    def __eq__(self, other: object) -> bool:
        return isinstance(other, CapacityAssignment) and self.cap == other.cap

    def __hash__(self) -> int:
        return hash(frozenset(self.cap.items()))

    def __getitem__(self, place: str) -> Optional[int]:
        return self.cap.get(place)

    @property
    def is_finite(self) -> bool:
        return all(b is not None for b in self.cap.values())

    def valid(self, m: Marking) -> bool:
        for p, b in self.cap.items():
            if b is not None and m[p] > b:
                return False
        return True


def _successor_tokens(n: PetriNet, m: Marking, t: str) -> Dict[str, int]:
    tokens = dict(m.tokens)
    for p, w in n.pre(t).items():
        tokens[p] = tokens.get(p, 0) - w
    for p, w in n.post(t).items():
        tokens[p] = tokens.get(p, 0) + w
    return tokens


def _blocker(n: PetriNet, m: Marking, t: str, c: Optional[CapacityAssignment]) -> Optional[str]:
    for p, w in n.pre(t).items():
        if m[p] < w:
            return INSUFFICIENT_INPUT
    if c is not None:
        tokens = _successor_tokens(n, m, t)
        for p in n.post(t):
            b = c[p]
            if b is not None and tokens[p] > b:
                return CAPACITY_OVERFLOW
    return None


def enabled(n: PetriNet, m: Marking, t: str, c: Optional[CapacityAssignment] = None) -> bool:
    """μ(p) >= φ(p, t) for all p, and with capacities the successor marking must be valid."""
    return _blocker(n, m, t, c) is None


def fire(n: PetriNet, m: Marking, t: str) -> Marking:
    """μ'(p) = μ(p) - φ(p, t) + φ(t, p)."""
    reason = _blocker(n, m, t, None)
    if reason is not None:
        raise FiringError(t, reason)
    return Marking(_successor_tokens(n, m, t))


def fire_within(n: PetriNet, m: Marking, t: str, c: Optional[CapacityAssignment]) -> Optional[Marking]:
    """The successor marking when t is enabled under c, else None."""
    if _blocker(n, m, t, c) is not None:
        return None
    return Marking(_successor_tokens(n, m, t))


def run_sequence(
    n: PetriNet,
    m0: Marking,
    seq: Sequence[str],
    c: Optional[CapacityAssignment] = None,
) -> Marking:
    m = m0
    for step, t in enumerate(seq, start=1):
        if t not in n.transitions:
            raise NetError(f"step {step}: unknown transition {t!r}")
        reason = _blocker(n, m, t, c)
        if reason is not None:
            raise FiringError(t, reason, step)
        m = Marking(_successor_tokens(n, m, t))
    return m


@dataclass
class ReachabilityResult:
    markings: List[Marking]
    exhaustive: bool

    def max_tokens(self) -> Dict[str, int]:
        out: Dict[str, int] = {}
        for m in self.markings:
            for p, k in m.tokens.items():
                out[p] = max(out.get(p, 0), k)
        return out


def reachability_set(
    n: PetriNet,
    m0: Marking,
    c: Optional[CapacityAssignment] = None,
    limit: int = 100_000,
) -> ReachabilityResult:
    """Breadth-first closure of R(N, μ0); exhaustive iff closed before `limit` markings."""
    seen = {m0}
    order = [m0]
    queue = deque([m0])
    while queue:
        m = queue.popleft()
        for t in n.transitions:
            nxt = fire_within(n, m, t, c)
            if nxt is None or nxt in seen:
                continue
            if len(seen) >= limit:
                logger.warning(f"Reachability stopped at limit={limit}")
                return ReachabilityResult(order, False)
            seen.add(nxt)
            order.append(nxt)
            queue.append(nxt)
    return ReachabilityResult(order, True)


@dataclass
class BoundednessResult:
    verdict: Optional[bool]
    witness: Optional[Marking] = None

    @property
    def label(self) -> str:
        return {True: "true", False: "false", None: "unknown"}[self.verdict]


def is_k_bounded(
    n: PetriNet,
    m0: Marking,
    k: int,
    limit: int = 100_000,
    c: Optional[CapacityAssignment] = None,
) -> BoundednessResult:
    """False with a witness marking above k, True once the closure completes, None at the limit."""

    def over(m: Marking) -> bool:
        return any(v > k for v in m.tokens.values())

    if over(m0):
        return BoundednessResult(False, m0)
    seen = {m0}
    queue = deque([m0])
    while queue:
        m = queue.popleft()
        for t in n.transitions:
            nxt = fire_within(n, m, t, c)
            if nxt is None or nxt in seen:
                continue
            if over(nxt):
                return BoundednessResult(False, nxt)
            if len(seen) >= limit:
                return BoundednessResult(None)
            seen.add(nxt)
            queue.append(nxt)
    return BoundednessResult(True)


def reversed_net(n: PetriNet) -> PetriNet:
    """Every arc flipped: firing t here undoes firing t in `n`."""
    return PetriNet(n.places, n.transitions, {(y, x): w for (x, y), w in n.weights.items()})


@dataclass(frozen=True)
class PathSpec:
    kind: str  # "chain" | "cycle"
    elements: Tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "elements", tuple(self.elements))

    @property
    def interior(self) -> Tuple[str, ...]:
        if self.kind == "cycle" and len(self.elements) > 1:
            return self.elements[:-1]
        return self.elements

    def places(self, n: PetriNet) -> Set[str]:
        ps = set(n.places)
        return {x for x in self.elements if x in ps}

    def transitions(self, n: PetriNet) -> Set[str]:
        ts = set(n.transitions)
        return {x for x in self.elements if x in ts}


def _check_path(n: PetriNet, spec: PathSpec, i: int, distinct_chain_ends: bool) -> ValidationReport:
    report = ValidationReport()
    el = spec.elements
    places, transitions = set(n.places), set(n.transitions)
    name = f"path {i + 1} ({spec.kind})"
    if not el:
        report.add(f"{name}: empty")
        return report
    unknown = [x for x in el if x not in places and x not in transitions]
    if unknown:
        report.add(f"{name}: unknown elements {', '.join(unknown)}")
        return report
    if spec.kind == "chain":
        if el[0] not in transitions or el[-1] not in transitions:
            report.add(f"{name}: a chain must start and end with transitions")
        body = el
        if not distinct_chain_ends and len(el) > 1 and el[0] == el[-1]:
            body = el[:-1]
    elif spec.kind == "cycle":
        if len(el) < 3 or el[0] != el[-1] or el[0] not in places:
            report.add(f"{name}: a cycle must start and end at the same place")
        body = el[:-1]
    else:
        report.add(f"{name}: unknown path kind {spec.kind!r}")
        return report
    for a, b in zip(el, el[1:]):
        if (a in places) == (b in places):
            report.add(f"{name}: {a} and {b} do not alternate between places and transitions")
        elif (a, b) not in n.arcs:
            report.add(f"{name}: no arc {a} -> {b}")
    if len(set(body)) != len(body):
        report.add(f"{name}: repeated element")
    return report


def validate_paths(
    n: PetriNet,
    specs: Sequence[PathSpec],
    shared: Optional[str] = None,
    partition: Optional[Sequence[Iterable[str]]] = None,
    distinct_chain_ends: bool = True,
) -> ValidationReport:
    """Chain/cycle structure, pairwise disjointness (apart from `shared`), and T_ρi = T_i."""
    report = ValidationReport()
    for i, spec in enumerate(specs):
        report.extend(_check_path(n, spec, i, distinct_chain_ends))
    for i in range(len(specs)):
        for j in range(i + 1, len(specs)):
            common_t = specs[i].transitions(n) & specs[j].transitions(n)
            if common_t:
                report.add(f"paths {i + 1} and {j + 1} share transitions {', '.join(sorted(common_t))}")
            common_p = specs[i].places(n) & specs[j].places(n)
            allowed = {shared} if shared is not None else set()
            if common_p - allowed:
                report.add(f"paths {i + 1} and {j + 1} share places {', '.join(sorted(common_p - allowed))}")
    if shared is not None:
        for i, spec in enumerate(specs):
            if shared not in spec.places(n):
                report.add(f"path {i + 1} does not pass through {shared}")
    if partition is not None:
        parts = [set(p) for p in partition]
        if len(parts) != len(specs):
            report.add(f"{len(specs)} paths for {len(parts)} partition blocks")
        for i, (spec, part) in enumerate(zip(specs, parts)):
            if spec.transitions(n) != part:
                report.add(f"path {i + 1} covers {sorted(spec.transitions(n))}, block is {sorted(part)}")
    return report
