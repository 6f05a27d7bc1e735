"""cli.py
Command-line front end.

    python -m toolkits.capgram enumerate samples/ex31.gr --max-len 9
    python -m toolkits.capgram transform samples/ex31.gr --to mat-fin --out abc-mat.gr
    python -m toolkits.capgram check-equal samples/ex31.gr abc-mat.gr --max-len 9
    python -m toolkits.capgram net build samples/ex-sec2.gr --kind c --partition samples/ex-sec2.part

Exit status: 0 on success, 1 on a domain error, 2 on a usage error.
"""
import argparse
import sys
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from .cfnet import (
    attach_capacity,
    build_cf_net,
    build_extended_net,
    capacity_mode,
    enumerate_controlled,
    export_dot,
)
from .derivation import EnumerationResult, SimplePattern, decide_membership, enumerate_language, filter_pattern
from .errors import CapgramError, TransformError
from .fileformat import (
    GrammarFile,
    format_grammar,
    format_net,
    parse_grammar_file,
    parse_net_file,
    parse_partition_file,
)
from .grammar import CapacityFunction, format_word, parse_word
from .logger import get_logger
from .petri import is_k_bounded, reachability_set, run_sequence
from .regulated import (
    ControlMode,
    RegulatedGrammar,
    Restriction,
    check_index_bound,
    enumerate_regulated,
)
from .settings import RunConfig, load_config
from .transforms import (
    closure_construct,
    gs_cb_to_blockwise,
    gs_cb_to_matrix_fin,
    normalize_capacity_to_one,
    normalize_regulated_capacity,
    vector_cb_to_vector_fin,
)

logger = get_logger()

NET_KINDS = ("cf", "h", "c", "s")
TARGETS = ("cap1", "blockwise", "mat-fin", "vec-fin", "star", "union", "concat", "hom")


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
        logger.info(f"Wrote {out}")
    else:
        sys.stdout.write(text)


def _control_caps(items: Optional[Sequence[str]]) -> Optional[dict]:
    if not items:
        return None
    out = {}
    for item in items:
        place, sep, value = item.partition("=")
        if not sep or not place or not value.isdigit():
            raise CapgramError(f"bad control cap {item!r}; expected place=N")
        out[place] = int(value)
    return out


def _config(args: argparse.Namespace) -> RunConfig:
    config = load_config(args.config) if args.config else None
    return RunConfig.resolve(
        {
            "max_terminal_len": args.max_len,
            "max_states": args.max_states,
            "max_open": args.max_open,
            "max_form_len": args.max_form_len,
            "semi_streams": args.semi_streams,
            "control_caps": _control_caps(getattr(args, "control_cap", None)),
            "output": args.out,
        },
        config,
    )


def _finite(gf: GrammarFile) -> Optional[CapacityFunction]:
    return gf.capacity if gf.has_capacity and gf.capacity.is_finite else None


def _net_target(gf: GrammarFile, kind: str, partition: Optional[str], cap_mode: str, cfg: RunConfig):
    """(net object, capacity mode or None) for a grammar file and a net kind."""
    k = _finite(gf)
    if kind == "cf":
        cn = build_cf_net(gf.grammar)
        return (attach_capacity(cn, k) if k is not None else cn), None
    if partition is None:
        raise CapgramError(f"a {kind}-net needs --partition")
    en = build_extended_net(gf.grammar, kind, parse_partition_file(partition).labels)
    cm = capacity_mode(en, k, cap_mode, cfg.control_capacity, cfg.control_caps) if k is not None else None
    return en, cm


def _enumerate(path: str, args: argparse.Namespace, cfg: RunConfig) -> Tuple[GrammarFile, EnumerationResult]:
    gf = parse_grammar_file(path, cf=getattr(args, "cf", False))
    b = cfg.budget()
    net_kind = getattr(args, "net_kind", None)
    if gf.regulated is not None:
        result = enumerate_regulated(gf.regulated, b, cfg.max_open, cfg.semi_streams, index_bound=getattr(args, "index", None))
    elif net_kind:
        target, cm = _net_target(gf, net_kind, args.partition, args.capacity_mode, cfg)
        result = enumerate_controlled(gf.grammar, target, cm, b)
    else:
        k = gf.capacity if gf.has_capacity else None
        result = enumerate_language(gf.grammar, k, b, index_bound=getattr(args, "index", None))
    if args.filter:
        pattern = SimplePattern.parse(args.filter)
        result = EnumerationResult(filter_pattern(result.words, pattern), result.exhaustive, result.states)
    return gf, result


def cmd_validate(args: argparse.Namespace, cfg: RunConfig) -> int:
    gf = parse_grammar_file(args.file, cf=args.cf)
    g = gf.grammar
    kind = gf.regulated.mode.value if gf.regulated is not None else ("context-free" if args.cf else "phrase-structure")
    _emit(f"valid: {kind} grammar, {len(g.nonterminals)} nonterminals, {len(g.rules)} rules\n", cfg.output)
    return 0


def cmd_enumerate(args: argparse.Namespace, cfg: RunConfig) -> int:
    _, result = _enumerate(args.file, args, cfg)
    _emit(result.render(), cfg.output)
    return 0


def cmd_member(args: argparse.Namespace, cfg: RunConfig) -> int:
    gf = parse_grammar_file(args.file)
    if gf.regulated is not None:
        raise CapgramError("member works on plain grammars; use enumerate for regulated ones")
    k = gf.capacity if gf.has_capacity else None
    result = decide_membership(parse_word(args.word), gf.grammar, k, cfg.budget())
    lines = [result.label]
    if result.witness is not None:
        lines.append(f"# witness: {' '.join(result.witness.labels)}")
    _emit("\n".join(lines) + "\n", cfg.output)
    return 0


def _mapping(items: Sequence[str]) -> dict:
    """a=xy or a="x y" -> {"a": ("x", "y")}; a= maps to the empty word."""
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise CapgramError(f"bad mapping {item!r}; expected a=word")
        out[key] = parse_word(value)
    return out


def cmd_transform(args: argparse.Namespace, cfg: RunConfig) -> int:
    gf = parse_grammar_file(args.file)
    target = args.to
    prov = None
    if target == "cap1":
        if gf.regulated is not None:
            rg, prov = normalize_regulated_capacity(gf.regulated, cfg.symbol_budget, cfg.rule_budget)
            text = format_grammar(rg.base, None, rg)
        else:
            g, k, prov = normalize_capacity_to_one(gf.grammar, gf.capacity, cfg.symbol_budget, cfg.rule_budget)
            text = format_grammar(g, k)
    elif target == "blockwise":
        g, prov = gs_cb_to_blockwise(gf.grammar, gf.capacity if gf.has_capacity else None, cfg.rule_budget)
        text = format_grammar(g, CapacityFunction.ones(g.nonterminals))
    elif target == "mat-fin":
        k = _finite(gf)
        if k is None:
            raise TransformError("mat-fin needs a finite capacity section")
        rg, prov = gs_cb_to_matrix_fin(gf.grammar, k, cfg.symbol_budget, cfg.rule_budget)
        text = format_grammar(rg.base, None, rg)
    elif target == "vec-fin":
        rg = gf.regulated
        if rg is None or rg.mode is not ControlMode.VECTOR:
            raise TransformError("vec-fin needs a vector grammar file")
        first = None
        if rg.restriction.kind == "capacity" and not rg.restriction.capacity.is_one:
            rg, first = normalize_regulated_capacity(rg, cfg.symbol_budget, cfg.rule_budget)
        out, prov = vector_cb_to_vector_fin(rg, cfg.symbol_budget, cfg.rule_budget)
        if first is not None:
            prov = first.then(prov)
        text = format_grammar(out.base, None, out)
    else:
        op = {"hom": "homomorphism"}.get(target, target)
        other = None
        k2 = None
        if op in ("union", "concat"):
            if not args.with_file:
                raise CapgramError(f"--to {target} needs --with FILE")
            other_file = parse_grammar_file(args.with_file)
            other, k2 = other_file.grammar, _finite(other_file)
        g, k, prov = closure_construct(
            op, gf.grammar, other, _mapping(args.map or []) if op == "homomorphism" else None, _finite(gf), k2
        )
        text = format_grammar(g, k)
    _emit(text, cfg.output)
    prov_path = args.prov or (f"{cfg.output}.prov" if cfg.output else None)
    if prov is not None and prov_path:
        Path(prov_path).write_text(prov.render(), encoding="utf-8")
        logger.info(f"Wrote provenance to {prov_path}")
    return 0


def cmd_check_equal(args: argparse.Namespace, cfg: RunConfig) -> int:
    _, a = _enumerate(args.file_a, args, cfg)
    _, b = _enumerate(args.file_b, args, cfg)
    in_a, in_b = set(a.words), set(b.words)
    only_a = [w for w in a.words if w not in in_b]
    only_b = [w for w in b.words if w not in in_a]
    if not (a.exhaustive and b.exhaustive):
        verdict = "inconclusive"
    elif only_a or only_b:
        verdict = "differs"
    else:
        verdict = "equal"
    lines = [verdict]
    examples = [("A", w) for w in only_a] + [("B", w) for w in only_b]
    for side, w in examples[:3]:
        lines.append(f"only in {side}: {format_word(w)}")
    _emit("\n".join(lines) + "\n", cfg.output)
    return 0


def cmd_net_build(args: argparse.Namespace, cfg: RunConfig) -> int:
    gf = parse_grammar_file(args.file)
    target, cm = _net_target(gf, args.kind, args.partition, args.capacity_mode, cfg)
    if args.kind == "cf":
        capacity = getattr(target, "capacity", None)
        text = format_net(target.net, target.initial if capacity is None else target.cf.initial, capacity)
    else:
        text = format_net(target.net, target.initial, cm.caps if cm is not None else None, target.final)
    _emit(text, cfg.output)
    return 0


def cmd_net_run(args: argparse.Namespace, cfg: RunConfig) -> int:
    nf = parse_net_file(args.file)
    m = run_sequence(nf.net, nf.marking, args.sequence, nf.capacity)
    _emit(f"{m}\n", cfg.output)
    return 0


def cmd_net_reach(args: argparse.Namespace, cfg: RunConfig) -> int:
    nf = parse_net_file(args.file)
    result = reachability_set(nf.net, nf.marking, nf.capacity, cfg.reach_limit)
    bounded = is_k_bounded(nf.net, nf.marking, args.bound, cfg.reach_limit, nf.capacity)
    lines = [
        f"markings: {len(result.markings)}",
        f"exhaustive: {'true' if result.exhaustive else 'false'}",
    ]
    peak = result.max_tokens()
    lines.extend(f"max {p}={peak.get(p, 0)}" for p in nf.net.places)
    lines.append(f"{args.bound}-bounded: {bounded.label}")
    if bounded.witness is not None:
        lines.append(f"witness: {bounded.witness}")
    _emit("\n".join(lines) + "\n", cfg.output)
    return 0


def cmd_net_export(args: argparse.Namespace, cfg: RunConfig) -> int:
    if args.kind:
        gf = parse_grammar_file(args.file)
        target, cm = _net_target(gf, args.kind, args.partition, args.capacity_mode, cfg)
        text = export_dot(target, capacity=cm.caps if cm is not None else None)
    else:
        nf = parse_net_file(args.file)
        text = export_dot(nf.net, nf.marking, nf.capacity)
    _emit(text, cfg.output)
    return 0


def cmd_index_check(args: argparse.Namespace, cfg: RunConfig) -> int:
    gf = parse_grammar_file(args.file)
    rg = gf.regulated
    if rg is None:
        restriction = Restriction.of_capacity(gf.capacity) if gf.has_capacity else Restriction.none()
        rg = RegulatedGrammar.from_grammar(gf.grammar, ControlMode.MATRIX, restriction)
    check = check_index_bound(rg, args.k, cfg.budget(), cfg.max_open, cfg.semi_streams)
    lines = [{True: "true", False: "false", None: "unknown"}[check.holds]]
    if check.counterexample is not None:
        lines.append(f"# counterexample: {format_word(check.counterexample)}")
        lines.append(f"# derivation: {' '.join(check.witness.labels)}")
    _emit("\n".join(lines) + "\n", cfg.output)
    return 0


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--max-len", type=int, help="Maximum terminal length of enumerated words.")
    common.add_argument("--max-states", type=int, help="Safety cap on explored search states.")
    common.add_argument("--max-open", type=int, help="Cap on simultaneously open matrices (vector mode).")
    common.add_argument("--max-form-len", type=int, help="Cutoff on sentential form length.")
    common.add_argument("--semi-streams", type=int, help="Concurrent streams per matrix (semi-matrix mode).")
    common.add_argument("--filter", help="Keep only words matching a pattern such as a*ccb*a*cb*.")
    common.add_argument("--out", help="Write the result to this file instead of stdout.")
    common.add_argument("--config", help="Alternative config.json.")
    return common


def _net_options(p: argparse.ArgumentParser, kind_flag: str, required: bool) -> None:
    p.add_argument(kind_flag, dest="kind" if kind_flag == "--kind" else "net_kind", choices=NET_KINDS, required=required)
    p.add_argument("--partition", help="Partition file (part: T1 = r0 r1;) for h/c/s nets.")
    p.add_argument("--capacity-mode", choices=("weak", "strong"), default="weak")
    p.add_argument("--control-cap", nargs="*", metavar="Q=N", help="Caps on named control places under strong capacity.")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="capgram", description="Capacity-bounded grammars and Petri net control.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="Parse and validate a grammar file.")
    p.add_argument("file")
    p.add_argument("--cf", action="store_true", help="Require a context-free grammar.")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("enumerate", parents=[common], help="List the language fragment up to --max-len.")
    p.add_argument("file")
    p.add_argument("--index", type=int, help="Only derivations with at most this many nonterminals per form.")
    _net_options(p, "--net-kind", required=False)
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("member", parents=[common], help="Decide membership of one word.")
    p.add_argument("file")
    p.add_argument("word", help='The word, e.g. aabbcc or "a b c"; "~" is the empty word.')
    p.set_defaults(func=cmd_member)

    p = sub.add_parser("transform", parents=[common], help="Apply a grammar construction.")
    p.add_argument("file")
    p.add_argument("--to", choices=TARGETS, required=True)
    p.add_argument("--with", dest="with_file", help="Second grammar for union and concat.")
    p.add_argument("--map", nargs="*", help="Homomorphism entries a=xy.")
    p.add_argument("--prov", help="Provenance sidecar path (default: OUT.prov).")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("check-equal", parents=[common], help="Compare two language fragments.")
    p.add_argument("file_a")
    p.add_argument("file_b")
    _net_options(p, "--net-kind", required=False)
    p.set_defaults(func=cmd_check_equal)

    net = sub.add_parser("net", help="Petri net tools.")
    net_sub = net.add_subparsers(dest="net_command", required=True)
    p = net_sub.add_parser("build", parents=[common], help="Build a cf/h/c/s net from a grammar.")
    p.add_argument("file")
    _net_options(p, "--kind", required=True)
    p.set_defaults(func=cmd_net_build)
    p = net_sub.add_parser("run", parents=[common], help="Fire a transition sequence.")
    p.add_argument("file")
    p.add_argument("sequence", nargs="*")
    p.set_defaults(func=cmd_net_run)
    p = net_sub.add_parser("reach", parents=[common], help="Reachability statistics.")
    p.add_argument("file")
    p.add_argument("--bound", type=int, default=1, help="k for the k-boundedness verdict.")
    p.set_defaults(func=cmd_net_reach)
    p = net_sub.add_parser("export", parents=[common], help="Write a DOT rendering.")
    p.add_argument("file", help="A net file, or a grammar file together with --kind.")
    _net_options(p, "--kind", required=False)
    p.set_defaults(func=cmd_net_export)

    p = sub.add_parser("index-check", parents=[common], help="Check an index bound on the fragment.")
    p.add_argument("file")
    p.add_argument("-k", type=int, required=True)
    p.set_defaults(func=cmd_index_check)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config(args)
        return args.func(args, cfg)
    except CapgramError as e:
        logger.error(str(e))
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
