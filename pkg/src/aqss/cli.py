"""Command-line front end: parse, analyze, build, simulate, verify, render.

Exit codes: 0 success (and verification passed), 1 input or cap error,
2 verification failed, 3 unsupported structure, 4 amplitude cap exceeded.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .access import (
    canonical_text,
    check_pairwise_overlap,
    format_player_set,
    parse_access_structure,
)
from .engine import (
    DEFAULT_AMPLITUDE_CAP,
    choose_field,
    encode_tree,
    entangle_with_reference,
)
from .errors import (
    AqssError,
    CapExceededError,
    ParseError,
    ResourceCapError,
    UnsupportedStructureError,
)
from .linkage import (
    build_as_graph,
    enumerate_min_clique_covers,
    exact_min_clique_cover,
    greedy_clique_cover,
)
from .scheme import build_scheme, iter_leaves, render_dot, tree_to_dict
from .verify import verify_scheme

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_VERIFY_FAILED = 2
EXIT_UNSUPPORTED = 3
EXIT_RESOURCE_CAP = 4

CAP_ENV_VAR = "AQSS_MAX_AMPLITUDES"


@dataclass(frozen=True)
class RunConfig:
    tolerance: float = 1e-9
    amplitude_cap: int = DEFAULT_AMPLITUDE_CAP

    def __post_init__(self):
        if not 0 < self.tolerance <= 1e-3:
            raise ValueError(f"tolerance must lie in (0, 1e-3], got {self.tolerance}")
        if self.amplitude_cap < 2**10:
            raise ValueError(f"amplitude cap must be at least 2^10, got {self.amplitude_cap}")


def _read_input(spec: str) -> str:
    """Accept a path, '-' for stdin, or inline structure text."""
    if spec == "-":
        return sys.stdin.read()
    stripped = spec.lstrip()
    if stripped.startswith(("structure:", "players:", "{")) or "\n" in spec:
        return spec
    return Path(spec).read_text(encoding="utf-8")


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _config_from(args: argparse.Namespace) -> RunConfig:
    cap = getattr(args, "amplitude_cap", None)
    if cap is None:
        env = os.environ.get(CAP_ENV_VAR)
        cap = int(env) if env else DEFAULT_AMPLITUDE_CAP
    tolerance = getattr(args, "tolerance", None)
    if tolerance is None:
        tolerance = 1e-9
    return RunConfig(tolerance=tolerance, amplitude_cap=cap)


def _classification_labels(gamma, classification) -> list[list[str]]:
    return [
        [format_player_set(gamma.minimal_sets[i]) for i in sorted(cls)]
        for cls in classification.classes
    ]


def cmd_check(args: argparse.Namespace) -> int:
    gamma = parse_access_structure(_read_input(args.input))
    violations = check_pairwise_overlap(gamma)
    payload = {
        "players": gamma.players(),
        "structure": [sorted(s) for s in gamma.minimal_sets],
        "violating_pairs": [
            [sorted(gamma.minimal_sets[j]), sorted(gamma.minimal_sets[k])]
            for j, k in violations
        ],
        "conventional_qss_ok": not violations,
    }
    if args.format == "json":
        sys.stdout.write(json.dumps(payload, indent=2) + "\n")
    else:
        print(canonical_text(gamma))
        if violations:
            print("disjoint authorized sets (need dealer assistance):")
            for j, k in violations:
                print(
                    f"  {format_player_set(gamma.minimal_sets[j])} and "
                    f"{format_player_set(gamma.minimal_sets[k])}"
                )
        print(f"conventional_qss_ok: {'true' if not violations else 'false'}")
    return EXIT_OK


def cmd_lambda(args: argparse.Namespace) -> int:
    gamma = parse_access_structure(_read_input(args.input))
    graph = build_as_graph(gamma)
    if args.all and args.method != "exact":
        raise ValueError("--all requires --method exact")
    if args.method == "exact":
        try:
            classification = exact_min_clique_cover(graph)
        except CapExceededError as exc:
            raise CapExceededError(f"{exc}; use --method greedy for an upper bound") from None
        payload = {
            "method": "exact",
            "lambda": classification.size,
            "classes": _classification_labels(gamma, classification),
        }
        if args.all:
            payload["all_minimum_covers"] = [
                _classification_labels(gamma, c) for c in enumerate_min_clique_covers(graph)
            ]
    else:
        classification = greedy_clique_cover(graph)
        payload = {
            "method": "greedy",
            "size": classification.size,
            "classes": _classification_labels(gamma, classification),
        }
    if args.format == "json":
        sys.stdout.write(json.dumps(payload, indent=2) + "\n")
    else:
        if args.method == "exact":
            print(f"lambda: {classification.size}")
        else:
            print(f"greedy upper bound: {classification.size}")
        for i, names in enumerate(_classification_labels(gamma, classification), start=1):
            print(f"  class {i}: {', '.join(names)}")
        if args.all and args.method == "exact":
            print("all minimum covers:")
            for cover in payload["all_minimum_covers"]:
                print("  " + " | ".join(", ".join(names) for names in cover))
    return EXIT_OK


def _pipeline(args: argparse.Namespace):
    gamma = parse_access_structure(_read_input(args.input))
    classification = exact_min_clique_cover(build_as_graph(gamma))
    tree = build_scheme(gamma, classification)
    return gamma, classification, tree


def cmd_build(args: argparse.Namespace) -> int:
    _, _, tree = _pipeline(args)
    _emit(json.dumps(tree_to_dict(tree), indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    config = _config_from(args)
    _, _, tree = _pipeline(args)
    field = choose_field(tree, secret_dim=2)
    state, share_map = encode_tree(
        entangle_with_reference(field), tree, amplitude_cap=config.amplitude_cap
    )
    counts = Counter(
        owner if isinstance(owner, str) else f"resident#{owner}"
        for _, owner in share_map.owners
    )
    payload = {
        "p": field.p,
        "qudits": len(iter_leaves(tree)),
        "amplitudes": state.dim,
        "with_reference": share_map.reference is not None,
        "owners": dict(sorted(counts.items())),
    }
    if args.format == "json":
        sys.stdout.write(json.dumps(payload, indent=2) + "\n")
    else:
        print(f"field: GF({field.p})")
        print(f"qudits: {payload['qudits']} (+1 reference)")
        print(f"amplitudes: {payload['amplitudes']}")
        print("shares per owner:")
        for owner, count in sorted(counts.items()):
            print(f"  {owner}: {count}")
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    config = _config_from(args)
    gamma, classification, tree = _pipeline(args)
    report = verify_scheme(
        gamma,
        classification,
        tree,
        tolerance=config.tolerance,
        amplitude_cap=config.amplitude_cap,
    )
    text = report.to_json()
    if args.json:
        Path(args.json).write_text(text, encoding="utf-8")
    if args.format == "json":
        sys.stdout.write(text)
    else:
        print(f"lambda: {report.lambda_classes}   resident shares: {report.resident_shares}")
        print(f"qudits: {report.qudits}   p: {report.p}")
        for e in report.recoverability:
            status = "pass" if e.passed else "FAIL"
            print(f"  recover {format_player_set(frozenset(e.players))} (+dealer): "
                  f"fidelity {e.fidelity:.12f} [{status}]")
        for e in report.privacy:
            status = "pass" if e.passed else "FAIL"
            print(f"  privacy {format_player_set(frozenset(e.players))}: "
                  f"trace distance {e.distance:.3e} [{status}]")
        for e in report.importance:
            status = "pass" if e.passed else "FAIL"
            witness = format_player_set(frozenset(e.witness)) if e.witness else "none"
            print(f"  importance resident#{e.resident}: witness {witness} [{status}]")
        print(f"overall: {'pass' if report.overall else 'FAIL'}")
    return EXIT_OK if report.overall else EXIT_VERIFY_FAILED


def cmd_render(args: argparse.Namespace) -> int:
    gamma = parse_access_structure(_read_input(args.input))
    if args.what == "as-graph":
        graph = build_as_graph(gamma)
        labels = {i: format_player_set(s) for i, s in enumerate(gamma.minimal_sets)}
        text = render_dot(graph, labels)
    else:
        classification = exact_min_clique_cover(build_as_graph(gamma))
        text = render_dot(build_scheme(gamma, classification))
    _emit(text, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aqss",
        description="Assisted quantum secret sharing: analyze access structures, "
        "build schemes, and verify them by qudit simulation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_input(p):
        p.add_argument("input", help="path to a structure file, '-' for stdin, or inline text")

    p = sub.add_parser("check", help="normal form, overlap violations, assistance need")
    add_input(p)
    p.add_argument("--format", choices=["human", "json"], default="human")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("lambda", help="minimum number of partially linked classes")
    add_input(p)
    p.add_argument("--method", choices=["exact", "greedy"], default="exact")
    p.add_argument("--all", action="store_true", help="enumerate every minimum cover")
    p.add_argument("--format", choices=["human", "json"], default="human")
    p.set_defaults(func=cmd_lambda)

    p = sub.add_parser("build", help="construct the scheme tree (JSON)")
    add_input(p)
    p.add_argument("--out", help="write the tree JSON to a file")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("simulate", help="encode with a reference and report sizes")
    add_input(p)
    p.add_argument("--tolerance", type=float, default=None)
    p.add_argument("--amplitude-cap", type=int, default=None)
    p.add_argument("--format", choices=["human", "json"], default="human")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="full simulation-backed certification")
    add_input(p)
    p.add_argument("--json", help="write the report JSON to a file")
    p.add_argument("--tolerance", type=float, default=None)
    p.add_argument("--amplitude-cap", type=int, default=None)
    p.add_argument("--format", choices=["human", "json"], default="human")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("render", help="emit DOT for the graph or the scheme tree")
    add_input(p)
    p.add_argument("--what", choices=["as-graph", "scheme"], required=True)
    p.add_argument("--format", choices=["dot"], default="dot")
    p.add_argument("--out", help="write DOT to a file")
    p.set_defaults(func=cmd_render)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ResourceCapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE_CAP
    except UnsupportedStructureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except (CapExceededError, AqssError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
