"""Construction of assisted secret-sharing scheme trees.

A scheme is a tree of threshold nodes.  For a structure with lambda linked
classes the root is a ((lambda, 2*lambda-1)) majority node holding one share
per class plus lambda-1 dealer-resident shares.  Within a class, authorized
sets are combined by nested ((2,3)) choice levels: each level offers the
first set's all-members share, the rest of the class recursively, and one
share encoded under a self-dual threshold completion of the level's sets so
that every member set of the class can reach a majority on its own.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb

from .access import (
    AccessStructure,
    check_pairwise_overlap,
    format_player_set,
    maximal_structure,
    reduce_to_minimal,
)
from .errors import UnsupportedStructureError
from .linkage import (
    ASGraph,
    PartialLinkClassification,
    build_as_graph,
    compute_lambda,
    validate_classification,
)


@dataclass(frozen=True)
class ThresholdParams:
    """A ((k, n)) quantum threshold scheme: any k of n shares reconstruct.

    The no-cloning bound n < 2k is enforced; without it two disjoint share
    sets could both reconstruct the secret.
    """

    k: int
    n: int

    def __post_init__(self):
        if not 1 <= self.k <= self.n:
            raise ValueError(f"need 1 <= k <= n, got (({self.k},{self.n}))")
        if self.n >= 2 * self.k:
            raise ValueError(f"(({self.k},{self.n})) violates the no-cloning bound n < 2k")

    def __str__(self) -> str:
        return f"(({self.k},{self.n}))"


@dataclass(frozen=True)
class PlayerLeaf:
    owner: str


@dataclass(frozen=True)
class ResidentLeaf:
    index: int


@dataclass(frozen=True)
class ThresholdNode:
    params: ThresholdParams
    children: tuple["SchemeNode", ...]

    def __post_init__(self):
        if len(self.children) != self.params.n:
            raise ValueError(
                f"{self.params} node must have exactly {self.params.n} children, "
                f"got {len(self.children)}"
            )


SchemeNode = ThresholdNode | PlayerLeaf | ResidentLeaf


def iter_leaves(tree: SchemeNode) -> list[PlayerLeaf | ResidentLeaf]:
    """Leaves in depth-first order (the share/qudit order of the scheme)."""
    if isinstance(tree, (PlayerLeaf, ResidentLeaf)):
        return [tree]
    out: list[PlayerLeaf | ResidentLeaf] = []
    for child in tree.children:
        out.extend(iter_leaves(child))
    return out


def iter_threshold_nodes(tree: SchemeNode) -> list[ThresholdNode]:
    if isinstance(tree, (PlayerLeaf, ResidentLeaf)):
        return []
    out = [tree]
    for child in tree.children:
        out.extend(iter_threshold_nodes(child))
    return out


def resident_share_count(tree: SchemeNode) -> int:
    """Number of shares the dealer keeps (resident leaves of the tree)."""
    return sum(1 for leaf in iter_leaves(tree) if isinstance(leaf, ResidentLeaf))


def player_leaf_count(tree: SchemeNode) -> int:
    return sum(1 for leaf in iter_leaves(tree) if isinstance(leaf, PlayerLeaf))


def validate_tree(tree: SchemeNode) -> None:
    """Structural checks: unique resident indices, thresholds already validated."""
    indices = [leaf.index for leaf in iter_leaves(tree) if isinstance(leaf, ResidentLeaf)]
    if len(indices) != len(set(indices)):
        raise ValueError("resident share indices must be unique within a tree")


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------


def _and_node(players: frozenset[str]) -> SchemeNode:
    m = len(players)
    return ThresholdNode(
        ThresholdParams(m, m), tuple(PlayerLeaf(p) for p in sorted(players))
    )


def find_threshold_completion(
    gamma: AccessStructure,
) -> tuple[ThresholdParams, tuple[str, ...]] | None:
    """Smallest self-dual threshold structure whose closure contains the input.

    Searches ((k, 2k-1)) supports S within the structure's players, smallest
    k first and supports in label order, requiring every minimal set to hold
    at least k members of S.  Such a structure is self-dual over any universe
    and therefore a valid completion; returning the smallest keeps the share
    subtree (2k-1 qudits) and the field size as small as possible.
    """
    players = gamma.players()
    k = 1
    while 2 * k - 1 <= len(players):
        n = 2 * k - 1
        for support in combinations(players, n):
            sup = frozenset(support)
            if all(len(s & sup) >= k for s in gamma.minimal_sets):
                return ThresholdParams(k, n), tuple(support)
        k += 1
    return None


def detect_threshold_structure(
    gamma: AccessStructure,
) -> tuple[ThresholdParams, tuple[str, ...]] | None:
    """Recognize a structure that is exactly k-of-n on some support (n < 2k)."""
    sizes = {len(s) for s in gamma.minimal_sets}
    if len(sizes) != 1:
        return None
    k = sizes.pop()
    support = sorted(frozenset().union(*gamma.minimal_sets))
    n = len(support)
    if n >= 2 * k:
        return None
    if len(gamma.minimal_sets) != comb(n, k):
        return None
    if {frozenset(c) for c in combinations(support, k)} != set(gamma.minimal_sets):
        return None
    return ThresholdParams(k, n), tuple(support)


def _or_chain(sets: tuple[frozenset[str], ...]) -> SchemeNode:
    if len(sets) == 1:
        return _and_node(sets[0])
    level = reduce_to_minimal(list(sets))
    completion = find_threshold_completion(level)
    if completion is None:
        raise UnsupportedStructureError(
            "no threshold-expressible self-dual completion exists for class "
            + str(level)
        )
    params, support = completion
    share_subtree = ThresholdNode(params, tuple(PlayerLeaf(p) for p in support))
    return ThresholdNode(
        ThresholdParams(2, 3),
        (_and_node(sets[0]), _or_chain(sets[1:]), share_subtree),
    )


def build_class_scheme(gamma_class: AccessStructure) -> SchemeNode:
    """Conventional (unassisted) scheme for one partially linked class.

    A single authorized set becomes an all-members ((m,m)) node.  Several
    sets must overlap pairwise; they are chained as ((2,3)) choice levels in
    set label order, each level carrying one threshold-completion share.
    """
    if check_pairwise_overlap(gamma_class):
        raise ValueError(
            "class has disjoint authorized sets and cannot form a single linked class"
        )
    return _or_chain(gamma_class.minimal_sets)


def class_structures(
    gamma: AccessStructure, classification: PartialLinkClassification
) -> list[AccessStructure]:
    """Per-class substructures, in class order."""
    return [
        reduce_to_minimal([gamma.minimal_sets[i] for i in sorted(cls)])
        for cls in classification.classes
    ]


def build_scheme(
    gamma: AccessStructure, classification: PartialLinkClassification
) -> SchemeNode:
    """Assemble the full assisted scheme for a structure and classification.

    With one class the class scheme is the whole scheme (no dealer shares).
    Otherwise the root is ((lambda, 2*lambda-1)); its first lambda children
    are the class schemes in class order, the remaining lambda-1 children are
    dealer-resident leaves.
    """
    graph = build_as_graph(gamma)
    try:
        validate_classification(graph, classification)
    except ValueError as exc:
        raise ValueError(f"classification inconsistent with the structure: {exc}") from None
    parts = class_structures(gamma, classification)
    lam = classification.size
    if lam == 1:
        tree = build_class_scheme(parts[0])
    else:
        children: list[SchemeNode] = [build_class_scheme(part) for part in parts]
        children.extend(ResidentLeaf(i) for i in range(lam - 1))
        tree = ThresholdNode(ThresholdParams(lam, 2 * lam - 1), tuple(children))
    validate_tree(tree)
    return tree


# ---------------------------------------------------------------------------
# Dealer-as-player baseline
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrivialEmbeddingAnalysis:
    """Share counts for the add-a-common-player workaround vs. this scheme.

    Joining a fresh dealer-player X to every authorized set and realizing the
    augmented structure directly would park r + (r-1)*x shares with the
    dealer (x = occurrences of X in a self-dual completion); keeping only the
    X-shares of one completion still needs r.  The majority construction
    needs lambda-1, always fewer.
    """

    r: int
    x: int
    naive_count: int
    better_count: int
    theorem_count: int


def analyze_trivial_embedding(gamma: AccessStructure) -> TrivialEmbeddingAnalysis:
    label = "X"
    suffix = 0
    while label in gamma.universe:
        label = f"X{suffix}"
        suffix += 1
    augmented = reduce_to_minimal(
        [s | {label} for s in gamma.minimal_sets], universe=gamma.universe | {label}
    )
    completion = maximal_structure(augmented)
    x = sum(1 for s in completion.minimal_sets if label in s)
    r = gamma.r
    lam = compute_lambda(gamma)
    analysis = TrivialEmbeddingAnalysis(
        r=r,
        x=x,
        naive_count=r + (r - 1) * x,
        better_count=r,
        theorem_count=lam - 1,
    )
    assert analysis.naive_count >= analysis.better_count
    assert analysis.better_count > analysis.theorem_count
    return analysis


# ---------------------------------------------------------------------------
# Serialization and rendering
# ---------------------------------------------------------------------------


def tree_to_dict(tree: SchemeNode) -> dict:
    if isinstance(tree, PlayerLeaf):
        return {"kind": "player", "owner": tree.owner}
    if isinstance(tree, ResidentLeaf):
        return {"kind": "resident", "index": tree.index}
    return {
        "kind": "threshold",
        "k": tree.params.k,
        "n": tree.params.n,
        "children": [tree_to_dict(c) for c in tree.children],
    }


def tree_from_dict(data: dict) -> SchemeNode:
    kind = data.get("kind")
    if kind == "player":
        return PlayerLeaf(str(data["owner"]))
    if kind == "resident":
        return ResidentLeaf(int(data["index"]))
    if kind == "threshold":
        children = tuple(tree_from_dict(c) for c in data["children"])
        return ThresholdNode(ThresholdParams(int(data["k"]), int(data["n"])), children)
    raise ValueError(f"unknown scheme node kind: {kind!r}")


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def render_dot(
    subject: ASGraph | SchemeNode, labels: dict[int, str] | None = None
) -> str:
    """Emit DOT text for an access-structure graph or a scheme tree.

    Graphs come out undirected with one node per authorized set; trees come
    out as digraphs with threshold nodes labelled ((k,n)), player leaves by
    owner and dealer leaves as ``resident#i (dealer)``.  Node order is
    deterministic.
    """
    if isinstance(subject, ASGraph):
        lines = ["graph access_structure {", "  node [shape=circle];"]
        for v in range(subject.n):
            text = labels.get(v, str(v)) if labels else str(v)
            lines.append(f'  v{v} [label="{_dot_escape(text)}"];')
        for a, b in sorted(subject.edges):
            lines.append(f"  v{a} -- v{b};")
        lines.append("}")
        return "\n".join(lines) + "\n"

    lines = ["digraph scheme {", "  node [shape=box];"]
    edges: list[tuple[int, int]] = []
    counter = 0

    def visit(node: SchemeNode) -> int:
        nonlocal counter
        node_id = counter
        counter += 1
        if isinstance(node, PlayerLeaf):
            label = node.owner
        elif isinstance(node, ResidentLeaf):
            label = f"resident#{node.index} (dealer)"
        else:
            label = str(node.params)
        lines.append(f'  n{node_id} [label="{_dot_escape(label)}"];')
        if isinstance(node, ThresholdNode):
            for child in node.children:
                child_id = visit(child)
                edges.append((node_id, child_id))
        return node_id

    visit(subject)
    for a, b in edges:
        lines.append(f"  n{a} -> n{b};")
    lines.append("}")
    return "\n".join(lines) + "\n"
