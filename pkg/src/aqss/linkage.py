"""Access-structure graphs and partially linked classes.

The authorized sets of a structure form a graph: one vertex per minimal set,
an edge where two sets overlap.  A partition of the vertices into cliques is
a partial link classification; the minimum number of cliques needed (the
clique cover number of the graph) is the quantity lambda that fixes how many
dealer-resident shares the assisted scheme requires.
"""

from __future__ import annotations

from collections.abc import Iterator
from dataclasses import dataclass

from .access import AccessStructure
from .errors import CapExceededError

MAX_EXACT_VERTICES = 20


@dataclass(frozen=True)
class ASGraph:
    """Undirected graph on vertex ids 0..n-1 (indices into the minimal sets)."""

    n: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("vertex count must be nonnegative")
        norm = set()
        for a, b in self.edges:
            if a == b:
                raise ValueError(f"self-loop on vertex {a}")
            if not (0 <= a < self.n and 0 <= b < self.n):
                raise ValueError(f"edge ({a},{b}) outside vertex range")
            norm.add((min(a, b), max(a, b)))
        object.__setattr__(self, "edges", frozenset(norm))

    def adjacency(self) -> list[int]:
        """Neighbor bitmask per vertex."""
        adj = [0] * self.n
        for a, b in self.edges:
            adj[a] |= 1 << b
            adj[b] |= 1 << a
        return adj

    def is_complete(self) -> bool:
        return len(self.edges) == self.n * (self.n - 1) // 2


@dataclass(frozen=True)
class PartialLinkClassification:
    """A partition of AS-graph vertices into cliques.

    Property (a) -- each class is a clique -- holds for every value produced
    by this module.  Property (b) -- no two classes merge into one clique --
    additionally holds for exact solutions, which are merge-normalized.
    """

    classes: tuple[frozenset[int], ...]

    def __post_init__(self):
        if any(not c for c in self.classes):
            raise ValueError("classes must be nonempty")
        seen: set[int] = set()
        for c in self.classes:
            if seen & c:
                raise ValueError("classes must be disjoint")
            seen |= c
        ordered = tuple(sorted((frozenset(c) for c in self.classes), key=min))
        object.__setattr__(self, "classes", ordered)

    @property
    def size(self) -> int:
        return len(self.classes)


def build_as_graph(gamma: AccessStructure) -> ASGraph:
    """Graph with an edge wherever two minimal authorized sets intersect."""
    sets = gamma.minimal_sets
    edges = {
        (j, k)
        for j in range(len(sets))
        for k in range(j + 1, len(sets))
        if sets[j] & sets[k]
    }
    return ASGraph(len(sets), frozenset(edges))


def _is_clique(mask: int, adj: list[int], vertices: list[int]) -> bool:
    return all(mask & ~adj[v] & ~(1 << v) == 0 for v in vertices if mask >> v & 1)


def _classes_from_masks(masks: list[int], n: int) -> PartialLinkClassification:
    classes = [frozenset(v for v in range(n) if m >> v & 1) for m in masks]
    return PartialLinkClassification(tuple(classes))


def _merge_normalize(masks: list[int], adj: list[int], n: int) -> list[int]:
    """Greedily merge class pairs whose union is still a clique."""
    masks = list(masks)
    merged = True
    while merged:
        merged = False
        for i in range(len(masks)):
            for j in range(i + 1, len(masks)):
                union = masks[i] | masks[j]
                if _is_clique(union, adj, list(range(n))):
                    masks[i] = union
                    del masks[j]
                    merged = True
                    break
            if merged:
                break
    return masks


def _feasible(adj: list[int], order: list[int], k: int) -> bool:
    """Can the vertices be partitioned into at most k cliques?"""
    classes: list[int] = []

    def place(i: int) -> bool:
        if i == len(order):
            return True
        v = order[i]
        bit = 1 << v
        for ci in range(len(classes)):
            if classes[ci] & ~adj[v] == 0:
                classes[ci] |= bit
                if place(i + 1):
                    return True
                classes[ci] &= ~bit
        if len(classes) < k:
            classes.append(bit)
            if place(i + 1):
                return True
            classes.pop()
        return False

    return place(0)


def _search_assignments(adj: list[int], n: int, k: int) -> Iterator[list[int]]:
    """All clique partitions into exactly k classes, in canonical order.

    Assignments are produced vertex by vertex in index order with class ids
    numbered by first appearance, so the stream is lexicographically sorted
    and covers each partition exactly once.
    """
    assign = [-1] * n
    classes: list[int] = []

    def place(v: int) -> Iterator[list[int]]:
        if v == n:
            if len(classes) == k:
                yield list(assign)
            return
        bit = 1 << v
        for ci in range(len(classes)):
            if classes[ci] & ~adj[v] == 0:
                classes[ci] |= bit
                assign[v] = ci
                yield from place(v + 1)
                classes[ci] &= ~bit
        if len(classes) < k:
            classes.append(bit)
            assign[v] = len(classes) - 1
            yield from place(v + 1)
            classes.pop()
        assign[v] = -1

    yield from place(0)


def _greedy_independent_lower_bound(adj: list[int], n: int) -> int:
    """Size of a greedily built independent set (every cover needs that many cliques)."""
    chosen = 0
    count = 0
    for v in sorted(range(n), key=lambda u: (bin(adj[u]).count("1"), u)):
        if chosen & adj[v] == 0:
            chosen |= 1 << v
            count += 1
    return max(count, 1)


def exact_min_clique_cover(
    graph: ASGraph, max_vertices: int = MAX_EXACT_VERTICES
) -> PartialLinkClassification:
    """Minimum clique cover by branch and bound (exact).

    Equivalent to optimally coloring the complement graph.  Feasibility is
    probed with vertices in ascending-degree order (densest complement
    first); the returned partition is the lexicographically smallest optimal
    assignment under vertex index order, then merge-normalized so distinct
    classes never union into one clique.
    """
    if graph.n > max_vertices:
        raise CapExceededError(
            f"exact clique cover supports at most {max_vertices} vertices (got {graph.n})"
        )
    n = graph.n
    if n == 0:
        return PartialLinkClassification(())
    adj = graph.adjacency()
    order = sorted(range(n), key=lambda v: (bin(adj[v]).count("1"), v))
    k = _greedy_independent_lower_bound(adj, n)
    while not _feasible(adj, order, k):
        k += 1
    assignment = next(_search_assignments(adj, n, k))
    masks = [0] * k
    for v, c in enumerate(assignment):
        masks[c] |= 1 << v
    masks = _merge_normalize(masks, adj, n)
    return _classes_from_masks(masks, n)


def enumerate_min_clique_covers(
    graph: ASGraph, max_vertices: int = MAX_EXACT_VERTICES
) -> Iterator[PartialLinkClassification]:
    """Yield every minimum clique cover (canonical order, no duplicates)."""
    best = exact_min_clique_cover(graph, max_vertices=max_vertices)
    adj = graph.adjacency()
    for assignment in _search_assignments(adj, graph.n, best.size):
        masks = [0] * best.size
        for v, c in enumerate(assignment):
            masks[c] |= 1 << v
        yield _classes_from_masks(masks, graph.n)


def greedy_clique_cover(graph: ASGraph) -> PartialLinkClassification:
    """Cover by repeatedly growing a clique from the highest-degree free vertex.

    Fast and deterministic; the size is an upper bound on the exact cover
    number (never below it).
    """
    n = graph.n
    if n == 0:
        return PartialLinkClassification(())
    adj = graph.adjacency()
    degree = [bin(a).count("1") for a in adj]
    uncovered = set(range(n))
    masks: list[int] = []
    while uncovered:
        seed = max(uncovered, key=lambda v: (degree[v], -v))
        clique = 1 << seed
        uncovered.remove(seed)
        for v in sorted(uncovered, key=lambda u: (-degree[u], u)):
            if clique & ~adj[v] == 0:
                clique |= 1 << v
                uncovered.remove(v)
        masks.append(clique)
    masks = _merge_normalize(masks, adj, n)
    return _classes_from_masks(masks, n)


def compute_lambda(gamma: AccessStructure, max_vertices: int = MAX_EXACT_VERTICES) -> int:
    """Minimum number of partially linked classes for the structure."""
    return exact_min_clique_cover(build_as_graph(gamma), max_vertices=max_vertices).size


def component_count(graph: ASGraph) -> int:
    """Number of connected components (a lower bound on the cover number)."""
    adj = graph.adjacency()
    seen: set[int] = set()
    components = 0
    for start in range(graph.n):
        if start in seen:
            continue
        components += 1
        stack = [start]
        while stack:
            v = stack.pop()
            if v in seen:
                continue
            seen.add(v)
            stack.extend(u for u in range(graph.n) if adj[v] >> u & 1 and u not in seen)
    return components


def validate_classification(
    graph: ASGraph, classification: PartialLinkClassification, require_separation: bool = False
) -> None:
    """Raise ValueError unless the classification is a clique partition of the graph.

    With ``require_separation`` the pairwise-separation property is also
    enforced: any two classes must contain a non-adjacent cross pair.
    """
    covered: set[int] = set()
    for c in classification.classes:
        covered |= c
    if covered != set(range(graph.n)):
        raise ValueError("classification does not partition the graph's vertices")
    adj = graph.adjacency()
    for c in classification.classes:
        for v in c:
            if (sum(1 << u for u in c) & ~adj[v] & ~(1 << v)) != 0:
                raise ValueError(f"class {sorted(c)} is not a clique")
    if require_separation:
        for i, a in enumerate(classification.classes):
            for b in classification.classes[i + 1 :]:
                if all(adj[v] >> u & 1 for v in a for u in b):
                    raise ValueError(
                        f"classes {sorted(a)} and {sorted(b)} merge into one clique"
                    )
