"""Monotone access structures: parsing, normal forms, and subset analysis.

An access structure is stored as the antichain of its inclusion-minimal
authorized sets over a finite player universe.  Monotonicity is therefore
structural: a coalition is authorized exactly when it contains one of the
minimal sets.  All operations are pure functions over immutable values and
are safe to call concurrently.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

import numpy as np

from .errors import (
    CapExceededError,
    DegenerateRestrictionError,
    OverlapViolationError,
    ParseError,
    UnsupportedStructureError,
)

# Subset-enumerating operations scan 2^N coalitions; keep that desk-scale.
MAX_ENUM_PLAYERS = 20

_FORBIDDEN_CHARS = set(",{};")
_COMPACT_TOKEN = re.compile(r"^[A-Z]+$")


def validate_player_label(label: str) -> str:
    """Check a single player identifier and return it unchanged."""
    if not isinstance(label, str) or not label:
        raise ParseError(f"player label must be a nonempty string, got {label!r}")
    if any(ch.isspace() for ch in label) or any(ch in _FORBIDDEN_CHARS for ch in label):
        raise ParseError(
            f"invalid player label {label!r}: whitespace, commas, braces and semicolons are not allowed"
        )
    return label


def set_key(players: frozenset[str]) -> tuple[str, ...]:
    """Canonical sort key for a player set (its sorted label tuple)."""
    return tuple(sorted(players))


def format_player_set(players: frozenset[str]) -> str:
    """Render a player set compactly: 'ABC' for single-letter players, '{x,y}' otherwise."""
    members = sorted(players)
    if members and all(len(m) == 1 for m in members):
        return "".join(members)
    return "{" + ",".join(members) + "}"


@dataclass(frozen=True)
class AccessStructure:
    """A monotone access structure in antichain normal form.

    ``minimal_sets`` holds the inclusion-minimal authorized sets, sorted by
    their label tuples so equal structures compare equal and every derived
    artifact is reproducible.
    """

    universe: frozenset[str]
    minimal_sets: tuple[frozenset[str], ...]

    def __post_init__(self):
        for label in self.universe:
            validate_player_label(label)
        if not self.minimal_sets:
            raise ValueError("access structure needs at least one authorized set")
        for s in self.minimal_sets:
            if not s:
                raise ValueError("authorized sets must be nonempty")
            if not s <= self.universe:
                missing = ", ".join(sorted(s - self.universe))
                raise ValueError(f"authorized set {format_player_set(s)} mentions unknown players: {missing}")
        sets = sorted({frozenset(s) for s in self.minimal_sets}, key=set_key)
        for a in sets:
            for b in sets:
                if a is not b and a <= b:
                    raise ValueError(
                        f"not an antichain: {format_player_set(a)} is contained in {format_player_set(b)}"
                    )
        object.__setattr__(self, "universe", frozenset(self.universe))
        object.__setattr__(self, "minimal_sets", tuple(sets))

    @property
    def n_players(self) -> int:
        return len(self.universe)

    @property
    def r(self) -> int:
        """Number of minimal authorized sets."""
        return len(self.minimal_sets)

    def players(self) -> list[str]:
        """Universe in sorted order."""
        return sorted(self.universe)

    def __str__(self) -> str:
        return "{" + ", ".join(format_player_set(s) for s in self.minimal_sets) + "}"


def reduce_to_minimal(
    sets: list[frozenset[str]] | list[set[str]], universe: frozenset[str] | None = None
) -> AccessStructure:
    """Reduce a family of authorized sets to antichain normal form.

    Supersets of other input sets are dropped; the monotone closure is
    unchanged.  The universe defaults to the union of the input sets.
    """
    family = [frozenset(s) for s in sets]
    if not family:
        raise ValueError("access structure needs at least one authorized set")
    if any(not s for s in family):
        raise ValueError("authorized sets must be nonempty")
    family = sorted(set(family), key=set_key)
    minimal = [s for s in family if not any(t < s for t in family)]
    if universe is None:
        universe = frozenset().union(*minimal)
    return AccessStructure(frozenset(universe), tuple(minimal))


def is_authorized(gamma: AccessStructure, coalition: frozenset[str] | set[str]) -> bool:
    """True iff the coalition contains some minimal authorized set."""
    coalition = frozenset(coalition)
    if not coalition <= gamma.universe:
        unknown = ", ".join(sorted(coalition - gamma.universe))
        raise ValueError(f"coalition mentions players outside the universe: {unknown}")
    return any(s <= coalition for s in gamma.minimal_sets)


def check_pairwise_overlap(gamma: AccessStructure) -> list[tuple[int, int]]:
    """Index pairs (j, k) of minimal sets with empty intersection.

    An empty result means every pair of authorized sets overlaps, i.e. the
    structure is realizable as a conventional (unassisted) quantum scheme.
    """
    sets = gamma.minimal_sets
    return [
        (j, k)
        for j in range(len(sets))
        for k in range(j + 1, len(sets))
        if not (sets[j] & sets[k])
    ]


# ---------------------------------------------------------------------------
# Subset enumeration (bitmask tables)
# ---------------------------------------------------------------------------


def _require_enumerable(gamma: AccessStructure, what: str) -> list[str]:
    players = gamma.players()
    if len(players) > MAX_ENUM_PLAYERS:
        raise CapExceededError(
            f"{what} enumerates all subsets and supports at most {MAX_ENUM_PLAYERS} players "
            f"(got {len(players)})"
        )
    return players


def _set_masks(players: list[str], sets: tuple[frozenset[str], ...]) -> list[int]:
    pos = {p: i for i, p in enumerate(players)}
    return [sum(1 << pos[p] for p in s) for s in sets]


def _auth_table(n: int, set_masks: list[int]) -> np.ndarray:
    """Boolean table over all 2^n coalition masks: contains some authorized set."""
    masks = np.arange(1 << n, dtype=np.int64)
    auth = np.zeros(1 << n, dtype=bool)
    for m in set_masks:
        auth |= (masks & m) == m
    return auth


def _mask_to_set(mask: int, players: list[str]) -> frozenset[str]:
    return frozenset(p for i, p in enumerate(players) if mask >> i & 1)


def _maximal_unauthorized_masks(n: int, auth: np.ndarray) -> list[int]:
    masks = np.arange(1 << n, dtype=np.int64)
    maximal = ~auth
    for b in range(n):
        bit = 1 << b
        # a coalition missing player b must become authorized once b joins
        maximal &= ((masks & bit) != 0) | auth[masks | bit]
    return [int(m) for m in masks[maximal]]


def maximal_unauthorized_sets(gamma: AccessStructure) -> list[frozenset[str]]:
    """All inclusion-maximal unauthorized coalitions.

    Every unauthorized coalition is a subset of one of the returned sets, so
    privacy checks over this list cover all unauthorized coalitions.  Output
    is ordered largest-first, ties by label order.
    """
    players = _require_enumerable(gamma, "maximal_unauthorized_sets")
    auth = _auth_table(len(players), _set_masks(players, gamma.minimal_sets))
    found = [_mask_to_set(m, players) for m in _maximal_unauthorized_masks(len(players), auth)]
    return sorted(found, key=lambda s: (-len(s), set_key(s)))


def maximal_structure(gamma: AccessStructure) -> AccessStructure:
    """Complete a pairwise-overlapping structure to a self-dual one.

    Authorized sets are added until, for every coalition T, exactly one of T
    and its complement is authorized.  Such completions are not unique; this
    routine is deterministic: at each step it picks the lexicographically
    smallest maximal unauthorized coalition whose complement is also
    unauthorized and authorizes that complement.
    """
    if check_pairwise_overlap(gamma):
        raise OverlapViolationError(
            "structure has disjoint authorized sets; no self-dual completion exists"
        )
    players = _require_enumerable(gamma, "maximal_structure")
    n = len(players)
    full = (1 << n) - 1
    current = gamma
    for _ in range(1 << n):
        auth = _auth_table(n, _set_masks(players, current.minimal_sets))
        defects = [
            m for m in _maximal_unauthorized_masks(n, auth) if not auth[full ^ m]
        ]
        if not defects:
            return current
        target = min(defects, key=lambda m: set_key(_mask_to_set(m, players)))
        complement = _mask_to_set(full ^ target, players)
        current = reduce_to_minimal(
            list(current.minimal_sets) + [complement], universe=current.universe
        )
    raise UnsupportedStructureError("self-dual completion search did not converge")


def restrict(gamma: AccessStructure, excluded: str) -> AccessStructure:
    """Remove one player from the universe and every minimal set."""
    if excluded not in gamma.universe:
        raise ValueError(f"player {excluded!r} is not in the universe")
    reduced_sets = [s - {excluded} for s in gamma.minimal_sets]
    if any(not s for s in reduced_sets):
        raise DegenerateRestrictionError(
            f"restriction is degenerate: some authorized set contains only {excluded!r}"
        )
    return reduce_to_minimal(reduced_sets, universe=gamma.universe - {excluded})


# ---------------------------------------------------------------------------
# Input formats
# ---------------------------------------------------------------------------


def parse_access_structure(text: str) -> AccessStructure:
    """Parse an access structure from text.

    Two formats are accepted.  If the first non-blank character is ``{`` the
    input is JSON: ``{"players": ["a", ...], "structure": [["a","b"], ...]}``
    with ``players`` optional.  Otherwise the input is line-oriented text::

        # comment
        players: alice bob carol     (optional)
        structure: alice bob, bob carol

    Sets are comma-separated; members within a set are whitespace-separated.
    Compact mode: when no ``players:`` line is present and every set token is
    a run of uppercase letters, each letter is a single player, so
    ``structure: ABC, BD`` means {A,B,C} and {B,D}.

    The result is already reduced to antichain normal form.  The universe is
    the declared player list, or the union of mentioned players if no
    declaration is given.
    """
    if text.lstrip()[:1] == "{":
        return _parse_json(text)
    return _parse_dsl(text)


def _parse_json(text: str) -> AccessStructure:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict) or "structure" not in doc:
        raise ParseError('JSON input must be an object with a "structure" key')
    raw_sets = doc["structure"]
    if not isinstance(raw_sets, list) or not raw_sets:
        raise ParseError('"structure" must be a nonempty list of player lists')
    sets = []
    for entry in raw_sets:
        if not isinstance(entry, list) or not entry:
            raise ParseError(f'each entry of "structure" must be a nonempty list, got {entry!r}')
        sets.append(frozenset(validate_player_label(p) for p in entry))
    players = doc.get("players")
    if players is None:
        return reduce_to_minimal(sets)
    if not isinstance(players, list):
        raise ParseError('"players" must be a list of labels')
    universe = frozenset(validate_player_label(p) for p in players)
    for s in sets:
        if not s <= universe:
            missing = ", ".join(sorted(s - universe))
            raise ParseError(f"authorized set {format_player_set(s)} mentions undeclared players: {missing}")
    return reduce_to_minimal(sets, universe=universe)


def _parse_dsl(text: str) -> AccessStructure:
    declared: list[str] | None = None
    structure_tokens: list[list[str]] | None = None
    structure_line = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        stripped = line.strip()
        if stripped.startswith("players:"):
            if declared is not None:
                raise ParseError("duplicate players line", lineno, line.index("players:") + 1)
            if structure_tokens is not None:
                raise ParseError("players line must precede the structure line", lineno, 1)
            declared = _parse_tokens(line.split("players:", 1)[1], lineno, line.index("players:") + 9)
            if not declared:
                raise ParseError("players line declares no players", lineno, 1)
        elif stripped.startswith("structure:"):
            if structure_tokens is not None:
                raise ParseError("duplicate structure line", lineno, 1)
            structure_line = lineno
            structure_tokens = []
            payload = line.split("structure:", 1)[1]
            col = line.index("structure:") + 11
            for part in payload.split(","):
                tokens = _parse_tokens(part, lineno, col)
                if not tokens:
                    raise ParseError("empty authorized set", lineno, col)
                structure_tokens.append(tokens)
                col += len(part) + 1
        else:
            col = len(line) - len(line.lstrip()) + 1
            raise ParseError(f"expected 'players:' or 'structure:', got {stripped.split()[0]!r}", lineno, col)
    if structure_tokens is None:
        raise ParseError("no structure line found", max(1, text.count("\n") + 1), 1)

    compact = declared is None and all(
        _COMPACT_TOKEN.match(tok) for tokens in structure_tokens for tok in tokens
    )
    if compact:
        sets = [frozenset(ch for tok in tokens for ch in tok) for tokens in structure_tokens]
        return reduce_to_minimal(sets)

    sets = [frozenset(tokens) for tokens in structure_tokens]
    if declared is not None:
        universe = frozenset(declared)
        for s in sets:
            if not s <= universe:
                missing = ", ".join(sorted(s - universe))
                raise ParseError(
                    f"authorized set {format_player_set(s)} mentions undeclared players: {missing}",
                    structure_line,
                    1,
                )
        return reduce_to_minimal(sets, universe=universe)
    return reduce_to_minimal(sets)


def _parse_tokens(payload: str, lineno: int, start_col: int) -> list[str]:
    tokens = []
    for tok in payload.split():
        for ch in tok:
            if ch in _FORBIDDEN_CHARS:
                col = start_col + payload.index(tok)
                raise ParseError(f"invalid character {ch!r} in token {tok!r}", lineno, col)
        tokens.append(tok)
    return tokens


def canonical_text(gamma: AccessStructure) -> str:
    """Render a structure back to the text format (normal form)."""
    single = all(len(p) == 1 and p.isupper() for p in gamma.universe)
    mentioned = frozenset().union(*gamma.minimal_sets)
    body = ", ".join(format_player_set(s) if single else " ".join(sorted(s)) for s in gamma.minimal_sets)
    if single and mentioned == gamma.universe:
        return f"structure: {body}"
    return f"players: {' '.join(gamma.players())}\nstructure: {body}"
