"""End-to-end certification of a built scheme against its access structure.

The verifier encodes a secret maximally entangled with a reference subsystem
and then interrogates the one pure global state:

* recoverability of a coalition <=> the subsystems it does NOT hold are in
  product with the reference (decoupling), cross-checked by explicitly
  running the tree decoder and measuring the entangled fidelity;
* privacy of a coalition <=> the subsystems it DOES hold are in product with
  the reference.

Privacy is checked on the inclusion-maximal unauthorized coalitions only:
discarding subsystems cannot create correlations, so a subset of a private
coalition is private as well, which extends the verdict to every
unauthorized coalition.  Resident shares never count toward a privacy
coalition; the dealer holding them is trusted by definition.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .access import AccessStructure, maximal_unauthorized_sets
from .engine import (
    ATOL,
    DEFAULT_AMPLITUDE_CAP,
    QuditRegister,
    ShareMap,
    choose_field,
    encode_tree,
    entangle_with_reference,
    max_entangled_fidelity,
    product_trace_distance,
    reconstruct_tree,
)
from .errors import InsufficientSharesError
from .linkage import PartialLinkClassification
from .scheme import SchemeNode, iter_leaves, resident_share_count


@dataclass(frozen=True)
class RecoverabilityEntry:
    players: tuple[str, ...]
    with_resident: bool
    fidelity: float
    passed: bool


@dataclass(frozen=True)
class PrivacyEntry:
    players: tuple[str, ...]
    distance: float
    passed: bool


@dataclass(frozen=True)
class ImportanceEntry:
    resident: int
    witness: tuple[str, ...]
    passed: bool


@dataclass(frozen=True)
class VerificationReport:
    """Per-coalition verdicts plus scheme summary; ``overall`` is their conjunction."""

    lambda_classes: int
    resident_shares: int
    qudits: int
    p: int
    recoverability: tuple[RecoverabilityEntry, ...]
    privacy: tuple[PrivacyEntry, ...]
    importance: tuple[ImportanceEntry, ...]
    overall: bool

    def to_dict(self) -> dict:
        return {
            "lambda": self.lambda_classes,
            "resident_shares": self.resident_shares,
            "qudits": self.qudits,
            "p": self.p,
            "recoverability": [
                {
                    "set": list(e.players),
                    "with_resident": e.with_resident,
                    "fidelity": e.fidelity,
                    "pass": e.passed,
                }
                for e in self.recoverability
            ],
            "privacy": [
                {"set": list(e.players), "trace_distance": e.distance, "pass": e.passed}
                for e in self.privacy
            ],
            "importance": [
                {"resident": e.resident, "witness": list(e.witness), "pass": e.passed}
                for e in self.importance
            ],
            "overall": self.overall,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def _recovery_environment(
    share_map: ShareMap, players: set[str], include_resident: bool
) -> list[str]:
    """Subsystems NOT available to the coalition (residents included unless held)."""
    held = set(share_map.player_subsystems(players))
    if include_resident:
        held |= set(share_map.resident_subsystems())
    return [q for q in share_map.labels() if q not in held]


def decoupling_recoverable(
    state: QuditRegister,
    share_map: ShareMap,
    players: set[str],
    include_resident: bool,
    tolerance: float = ATOL,
) -> tuple[bool, float]:
    """Decoupling verdict: the unheld subsystems are in product with the reference."""
    env = _recovery_environment(share_map, players, include_resident)
    distance = product_trace_distance(state, env, share_map.reference)
    return distance <= tolerance, distance


def verify_recoverability(
    state: QuditRegister,
    share_map: ShareMap,
    tree: SchemeNode,
    players: frozenset[str] | set[str],
    include_resident: bool,
    tolerance: float = ATOL,
) -> RecoverabilityEntry:
    """Check that a coalition (optionally with the resident shares) can recover.

    The decoupling criterion is the verdict; the explicit tree decoder is run
    as an independent route and must agree, with entangled-reference fidelity
    at least 1 - tolerance whenever it succeeds.
    """
    players = set(players)
    decoupled, _ = decoupling_recoverable(state, share_map, players, include_resident, tolerance)
    owners: set = set(players)
    if include_resident:
        owners |= set(share_map.resident_indices())
    try:
        decoded, designated = reconstruct_tree(state, share_map, tree, owners)
        fidelity = max_entangled_fidelity(decoded, designated, share_map.reference)
        decoder_ok = fidelity >= 1 - tolerance
    except InsufficientSharesError:
        fidelity = 0.0
        decoder_ok = False
    passed = decoupled and decoder_ok == decoupled
    return RecoverabilityEntry(
        players=tuple(sorted(players)),
        with_resident=include_resident,
        fidelity=fidelity,
        passed=passed,
    )


def verify_privacy(
    state: QuditRegister,
    share_map: ShareMap,
    tree: SchemeNode,
    players: frozenset[str] | set[str],
    tolerance: float = ATOL,
) -> PrivacyEntry:
    """Check that a coalition's own subsystems reveal nothing about the secret."""
    players = set(players)
    held = share_map.player_subsystems(players)
    distance = product_trace_distance(state, held, share_map.reference)
    return PrivacyEntry(
        players=tuple(sorted(players)), distance=distance, passed=distance <= tolerance
    )


def check_importance(
    state: QuditRegister,
    share_map: ShareMap,
    tree: SchemeNode,
    gamma: AccessStructure,
    resident_index: int,
    tolerance: float = ATOL,
) -> ImportanceEntry:
    """Find a witness coalition that needs this resident share.

    Iterates the minimal authorized sets in order; the witness is the first
    set that fails recoverability with the other resident shares but passes
    once this share is added.
    """
    others = set(share_map.resident_indices()) - {resident_index}
    for candidate in gamma.minimal_sets:
        players = set(candidate)
        without = _held_recoverable(state, share_map, players, others, tolerance)
        if without:
            continue
        with_q = _held_recoverable(state, share_map, players, others | {resident_index}, tolerance)
        if with_q:
            return ImportanceEntry(
                resident=resident_index, witness=tuple(sorted(candidate)), passed=True
            )
    return ImportanceEntry(resident=resident_index, witness=(), passed=False)


def _held_recoverable(
    state: QuditRegister,
    share_map: ShareMap,
    players: set[str],
    residents: set[int],
    tolerance: float,
) -> bool:
    held = set(share_map.player_subsystems(players))
    held |= {q for q, o in share_map.owners if isinstance(o, int) and o in residents}
    env = [q for q in share_map.labels() if q not in held]
    return product_trace_distance(state, env, share_map.reference) <= tolerance


def verify_scheme(
    gamma: AccessStructure,
    classification: PartialLinkClassification,
    tree: SchemeNode,
    tolerance: float = ATOL,
    amplitude_cap: int = DEFAULT_AMPLITUDE_CAP,
    secret_dim: int = 2,
) -> VerificationReport:
    """Simulate the scheme once and certify the whole access structure.

    Recoverability (with resident shares) is checked for every minimal
    authorized set, privacy for every maximal unauthorized set, and each
    resident share must be important.  The report is deterministic: the same
    structure and classification always yield identical bytes.
    """
    residents = resident_share_count(tree)
    if residents != classification.size - 1:
        raise ValueError(
            f"tree has {residents} resident shares, expected lambda-1 = {classification.size - 1}"
        )
    field = choose_field(tree, secret_dim)
    secret = entangle_with_reference(field)
    state, share_map = encode_tree(secret, tree, amplitude_cap=amplitude_cap)

    recoverability = tuple(
        verify_recoverability(state, share_map, tree, s, True, tolerance)
        for s in gamma.minimal_sets
    )
    privacy = tuple(
        verify_privacy(state, share_map, tree, s, tolerance)
        for s in maximal_unauthorized_sets(gamma)
    )
    importance = tuple(
        check_importance(state, share_map, tree, gamma, q, tolerance)
        for q in share_map.resident_indices()
    )
    overall = (
        all(e.passed for e in recoverability)
        and all(e.passed for e in privacy)
        and all(e.passed for e in importance)
    )
    return VerificationReport(
        lambda_classes=classification.size,
        resident_shares=residents,
        qudits=len(iter_leaves(tree)),
        p=field.p,
        recoverability=recoverability,
        privacy=privacy,
        importance=importance,
        overall=overall,
    )
