"""Dense state-vector simulation of many qudits of prime dimension.

Registers hold a complex amplitude vector over labelled subsystems, each of
dimension p (a prime, so share values live in the field GF(p)).  Two share
encodings are provided:

* polynomial ((k, 2k-1)): basis secret s maps to the uniform superposition of
  evaluation tuples of f(x) = c_0 + c_1 x + ... + c_{k-2} x^{k-2} + s x^{k-1}
  over all coefficient choices, at points x_i = i - 1.  Carrying the secret on
  the top coefficient admits x = 0, so p >= n suffices.
* additive ((m, m)): basis secret s maps to the uniform superposition of
  m-tuples summing to s.

Both are isometries; decoding applies basis-permutation unitaries on held
subsystems only, after which the designated subsystem carries the secret
exactly and is factorized from everything else.  All values are immutable and
every operation returns a new value, so concurrent use needs no locking.

Numeric contract: normalization, fidelity and trace-distance assertions use
absolute tolerance 1e-9 in double precision throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import InsufficientSharesError, ResourceCapError, UnsupportedStructureError
from .scheme import (
    PlayerLeaf,
    ResidentLeaf,
    SchemeNode,
    ThresholdNode,
    ThresholdParams,
    iter_leaves,
    iter_threshold_nodes,
)

ATOL = 1e-9
DEFAULT_AMPLITUDE_CAP = 2**24
_EIG_CUTOFF = 1e-14
_PSD_CHECK_MAX_DIM = 1024

SECRET_LABEL = "secret"
REFERENCE_LABEL = "reference"


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    d = 2
    while d * d <= n:
        if n % d == 0:
            return False
        d += 1
    return True


def next_prime_at_least(n: int) -> int:
    candidate = max(2, n)
    while not is_prime(candidate):
        candidate += 1
    return candidate


@dataclass(frozen=True)
class FieldSpec:
    """Qudit dimension and share-value field order (a prime)."""

    p: int

    def __post_init__(self):
        if self.p < 2 or not is_prime(self.p):
            raise ValueError(f"qudit dimension must be a prime >= 2, got {self.p}")


@dataclass(frozen=True)
class QuditRegister:
    """Normalized pure state over an ordered tuple of labelled p-level subsystems."""

    field: FieldSpec
    subsystems: tuple[str, ...]
    amplitudes: np.ndarray

    def __post_init__(self):
        if len(set(self.subsystems)) != len(self.subsystems):
            raise ValueError("subsystem labels must be unique")
        amps = np.array(self.amplitudes, dtype=complex)
        expected = self.field.p ** len(self.subsystems)
        if amps.shape != (expected,):
            raise ValueError(f"amplitude vector must have length {expected}, got {amps.shape}")
        norm = float(np.linalg.norm(amps))
        if abs(norm - 1.0) > ATOL:
            raise ValueError(f"state is not normalized: |amplitudes| = {norm}")
        amps.setflags(write=False)
        object.__setattr__(self, "subsystems", tuple(self.subsystems))
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return self.field.p ** len(self.subsystems)

    def tensor(self) -> np.ndarray:
        p = self.field.p
        return self.amplitudes.reshape((p,) * len(self.subsystems))

    def axis(self, label: str) -> int:
        try:
            return self.subsystems.index(label)
        except ValueError:
            raise ValueError(f"unknown subsystem {label!r}") from None


@dataclass(frozen=True)
class DensityOperator:
    """Hermitian, unit-trace operator over labelled subsystems.

    Positivity is validated eagerly only up to 1024 dimensions (it costs an
    eigendecomposition); larger operators are trusted to the producing
    operation and re-checked by the test suite.
    """

    field: FieldSpec
    subsystems: tuple[str, ...]
    matrix: np.ndarray

    def __post_init__(self):
        if len(set(self.subsystems)) != len(self.subsystems):
            raise ValueError("subsystem labels must be unique")
        mat = np.array(self.matrix, dtype=complex)
        d = self.field.p ** len(self.subsystems)
        if mat.shape != (d, d):
            raise ValueError(f"matrix must be {d}x{d}, got {mat.shape}")
        if not np.allclose(mat, mat.conj().T, atol=ATOL):
            raise ValueError("density operator must be Hermitian")
        tr = complex(np.trace(mat))
        if abs(tr - 1.0) > ATOL:
            raise ValueError(f"density operator must have unit trace, got {tr}")
        if d <= _PSD_CHECK_MAX_DIM:
            smallest = float(np.linalg.eigvalsh(mat)[0])
            if smallest < -ATOL:
                raise ValueError(f"density operator is not positive semidefinite ({smallest})")
        mat.setflags(write=False)
        object.__setattr__(self, "subsystems", tuple(self.subsystems))
        object.__setattr__(self, "matrix", mat)

    @property
    def dim(self) -> int:
        return self.field.p ** len(self.subsystems)


@dataclass(frozen=True)
class ShareMap:
    """Where each encoded share subsystem ended up.

    ``owners`` pairs subsystem labels with either a player label (str) or a
    dealer-resident index (int), in the scheme's depth-first share order.
    ``reference`` names the untouched purification subsystem, if present.
    """

    owners: tuple[tuple[str, str | int], ...]
    reference: str | None = None

    def labels(self) -> list[str]:
        return [q for q, _ in self.owners]

    def held_by(self, owner_set: set) -> list[str]:
        """Subsystems owned by any member of a mixed player/resident set."""
        return [q for q, o in self.owners if o in owner_set]

    def player_subsystems(self, players: set[str]) -> list[str]:
        return [q for q, o in self.owners if isinstance(o, str) and o in players]

    def resident_subsystems(self, exclude: set[int] = frozenset()) -> list[str]:
        return [q for q, o in self.owners if isinstance(o, int) and o not in exclude]

    def resident_indices(self) -> list[int]:
        return sorted(o for _, o in self.owners if isinstance(o, int))


# ---------------------------------------------------------------------------
# Register constructors
# ---------------------------------------------------------------------------


def basis_register(field: FieldSpec, labels: tuple[str, ...], digits: tuple[int, ...]) -> QuditRegister:
    """Computational basis state |digits> over the given subsystems."""
    p = field.p
    if len(digits) != len(labels) or any(not 0 <= d < p for d in digits):
        raise ValueError("digits must match subsystem count and lie in [0, p)")
    index = 0
    for d in digits:
        index = index * p + d
    amps = np.zeros(p ** len(labels), dtype=complex)
    amps[index] = 1.0
    return QuditRegister(field, tuple(labels), amps)


def entangle_with_reference(field: FieldSpec) -> QuditRegister:
    """Maximally entangled secret/reference pair: p^{-1/2} sum_s |s>|s>.

    Certifying recovery of one half of this pair certifies recovery of every
    input state at once, which is why the verifier encodes it by default.
    """
    p = field.p
    amps = np.zeros(p * p, dtype=complex)
    for s in range(p):
        amps[s * p + s] = p**-0.5
    return QuditRegister(field, (SECRET_LABEL, REFERENCE_LABEL), amps)


def permute_subsystems(state: QuditRegister, new_order: tuple[str, ...]) -> QuditRegister:
    if sorted(new_order) != sorted(state.subsystems):
        raise ValueError("new order must be a permutation of the existing subsystems")
    src = [state.axis(l) for l in new_order]
    tensor = np.moveaxis(state.tensor(), src, range(len(new_order)))
    return QuditRegister(state.field, tuple(new_order), tensor.reshape(-1))


def _rename_subsystem(state: QuditRegister, old: str, new: str) -> QuditRegister:
    labels = tuple(new if l == old else l for l in state.subsystems)
    return QuditRegister(state.field, labels, state.amplitudes)


# ---------------------------------------------------------------------------
# Encoding
# ---------------------------------------------------------------------------


def choose_field(tree: SchemeNode, secret_dim: int = 2) -> FieldSpec:
    """Single global prime: smallest covering the secret and every node width."""
    need = secret_dim
    for node in iter_threshold_nodes(tree):
        need = max(need, node.params.n)
    return FieldSpec(next_prime_at_least(need))


def _polynomial_isometry(params: ThresholdParams, p: int) -> np.ndarray:
    k, n = params.k, params.n
    V = np.zeros((p**n, p), dtype=complex)
    scale = p ** (-(k - 1) / 2)
    for s in range(p):
        for coeffs in product(range(p), repeat=k - 1):
            row = 0
            for x in range(n):
                value = s * pow(x, k - 1, p)
                for j, c in enumerate(coeffs):
                    value += c * pow(x, j, p)
                row = row * p + value % p
            V[row, s] += scale
    return V


def _additive_isometry(m: int, p: int) -> np.ndarray:
    V = np.zeros((p**m, p), dtype=complex)
    scale = p ** (-(m - 1) / 2)
    for s in range(p):
        for coeffs in product(range(p), repeat=m - 1):
            row = 0
            for c in coeffs:
                row = row * p + c
            row = row * p + (s - sum(coeffs)) % p
            V[row, s] += scale
    return V


def _apply_isometry(
    state: QuditRegister, label: str, V: np.ndarray, new_labels: tuple[str, ...]
) -> QuditRegister:
    """Replace one subsystem by len(new_labels) subsystems via the isometry V."""
    p = state.field.p
    for l in new_labels:
        if l != label and l in state.subsystems:
            raise ValueError(f"subsystem label {l!r} already in use")
    idx = state.axis(label)
    n_new = len(new_labels)
    moved = np.moveaxis(state.tensor(), idx, 0)
    flat = moved.reshape(p, -1)
    out = (V @ flat).reshape((p,) * n_new + moved.shape[1:])
    out = np.moveaxis(out, range(n_new), range(idx, idx + n_new))
    labels = state.subsystems[:idx] + tuple(new_labels) + state.subsystems[idx + 1 :]
    return QuditRegister(state.field, labels, out.reshape(-1))


def encode_polynomial(
    state: QuditRegister,
    subsystem: str,
    params: ThresholdParams,
    new_labels: tuple[str, ...] | None = None,
) -> QuditRegister:
    """Encode one subsystem into the n = 2k-1 shares of the polynomial code.

    Defined on basis states as described in the module docstring and extended
    by linearity, so secrets entangled with other subsystems are supported.
    """
    k, n = params.k, params.n
    if n != 2 * k - 1:
        raise ValueError(f"polynomial code needs n = 2k-1, got (({k},{n}))")
    if state.field.p < n:
        raise ValueError(f"field of size {state.field.p} is too small for {n} evaluation points")
    if new_labels is None:
        new_labels = tuple(f"{subsystem}.{i}" for i in range(n))
    if len(new_labels) != n:
        raise ValueError(f"need {n} share labels, got {len(new_labels)}")
    return _apply_isometry(state, subsystem, _polynomial_isometry(params, state.field.p), new_labels)


def encode_additive(
    state: QuditRegister,
    subsystem: str,
    m: int,
    new_labels: tuple[str, ...] | None = None,
) -> QuditRegister:
    """Encode one subsystem into m shares that sum to the secret (all m needed)."""
    if m < 1:
        raise ValueError("additive encoding needs at least one share")
    if new_labels is None:
        new_labels = tuple(f"{subsystem}.{i}" for i in range(m))
    if len(new_labels) != m:
        raise ValueError(f"need {m} share labels, got {len(new_labels)}")
    return _apply_isometry(state, subsystem, _additive_isometry(m, state.field.p), new_labels)


def _node_mode(params: ThresholdParams) -> str:
    if params.n == 2 * params.k - 1:
        return "polynomial"
    if params.k == params.n:
        return "additive"
    raise UnsupportedStructureError(
        f"{params} with k < n < 2k-1 is not supported (would need share discarding)"
    )


def encode_tree(
    secret_state: QuditRegister,
    tree: SchemeNode,
    amplitude_cap: int = DEFAULT_AMPLITUDE_CAP,
    secret_label: str = SECRET_LABEL,
) -> tuple[QuditRegister, ShareMap]:
    """Recursively encode a secret subsystem through a scheme tree.

    Each threshold node replaces its input subsystem by n share subsystems;
    leaves become the final qudits, labelled q0, q1, ... in depth-first order
    and mapped to their owners.  Other subsystems of the input state (such as
    an entangling reference) pass through untouched.
    """
    field = secret_state.field
    leaves = iter_leaves(tree)
    passthrough = len(secret_state.subsystems) - 1
    if field.p ** (len(leaves) + passthrough) > amplitude_cap:
        raise ResourceCapError(
            f"encoded state would need {field.p}^{len(leaves) + passthrough} amplitudes, "
            f"above the cap of {amplitude_cap}"
        )
    for node in iter_threshold_nodes(tree):
        if _node_mode(node.params) == "polynomial" and field.p < node.params.n:
            raise ValueError(f"field of size {field.p} is too small for node {node.params}")

    owners: list[tuple[str, str | int]] = []
    state = secret_state
    temp_counter = 0

    def walk(node: SchemeNode, label: str) -> None:
        nonlocal state, temp_counter
        if isinstance(node, PlayerLeaf):
            q = f"q{len(owners)}"
            state = _rename_subsystem(state, label, q)
            owners.append((q, node.owner))
            return
        if isinstance(node, ResidentLeaf):
            q = f"q{len(owners)}"
            state = _rename_subsystem(state, label, q)
            owners.append((q, node.index))
            return
        n = node.params.n
        child_labels = tuple(f"_t{temp_counter + i}" for i in range(n))
        temp_counter += n
        if _node_mode(node.params) == "polynomial":
            state = encode_polynomial(state, label, node.params, child_labels)
        else:
            state = encode_additive(state, label, n, child_labels)
        for child, child_label in zip(node.children, child_labels):
            walk(child, child_label)

    walk(tree, secret_label)
    reference = REFERENCE_LABEL if REFERENCE_LABEL in secret_state.subsystems else None
    return state, ShareMap(tuple(owners), reference)


# ---------------------------------------------------------------------------
# Decoding
# ---------------------------------------------------------------------------


def _inv_mod_matrix(rows: list[list[int]], p: int) -> list[list[int]]:
    """Inverse of a small square matrix over GF(p) by Gauss-Jordan elimination."""
    k = len(rows)
    aug = [[rows[i][j] % p for j in range(k)] + [int(i == j) for j in range(k)] for i in range(k)]
    for col in range(k):
        pivot = next((r for r in range(col, k) if aug[r][col] % p), None)
        if pivot is None:
            raise ValueError("matrix is singular over GF(p)")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        inv = pow(aug[col][col], p - 2, p)
        aug[col] = [(v * inv) % p for v in aug[col]]
        for r in range(k):
            if r != col and aug[r][col]:
                factor = aug[r][col]
                aug[r] = [(a - factor * b) % p for a, b in zip(aug[r], aug[col])]
    return [row[k:] for row in aug]


def _digits(value: int, p: int, width: int) -> list[int]:
    out = [0] * width
    for i in range(width - 1, -1, -1):
        out[i] = value % p
        value //= p
    return out


def _fold(digits: list[int], p: int) -> int:
    value = 0
    for d in digits:
        value = value * p + d
    return value


def _polynomial_decode_permutation(k: int, n: int, p: int, points: list[int]) -> np.ndarray:
    """Basis map (y_1..y_k) -> (t', s) for held evaluation points.

    Inverts the k x k Vandermonde system to turn share values into the
    coefficient vector (t, s), then applies t' = t + A^{-1} b s where the
    unseen share values satisfy u = A t + b s, so that afterwards the unseen
    registers depend on t' alone and the secret register factors out.
    """
    W = [[pow(x, j, p) for j in range(k)] for x in points]
    W_inv = _inv_mod_matrix(W, p)
    unheld = [x for x in range(n) if x not in points]
    if k > 1:
        A = [[pow(x, j, p) for j in range(k - 1)] for x in unheld]
        b = [pow(x, k - 1, p) for x in unheld]
        A_inv = _inv_mod_matrix(A, p)
        correction = [sum(A_inv[i][u] * b[u] for u in range(k - 1)) % p for i in range(k - 1)]
    else:
        correction = []
    perm = np.empty(p**k, dtype=np.intp)
    for flat in range(p**k):
        y = _digits(flat, p, k)
        coeffs = [sum(W_inv[i][j] * y[j] for j in range(k)) % p for i in range(k)]
        s = coeffs[k - 1]
        adjusted = [(coeffs[i] + correction[i] * s) % p for i in range(k - 1)]
        perm[_fold(adjusted + [s], p)] = flat
    return perm


def _additive_decode_permutation(m: int, p: int) -> np.ndarray:
    perm = np.empty(p**m, dtype=np.intp)
    for flat in range(p**m):
        y = _digits(flat, p, m)
        perm[_fold(y[:-1] + [sum(y) % p], p)] = flat
    return perm


def _apply_basis_map(state: QuditRegister, labels: list[str], perm: np.ndarray) -> QuditRegister:
    p = state.field.p
    idxs = [state.axis(l) for l in labels]
    moved = np.moveaxis(state.tensor(), idxs, range(len(idxs)))
    flat = moved.reshape(p ** len(idxs), -1)
    out = flat[perm].reshape(moved.shape)
    out = np.moveaxis(out, range(len(idxs)), idxs)
    return QuditRegister(state.field, state.subsystems, out.reshape(-1))


def decode_threshold(
    state: QuditRegister, params: ThresholdParams, held: list[tuple[str, int]]
) -> tuple[QuditRegister, str]:
    """Decode one threshold node from held shares.

    ``held`` pairs subsystem labels with their child/evaluation indices in
    the node.  Polynomial nodes need exactly k shares, additive nodes all n.
    Returns the new state and the label of the subsystem now carrying the
    node's input (the decoded share or secret).
    """
    k, n = params.k, params.n
    p = state.field.p
    held = sorted(held, key=lambda item: item[1])
    labels = [l for l, _ in held]
    points = [i for _, i in held]
    if len(set(labels)) != len(labels) or len(set(points)) != len(points):
        raise ValueError("held shares must have distinct labels and distinct indices")
    if any(not 0 <= x < n for x in points):
        raise ValueError(f"share indices must lie in [0, {n})")
    mode = _node_mode(params)
    if mode == "polynomial":
        if len(held) != k:
            raise ValueError(f"polynomial decode needs exactly k={k} shares, got {len(held)}")
        perm = _polynomial_decode_permutation(k, n, p, points)
    else:
        if len(held) != n:
            raise ValueError(f"additive decode needs all {n} shares, got {len(held)}")
        perm = _additive_decode_permutation(n, p)
    return _apply_basis_map(state, labels, perm), labels[-1]


def reconstruct_tree(
    state: QuditRegister,
    share_map: ShareMap,
    tree: SchemeNode,
    available_owners: set,
) -> tuple[QuditRegister, str]:
    """Decode bottom-up using shares of the given owners (players and/or residents).

    Child nodes are decoded to materialize parent shares, then the parent,
    up to the root; the returned label designates the subsystem carrying the
    secret.  Raises InsufficientSharesError naming the node that blocked
    reconstruction.
    """
    labels = share_map.labels()
    leaves = iter_leaves(tree)
    if len(labels) != len(leaves):
        raise ValueError("share map does not match the tree's leaf count")
    available = set(available_owners)
    failures: list[tuple[str, int, int]] = []
    position = 0
    current = state

    def solve(node: SchemeNode, path: str) -> str | None:
        nonlocal position, current
        if isinstance(node, (PlayerLeaf, ResidentLeaf)):
            label = labels[position]
            owner = node.owner if isinstance(node, PlayerLeaf) else node.index
            if share_map.owners[position][1] != owner:
                raise ValueError("share map owners do not match the tree's leaves")
            position += 1
            return label if owner in available else None
        decoded = [(i, solve(child, f"{path}.{i}")) for i, child in enumerate(node.children)]
        usable = [(i, lab) for i, lab in decoded if lab is not None]
        need = node.params.k if _node_mode(node.params) == "polynomial" else node.params.n
        if len(usable) < need:
            failures.append((path, len(usable), need))
            return None
        held = [(lab, i) for i, lab in usable[:need]]
        current, designated = decode_threshold(current, node.params, held)
        return designated

    designated = solve(tree, "root")
    if designated is None:
        path, have, need = failures[-1]
        raise InsufficientSharesError(path, have, need)
    return current, designated


# ---------------------------------------------------------------------------
# Reduced states and distances
# ---------------------------------------------------------------------------


def partial_trace(obj: QuditRegister | DensityOperator, keep: set[str] | list[str]) -> DensityOperator:
    """Reduced density operator on the kept subsystems (original order)."""
    keep_set = set(keep)
    unknown = keep_set - set(obj.subsystems)
    if unknown:
        raise ValueError(f"unknown subsystems: {sorted(unknown)}")
    kept = [l for l in obj.subsystems if l in keep_set]
    traced = [l for l in obj.subsystems if l not in keep_set]
    p = obj.field.p
    d_keep = p ** len(kept)
    d_traced = p ** len(traced)
    if isinstance(obj, QuditRegister):
        order = kept + traced
        src = [obj.axis(l) for l in order]
        tensor = np.moveaxis(obj.tensor(), src, range(len(order)))
        psi = tensor.reshape(d_keep, d_traced)
        rho = psi @ psi.conj().T
    else:
        m = len(obj.subsystems)
        tensor = obj.matrix.reshape((p,) * (2 * m))
        axis_of = {l: i for i, l in enumerate(obj.subsystems)}
        row_order = [axis_of[l] for l in kept + traced]
        col_order = [m + axis_of[l] for l in kept + traced]
        tensor = np.moveaxis(tensor, row_order + col_order, range(2 * m))
        tensor = tensor.reshape(d_keep, d_traced, d_keep, d_traced)
        rho = np.einsum("atbt->ab", tensor)
    return DensityOperator(obj.field, tuple(kept), rho)


def trace_distance(rho: DensityOperator, sigma: DensityOperator) -> float:
    """Half the trace norm of rho - sigma (0 = indistinguishable, 1 = orthogonal)."""
    if rho.subsystems != sigma.subsystems or rho.field != sigma.field:
        raise ValueError("operators must share subsystem labels, order and field")
    diff = rho.matrix - sigma.matrix
    evals = np.linalg.eigvalsh((diff + diff.conj().T) / 2)
    return 0.5 * float(np.sum(np.abs(evals)))


def max_entangled_fidelity(state: QuditRegister, sys_a: str, sys_b: str) -> float:
    """Overlap <Phi| rho_{ab} |Phi> with the maximally entangled pair on (a, b)."""
    p = state.field.p
    tensor = np.moveaxis(state.tensor(), [state.axis(sys_a), state.axis(sys_b)], [0, 1])
    projected = np.einsum("ss...->...", tensor) * p**-0.5
    return float(np.sum(np.abs(projected) ** 2))


def _nonzero_eigenfactor(mat_keep_by_rest: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nonzero eigenpairs of M M-dagger, using the smaller Gram side.

    Returns (U, lam) with orthonormal columns U and positive lam, so that
    M M-dagger = U diag(lam) U-dagger up to the truncation cutoff.
    """
    d_keep, d_rest = mat_keep_by_rest.shape
    if d_keep <= d_rest:
        rho = mat_keep_by_rest @ mat_keep_by_rest.conj().T
        evals, vecs = np.linalg.eigh((rho + rho.conj().T) / 2)
    else:
        gram = mat_keep_by_rest.conj().T @ mat_keep_by_rest
        evals, w = np.linalg.eigh((gram + gram.conj().T) / 2)
        keep = evals > _EIG_CUTOFF
        vecs = mat_keep_by_rest @ (w[:, keep] / np.sqrt(evals[keep])[None, :])
        return vecs, evals[keep]
    keep = evals > _EIG_CUTOFF
    return vecs[:, keep], evals[keep]


def product_trace_distance(state: QuditRegister, part: list[str], ref: str) -> float:
    """Trace distance between rho_{part + ref} and rho_part (x) rho_ref.

    Zero means the reference is decoupled from everything outside ``part``'s
    complement, i.e. the complementary subsystems can recover the entangled
    secret.  Computed from low-rank factorizations of both operators (the
    global state is pure), so the full density matrices are never formed and
    coalitions covering most of a large state stay tractable.
    """
    p = state.field.p
    if ref not in state.subsystems:
        raise ValueError(f"unknown reference subsystem {ref!r}")
    part_set = set(part)
    unknown = part_set - set(state.subsystems)
    if unknown:
        raise ValueError(f"unknown subsystems: {sorted(unknown)}")
    if ref in part_set:
        raise ValueError("the reference subsystem cannot be part of the coalition")
    part_ordered = [l for l in state.subsystems if l in part_set]
    env = [l for l in state.subsystems if l not in part_set and l != ref]
    tensor = permute_subsystems(state, tuple(part_ordered + [ref] + env)).tensor()
    d_part = p ** len(part_ordered)
    d_env = p ** len(env)
    T = tensor.reshape(d_part, p, d_env)

    # rho = rho_{part,ref} = F_rho F_rho† ; columns either raw environment
    # slices of the state or explicit eigenvectors, whichever side is smaller.
    M = T.reshape(d_part * p, d_env)
    if d_env <= d_part * p:
        F_rho = M
        G_rr = M.conj().T @ M
        diag_rho = None
    else:
        F_rho, evals_rho = _nonzero_eigenfactor(M)
        F_rho = F_rho * np.sqrt(evals_rho)[None, :]
        G_rr = np.diag(evals_rho).astype(complex)
        diag_rho = evals_rho

    U_part, lam_part = _nonzero_eigenfactor(T.reshape(d_part, p * d_env))
    rho_ref = np.einsum("pre,pse->rs", T, T.conj())
    mu, V_ref = np.linalg.eigh((rho_ref + rho_ref.conj().T) / 2)
    keep_ref = mu > _EIG_CUTOFF
    mu, V_ref = mu[keep_ref], V_ref[:, keep_ref]

    # sigma = rho_part (x) rho_ref has eigenvectors u_i (x) v_a; assemble the
    # mixed Gram block without materializing those product columns.
    sqrt_lam = np.sqrt(lam_part)
    sqrt_mu = np.sqrt(mu)
    if diag_rho is None:
        X = np.einsum("pre,pi->ire", T.conj(), U_part)
        Y = np.einsum("ire,ra->eia", X, V_ref)
        G_rs = (Y * sqrt_lam[None, :, None] * sqrt_mu[None, None, :]).reshape(
            d_env, len(lam_part) * len(mu)
        )
    else:
        F3 = F_rho.reshape(d_part, p, F_rho.shape[1])
        X = np.einsum("prm,pi->mri", F3.conj(), U_part)
        Y = np.einsum("mri,ra->mia", X, V_ref)
        G_rs = (Y * sqrt_lam[None, :, None] * sqrt_mu[None, None, :]).reshape(
            F_rho.shape[1], len(lam_part) * len(mu)
        )
    G_ss = np.diag(np.kron(lam_part, mu)).astype(complex)

    r_rho = G_rr.shape[0]
    r_sigma = G_ss.shape[0]
    G = np.block([[G_rr, G_rs], [G_rs.conj().T, G_ss]])
    G = (G + G.conj().T) / 2
    evals_G, W = np.linalg.eigh(G)
    sqrt_G = (W * np.sqrt(np.clip(evals_G, 0, None))[None, :]) @ W.conj().T
    signs = np.concatenate([np.ones(r_rho), -np.ones(r_sigma)])
    H = sqrt_G @ (signs[:, None] * sqrt_G)
    delta = np.linalg.eigvalsh((H + H.conj().T) / 2)
    return 0.5 * float(np.sum(np.abs(delta)))
