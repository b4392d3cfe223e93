"""Target states and circuits, with independent verification predicates."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable

import numpy as np

from .gates import SINGLE_QUBIT, H, standard_gate
from .qcore import QuantumState, is_unitary, partial_trace

CLUSTER_TOL = 1e-9
AME_TOL = 1e-9
KL_TOL = 1e-8


@dataclass(frozen=True)
class GraphSpec:
    num_vertices: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        norm = set()
        for e in self.edges:
            a, b = sorted(int(v) for v in e)
            if a == b:
                raise ValueError(f"self-loop on vertex {a}")
            if a < 0 or b >= self.num_vertices:
                raise ValueError(f"edge {(a, b)} out of range")
            if (a, b) in norm:
                raise ValueError(f"duplicate edge {(a, b)}")
            norm.add((a, b))
        object.__setattr__(self, "edges", frozenset(norm))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable) -> "GraphSpec":
        edges = list(edges)
        canon = [tuple(sorted(e)) for e in edges]
        if len(set(canon)) != len(canon):
            raise ValueError("duplicate edge")
        return cls(n, frozenset(canon))

    @classmethod
    def complete(cls, n: int) -> "GraphSpec":
        return cls(n, frozenset(itertools.combinations(range(n), 2)))

    @classmethod
    def path(cls, n: int) -> "GraphSpec":
        return cls(n, frozenset((i, i + 1) for i in range(n - 1)))

    @classmethod
    def star(cls, n: int, center: int = 0) -> "GraphSpec":
        return cls(n, frozenset(tuple(sorted((center, v))) for v in range(n) if v != center))

    def neighbors(self, a: int) -> list[int]:
        return sorted({v for e in self.edges if a in e for v in e if v != a})

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)


@dataclass(frozen=True)
class StabilizerReport:
    eigenvalues: tuple[float, ...]
    passed: bool

    def __bool__(self) -> bool:
        return self.passed


def pauli_operator(word: str) -> np.ndarray:
    """Dense matrix of a Pauli word such as ``"XZZXI"`` (site 0 first)."""
    out = np.ones((1, 1), dtype=complex)
    for ch in word:
        out = np.kron(out, SINGLE_QUBIT[ch])
    return out


def _cz_diagonal(n: int, a: int, b: int) -> np.ndarray:
    idx = np.arange(2**n)
    both = ((idx >> (n - 1 - a)) & 1) & ((idx >> (n - 1 - b)) & 1)
    return 1.0 - 2.0 * both


def cluster_state(graph: GraphSpec, edge_order: Iterable | None = None) -> QuantumState:
    """Apply one CZ per edge to ``|+>^n``."""
    n = graph.num_vertices
    vec = np.full(2**n, 2 ** (-n / 2), dtype=complex)
    for a, b in (graph.sorted_edges() if edge_order is None else edge_order):
        vec = vec * _cz_diagonal(n, a, b)
    return QuantumState(n, 2, vec)


def correlation_operator(graph: GraphSpec, a: int) -> np.ndarray:
    word = ["I"] * graph.num_vertices
    word[a] = "X"
    for b in graph.neighbors(a):
        word[b] = "Z"
    return pauli_operator("".join(word))


def verify_cluster(psi: QuantumState, graph: GraphSpec, tol: float = CLUSTER_TOL) -> StabilizerReport:
    """Expectation of every correlation operator ``X_a prod_{b in N(a)} Z_b``."""
    vec = psi.amplitudes if isinstance(psi, QuantumState) else np.asarray(psi, dtype=complex)
    if vec.size != 2**graph.num_vertices:
        raise ValueError(
            f"state dimension {vec.size} does not match a {graph.num_vertices}-vertex graph"
        )
    eig = tuple(
        float(np.real(np.vdot(vec, correlation_operator(graph, a) @ vec)))
        for a in range(graph.num_vertices)
    )
    return StabilizerReport(eig, all(abs(e - 1.0) <= tol for e in eig))


def ghz_state(n: int) -> QuantumState:
    if n < 2:
        raise ValueError("GHZ needs at least two qubits")
    vec = np.zeros(2**n, dtype=complex)
    vec[0] = vec[-1] = 1 / np.sqrt(2)
    return QuantumState(n, 2, vec)


def plus_state(n: int) -> QuantumState:
    return QuantumState(n, 2, np.full(2**n, 2 ** (-n / 2), dtype=complex))


# Five-qubit code: cyclic shifts of XZZXI, logical X = XXXXX, logical Z = ZZZZZ.
FIVE_QUBIT_STABILIZERS = ("XZZXI", "IXZZX", "XIXZZ", "ZXIXZ")


def stabilizer_state(generators: Iterable[str]) -> np.ndarray:
    """Common +1 eigenvector of commuting, independent Pauli words.

    Built by applying the group-averaging projector ``prod (I + g)/2`` to
    the first computational basis state with nonzero overlap.
    """
    gens = list(generators)
    n = len(gens[0])
    proj = np.eye(2**n, dtype=complex)
    for g in gens:
        proj = proj @ (np.eye(2**n) + pauli_operator(g)) / 2
    for col in range(2**n):
        vec = proj[:, col]
        norm = np.linalg.norm(vec)
        if norm > 1e-6:
            vec = vec / norm
            # first nonzero amplitude real and positive
            k = np.argmax(np.abs(vec) > 1e-9)
            return vec * np.exp(-1j * np.angle(vec[k]))
    raise ValueError("stabilizer group has no common +1 eigenvector")


@lru_cache(maxsize=None)
def _ame_vector(n: int) -> np.ndarray:
    if n == 5:
        # logical |0> of the five-qubit code
        vec = stabilizer_state(FIVE_QUBIT_STABILIZERS + ("ZZZZZ",))
    else:
        # five-qubit code maximally entangled with a sixth qubit
        gens = tuple(g + "I" for g in FIVE_QUBIT_STABILIZERS) + ("XXXXXX", "ZZZZZZ")
        vec = stabilizer_state(gens)
    vec.setflags(write=False)
    return vec


def ame_state(n: int) -> QuantumState:
    """Absolutely maximally entangled stabilizer state on 5 or 6 qubits.

    ``n=5`` is the logical zero of the five-qubit code (stabilizers
    ``XZZXI`` and cyclic shifts plus ``ZZZZZ``); it is supported on 16 of
    the 32 basis states with equal weight. ``n=6`` adds a sixth qubit in a
    Bell pair with the encoded qubit (stabilizers ``XXXXXX`` and
    ``ZZZZZZ``), giving 32 equal-weight basis states out of 64.
    """
    if n not in (5, 6):
        raise ValueError("AME states are provided for n = 5 or 6 only")
    return QuantumState(n, 2, _ame_vector(n).copy())


@dataclass(frozen=True)
class AMEReport:
    passed: bool
    worst_deviation: float
    subsets_checked: int

    def __bool__(self) -> bool:
        return self.passed


def verify_ame(psi: QuantumState, tol: float = AME_TOL) -> AMEReport:
    """Check that every floor(n/2)-qubit marginal is maximally mixed."""
    n = psi.num_sites
    k = n // 2
    target = np.eye(2**k) / 2**k
    worst = 0.0
    count = 0
    for subset in itertools.combinations(range(n), k):
        rho = partial_trace(psi, subset)
        worst = max(worst, float(np.max(np.abs(rho - target))))
        count += 1
    return AMEReport(bool(worst <= tol), worst, count)


def perfect_encoder_gates() -> list[tuple[str, tuple[int, ...], dict]]:
    """Conditional gate list of the five-qubit encoder, in circuit order.

    Qubit 0 carries the state to encode; qubits 1-4 start in ``|0>``.
    A fan-out of NOT gates copies the basis value onto the ancillas,
    Hadamards rotate all five qubits, and pi phase flips on the five ring
    edges produce the pentagon graph-state codewords.
    """
    gates: list[tuple[str, tuple[int, ...], dict]] = []
    for q in range(1, 5):
        gates.append(("X", (0, q), {}))
    for q in range(5):
        gates.append(("H", (q,), {}))
    for q in range(5):
        gates.append(("Z", (q, (q + 1) % 5), {}))
    return gates


@lru_cache(maxsize=None)
def _encoder_matrix() -> np.ndarray:
    u = np.eye(32, dtype=complex)
    for name, qubits, kw in perfect_encoder_gates():
        u = standard_gate(name, qubits, 5, **kw) @ u
    u.setflags(write=False)
    return u


def perfect_encoder_unitary() -> np.ndarray:
    return _encoder_matrix().copy()


def single_qubit_paulis(n: int) -> list[tuple[str, np.ndarray]]:
    out = [("I" * n, np.eye(2**n, dtype=complex))]
    for q in range(n):
        for p in "XYZ":
            word = "I" * q + p + "I" * (n - q - 1)
            out.append((word, pauli_operator(word)))
    return out


@dataclass(frozen=True)
class EncoderReport:
    passed: bool
    worst_violation: float
    worst_operator: str

    def __bool__(self) -> bool:
        return self.passed


def verify_encoder(u, tol: float = KL_TOL, pairs: bool = False) -> EncoderReport:
    """Error-correction conditions on the codewords ``U|0>|0000>``, ``U|1>|0000>``.

    With ``pairs=False`` the error set is the identity plus every
    single-qubit Pauli. ``pairs=True`` uses all products of two such
    operators, i.e. the full correction conditions for single-qubit errors.
    """
    u = np.asarray(u, dtype=complex)
    if u.shape != (32, 32):
        raise ValueError("encoder must be 32x32")
    if not is_unitary(u):
        raise ValueError("encoder is not unitary")
    c0, c1 = u[:, 0], u[:, 16]
    ops = single_qubit_paulis(5)
    if pairs:
        ops = [(f"{a}*{b}", ea @ eb) for (a, ea), (b, eb) in itertools.product(ops, ops)]
    worst, worst_op = 0.0, ops[0][0]
    for name, e in ops:
        off = abs(np.vdot(c0, e @ c1))
        diag = abs(np.vdot(c0, e @ c0) - np.vdot(c1, e @ c1))
        v = max(off, diag)
        if v > worst:
            worst, worst_op = v, name
    return EncoderReport(bool(worst <= tol), float(worst), worst_op)


@dataclass(frozen=True)
class TargetSpec:
    """A registered target: a state reached from ``|+>^n`` or a unitary."""

    key: str
    kind: str  # "state" or "circuit"
    num_qubits: int
    build: Callable[[], object] = field(repr=False)
    verify: Callable[[], object] = field(repr=False)

    @property
    def is_state(self) -> bool:
        return self.kind == "state"

    def state(self) -> QuantumState:
        if not self.is_state:
            raise TypeError(f"{self.key} is a circuit target")
        return self.build()

    def unitary(self) -> np.ndarray:
        if self.is_state:
            raise TypeError(f"{self.key} is a state target")
        return self.build()


def _cluster_target(key: str, graph: GraphSpec) -> TargetSpec:
    return TargetSpec(
        key,
        "state",
        graph.num_vertices,
        lambda: cluster_state(graph),
        lambda: verify_cluster(cluster_state(graph), graph),
    )


def _build_registry() -> dict[str, TargetSpec]:
    reg: dict[str, TargetSpec] = {}
    for n in (4, 5, 6):
        reg[f"cluster-full-{n}"] = _cluster_target(f"cluster-full-{n}", GraphSpec.complete(n))
    for n in (4, 5, 6):
        reg[f"cluster-chain-{n}"] = _cluster_target(f"cluster-chain-{n}", GraphSpec.path(n))
    for n in (4, 5, 6):
        reg[f"ghz-{n}"] = TargetSpec(
            f"ghz-{n}", "state", n, lambda n=n: ghz_state(n),
            # GHZ is a graph state of the star graph up to Hadamards on the leaves
            lambda n=n: verify_cluster(
                QuantumState(n, 2, _hadamard_leaves(ghz_state(n).amplitudes, n)),
                GraphSpec.star(n),
            ),
        )
    for n in (5, 6):
        reg[f"ame-{n}"] = TargetSpec(
            f"ame-{n}", "state", n, lambda n=n: ame_state(n), lambda n=n: verify_ame(ame_state(n))
        )
    reg["perfect-encoder"] = TargetSpec(
        "perfect-encoder", "circuit", 5, perfect_encoder_unitary,
        lambda: verify_encoder(perfect_encoder_unitary()),
    )
    return reg


def _hadamard_leaves(vec: np.ndarray, n: int) -> np.ndarray:
    op = np.ones((1, 1), dtype=complex)
    for q in range(n):
        op = np.kron(op, np.eye(2) if q == 0 else H)
    return op @ vec


TARGETS = _build_registry()


def get_target(key: str) -> TargetSpec:
    try:
        return TARGETS[key]
    except KeyError:
        raise KeyError(f"unknown target {key!r}; known targets: {', '.join(sorted(TARGETS))}") from None
