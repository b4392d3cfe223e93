"""Chain generators for the layered ansatz and a small standard gate set."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .qcore import unitary_evolution

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)

SINGLE_QUBIT = {"I": I2, "X": X, "Y": Y, "Z": Z, "H": H}


class GeneratorKind(enum.IntEnum):
    """The five generators of one ansatz layer, in serialization order."""

    MIX_X = 0
    Z_EVEN = 1
    Z_ODD = 2
    ZZ_EVEN = 3
    ZZ_ODD = 4


# Order in which the factors of one layer act on the state (first to last).
LAYER_ACTION_ORDER = (
    GeneratorKind.ZZ_ODD,
    GeneratorKind.ZZ_EVEN,
    GeneratorKind.Z_ODD,
    GeneratorKind.Z_EVEN,
    GeneratorKind.MIX_X,
)


@dataclass(frozen=True)
class ChainLayout:
    """Open chain of qubits with even-anchored and odd-anchored neighbor pairs."""

    num_qubits: int

    def __post_init__(self):
        if self.num_qubits < 1:
            raise ValueError("num_qubits must be positive")

    @property
    def even_sites(self) -> tuple[int, ...]:
        return tuple(range(0, self.num_qubits, 2))

    @property
    def odd_sites(self) -> tuple[int, ...]:
        return tuple(range(1, self.num_qubits, 2))

    @property
    def even_pairs(self) -> tuple[tuple[int, int], ...]:
        return tuple((i, i + 1) for i in range(0, self.num_qubits - 1, 2))

    @property
    def odd_pairs(self) -> tuple[tuple[int, int], ...]:
        return tuple((i, i + 1) for i in range(1, self.num_qubits - 1, 2))

    @property
    def dim(self) -> int:
        return 2**self.num_qubits


def _bits(n: int) -> np.ndarray:
    """``bits[x, q]`` is the value of qubit ``q`` in basis index ``x``."""
    idx = np.arange(2**n)
    return (idx[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1


@lru_cache(maxsize=None)
def _diagonal_cached(kind: GeneratorKind, n: int) -> np.ndarray:
    layout = ChainLayout(n)
    zvals = 1 - 2 * _bits(n)  # Z eigenvalue of each qubit per basis state
    if kind == GeneratorKind.Z_EVEN:
        diag = zvals[:, list(layout.even_sites)].sum(axis=1)
    elif kind == GeneratorKind.Z_ODD:
        diag = zvals[:, list(layout.odd_sites)].sum(axis=1) if layout.odd_sites else np.zeros(2**n)
    else:
        pairs = layout.even_pairs if kind == GeneratorKind.ZZ_EVEN else layout.odd_pairs
        diag = np.zeros(2**n)
        for i, j in pairs:
            diag = diag + zvals[:, i] * zvals[:, j]
    diag = np.asarray(diag, dtype=float)
    diag.setflags(write=False)
    return diag


def generator_diagonal(kind: GeneratorKind, layout: ChainLayout) -> np.ndarray:
    """Diagonal of a Z-type generator as a real vector of length ``2**n``."""
    kind = GeneratorKind(kind)
    if kind == GeneratorKind.MIX_X:
        raise ValueError("MIX_X is not diagonal in the computational basis")
    return _diagonal_cached(kind, layout.num_qubits)


def diagonal_table(layout: ChainLayout) -> np.ndarray:
    """Stack of the four Z-type diagonals, rows ordered ZZ_ODD, ZZ_EVEN, Z_ODD, Z_EVEN."""
    return np.ascontiguousarray(
        np.stack([generator_diagonal(k, layout) for k in LAYER_ACTION_ORDER[:4]])
    )


def single_site_operator(op, site: int, n: int) -> np.ndarray:
    """Embed a 2x2 operator at ``site`` of an ``n``-qubit register."""
    out = np.ones((1, 1), dtype=complex)
    for q in range(n):
        out = np.kron(out, op if q == site else I2)
    return out


def generator_matrix(kind: GeneratorKind, layout: ChainLayout) -> np.ndarray:
    kind = GeneratorKind(kind)
    n = layout.num_qubits
    if kind == GeneratorKind.MIX_X:
        return sum(single_site_operator(X, q, n) for q in range(n))
    return np.diag(generator_diagonal(kind, layout)).astype(complex)


def layer_unitary(kind: GeneratorKind, angle: float, layout: ChainLayout) -> np.ndarray:
    """``exp(-i angle H_kind)``."""
    if not np.isfinite(angle):
        raise ValueError("angle must be finite")
    kind = GeneratorKind(kind)
    if kind == GeneratorKind.MIX_X:
        c, s = np.cos(angle), np.sin(angle)
        rot = np.array([[c, -1j * s], [-1j * s, c]])
        out = np.ones((1, 1), dtype=complex)
        for _ in range(layout.num_qubits):
            out = np.kron(out, rot)
        return out
    return unitary_evolution(generator_diagonal(kind, layout), angle)


def _gate_2x2(name: str, phi: float | None) -> np.ndarray:
    key = name.upper()
    if key in ("P", "PHASE", "CP", "CONTROLLED_PHASE"):
        if phi is None:
            raise ValueError("controlled phase requires phi")
        return np.diag([1.0, np.exp(1j * phi)]).astype(complex)
    if key == "CZ":
        return Z
    if key in ("CX", "CNOT"):
        return X
    if key not in SINGLE_QUBIT:
        raise ValueError(f"unknown gate {name!r}")
    return SINGLE_QUBIT[key]


def standard_gate(
    name: str,
    qubits: Sequence[int],
    n: int,
    *,
    phi: float | None = None,
    control_values: Sequence[int] | None = None,
) -> np.ndarray:
    """Embed a (multi-)controlled single-qubit gate into ``n`` qubits.

    The last entry of ``qubits`` is the target; the others are controls.
    ``control_values`` gives the control state each control must be in
    (``1`` is a filled control, ``0`` a hollow one); all ones by default.
    ``CZ``/``CX`` are accepted as aliases for ``Z``/``X`` with controls and
    ``P`` (or ``controlled_phase``) applies ``diag(1, exp(i phi))``.
    """
    qubits = [int(q) for q in qubits]
    if len(set(qubits)) != len(qubits):
        raise ValueError(f"repeated qubit indices {qubits}")
    if any(q < 0 or q >= n for q in qubits):
        raise ValueError(f"qubit indices must lie in [0, {n})")
    key = name.upper()
    if key in ("CZ", "CX", "CNOT", "CP") and len(qubits) < 2:
        raise ValueError(f"{name} needs a control and a target")
    gate = _gate_2x2(name, phi)
    *controls, target = qubits
    if control_values is None:
        control_values = [1] * len(controls)
    if len(control_values) != len(controls):
        raise ValueError("control_values must match the number of controls")

    bits = _bits(n)
    dim = 2**n
    active = np.ones(dim, dtype=bool)
    for c, v in zip(controls, control_values):
        active &= bits[:, c] == int(v)
    out = np.eye(dim, dtype=complex)
    tbit = bits[:, target]
    flip = 1 << (n - 1 - target)
    for col in np.nonzero(active)[0]:
        b = tbit[col]
        base = col & ~flip
        out[col, col] = 0.0
        out[base, col] = gate[0, b]
        out[base | flip, col] = gate[1, b]
    return out
