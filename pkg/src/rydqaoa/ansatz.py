"""The layered ansatz under the ideal gate model."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from . import _backend
from .gates import LAYER_ACTION_ORDER, ChainLayout, GeneratorKind, diagonal_table, layer_unitary
from .qcore import DimensionError, QuantumState

PARAMS_PER_LAYER = 5


def wrap_angle(x):
    """Map angles into ``[-pi, pi)``."""
    return np.mod(np.asarray(x, dtype=float) + np.pi, 2 * np.pi) - np.pi


class Layer(NamedTuple):
    alpha: float
    beta_even: float
    beta_odd: float
    gamma_even: float
    gamma_odd: float


@dataclass(frozen=True, eq=False)
class QaoaSchedule:
    """Rabi angles of ``p`` layers, stored as a ``(p, 5)`` array.

    Columns are ``alpha, beta_even, beta_odd, gamma_even, gamma_odd``. Angles
    are wrapped into ``[-pi, pi)`` on construction.
    """

    angles: np.ndarray

    def __post_init__(self):
        a = np.array(self.angles, dtype=float)
        if a.ndim == 1:
            if a.size % PARAMS_PER_LAYER:
                raise ValueError(f"flat parameter vector length {a.size} is not a multiple of 5")
            a = a.reshape(-1, PARAMS_PER_LAYER)
        if a.ndim != 2 or a.shape[1] != PARAMS_PER_LAYER or a.shape[0] < 1:
            raise ValueError(f"angles must have shape (p, 5) with p >= 1, got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("angles must be finite")
        a = np.ascontiguousarray(wrap_angle(a))
        a.setflags(write=False)
        object.__setattr__(self, "angles", a)

    @classmethod
    def zeros(cls, depth: int) -> "QaoaSchedule":
        return cls(np.zeros((depth, PARAMS_PER_LAYER)))

    @classmethod
    def from_flat(cls, params: Sequence[float]) -> "QaoaSchedule":
        return cls(np.asarray(params, dtype=float).reshape(-1))

    @classmethod
    def from_layers(cls, layers: Sequence[Sequence[float]]) -> "QaoaSchedule":
        return cls(np.asarray(layers, dtype=float))

    @property
    def depth(self) -> int:
        return self.angles.shape[0]

    @property
    def num_params(self) -> int:
        return self.angles.size

    def flat(self) -> np.ndarray:
        return self.angles.reshape(-1).copy()

    def layers(self) -> list[Layer]:
        return [Layer(*map(float, row)) for row in self.angles]

    def concat(self, other: "QaoaSchedule") -> "QaoaSchedule":
        """Schedule that runs ``self`` first, then ``other``."""
        return QaoaSchedule(np.vstack([self.angles, other.angles]))

    def digest(self) -> str:
        return hashlib.sha256(self.angles.tobytes()).hexdigest()[:16]

    def __eq__(self, other) -> bool:
        return isinstance(other, QaoaSchedule) and np.array_equal(self.angles, other.angles)

    def __hash__(self) -> int:
        return hash(self.angles.tobytes())


def _check_state(psi0: QuantumState, layout: ChainLayout) -> np.ndarray:
    vec = psi0.amplitudes if isinstance(psi0, QuantumState) else np.asarray(psi0, dtype=complex)
    if isinstance(psi0, QuantumState) and psi0.levels != 2:
        raise DimensionError("ideal ansatz acts on qubit states")
    if vec.size != layout.dim:
        raise DimensionError(f"state of dimension {vec.size} does not fit {layout.num_qubits} qubits")
    return vec


def evolve_vector(angles: np.ndarray, layout: ChainLayout, vec: np.ndarray) -> np.ndarray:
    """Apply raw ``(p, 5)`` angles to a vector or to the columns of a matrix."""
    work = np.array(vec, dtype=complex, order="C", copy=True)
    squeeze = work.ndim == 1
    if squeeze:
        work = work.reshape(-1, 1)
    _backend.apply_layers(
        work,
        np.ascontiguousarray(angles, dtype=float),
        diagonal_table(layout),
        layout.num_qubits,
    )
    return work[:, 0] if squeeze else work


def apply_schedule(s: QaoaSchedule, layout: ChainLayout, psi0: QuantumState) -> QuantumState:
    vec = _check_state(psi0, layout)
    out = evolve_vector(s.angles, layout, vec)
    # renormalize away rounding so long schedules stay within NORM_TOL
    return QuantumState(layout.num_qubits, 2, out / np.linalg.norm(out))


def schedule_unitary(s: QaoaSchedule, layout: ChainLayout) -> np.ndarray:
    return evolve_vector(s.angles, layout, np.eye(layout.dim, dtype=complex))


def iter_factors(s: QaoaSchedule) -> Iterator[tuple[int, GeneratorKind, float]]:
    """Yield ``(layer, kind, angle)`` for each factor in the order it acts."""
    for k, row in enumerate(s.angles):
        for kind in LAYER_ACTION_ORDER:
            yield k, kind, float(row[int(kind)])


def factor_unitaries(s: QaoaSchedule, layout: ChainLayout) -> Iterator[np.ndarray]:
    for _, kind, angle in iter_factors(s):
        yield layer_unitary(kind, angle, layout)


def default_initial_state(n: int, target_kind: str = "state") -> QuantumState | None:
    """``|+>^n`` for state targets; circuit targets have no initial state."""
    if target_kind == "circuit":
        return None
    if target_kind != "state":
        raise ValueError(f"target_kind must be 'state' or 'circuit', got {target_kind!r}")
    return QuantumState(n, 2, np.full(2**n, 2 ** (-n / 2), dtype=complex))
