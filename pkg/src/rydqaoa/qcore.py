"""Dense linear algebra for small Hilbert spaces.

Matrices are plain ``numpy`` complex arrays. States carry their site
structure in :class:`QuantumState` so that qubit (2-level) and Rydberg
(3-level) vectors cannot be mixed up silently.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

NORM_TOL = 1e-10
UNITARY_TOL = 1e-10
HERMITIAN_TOL = 1e-10
ORACLE_TOL = 1e-9

MAX_DIM = 3**6


class DimensionError(ValueError):
    """Operands have incompatible or oversized dimensions."""


@dataclass(frozen=True)
class QuantumState:
    """Normalized pure state on ``num_sites`` sites of ``levels`` levels each.

    Site 0 is the most significant digit of the basis index, matching
    ``np.kron(site0, site1, ...)`` ordering.
    """

    num_sites: int
    levels: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.levels not in (2, 3):
            raise ValueError(f"levels must be 2 or 3, got {self.levels}")
        if self.num_sites < 1:
            raise ValueError("num_sites must be positive")
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != self.levels**self.num_sites:
            raise DimensionError(
                f"expected {self.levels ** self.num_sites} amplitudes, got {amps.size}"
            )
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized (norm={norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @classmethod
    def from_vector(cls, vec, levels: int = 2, normalize: bool = False) -> "QuantumState":
        vec = np.asarray(vec, dtype=complex).reshape(-1)
        n = _num_sites(vec.size, levels)
        if normalize:
            vec = vec / np.linalg.norm(vec)
        return cls(n, levels, vec)

    @classmethod
    def basis(cls, index: int | str, num_sites: int | None = None, levels: int = 2) -> "QuantumState":
        """Computational basis state; ``index`` may be a digit string like ``"0110"``."""
        if isinstance(index, str):
            num_sites = len(index)
            index = int(index, levels)
        if num_sites is None:
            raise ValueError("num_sites is required for integer indices")
        vec = np.zeros(levels**num_sites, dtype=complex)
        vec[index] = 1.0
        return cls(num_sites, levels, vec)


def _num_sites(dim: int, levels: int) -> int:
    n = int(round(np.log(dim) / np.log(levels)))
    if levels**n != dim or n < 1:
        raise DimensionError(f"dimension {dim} is not a power of {levels}")
    return n


def tensor_product(a, b) -> np.ndarray:
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    b = np.atleast_2d(np.asarray(b, dtype=complex))
    rows, cols = a.shape[0] * b.shape[0], a.shape[1] * b.shape[1]
    if rows > MAX_DIM or cols > MAX_DIM:
        raise DimensionError(f"tensor product of size {rows}x{cols} exceeds {MAX_DIM}")
    return np.kron(a, b)


def kron_all(factors: Iterable) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for f in factors:
        out = tensor_product(out, f)
    return out


def is_hermitian(h, tol: float = HERMITIAN_TOL) -> bool:
    h = np.asarray(h)
    return h.ndim == 2 and h.shape[0] == h.shape[1] and np.max(np.abs(h - h.conj().T), initial=0.0) <= tol


def is_unitary(u, tol: float = UNITARY_TOL) -> bool:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) <= tol


def unitary_evolution(h, t: float, method: str = "auto") -> np.ndarray:
    """Return ``exp(-i h t)`` for Hermitian ``h``.

    ``h`` may be a square matrix or a 1-D array holding the diagonal of a
    diagonal operator; the latter is exponentiated entrywise and returned
    as a dense diagonal matrix.

    Parameters
    ----------
    h : array_like
        Hermitian generator. Dimensionless when ``t`` is an angle, or in
        rad/s when ``t`` is in seconds.
    t : float
    method : {"auto", "eigh", "expm", "diagonal"}
        ``auto`` picks the diagonal path for diagonal input and ``eigh``
        otherwise. ``expm`` uses scaling-and-squaring (scipy).
    """
    h = np.asarray(h, dtype=complex)
    if h.ndim == 1:
        if np.max(np.abs(h.imag), initial=0.0) > HERMITIAN_TOL:
            raise ValueError("diagonal generator must be real")
        return np.diag(np.exp(-1j * t * h.real))
    if not is_hermitian(h):
        raise ValueError("generator is not Hermitian")
    if method == "auto":
        off = h - np.diag(np.diag(h))
        method = "diagonal" if not np.any(off) else "eigh"
    if method == "diagonal":
        return np.diag(np.exp(-1j * t * np.diag(h).real))
    if method == "eigh":
        w, v = np.linalg.eigh(h)
        return (v * np.exp(-1j * t * w)) @ v.conj().T
    if method == "expm":
        from scipy.linalg import expm

        return expm(-1j * t * h)
    raise ValueError(f"unknown method {method!r}")


def _vector(psi) -> np.ndarray:
    if isinstance(psi, QuantumState):
        return psi.amplitudes
    return np.asarray(psi, dtype=complex).reshape(-1)


def state_fidelity(psi, phi) -> float:
    """Squared overlap ``|<psi|phi>|^2``."""
    a, b = _vector(psi), _vector(phi)
    if a.shape != b.shape:
        raise DimensionError(f"state dimensions differ: {a.size} vs {b.size}")
    return float(min(1.0, abs(np.vdot(a, b)) ** 2))


def operator_fidelity(u, v, check_unitary: bool = True) -> float:
    """Phase-insensitive overlap ``|Tr(V^dag U)| / Tr(U^dag U)``."""
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1] or u.shape != v.shape:
        raise DimensionError(f"operator shapes differ or are not square: {u.shape} vs {v.shape}")
    if check_unitary and not (is_unitary(u) and is_unitary(v)):
        raise ValueError("operator_fidelity expects unitary operands")
    d = u.shape[0]
    # vdot(v, u) = sum conj(v_ij) u_ij = Tr(V^dag U)
    return float(min(1.0, abs(np.vdot(v, u)) / d))


def partial_trace(psi, keep: Iterable[int]) -> np.ndarray:
    """Reduced density matrix of a qubit state on the sites in ``keep``.

    Kept sites appear in ascending order in the output.
    """
    if isinstance(psi, QuantumState):
        if psi.levels != 2:
            raise ValueError("partial_trace expects a qubit state")
        n, vec = psi.num_sites, psi.amplitudes
    else:
        vec = _vector(psi)
        n = _num_sites(vec.size, 2)
    keep = sorted(set(keep))
    if not keep:
        raise ValueError("keep must be non-empty")
    if keep[0] < 0 or keep[-1] >= n:
        raise ValueError(f"site indices must lie in [0, {n})")
    traced = [q for q in range(n) if q not in keep]
    tensor = vec.reshape([2] * n).transpose(keep + traced).reshape(2 ** len(keep), -1)
    return tensor @ tensor.conj().T
