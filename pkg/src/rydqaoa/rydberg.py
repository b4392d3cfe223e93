"""Three-level Rydberg atoms on a line: Hamiltonians, pulses and compilation.

Each atom has levels ``g`` (logical 0), ``e`` (logical 1) and ``r``
(Rydberg). Basis indices are base-3 with atom 0 as the most significant
digit. Frequencies are angular (rad/s) and durations are in seconds.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .ansatz import QaoaSchedule
from .gates import ChainLayout
from .qcore import DimensionError, QuantumState

G, E, R = 0, 1, 2
TWO_PI = 2 * math.pi

DEFAULT_V_NN = TWO_PI * 24e6
DEFAULT_OMEGA_B = TWO_PI * 60e6
DEFAULT_OMEGA_R = TWO_PI * 36e6
DEFAULT_SPACING_UM = 5.24

# Angles closer than this to a multiple of 2pi count as "no rotation".
ANGLE_EPS = 1e-12


class Transition(str, enum.Enum):
    GE = "GE"
    ER = "ER"

    @property
    def levels(self) -> tuple[int, int]:
        return (G, E) if self is Transition.GE else (E, R)


@dataclass(frozen=True)
class DeviceConfig:
    """Linear atom array and laser settings.

    ``omega_r_weak`` drives the target atom of an entangling block; it
    defaults to a tenth of the nearest-neighbor interaction.
    """

    num_atoms: int
    v_nn: float = DEFAULT_V_NN
    omega_b: float = DEFAULT_OMEGA_B
    omega_r: float = DEFAULT_OMEGA_R
    omega_r_weak: float | None = None
    spacing_um: float = DEFAULT_SPACING_UM

    def __post_init__(self):
        if self.num_atoms < 1:
            raise ValueError("num_atoms must be positive")
        if self.omega_r_weak is None:
            object.__setattr__(self, "omega_r_weak", self.v_nn / 10)
        for name in ("v_nn", "omega_b", "omega_r", "omega_r_weak", "spacing_um"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def interaction(self, i: int, j: int) -> float:
        """Van der Waals shift between atoms ``i`` and ``j`` (distance-6 law)."""
        d = abs(i - j)
        return 0.0 if d == 0 else self.v_nn / d**6

    @property
    def dim(self) -> int:
        return 3**self.num_atoms

    def scaled(self, **changes) -> "DeviceConfig":
        fields = {k: getattr(self, k) for k in
                  ("num_atoms", "v_nn", "omega_b", "omega_r", "omega_r_weak", "spacing_um")}
        fields.update(changes)
        return DeviceConfig(**fields)

    def to_dict(self) -> dict:
        return {
            "num_atoms": self.num_atoms,
            "v_nn": self.v_nn,
            "omega_b": self.omega_b,
            "omega_r": self.omega_r,
            "omega_r_weak": self.omega_r_weak,
            "spacing_um": self.spacing_um,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DeviceConfig":
        return cls(**d)


@dataclass(frozen=True)
class Pulse:
    """Square pulse on one transition of a set of atoms."""

    atoms: tuple[int, ...]
    transition: Transition
    rabi: float
    detuning: float
    duration: float
    label: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(sorted(int(a) for a in self.atoms)))
        object.__setattr__(self, "transition", Transition(self.transition))
        if not self.atoms or len(set(self.atoms)) != len(self.atoms):
            raise ValueError("pulse must address a non-empty set of distinct atoms")
        if not self.duration > 0:
            raise ValueError("pulse duration must be positive")
        if self.rabi < 0:
            raise ValueError("Rabi frequency must be non-negative")


@dataclass(frozen=True)
class PulseSequence:
    pulses: tuple[Pulse, ...]
    device: DeviceConfig
    source_digest: str = ""

    def __len__(self) -> int:
        return len(self.pulses)

    def __iter__(self):
        return iter(self.pulses)

    @property
    def total_duration(self) -> float:
        return math.fsum(p.duration for p in self.pulses)

    def start_times(self) -> list[float]:
        out, t = [], 0.0
        for p in self.pulses:
            out.append(t)
            t += p.duration
        return out


def two_level_propagator(omega: float, delta: float, t: float) -> np.ndarray:
    """Rotating-frame propagator of a detuned two-level drive.

    Equals ``exp(i delta t Z / 2) @ exp(-i t (delta Z - omega X) / 2)``.
    """
    if omega < 0:
        raise ValueError("omega must be non-negative")
    w = math.hypot(omega, delta)
    half = w * t / 2
    c = math.cos(half)
    # sin(w t / 2) / w, continuous at w = 0
    sw = math.sin(half) / w if w > 0 else t / 2
    ph = np.exp(0.5j * delta * t)
    return np.array(
        [
            [ph * (c - 1j * delta * sw), 1j * ph * omega * sw],
            [1j * np.conj(ph) * omega * sw, np.conj(ph) * (c + 1j * delta * sw)],
        ]
    )


def detuning_for_phase(beta: float, omega: float) -> float:
    """Detuning that turns a full generalized-Rabi cycle into ``-exp(-i beta Z)``."""
    if not abs(beta) < math.pi:
        raise ValueError(f"|beta| must be < pi (detuning diverges), got {beta!r}")
    return -beta * omega / math.sqrt(math.pi**2 - beta**2)


def two_pi_duration(omega: float, delta: float) -> float:
    return TWO_PI / math.hypot(omega, delta)


# --- Hamiltonian -----------------------------------------------------------


@lru_cache(maxsize=32)
def _digits(n: int) -> np.ndarray:
    idx = np.arange(3**n)
    d = np.empty((3**n, n), dtype=np.int8)
    for q in range(n):
        d[:, q] = (idx // 3 ** (n - 1 - q)) % 3
    d.setflags(write=False)
    return d


@lru_cache(maxsize=32)
def _blockade_diagonal(device: DeviceConfig) -> np.ndarray:
    n = device.num_atoms
    occ = (_digits(n) == R).astype(float)
    diag = np.zeros(3**n)
    for i in range(n):
        for j in range(i + 1, n):
            diag += device.interaction(i, j) * occ[:, i] * occ[:, j]
    diag.setflags(write=False)
    return diag


def _hamiltonian_parts(device: DeviceConfig, pulse: Pulse):
    """Diagonal vector plus (rows, cols, values) of the upper off-diagonal."""
    n = device.num_atoms
    if pulse.atoms[-1] >= n:
        raise ValueError(f"pulse addresses atom {pulse.atoms[-1]} of a {n}-atom array")
    lo, hi = pulse.transition.levels
    digits = _digits(n)
    diag = _blockade_diagonal(device).copy()
    rows, cols = [], []
    for a in pulse.atoms:
        diag -= pulse.detuning * (digits[:, a] == hi)
        src = np.nonzero(digits[:, a] == lo)[0]
        rows.append(src)
        cols.append(src + (hi - lo) * 3 ** (n - 1 - a))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.full(rows.size, pulse.rabi / 2)
    return diag, rows, cols, vals


def hamiltonian_snapshot(device: DeviceConfig, active: Pulse) -> np.ndarray:
    """Dense Hamiltonian (rad/s) while ``active`` is on."""
    diag, rows, cols, vals = _hamiltonian_parts(device, active)
    h = np.diag(diag).astype(complex)
    h[cols, rows] += vals
    h[rows, cols] += vals
    return h


@lru_cache(maxsize=4096)
def _pulse_blocks(device: DeviceConfig, pulse: Pulse):
    """Propagator of one square pulse, split into its invariant subspaces.

    Returns a list of ``(indices, unitaries)`` with ``indices`` of shape
    ``(m, s)`` and ``unitaries`` of shape ``(m, s, s)``: ``m`` decoupled
    blocks of size ``s``.
    """
    diag, rows, cols, vals = _hamiltonian_parts(device, pulse)
    dim = diag.size
    adj = coo_matrix((np.ones(rows.size), (rows, cols)), shape=(dim, dim))
    ncomp, labels = connected_components(adj, directed=False)
    order = np.argsort(labels, kind="stable")
    sizes = np.bincount(labels, minlength=ncomp)
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    # position of every basis index inside its block
    offset = np.empty(dim, dtype=np.int64)
    offset[order] = np.arange(dim) - starts[labels[order]]
    t = pulse.duration
    out = []
    for s in np.unique(sizes):
        comps = np.nonzero(sizes == s)[0]
        idx = order[starts[comps][:, None] + np.arange(s)[None, :]]
        if s == 1:
            out.append((idx, np.exp(-1j * t * diag[idx])[:, :, None]))
            continue
        slot = np.full(ncomp, -1, dtype=np.int64)
        slot[comps] = np.arange(comps.size)
        hb = np.zeros((comps.size, s, s), dtype=complex)
        ar = np.arange(s)
        hb[:, ar, ar] = diag[idx]
        sel = slot[labels[rows]] >= 0
        m = slot[labels[rows[sel]]]
        a, b = offset[rows[sel]], offset[cols[sel]]
        np.add.at(hb, (m, a, b), vals[sel])
        np.add.at(hb, (m, b, a), vals[sel])
        w, v = np.linalg.eigh(hb)
        u = np.einsum("mij,mj,mkj->mik", v, np.exp(-1j * t * w), v.conj())
        out.append((idx, u))
    return out


def pulse_propagator(device: DeviceConfig, pulse: Pulse, method: str = "blocks") -> np.ndarray:
    """Dense ``exp(-i H t)`` for one pulse (``blocks`` or ``expm``)."""
    if method == "expm":
        from scipy.linalg import expm

        return expm(-1j * pulse.duration * hamiltonian_snapshot(device, pulse))
    u = np.zeros((device.dim, device.dim), dtype=complex)
    for idx, ub in _pulse_blocks(device, pulse):
        u[idx[:, :, None], idx[:, None, :]] = ub
    return u


def _apply_pulse(device: DeviceConfig, pulse: Pulse, vec: np.ndarray) -> np.ndarray:
    out = np.empty_like(vec)
    for idx, ub in _pulse_blocks(device, pulse):
        if vec.ndim == 1:
            out[idx] = np.einsum("mij,mj->mi", ub, vec[idx])
        else:
            out[idx] = np.einsum("mij,mjk->mik", ub, vec[idx])
    return out


def evolve_vector(seq: PulseSequence | Iterable[Pulse], device: DeviceConfig, vec: np.ndarray) -> np.ndarray:
    """Evolve a raw vector, or the columns of a matrix, through the pulses."""
    vec = np.asarray(vec, dtype=complex)
    if vec.shape[0] != device.dim:
        raise DimensionError(f"expected leading dimension {device.dim}, got {vec.shape[0]}")
    for pulse in seq:
        vec = _apply_pulse(device, pulse, vec)
    return vec


def evolve_pulses(seq: PulseSequence, device: DeviceConfig, psi0: QuantumState) -> QuantumState:
    if not isinstance(psi0, QuantumState) or psi0.levels != 3:
        raise DimensionError("evolve_pulses expects a three-level QuantumState")
    if psi0.num_sites != device.num_atoms:
        raise DimensionError(f"state has {psi0.num_sites} atoms, device has {device.num_atoms}")
    out = evolve_vector(seq, device, psi0.amplitudes)
    return QuantumState(device.num_atoms, 3, out / np.linalg.norm(out))


# --- embedding -------------------------------------------------------------


@lru_cache(maxsize=32)
def logical_indices(n: int) -> np.ndarray:
    """3-level basis index of each qubit basis state (``0 -> g``, ``1 -> e``)."""
    idx = np.arange(2**n)
    out = np.zeros(2**n, dtype=np.int64)
    for q in range(n):
        out += ((idx >> (n - 1 - q)) & 1) * 3 ** (n - 1 - q)
    out.setflags(write=False)
    return out


def embed_logical(psi: QuantumState | np.ndarray, n: int | None = None) -> np.ndarray:
    vec = psi.amplitudes if isinstance(psi, QuantumState) else np.asarray(psi, dtype=complex)
    n = n if n is not None else int(round(math.log2(vec.shape[0])))
    out = np.zeros((3**n,) + vec.shape[1:], dtype=complex)
    out[logical_indices(n)] = vec
    return out


def project_logical(vec: np.ndarray, n: int) -> np.ndarray:
    return np.asarray(vec)[logical_indices(n)]


# --- compilation -----------------------------------------------------------


def _rotation_needed(phi: float) -> bool:
    r = math.remainder(phi, TWO_PI)
    return abs(r) > ANGLE_EPS


def _phase_pulse(atoms: Sequence[int], phase: float, omega: float, label: str) -> Pulse | None:
    """Detuned 2pi pulse on ``e <-> r`` giving ``|e>`` the relative phase ``phase``.

    The cycle maps ``|e>`` to ``-exp(-i b)|e>``, so ``b = pi - phase``.
    Returns ``None`` when no rotation is required.
    """
    if not _rotation_needed(phase):
        return None
    b = math.remainder(math.pi - phase, TWO_PI)
    delta = detuning_for_phase(b, omega)
    return Pulse(tuple(atoms), Transition.ER, omega, delta, two_pi_duration(omega, delta), label)


def block_target_parameter(gamma: float) -> float:
    """Detuning parameter of the target cycle for a ZZ angle ``gamma``.

    The three-pulse block is ``diag(1, -exp(-i b), -1, -1)`` on
    ``(|00>, |01>, |10>, |11>)`` (control first). Its entangling phase
    ``b - pi`` must equal the ``-4 gamma`` of ``exp(-i gamma ZZ)``.
    """
    return math.remainder(math.pi - 4 * gamma, TWO_PI)


def ideal_block_unitary(gamma: float) -> np.ndarray:
    """Infinite-blockade action of the compiled block on two qubits."""
    b = block_target_parameter(gamma)
    if not _rotation_needed(math.pi - b):
        # target cycle omitted: only the control pi pulses remain
        return np.diag([1, 1, -1, -1]).astype(complex)
    return np.diag([1, -np.exp(-1j * b), -1, -1]).astype(complex)


def _check_angle(name: str, value: float):
    if not abs(value) < math.pi:
        raise ValueError(
            f"{name}={value!r} is outside (-pi, pi); the detuning formula is singular at +-pi"
        )


def compile_schedule(
    s: QaoaSchedule, device: DeviceConfig, compensate: bool = False
) -> PulseSequence:
    """Translate a schedule into square pulses, layer by layer.

    Within a layer the pulses follow the action order of the ideal
    factors: entangling blocks on odd pairs, then even pairs, then the
    odd and even Z rotations, then the global mixer pulse.

    Each entangling block is control pi pulse, weak detuned 2pi pulse on
    the target, control pi pulse; it matches ``exp(-i gamma ZZ)`` up to
    single-qubit Z rotations. With ``compensate=True`` those rotations are
    folded into the Z stage (one pulse per group of atoms that need the
    same phase), so the sequence reproduces the ideal layer exactly in the
    infinite-blockade limit. Otherwise the Z stage is one pulse per parity.
    """
    n = device.num_atoms
    layout = ChainLayout(n)
    pulses: list[Pulse] = []
    for k, layer in enumerate(s.layers()):
        alpha, beta_even, beta_odd, gamma_even, gamma_odd = layer
        for name, v in (("beta_even", beta_even), ("beta_odd", beta_odd),
                        ("gamma_even", gamma_even), ("gamma_odd", gamma_odd)):
            _check_angle(f"layer {k} {name}", v)
        extra = np.zeros(n)
        for gamma, pairs, tag in ((gamma_odd, layout.odd_pairs, "zz_odd"),
                                  (gamma_even, layout.even_pairs, "zz_even")):
            if not _rotation_needed(gamma):
                continue
            b = block_target_parameter(gamma)
            # with b = +-pi the target cycle degenerates to identity and is dropped
            target_phase = math.pi - b if _rotation_needed(math.pi - b) else 0.0
            for c, t in pairs:
                label = f"L{k}:{tag}:{c}-{t}"
                ctrl = Pulse((c,), Transition.ER, device.omega_r, 0.0,
                             math.pi / device.omega_r, label + ":ctrl")
                pulses.append(ctrl)
                tgt = _phase_pulse((t,), target_phase, device.omega_r_weak, label + ":tgt")
                if tgt is not None:
                    pulses.append(tgt)
                pulses.append(ctrl)
                extra[c] += 2 * gamma - math.pi
                extra[t] += 2 * gamma - target_phase
        if compensate:
            want = np.zeros(n)
            want[list(layout.odd_sites)] += 2 * beta_odd
            want[list(layout.even_sites)] += 2 * beta_even
            want += extra
            groups: dict[float, list[int]] = {}
            for a in range(n):
                key = round(math.remainder(want[a], TWO_PI), 12)
                if key == -round(math.pi, 12):
                    key = round(math.pi, 12)
                groups.setdefault(key, []).append(a)
            for key in sorted(groups):
                p = _phase_pulse(groups[key], key, device.omega_r, f"L{k}:z:{groups[key]}")
                if p is not None:
                    pulses.append(p)
        else:
            for beta, sites, tag in ((beta_odd, layout.odd_sites, "z_odd"),
                                     (beta_even, layout.even_sites, "z_even")):
                if not sites:
                    continue
                p = _phase_pulse(sites, 2 * beta, device.omega_r, f"L{k}:{tag}")
                if p is not None:
                    pulses.append(p)
        a_eff = alpha % math.pi
        if a_eff > ANGLE_EPS and math.pi - a_eff > ANGLE_EPS:
            pulses.append(Pulse(tuple(range(n)), Transition.GE, device.omega_b, 0.0,
                                2 * a_eff / device.omega_b, f"L{k}:mix"))
    return PulseSequence(tuple(pulses), device, s.digest())


def simulate_schedule_physical(
    s: QaoaSchedule,
    device: DeviceConfig,
    psi0_logical: QuantumState,
    compensate: bool = False,
) -> tuple[QuantumState, float]:
    """Run a schedule on the atom array; return the renormalized logical state and leakage."""
    if not isinstance(psi0_logical, QuantumState) or psi0_logical.levels != 2:
        raise DimensionError("expected a qubit QuantumState")
    n = device.num_atoms
    if psi0_logical.num_sites != n:
        raise DimensionError(f"state has {psi0_logical.num_sites} qubits, device has {n} atoms")
    seq = compile_schedule(s, device, compensate=compensate)
    out = evolve_vector(seq, device, embed_logical(psi0_logical, n))
    logical = project_logical(out, n)
    kept = float(np.vdot(logical, logical).real)
    leakage = max(0.0, 1.0 - kept)
    return QuantumState(n, 2, logical / math.sqrt(kept)), leakage


def physical_logical_operator(s: QaoaSchedule, device: DeviceConfig, compensate: bool = False) -> np.ndarray:
    """Compiled schedule restricted to the computational subspace (not unitary under leakage)."""
    n = device.num_atoms
    seq = compile_schedule(s, device, compensate=compensate)
    cols = embed_logical(np.eye(2**n, dtype=complex), n)
    return project_logical(evolve_vector(seq, device, cols), n)


def entangling_block_fidelity(device: DeviceConfig, gamma: float = math.pi / 4) -> tuple[float, float]:
    """Fidelity of one compiled two-atom block on ``|++>`` and its leakage.

    The fidelity is taken against :func:`ideal_block_unitary` using the
    unnormalized logical projection, so leaked population counts against it.
    ``gamma = pi/4`` gives a CZ-equivalent controlled phase.
    """
    if device.num_atoms != 2:
        raise ValueError("entangling_block_fidelity needs a two-atom device")
    s = QaoaSchedule.from_flat([0.0, 0.0, 0.0, gamma, 0.0])
    plus = np.full(4, 0.5, dtype=complex)
    out = project_logical(evolve_vector(compile_schedule(s, device), device, embed_logical(plus, 2)), 2)
    leak = max(0.0, 1.0 - float(np.vdot(out, out).real))
    return float(abs(np.vdot(ideal_block_unitary(gamma) @ plus, out)) ** 2), leak


# --- export ----------------------------------------------------------------


def sequence_to_dict(seq: PulseSequence) -> dict:
    """Machine-readable pulse list; frequencies in Hz (angular / 2pi)."""
    return {
        "device": seq.device.to_dict(),
        "source_digest": seq.source_digest,
        "total_duration_s": seq.total_duration,
        "pulses": [
            {
                "atoms": list(p.atoms),
                "transition": p.transition.value,
                "rabi_hz": p.rabi / TWO_PI,
                "detuning_hz": p.detuning / TWO_PI,
                "duration_s": p.duration,
                "start_s": t0,
                "label": p.label,
            }
            for p, t0 in zip(seq.pulses, seq.start_times())
        ],
    }


def sequence_from_dict(d: dict) -> PulseSequence:
    device = DeviceConfig.from_dict(d["device"])
    pulses = tuple(
        Pulse(tuple(p["atoms"]), Transition(p["transition"]), p["rabi_hz"] * TWO_PI,
              p["detuning_hz"] * TWO_PI, p["duration_s"], p.get("label", ""))
        for p in d["pulses"]
    )
    return PulseSequence(pulses, device, d.get("source_digest", ""))


def staircase_rows(seq: PulseSequence) -> list[dict]:
    """Piecewise-constant profile, one row per (pulse, atom) with start and end times."""
    rows = []
    for i, (p, t0) in enumerate(zip(seq.pulses, seq.start_times())):
        for a in p.atoms:
            for t in (t0, t0 + p.duration):
                rows.append({
                    "pulse": i,
                    "atom": a,
                    "transition": p.transition.value,
                    "time_s": t,
                    "rabi_hz": p.rabi / TWO_PI,
                    "detuning_hz": p.detuning / TWO_PI,
                })
    return rows
