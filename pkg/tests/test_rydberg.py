import json
import math

import numpy as np
import pytest

from rydqaoa.ansatz import QaoaSchedule, schedule_unitary
from rydqaoa.gates import ChainLayout, X, Z
from rydqaoa.qcore import QuantumState, is_unitary, operator_fidelity, state_fidelity, unitary_evolution
from rydqaoa.rydberg import (
    TWO_PI, DeviceConfig, Pulse, PulseSequence, Transition, compile_schedule, detuning_for_phase,
    embed_logical, entangling_block_fidelity, evolve_pulses, evolve_vector, hamiltonian_snapshot,
    ideal_block_unitary, physical_logical_operator, pulse_propagator, sequence_from_dict,
    sequence_to_dict, simulate_schedule_physical, staircase_rows, two_level_propagator,
    two_pi_duration,
)

OMEGA = TWO_PI * 10e6


def rk4_oracle(omega, deltas, ts, steps=10_000):
    """Integrate dU/dt = -i K U with K = (delta Z - omega X) / 2 for a batch of
    (delta, t) pairs, then apply the rotating-frame factor exp(i delta t Z / 2)."""
    deltas, ts = np.asarray(deltas, float), np.asarray(ts, float)
    k = (deltas[:, None, None] * Z - omega * X) / 2
    u = np.broadcast_to(np.eye(2, dtype=complex), k.shape).copy()
    h = (ts / steps)[:, None, None]
    f = lambda m: -1j * (k @ m)
    for _ in range(steps):
        k1 = f(u)
        k2 = f(u + 0.5 * h * k1)
        k3 = f(u + 0.5 * h * k2)
        k4 = f(u + h * k3)
        u = u + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    ph = np.exp(0.5j * deltas * ts)
    frame = np.zeros_like(u)
    frame[:, 0, 0], frame[:, 1, 1] = ph, ph.conj()
    return frame @ u


class TestTwoLevel:
    def test_pi_pulse(self):
        np.testing.assert_allclose(two_level_propagator(OMEGA, 0, math.pi / OMEGA), 1j * X, atol=1e-12)

    def test_two_pi_pulse(self):
        np.testing.assert_allclose(two_level_propagator(OMEGA, 0, TWO_PI / OMEGA), -np.eye(2), atol=1e-12)

    def test_frame_pinned_by_small_time_derivative(self):
        # in this frame the detuning is carried by the phases, so dU/dt(0) = i (omega/2) X
        for d in (0.0, 0.7 * OMEGA, -2.5 * OMEGA):
            dt = 1e-14
            u = two_level_propagator(OMEGA, d, dt)
            np.testing.assert_allclose((u - np.eye(2)) / dt, 0.5j * OMEGA * X, atol=OMEGA * 1e-5)

    @pytest.mark.slow
    def test_matches_integrator_on_grid(self):
        ratios, wts = np.meshgrid(np.linspace(-3, 3, 10), np.linspace(4 * math.pi / 10, 4 * math.pi, 10))
        deltas, ts = ratios.ravel() * OMEGA, wts.ravel() / OMEGA
        oracle = rk4_oracle(OMEGA, deltas, ts)
        worst = 0.0
        for d, t, b in zip(deltas, ts, oracle):
            a = two_level_propagator(OMEGA, d, t)
            assert is_unitary(a, 1e-12)
            worst = max(worst, float(np.max(np.abs(a - b))))
        assert worst <= 1e-9

    def test_negative_omega_rejected(self):
        with pytest.raises(ValueError):
            two_level_propagator(-1.0, 0.0, 1.0)


class TestDetuningForPhase:
    def test_zero(self):
        assert detuning_for_phase(0.0, OMEGA) == 0.0
        np.testing.assert_allclose(two_level_propagator(OMEGA, 0, two_pi_duration(OMEGA, 0)),
                                   -np.eye(2), atol=1e-12)

    def test_half_pi_values(self):
        assert detuning_for_phase(math.pi / 2, OMEGA) == pytest.approx(-OMEGA / math.sqrt(3), rel=1e-14)
        assert detuning_for_phase(-math.pi / 2, OMEGA) == pytest.approx(OMEGA / math.sqrt(3), rel=1e-14)

    def test_round_trip_fifty_values(self):
        for beta in np.linspace(-3, 3, 50):
            d = detuning_for_phase(beta, OMEGA)
            u = two_level_propagator(OMEGA, d, two_pi_duration(OMEGA, d))
            want = -unitary_evolution(Z, beta)
            assert np.max(np.abs(u - want)) <= 1e-10

    @pytest.mark.parametrize("beta", [math.pi, -math.pi, 4.0])
    def test_singularity_rejected(self, beta):
        with pytest.raises(ValueError):
            detuning_for_phase(beta, OMEGA)


class TestHamiltonian:
    def test_blockade_energy(self):
        dev = DeviceConfig(2)
        idle = Pulse((0,), Transition.ER, 0.0, 0.0, 1e-9)
        h = hamiltonian_snapshot(dev, idle)
        rr = 2 * 3 + 2
        assert h[rr, rr].real == pytest.approx(dev.v_nn)

    def test_drive_element(self):
        dev = DeviceConfig(1)
        h = hamiltonian_snapshot(dev, Pulse((0,), Transition.ER, OMEGA, 0.0, 1e-9))
        assert h[2, 1] == pytest.approx(OMEGA / 2)
        np.testing.assert_allclose(h, h.conj().T)

    def test_next_nearest_interaction(self):
        dev = DeviceConfig(3)
        h = hamiltonian_snapshot(dev, Pulse((1,), Transition.ER, 0.0, 0.0, 1e-9))
        idx = 2 * 9 + 0 * 3 + 2
        assert h[idx, idx].real == pytest.approx(dev.v_nn / 64)
        assert dev.interaction(0, 2) == pytest.approx(dev.v_nn / 64)

    def test_detuning_only_on_addressed_atoms(self):
        dev = DeviceConfig(2, v_nn=1.0)
        h = hamiltonian_snapshot(dev, Pulse((1,), Transition.GE, 0.0, 5.0, 1e-9))
        # |e g> vs |g e>: only atom 1 is detuned
        assert h[1 * 3 + 0, 1 * 3 + 0] == 0
        assert h[0 * 3 + 1, 0 * 3 + 1] == -5.0

    @pytest.mark.parametrize("transition", list(Transition))
    def test_block_propagator_matches_expm(self, transition):
        dev = DeviceConfig(3)
        p = Pulse((0, 2), transition, OMEGA, 0.3 * OMEGA, 37e-9)
        a = pulse_propagator(dev, p)
        b = pulse_propagator(dev, p, method="expm")
        np.testing.assert_allclose(a, b, atol=1e-11)


class TestEvolve:
    def test_empty_sequence(self):
        dev = DeviceConfig(2)
        psi = QuantumState.basis("01", levels=3)
        out = evolve_pulses(PulseSequence((), dev), dev, psi)
        np.testing.assert_array_equal(out.amplitudes, psi.amplitudes)

    def test_ge_pi_pulse(self):
        dev = DeviceConfig(2)
        seq = PulseSequence((Pulse((0,), Transition.GE, dev.omega_b, 0.0, math.pi / dev.omega_b),), dev)
        out = evolve_pulses(seq, dev, QuantumState.basis("00", levels=3))
        want = np.zeros(9, dtype=complex)
        # the +(omega/2) drive gives -i; the two-level closed form's frame gives +i
        want[1 * 3 + 0] = -1j
        np.testing.assert_allclose(out.amplitudes, want, atol=1e-12)

    def test_blockaded_target_cycle(self):
        dev = DeviceConfig(2)
        om = dev.v_nn / 20
        seq = PulseSequence((Pulse((1,), Transition.ER, om, 0.0, TWO_PI / om),), dev)
        out = evolve_pulses(seq, dev, QuantumState.basis("21", levels=3)).amplitudes
        stay = out[2 * 3 + 1]
        leak = abs(out[2 * 3 + 2]) ** 2
        # excursion is suppressed: no -1 from a completed cycle, tiny leakage
        assert abs(stay - 1) < 0.2
        assert leak <= 4 * (om / dev.v_nn) ** 2

    def test_dimension_mismatch(self):
        dev = DeviceConfig(2)
        with pytest.raises(ValueError):
            evolve_pulses(PulseSequence((), dev), dev, QuantumState.basis("000", levels=3))

    @pytest.mark.slow
    def test_norm_over_long_sequence(self, rng):
        dev = DeviceConfig(3)
        pulses = []
        for k in range(500):
            atoms = tuple(sorted(set(rng.integers(0, 3, size=2).tolist())))
            tr = Transition.GE if k % 2 else Transition.ER
            pulses.append(Pulse(atoms, tr, OMEGA * rng.uniform(0.5, 2), OMEGA * rng.uniform(-1, 1),
                                rng.uniform(1, 50) * 1e-9))
        vec = np.zeros(27, dtype=complex)
        vec[0] = 1
        out = evolve_vector(PulseSequence(tuple(pulses), dev), dev, vec)
        assert abs(np.linalg.norm(out) - 1) <= 1e-9


def gamma_only(n, gamma, even=True):
    row = [0, 0, 0, gamma, 0] if even else [0, 0, 0, 0, gamma]
    return QaoaSchedule.from_flat(row)


class TestCompile:
    def test_zero_schedule_is_empty(self):
        assert len(compile_schedule(QaoaSchedule.zeros(3), DeviceConfig(4))) == 0

    def test_fig2_three_pulses(self):
        dev = DeviceConfig(2)
        seq = compile_schedule(gamma_only(2, 0.3), dev)
        assert len(seq) == 3
        c1, tgt, c2 = seq.pulses
        assert c1 == c2 and c1.atoms == (0,) and c1.transition == Transition.ER
        assert c1.duration == pytest.approx(math.pi / dev.omega_r)
        assert tgt.atoms == (1,) and tgt.rabi == dev.omega_r_weak and tgt.detuning != 0
        assert tgt.duration == pytest.approx(TWO_PI / math.hypot(tgt.rabi, tgt.detuning))

    def test_full_layer_pulse_count_n5(self):
        s = QaoaSchedule.from_flat([0.4, 0.3, -0.2, 0.5, -0.6])
        assert len(compile_schedule(s, DeviceConfig(5))) == 15

    def test_deterministic(self, rng):
        s = QaoaSchedule(rng.uniform(-3, 3, size=(3, 5)))
        a = compile_schedule(s, DeviceConfig(4))
        b = compile_schedule(s, DeviceConfig(4))
        assert a == b
        assert json.dumps(sequence_to_dict(a)) == json.dumps(sequence_to_dict(b))

    def test_singular_angle_rejected(self):
        s = QaoaSchedule.from_flat([0, math.pi, 0, 0, 0])  # wraps to -pi
        with pytest.raises(ValueError, match="singular"):
            compile_schedule(s, DeviceConfig(2))

    def test_total_duration_is_sum(self, rng):
        seq = compile_schedule(QaoaSchedule(rng.uniform(-3, 3, size=(2, 5))), DeviceConfig(3))
        assert seq.total_duration == pytest.approx(sum(p.duration for p in seq.pulses), rel=1e-15)
        starts = seq.start_times()
        assert starts[0] == 0 and all(b > a for a, b in zip(starts, starts[1:]))

    def test_export_round_trip(self, rng):
        seq = compile_schedule(QaoaSchedule(rng.uniform(-3, 3, size=(1, 5))), DeviceConfig(3))
        d = json.loads(json.dumps(sequence_to_dict(seq)))
        back = sequence_from_dict(d)
        assert len(back) == len(seq)
        for p, q in zip(seq.pulses, back.pulses):
            assert p.atoms == q.atoms and p.transition == q.transition
            assert q.rabi == pytest.approx(p.rabi, rel=1e-15)
            assert q.detuning == pytest.approx(p.detuning, rel=1e-15, abs=1e-6)
        for key in ("atoms", "transition", "rabi_hz", "detuning_hz", "duration_s"):
            assert key in d["pulses"][0]
        rows = staircase_rows(seq)
        assert len(rows) == 2 * sum(len(p.atoms) for p in seq.pulses)


class TestPhysicalModel:
    def test_zero_schedule(self, rng):
        v = rng.normal(size=8) + 1j * rng.normal(size=8)
        psi = QuantumState(3, 2, v / np.linalg.norm(v))
        out, leak = simulate_schedule_physical(QaoaSchedule.zeros(2), DeviceConfig(3), psi)
        np.testing.assert_allclose(out.amplitudes, psi.amplitudes, atol=1e-15)
        assert leak <= 1e-15

    def test_single_atom_mixer(self):
        s = QaoaSchedule.from_flat([math.pi / 2, 0, 0, 0, 0])
        psi0 = QuantumState.basis("0")
        out, leak = simulate_schedule_physical(s, DeviceConfig(1), psi0)
        ideal = schedule_unitary(s, ChainLayout(1)) @ psi0.amplitudes
        assert state_fidelity(out, ideal) >= 1 - 1e-6
        assert leak <= 1e-12

    @pytest.mark.parametrize("beta", [0.3, -1.2, 2.5])
    def test_z_stage_single_atom(self, beta):
        s = QaoaSchedule.from_flat([0, beta, 0, 0, 0])
        u = physical_logical_operator(s, DeviceConfig(1))
        assert operator_fidelity(u, schedule_unitary(s, ChainLayout(1))) == pytest.approx(1, abs=1e-12)

    def test_block_against_infinite_blockade(self):
        f, leak = entangling_block_fidelity(DeviceConfig(2))
        assert f >= 0.99 and leak <= 0.01

    def test_block_improves_with_blockade(self):
        base = DeviceConfig(2)
        fids = [entangling_block_fidelity(base.scaled(v_nn=base.v_nn * k, omega_r_weak=base.omega_r_weak))[0]
                for k in (1, 10, 100)]
        assert fids[0] < fids[1] < fids[2]

    def test_ideal_block_is_controlled_phase(self):
        u = ideal_block_unitary(math.pi / 4)
        # local Z rotations map it onto CZ
        assert np.allclose(np.abs(np.diag(u)), 1)
        assert abs(u[0, 0] * u[3, 3] / (u[1, 1] * u[2, 2]) + 1) < 1e-12

    @pytest.mark.slow
    def test_compensated_converges_to_ideal(self, rng):
        s = QaoaSchedule(rng.uniform(-3, 3, size=(2, 5)))
        lay = ChainLayout(3)
        psi0 = QuantumState(3, 2, np.ones(8) / math.sqrt(8))
        ideal = schedule_unitary(s, lay) @ psi0.amplitudes
        base = DeviceConfig(3)
        fids = []
        for k in (1, 100, 10_000):
            dev = base.scaled(v_nn=base.v_nn * k, omega_r_weak=base.omega_r_weak)
            out, leak = simulate_schedule_physical(s, dev, psi0, compensate=True)
            fids.append(state_fidelity(out, ideal) * (1 - leak))
        assert fids[-1] >= 1 - 1e-5
        assert fids[0] < fids[1] < fids[2] or fids[1] > 1 - 1e-5

    def test_device_config_defaults_and_validation(self):
        d = DeviceConfig(4)
        assert d.v_nn == pytest.approx(TWO_PI * 24e6)
        assert d.omega_b == pytest.approx(TWO_PI * 60e6)
        assert d.omega_r == pytest.approx(TWO_PI * 36e6)
        assert d.omega_r_weak == pytest.approx(d.v_nn / 10)
        assert DeviceConfig.from_dict(d.to_dict()) == d
        with pytest.raises(ValueError):
            DeviceConfig(2, v_nn=-1.0)

    def test_embed_logical(self):
        v = embed_logical(np.array([0, 1, 0, 0], dtype=complex), 2)
        assert v[0 * 3 + 1] == 1 and np.count_nonzero(v) == 1
