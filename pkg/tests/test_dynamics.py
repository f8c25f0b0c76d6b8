import numpy as np
import pytest

from app.errors import InvalidDimensionError
from app.schemas import CircuitParams
from app.services.circuit_model import basis_labels, full_hamiltonian, projector
from app.services.dynamics import (
    CollapseChannel,
    LindbladPropagator,
    QuantumState,
    UnitaryPropagator,
    basis_state,
    collapse_channels_from_coherence,
    dephasing_channel,
    evolve_lindblad,
    evolve_unitary,
    get_propagator,
    liouvillian,
    populations,
    reduce_to_qubits,
)

UNSET = dict(t1_q1=None, t1_q2=None, t1_c=None, t2_q1=None, t2_q2=None, t2_c=None)


def _uncoupled(**coherence) -> CircuitParams:
    """Two-level elements without exchange, so only decoherence acts"""
    return CircuitParams(levels=2, g1=0.0, g2=0.0, g12=0.0, **{**UNSET, **coherence})


class TestQuantumState:
    """Tests for state validation"""

    def test_unnormalized_pure_state(self):
        """Test a pure state must have unit norm"""
        with pytest.raises(ValueError):
            QuantumState.pure([1.0, 1.0])

    def test_density_trace(self):
        """Test a density matrix must have unit trace"""
        with pytest.raises(ValueError):
            QuantumState.density(np.eye(2))

    def test_negative_eigenvalue(self):
        """Test a density matrix must be positive semidefinite"""
        with pytest.raises(ValueError):
            QuantumState.density(np.diag([1.5, -0.5]))

    def test_non_hermitian(self):
        """Test a density matrix must be Hermitian"""
        with pytest.raises(ValueError):
            QuantumState.density([[0.5, 0.5], [0.0, 0.5]])

    def test_label_mismatch(self):
        """Test labels must match the dimension"""
        with pytest.raises(InvalidDimensionError):
            QuantumState.pure([1.0, 0.0], ("0",))

    def test_basis_state(self):
        """Test product states by label"""
        psi = basis_state("010", 3)
        assert psi.dim == 27
        assert psi.data[3] == 1.0
        assert psi.to_density().matrix()[3, 3] == 1.0


class TestUnitaryEvolution:
    """Tests for closed-system propagation"""

    def test_norm_preserved(self, params):
        """Test unitary evolution keeps the norm"""
        H = full_hamiltonian(params)
        states = evolve_unitary(H, basis_state("011", 3), np.linspace(0, 200, 21))
        for state in states:
            assert abs(np.linalg.norm(state.data) - 1.0) < 1e-9

    def test_scalar_time(self, params):
        """Test a scalar time returns a single state"""
        state = evolve_unitary(full_hamiltonian(params), basis_state("010", 3), 5.0)
        assert isinstance(state, QuantumState)

    def test_conserves_excitations(self, params):
        """Test a single excitation never leaves its manifold"""
        H = full_hamiltonian(params)
        state = evolve_unitary(H, basis_state("010", 3), 37.0)
        single = projector(["100", "010", "001"], 3).matrix
        assert np.real(state.data.conj() @ single @ state.data) == pytest.approx(1.0, abs=1e-9)

    def test_conserves_energy(self, params):
        """Test <H> stays constant along the trajectory"""
        H = full_hamiltonian(params).matrix
        vector = basis_state("010", 3).data + basis_state("101", 3).data + 1j * basis_state("001", 3).data
        psi0 = QuantumState.pure(vector / np.linalg.norm(vector))
        energies = [
            np.real(s.data.conj() @ H @ s.data) for s in evolve_unitary(H, psi0, np.linspace(0, 300, 31))
        ]
        np.testing.assert_allclose(energies, energies[0], rtol=1e-10)

    def test_rejects_density_input(self, params):
        """Test evolve_unitary needs a pure state"""
        with pytest.raises(ValueError):
            evolve_unitary(full_hamiltonian(params), basis_state("010", 3).to_density(), 1.0)

    def test_dimension_mismatch(self, params):
        """Test H and the state must agree in dimension"""
        with pytest.raises(InvalidDimensionError):
            evolve_unitary(full_hamiltonian(params), basis_state("01", 2), 1.0)


class TestCollapseChannels:
    """Tests for decoherence channels"""

    def test_device_channels(self, params):
        """Test relaxation and dephasing for each element"""
        channels = collapse_channels_from_coherence(params)
        labels = {c.label for c in channels}
        assert len(channels) == 6
        assert "relaxation_C" in labels
        assert "dephasing_Q1" in labels

    def test_rates(self):
        """Test 1/T1 and 1/T2 - 1/(2 T1)"""
        channels = collapse_channels_from_coherence(_uncoupled(t1_q1=100.0, t2_q1=150.0))
        rates = {c.label: c.rate for c in channels}
        assert rates["relaxation_Q1"] == pytest.approx(0.01)
        assert rates["dephasing_Q1"] == pytest.approx(1 / 150 - 1 / 200)

    def test_infinite_t1_omits_relaxation(self):
        """Test an infinite T1 leaves no relaxation channel"""
        channels = collapse_channels_from_coherence(_uncoupled(t1_q1=float("inf"), t2_q1=100.0))
        assert [c.label for c in channels] == ["dephasing_Q1"]

    def test_no_decoherence(self, params):
        """Test unset coherence times give no channels"""
        assert collapse_channels_from_coherence(params.without_decoherence()) == []

    def test_t2_limit(self):
        """Test T2 above 2 T1 is rejected"""
        with pytest.raises(ValueError):
            CircuitParams(t1_q1=100.0, t2_q1=300.0)

    def test_negative_rate(self):
        """Test channel rates must be non-negative"""
        with pytest.raises(ValueError):
            CollapseChannel(np.eye(2), -1.0)


class TestLindblad:
    """Tests for the master equation"""

    def test_relaxation(self):
        """Test excited-state population decays as exp(-t / T1)"""
        p = _uncoupled(t1_q1=100.0)
        H = full_hamiltonian(p)
        times = np.linspace(0, 200, 11)
        traj = evolve_lindblad(H, basis_state("100", 2).to_density(), collapse_channels_from_coherence(p), times)
        table = populations(traj, {"p100": projector(["100"], 2)}, times)
        np.testing.assert_allclose(table["p100"], np.exp(-times / 100.0), atol=1e-6)

    def test_dephasing(self):
        """Test coherence decays as exp(-t / T2) without relaxation"""
        p = _uncoupled(t2_q1=50.0)
        H = full_hamiltonian(p)
        psi = np.zeros(8, dtype=complex)
        psi[[0, 4]] = 1 / np.sqrt(2)
        times = np.linspace(0, 100, 6)
        traj = evolve_lindblad(H, QuantumState.pure(psi).to_density(), collapse_channels_from_coherence(p), times)
        coherence = np.array([abs(state.data[0, 4]) for state in traj])
        np.testing.assert_allclose(coherence, 0.5 * np.exp(-times / 50.0), atol=1e-5)

    def test_trace_preserved(self, params):
        """Test the trace stays one under every channel"""
        p = params.model_copy(update={"levels": 2})
        H = full_hamiltonian(p)
        traj = evolve_lindblad(
            H, basis_state("011", 2).to_density(), collapse_channels_from_coherence(p), np.linspace(0, 300, 7)
        )
        for state in traj:
            assert abs(np.trace(state.data).real - 1.0) < 1e-7

    def test_matches_unitary_without_channels(self, params):
        """Test the master equation reduces to Schrodinger evolution"""
        p = params.model_copy(update={"levels": 2})
        H = full_hamiltonian(p)
        psi0 = basis_state("010", 2)
        times = np.linspace(0, 60, 4)
        closed = evolve_unitary(H, psi0, times)
        opened = evolve_lindblad(H, psi0.to_density(), [], times)
        for a, b in zip(closed, opened):
            np.testing.assert_allclose(a.matrix(), b.data, atol=1e-5)

    def test_propagator_matches_integrator(self, params):
        """Test the exponential map agrees with Runge-Kutta integration"""
        p = params.model_copy(update={"levels": 2})
        H = full_hamiltonian(p).matrix
        channels = collapse_channels_from_coherence(p)
        rho0 = basis_state("110", 2).to_density()
        integrated = evolve_lindblad(H, rho0, channels, [0.0, 80.0])[-1].data
        propagator = LindbladPropagator(channels)
        mapped = propagator.apply_map(propagator.segment_map(H, 80.0), rho0.data)
        np.testing.assert_allclose(mapped, integrated, atol=1e-5)

    def test_rejects_pure_state(self, params):
        """Test evolve_lindblad needs a density matrix"""
        with pytest.raises(ValueError):
            evolve_lindblad(full_hamiltonian(params), basis_state("010", 3), [], [0.0, 1.0])

    def test_rejects_descending_grid(self, params):
        """Test the time grid must ascend"""
        with pytest.raises(ValueError):
            evolve_lindblad(full_hamiltonian(params), basis_state("010", 3).to_density(), [], [2.0, 1.0])

    def test_dephasing_channel_rate(self):
        """Test the dissipator of a dephasing channel carries twice its rate"""
        channel = dephasing_channel(2, "C", 0.1)
        assert channel.dissipator_rate == pytest.approx(0.2)
        L = liouvillian(np.zeros((8, 8)), [channel])
        # coherence between |000> and |001> in row-major vec
        k = 0 * 8 + 1
        assert L[k, k].real == pytest.approx(-0.1)


class TestPropagators:
    """Tests for the propagator classes"""

    def test_factory(self):
        """Test get_propagator picks the representation"""
        assert isinstance(get_propagator(False), UnitaryPropagator)
        assert isinstance(get_propagator(True, []), LindbladPropagator)

    def test_sampling_agrees(self, params):
        """Test both propagators give the same noiseless populations"""
        p = params.model_copy(update={"levels": 2})
        H = full_hamiltonian(p).matrix
        psi = basis_state("010", 2).data
        offsets = [0.0, 10.0, 20.0, 30.0]
        closed = UnitaryPropagator().sample(H, psi, offsets)
        opened = LindbladPropagator().sample(H, LindbladPropagator().native(psi), offsets)
        for a, b in zip(closed, opened):
            np.testing.assert_allclose(np.outer(a, a.conj()), b, atol=1e-9)


class TestReductions:
    """Tests for population tables and partial traces"""

    def test_populations_columns(self, params):
        """Test one column per projector plus time"""
        traj = [basis_state("010", 3)]
        table = populations(traj, [projector(["010"], 3), projector(["100"], 3)], [0.0])
        assert list(table.columns) == ["t_ns", "p0", "p1"]
        assert table["p0"].iloc[0] == pytest.approx(1.0)

    def test_reduce_to_qubits(self):
        """Test tracing out the coupler keeps the qubit populations"""
        rho = basis_state("011", 3).matrix()
        reduced = reduce_to_qubits(rho, 3)
        assert reduced.shape == (9, 9)
        assert reduced[1, 1].real == pytest.approx(1.0)
        assert np.trace(reduced).real == pytest.approx(1.0)
        assert basis_labels(3, 2)[1] == "01"
