import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from holonet.circuit import CircuitDesc, CircuitGate, execute
from holonet.errors import SizeCapExceededError, WrongKindError
from holonet.models import SX, SZ, Gate, GateSequence, ModelSpec
from holonet.oracle import (
    apply_gates_dense,
    basis_state,
    energy,
    evolve_exact,
    full_operator,
    ghz_state,
    haar_state,
    matchgate_residual,
    page_value,
    product_state,
    random_clifford_state,
    random_matchgate_state,
    renyi2_dense,
    renyi_n_dense,
    stabilizer_modulus_spread,
    tfim_hamiltonian,
    triangle_positions,
)
from holonet.tensor_core import haar_unitary, make_rng


def random_sequence(L, n, rng):
    return GateSequence([Gate(haar_unitary(4, rng), int(rng.integers(L - 1))) for _ in range(n)])


def test_identity_sequence_is_noop():
    rng = make_rng(0)
    psi = haar_state(5, rng)
    out = apply_gates_dense(psi, GateSequence([Gate(np.eye(4), b) for b in range(4)]))
    assert np.allclose(out, psi, atol=1e-14)


def test_x_on_site_zero():
    psi = basis_state([0, 0, 0])
    out = apply_gates_dense(psi, GateSequence([Gate(np.kron(SX, np.eye(2)), 0)]))
    assert np.allclose(out, basis_state([1, 0, 0]))


def test_matches_kronecker_oracle():
    rng = make_rng(1)
    L = 6
    gates = random_sequence(L, 15, rng)
    psi = haar_state(L, rng)
    out = apply_gates_dense(psi, gates)
    assert np.max(np.abs(out - full_operator(gates, L) @ psi)) < 1e-12
    assert abs(np.linalg.norm(out) - 1) < 1e-12


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31), a=st.complex_numbers(max_magnitude=3), b=st.complex_numbers(max_magnitude=3))
def test_linearity(seed, a, b):
    rng = make_rng(seed)
    L = 4
    gates = random_sequence(L, 5, rng)
    x, y = haar_state(L, rng), haar_state(L, rng)
    lhs = apply_gates_dense(a * x + b * y, gates)
    rhs = a * apply_gates_dense(x, gates) + b * apply_gates_dense(y, gates)
    assert np.allclose(lhs, rhs, atol=1e-11)


def test_cap_exceeded():
    with pytest.raises(SizeCapExceededError):
        apply_gates_dense(np.zeros(2**21, dtype=complex), GateSequence())


def test_evolve_zero_time():
    psi = haar_state(5, make_rng(2))
    assert np.allclose(evolve_exact(psi, ModelSpec("tfim", 5), 0.0), psi)


def test_tfim_without_field_is_phase_only():
    psi = product_state([1, 0], L=5)
    out = evolve_exact(psi, ModelSpec("tfim", 5, g=0.0), 1.7)
    assert np.allclose(np.abs(out) ** 2, np.abs(psi) ** 2)


def test_energy_conserved():
    spec = ModelSpec("tfim", 6, J=1.0, g=0.8)
    psi = haar_state(6, make_rng(3))
    e0 = energy(psi, spec)
    for t in (0.3, 1.0, 2.5):
        assert abs(energy(evolve_exact(psi, spec, t), spec) - e0) < 1e-10


def test_tfim_hamiltonian_matches_kron():
    L = 4
    h = np.zeros((16, 16), dtype=complex)
    for i in range(L - 1):
        h -= np.kron(np.kron(np.eye(2**i), np.kron(SZ, SZ)), np.eye(2 ** (L - i - 2)))
    for i in range(L):
        h -= 0.7 * np.kron(np.kron(np.eye(2**i), SX), np.eye(2 ** (L - i - 1)))
    assert np.allclose(tfim_hamiltonian(L, 1.0, 0.7), h)


def test_kic_period_composes():
    spec = ModelSpec("kic", 4, J=0.7, g=0.6, h=0.3)
    psi = haar_state(4, make_rng(4))
    assert np.allclose(evolve_exact(evolve_exact(psi, spec, 2), spec, 3), evolve_exact(psi, spec, 5))
    with pytest.raises(WrongKindError):
        evolve_exact(psi, spec, 1.5)


def test_renyi_product_and_ghz():
    assert abs(renyi2_dense(product_state([1, 1], L=6) / 8, 3)) < 1e-12
    assert abs(renyi2_dense(ghz_state(6), 2) - np.log(2)) < 1e-12
    assert abs(renyi_n_dense(ghz_state(6), 3, 0.5) - np.log(2)) < 1e-12
    assert abs(renyi_n_dense(ghz_state(6), 3, 1) - np.log(2)) < 1e-12


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31), cut=st.integers(1, 5))
def test_renyi_complement_symmetry(seed, cut):
    psi = haar_state(6, make_rng(seed))
    flipped = psi.reshape((2,) * 6).transpose(range(5, -1, -1)).reshape(-1)
    assert abs(renyi2_dense(psi, cut) - renyi2_dense(flipped, 6 - cut)) < 1e-10


def test_page_value_examples():
    assert page_value(4) == pytest.approx(np.log(2))
    assert page_value(10) == pytest.approx(2.77259, abs=1e-5)
    assert page_value(2) == 0


def test_haar_mean_near_page():
    rng = make_rng(5)
    vals = np.array([renyi2_dense(haar_state(10, rng), 5) for _ in range(128)])
    se = vals.std(ddof=1) / np.sqrt(len(vals))
    assert abs(vals.mean() - page_value(10)) < 3 * se


def test_matchgate_state_trivial():
    psi, _ = random_matchgate_state(5, make_rng(6), n_gates=0)
    assert np.allclose(psi, basis_state([0] * 5))


def test_matchgate_structure_and_parity():
    L = 6
    psi, circ = random_matchgate_state(L, make_rng(7))
    assert len(circ.gates) == L * (L - 1) // 2
    assert all(matchgate_residual(g.matrix) < 1e-12 for g in circ.gates)
    parity = np.array([(-1) ** bin(i).count("1") for i in range(2**L)])
    assert abs(np.vdot(psi, parity * psi) - 1) < 1e-10


def test_triangle_layout():
    assert triangle_positions(4) == [(0, 2), (0, 1), (0, 0), (1, 2), (1, 1), (2, 2)]


def test_clifford_trivial_and_h():
    assert np.allclose(random_clifford_state(4, make_rng(0), depth=0), basis_state([0] * 4))
    h = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    circ = CircuitDesc(4, gates=[CircuitGate(h, (0,))])
    expected = (basis_state([0] * 4) + basis_state([1, 0, 0, 0])) / np.sqrt(2)
    assert np.allclose(execute(circ), expected)


@pytest.mark.parametrize("seed", range(5))
def test_clifford_equal_modulus(seed):
    psi = random_clifford_state(8, make_rng(seed))
    assert stabilizer_modulus_spread(psi) < 1e-12
    assert abs(np.linalg.norm(psi) - 1) < 1e-12
