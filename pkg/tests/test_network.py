import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from holonet.circuit import CircuitDesc, CircuitGate, execute
from holonet.embed import (
    embed_matchgate_circuit,
    embed_mps_boundary,
    embed_mps_folded,
    embed_triangle_circuit,
    permutation_network,
    rainbow_permutation,
    sorting_swaps,
)
from holonet.errors import (
    ChiInsufficientError,
    IndexOutOfRangeError,
    InvalidPermutationError,
    InvalidSurfaceError,
    LayoutMismatchError,
    NotMatchgateError,
    SizeCapExceededError,
)
from holonet.export import load_network, load_statevector, save_network, save_statevector, to_circuit
from holonet.models import SZ
from holonet.mps import ghz_mps, mps_from_statevector, random_mps, w_mps
from holonet.mps import to_statevector as mps_vector
from holonet.network import (
    build_layout,
    expectation_two_site,
    move_center_vertical,
    random_network,
    renyi2_midpoint,
    to_statevector,
    validate,
)
from holonet.oracle import (
    basis_state,
    expectation,
    ghz_state,
    haar_state,
    random_matchgate,
    product_state,
    random_matchgate_state,
    renyi2_dense,
    triangle_positions,
    w_state,
)
from holonet.tensor_core import haar_unitary, make_rng


def random_hermitian(rng, n=4):
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return z + z.conj().T


# --------------------------------------------------------------------------- layout


def test_layout_smallest():
    lay = build_layout(2, 1, 2)
    assert lay.column_heights == (1, 1)


def test_layout_triangle():
    lay = build_layout(8, 1, 2)
    assert lay.column_heights == (7, 7, 6, 5, 4, 3, 2, 1)


def test_layout_two_wings():
    lay = build_layout(8, 4, 2)
    assert (lay.left_width, lay.right_width) == (3, 4)
    assert lay.column_heights == (1, 2, 3, 4, 4, 3, 2, 1)


@pytest.mark.parametrize("L,s", [(1, 1), (4, 0), (4, 5)])
def test_layout_invalid(L, s):
    with pytest.raises(InvalidSurfaceError):
        build_layout(L, s, 2)


# --------------------------------------------------------------------------- random networks


@pytest.mark.parametrize("L,s,chi", [(2, 1, 1), (5, 1, 1), (8, 1, 2), (8, 4, 2), (7, 7, 3), (6, 3, 8)])
def test_random_network_valid_and_normalized(L, s, chi):
    n = random_network(build_layout(L, s, chi), make_rng(L, [s, chi]))
    assert validate(n) == []
    assert abs(np.linalg.norm(to_statevector(n)) - 1) < 1e-10


def test_validate_flags_scaled_tensor():
    n = random_network(build_layout(6, 3, 2), make_rng(0))
    n.tensors[(2, 4)] = 2 * n.tensors[(2, 4)]
    report = validate(n)
    assert [v.where for v in report] == [(2, 4)]
    assert report[0].kind == "isometry"


def test_size_cap():
    n = random_network(build_layout(4, 1, 2), make_rng(0))
    with pytest.raises(SizeCapExceededError):
        to_statevector(n, cap=8)


# --------------------------------------------------------------------------- local contractions


def test_expectation_identity_and_product():
    n = random_network(build_layout(6, 3, 2), make_rng(1))
    assert abs(expectation_two_site(n, np.eye(4), 2) - 1) < 1e-12
    prod_net = embed_mps_boundary(mps_from_statevector(basis_state([0, 0])))
    assert abs(expectation_two_site(prod_net, np.kron(SZ, SZ), 0) - 1) < 1e-12


@pytest.mark.parametrize("L,s", [(8, 1), (8, 4), (8, 8), (10, 5), (6, 2)])
def test_expectation_matches_oracle(L, s):
    rng = make_rng(2, [L, s])
    n = random_network(build_layout(L, s, 4), rng)
    psi = to_statevector(n)
    for i in {s - 2, s - 1} & set(range(L - 1)):
        op = random_hermitian(rng)
        assert abs(expectation_two_site(n, op, i) - expectation(psi, op, i)) < 1e-10


def test_expectation_needs_surface():
    n = random_network(build_layout(6, 3, 2), make_rng(0))
    with pytest.raises(InvalidSurfaceError):
        expectation_two_site(n, np.eye(4), 4)


def test_renyi_product_is_zero():
    n = embed_mps_folded(mps_from_statevector(product_state([1, 1j], L=6) / 8), 3)
    assert abs(renyi2_midpoint(n)) < 1e-12


@pytest.mark.parametrize("L", [6, 7, 10])
@pytest.mark.parametrize("offset", [0, 1])
def test_renyi_matches_oracle(L, offset):
    n = random_network(build_layout(L, L // 2 + offset, 2), make_rng(3, [L, offset]))
    val = renyi2_midpoint(n)
    assert abs(val - renyi2_dense(to_statevector(n), L // 2)) < 1e-9
    assert val <= L // 2 * np.log(2) + 1e-9


def test_renyi_needs_midpoint():
    with pytest.raises(InvalidSurfaceError):
        renyi2_midpoint(random_network(build_layout(8, 2, 2), make_rng(0)))


# --------------------------------------------------------------------------- gauge moves


def test_move_center_identity():
    n = random_network(build_layout(6, 2, 2), make_rng(4))
    m = move_center_vertical(n, 1)
    assert all(np.array_equal(n.tensors[k], m.tensors[k]) for k in n.tensors)


def test_move_center_sweep_ghz():
    n = embed_mps_boundary(ghz_mps(6))
    psi = to_statevector(n)
    for row in (2, 5, 3, 1):
        n = move_center_vertical(n, row)
        assert validate(n) == []
        assert abs(np.vdot(psi, to_statevector(n)) - 1) < 1e-12


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**31), s=st.integers(1, 7), row=st.integers(1, 7))
def test_move_center_random(seed, s, row):
    n = random_network(build_layout(7, s, 3), make_rng(seed))
    row = min(row, n.layout.height(s))
    m = move_center_vertical(n, row)
    assert validate(m) == []
    assert abs(abs(np.vdot(to_statevector(n), to_statevector(m))) - 1) < 1e-11


def test_move_center_out_of_range():
    with pytest.raises(IndexOutOfRangeError):
        move_center_vertical(random_network(build_layout(4, 1, 2), make_rng(0)), 4)


# --------------------------------------------------------------------------- embeddings


def test_ghz_and_w_boundary():
    assert np.max(np.abs(to_statevector(embed_mps_boundary(ghz_mps(6), 2)) - ghz_state(6))) < 1e-12
    assert np.max(np.abs(to_statevector(embed_mps_boundary(w_mps(6), 2)) - w_state(6))) < 1e-12


def test_random_mps_boundary():
    m = random_mps(8, 3, make_rng(5))
    n = embed_mps_boundary(m, 3)
    assert validate(n) == []
    assert 1 - abs(np.vdot(mps_vector(m), to_statevector(n))) < 1e-12


def test_boundary_chi_insufficient():
    with pytest.raises(ChiInsufficientError):
        embed_mps_boundary(random_mps(8, 3, make_rng(5)), 2)


def test_folded_embeddings():
    assert embed_mps_folded(mps_from_statevector(basis_state([0] * 6)), 3).layout.chi == 1
    g = embed_mps_folded(ghz_mps(8), 4, 4)
    assert np.max(np.abs(to_statevector(g) - ghz_state(8))) < 1e-12
    m = random_mps(8, 2, make_rng(6))
    n = embed_mps_folded(m, 4, 4)
    assert validate(n) == []
    assert np.max(np.abs(to_statevector(n) - mps_vector(m))) < 1e-12
    with pytest.raises(ChiInsufficientError):
        embed_mps_folded(m, 4, 3)


# --------------------------------------------------------------------------- permutations


def test_rainbow_sigma():
    assert rainbow_permutation(6) == [1, 6, 2, 5, 3, 4]


def test_identity_permutation_product():
    zero = np.array([1, 0, 0, 0])
    n = permutation_network(6, list(range(1, 7)), [zero] * 3)
    assert sorting_swaps(list(range(1, 7))) == []
    assert np.allclose(to_statevector(n), basis_state([0] * 6))


def permuted_product(sigma, pairs):
    t = product_state(pairs).reshape((2,) * len(sigma))
    return t.transpose(np.argsort(np.array(sigma) - 1)).reshape(-1)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31), L=st.sampled_from([4, 6, 8]))
def test_permutation_matches_oracle(seed, L):
    rng = make_rng(seed)
    sigma = [1] + [int(x) for x in rng.permutation(np.arange(2, L + 1))]
    pairs = [haar_state(2, rng) for _ in range(L // 2)]
    n = permutation_network(L, sigma, pairs)
    assert validate(n) == []
    assert np.max(np.abs(to_statevector(n) - permuted_product(sigma, pairs))) < 1e-10


def test_rainbow_singlets_entropy():
    singlet = np.array([0, 1, -1, 0]) / np.sqrt(2)
    n = permutation_network(8, rainbow_permutation(8), [singlet] * 4, chi=4)
    assert abs(renyi2_dense(to_statevector(n), 4) - 4 * np.log(2)) < 1e-9


def test_rainbow_pair_entropy():
    pair = np.array([np.sqrt(0.2), np.sqrt(0.4), np.sqrt(0.4), 0])
    s_pair = renyi2_dense(pair, 1)
    n = permutation_network(10, rainbow_permutation(10), [pair] * 5, chi=4)
    assert abs(renyi2_dense(to_statevector(n), 5) - 5 * s_pair) < 1e-10


@pytest.mark.parametrize(
    "sigma", [[2, 1, 3, 4], [1, 2, 3], [1, 1, 2, 3], [1, 2, 3, 5]]
)
def test_invalid_permutation(sigma):
    with pytest.raises(InvalidPermutationError):
        permutation_network(4, sigma, [np.array([1, 0, 0, 0])] * 2)


# --------------------------------------------------------------------------- circuits


def triangle_circuit(L, gate_fn):
    circ = CircuitDesc(L)
    for k, m in triangle_positions(L):
        circ.gates.append(CircuitGate(gate_fn(k, m), (m, m + 1), k))
    return circ


def test_matchgate_identity():
    n = embed_matchgate_circuit(triangle_circuit(5, lambda k, m: np.eye(4)))
    assert np.allclose(to_statevector(n), basis_state([0] * 5))


def test_single_matchgate():
    g = random_matchgate(make_rng(7))
    circ = triangle_circuit(4, lambda k, m: g if (k, m) == (0, 0) else np.eye(4))
    n = embed_matchgate_circuit(circ)
    assert np.max(np.abs(to_statevector(n) - execute(circ))) < 1e-12


@pytest.mark.parametrize("seed", range(3))
def test_random_matchgate_triangle(seed):
    psi, circ = random_matchgate_state(6, make_rng(seed))
    n = embed_matchgate_circuit(circ)
    assert validate(n) == []
    assert 1 - abs(np.vdot(psi, to_statevector(n))) ** 2 < 1e-10


def test_matchgate_rejects():
    rng = make_rng(8)
    with pytest.raises(NotMatchgateError):
        embed_matchgate_circuit(triangle_circuit(4, lambda k, m: haar_unitary(4, rng)))
    circ = triangle_circuit(4, lambda k, m: np.eye(4))
    circ.gates.pop()
    with pytest.raises(LayoutMismatchError):
        embed_matchgate_circuit(circ)


def test_general_triangle_circuit():
    rng = make_rng(9)
    circ = triangle_circuit(6, lambda k, m: haar_unitary(4, rng))
    n = embed_triangle_circuit(circ, chi=2)
    assert np.max(np.abs(to_statevector(n) - execute(circ))) < 1e-12


def test_to_circuit_product_is_identity():
    n = embed_mps_boundary(mps_from_statevector(basis_state([0] * 4)))
    circ = to_circuit(n)
    assert all(np.allclose(g.matrix, np.eye(g.matrix.shape[0])) for g in circ.gates)


def test_to_circuit_ghz():
    circ = to_circuit(embed_mps_boundary(ghz_mps(5)))
    assert np.max(np.abs(execute(circ) - ghz_state(5))) < 1e-12


@pytest.mark.parametrize("s,chi", [(1, 2), (3, 2), (4, 3), (6, 4)])
def test_to_circuit_round_trip(s, chi):
    n = random_network(build_layout(6, s, chi), make_rng(10, [s, chi]))
    circ = to_circuit(n)
    circ.check()
    assert circ.n_wires == 6
    assert 1 - abs(np.vdot(to_statevector(n), execute(circ))) < 1e-10


# --------------------------------------------------------------------------- files


def test_network_file_round_trip(tmp_path):
    n = random_network(build_layout(7, 3, 4), make_rng(11))
    save_network(n, tmp_path / "net.hitns")
    m = load_network(tmp_path / "net.hitns")
    assert m.layout == n.layout and m.center_row == n.center_row
    assert all(np.array_equal(n.tensors[k], m.tensors[k]) for k in n.tensors)


def test_statevector_file_round_trip(tmp_path):
    psi = haar_state(5, make_rng(12))
    save_statevector(psi, tmp_path / "psi.bin")
    out, side = load_statevector(tmp_path / "psi.bin")
    assert np.array_equal(out, psi)
    assert side["L"] == 5 and side["d"] == 2
    assert (tmp_path / "psi.bin").stat().st_size == 16 * 32
