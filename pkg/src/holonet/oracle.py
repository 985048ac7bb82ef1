"""Exact state-vector references at desk scale.

State vectors are flat complex arrays of length ``d**L`` with site 0 the most significant
digit.  Everything in this module is brute force on purpose: it is the yardstick the tensor
network code is checked against.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .circuit import MAX_AMPLITUDES, CircuitDesc, CircuitGate, apply_gate, execute
from .errors import SizeCapExceededError, WrongKindError
from .models import ID2, SX, SZ, GateSequence, ModelSpec
from .tensor_core import haar_unitary


def _num_sites(psi: np.ndarray, d: int) -> int:
    L = int(round(np.log(psi.size) / np.log(d)))
    if d**L != psi.size:
        raise ValueError(f"length {psi.size} is not a power of {d}")
    return L


def product_state(local_states, L: int | None = None) -> np.ndarray:
    """Tensor product of local vectors; a single vector is repeated ``L`` times."""
    if L is not None:
        local_states = [local_states] * L
    psi = np.ones(1, dtype=complex)
    for v in local_states:
        psi = np.kron(psi, np.asarray(v, dtype=complex))
    return psi


def basis_state(bits, d: int = 2) -> np.ndarray:
    psi = np.zeros(d ** len(bits), dtype=complex)
    psi[np.ravel_multi_index(list(bits), (d,) * len(bits))] = 1.0
    return psi


def ghz_state(L: int) -> np.ndarray:
    psi = np.zeros(2**L, dtype=complex)
    psi[0] = psi[-1] = 1 / np.sqrt(2)
    return psi


def w_state(L: int) -> np.ndarray:
    psi = np.zeros(2**L, dtype=complex)
    for k in range(L):
        psi[1 << (L - 1 - k)] = 1 / np.sqrt(L)
    return psi


def haar_state(L: int, rng: np.random.Generator, d: int = 2) -> np.ndarray:
    z = rng.standard_normal(d**L) + 1j * rng.standard_normal(d**L)
    return z / np.linalg.norm(z)


# --------------------------------------------------------------------------- gates


def apply_gates_dense(psi: np.ndarray, gates: GateSequence, d: int = 2) -> np.ndarray:
    if psi.size > MAX_AMPLITUDES:
        raise SizeCapExceededError(f"{psi.size} amplitudes exceed cap {MAX_AMPLITUDES}")
    L = _num_sites(psi, d)
    for g in gates:
        psi = apply_gate(psi, g.matrix, (g.bond, g.bond + 1), L, d)
    return psi


def full_operator(gates: GateSequence, L: int, d: int = 2) -> np.ndarray:
    """Dense matrix of a gate sequence built from Kronecker products (reference for tests)."""
    total = np.eye(d**L, dtype=complex)
    for g in gates:
        op = np.kron(np.kron(np.eye(d**g.bond), g.matrix), np.eye(d ** (L - g.bond - 2)))
        total = op @ total
    return total


def local_operator(op: np.ndarray, site: int, L: int, d: int = 2) -> np.ndarray:
    k = int(round(np.log(op.shape[0]) / np.log(d)))
    return np.kron(np.kron(np.eye(d**site), op), np.eye(d ** (L - site - k)))


def expectation(psi: np.ndarray, op: np.ndarray, site: int, d: int = 2) -> complex:
    """<psi|O|psi>/<psi|psi> for an operator acting on sites starting at ``site``."""
    L = _num_sites(psi, d)
    k = int(round(np.log(op.shape[0]) / np.log(d)))
    phi = apply_gate(psi, op, tuple(range(site, site + k)), L, d)
    return complex(np.vdot(psi, phi) / np.vdot(psi, psi))


def mean_sigma_x(psi: np.ndarray) -> float:
    L = _num_sites(psi, 2)
    return float(np.mean([expectation(psi, SX, i).real for i in range(L)]))


# --------------------------------------------------------------------------- models


def _zz_diagonal(L: int) -> np.ndarray:
    idx = np.arange(2**L)
    spins = 1 - 2 * ((idx[:, None] >> (L - 1 - np.arange(L))[None, :]) & 1)
    return np.sum(spins[:, :-1] * spins[:, 1:], axis=1).astype(float)


def tfim_hamiltonian(L: int, J: float = 1.0, g: float = 1.0) -> np.ndarray:
    """``-J sum Z_i Z_{i+1} - g sum X_i`` with open boundaries."""
    if 2**L > 4096:
        raise SizeCapExceededError("dense Hamiltonian limited to L <= 12")
    h = np.diag(-J * _zz_diagonal(L)).astype(complex)
    idx = np.arange(2**L)
    for i in range(L):
        h[idx ^ (1 << (L - 1 - i)), idx] += -g
    return h


@lru_cache(maxsize=16)
def _tfim_eigh(L: int, J: float, g: float):
    return np.linalg.eigh(tfim_hamiltonian(L, J, g))


def kic_floquet_step(psi: np.ndarray, spec: ModelSpec) -> np.ndarray:
    """One kicked-Ising period: ``exp(-i H_K) exp(-i H_I)``."""
    L = spec.L
    psi = np.exp(-1j * spec.J * _zz_diagonal(L)) * psi
    kick = kick_matrix(spec.g, spec.h)
    for i in range(L):
        psi = apply_gate(psi, kick, (i,), L)
    return psi


def kick_matrix(g: float, h: float) -> np.ndarray:
    w, v = np.linalg.eigh(g * SX + h * SZ)
    return (v * np.exp(-1j * w)) @ v.conj().T


def evolve_exact(psi: np.ndarray, spec: ModelSpec, t: float) -> np.ndarray:
    if spec.kind == "tfim":
        w, v = _tfim_eigh(spec.L, float(spec.J), float(spec.g))
        return v @ (np.exp(-1j * w * t) * (v.conj().T @ psi))
    if spec.kind == "kic":
        n = int(round(t))
        if abs(t - n) > 1e-12 or n < 0:
            raise WrongKindError(f"kicked Ising evolves by whole periods, got t={t}")
        for _ in range(n):
            psi = kic_floquet_step(psi, spec)
        return psi
    raise WrongKindError(spec.kind)


def energy(psi: np.ndarray, spec: ModelSpec) -> float:
    h = tfim_hamiltonian(spec.L, spec.J, spec.g)
    return float(np.vdot(psi, h @ psi).real)


# --------------------------------------------------------------------------- entropies


def schmidt_probabilities(psi: np.ndarray, cut: int, d: int = 2) -> np.ndarray:
    L = _num_sites(psi, d)
    if not 1 <= cut <= L - 1:
        raise ValueError(f"cut must be in [1, {L - 1}]")
    s = np.linalg.svd(psi.reshape(d**cut, -1), compute_uv=False)
    p = s**2
    return p / p.sum()


def renyi_n_dense(psi: np.ndarray, cut: int, n: float, d: int = 2) -> float:
    p = schmidt_probabilities(psi, cut, d)
    p = p[p > 0]
    if n == 1:
        return float(-np.sum(p * np.log(p)))
    return float(np.log(np.sum(p**n)) / (1 - n))


def renyi2_dense(psi: np.ndarray, cut: int, d: int = 2) -> float:
    return float(-np.log(np.sum(schmidt_probabilities(psi, cut, d) ** 2)))


def page_value(L: int) -> float:
    """Typical half-chain Renyi-2 entropy of a Haar-random qubit state, ``(L/2 - 1) log 2``."""
    if L % 2:
        raise ValueError("page_value expects even L")
    return (L / 2 - 1) * np.log(2)


# --------------------------------------------------------------------------- random target states


def matchgate(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Two-qubit gate acting as ``a`` on span{|00>,|11>} and ``b`` on span{|01>,|10>}."""
    g = np.zeros((4, 4), dtype=complex)
    g[np.ix_([0, 3], [0, 3])] = a
    g[np.ix_([1, 2], [1, 2])] = b
    return g


def matchgate_residual(g: np.ndarray) -> float:
    """Deviation from matchgate form: off-block entries and determinant mismatch."""
    even, odd = [0, 3], [1, 2]
    off = max(np.max(np.abs(g[np.ix_(even, odd)])), np.max(np.abs(g[np.ix_(odd, even)])))
    det_gap = abs(np.linalg.det(g[np.ix_(even, even)]) - np.linalg.det(g[np.ix_(odd, odd)]))
    return float(max(off, det_gap))


def random_matchgate(rng: np.random.Generator) -> np.ndarray:
    a = haar_unitary(2, rng)
    b = haar_unitary(2, rng)
    b = b * np.sqrt(np.linalg.det(a) / np.linalg.det(b))
    return matchgate(a, b)


def triangle_positions(L: int) -> list[tuple[int, int]]:
    """(layer, m) pairs of the right-standard triangle, in execution order.

    Layer ``k`` is a descending staircase over qubit pairs ``(m, m+1)``, ``m = L-2 ... k``.
    """
    return [(k, m) for k in range(L - 1) for m in range(L - 2, k - 1, -1)]


def random_matchgate_state(
    L: int, rng: np.random.Generator, n_gates: int | None = None
) -> tuple[np.ndarray, CircuitDesc]:
    """Random fermionic Gaussian state from a right-standard triangle of matchgates on |0...0>.

    ``n_gates`` limits how many triangle slots (in execution order) get a random gate; the rest
    stay identity.
    """
    if L < 2:
        raise ValueError("L must be >= 2")
    circ = CircuitDesc(n_wires=L)
    for j, (k, m) in enumerate(triangle_positions(L)):
        u = random_matchgate(rng) if n_gates is None or j < n_gates else np.eye(4, dtype=complex)
        circ.gates.append(CircuitGate(u, (m, m + 1), k))
    return execute(circ), circ


_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_S = np.diag([1, 1j])
_CNOT = np.eye(4, dtype=complex)[[0, 1, 3, 2]]
_CNOT_REV = np.eye(4, dtype=complex)[[0, 3, 2, 1]]
CLIFFORD_PAIR_GATES = (
    _CNOT,
    _CNOT_REV,
    np.kron(_H, ID2),
    np.kron(ID2, _H),
    np.kron(_S, ID2),
    np.kron(ID2, _S),
)


def random_clifford_circuit(L: int, rng: np.random.Generator, depth: int | None = None) -> CircuitDesc:
    """Brickwork of ``depth`` layers (default ``7L``); every slot draws uniformly from
    {CNOT, reversed CNOT, H or S on either qubit}."""
    depth = 7 * L if depth is None else depth
    circ = CircuitDesc(n_wires=L)
    for layer in range(depth):
        for m in range(layer % 2, L - 1, 2):
            g = CLIFFORD_PAIR_GATES[rng.integers(len(CLIFFORD_PAIR_GATES))]
            circ.gates.append(CircuitGate(g, (m, m + 1), layer))
    return circ


def random_clifford_state(L: int, rng: np.random.Generator, depth: int | None = None) -> np.ndarray:
    if L < 2:
        raise ValueError("L must be >= 2")
    return execute(random_clifford_circuit(L, rng, depth))


def stabilizer_modulus_spread(psi: np.ndarray, tol: float = 1e-10) -> float:
    """Spread of |amplitude| over the support; zero for stabilizer states."""
    a = np.abs(psi)
    support = a[a > tol]
    return float(support.max() - support.min())


def tfim_local_term(J: float, g: float, w_left: float, w_right: float) -> np.ndarray:
    return -J * np.kron(SZ, SZ) - g * (w_left * np.kron(SX, ID2) + w_right * np.kron(ID2, SX))
