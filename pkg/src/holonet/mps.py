"""Matrix product states in isometric form.

Tensors are plain arrays with legs ``(left, phys, right)``; boundary bonds have dimension 1.
With ``center = c`` all tensors left of ``c`` are left-isometries (``(l, p) -> r``) and all
tensors right of ``c`` right-isometries (``(p, r) -> l``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CenterMisplacedError, IndexOutOfRangeError, InvalidDimsError, NotUnitaryError
from .tensor_core import (
    DenseTensor,
    TruncationSpec,
    haar_isometry,
    isometry_residual,
    qr_positive,
    svd_full,
    svd_truncated,
    truncation_rank,
)


@dataclass
class MPS:
    tensors: list[np.ndarray]
    center: int | None = None
    d: int = 2

    @property
    def L(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> list[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    def copy(self) -> MPS:
        return MPS([t.copy() for t in self.tensors], self.center, self.d)

    def norm(self) -> float:
        if self.center is not None:
            return float(np.linalg.norm(self.tensors[self.center]))
        return float(np.sqrt(abs(overlap_mps(self, self))))

    def isometry_residuals(self) -> list[float]:
        """Per-site deviation from the isometry condition implied by ``center`` (0 at the center)."""
        out = []
        for k, t in enumerate(self.tensors):
            l, p, r = t.shape
            if self.center is None or k == self.center:
                out.append(0.0)
            elif k < self.center:
                out.append(isometry_residual(t.reshape(l * p, r)))
            else:
                out.append(isometry_residual(t.reshape(l, p * r).T))
        return out


def _num_sites(n: int, d: int) -> int:
    L = int(round(np.log(n) / np.log(d))) if n > 1 else 0
    if L < 1 or d**L != n:
        raise InvalidDimsError(f"length {n} is not a power of {d}")
    return L


def decompose_statevector(
    psi: np.ndarray, d: int = 2, spec: TruncationSpec | None = None
) -> tuple[MPS, list[float]]:
    """Left-to-right SVD sweep. Returns the MPS (center at the last site) and the absolute
    weight discarded at every cut."""
    spec = spec or TruncationSpec()
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    L = _num_sites(psi.size, d)
    tensors, discarded = [], []
    rest = psi.reshape(1, -1)
    for _ in range(L - 1):
        chi_l = rest.shape[0]
        m = rest.reshape(chi_l * d, -1)
        u, s, vh = svd_full(m)
        k = min(truncation_rank(s, spec), s.size)
        discarded.append(float(np.sum(s[k:] ** 2)))
        tensors.append(u[:, :k].reshape(chi_l, d, k))
        rest = s[:k, None] * vh[:k]
    tensors.append(rest.reshape(rest.shape[0], d, 1))
    return MPS(tensors, L - 1, d), discarded


def mps_from_statevector(psi: np.ndarray, d: int = 2, spec: TruncationSpec | None = None) -> MPS:
    return decompose_statevector(psi, d, spec)[0]


def to_statevector(m: MPS) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for t in m.tensors:
        out = np.tensordot(out, t, axes=(1, 0)).reshape(-1, t.shape[2])
    return out[:, 0]


def _move_right(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    l, p, r = a.shape
    q, rr = qr_positive(a.reshape(l * p, r))
    return q.reshape(l, p, -1), np.tensordot(rr, b, axes=(1, 0))


def _move_left(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    l, p, r = b.shape
    q, rr = qr_positive(b.reshape(l, p * r).T)
    return np.tensordot(a, rr.T, axes=(2, 0)), q.T.reshape(-1, p, r)


def canonicalize(m: MPS, new_center: int) -> MPS:
    """Move the orthogonality center by QR sweeps; a center-less MPS is swept from both ends."""
    if not 0 <= new_center < m.L:
        raise IndexOutOfRangeError(f"center {new_center} outside [0, {m.L - 1}]")
    ts = [t.copy() for t in m.tensors]
    if m.center is None:
        lo, hi = 0, m.L - 1
    else:
        lo = hi = m.center
    for k in range(lo, new_center):
        ts[k], ts[k + 1] = _move_right(ts[k], ts[k + 1])
    for k in range(hi, new_center, -1):
        ts[k - 1], ts[k] = _move_left(ts[k - 1], ts[k])
    return MPS(ts, new_center, m.d)


def _gate_matrix(gate, d: int) -> np.ndarray:
    g = gate.data if isinstance(gate, DenseTensor) else np.asarray(gate)
    g = g.reshape(d * d, d * d)
    if np.max(np.abs(g.conj().T @ g - np.eye(d * d))) > 1e-10:
        raise NotUnitaryError("two-site gate is not unitary")
    return g


def apply_two_site_gate_mps(
    m: MPS, gate, i: int, spec: TruncationSpec | None = None
) -> tuple[MPS, float]:
    """Absorb a gate on sites ``(i, i+1)`` and re-truncate that bond. The center stays where it
    was (``i`` or ``i+1``)."""
    spec = spec or TruncationSpec()
    if not 0 <= i < m.L - 1:
        raise IndexOutOfRangeError(f"bond {i} outside [0, {m.L - 2}]")
    if m.center not in (i, i + 1):
        raise CenterMisplacedError(f"center {m.center} not adjacent to bond {i}")
    d = m.d
    g = _gate_matrix(gate, d)
    a, b = m.tensors[i], m.tensors[i + 1]
    chi_l, chi_r = a.shape[0], b.shape[2]
    theta = np.tensordot(a, b, axes=(2, 0))  # l p q r
    theta = np.einsum("xy,lyr->lxr", g, theta.reshape(chi_l, d * d, chi_r))
    u, s, vh, err = svd_truncated(theta.reshape(chi_l * d, d * chi_r), spec)
    k = s.size
    ts = list(m.tensors)
    if m.center == i:
        ts[i] = (u * s[None, :]).reshape(chi_l, d, k)
        ts[i + 1] = vh.reshape(k, d, chi_r)
    else:
        ts[i] = u.reshape(chi_l, d, k)
        ts[i + 1] = (s[:, None] * vh).reshape(k, d, chi_r)
    return MPS(ts, m.center, d), err


def schmidt_values(m: MPS, cut: int) -> np.ndarray:
    """Normalized Schmidt coefficients between sites ``[0, cut)`` and ``[cut, L)``."""
    if not 1 <= cut <= m.L - 1:
        raise IndexOutOfRangeError(f"cut must be in [1, {m.L - 1}]")
    c = canonicalize(m, cut - 1)
    t = c.tensors[cut - 1]
    s = np.linalg.svd(t.reshape(-1, t.shape[2]), compute_uv=False)
    return s / np.linalg.norm(s)


def renyi2_mps(m: MPS, cut: int) -> float:
    lam = schmidt_values(m, cut) ** 2
    return float(-np.log(np.sum(lam**2)))


def overlap_mps(a: MPS, b: MPS) -> complex:
    """<a|b>, contracted left to right."""
    if a.L != b.L:
        raise InvalidDimsError("length mismatch")
    env = np.ones((1, 1), dtype=complex)
    for x, y in zip(a.tensors, b.tensors):
        env = np.einsum("ab,apc,bpd->cd", env, x.conj(), y)
    return complex(env[0, 0])


def ghz_mps(L: int) -> MPS:
    if L < 2:
        raise InvalidDimsError("L must be >= 2")
    first = np.zeros((1, 2, 2), dtype=complex)
    first[0, 0, 0] = first[0, 1, 1] = 1 / np.sqrt(2)
    bulk = np.zeros((2, 2, 2), dtype=complex)
    bulk[0, 0, 0] = bulk[1, 1, 1] = 1
    last = np.zeros((2, 2, 1), dtype=complex)
    last[0, 0, 0] = last[1, 1, 0] = 1
    return MPS([first] + [bulk.copy() for _ in range(L - 2)] + [last], 0, 2)


def w_mps(L: int) -> MPS:
    """W state from explicit bond-2 tensors (bond index = whether the excitation was placed)."""
    if L < 2:
        raise InvalidDimsError("L must be >= 2")
    bulk = np.zeros((2, 2, 2), dtype=complex)
    bulk[0, 0, 0] = bulk[0, 1, 1] = bulk[1, 0, 1] = 1
    ts = [bulk[:1].copy()] + [bulk.copy() for _ in range(L - 2)] + [bulk[:, :, 1:].copy()]
    ts[0] = ts[0] / np.sqrt(L)
    return canonicalize(MPS(ts, None, 2), 0)


def random_mps(L: int, chi: int, rng: np.random.Generator, d: int = 2, center: int = 0) -> MPS:
    """Haar left-isometries with bond dims ``min(chi, d^k, d^(L-k))``, normalized, centered."""
    if L < 2:
        raise InvalidDimsError("L must be >= 2")
    bonds = [1] + [min(chi, d**k, d ** (L - k)) for k in range(1, L)] + [1]
    ts = []
    for k in range(L):
        l, r = bonds[k], bonds[k + 1]
        if k < L - 1:
            ts.append(haar_isometry(l * d, r, rng).reshape(l, d, r))
        else:
            v = rng.standard_normal(l * d) + 1j * rng.standard_normal(l * d)
            ts.append((v / np.linalg.norm(v)).reshape(l, d, 1))
    return canonicalize(MPS(ts, L - 1, d), center)


def _block_vector(ts: list[np.ndarray], left: bool) -> np.ndarray:
    # open-bond statevector of a canonical block: (phys, bond) for the left part, (bond, phys) for the right
    out = np.ones((1, 1), dtype=complex)
    if left:
        for t in ts:
            out = np.tensordot(out, t, axes=(1, 0)).reshape(-1, t.shape[2])
        return out
    for t in reversed(ts):
        out = np.tensordot(t, out, axes=(2, 0)).reshape(t.shape[0], -1)
    return out


def fit_mps_to_state(psi: np.ndarray, chi: int, sweeps: int = 20, tol: float = 1e-14) -> tuple[MPS, float]:
    """Best bond-``chi`` MPS approximation of ``psi`` by single-site sweeps started from the SVD truncation.

    Each site update sets the center tensor to its normalized environment, so the overlap
    ``|<psi|m>|`` never decreases. Returns the MPS and ``min_phase || m - psi ||^2``.
    """
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    psi = psi / np.linalg.norm(psi)
    m, _ = decompose_statevector(psi, spec=TruncationSpec(chi_max=chi))
    m = canonicalize(m, 0)
    L, d = m.L, m.d
    ts = m.tensors
    ts[0] = ts[0] / np.linalg.norm(ts[0])
    best = 0.0
    for _ in range(sweeps):
        order = list(range(L)) + list(range(L - 2, -1, -1))
        val = best
        for pos, k in enumerate(order[:-1]):
            lv = _block_vector(ts[:k], True)
            rv = _block_vector(ts[k + 1 :], False)
            ref = psi.reshape(lv.shape[0], d, rv.shape[1])
            env = np.einsum("xa,xpy,by->apb", lv.conj(), ref, rv.conj())
            val = float(np.linalg.norm(env))
            ts[k] = env / val
            nxt = order[pos + 1]
            if nxt > k:
                ts[k], ts[nxt] = _move_right(ts[k], ts[nxt])
            else:
                ts[nxt], ts[k] = _move_left(ts[nxt], ts[k])
        done = val - best < tol
        best = val
        if done:
            break
    return MPS(ts, 0, d), max(0.0, 2 - 2 * best)
