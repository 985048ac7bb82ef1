"""Analytic network constructions: MPS embeddings, permutation states and triangle circuits."""

from __future__ import annotations

import numpy as np

from .circuit import CircuitDesc
from .errors import (
    ChiInsufficientError,
    InvalidPermutationError,
    LayoutMismatchError,
    NotMatchgateError,
)
from .models import SWAP
from .mps import MPS, apply_two_site_gate_mps, canonicalize
from .network import HoloNet, bond_dims, build_layout, gate_wing_tensor, identity_wing_tensor
from .oracle import matchgate_residual, triangle_positions
from .tensor_core import svd_full


def _site(m: MPS, j: int) -> np.ndarray:
    """1-based site tensor, or a trivial (1, 1, 1) tensor beyond either end."""
    if 1 <= j <= m.L:
        return m.tensors[j - 1]
    return np.ones((1, 1, 1), dtype=complex)


def _folded_surface(m: MPS, s: int, height: int) -> list[np.ndarray]:
    rows = []
    x = _site(m, s - 1)
    t = np.einsum("xly,ypz,zrw->plrxw", x, _site(m, s), _site(m, s + 1))
    p, l, r, a1, a2 = t.shape
    rows.append(t.reshape(p, l, r, 1, a1 * a2))
    for h in range(2, height + 1):
        left, right = _site(m, s - h), _site(m, s + h)
        t = np.einsum("xly,zrw->lryzxw", left, right)
        l, r, y, z, x, w = t.shape
        rows.append(t.reshape(1, l, r, y * z, x * w))
    return rows


def _with_identity_wings(layout, surface: list[np.ndarray], center_row: int = 1) -> HoloNet:
    s = layout.surface_col
    tensors = {}
    for (h, c), shape in bond_dims(layout).items():
        if c != s:
            tensors[(h, c)] = identity_wing_tensor(shape, right=c > s)
    for h, t in enumerate(surface, start=1):
        tensors[(h, s)] = t
    return HoloNet(layout, tensors, center_row)


def embed_mps_folded(m: MPS, surface_col: int, chi: int | None = None) -> HoloNet:
    """Fold the chain around ``surface_col``: surface row ``h`` carries sites ``s-h`` and
    ``s+h`` and the two MPS bonds crossing that row are merged into one vertical bond."""
    L, s = m.L, surface_col
    layout = build_layout(L, s, 1)
    c = canonicalize(m, s - 1)
    rows = _folded_surface(c, s, layout.height(s))
    need = max([t.shape[4] for t in rows] + [1])
    chi = need if chi is None else chi
    if need > chi:
        raise ChiInsufficientError(f"embedding needs surface bond {need}, chi is {chi}")
    layout = build_layout(L, s, chi, m.d)
    return _with_identity_wings(layout, rows)


def embed_mps_boundary(m: MPS, chi: int | None = None) -> HoloNet:
    """Surface at column 1 holding the MPS, identity bulk."""
    return embed_mps_folded(m, 1, chi)


# --------------------------------------------------------------------------- permutations


def rainbow_permutation(L: int) -> list[int]:
    """1-based sigma sending pair ``m`` (positions 2m-1, 2m) to sites ``m`` and ``L-m+1``."""
    if L % 2:
        raise InvalidPermutationError("rainbow pairing needs even L")
    sigma = [0] * L
    for m in range(1, L // 2 + 1):
        sigma[2 * m - 2] = m
        sigma[2 * m - 1] = L - m + 1
    return sigma


def _check_sigma(sigma, L: int) -> list[int]:
    sigma = [int(x) for x in sigma]
    if sorted(sigma) != list(range(1, L + 1)):
        raise InvalidPermutationError(f"{sigma} is not a permutation of 1..{L}")
    if sigma[0] != 1:
        raise InvalidPermutationError("position 1 is pinned to site 1 (sigma(1) = 1)")
    return sigma


def pair_product_mps(pair_states) -> MPS:
    tensors = []
    for v in pair_states:
        v = np.asarray(v, dtype=complex).reshape(2, 2)
        u, sv, vh = svd_full(v)
        k = max(1, int(np.count_nonzero(sv > 1e-14 * sv[0])))
        tensors.append((u[:, :k] * sv[:k]).reshape(1, 2, k))
        tensors.append(vh[:k].reshape(k, 2, 1))
    return canonicalize(MPS(tensors, None, 2), 0)


def sorting_swaps(sigma: list[int]) -> list[tuple[int, int]]:
    """(layer, m) slots of the right-standard triangle that must hold a SWAP so that the wire
    starting at position k (1-based) ends on site sigma(k)."""
    L = len(sigma)
    cur = [x - 1 for x in sigma]  # destination of the wire now in slot j
    out = []
    for k in range(1, L - 1):
        j = cur.index(k)
        for m in range(j - 1, k - 1, -1):
            out.append((k, m))
            cur[m], cur[m + 1] = cur[m + 1], cur[m]
    return out


def permutation_network(L: int, sigma, pair_states, chi: int = 2) -> HoloNet:
    """Product of two-qubit states on consecutive positions, routed to sites ``sigma(k)`` by
    SWAPs in the bulk. Surface at column 1."""
    if L % 2:
        raise InvalidPermutationError("pairing needs even L")
    sigma = _check_sigma(sigma, L)
    if len(pair_states) != L // 2:
        raise InvalidPermutationError(f"need {L // 2} pair states, got {len(pair_states)}")
    net = embed_mps_boundary(pair_product_mps(pair_states), chi)
    return set_triangle_gates(net, {slot: SWAP for slot in sorting_swaps(sigma)})


def set_triangle_gates(net: HoloNet, gates: dict[tuple[int, int], np.ndarray]) -> HoloNet:
    """Place two-qubit gates at triangle slots ``(layer >= 1, m)`` of a surface-at-1 network."""
    if net.s != 1:
        raise LayoutMismatchError("triangle gates need the surface at column 1")
    out = net.copy()
    for (k, m), u in gates.items():
        if k < 1:
            raise LayoutMismatchError("layer 0 lives on the surface")
        key = (m + 1 - k, 1 + k)
        if key not in out.tensors:
            raise LayoutMismatchError(f"slot {(k, m)} outside the triangle")
        out.tensors[key] = gate_wing_tensor(u, out.tensors[key].shape, right=True)
    return out


# --------------------------------------------------------------------------- circuits


def embed_triangle_circuit(circ: CircuitDesc, chi: int = 2) -> HoloNet:
    """Network reproducing a right-standard triangle circuit applied to |0...0>.

    Layer 0 is contracted into the surface MPS; layer ``k`` fills wing column ``k + 1``.
    """
    L = circ.n_wires
    slots = triangle_positions(L)
    got = [(g.layer, min(g.wires)) for g in circ.gates]
    if got != slots or any(tuple(g.wires) != (min(g.wires), min(g.wires) + 1) for g in circ.gates):
        raise LayoutMismatchError("gates do not occupy the right-standard triangle in order")
    if circ.ancillas or circ.outputs is not None or circ.d != 2:
        raise LayoutMismatchError("expected qubits starting in |0...0> with identity output order")
    zero = np.zeros((1, 2, 1), dtype=complex)
    zero[0, 0, 0] = 1
    m = MPS([zero.copy() for _ in range(L)], L - 1, 2)
    for g in circ.gates:
        if g.layer != 0:
            continue
        i = g.wires[0]
        m = canonicalize(m, i)
        m, _ = apply_two_site_gate_mps(m, g.matrix, i)
    net = embed_mps_boundary(m, chi)
    return set_triangle_gates(net, {(g.layer, g.wires[0]): g.matrix for g in circ.gates if g.layer})


def embed_matchgate_circuit(circ: CircuitDesc) -> HoloNet:
    for g in circ.gates:
        res = matchgate_residual(g.matrix)
        if res > 1e-10:
            raise NotMatchgateError(f"gate on {g.wires} has matchgate residual {res:.2e}")
    return embed_triangle_circuit(circ, chi=2)
