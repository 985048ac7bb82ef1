"""Circuit export and file formats for networks and state vectors."""

from __future__ import annotations

import json
import struct
from math import prod
from pathlib import Path

import numpy as np

from .circuit import CircuitDesc, CircuitGate
from .errors import InvalidDimsError
from .network import (
    BELOW,
    LEFT,
    LEGS,
    P,
    RIGHT,
    HoloNet,
    NetLayout,
    _labels,
    move_center_vertical,
)
from .tensor_core import complete_unitary

FORMAT_VERSION = 1


def _n_wires(dim: int, d: int) -> int:
    k = 0
    while d**k < dim:
        k += 1
    return k


def _padded_isometry(t: np.ndarray, dom, cod, d: int) -> tuple[np.ndarray, np.ndarray]:
    """Zero-pad every leg to a power of ``d``. Returns the padded matrix restricted to the
    domain basis states that exist, and the padded indices of those states."""
    pads = [d ** _n_wires(t.shape[k], d) for k in range(5)]
    full = np.zeros(pads, dtype=complex)
    full[tuple(slice(0, n) for n in t.shape)] = t
    padded = full.transpose(list(cod) + list(dom)).reshape(prod(pads[k] for k in cod), -1)
    valid = np.zeros([pads[k] for k in dom], dtype=bool)
    valid[tuple(slice(0, t.shape[k]) for k in dom)] = True
    idx = np.flatnonzero(valid.reshape(-1)) if dom else np.array([0])
    return padded[:, idx], idx


def _complete(v: np.ndarray, cols: np.ndarray, dim: int) -> np.ndarray:
    """Unitary with ``v`` in columns ``cols``; the other columns are Gram-Schmidt completions of
    the matching basis vectors, so basis-aligned isometries extend to permutation-like gates."""
    u = np.zeros((dim, dim), dtype=complex)
    u[:, cols] = v
    rest = [j for j in range(dim) if j not in set(cols.tolist())]
    basis = v.copy()
    missing = []
    for j in rest:
        e = np.zeros(dim, dtype=complex)
        e[j] = 1
        e -= basis @ (basis.conj().T @ e)
        e -= basis @ (basis.conj().T @ e)
        nrm = np.linalg.norm(e)
        if nrm > 1e-6:
            u[:, j] = e / nrm
            basis = np.column_stack([basis, u[:, j]])
        else:
            missing.append(j)
    if missing:
        full = complete_unitary(basis)
        u[:, missing] = full[:, basis.shape[1] :]
    return u


def _output_order(h: int, c: int, s: int, dom) -> list[int]:
    # wing wires keep going straight: the inner input leaves downward, the upper one outward
    if c > s:
        return [P, BELOW, RIGHT]
    if c < s:
        return [P, BELOW, LEFT]
    return [k for k in range(5) if k not in dom]


def to_circuit(n: HoloNet) -> CircuitDesc:
    """Sequential circuit preparing the network state from |0...0>.

    The center is first moved to the top of the surface; every tensor then becomes a unitary
    whose inputs are its domain legs plus fresh ancillas, completed to a full basis.  Bonds of
    dimension D occupy ceil(log_d D) wires.
    """
    d = n.d
    n = move_center_vertical(n, n.layout.height(n.s))
    wires: dict[str, list[int]] = {}
    next_wire = 0
    gates = []
    for step, (h, c) in enumerate(n.layout.positions()):
        t = n.tensors[(h, c)]
        dom = n.domain_legs(h, c)
        cod = _output_order(h, c, n.s, dom)
        labels = _labels(h, c)
        ins = [w for k in dom for w in wires.pop(labels[k], [])]
        n_out = sum(_n_wires(t.shape[k], d) for k in cod)
        if n_out < len(ins):
            raise InvalidDimsError(f"tensor {(h, c)} has fewer output wires than input wires")
        anc = list(range(next_wire, next_wire + n_out - len(ins)))
        next_wire += len(anc)
        gw = ins + anc
        v, idx = _padded_isometry(t, dom, cod, d)
        cols = idx * d ** len(anc)
        u = _complete(v, cols, d**n_out)
        pos = 0
        for k in cod:
            m = _n_wires(t.shape[k], d)
            if m:
                wires[labels[k]] = gw[pos : pos + m]
            pos += m
        if gw:
            gates.append(CircuitGate(u, tuple(gw), step))
    outputs = [wires.pop(f"p{c}")[0] for c in range(1, n.L + 1)]
    if wires:
        raise InvalidDimsError(f"dangling wires {sorted(wires)}")
    return CircuitDesc(next_wire, d, gates, [], outputs)


# --------------------------------------------------------------------------- .hitns files


def save_network(n: HoloNet, path) -> None:
    blobs, entries, offset = [], [], 0
    for (h, c) in n.layout.positions():
        t = np.ascontiguousarray(n.tensors[(h, c)], dtype="<c16")
        raw = t.tobytes()
        entries.append(
            {
                "row": h,
                "col": c,
                "shape": list(t.shape),
                "domain": [LEGS[k] for k in n.domain_legs(h, c)],
                "offset": offset,
                "nbytes": len(raw),
            }
        )
        blobs.append(raw)
        offset += len(raw)
    lay = n.layout
    header = {
        "format": "hitns",
        "version": FORMAT_VERSION,
        "layout": {
            "L": lay.L,
            "surface_col": lay.surface_col,
            "chi": lay.chi,
            "d": lay.d,
            "column_heights": list(lay.column_heights),
        },
        "center_row": n.center_row,
        "legs": list(LEGS),
        "dtype": "complex128-le (re, im interleaved float64)",
        "tensors": entries,
    }
    head = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(struct.pack("<Q", len(head)))
        f.write(head)
        for raw in blobs:
            f.write(raw)


def load_network(path) -> HoloNet:
    data = Path(path).read_bytes()
    (n_head,) = struct.unpack("<Q", data[:8])
    header = json.loads(data[8 : 8 + n_head])
    if header.get("format") != "hitns" or header.get("version") != FORMAT_VERSION:
        raise ValueError("not a supported .hitns file")
    lay = header["layout"]
    layout = NetLayout(lay["L"], lay["surface_col"], lay["chi"], lay["d"], tuple(lay["column_heights"]))
    base = 8 + n_head
    tensors = {}
    for e in header["tensors"]:
        raw = data[base + e["offset"] : base + e["offset"] + e["nbytes"]]
        t = np.frombuffer(raw, dtype="<c16").reshape(e["shape"]).astype(complex)
        tensors[(e["row"], e["col"])] = t
    return HoloNet(layout, tensors, header["center_row"])


def save_statevector(psi: np.ndarray, path, d: int = 2) -> None:
    """Raw little-endian float64 (re, im) pairs plus a JSON sidecar ``<path>.json``."""
    psi = np.ascontiguousarray(psi, dtype="<c16")
    L = int(round(np.log(psi.size) / np.log(d)))
    Path(path).write_bytes(psi.tobytes())
    side = {"L": L, "d": d, "norm": float(np.linalg.norm(psi))}
    Path(str(path) + ".json").write_text(json.dumps(side))


def load_statevector(path) -> tuple[np.ndarray, dict]:
    side = json.loads(Path(str(path) + ".json").read_text())
    psi = np.frombuffer(Path(path).read_bytes(), dtype="<c16").astype(complex)
    if psi.size != side["d"] ** side["L"]:
        raise ValueError("state vector length does not match sidecar")
    return psi, side


def n_parameters(n: HoloNet) -> int:
    return sum(prod(t.shape) for t in n.tensors.values())
