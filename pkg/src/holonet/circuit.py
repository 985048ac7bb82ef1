"""Quantum-circuit descriptions and their exact execution on qudit registers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import SizeCapExceededError
from .models import check_unitary

MAX_AMPLITUDES = 2**20


class CircuitGate(NamedTuple):
    matrix: np.ndarray
    wires: tuple[int, ...]
    layer: int = 0


@dataclass
class CircuitDesc:
    """Gates on ``n_wires`` qudits of dimension ``d``.

    Every wire starts in a computational basis state (``ancillas`` lists the non-zero ones,
    the rest start in 0). ``outputs[k]`` is the wire holding site ``k`` at the end; every wire
    must be an output.
    """

    n_wires: int
    d: int = 2
    gates: list[CircuitGate] = field(default_factory=list)
    ancillas: list[tuple[int, int]] = field(default_factory=list)
    outputs: list[int] | None = None

    def check(self, tol: float = 1e-10) -> None:
        for g in self.gates:
            check_unitary(g.matrix, tol)
            if g.matrix.shape[0] != self.d ** len(g.wires):
                raise ValueError(f"gate on {g.wires} has wrong size {g.matrix.shape}")


def apply_gate(psi: np.ndarray, gate: np.ndarray, wires, n: int, d: int = 2) -> np.ndarray:
    """Apply a k-qudit matrix on arbitrary ``wires`` of an n-qudit vector (wire 0 most significant)."""
    wires = list(wires)
    k = len(wires)
    t = psi.reshape((d,) * n)
    g = gate.reshape((d,) * (2 * k))
    t = np.tensordot(g, t, axes=(list(range(k, 2 * k)), wires))
    t = np.moveaxis(t, list(range(k)), wires)
    return t.reshape(-1)


def execute(circ: CircuitDesc) -> np.ndarray:
    n, d = circ.n_wires, circ.d
    if d**n > MAX_AMPLITUDES:
        raise SizeCapExceededError(f"{d}^{n} amplitudes exceed cap")
    basis = [0] * n
    for w, s in circ.ancillas:
        basis[w] = s
    psi = np.zeros(d**n, dtype=complex)
    psi[np.ravel_multi_index(basis, (d,) * n)] = 1.0
    for g in circ.gates:
        psi = apply_gate(psi, g.matrix, g.wires, n, d)
    if circ.outputs is not None:
        if sorted(circ.outputs) != list(range(n)):
            raise ValueError("outputs must list every wire exactly once")
        psi = psi.reshape((d,) * n).transpose(circ.outputs).reshape(-1)
    return psi
