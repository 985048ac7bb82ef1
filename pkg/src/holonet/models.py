"""Model specifications and gate sequences shared by the oracle, MPS and network evolution.

Sites and bonds here are 0-based: gate ``(U, i)`` acts on sites ``i`` and ``i + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

from .errors import NotUnitaryError


@dataclass(frozen=True)
class ModelSpec:
    kind: str  # "tfim" | "kic"
    L: int
    J: float = 1.0
    g: float = 1.0
    h: float = 0.0
    boundary: str = "open"

    def __post_init__(self):
        if self.kind not in ("tfim", "kic"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.L < 2:
            raise ValueError("L must be >= 2")
        if self.boundary != "open":
            raise ValueError("only open boundaries are supported")


class Gate(NamedTuple):
    matrix: np.ndarray
    bond: int
    tag: str = ""


@dataclass
class GateSequence:
    gates: list[Gate] = field(default_factory=list)

    def __post_init__(self):
        for g in self.gates:
            check_unitary(g.matrix)

    def __iter__(self) -> Iterator[Gate]:
        return iter(self.gates)

    def __len__(self) -> int:
        return len(self.gates)

    def __add__(self, other: GateSequence) -> GateSequence:
        return GateSequence(list(self.gates) + list(other.gates))


def check_unitary(u: np.ndarray, tol: float = 1e-10) -> None:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise NotUnitaryError(f"gate must be square, got {u.shape}")
    if np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) > tol:
        raise NotUnitaryError("gate is not unitary within tolerance")


SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
ID2 = np.eye(2, dtype=complex)
SWAP = np.eye(4, dtype=complex)[[0, 2, 1, 3]]
