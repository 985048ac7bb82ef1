"""Dense complex tensors with named legs and the linear-algebra kernels built on them.

Everything here is a pure function. Tensors are treated as immutable values: no routine
writes into the ``data`` array of an argument.

Most of the package works directly on ``numpy`` arrays with a fixed leg order for speed;
the ``DenseTensor`` wrapper is used where legs are matched by name (network contraction,
public API).  The matrix-level kernels (``qr_positive``, ``svd_truncated`` ...) are shared by
both layers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import prod
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DecompositionFailedError,
    DimensionMismatchError,
    InvalidDimsError,
    LegNotFoundError,
    NotHermitianError,
    PartitionError,
)

DTYPE = np.complex128


# --------------------------------------------------------------------------- RNG


def make_rng(master_seed: int, stream: int | Sequence[int] = ()) -> np.random.Generator:
    """Counter-based Philox generator keyed by ``(master_seed, *stream)``.

    Child streams are independent of each other and of the order in which they are drawn,
    so ensembles give identical results no matter how realizations are scheduled.
    """
    if isinstance(stream, (int, np.integer)):
        stream = (int(stream),)
    seq = np.random.SeedSequence([int(master_seed), *[int(s) for s in stream]])
    return np.random.Generator(np.random.Philox(seq))


# --------------------------------------------------------------------------- types


@dataclass(frozen=True)
class TruncationSpec:
    """Bond-dimension cap and relative singular-value cutoff for lossy splits."""

    chi_max: int = 2**30
    sv_cutoff: float = 0.0
    renormalize: bool = False

    def __post_init__(self):
        if self.chi_max < 1:
            raise ValueError("chi_max must be >= 1")
        if not 0.0 <= self.sv_cutoff < 1.0:
            raise ValueError("sv_cutoff must lie in [0, 1)")


@dataclass(frozen=True)
class DenseTensor:
    legs: tuple[str, ...]
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        legs = tuple(self.legs)
        data = np.asarray(self.data, dtype=DTYPE)
        if len(set(legs)) != len(legs):
            raise ValueError(f"duplicate leg names in {legs}")
        if data.ndim != len(legs):
            raise DimensionMismatchError(f"{len(legs)} legs but data has rank {data.ndim}")
        object.__setattr__(self, "legs", legs)
        object.__setattr__(self, "data", data)

    @property
    def dims(self) -> tuple[int, ...]:
        return self.data.shape

    def dim(self, leg: str) -> int:
        return self.data.shape[self.axis(leg)]

    def axis(self, leg: str) -> int:
        try:
            return self.legs.index(leg)
        except ValueError:
            raise LegNotFoundError(f"leg {leg!r} not in {self.legs}") from None

    def transpose(self, order: Sequence[str]) -> DenseTensor:
        order = tuple(order)
        if sorted(order) != sorted(self.legs):
            raise PartitionError(f"{order} is not a permutation of {self.legs}")
        return DenseTensor(order, self.data.transpose([self.axis(x) for x in order]))

    def conj(self) -> DenseTensor:
        return DenseTensor(self.legs, self.data.conj())

    def rename(self, mapping: dict[str, str]) -> DenseTensor:
        return DenseTensor(tuple(mapping.get(x, x) for x in self.legs), self.data)

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))

    def matrix(self, row_legs: Sequence[str], col_legs: Sequence[str]) -> np.ndarray:
        """Reshape into a matrix with grouped row and column legs (row-major)."""
        _check_partition(self.legs, [row_legs, col_legs])
        t = self.transpose(list(row_legs) + list(col_legs))
        rows = prod(self.dim(x) for x in row_legs)
        return t.data.reshape(rows, -1)


@dataclass(frozen=True)
class DecompositionResult:
    factors: list
    truncation_error: float
    retained_dim: int
    singular_values: np.ndarray | None = None


# --------------------------------------------------------------------------- contraction


def contract(a: DenseTensor, b: DenseTensor, pairs: Iterable[tuple[str, str]]) -> DenseTensor:
    """Sum over the paired legs; the result keeps the free legs of ``a`` then ``b``."""
    pairs = list(pairs)
    ax_a = [a.axis(x) for x, _ in pairs]
    ax_b = [b.axis(y) for _, y in pairs]
    for (x, y), i, j in zip(pairs, ax_a, ax_b):
        if a.dims[i] != b.dims[j]:
            raise DimensionMismatchError(f"leg {x} ({a.dims[i]}) vs {y} ({b.dims[j]})")
    free_a = [x for k, x in enumerate(a.legs) if k not in ax_a]
    free_b = [y for k, y in enumerate(b.legs) if k not in ax_b]
    if set(free_a) & set(free_b):
        raise ValueError(f"free legs collide: {set(free_a) & set(free_b)}")
    data = np.tensordot(a.data, b.data, axes=(ax_a, ax_b))
    return DenseTensor(tuple(free_a + free_b), data)


def contract_shared(a: DenseTensor, b: DenseTensor) -> DenseTensor:
    """Contract every leg name that appears in both tensors."""
    shared = [x for x in a.legs if x in b.legs]
    return contract(a, b, [(x, x) for x in shared])


def _check_partition(legs: Sequence[str], groups: Sequence[Sequence[str]]):
    flat = [x for g in groups for x in g]
    if sorted(flat) != sorted(legs):
        raise PartitionError(f"groups {groups} do not partition legs {tuple(legs)}")


def group_legs(t: DenseTensor, groups: Sequence[Sequence[str]]) -> DenseTensor:
    """Fuse each group of legs into one leg named ``"a*b*..."``, in group order."""
    _check_partition(t.legs, groups)
    order = [x for g in groups for x in g]
    dims = [prod(t.dim(x) for x in g) for g in groups]
    data = t.transpose(order).data.reshape(dims)
    return DenseTensor(tuple("*".join(g) for g in groups), data)


def split_leg(t: DenseTensor, leg: str, parts: Sequence[tuple[str, int]]) -> DenseTensor:
    """Inverse of ``group_legs`` for one fused leg; ``parts`` lists (name, dim) in order."""
    k = t.axis(leg)
    if prod(d for _, d in parts) != t.dims[k]:
        raise DimensionMismatchError(f"cannot split leg of dim {t.dims[k]} into {parts}")
    shape = t.dims[:k] + tuple(d for _, d in parts) + t.dims[k + 1 :]
    legs = t.legs[:k] + tuple(n for n, _ in parts) + t.legs[k + 1 :]
    return DenseTensor(legs, t.data.reshape(shape))


# --------------------------------------------------------------------------- matrix kernels


def qr_positive(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Reduced QR with a real nonnegative diagonal of R."""
    try:
        q, r = np.linalg.qr(m)
    except np.linalg.LinAlgError as exc:
        raise DecompositionFailedError(str(exc)) from exc
    diag = np.diagonal(r)
    phase = np.ones(diag.shape, dtype=DTYPE)
    nz = np.abs(diag) > 0
    phase[nz] = diag[nz] / np.abs(diag[nz])
    return q * phase[None, :], phase.conj()[:, None] * r


def _fix_svd_gauge(u: np.ndarray, vh: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # largest-magnitude entry of every left singular vector made real positive
    idx = np.argmax(np.abs(u), axis=0)
    piv = u[idx, np.arange(u.shape[1])]
    phase = np.where(np.abs(piv) > 0, piv / np.where(np.abs(piv) > 0, np.abs(piv), 1), 1)
    return u * phase.conj()[None, :], vh * phase[:, None]


def svd_full(m: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    try:
        u, s, vh = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError:
        try:
            import scipy.linalg

            u, s, vh = scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesvd")
        except Exception as exc:  # pragma: no cover - backend failure
            raise DecompositionFailedError(str(exc)) from exc
    u, vh = _fix_svd_gauge(u, vh)
    return u, s, vh


def truncation_rank(s: np.ndarray, spec: TruncationSpec) -> int:
    """Number of singular values kept; degenerate clusters are not split by the cutoff."""
    n = int(np.count_nonzero(s > 0)) if s.size else 0
    if n == 0:
        return 1
    keep = n
    if spec.sv_cutoff > 0:
        keep = int(np.count_nonzero(s[:n] >= spec.sv_cutoff * s[0]))
        keep = max(keep, 1)
        while keep < n and (s[keep - 1] - s[keep]) <= 1e-12 * s[keep - 1]:
            keep += 1
    return max(1, min(keep, spec.chi_max))


def svd_truncated(
    m: np.ndarray, spec: TruncationSpec
) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    """Truncated SVD of a matrix. Returns ``U, s, Vh, truncation_error``."""
    u, s, vh = svd_full(m)
    k = truncation_rank(s, spec)
    total = float(np.sum(s**2))
    err = float(np.sqrt(max(np.sum(s[k:] ** 2), 0.0) / total)) if total > 0 else 0.0
    u, s, vh = u[:, :k], s[:k], vh[:k]
    if spec.renormalize and total > 0:
        s = s / np.linalg.norm(s)
    return u, s, vh, err


def isometry_residual(w: np.ndarray) -> float:
    """max-norm of ``W^dagger W - 1`` for a tall matrix."""
    m = w.shape[1]
    return float(np.max(np.abs(w.conj().T @ w - np.eye(m)))) if m else 0.0


def haar_isometry(n: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """n x m matrix with Haar-distributed orthonormal columns."""
    if n < m or m < 1:
        raise InvalidDimsError(f"need n >= m >= 1, got ({n}, {m})")
    z = (rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))) / np.sqrt(2)
    q, _ = qr_positive(z)
    return q


def haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    return haar_isometry(n, n, rng)


def polar_unitary(e: np.ndarray) -> np.ndarray:
    """The isometry ``U V^dagger`` maximising ``Re Tr(W^dagger E)``."""
    u, _, vh = svd_full(e)
    return u @ vh


def complete_unitary(v: np.ndarray) -> np.ndarray:
    """Extend an n x m isometry to an n x n unitary whose first m columns are ``v``."""
    n, m = v.shape
    if m == n:
        return v.copy()
    proj = np.eye(n, dtype=DTYPE) - v @ v.conj().T
    u, s, _ = np.linalg.svd(proj)
    return np.hstack([v, u[:, : n - m]])


# --------------------------------------------------------------------------- tensor-level ops


def qr_decompose(
    t: DenseTensor, row_legs: Sequence[str], col_legs: Sequence[str], bond: str = "bond"
) -> tuple[DenseTensor, DenseTensor]:
    m = t.matrix(row_legs, col_legs)
    q, r = qr_positive(m)
    k = q.shape[1]
    qt = DenseTensor(tuple(row_legs) + (bond,), q.reshape([t.dim(x) for x in row_legs] + [k]))
    rt = DenseTensor((bond,) + tuple(col_legs), r.reshape([k] + [t.dim(x) for x in col_legs]))
    return qt, rt


def svd_truncate(
    t: DenseTensor,
    row_legs: Sequence[str],
    col_legs: Sequence[str],
    spec: TruncationSpec,
    bond: str = "bond",
) -> DecompositionResult:
    """Truncated SVD of the (row_legs | col_legs) matricization.

    Factors are ``U`` (row_legs + [bond]), ``S`` (bond, bond') diagonal, ``V`` (bond' + col_legs).
    """
    m = t.matrix(row_legs, col_legs)
    u, s, vh, err = svd_truncated(m, spec)
    k = s.size
    b2 = bond + "'"
    ut = DenseTensor(tuple(row_legs) + (bond,), u.reshape([t.dim(x) for x in row_legs] + [k]))
    st = DenseTensor((bond, b2), np.diag(s).astype(DTYPE))
    vt = DenseTensor((b2,) + tuple(col_legs), vh.reshape([k] + [t.dim(x) for x in col_legs]))
    return DecompositionResult([ut, st, vt], err, k, s)


def is_isometry(t: DenseTensor, out_legs: Sequence[str], tol: float = 1e-10) -> bool:
    """True iff ``t`` maps ``out_legs`` (domain) isometrically into the remaining legs."""
    out_legs = list(out_legs)
    for x in out_legs:
        t.axis(x)
    in_legs = [x for x in t.legs if x not in out_legs]
    n_out = prod(t.dim(x) for x in out_legs)
    n_in = prod(t.dim(x) for x in in_legs)
    if n_out > n_in:
        raise InvalidDimsError(f"domain dim {n_out} exceeds codomain dim {n_in}")
    return isometry_residual(t.matrix(in_legs, out_legs)) <= tol


def random_isometry(in_dim: int, out_dim: int, rng: np.random.Generator) -> DenseTensor:
    """Haar isometry from an ``out_dim`` space into an ``in_dim`` space.

    Legs are ``("in", "out")``; ``is_isometry(t, ["out"])`` holds by construction.
    """
    return DenseTensor(("in", "out"), haar_isometry(in_dim, out_dim, rng))


def _square(h) -> np.ndarray:
    if isinstance(h, DenseTensor):
        k = len(h.legs)
        if k % 2:
            raise InvalidDimsError("operator tensor needs an even number of legs")
        rows = prod(h.dims[: k // 2])
        return h.data.reshape(rows, -1)
    return np.asarray(h, dtype=DTYPE)


def expm_hermitian_i(h, scale: float):
    """``exp(-i * scale * H)`` for Hermitian ``H`` via eigendecomposition.

    Accepts a square matrix or a DenseTensor whose first half of legs are outputs; the result
    has the same type and shape as the input.
    """
    m = _square(h)
    if m.shape[0] != m.shape[1]:
        raise InvalidDimsError(f"operator is not square: {m.shape}")
    if np.max(np.abs(m - m.conj().T), initial=0.0) > 1e-10:
        raise NotHermitianError("operator is not Hermitian within 1e-10")
    herm = 0.5 * (m + m.conj().T)
    w, v = np.linalg.eigh(herm)
    out = (v * np.exp(-1j * scale * w)[None, :]) @ v.conj().T
    if isinstance(h, DenseTensor):
        return DenseTensor(h.legs, out.reshape(h.dims))
    return out
