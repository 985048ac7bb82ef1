"""Moses move: tripartite splitting of the surface and a one-column shift of the surface.

Shifting right, the surface column is unzipped bottom to top.  At every row the tensor
``T(l, b, a, r, alpha)`` is split as ``A B C``: ``A`` stays behind as a left-wing tensor, ``B``
carries the orthogonality center up to the next row, and ``C`` is merged into the old wing
column on the right, which becomes the new surface.  Shifting left is the mirror image.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import prod

import numpy as np

from .errors import AtBoundaryError, InvalidDimsError, LayoutMismatchError, ZeroTensorError
from .manifold import STIEFEL, ManifoldPoint, OptOptions, procrustes_update, riemannian_cg, sphere_update
from .network import (
    BELOW,
    MAX_AMPLITUDES,
    HoloNet,
    NetLayout,
    as_isometry_matrix,
    from_isometry_matrix,
    move_center_vertical,
    to_statevector,
)
from .tensor_core import DenseTensor, TruncationSpec, haar_unitary, make_rng, svd_full, truncation_rank

REFINE_SWEEPS = 200
REFINE_FTOL = 1e-12


def _data(t) -> np.ndarray:
    return np.asarray(getattr(t, "data", t), dtype=complex)


def _matrix(t: np.ndarray, part) -> np.ndarray:
    part = list(part)
    rest = [k for k in range(t.ndim) if k not in part]
    return t.transpose(part + rest).reshape(prod(t.shape[k] for k in part), -1)


def _s_half(s: np.ndarray) -> float:
    n = np.sum(s**2)
    if n <= 0:
        raise ZeroTensorError("tensor vanishes")
    return float(2 * np.log(np.sum(s) / np.sqrt(n)))


def renyi_half(theta, bipartition) -> float:
    """``S_1/2 = 2 log sum_i sqrt(lambda_i)`` of the bipartition ``bipartition | rest``."""
    t = _data(theta)
    return _s_half(np.linalg.svd(_matrix(t, bipartition), compute_uv=False))


# --------------------------------------------------------------------------- disentangler


@dataclass
class DisentangleOptions:
    max_iter: int = 150
    gtol: float = 1e-10
    patience: int = 20
    random_inits: int = 2
    eps: float = 1e-12
    seed: int = 0


def _rotate(u: np.ndarray, theta: np.ndarray) -> np.ndarray:
    sh = theta.shape
    return (u @ theta.reshape(sh[0] * sh[1], -1)).reshape(sh)


def optimize_disentangler(theta, bipartition, opts: DisentangleOptions | None = None):
    """Unitary ``U`` on the combined first two axes of ``theta`` minimizing the Renyi-1/2
    entropy of ``bipartition | rest``.  Identity is always a candidate, so the result is never
    worse than the input.  Returns ``(U, U theta, S_1/2)``.

    Each start runs Riemannian CG on the smoothed cost ``2 log sum sqrt(lambda + eps)`` with
    ``eps`` lowered stage by stage down to ``opts.eps``; candidates are ranked by the exact value.
    """
    opts = opts or DisentangleOptions()
    t = _data(theta)
    part = list(bipartition)
    rest = [k for k in range(t.ndim) if k not in part]
    inv = np.argsort(part + rest)
    n = t.shape[0] * t.shape[1]
    flat = t.reshape(n, -1)
    total = float(np.sum(np.abs(t) ** 2))
    if total == 0:
        raise ZeroTensorError("tensor vanishes")

    def value(u):
        return renyi_half(_rotate(u, t), part)

    def stage(eps):
        def cost(x):
            sv = np.linalg.svd(_matrix(_rotate(x.blocks[0], t), part), compute_uv=False)
            return float(2 * np.log(np.sum(np.sqrt(sv**2 / total + eps))))

        def grad(x):
            w, sv, vh = np.linalg.svd(_matrix(_rotate(x.blocks[0], t), part), full_matrices=False)
            root = np.sqrt(sv**2 / total + eps)
            c = 2 * sv / (total * root * np.sum(root))
            q = ((w * c) @ vh).reshape([t.shape[k] for k in part + rest]).transpose(inv).reshape(n, -1)
            return [q @ flat.conj().T]

        return cost, grad

    best_u = np.eye(n, dtype=complex)
    best = value(best_u)
    if n == 1:
        return best_u, t.copy(), best
    rng = make_rng(opts.seed, 7)
    starts = [np.eye(n, dtype=complex)] + [haar_unitary(n, rng) for _ in range(opts.random_inits)]
    eps_list = [e for e in (1e-2, 1e-4, 1e-6, 1e-8, 1e-10) if e > opts.eps] + [opts.eps]
    cg = OptOptions(max_iter=opts.max_iter, gtol=opts.gtol, patience=opts.patience)
    for u0 in starts:
        x = ManifoldPoint([u0], [STIEFEL])
        for eps in eps_list:
            x, _ = riemannian_cg(*stage(eps), x, cg)
        v = value(x.blocks[0])
        if v < best - 1e-14:
            best, best_u = v, x.blocks[0]
    return best_u, _rotate(best_u, t), best


# --------------------------------------------------------------------------- tripartite split


@dataclass
class TripartiteResult:
    A: DenseTensor
    B: DenseTensor
    C: DenseTensor
    truncation_error: float
    disentangler: np.ndarray
    renyi_half_final: float


def _split_beta(beta: int, d: int) -> tuple[int, int]:
    if beta == d * d:
        return d, d
    return 1, beta


def tripartite_decompose(T, chi: int, opts: DisentangleOptions | None = None, d: int = 2) -> TripartiteResult:
    """Split ``T(l, b, a, r, alpha)`` into ``A(l, b, bu, br) B(bu, a, g) C(g, br, r, alpha)``.

    ``A`` is an isometry from ``(bu, br)``; ``C`` is an isometry from ``g``; ``B`` holds the
    norm.  The ``g`` bond is truncated to ``chi``; the error is the discarded weight relative to
    ``||T||^2``.
    """
    t = _data(T)
    if t.ndim != 5:
        raise InvalidDimsError(f"expected legs (l, b, a, r, alpha), got {t.ndim} legs")
    l, b, a, r, al = t.shape
    if any(x not in (1, d) for x in (l, b, r)) or a > chi or al > chi:
        raise InvalidDimsError(f"unexpected leg dims {t.shape} for d={d}, chi={chi}")
    q, rr = np.linalg.qr(t.reshape(l * b, -1), mode="complete")
    bu, br = _split_beta(l * b, d)
    theta = rr.reshape(bu, br, a, r, al)
    if bu * br > 1:
        u, theta, _ = optimize_disentangler(theta, (0, 2), opts)
    else:
        u = np.eye(1, dtype=complex)
    A = (q @ u.conj().T).reshape(l, b, bu, br)
    m = _matrix(theta, (0, 2))
    w, s, vh = svd_full(m)
    k = truncation_rank(s, TruncationSpec(chi_max=chi, sv_cutoff=1e-14))
    total = float(np.sum(s**2))
    err = float(np.sum(s[k:] ** 2) / total) if total > 0 else 0.0
    B = (w[:, :k] * s[:k]).reshape(bu, a, k)
    C = vh[:k].reshape(k, br, r, al)
    sh = _s_half(s) if total > 0 else 0.0
    return TripartiteResult(
        DenseTensor(("l", "b", "bu", "br"), A),
        DenseTensor(("bu", "a", "g"), B),
        DenseTensor(("g", "br", "r", "alpha"), C),
        err,
        u,
        sh,
    )


# --------------------------------------------------------------------------- surface shift


@dataclass
class ShiftReport:
    row_errors: list[float]
    vertical_errors: list[float]
    fidelity_estimate: float | None
    refinement_sweeps: int = 0
    refinement_history: list[float] = field(default_factory=list, repr=False)


def mirror(n: HoloNet) -> HoloNet:
    """Left-right reflection: column ``c`` goes to ``L + 1 - c`` and ``l``/``r`` legs swap."""
    lay = n.layout
    L = lay.L
    layout = NetLayout(L, L + 1 - lay.surface_col, lay.chi, lay.d, tuple(reversed(lay.column_heights)))
    tensors = {(h, L + 1 - c): t.transpose(0, 2, 1, 3, 4).copy() for (h, c), t in n.tensors.items()}
    return HoloNet(layout, tensors, n.center_row, dict(n.meta))


def _left_wing_tensor(a: np.ndarray, bottom: bool) -> np.ndarray:
    # a: (l, b, bu, br) -> (p, l, r, b, a) with b the physical leg on row 1
    if bottom:
        return a.transpose(1, 0, 3, 2)[:, :, :, None, :]
    return a.transpose(0, 3, 1, 2)[None]


def _unzip(net: HoloNet, opts: DisentangleOptions | None):
    """Split the surface column (center on row 1) into a left-wing column and a C column."""
    s, chi, d = net.s, net.layout.chi, net.d
    H = net.layout.height(s)
    wing, cs, errs = {}, [], []
    carry = None
    for h in range(1, H + 1):
        t = net.tensors[(h, s)]
        if h == 1:
            T = t[:, :, :, 0, :].transpose(1, 0, 3, 2)[..., None]
        else:
            T = np.einsum("ubg,lrba->luarg", carry, t[0])
        if h < H:
            res = tripartite_decompose(T, chi, opts, d)
            wing[(h, s)] = _left_wing_tensor(res.A.data, h == 1)
            carry = res.B.data
            cs.append(res.C.data)
            errs.append(res.truncation_error)
        else:
            l, b, _, r, al = T.shape
            q, rr = np.linalg.qr(T.reshape(l * b, r * al))
            k = q.shape[1]
            wing[(h, s)] = _left_wing_tensor(q.reshape(l, b, 1, k), h == 1)
            cs.append(rr.reshape(1, k, r, al))
            errs.append(0.0)
    return wing, cs, errs


def _merge_column(cs, wcol) -> list[np.ndarray]:
    """New surface rows: C tensors contracted with the old wing column (absent rows skipped)."""
    rows = []
    for h, c in enumerate(cs, start=1):
        if h <= len(wcol):
            t = np.einsum("gxya,pyrbc->pxrabgc", c, wcol[h - 1])
            p, x, r, a, b, g, cc = t.shape
            rows.append(t.reshape(p, x, r, a * b, g * cc))
        else:
            g, x, r, a = c.shape
            if r != 1:
                raise LayoutMismatchError(f"row {h} has a right leg but no wing tensor")
            rows.append(c.transpose(1, 2, 3, 0).reshape(1, x, 1, a, g))
    return rows


def _truncate_down(rows: list[np.ndarray], chi: int) -> tuple[list[np.ndarray], list[float]]:
    """Center on the top row; sweep it to row 1 with truncated SVDs of the vertical bonds."""
    rows = list(rows)
    errs = []
    for h in range(len(rows) - 1, 0, -1):
        t = rows[h]
        m = as_isometry_matrix(t, (BELOW,))
        w, s, vh = svd_full(m)
        k = truncation_rank(s, TruncationSpec(chi_max=chi, sv_cutoff=1e-14))
        total = float(np.sum(s**2))
        errs.append(float(np.sum(s[k:] ** 2) / total) if total > 0 else 0.0)
        shape = t.shape[:3] + (k,) + t.shape[4:]
        rows[h] = from_isometry_matrix(w[:, :k], shape, (BELOW,))
        sv = (s[:k, None] * vh[:k]).T  # (b_old, k): row h's old below leg -> new bond
        rows[h - 1] = np.einsum("ak,plrba->plrbk", sv, rows[h - 1])
    rows[0] = rows[0] / np.linalg.norm(rows[0])
    return rows, errs[::-1]


def _shift_right(n: HoloNet, opts: DisentangleOptions | None):
    s, L = n.s, n.L
    if s == L:
        raise AtBoundaryError("surface already at the right boundary")
    H, Hw = n.layout.height(s), n.layout.height(s + 1)
    if Hw > H:
        raise LayoutMismatchError(f"wing column {s + 1} is taller than the surface")
    net = move_center_vertical(n, 1)
    wing, cs, row_errs = _unzip(net, opts)
    rows = _merge_column(cs, net.column(s + 1))
    rows, vert_errs = _truncate_down(rows, n.layout.chi)
    tensors = {k: v for k, v in net.tensors.items() if k[1] not in (s, s + 1)}
    tensors.update(wing)
    for h, t in enumerate(rows, start=1):
        tensors[(h, s + 1)] = t
    heights = list(n.layout.column_heights)
    heights[s] = len(rows)
    layout = NetLayout(L, s + 1, n.layout.chi, n.d, tuple(heights))
    return HoloNet(layout, tensors, 1, dict(n.meta)), row_errs, vert_errs


def _refine(pre: np.ndarray, post: HoloNet, cols, sweeps: int, ftol: float):
    """Alternating Procrustes updates of the tensors in ``cols`` maximizing Re <pre|post>."""
    from .manifold import OverlapCost, network_to_point, point_to_network

    key = (post.center_row, post.s)
    ov = np.vdot(pre, to_statevector(post))
    if abs(ov) > 0:
        post = post.copy()
        post.tensors[key] = post.tensors[key] * np.conj(ov) / abs(ov)
    cost = OverlapCost(post, pre)
    x, keys = network_to_point(post)
    idx = [i for i, k in enumerate(keys) if k[1] in cols]
    val = cost.value(x)
    hist = [val]
    done = 0
    for done in range(1, sweeps + 1):
        for i in idx:
            e = cost.env(x, i)
            blocks = list(x.blocks)
            blocks[i] = procrustes_update(e) if x.kinds[i] == STIEFEL else sphere_update(e)
            x = ManifoldPoint(blocks, list(x.kinds))
        new = cost.value(x)
        hist.append(new)
        if new - val < ftol:
            val = max(val, new)
            break
        val = new
    return point_to_network(post, x, keys), done, hist


def shift_surface(n: HoloNet, direction: str, refine: bool = False, opts: DisentangleOptions | None = None,
                  sweeps: int = REFINE_SWEEPS, ftol: float = REFINE_FTOL):
    """Move the surface one column left or right.  Returns ``(network, ShiftReport)``; the new
    center sits on row 1 of the new surface."""
    if direction not in ("left", "right"):
        raise ValueError(f"direction must be 'left' or 'right', got {direction!r}")
    if direction == "left" and n.s == 1:
        raise AtBoundaryError("surface already at the left boundary")
    src = mirror(n) if direction == "left" else n
    out, row_errs, vert_errs = _shift_right(src, opts)
    if direction == "left":
        out = mirror(out)
    pre = None
    if n.d**n.L <= MAX_AMPLITUDES:
        pre = to_statevector(n)
        pre = pre / np.linalg.norm(pre)
    n_sweeps, hist = 0, []
    if refine and pre is not None:
        cols = (out.s, n.s)
        out, n_sweeps, hist = _refine(pre, out, cols, sweeps, ftol)
    fid = None
    if pre is not None:
        fid = float(abs(np.vdot(pre, to_statevector(out))) ** 2)
    return out, ShiftReport(row_errs, vert_errs, fid, n_sweeps, hist)


def sweep_surface(n: HoloNet, target_col: int, refine: bool = False, opts: DisentangleOptions | None = None):
    """Repeated shifts until the surface reaches ``target_col``; returns the network and reports."""
    reports = []
    while n.s != target_col:
        n, rep = shift_surface(n, "right" if target_col > n.s else "left", refine, opts)
        reports.append(rep)
    return n, reports
