"""Holographic isometric tensor network states.

Columns and rows are 1-based; column ``c`` carries physical site ``c`` on row 1.  Every tensor
is an array with legs ``(p, l, r, b, a)`` (physical, left, right, below, above); legs without a
neighbour have dimension 1, and ``p`` has dimension 1 off row 1.

Each tensor is an isometry from its *domain* legs into the remaining legs:

* right wing (``c > s``): domain ``(l, a)``;
* left wing (``c < s``): domain ``(r, a)``;
* surface rows below the center: domain ``a``; rows above: domain ``b``;
* the center itself is a unit-norm tensor.

Contracting a wing column with its conjugate over everything except the domain legs gives the
identity, so wings cancel column by column toward the surface and the norm of the state is
the norm of the center tensor.  Read as a circuit, every tensor is a gate taking its domain
legs as inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import prod

import numpy as np

from .errors import (
    IndexOutOfRangeError,
    InvalidSurfaceError,
    SizeCapExceededError,
)
from .tensor_core import haar_isometry, isometry_residual, qr_positive

LEGS = ("p", "l", "r", "b", "a")
P, LEFT, RIGHT, BELOW, ABOVE = range(5)
MAX_AMPLITUDES = 2**20


@dataclass(frozen=True)
class NetLayout:
    L: int
    surface_col: int
    chi: int
    d: int = 2
    column_heights: tuple[int, ...] = ()

    @property
    def left_width(self) -> int:
        return self.surface_col - 1

    @property
    def right_width(self) -> int:
        return self.L - self.surface_col

    def height(self, col: int) -> int:
        return self.column_heights[col - 1]

    def positions(self) -> list[tuple[int, int]]:
        """(row, col) of every tensor: surface top-down, then right wing columns moving out,
        then left wing columns moving out, each column top-down."""
        s = self.surface_col
        cols = [s] + list(range(s + 1, self.L + 1)) + list(range(s - 1, 0, -1))
        return [(h, c) for c in cols for h in range(self.height(c), 0, -1)]

    def with_heights(self, heights) -> NetLayout:
        return NetLayout(self.L, self.surface_col, self.chi, self.d, tuple(heights))


def canonical_heights(L: int, s: int) -> tuple[int, ...]:
    wl, wr = s - 1, L - s
    heights = []
    for c in range(1, L + 1):
        if c < s:
            heights.append(max(1, wl - (s - c) + 1))
        elif c > s:
            heights.append(max(1, wr - (c - s) + 1))
        else:
            heights.append(max(1, wl, wr))
    return tuple(heights)


def build_layout(L: int, surface_col: int, chi: int, d: int = 2) -> NetLayout:
    if L < 2:
        raise InvalidSurfaceError("L must be >= 2")
    if not 1 <= surface_col <= L:
        raise InvalidSurfaceError(f"surface column {surface_col} outside [1, {L}]")
    if chi < 1 or d < 2:
        raise InvalidSurfaceError("need chi >= 1 and d >= 2")
    return NetLayout(L, surface_col, chi, d, canonical_heights(L, surface_col))


@dataclass
class HoloNet:
    layout: NetLayout
    tensors: dict[tuple[int, int], np.ndarray]
    center_row: int = 1
    meta: dict = field(default_factory=dict)

    @property
    def L(self) -> int:
        return self.layout.L

    @property
    def s(self) -> int:
        return self.layout.surface_col

    @property
    def d(self) -> int:
        return self.layout.d

    def copy(self) -> HoloNet:
        return HoloNet(
            self.layout, {k: v.copy() for k, v in self.tensors.items()}, self.center_row, dict(self.meta)
        )

    def surface(self) -> list[np.ndarray]:
        """Surface tensors ordered bottom (row 1) to top."""
        return [self.tensors[(h, self.s)] for h in range(1, self.layout.height(self.s) + 1)]

    def column(self, col: int) -> list[np.ndarray]:
        return [self.tensors[(h, col)] for h in range(1, self.layout.height(col) + 1)]

    def domain_legs(self, row: int, col: int) -> tuple[int, ...]:
        return domain_axes(row, col, self.s, self.center_row)

    def surface_bond_dims(self) -> list[int]:
        return [t.shape[ABOVE] for t in self.surface()[:-1]]

    def norm(self) -> float:
        return float(np.linalg.norm(self.tensors[(self.center_row, self.s)]))


def domain_axes(row: int, col: int, s: int, center_row: int) -> tuple[int, ...]:
    if col > s:
        return (LEFT, ABOVE)
    if col < s:
        return (RIGHT, ABOVE)
    if row < center_row:
        return (ABOVE,)
    if row > center_row:
        return (BELOW,)
    return ()


def as_isometry_matrix(t: np.ndarray, domain: tuple[int, ...]) -> np.ndarray:
    """Matrix with rows = codomain legs (in leg order) and columns = domain legs."""
    cod = [k for k in range(5) if k not in domain]
    m = t.transpose(cod + list(domain))
    return m.reshape(prod(t.shape[k] for k in cod), -1)


def from_isometry_matrix(m: np.ndarray, shape, domain: tuple[int, ...]) -> np.ndarray:
    cod = [k for k in range(5) if k not in domain]
    order = cod + list(domain)
    t = m.reshape([shape[k] for k in order])
    return t.transpose(np.argsort(order))


# --------------------------------------------------------------------------- construction


def bond_dims(layout: NetLayout) -> dict[tuple[int, int], tuple[int, ...]]:
    """Default leg dims: d for every wing and surface-wing bond, surface vertical bonds
    ``min(chi, dims below, dims above)``."""
    d, s = layout.d, layout.surface_col
    exists = {(h, c) for c in range(1, layout.L + 1) for h in range(1, layout.height(c) + 1)}
    shapes = {}
    for h, c in exists:
        p = d if h == 1 else 1
        l = d if (h, c - 1) in exists else 1
        r = d if (h, c + 1) in exists else 1
        b = d if (h - 1, c) in exists else 1
        a = d if (h + 1, c) in exists else 1
        shapes[(h, c)] = [p, l, r, b, a]
    hs = layout.height(s)
    ext = [prod(shapes[(h, s)][:3]) for h in range(1, hs + 1)]
    for h in range(1, hs):
        v = min(layout.chi, prod(ext[:h]), prod(ext[h:]))
        shapes[(h, s)][ABOVE] = v
        shapes[(h + 1, s)][BELOW] = v
    return {k: tuple(v) for k, v in shapes.items()}


def random_network(layout: NetLayout, rng: np.random.Generator, center_row: int = 1) -> HoloNet:
    """Haar-random isometries everywhere and a Haar-random unit-norm center."""
    tensors = {}
    dims = bond_dims(layout)
    for h, c in layout.positions():
        shape = dims[(h, c)]
        dom = domain_axes(h, c, layout.surface_col, center_row)
        n_dom = prod(shape[k] for k in dom)
        m = haar_isometry(prod(shape) // n_dom, n_dom, rng)
        tensors[(h, c)] = from_isometry_matrix(m, shape, dom)
    return HoloNet(layout, tensors, center_row)


def identity_wing_tensor(shape, right: bool) -> np.ndarray:
    """Wire-routing identity: the inner-horizontal input goes down (or out the physical leg on
    row 1) and the wire from above continues outward."""
    return gate_wing_tensor(np.eye(prod(shape[k] for k in (LEFT if right else RIGHT, ABOVE))), shape, right)


def gate_wing_tensor(u: np.ndarray, shape, right: bool) -> np.ndarray:
    """Wing tensor ``T = U[(down, out), (in, above)]`` where ``in`` is the horizontal leg facing
    the surface, ``out`` the one facing away, ``down`` is ``b`` (or ``p`` on row 1)."""
    p, l, r, b, a = shape
    down = p * b
    h_in, h_out = (l, r) if right else (r, l)
    t = np.asarray(u, dtype=complex).reshape(down, h_out, h_in, a)
    t = t.reshape(p, b, h_out, h_in, a)
    if right:
        return t.transpose(0, 3, 2, 1, 4).copy()
    return t.transpose(0, 2, 3, 1, 4).copy()


def wing_gate_matrix(t: np.ndarray, right: bool) -> np.ndarray:
    """Inverse of ``gate_wing_tensor``."""
    p, l, r, b, a = t.shape
    if right:
        m = t.transpose(0, 3, 2, 1, 4)
        return m.reshape(p * b * r, l * a)
    m = t.transpose(0, 3, 1, 2, 4)
    return m.reshape(p * b * l, r * a)


# --------------------------------------------------------------------------- validation


@dataclass(frozen=True)
class Violation:
    where: tuple[int, int] | None
    kind: str
    residual: float

    def __str__(self):
        return f"{self.kind} at {self.where}: {self.residual:.3e}"


def _neighbour_dims_ok(n: HoloNet) -> list[Violation]:
    out = []
    for (h, c), t in n.tensors.items():
        for axis, dh, dc, other in ((RIGHT, 0, 1, LEFT), (ABOVE, 1, 0, BELOW)):
            nb = n.tensors.get((h + dh, c + dc))
            mine = t.shape[axis]
            theirs = nb.shape[other] if nb is not None else 1
            if mine != theirs:
                out.append(Violation((h, c), f"bond mismatch on leg {LEGS[axis]}", abs(mine - theirs)))
        if c == 1 and t.shape[LEFT] != 1 or c == n.L and t.shape[RIGHT] != 1:
            out.append(Violation((h, c), "open horizontal boundary leg", 1.0))
        if h == 1 and t.shape[BELOW] != 1 or h > 1 and t.shape[P] != 1:
            out.append(Violation((h, c), "misplaced physical/below leg", 1.0))
        if (h - 1, c) not in n.tensors and h > 1:
            out.append(Violation((h, c), "floating tensor", 1.0))
    return out


def validate(n: HoloNet, tol: float = 1e-10) -> list[Violation]:
    """Every violated invariant with location and residual; empty means valid."""
    report = _neighbour_dims_ok(n)
    expected = {(h, c) for c in range(1, n.L + 1) for h in range(1, n.layout.height(c) + 1)}
    if set(n.tensors) != expected:
        report.append(Violation(None, "tensor positions differ from layout heights", 1.0))
    hs = n.layout.height(n.s)
    if not 1 <= n.center_row <= hs:
        report.append(Violation((n.center_row, n.s), "center outside surface", 1.0))
    for (h, c), t in n.tensors.items():
        dom = n.domain_legs(h, c)
        if c == n.s and h == n.center_row:
            res = abs(np.linalg.norm(t) - 1)
            if res > tol:
                report.append(Violation((h, c), "center norm", res))
            continue
        m = as_isometry_matrix(t, dom)
        if m.shape[0] < m.shape[1]:
            report.append(Violation((h, c), "domain larger than codomain", float(m.shape[1] - m.shape[0])))
            continue
        res = isometry_residual(m)
        if res > tol:
            report.append(Violation((h, c), "isometry", res))
    for h in range(1, hs + 1):
        t = n.tensors.get((h, n.s))
        if t is not None and t.shape[ABOVE] > n.layout.chi:
            report.append(Violation((h, n.s), "surface bond exceeds chi", float(t.shape[ABOVE])))
    return report


# --------------------------------------------------------------------------- contraction


def _labels(h: int, c: int) -> tuple[str, ...]:
    return (f"p{c}", f"h{h}_{c - 1}", f"h{h}_{c}", f"v{h - 1}_{c}", f"v{h}_{c}")


def _absorb(front: tuple[np.ndarray, list[str]] | None, t: np.ndarray, labels) -> tuple[np.ndarray, list[str]]:
    keep = [k for k in range(5) if t.shape[k] > 1]
    data = t.reshape([t.shape[k] for k in keep])
    legs = [labels[k] for k in keep]
    if front is None:
        return data, legs
    fdata, flegs = front
    shared = [x for x in flegs if x in legs]
    ax_f = [flegs.index(x) for x in shared]
    ax_t = [legs.index(x) for x in shared]
    out = np.tensordot(fdata, data, axes=(ax_f, ax_t))
    new_legs = [x for x in flegs if x not in shared] + [x for x in legs if x not in shared]
    return out, new_legs


def contraction_order(n: HoloNet) -> list[tuple[int, int]]:
    return n.layout.positions()


def to_statevector(n: HoloNet, cap: int = MAX_AMPLITUDES) -> np.ndarray:
    """Contract the whole network; sites ordered 1..L with site 1 the most significant digit."""
    if n.d**n.L > cap:
        raise SizeCapExceededError(f"{n.d}^{n.L} amplitudes exceed cap {cap}")
    front = None
    for h, c in contraction_order(n):
        front = _absorb(front, n.tensors[(h, c)], _labels(h, c))
    data, legs = front
    phys = [f"p{c}" for c in range(1, n.L + 1)]
    # physical legs of dimension 1 cannot occur (p has dim d on row 1)
    data = data.transpose([legs.index(x) for x in phys])
    return data.reshape(-1)


# --------------------------------------------------------------------------- local contractions


def _row(tensors: list[np.ndarray], h: int) -> np.ndarray:
    if h <= len(tensors):
        return tensors[h - 1]
    return np.ones((1, 1, 1, 1, 1), dtype=complex)


def _ladder(n: HoloNet, wing_col: int, op: np.ndarray | None) -> complex:
    """<Psi| O |Psi> on the physical legs of the surface and an adjacent wing column.

    Columns further out cancel to identities, as do the surface's legs facing the other wing.
    ``op`` acts on (left site, right site) ordered by column.
    """
    s = n.s
    right = wing_col > s
    surf, wing = n.surface(), n.column(wing_col)
    H = max(len(surf), len(wing))
    env = np.ones((1, 1, 1, 1), dtype=complex)  # surface ket/bra, wing ket/bra bonds from above
    for h in range(H, 0, -1):
        S, W = _row(surf, h), _row(wing, h)
        if right:
            # S: p l x b a (x -> W.l); W: q x y b a with y traced
            S_ = S
            W_ = W
            s_eq, w_eq = "plxSA", "qxyWB"
            s_eq_c, w_eq_c = "PlXTC", "QXyVD"
        else:
            # W: q y x b a (x -> S.l); S: p x r b a, r traced
            S_ = S.transpose(0, 2, 1, 3, 4)  # p r l b a
            W_ = W
            s_eq, w_eq = "plxSA", "qyxWB"
            s_eq_c, w_eq_c = "PlXTC", "QyXVD"
        d_s, d_w = S_.shape[0], W_.shape[0]
        if h == 1 and op is not None:
            o = op.reshape(d_w, d_s, d_w, d_s) if not right else op.reshape(d_s, d_w, d_s, d_w)
            o_eq = "QPqp" if not right else "PQpq"
        else:
            o = np.einsum("pP,qQ->PQpq", np.eye(d_s), np.eye(d_w))
            o_eq = "PQpq"
        env = np.einsum(
            f"ACBD,{s_eq},{s_eq_c},{w_eq},{w_eq_c},{o_eq}->STWV",
            env,
            S_,
            S_.conj(),
            W_,
            W_.conj(),
            o,
            optimize=True,
        )
    return complex(env.reshape(-1)[0])


def expectation_two_site(n: HoloNet, op, i: int) -> complex:
    """<O> on sites ``(i, i+1)`` (0-based) using only the two columns they live on.

    The surface must be one of the two columns (1-based columns ``i+1`` or ``i+2``).
    """
    if not 0 <= i < n.L - 1:
        raise IndexOutOfRangeError(f"bond {i} outside [0, {n.L - 2}]")
    c0, c1 = i + 1, i + 2
    if n.s not in (c0, c1):
        raise InvalidSurfaceError(f"surface at column {n.s}, operator on columns {c0},{c1}")
    op = np.asarray(getattr(op, "data", op), dtype=complex).reshape(n.d**2, n.d**2)
    wing = c1 if n.s == c0 else c0
    return _ladder(n, wing, op) / _ladder(n, wing, None)


def norm_squared(n: HoloNet) -> float:
    """<Psi|Psi> from the surface column alone (the wings cancel)."""
    env = np.ones((1, 1), dtype=complex)
    for t in reversed(n.surface()):
        env = np.einsum("AB,plrbA,plrcB->bc", env, t.conj(), t, optimize=True)
    return float(env.real.reshape(-1)[0])


def renyi2_midpoint(n: HoloNet) -> float:
    """Half-chain second Renyi entropy between sites ``1..floor(L/2)`` and the rest.

    The wings are isometries, so the spectrum equals that of the surface state with every
    row's legs split into the half they feed; purity comes from a four-copy transfer along the
    surface.
    """
    half = n.L // 2
    if n.s not in (half, half + 1):
        raise InvalidSurfaceError(f"surface at column {n.s}, need {half} or {half + 1}")
    p_in_a = n.s == half
    env = np.ones((1, 1, 1, 1), dtype=complex)
    for t in n.surface():
        p, l, r, b, a = t.shape
        if p_in_a:
            m = t.transpose(0, 1, 2, 3, 4).reshape(p * l, r, b, a)
        else:
            m = t.transpose(1, 0, 2, 3, 4).reshape(l, p * r, b, a)
        # copies: 1 = psi(x1,y1), 2 = conj psi(x2,y1), 3 = psi(x2,y2), 4 = conj psi(x1,y2)
        env = np.einsum(
            "abcd,xyaA,XybB,XYcC,xYdD->ABCD", env, m, m.conj(), m, m.conj(), optimize=True
        )
    purity = env.real.reshape(-1)[0]
    nrm2 = norm_squared(n)
    return float(-np.log(purity / nrm2**2))


# --------------------------------------------------------------------------- gauge moves


def move_center_vertical(n: HoloNet, new_row: int) -> HoloNet:
    """Shift the orthogonality center along the surface by QR steps (exact)."""
    hs = n.layout.height(n.s)
    if not 1 <= new_row <= hs:
        raise IndexOutOfRangeError(f"row {new_row} outside [1, {hs}]")
    out = n.copy()
    s = n.s
    c = n.center_row
    while c < new_row:
        t, up = out.tensors[(c, s)], out.tensors[(c + 1, s)]
        q, r = qr_positive(as_isometry_matrix(t, (ABOVE,)))
        k = q.shape[1]
        shape = t.shape[:4] + (k,)
        out.tensors[(c, s)] = from_isometry_matrix(q, shape, (ABOVE,))
        out.tensors[(c + 1, s)] = np.einsum("kb,plrba->plrka", r, up)
        c += 1
    while c > new_row:
        t, dn = out.tensors[(c, s)], out.tensors[(c - 1, s)]
        q, r = qr_positive(as_isometry_matrix(t, (BELOW,)))
        k = q.shape[1]
        shape = t.shape[:3] + (k,) + t.shape[4:]
        out.tensors[(c, s)] = from_isometry_matrix(q, shape, (BELOW,))
        out.tensors[(c - 1, s)] = np.einsum("ka,plrba->plrbk", r, dn)
        c -= 1
    out.center_row = new_row
    return out


def normalize_center(n: HoloNet) -> HoloNet:
    out = n.copy()
    key = (n.center_row, n.s)
    out.tensors[key] = out.tensors[key] / np.linalg.norm(out.tensors[key])
    return out
