"""Optimization on products of Stiefel manifolds and the unit sphere.

A point is a list of blocks; each block is either an ``n x m`` isometry (``"stiefel"``) or a unit
vector (``"sphere"``).  The metric is the real part of the Frobenius inner product, and
Euclidean gradients follow the convention ``df = Re tr(G^dagger dX)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BlockNotFoundError, InvalidDimsError, ZeroEnvironmentError
from .network import (
    HoloNet,
    _absorb,
    _labels,
    as_isometry_matrix,
    from_isometry_matrix,
    random_network,
    to_statevector,
)
from .tensor_core import DenseTensor, isometry_residual, polar_unitary, qr_positive

STIEFEL, SPHERE = "stiefel", "sphere"


@dataclass
class ManifoldPoint:
    blocks: list[np.ndarray]
    kinds: list[str]

    def copy(self) -> ManifoldPoint:
        return ManifoldPoint([b.copy() for b in self.blocks], list(self.kinds))

    def residual(self) -> float:
        out = 0.0
        for b, k in zip(self.blocks, self.kinds):
            if k == STIEFEL:
                out = max(out, isometry_residual(b))
            else:
                out = max(out, abs(np.linalg.norm(b) - 1))
        return out

    @property
    def size(self) -> int:
        return sum(b.size for b in self.blocks)


@dataclass
class OptimizerReport:
    final_cost: float
    iterations: int
    gradient_norm: float
    converged: bool
    restart_index: int = 0
    max_residual: float = 0.0
    history: list[float] = field(default_factory=list, repr=False)
    message: str = ""


@dataclass
class OptOptions:
    max_iter: int = 1000
    gtol: float = 1e-10
    ftol: float = 1e-15
    patience: int = 50
    min_improvement: float = 1e-12
    armijo: float = 1e-4
    max_backtracks: int = 40


# --------------------------------------------------------------------------- closed-form updates


def procrustes_update(env) -> np.ndarray:
    """Isometry maximizing ``Re tr(W^dagger E)``: ``U V^dagger`` from ``E = U S V^dagger``."""
    e = np.asarray(getattr(env, "data", env), dtype=complex)
    if e.ndim != 2 or e.shape[0] < e.shape[1]:
        raise InvalidDimsError(f"need an n x m environment with n >= m, got {e.shape}")
    return polar_unitary(e)


def sphere_update(env) -> np.ndarray:
    e = np.asarray(getattr(env, "data", env), dtype=complex)
    nrm = np.linalg.norm(e)
    if nrm == 0 or not np.isfinite(nrm):
        raise ZeroEnvironmentError("environment vanishes")
    return e / nrm


# --------------------------------------------------------------------------- geometry


def _herm(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


def project_block(x: np.ndarray, g: np.ndarray, kind: str) -> np.ndarray:
    if kind == STIEFEL:
        return g - x @ _herm(x.conj().T @ g)
    return g - np.real(np.vdot(x, g)) * x


def retract_block(x: np.ndarray, xi: np.ndarray, step: float, kind: str) -> np.ndarray:
    y = x + step * xi
    if kind == STIEFEL:
        return qr_positive(y)[0]
    return y / np.linalg.norm(y)


def tangent_project(point: ManifoldPoint, grads) -> list[np.ndarray]:
    return [project_block(x, g, k) for x, g, k in zip(point.blocks, grads, point.kinds)]


def retract(point: ManifoldPoint, tangent, step: float) -> ManifoldPoint:
    if step == 0:
        return point.copy()
    return ManifoldPoint(
        [retract_block(x, xi, step, k) for x, xi, k in zip(point.blocks, tangent, point.kinds)],
        list(point.kinds),
    )


def vector_transport(from_point: ManifoldPoint, to_point: ManifoldPoint, tangent) -> list[np.ndarray]:
    return tangent_project(to_point, tangent)


def inner(a, b) -> float:
    return float(sum(np.real(np.vdot(x, y)) for x, y in zip(a, b)))


def _axpy(alpha, x, y):
    return [alpha * a + b for a, b in zip(x, y)]


def hessian_block(x, g, hv, xi, kind):
    """Riemannian Hessian of the embedded metric: projected Euclidean Hessian plus the
    curvature (Weingarten) correction."""
    if kind == STIEFEL:
        return project_block(x, hv - xi @ _herm(x.conj().T @ g), kind)
    return project_block(x, hv, kind) - np.real(np.vdot(x, g)) * xi


# --------------------------------------------------------------------------- Riemannian CG


def riemannian_cg(cost_fn, grad_fn, init: ManifoldPoint, opts: OptOptions | None = None):
    """Polak-Ribiere+ conjugate gradients with Armijo backtracking.

    Stops on gradient norm < ``gtol``, on no improvement of ``min_improvement`` over
    ``patience`` iterations, or at ``max_iter``.
    """
    opts = opts or OptOptions()
    x = init.copy()
    f = cost_fn(x)
    g = tangent_project(x, grad_fn(x))
    gg = inner(g, g)
    eta = [-a for a in g]
    step = 1.0
    hist = [f]
    best_recent, stall = f, 0
    max_res = x.residual()
    msg = "max_iter"
    it = 0
    for it in range(1, opts.max_iter + 1):
        if np.sqrt(gg) < opts.gtol:
            msg = "gtol"
            it -= 1
            break
        slope = inner(g, eta)
        if slope >= 0:
            eta = [-a for a in g]
            slope = -gg
        t = step * 2.0
        for _ in range(opts.max_backtracks):
            x_new = retract(x, eta, t)
            f_new = cost_fn(x_new)
            if f_new <= f + opts.armijo * t * slope:
                break
            t *= 0.5
        else:
            msg = "line search failed"
            break
        step = t
        g_new = tangent_project(x_new, grad_fn(x_new))
        g_old_t = vector_transport(x, x_new, g)
        eta_t = vector_transport(x, x_new, eta)
        gg_new = inner(g_new, g_new)
        beta = max(0.0, (gg_new - inner(g_new, g_old_t)) / gg) if gg > 0 else 0.0
        eta = _axpy(beta, eta_t, [-a for a in g_new])
        x, g, gg = x_new, g_new, gg_new
        df = f - f_new
        f = f_new
        hist.append(f)
        max_res = max(max_res, x.residual())
        if best_recent - f > opts.min_improvement:
            best_recent, stall = f, 0
        else:
            stall += 1
            if stall >= opts.patience:
                msg = "stalled"
                break
        if 0 <= df < opts.ftol and np.sqrt(gg) < 1e3 * opts.gtol:
            msg = "ftol"
            break
    gn = float(np.sqrt(gg))
    return x, OptimizerReport(f, it, gn, gn < opts.gtol or msg == "ftol", 0, max_res, hist, msg)


# --------------------------------------------------------------------------- trust region


@dataclass
class TROptions:
    max_iter: int = 500
    gtol: float = 1e-10
    radius0: float | None = None
    radius_max: float | None = None
    expand: float = 2.0
    shrink: float = 0.25
    accept: float = 0.1
    tcg_max: int | None = None
    kappa: float = 0.1
    theta: float = 1.0


def _tcg(x: ManifoldPoint, g, hess, radius: float, opts: TROptions):
    """Steihaug-Toint truncated CG on the quadratic model."""
    eta = [np.zeros_like(a) for a in g]
    r = [a.copy() for a in g]
    delta = [-a for a in r]
    rr = inner(r, r)
    r0 = np.sqrt(rr)
    hess_eta = [np.zeros_like(a) for a in g]
    n_max = opts.tcg_max or 2 * sum(a.size for a in g)
    for _ in range(n_max):
        hd = hess(delta)
        kap = inner(delta, hd)
        if kap <= 0:
            tau = _to_boundary(eta, delta, radius)
            return _axpy(tau, delta, eta), _axpy(tau, hd, hess_eta), "negative curvature"
        alpha = rr / kap
        trial = _axpy(alpha, delta, eta)
        if np.sqrt(inner(trial, trial)) >= radius:
            tau = _to_boundary(eta, delta, radius)
            return _axpy(tau, delta, eta), _axpy(tau, hd, hess_eta), "boundary"
        eta = trial
        hess_eta = _axpy(alpha, hd, hess_eta)
        r = _axpy(alpha, hd, r)
        r = tangent_project(x, r)
        rr_new = inner(r, r)
        if np.sqrt(rr_new) <= r0 * min(r0**opts.theta, opts.kappa):
            return eta, hess_eta, "converged"
        delta = _axpy(rr_new / rr, delta, [-a for a in r])
        delta = tangent_project(x, delta)
        rr = rr_new
    return eta, hess_eta, "max inner"


def _to_boundary(eta, delta, radius):
    a = inner(delta, delta)
    b = 2 * inner(eta, delta)
    c = inner(eta, eta) - radius**2
    return (-b + np.sqrt(max(b * b - 4 * a * c, 0.0))) / (2 * a)


def fd_riemannian_hessian(grad_fn, eps: float = 1e-6):
    """Riemannian Hessian-vector product by differencing projected gradients along a retraction."""

    def rhess(x: ManifoldPoint, egrad, v):
        nv = np.sqrt(inner(v, v))
        if nv == 0:
            return [np.zeros_like(a) for a in v]
        t = eps / nv
        y = retract(x, v, t)
        gy = tangent_project(x, tangent_project(y, grad_fn(y)))
        gx = tangent_project(x, egrad)
        return [(a - b) / t for a, b in zip(gy, gx)]

    return rhess


def trust_region(
    cost_fn, grad_fn, hessvec_fn, init: ManifoldPoint, opts: TROptions | None = None, rhess_fn=None
):
    """Riemannian trust region; ``hessvec_fn(x, v)`` returns Euclidean Hessian-vector products,
    projected and corrected for curvature here.  Alternatively ``rhess_fn(x, egrad, v)`` supplies
    Riemannian Hessian-vector products directly."""
    opts = opts or TROptions()
    x = init.copy()
    n_real = 2 * x.size
    radius = opts.radius0 or 0.1 * np.sqrt(n_real)
    radius_max = opts.radius_max or 10 * radius
    f = cost_fn(x)
    egrad = grad_fn(x)
    g = tangent_project(x, egrad)
    hist, max_res = [f], x.residual()
    msg, it = "max_iter", 0
    for it in range(1, opts.max_iter + 1):
        gn = np.sqrt(inner(g, g))
        if gn < opts.gtol:
            msg, it = "gtol", it - 1
            break

        def hess(v, x=x, egrad=egrad):
            if rhess_fn is not None:
                return tangent_project(x, rhess_fn(x, egrad, v))
            hv = hessvec_fn(x, v)
            return [hessian_block(*z) for z in zip(x.blocks, egrad, hv, v, x.kinds)]

        eta, heta, _ = _tcg(x, g, hess, radius, opts)
        model_dec = -(inner(g, eta) + 0.5 * inner(eta, heta))
        x_new = retract(x, eta, 1.0)
        f_new = cost_fn(x_new)
        actual = f - f_new
        if model_dec <= 0:
            rho = 1.0 if actual >= 0 else -1.0
        else:
            rho = actual / model_dec
        norm_eta = np.sqrt(inner(eta, eta))
        if rho < 0.25:
            radius *= opts.shrink
        elif rho > 0.75 and norm_eta >= 0.99 * radius:
            radius = min(opts.expand * radius, radius_max)
        if rho > opts.accept:
            x, f = x_new, f_new
            egrad = grad_fn(x)
            g = tangent_project(x, egrad)
            max_res = max(max_res, x.residual())
            hist.append(f)
        if radius < 1e-14:
            msg = "radius collapsed"
            break
    gn = float(np.sqrt(inner(g, g)))
    return x, OptimizerReport(f, it, gn, gn < opts.gtol, 0, max_res, hist, msg)


# --------------------------------------------------------------------------- alternating updates


def alternating_sweep(env_fn, value_fn, point: ManifoldPoint, sweeps: int = 1, tol: float = 1e-12):
    """Maximize a multilinear ``Re value`` one block at a time with closed-form updates.

    ``env_fn(point, i)`` returns block ``i``'s environment ``E`` with value ``Re tr(X^dagger E)``.
    Returns the point and a report whose ``final_cost`` is ``-value``.
    """
    x = point.copy()
    val = value_fn(x)
    hist = [-val]
    for _ in range(sweeps):
        for i, kind in enumerate(x.kinds):
            e = env_fn(x, i)
            x.blocks[i] = procrustes_update(e) if kind == STIEFEL else sphere_update(e)
            new = value_fn(x)
            if new < val - tol * max(1.0, abs(val)):
                raise AssertionError(f"alternating update decreased the objective: {val} -> {new}")
            val = new
        hist.append(-val)
    return x, OptimizerReport(-val, sweeps, 0.0, True, 0, x.residual(), hist, "sweeps")


# --------------------------------------------------------------------------- network <-> point


def network_to_point(n: HoloNet) -> tuple[ManifoldPoint, list[tuple[int, int]]]:
    keys = n.layout.positions()
    blocks, kinds = [], []
    for h, c in keys:
        t = n.tensors[(h, c)]
        dom = n.domain_legs(h, c)
        if dom:
            blocks.append(as_isometry_matrix(t, dom))
            kinds.append(STIEFEL)
        else:
            blocks.append(t.reshape(-1).copy())
            kinds.append(SPHERE)
    return ManifoldPoint(blocks, kinds), keys


def point_to_network(template: HoloNet, point: ManifoldPoint, keys) -> HoloNet:
    out = template.copy()
    for (h, c), b, kind in zip(keys, point.blocks, point.kinds):
        shape = template.tensors[(h, c)].shape
        if kind == SPHERE:
            out.tensors[(h, c)] = b.reshape(shape)
        else:
            out.tensors[(h, c)] = from_isometry_matrix(b, shape, template.domain_legs(h, c))
    return out


def _reference_vector(n: HoloNet, reference) -> np.ndarray:
    if isinstance(reference, HoloNet):
        return to_statevector(reference)
    return np.asarray(reference, dtype=complex).reshape(-1)


def overlap_and_environments(n: HoloNet, reference) -> tuple[complex, dict]:
    """<ref|Psi> and, for every tensor, the environment ``E`` (same shape as the tensor) with
    ``Re <ref|Psi> = Re sum conj(T) * E``."""
    ref = _reference_vector(n, reference)
    keys = n.layout.positions()
    labels = [_labels(h, c) for h, c in keys]
    fronts = [None]
    for key, lab in zip(keys, labels):
        fronts.append(_absorb(fronts[-1], n.tensors[key], lab))
    psi_data, psi_legs = fronts[-1]
    phys = [f"p{c}" for c in range(1, n.L + 1)]
    back = (ref.conj().reshape((n.d,) * n.L), phys)
    envs = {}
    for k in range(len(keys) - 1, -1, -1):
        key, lab = keys[k], labels[k]
        t = n.tensors[key]
        if fronts[k] is None:
            data, legs = back
        else:
            data, legs = _absorb_pair(fronts[k], back)
        keep = [j for j in range(5) if t.shape[j] > 1]
        order = [legs.index(lab[j]) for j in keep]
        envs[key] = np.conj(data.transpose(order).reshape(t.shape))
        back = _absorb(back, t, lab)
    value = complex(back[0].reshape(-1)[0]) if back[0].ndim == 0 or back[0].size == 1 else None
    if value is None:
        raise RuntimeError("overlap contraction left open legs")
    return value, envs


def _absorb_pair(a, b):
    adata, alegs = a
    bdata, blegs = b
    shared = [x for x in alegs if x in blegs]
    out = np.tensordot(adata, bdata, axes=([alegs.index(x) for x in shared], [blegs.index(x) for x in shared]))
    return out, [x for x in alegs if x not in shared] + [x for x in blegs if x not in shared]


def environment_gradient(n: HoloNet, block_id, reference) -> DenseTensor:
    """Environment of tensor ``block_id = (row, col)`` for the overlap with ``reference``."""
    if block_id not in n.tensors:
        raise BlockNotFoundError(f"no tensor at {block_id}")
    _, envs = overlap_and_environments(n, reference)
    return DenseTensor(("p", "l", "r", "b", "a"), envs[block_id])


class OverlapCost:
    """``2 - 2 Re <ref|Psi>`` as a function of a point, with cached environments."""

    def __init__(self, template: HoloNet, reference):
        self.template = template
        self.ref = _reference_vector(template, reference)
        _, self.keys = network_to_point(template)
        self._cache_id = None
        self._cache = None

    def _eval(self, x: ManifoldPoint):
        if self._cache_id is not x:
            n = point_to_network(self.template, x, self.keys)
            val, envs = overlap_and_environments(n, self.ref)
            self._cache_id, self._cache = x, (val, envs, n)
        return self._cache

    def cost(self, x: ManifoldPoint) -> float:
        return float(2 - 2 * self._eval(x)[0].real)

    def grad(self, x: ManifoldPoint) -> list[np.ndarray]:
        _, envs, n = self._eval(x)
        return [-2 * self._env_block(n, key, envs[key], kind) for key, kind in zip(self.keys, x.kinds)]

    def env(self, x: ManifoldPoint, i: int) -> np.ndarray:
        _, envs, n = self._eval(x)
        return self._env_block(n, self.keys[i], envs[self.keys[i]], x.kinds[i])

    def value(self, x: ManifoldPoint) -> float:
        return float(self._eval(x)[0].real)

    def _env_block(self, n, key, e, kind):
        if kind == SPHERE:
            return e.reshape(-1)
        return as_isometry_matrix(e, n.domain_legs(*key))


# --------------------------------------------------------------------------- fitting protocol


@dataclass
class FitOptions:
    cg: OptOptions = field(default_factory=lambda: OptOptions(max_iter=300, gtol=1e-9))
    tr: TROptions = field(default_factory=lambda: TROptions(max_iter=100, gtol=1e-9))
    warm_sweeps: int = 0
    center_row: int = 1


def fit_restart(reference: np.ndarray, init: HoloNet, opts: FitOptions) -> tuple[HoloNet, OptimizerReport]:
    """One restart: optional alternating sweeps, Riemannian CG, then trust-region polishing with
    finite-difference Hessians.  The reported cost is the exact distance of the final network."""
    cost = OverlapCost(init, reference)
    x, _ = network_to_point(init)
    if opts.warm_sweeps:
        x, _ = alternating_sweep(cost.env, cost.value, x, opts.warm_sweeps)
    x, rep = riemannian_cg(cost.cost, cost.grad, x, opts.cg)
    if opts.tr.max_iter and rep.final_cost > 0:
        x, rep2 = trust_region(cost.cost, cost.grad, None, x, opts.tr, rhess_fn=fd_riemannian_hessian(cost.grad))
        rep2.iterations += rep.iterations
        rep2.max_residual = max(rep.max_residual, rep2.max_residual)
        rep2.history = rep.history + rep2.history
        rep = rep2
    net = point_to_network(init, x, cost.keys)
    rep.final_cost = float(np.linalg.norm(to_statevector(net) - reference) ** 2)
    return net, rep


def fit_network_to_state(
    reference,
    layout,
    restarts: int,
    tol: float,
    rng: np.random.Generator,
    opts: FitOptions | None = None,
):
    """Best-of-restarts fit minimizing ``|| Psi - ref ||^2`` from Haar-random initial networks.

    Stops once the exact error drops below ``tol``; ties keep the earlier restart.
    """
    opts = opts or FitOptions()
    ref = np.asarray(reference, dtype=complex).reshape(-1)
    ref = ref / np.linalg.norm(ref)
    best, best_rep = None, None
    seeds = rng.integers(0, 2**63 - 1, size=restarts)
    for r in range(restarts):
        init = random_network(layout, np.random.Generator(np.random.Philox(int(seeds[r]))), opts.center_row)
        net, rep = fit_restart(ref, init, opts)
        rep.restart_index = r
        if best_rep is None or rep.final_cost < best_rep.final_cost - 1e-14:
            best, best_rep = net, rep
        if best_rep.final_cost < tol:
            break
    return best, best_rep
