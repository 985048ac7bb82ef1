"""Trotterized real-time evolution: gate sequences, MPS-TEBD and holographic TEBD."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import mps as mps_mod
from . import network as net_mod
from . import oracle
from .errors import SurfaceMisplacedError, WrongKindError
from .manifold import FitOptions, fit_network_to_state, fit_restart, procrustes_update, sphere_update
from .models import ID2, Gate, GateSequence, ModelSpec
from .moses import DisentangleOptions, shift_surface
from .network import ABOVE, BELOW, HoloNet, as_isometry_matrix, from_isometry_matrix, _absorb, _labels
from .tensor_core import TruncationSpec, complete_unitary, expm_hermitian_i

# --------------------------------------------------------------------------- gate sequences


def sweep_direction(step: int) -> str:
    """Odd (1-based) steps sweep left to right, even steps right to left."""
    return "ltr" if step % 2 == 1 else "rtl"


def _bond_order(L: int, step: int) -> list[int]:
    bonds = list(range(L - 1))
    return bonds if sweep_direction(step) == "ltr" else bonds[::-1]


def tfim_gates(spec: ModelSpec, dt: float, step: int = 1) -> GateSequence:
    """First-order Trotter gates ``exp(-i dt h_{i,i+1})`` for ``-J ZZ - g X``.

    Interior fields are split evenly between the two bonds of a site; boundary sites put the
    whole field on their only bond.
    """
    if spec.kind != "tfim":
        raise WrongKindError(f"tfim_gates needs a tfim model, got {spec.kind}")
    L = spec.L
    tag = sweep_direction(step)
    gates = []
    for i in _bond_order(L, step):
        wl = 1.0 if i == 0 else 0.5
        wr = 1.0 if i + 1 == L - 1 else 0.5
        h = oracle.tfim_local_term(spec.J, spec.g, wl, wr)
        gates.append(Gate(expm_hermitian_i(h, dt), i, tag))
    return GateSequence(gates)


def kic_step_gates(spec: ModelSpec, step: int = 1) -> GateSequence:
    """One exact kicked-Ising period as fused two-site gates.

    Every bond carries ``exp(-i J ZZ)``; each site's kick rides on the last gate that touches the
    site in sweep order (left factor for left-to-right sweeps, right factor otherwise).
    """
    if spec.kind != "kic":
        raise WrongKindError(f"kic_step_gates needs a kic model, got {spec.kind}")
    L = spec.L
    tag = sweep_direction(step)
    zz = np.diag(np.exp(-1j * spec.J * np.array([1, -1, -1, 1]))).astype(complex)
    k = oracle.kick_matrix(spec.g, spec.h)
    gates = []
    for i in _bond_order(L, step):
        if tag == "ltr":
            kl, kr = k, (k if i == L - 2 else ID2)
        else:
            kl, kr = (k if i == 0 else ID2), k
        gates.append(Gate(np.kron(kl, kr) @ zz, i, tag))
    return GateSequence(gates)


def step_gates(spec: ModelSpec, dt: float, step: int) -> GateSequence:
    if spec.kind == "tfim":
        return tfim_gates(spec, dt, step)
    return kic_step_gates(spec, step)


def _step_time(spec: ModelSpec, dt: float) -> float:
    return dt if spec.kind == "tfim" else 1.0


def _time_axis(spec: ModelSpec, dt: float) -> float:
    # a frozen clock (dt = 0) is recorded against the step count so times stay increasing
    t = _step_time(spec, dt)
    return t if t > 0 else 1.0


# --------------------------------------------------------------------------- trajectories


@dataclass
class Trajectory:
    times: list[float] = field(default_factory=list)
    observables: list[dict] = field(default_factory=list)
    fidelity_vs_oracle: list[float] | None = None
    oracle_observables: list[dict] | None = None
    ledger: list[dict] = field(default_factory=list)

    def series(self, name: str) -> np.ndarray:
        return np.array([o[name] for o in self.observables])

    def record(self, t: float, obs: dict) -> None:
        if self.times and t <= self.times[-1]:
            raise ValueError("times must be strictly increasing")
        self.times.append(float(t))
        self.observables.append(obs)


def state_observables(psi: np.ndarray, names) -> dict:
    """Mean <sigma_x>, half-chain S2 and norm of a state vector."""
    L = int(round(np.log2(psi.size)))
    nrm = float(np.linalg.norm(psi))
    out = {}
    for name in names:
        if name == "sx":
            out[name] = oracle.mean_sigma_x(psi / nrm)
        elif name == "s2":
            out[name] = oracle.renyi2_dense(psi / nrm, L // 2)
        elif name == "norm":
            out[name] = nrm
        else:
            raise ValueError(f"unknown observable {name!r}")
    return out


def _oracle_init(traj: Trajectory, psi0: np.ndarray, names):
    traj.fidelity_vs_oracle = [1.0]
    traj.oracle_observables = [state_observables(psi0, names)]


def _oracle_record(traj, psi, ref, names):
    traj.fidelity_vs_oracle.append(float(abs(np.vdot(ref, psi / np.linalg.norm(psi))) ** 2))
    traj.oracle_observables.append(state_observables(ref, names))


# --------------------------------------------------------------------------- MPS baseline


def tebd_step_mps(m: mps_mod.MPS, gates: GateSequence, spec: TruncationSpec) -> tuple[mps_mod.MPS, float]:
    err = 0.0
    for g in gates:
        i = g.bond
        if m.center not in (i, i + 1):
            m = mps_mod.canonicalize(m, i if m.center < i else i + 1)
        m, e = mps_mod.apply_two_site_gate_mps(m, g.matrix, i, spec)
        err += e
    return m, err


def tebd_run_mps(m0: mps_mod.MPS, spec: ModelSpec, dt: float, n_steps: int, chi: int | None = None,
                 observables=("sx", "s2", "norm"), oracle_mode: str | None = None) -> Trajectory:
    """MPS-TEBD with the same gate sequences as the holographic runs.

    ``oracle_mode`` is ``None``, ``"exact"`` (exact propagator) or ``"trotter"`` (the same gate
    sequence applied to a dense vector).
    """
    trunc = TruncationSpec(chi_max=chi or 2**30, sv_cutoff=1e-14, renormalize=True)
    m = mps_mod.canonicalize(m0, 0) if m0.center is None else m0.copy()
    traj = Trajectory()
    psi = mps_mod.to_statevector(m)
    traj.record(0.0, state_observables(psi, observables))
    ref = psi.copy()
    if oracle_mode:
        _oracle_init(traj, psi, observables)
    tstep = _time_axis(spec, dt)
    for k in range(1, n_steps + 1):
        gates = step_gates(spec, dt, k)
        m, err = tebd_step_mps(m, gates, trunc)
        traj.ledger.append({"step": k, "truncation": err, "max_bond": max(m.bond_dims or [1])})
        psi = mps_mod.to_statevector(m)
        traj.record(k * tstep, state_observables(psi, observables))
        if oracle_mode:
            ref = _advance_oracle(ref, spec, dt, k, gates, oracle_mode)
            _oracle_record(traj, psi, ref, observables)
    return traj


def _advance_oracle(ref, spec, dt, k, gates, mode):
    if mode == "trotter":
        return oracle.apply_gates_dense(ref, gates)
    if mode == "exact":
        return oracle.evolve_exact(ref, spec, _step_time(spec, dt))
    raise ValueError(f"unknown oracle mode {mode!r}")


# --------------------------------------------------------------------------- holographic TEBD


def pad_surface_bonds(n: HoloNet, chi: int | None = None) -> HoloNet:
    """Grow every surface vertical bond towards ``chi`` without changing the state.

    The tensor holding the bond in its domain gets orthonormal extra columns, the other one
    zero entries.  Bonds never exceed what either side can carry.
    """
    chi = chi or n.layout.chi
    out = n.copy()
    s, H, c = n.s, n.layout.height(n.s), n.center_row
    below = [1] * (H + 1)
    for h in range(1, H + 1):
        t = out.tensors[(h, s)]
        below[h] = below[h - 1] * t.shape[0] * t.shape[1] * t.shape[2]
    order = list(range(H - 1, c - 1, -1)) + list(range(1, c))
    for h in order:
        lo, up = out.tensors[(h, s)], out.tensors[(h + 1, s)]
        k = lo.shape[ABOVE]
        if h >= c:  # upper tensor has the bond in its domain
            dom_t, other, dom_leg, other_leg = up, lo, BELOW, ABOVE
        else:
            dom_t, other, dom_leg, other_leg = lo, up, ABOVE, BELOW
        cod = int(np.prod(dom_t.shape)) // k
        new = min(chi, cod, below[h])
        if new <= k:
            continue
        m = as_isometry_matrix(dom_t, (dom_leg,))
        m = complete_unitary(m)[:, :new]
        shape = list(dom_t.shape)
        shape[dom_leg] = new
        dom_new = from_isometry_matrix(m, shape, (dom_leg,))
        pad = [(0, 0)] * 5
        pad[other_leg] = (0, new - k)
        other_new = np.pad(other, pad)
        if h >= c:
            out.tensors[(h + 1, s)], out.tensors[(h, s)] = dom_new, other_new
        else:
            out.tensors[(h, s)], out.tensors[(h + 1, s)] = dom_new, other_new
    return out


def _two_column_items(n: HoloNet, cols: tuple[int, int], gate: np.ndarray, bra: dict):
    """Ket, gate and bra tensors of the two-column overlap <Phi| U |Psi>, in ladder order."""
    c1, c2 = cols
    inner = f"_{c1}"

    def lab(h, c, side):
        out = []
        for x in _labels(h, c):
            if x.startswith("h") and not x.endswith(inner):
                out.append(x)
            else:
                out.append(x + side)
        return out

    d = n.d
    g = gate.reshape(d, d, d, d)
    items, keys = [], []
    top = max(n.layout.height(c1), n.layout.height(c2))
    for h in range(1, top + 1):
        for c in cols:
            if (h, c) in n.tensors:
                items.append((n.tensors[(h, c)], lab(h, c, "k")))
                keys.append(None)
        if h == 1:
            items.append((g, [f"p{c1}b", f"p{c2}b", f"p{c1}k", f"p{c2}k"]))
            keys.append(None)
        for c in cols:
            if (h, c) in n.tensors:
                items.append((bra[(h, c)].conj(), lab(h, c, "b")))
                keys.append((h, c))
    return items, keys


def _absorb_item(front, item):
    data, labels = item
    if data.ndim == 5:
        return _absorb(front, data, labels)
    if front is None:
        return data, list(labels)
    fdata, flegs = front
    shared = [x for x in flegs if x in labels]
    out = np.tensordot(fdata, data, axes=([flegs.index(x) for x in shared], [labels.index(x) for x in shared]))
    return out, [x for x in flegs if x not in shared] + [x for x in labels if x not in shared]


def _pair(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return _absorb_item(a, (b[0], b[1]))


def _env_for(item, rest, shape):
    """Open tensor ``rest`` (legs of one bra item) as an environment in (p, l, r, b, a) order."""
    _, labels = item
    data, legs = rest if rest is not None else (np.ones(()), [])
    keep = [j for j in range(5) if shape[j] > 1]
    order = [legs.index(labels[j]) for j in keep]
    return data.transpose(order).reshape(shape)


def apply_gate_local(n: HoloNet, gate, i: int, sweeps: int = 50, tol: float = 1e-12):
    """Variationally absorb a two-site gate on sites ``(i, i+1)`` into the two affected columns.

    Maximizes ``Re <Phi| U |Psi>`` over the columns ``i+1, i+2`` by alternating Procrustes
    updates, starting from the pre-gate tensors.  Returns ``(network, residual)`` with the
    residual the final two-column distance ``|| T_Phi - U T_Psi ||``.
    """
    gate = np.asarray(getattr(gate, "data", gate), dtype=complex).reshape(n.d**2, n.d**2)
    cols = (i + 1, i + 2)
    if n.s not in cols:
        raise SurfaceMisplacedError(f"surface at column {n.s}, gate on columns {cols}")
    phi = {k: t.copy() for k, t in n.tensors.items() if k[1] in cols}
    items, keys = _two_column_items(n, cols, gate, phi)
    val = None
    hist = []
    for _ in range(sweeps):
        suffix = [None] * (len(items) + 1)
        for j in range(len(items) - 1, -1, -1):
            suffix[j] = _pair(suffix[j + 1], items[j]) if suffix[j + 1] is not None else _absorb_item(None, items[j])
        prefix = None
        for j, key in enumerate(keys):
            if key is not None:
                shape = phi[key].shape
                env = _env_for(items[j], _pair(prefix, suffix[j + 1]), shape)
                dom = n.domain_legs(*key)
                if dom:
                    m = procrustes_update(as_isometry_matrix(env, dom))
                    phi[key] = from_isometry_matrix(m, shape, dom)
                else:
                    phi[key] = sphere_update(env.reshape(-1)).reshape(shape)
                items[j] = (phi[key].conj(), items[j][1])
            prefix = _absorb_item(prefix, items[j])
        new = float(np.real(prefix[0].reshape(-1)[0]))
        hist.append(new)
        if val is not None and new - val < tol:
            val = max(val, new)
            break
        val = new
    out = n.copy()
    out.tensors.update(phi)
    out = net_mod.normalize_center(out)
    return out, float(np.sqrt(max(0.0, 2 - 2 * val)))


def position_surface(n: HoloNet, i: int, refine: bool = False, opts: DisentangleOptions | None = None):
    """Minimal shifts so the surface sits on column ``i+1`` or ``i+2``; returns the network and
    the shift reports."""
    reports = []
    while n.s < i + 1:
        n, rep = shift_surface(n, "right", refine, opts)
        reports.append(rep)
    while n.s > i + 2:
        n, rep = shift_surface(n, "left", refine, opts)
        reports.append(rep)
    return n, reports


def tebd_step(n: HoloNet, gates: GateSequence, spec: TruncationSpec | None = None, refine: bool = False,
              sweeps: int = 50, opts: DisentangleOptions | None = None):
    """Apply a gate sequence, moving the surface along with the gates.  Returns the network and
    a ledger with one entry per shift and per gate."""
    chi = min(n.layout.chi, spec.chi_max) if spec is not None else n.layout.chi
    ledger = []
    for g in gates:
        n, reps = position_surface(n, g.bond, refine, opts)
        for r in reps:
            ledger.append({"kind": "shift", "to": n.s, "fidelity": r.fidelity_estimate,
                           "truncation": sum(r.row_errors) + sum(r.vertical_errors)})
        n = net_mod.move_center_vertical(n, 1)
        n = pad_surface_bonds(n, chi)
        n, res = apply_gate_local(n, g.matrix, g.bond, sweeps)
        ledger.append({"kind": "gate", "bond": g.bond, "residual": res})
    return n, ledger


def tebd_run(n0: HoloNet, spec: ModelSpec, dt: float, n_steps: int, observables=("sx", "s2", "norm"),
             oracle_mode: str | None = None, refine: bool = False, sweeps: int = 50,
             opts: DisentangleOptions | None = None) -> Trajectory:
    """Holographic TEBD; observables are evaluated on the contracted state vector."""
    n = n0
    traj = Trajectory()
    psi = net_mod.to_statevector(n)
    traj.record(0.0, state_observables(psi, observables))
    ref = psi / np.linalg.norm(psi)
    if oracle_mode:
        _oracle_init(traj, psi, observables)
    tstep = _time_axis(spec, dt)
    for k in range(1, n_steps + 1):
        gates = step_gates(spec, dt, k)
        n, ledger = tebd_step(n, gates, refine=refine, sweeps=sweeps, opts=opts)
        for e in ledger:
            e["step"] = k
        traj.ledger.extend(ledger)
        psi = net_mod.to_statevector(n)
        traj.record(k * tstep, state_observables(psi, observables))
        if oracle_mode:
            ref = _advance_oracle(ref, spec, dt, k, gates, oracle_mode)
            _oracle_record(traj, psi, ref, observables)
    traj.final_network = n
    return traj


# --------------------------------------------------------------------------- variational comparison


def variational_series(psi0: np.ndarray, spec: ModelSpec, dt: float, n_steps: int, chi_holo: int = 2,
                       chi_mps: int = 4, surface_col: int | None = None, restarts: int = 3,
                       rng: np.random.Generator | None = None, fit_opts: FitOptions | None = None) -> Trajectory:
    """Fit the exact evolved state at every step with a holo network and with an MPS.

    Holo fits start from the previous step's network and fall back to ``restarts`` random
    initializations when that warm start is not exact. Both errors are ``min_phase ||fit - psi||^2``
    (observables ``err_holo`` and ``err_mps``).
    """
    rng = rng if rng is not None else np.random.default_rng()
    L = spec.L
    layout = net_mod.build_layout(L, surface_col or L // 2, chi_holo)
    psi = np.asarray(psi0, dtype=complex) / np.linalg.norm(psi0)
    traj = Trajectory()
    tstep = _time_axis(spec, dt)
    prev = None
    for k in range(1, n_steps + 1):
        psi = _advance_oracle(psi, spec, dt, k, step_gates(spec, dt, k), "exact")
        _, err_mps = mps_mod.fit_mps_to_state(psi, chi_mps)
        best, err = None, np.inf
        if prev is not None:
            best, rep = fit_restart(psi, prev, fit_opts or FitOptions())
            err = rep.final_cost
        if err > 1e-12:
            net, rep = fit_network_to_state(psi, layout, restarts, 1e-12, rng, fit_opts)
            if rep.final_cost < err:
                best, err = net, rep.final_cost
        prev = best
        err = max(0.0, 2 - 2 * abs(np.vdot(psi, net_mod.to_statevector(best))))
        traj.record(k * tstep, {"err_holo": float(err), "err_mps": float(err_mps)})
    traj.final_network = prev
    return traj
