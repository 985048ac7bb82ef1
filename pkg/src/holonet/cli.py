"""Configuration-driven experiment harness: ``holonet <experiment> --config cfg.json``.

Every experiment is split into independent tasks keyed by a tuple of integers. A task's random
stream is ``make_rng(master_seed, key)``, so results do not depend on ``--jobs`` or scheduling.
Each run writes ``results.csv`` (header row, 17 significant digits) and ``manifest.json``.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import embed, evolve, manifold, moses
from . import mps as mps_mod
from . import network as net_mod
from . import oracle
from .errors import ConfigError, HolonetError
from .models import ModelSpec
from .tensor_core import haar_isometry, make_rng

EXPERIMENTS = (
    "random-entropy",
    "fit-state",
    "var-evolution",
    "tebd-bench",
    "embed-check",
    "optimizer-check",
    "moses-check",
)
TARGETS = ("ghz", "w", "haar", "matchgate", "clifford", "random-mps")
INITIAL = ("plus", "up", "haar", "rainbow")
CONSTRUCTIONS = ("ghz", "w", "random-mps", "folded", "rainbow", "matchgate")
PAIR_PSI2 = np.array([np.sqrt(1 / 5), np.sqrt(2 / 5), np.sqrt(2 / 5), 0.0], dtype=complex)
BELL = np.array([0, 1, -1, 0], dtype=complex) / np.sqrt(2)


@dataclass
class ExperimentConfig:
    experiment: str
    master_seed: int = 0
    L: list[int] = field(default_factory=lambda: [8])
    chi: list[int] = field(default_factory=lambda: [2])
    surface: str | int = "mid"
    model: dict = field(default_factory=lambda: {"kind": "tfim", "J": 1.0, "g": 1.0, "h": 0.0})
    dt: float = 0.25
    t_max: float = 1.0
    realizations: int = 1
    restarts: int = 1
    tol: float = 1e-12
    target: str = "ghz"
    initial: str = "plus"
    backend: str = "holo"
    chi_mps: int | None = None
    oracle_mode: str | None = "exact"
    constructions: list[str] = field(default_factory=lambda: list(CONSTRUCTIONS))
    output: str = "out"

    def validate(self) -> None:
        bad = []
        if self.experiment not in EXPERIMENTS:
            bad.append(f"experiment {self.experiment!r} not in {EXPERIMENTS}")
        if not self.L or any(not isinstance(x, int) or not 2 <= x <= 16 for x in self.L):
            bad.append("L values must be integers in [2, 16]")
        if not self.chi or any(not isinstance(x, int) or not 1 <= x <= 256 for x in self.chi):
            bad.append("chi values must be integers in [1, 256]")
        if not (self.surface in ("mid", "left", "right") or isinstance(self.surface, int)):
            bad.append("surface must be 'mid', 'left', 'right' or a column index")
        if self.model.get("kind") not in ("tfim", "kic"):
            bad.append("model.kind must be tfim or kic")
        if not 0 <= self.dt <= 10 or not 0 <= self.t_max <= 1000:
            bad.append("dt must lie in [0, 10] and t_max in [0, 1000]")
        if not 1 <= self.realizations <= 100000 or not 1 <= self.restarts <= 100000:
            bad.append("realizations and restarts must be positive")
        if not 0 <= self.tol < 1:
            bad.append("tol must lie in [0, 1)")
        if self.target not in TARGETS:
            bad.append(f"target must be one of {TARGETS}")
        if self.initial not in INITIAL:
            bad.append(f"initial must be one of {INITIAL}")
        if self.backend not in ("holo", "mps"):
            bad.append("backend must be holo or mps")
        if self.oracle_mode not in (None, "exact", "trotter"):
            bad.append("oracle_mode must be null, exact or trotter")
        if any(c not in CONSTRUCTIONS for c in self.constructions):
            bad.append(f"constructions must come from {CONSTRUCTIONS}")
        if bad:
            raise ConfigError("; ".join(bad))

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        if "experiment" not in d:
            raise ConfigError("config needs an 'experiment' key")
        try:
            cfg = cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> ExperimentConfig:
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(d)

    def model_spec(self, L: int) -> ModelSpec:
        m = self.model
        return ModelSpec(m["kind"], L, float(m.get("J", 1.0)), float(m.get("g", 1.0)), float(m.get("h", 0.0)))

    def surface_col(self, L: int) -> int:
        if self.surface == "mid":
            return L // 2
        if self.surface == "left":
            return 1
        if self.surface == "right":
            return L
        return int(self.surface)

    def n_steps(self) -> int:
        return int(round(self.t_max / self.dt)) if self.dt > 0 else int(round(self.t_max))


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(json.dumps(asdict(cfg), sort_keys=True).encode()).hexdigest()


# --------------------------------------------------------------------------- experiments


def _fidelity(psi, phi) -> float:
    return float(abs(np.vdot(psi, phi)) ** 2 / (np.vdot(psi, psi).real * np.vdot(phi, phi).real))


def _rainbow_state(L: int, pair) -> np.ndarray:
    psi = oracle.product_state([pair] * (L // 2))
    sigma = embed.rainbow_permutation(L)
    # position k (0-based) holds site sigma[k]; reorder axes into site order
    perm = np.argsort(np.array(sigma) - 1)
    return psi.reshape((2,) * L).transpose(perm).reshape(-1)


def _target_state(cfg, L, rng):
    if cfg.target == "ghz":
        return oracle.ghz_state(L), None
    if cfg.target == "w":
        return oracle.w_state(L), None
    if cfg.target == "haar":
        return oracle.haar_state(L, rng), None
    if cfg.target == "matchgate":
        return oracle.random_matchgate_state(L, rng)
    if cfg.target == "clifford":
        return oracle.random_clifford_state(L, rng), None
    return mps_mod.to_statevector(mps_mod.random_mps(L, 3, rng)), None


def _random_entropy_tasks(cfg):
    return [(L, chi, r) for L in cfg.L for chi in cfg.chi for r in range(cfg.realizations)]


def _random_entropy(cfg, key, rng):
    L, chi, r = key
    net = net_mod.random_network(net_mod.build_layout(L, cfg.surface_col(L), chi), rng)
    s2 = net_mod.renyi2_midpoint(net)
    s2_or = oracle.renyi2_dense(net_mod.to_statevector(net), L // 2) if L <= 12 else None
    return [{"L": L, "chi": chi, "realization": r, "S2": s2, "S2_oracle": s2_or, "page_value": oracle.page_value(L)}]


def _fit_state_tasks(cfg):
    return [(L, chi, r) for L in cfg.L for chi in cfg.chi for r in range(cfg.realizations)]


def _fit_state(cfg, key, rng):
    L, chi, r = key
    # the target depends on (L, instance) only, so every chi fits the same states
    psi, circ = _target_state(cfg, L, make_rng(cfg.master_seed, (L, 0, r, 1)))
    layout = net_mod.build_layout(L, cfg.surface_col(L), chi)
    net, rep = manifold.fit_network_to_state(psi, layout, cfg.restarts, cfg.tol, rng)
    emb = None
    if circ is not None:
        emb = _fidelity(psi, net_mod.to_statevector(embed.embed_matchgate_circuit(circ)))
    return [{"target": cfg.target, "L": L, "chi": chi, "instance": r, "restarts_used": rep.restart_index + 1,
             "final_error": rep.final_cost, "embed_fidelity": emb}]


def _var_evolution_tasks(cfg):
    return [(L, chi) for L in cfg.L for chi in cfg.chi]


def _initial_state(cfg, L, rng):
    if cfg.initial == "plus":
        return oracle.product_state([np.ones(2) / np.sqrt(2)], L)
    if cfg.initial == "up":
        return oracle.basis_state([0] * L)
    if cfg.initial == "haar":
        return oracle.haar_state(L, rng)
    return _rainbow_state(L, PAIR_PSI2)


def _var_evolution(cfg, key, rng):
    L, chi = key
    spec = cfg.model_spec(L)
    chi_mps = cfg.chi_mps or 2 * chi
    traj = evolve.variational_series(_initial_state(cfg, L, rng), spec, cfg.dt, cfg.n_steps(), chi, chi_mps,
                                     cfg.surface_col(L), cfg.restarts, rng)
    return [{"L": L, "chi": chi, "chi_mps": chi_mps, "t": t, "err_holo": o["err_holo"], "err_mps": o["err_mps"]}
            for t, o in zip(traj.times, traj.observables)]


def _tebd_bench_tasks(cfg):
    return [(L, chi) for L in cfg.L for chi in cfg.chi]


def _initial_mps(cfg, L, rng):
    if cfg.initial == "rainbow":
        raise ConfigError("the rainbow start has no MPS backend here")
    v = {"plus": np.ones(2) / np.sqrt(2), "up": np.array([1.0, 0.0])}.get(cfg.initial)
    if v is None:
        return mps_mod.mps_from_statevector(oracle.haar_state(L, rng))
    return mps_mod.MPS([v.reshape(1, 2, 1).astype(complex) for _ in range(L)], 0, 2)


def _initial_network(cfg, L, chi, rng):
    if cfg.initial == "rainbow":
        return embed.permutation_network(L, embed.rainbow_permutation(L), [PAIR_PSI2] * (L // 2), chi)
    return embed.embed_mps_boundary(_initial_mps(cfg, L, rng), chi)


def _tebd_bench(cfg, key, rng):
    L, chi = key
    spec = cfg.model_spec(L)
    names = ("sx", "s2", "norm")
    if cfg.backend == "mps":
        traj = evolve.tebd_run_mps(_initial_mps(cfg, L, rng), spec, cfg.dt, cfg.n_steps(),
                                   None if chi >= 2 ** (L // 2) else chi, names, cfg.oracle_mode)
    else:
        traj = evolve.tebd_run(_initial_network(cfg, L, chi, rng), spec, cfg.dt, cfg.n_steps(), names,
                               cfg.oracle_mode)
    rows = []
    for k, (t, o) in enumerate(zip(traj.times, traj.observables)):
        oo = traj.oracle_observables[k] if traj.oracle_observables else {}
        fid = traj.fidelity_vs_oracle[k] if traj.fidelity_vs_oracle else None
        rows.append({"L": L, "chi": chi, "t": t, "sx_tebd": o["sx"], "sx_oracle": oo.get("sx"),
                     "S2_tebd": o["s2"], "S2_oracle": oo.get("s2"), "fidelity": fid, "norm": o["norm"]})
    return rows


def _embed_check_tasks(cfg):
    return [(L, CONSTRUCTIONS.index(c)) for L in cfg.L for c in cfg.constructions]


def _embed_check(cfg, key, rng):
    L, name = key[0], CONSTRUCTIONS[key[1]]
    s2_net = None
    if name == "ghz":
        chi, psi = 2, oracle.ghz_state(L)
        net = embed.embed_mps_boundary(mps_mod.ghz_mps(L), chi)
    elif name == "w":
        chi, psi = 2, oracle.w_state(L)
        net = embed.embed_mps_boundary(mps_mod.w_mps(L), chi)
    elif name == "random-mps":
        m = mps_mod.random_mps(L, 3, rng)
        chi, psi = 3, mps_mod.to_statevector(m)
        net = embed.embed_mps_boundary(m, chi)
    elif name == "folded":
        m = mps_mod.random_mps(L, 2, rng)
        chi, psi = 4, mps_mod.to_statevector(m)
        net = embed.embed_mps_folded(m, L // 2, chi)
    elif name == "rainbow":
        chi, psi = 4, _rainbow_state(L, BELL)
        net = embed.permutation_network(L, embed.rainbow_permutation(L), [BELL] * (L // 2), chi)
        s2_net = oracle.renyi2_dense(net_mod.to_statevector(net), L // 2)
    else:
        psi, circ = oracle.random_matchgate_state(L, rng)
        chi, net = 2, embed.embed_matchgate_circuit(circ)
    phi = net_mod.to_statevector(net)
    return [{"construction": name, "L": L, "chi": chi, "error": max(0.0, 1 - _fidelity(psi, phi)),
             "S2": s2_net, "S2_oracle": oracle.renyi2_dense(psi, L // 2), "violations": len(net_mod.validate(net))}]


def _optimizer_check_tasks(cfg):
    return [(0,), (1,), (2,), (3,)]


def _cplx(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def _optimizer_check(cfg, key, rng):
    which = key[0]
    if which == 0:
        violations = 0
        for _ in range(cfg.realizations):
            e = _cplx(rng, 8, 4)
            w = manifold.procrustes_update(e)
            best = np.trace(w.conj().T @ e).real
            vals = [np.trace(haar_isometry(8, 4, rng).conj().T @ e).real for _ in range(1000)]
            violations += int(np.sum(np.array(vals) > best + 1e-12))
        return [{"check": "procrustes_violations", "value": violations, "residual": None}]
    if which in (1, 2):
        n = 12
        a = _cplx(rng, n, n)
        a = a + a.conj().T
        lam = np.linalg.eigvalsh(a)[0]
        cost = lambda x: float(np.vdot(x.blocks[0], a @ x.blocks[0]).real)
        grad = lambda x: [2 * a @ x.blocks[0]]
        v0 = _cplx(rng, n)
        x0 = manifold.ManifoldPoint([v0 / np.linalg.norm(v0)], [manifold.SPHERE])
        if which == 1:
            _, rep = manifold.riemannian_cg(cost, grad, x0, manifold.OptOptions(max_iter=5000, gtol=1e-9))
            name = "cg_rayleigh_error"
        else:
            hess = lambda x, v: [2 * a @ v[0]]
            _, rep = manifold.trust_region(cost, grad, hess, x0, manifold.TROptions(max_iter=200, gtol=1e-9))
            name = "tr_rayleigh_error"
        return [{"check": name, "value": abs(rep.final_cost - lam), "residual": rep.max_residual}]
    L = cfg.L[0]
    net = net_mod.random_network(net_mod.build_layout(L, cfg.surface_col(L), cfg.chi[0]), rng)
    ref = oracle.haar_state(L, rng)
    _, envs = manifold.overlap_and_environments(net, ref)
    worst, eps = 0.0, 1e-6
    for k, t0 in net.tensors.items():
        dt = _cplx(rng, *t0.shape)

        def f(t):
            m = net.copy()
            m.tensors[k] = t
            return np.vdot(ref, net_mod.to_statevector(m)).real

        fd = (f(t0 + eps * dt) - f(t0 - eps * dt)) / (2 * eps)
        an = np.sum(np.conj(dt) * envs[k]).real
        worst = max(worst, abs(fd - an) / max(abs(an), 1e-12))
    return [{"check": "env_gradient_fd_rel", "value": worst, "residual": None}]


def _moses_check_tasks(cfg):
    return [(0, 0), (0, 1)] + [(1, r) for r in range(cfg.realizations)] + [(2, r) for r in range(cfg.realizations)]


def _moses_check(cfg, key, rng):
    kind, r = key
    L = cfg.L[0]
    if kind == 0:
        if r == 0:
            vs = [v / np.linalg.norm(v) for v in (_cplx(rng, 2) for _ in range(L))]
            m = mps_mod.MPS([v.reshape(1, 2, 1) for v in vs], 0, 2)
        else:
            m = mps_mod.ghz_mps(L)
        net = embed.embed_mps_boundary(m, cfg.chi[0])
        out, reps = moses.sweep_surface(net, L)
        cum = float(np.prod([rep.fidelity_estimate for rep in reps]))
        direct = _fidelity(net_mod.to_statevector(net), net_mod.to_statevector(out))
        return [{"case": "sweep-" + ("product" if r == 0 else "ghz"), "instance": r, "plain": cum,
                 "refined": direct, "baseline": None}]
    if kind == 1:
        theta = _cplx(rng, 2, 2, 2, 2, 2)
        _, _, s = moses.optimize_disentangler(theta, (0, 2))
        return [{"case": "disentangler", "instance": r, "plain": s, "refined": None,
                 "baseline": moses.renyi_half(theta, (0, 2))}]
    s = 1 + r % (L - 1)
    net = net_mod.random_network(net_mod.build_layout(L, s, cfg.chi[0]), rng)
    _, plain = moses.shift_surface(net, "right")
    _, refined = moses.shift_surface(net, "right", refine=True)
    return [{"case": "refinement", "instance": r, "plain": plain.fidelity_estimate,
             "refined": refined.fidelity_estimate, "baseline": None}]


REGISTRY = {
    "random-entropy": (_random_entropy_tasks, _random_entropy,
                       ["L", "chi", "realization", "S2", "S2_oracle", "page_value"]),
    "fit-state": (_fit_state_tasks, _fit_state,
                  ["target", "L", "chi", "instance", "restarts_used", "final_error", "embed_fidelity"]),
    "var-evolution": (_var_evolution_tasks, _var_evolution, ["L", "chi", "chi_mps", "t", "err_holo", "err_mps"]),
    "tebd-bench": (_tebd_bench_tasks, _tebd_bench,
                   ["L", "chi", "t", "sx_tebd", "sx_oracle", "S2_tebd", "S2_oracle", "fidelity", "norm"]),
    "embed-check": (_embed_check_tasks, _embed_check,
                    ["construction", "L", "chi", "error", "S2", "S2_oracle", "violations"]),
    "optimizer-check": (_optimizer_check_tasks, _optimizer_check, ["check", "value", "residual"]),
    "moses-check": (_moses_check_tasks, _moses_check, ["case", "instance", "plain", "refined", "baseline"]),
}


# --------------------------------------------------------------------------- runner


def _execute(payload):
    cfg_dict, key = payload
    cfg = ExperimentConfig(**cfg_dict)
    _, fn, _ = REGISTRY[cfg.experiment]
    t0 = time.perf_counter()
    rows = fn(cfg, key, make_rng(cfg.master_seed, key))
    return rows, time.perf_counter() - t0


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path: Path, columns: list[str], rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["task_seed", *columns])
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in ["task_seed", *columns]])


def read_csv(path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def _version() -> str:
    from importlib.metadata import PackageNotFoundError, version

    try:
        return version("artifact")
    except PackageNotFoundError:
        return "unknown"


class RunFailed(RuntimeError):
    def __init__(self, message, rows, tasks):
        super().__init__(message)
        self.rows, self.tasks = rows, tasks


def run_config(cfg: ExperimentConfig, jobs: int = 1) -> tuple[list[dict], list[dict]]:
    """Run every task in key order. Returns ``(rows, task records)``; each row carries its
    task's seed string. A numeric failure raises ``RunFailed`` holding the finished tasks."""
    cfg.validate()
    tasks_fn, _, _ = REGISTRY[cfg.experiment]
    keys = tasks_fn(cfg)
    payloads = [(asdict(cfg), k) for k in keys]
    rows, records = [], []

    def collect(results):
        for key, (task_rows, wall) in zip(keys, results):
            seed = ":".join(str(x) for x in (cfg.master_seed, *key))
            for r in task_rows:
                r["task_seed"] = seed
            rows.extend(task_rows)
            records.append({"key": list(key), "seed": seed, "wall_time": wall})

    try:
        if jobs > 1 and len(keys) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                collect(pool.map(_execute, payloads))
        else:
            collect(map(_execute, payloads))
    except (HolonetError, FloatingPointError, np.linalg.LinAlgError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise RunFailed(f"{type(exc).__name__}: {exc}", rows, records) from exc
    return rows, records


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_outputs(cfg: ExperimentConfig, out_dir, rows, records, status: str) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "results.csv"
    write_csv(csv_path, REGISTRY[cfg.experiment][2], rows)
    manifest = {
        "experiment": cfg.experiment,
        "config": asdict(cfg),
        "config_hash": config_hash(cfg),
        "code_version": _version(),
        "status": status,
        "tasks": records,
        "files": [{"name": csv_path.name, "bytes": csv_path.stat().st_size, "sha256": _sha256(csv_path)}],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return csv_path


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="holonet", description="Run holographic tensor network experiments.")
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", required=True, help="JSON experiment config")
    ap.add_argument("--jobs", type=int, default=1, help="worker processes")
    ap.add_argument("--out", default=None, help="output directory (overrides the config)")
    args = ap.parse_args(argv)
    try:
        cfg = ExperimentConfig.load(args.config)
        if cfg.experiment != args.experiment:
            raise ConfigError(f"config is for {cfg.experiment!r}, not {args.experiment!r}")
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 2
    out_dir = args.out or cfg.output
    try:
        rows, records = run_config(cfg, args.jobs)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 2
    except RunFailed as exc:
        write_outputs(cfg, out_dir, exc.rows, exc.tasks, f"failed: {exc}")
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    path = write_outputs(cfg, out_dir, rows, records, "ok")
    print(f"wrote {len(rows)} rows to {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
