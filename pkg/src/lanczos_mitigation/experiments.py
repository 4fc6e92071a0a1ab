"""Experiment configuration and the batch drivers behind the command line.

Every driver writes tidy CSV (one observation per row, each carrying the
seed, the config hash and a method tag) plus a JSON record.  Repetitions
run in a thread pool over pre-split seeds and rows are written in
repetition order, so a fixed seed gives byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .krylov import (N_BOOTSTRAP, DegenerateMomentsWarning, MitigatedEstimate, constrained_select,
                     cube_root, delta_h_profile, lanczos_general, lanczos_m2, measure_moments, wls_average)
from .models import ModelSpec, ground_energy, load_pauli_file
from .pauli import PauliSum, count_terms_report, powers
from .seeding import split_seed
from .simulator import Circuit, NoiseModel, run_circuit, run_statevector
from .vqe import AnsatzSpec, VqeConfig, build_ansatz, run_vqe
from .zne import ZneConfig, budget_matched_compare, extrapolate, fold_and_measure, points_to_rows

SCHEMA_VERSION = 1
ESTIMATORS = ("bare", "lanczos", "cube_root", "wls", "fixed_ratio")


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration (exit code 2)."""


@dataclass(frozen=True)
class MitigationSettings:
    m: int = 2
    sigma_max: float | None = None
    n_repeat: int = 5
    estimators: tuple[str, ...] = ESTIMATORS
    n_resamples: int = N_BOOTSTRAP
    sigma_max_grid: tuple[float, ...] = (0.02, 0.05, 0.1, 0.2, 0.5, 1.0)

    def __post_init__(self) -> None:
        object.__setattr__(self, "estimators", tuple(self.estimators))
        object.__setattr__(self, "sigma_max_grid", tuple(float(s) for s in self.sigma_max_grid))
        unknown = set(self.estimators) - set(ESTIMATORS)
        if unknown:
            raise ConfigError(f"unknown estimators {sorted(unknown)}; choose from {ESTIMATORS}")
        if self.m < 2:
            raise ConfigError("Krylov order m must be at least 2")
        if self.n_repeat < 1 or self.n_resamples < 2:
            raise ConfigError("n_repeat must be positive and n_resamples at least 2")


@dataclass(frozen=True)
class SweepSettings:
    """Grid over ``J'/J`` for the tetrahedron, or a list of Hamiltonian files."""

    j_prime: tuple[float, ...] = ()
    files: tuple[str, ...] = ()
    optimise_noiseless: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "j_prime", tuple(float(x) for x in self.j_prime))
        object.__setattr__(self, "files", tuple(self.files))
        if self.j_prime and self.files:
            raise ConfigError("sweep takes either j_prime values or files, not both")


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelSpec = field(default_factory=ModelSpec)
    ansatz: AnsatzSpec = field(default_factory=lambda: AnsatzSpec(4, 3))
    vqe: VqeConfig = field(default_factory=VqeConfig)
    noise: NoiseModel | None = None
    mitigation: MitigationSettings = field(default_factory=MitigationSettings)
    zne: ZneConfig = field(default_factory=ZneConfig)
    sweep: SweepSettings = field(default_factory=SweepSettings)
    scaling_files: tuple[str, ...] = ()
    n_repetitions: int = 200
    n_shots: int | None = 8192
    seed: int = 0
    out_dir: str = "results"
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self) -> None:
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {self.schema_version} (expected {SCHEMA_VERSION})")
        if self.n_repetitions < 1:
            raise ConfigError("n_repetitions must be positive")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        for p in [self.model.path, *self.sweep.files, *self.scaling_files]:
            if p is not None and not Path(p).is_file():
                raise ConfigError(f"referenced file does not exist: {p}")

    # -- serialisation ------------------------------------------------------

    def to_dict(self) -> dict:
        d = asdict(self)
        d["noise"] = None if self.noise is None else self.noise.to_dict()
        d["zne"] = self.zne.to_dict()
        return json.loads(json.dumps(d))

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | None = None) -> ExperimentConfig:
        d = dict(d)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")

        def rel(p):
            if p is None or base_dir is None or Path(p).is_absolute():
                return p
            return os.path.normpath(base_dir / p)

        try:
            if "model" in d:
                m = dict(d["model"])
                m["path"] = rel(m.get("path"))
                d["model"] = ModelSpec(**m)
            if "ansatz" in d:
                d["ansatz"] = AnsatzSpec(**d["ansatz"])
            if "vqe" in d:
                d["vqe"] = VqeConfig.from_dict(d["vqe"])
            if d.get("noise") is not None:
                d["noise"] = NoiseModel.from_dict(d["noise"])
            if "mitigation" in d:
                d["mitigation"] = MitigationSettings(**d["mitigation"])
            if "zne" in d:
                d["zne"] = ZneConfig(**d["zne"])
            if "sweep" in d:
                s = dict(d["sweep"])
                s["files"] = [rel(p) for p in s.get("files", ())]
                d["sweep"] = SweepSettings(**s)
            if "scaling_files" in d:
                d["scaling_files"] = tuple(rel(p) for p in d["scaling_files"])
            return cls(**d)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path: str | Path) -> ExperimentConfig:
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a JSON object")
        if "schema_version" not in data:
            raise ConfigError(f"{path}: missing schema_version")
        return cls.from_dict(data, path.parent)

    @property
    def config_hash(self) -> str:
        d = self.to_dict()
        d.pop("out_dir")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def exact(self) -> ExperimentConfig:
        """Infinite-shot variant of this configuration."""
        return replace(self, n_shots=None, vqe=replace(self.vqe, n_shots=None),
                       zne=replace(self.zne, n_shots=None))

    def hamiltonian(self) -> PauliSum:
        return self.model.build()


# -- output helpers ---------------------------------------------------------------

def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return v


class Recorder:
    """Writes CSV/JSON under ``out_dir``; rows gain ``seed`` and ``config_hash``."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.out = Path(cfg.out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.written: list[Path] = []

    def csv(self, name: str, rows: Sequence[dict], columns: Sequence[str] | None = None) -> Path:
        rows = [{**r, "seed": self.cfg.seed, "config_hash": self.cfg.config_hash} for r in rows]
        if columns is None:
            columns = list(rows[0]) if rows else ["seed", "config_hash", "method"]
        else:
            columns = [*columns, "seed", "config_hash"]
        path = self.out / name
        with path.open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
            w.writeheader()
            for r in rows:
                w.writerow({k: _fmt(r.get(k)) for k in columns})
        self.written.append(path)
        return path

    def json(self, name: str, record: dict) -> Path:
        record = {**record, "seed": self.cfg.seed, "config_hash": self.cfg.config_hash}
        path = self.out / name
        path.write_text(json.dumps(_jsonable(record), indent=2, sort_keys=True) + "\n")
        self.written.append(path)
        return path


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def parallel_map(fn: Callable, items: Iterable, threads: int = 1) -> list:
    items = list(items)
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# -- theta files ---------------------------------------------------------------------

def save_theta(path: Path, theta: np.ndarray, circuit: Circuit, energy, cfg: ExperimentConfig) -> None:
    record = {"theta": [float(t) for t in theta], "energy": energy.value, "stderr": energy.stderr,
              "ansatz": asdict(cfg.ansatz), "circuit": circuit.to_dict(),
              "seed": cfg.seed, "config_hash": cfg.config_hash}
    path.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")


def load_theta(path: str | Path, spec: AnsatzSpec) -> np.ndarray:
    try:
        data = json.loads(Path(path).read_text())
        theta = np.asarray(data["theta"], dtype=float)
    except FileNotFoundError as exc:
        raise ConfigError(f"theta file not found: {path}") from exc
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: not a theta file ({exc})") from exc
    if theta.shape != (spec.n_parameters,):
        raise ConfigError(f"{path}: {theta.size} angles, ansatz needs {spec.n_parameters}")
    return theta


# -- mitigation of a single state -------------------------------------------------------

def mitigate_state(rho, h: PauliSum, cfg: ExperimentConfig, seed: int,
                   h_powers: Sequence[PauliSum] | None = None) -> dict[str, MitigatedEstimate]:
    """Every configured estimator on one prepared state.

    ``bare``, ``lanczos``, ``cube_root`` and ``fixed_ratio`` share one
    moment measurement; ``wls`` combines ``n_repeat`` independent order-2
    runs (the first of which is the shared one).
    """
    s = cfg.mitigation
    m = s.m
    readout = None if cfg.noise is None else cfg.noise.readout
    hp = h_powers or powers(h, 2 * m - 1)
    ms = measure_moments(rho, h, m, cfg.n_shots, readout, seed=split_seed(seed, 0), h_powers=hp)
    out: dict[str, MitigatedEstimate] = {}
    lanczos = lanczos_m2(ms, s.n_resamples, seed=seed)
    for name in s.estimators:
        if name == "bare":
            out[name] = MitigatedEstimate(ms.estimate(1), "bare", (1.0, 0.0), 1.0, bool(ms.is_degenerate()))
        elif name == "lanczos":
            out[name] = lanczos if m == 2 else lanczos_general(ms, m, s.n_resamples, seed=seed)
        elif name == "cube_root":
            out[name] = cube_root(ms, s.n_resamples, seed=seed)
        elif name == "fixed_ratio":
            cap = math.inf if s.sigma_max is None else s.sigma_max
            out[name] = constrained_select(ms, cap, s.n_resamples, seed=seed)
        elif name == "wls":
            runs = [lanczos]
            for k in range(1, s.n_repeat):
                ms_k = measure_moments(rho, h, 2, cfg.n_shots, readout, seed=split_seed(seed, k), h_powers=hp)
                runs.append(lanczos_m2(ms_k, s.n_resamples, seed=split_seed(seed, k)))
            out[name] = wls_average(runs)
    return out


def _estimate_row(method: str, est: MitigatedEstimate, **extra) -> dict:
    d = est.to_dict()
    return {"method": method, "energy": d["energy"], "stderr": d["stderr"], "a0": d["a0"], "a1": d["a1"],
            "a0_over_a1": d["a0_over_a1"], "condition_value": d["condition_value"],
            "degenerate": d["degenerate"], "flags": ";".join(d["flags"]), **extra}


ESTIMATE_COLUMNS = ["method", "energy", "stderr", "a0", "a1", "a0_over_a1", "condition_value", "degenerate", "flags"]


# -- commands ------------------------------------------------------------------------------

def cmd_run_vqe(cfg: ExperimentConfig, threads: int = 1) -> dict:
    h = cfg.hamiltonian()
    if h.n_qubits != cfg.ansatz.n_qubits:
        raise ConfigError(f"model has {h.n_qubits} qubits, ansatz {cfg.ansatz.n_qubits}")
    vcfg = replace(cfg.vqe, seed=cfg.seed)
    res = run_vqe(h, cfg.ansatz, vcfg, cfg.noise)
    rec = Recorder(cfg)
    circuit = build_ansatz(cfg.ansatz, res.theta)
    path = rec.out / "theta.json"
    save_theta(path, res.theta, circuit, res.energy, cfg)
    rec.written.append(path)
    rows = [{**r, "method": "spsa"} for r in res.trace_rows()]
    rec.csv("vqe_trace.csv", rows, ["restart", "step", "energy", "stderr", "method"])
    rows = [{"restart": i, "energy": r.energy.value, "stderr": r.energy.stderr, "method": "spsa"}
            for i, r in enumerate(res.restarts)]
    rec.csv("vqe_restarts.csv", rows, ["restart", "energy", "stderr", "method"])
    return {"energy": res.energy.value, "stderr": res.energy.stderr, "e0": ground_energy(h),
            "files": [str(p) for p in rec.written]}


def _prepared_state(cfg: ExperimentConfig, theta_path):
    theta = load_theta(theta_path or Path(cfg.out_dir) / "theta.json", cfg.ansatz)
    circuit = build_ansatz(cfg.ansatz, theta)
    return circuit, run_circuit(circuit, cfg.noise)


def cmd_mitigate(cfg: ExperimentConfig, theta_path=None, threads: int = 1) -> dict:
    h = cfg.hamiltonian()
    _, rho = _prepared_state(cfg, theta_path)
    ests = mitigate_state(rho, h, cfg, cfg.seed)
    rec = Recorder(cfg)
    rec.csv("mitigate.csv", [_estimate_row(k, v) for k, v in ests.items()], ESTIMATE_COLUMNS)
    record = {"e0": ground_energy(h), "n_shots": cfg.n_shots,
              "estimates": {k: v.to_dict() for k, v in ests.items()}}
    rec.json("mitigate.json", record)
    return record


def cmd_histogram(cfg: ExperimentConfig, theta_path=None, threads: int = 1) -> dict:
    h = cfg.hamiltonian()
    _, rho = _prepared_state(cfg, theta_path)
    s = cfg.mitigation
    hp = powers(h, 2 * s.m - 1)
    readout = None if cfg.noise is None else cfg.noise.readout

    def one(rep: int) -> list[dict]:
        seed = split_seed(cfg.seed, rep)
        ms = measure_moments(rho, h, 2, cfg.n_shots, readout, seed=seed, h_powers=hp)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateMomentsWarning)
            lz = lanczos_m2(ms, s.n_resamples, seed=seed)
        return [
            {"repetition": rep, "method": "bare", "energy": ms.mean, "stderr": float(ms.stderrs[1])},
            {"repetition": rep, "method": "lanczos", "energy": lz.value, "stderr": lz.stderr},
        ]

    rows = [r for chunk in parallel_map(one, range(cfg.n_repetitions), threads) for r in chunk]
    rec = Recorder(cfg)
    rec.csv("histogram.csv", rows, ["repetition", "method", "energy", "stderr"])
    summary = histogram_summary(rows, ground_energy(h))
    rec.json("histogram_summary.json", summary)
    return summary


def histogram_summary(rows: Sequence[dict], e0: float) -> dict:
    out = {"e0": e0}
    for method in ("bare", "lanczos"):
        e = np.array([r["energy"] for r in rows if r["method"] == method])
        s = np.array([r["stderr"] for r in rows if r["method"] == method])
        sem = float(e.std(ddof=1) / math.sqrt(e.size)) if e.size > 1 else 0.0
        below = e < e0
        out[method] = {"mean": float(e.mean()), "sem": sem, "median_stderr": float(np.median(s)),
                       "n": int(e.size), "n_below_e0": int(below.sum()),
                       "n_below_e0_with_large_stderr": int(np.sum(s[below] > np.median(s)))}
    return out


def cmd_zne(cfg: ExperimentConfig, theta_path=None, threads: int = 1) -> dict:
    h = cfg.hamiltonian()
    circuit, _ = _prepared_state(cfg, theta_path)
    hp = powers(h, 3)
    zc = cfg.zne

    def one(rep: int) -> list[dict]:
        seed = split_seed(cfg.seed, rep)
        rows = []
        for k, est in enumerate(("bare", "lanczos")):
            pts = fold_and_measure(circuit, h, cfg.noise, zc, est, seed=split_seed(seed, k),
                                   h_powers=hp, n_resamples=cfg.mitigation.n_resamples)
            x = extrapolate(pts, zc.degree)
            rows += [{**r, "repetition": rep} for r in points_to_rows(pts)]
            rows.append({"repetition": rep, "factor": 0, "energy": x.value, "stderr": x.stderr,
                         "method": f"{est}+zne"})
        return rows

    n_rep = cfg.n_repetitions
    rows = [r for chunk in parallel_map(one, range(n_rep), threads) for r in chunk]
    rec = Recorder(cfg)
    rec.csv("zne_points.csv", rows, ["repetition", "factor", "method", "energy", "stderr"])
    psi = run_statevector(circuit)
    noiseless = float(np.real(np.vdot(psi, h.to_matrix() @ psi)))
    record = {"noiseless_energy": noiseless, "e0": ground_energy(h), "zne": zc.to_dict()}
    for method in ("bare+zne", "lanczos+zne"):
        e = np.array([r["energy"] for r in rows if r["method"] == method])
        record[method] = {"mean": float(e.mean()), "std": float(e.std(ddof=1)) if e.size > 1 else 0.0, "n": int(e.size)}
    if zc.n_shots is not None:
        cmp_ = budget_matched_compare(circuit, h, cfg.noise, zc, n_repetitions=min(n_rep, 50),
                                      seed=split_seed(cfg.seed, 2 ** 32), n_resamples=cfg.mitigation.n_resamples)
        record["budget_matched"] = cmp_.summary()
    rec.json("zne_summary.json", record)
    return record


def _sweep_models(cfg: ExperimentConfig) -> list[tuple[float | str, PauliSum]]:
    sw = cfg.sweep
    if sw.j_prime:
        return [(jp, ModelSpec("heisenberg_tetrahedron", cfg.model.J, jp * cfg.model.J).build()) for jp in sw.j_prime]
    if sw.files:
        return [(f, load_pauli_file(f)) for f in sw.files]
    raise ConfigError("sweep needs sweep.j_prime or sweep.files")


def cmd_sweep(cfg: ExperimentConfig, threads: int = 1) -> dict:
    """VQE at every grid point, then bare, order-2 and constrained estimates.

    The constrained estimates use ``mitigation.sigma_max`` when set and the
    spacing-profile recommendation otherwise.
    """
    points = _sweep_models(cfg)
    s = cfg.mitigation
    readout = None if cfg.noise is None else cfg.noise.readout

    def one(item):
        i, (param, h) = item
        seed = split_seed(cfg.seed, i)
        vnoise = None if cfg.sweep.optimise_noiseless else cfg.noise
        vcfg = replace(cfg.vqe, seed=seed, n_shots=None if vnoise is None else cfg.vqe.n_shots)
        res = run_vqe(h, cfg.ansatz, vcfg, vnoise)
        rho = run_circuit(build_ansatz(cfg.ansatz, res.theta), cfg.noise)
        ms = measure_moments(rho, h, 2, cfg.n_shots, readout, seed=split_seed(seed, 1))
        return param, h, ms

    results = parallel_map(one, enumerate(points), threads)
    keyed = {float(i): ms for i, (_, _, ms) in enumerate(results)}
    profile = delta_h_profile(keyed, s.sigma_max_grid, s.n_resamples, seed=cfg.seed)
    cap = s.sigma_max if s.sigma_max is not None else profile.recommended
    rows = []
    for i, (param, h, ms) in enumerate(results):
        seed = split_seed(cfg.seed, i)
        e0 = ground_energy(h)
        ests = {"bare": MitigatedEstimate(ms.estimate(1), "bare"), "lanczos": lanczos_m2(ms, s.n_resamples, seed)}
        if cap is not None:
            ests["fixed_ratio"] = constrained_select(ms, cap, s.n_resamples, seed)
        for k, v in ests.items():
            rows.append({"point": i, "parameter": param, "e0_oracle": e0, "method": k,
                         "energy": v.value, "stderr": v.stderr})
    rec = Recorder(cfg)
    rec.csv("sweep.csv", rows, ["point", "parameter", "e0_oracle", "method", "energy", "stderr"])
    rec.csv("delta_h.csv", [{**r, "method": "fixed_ratio"} for r in profile.rows()],
            ["sigma_max", "delta_h_E", "mean_stderr", "method"])
    rec_delta = (profile.delta[profile.sigma_max.index(profile.recommended)]
                 if profile.recommended is not None else None)
    record = {"bare_delta_h_E": profile.bare_delta, "recommended_sigma_max": profile.recommended,
              "recommended_delta_h_E": rec_delta, "sigma_max_used": cap, "n_points": len(results)}
    rec.json("sweep_summary.json", record)
    return record


def cmd_scaling(cfg: ExperimentConfig, files: Sequence[str] = (), threads: int = 1) -> dict:
    files = list(files) or list(cfg.scaling_files)
    if not files:
        raise ConfigError("scaling needs Hamiltonian files (config scaling_files or positional paths)")
    for f in files:
        if not Path(f).is_file():
            raise ConfigError(f"referenced file does not exist: {f}")
    reports = parallel_map(lambda f: (f, count_terms_report(load_pauli_file(f))), files, threads)
    rows = []
    for f, rep in reports:
        exps = rep.exponents or (None, None, None)
        rows.append({"file": f, "method": "count", "n_qubits": rep.n_qubits,
                     "n_h": rep.counts[0], "n_h2": rep.counts[1], "n_h3": rep.counts[2],
                     "lanczos_strings": rep.lanczos_strings,
                     "y_h": exps[0], "y_h2": exps[1], "y_h3": exps[2]})
    rec = Recorder(cfg)
    rec.csv("scaling.csv", rows, ["file", "method", "n_qubits", "n_h", "n_h2", "n_h3", "lanczos_strings",
                                  "y_h", "y_h2", "y_h3"])
    return {"n_files": len(rows)}
