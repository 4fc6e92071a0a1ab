"""RyRz hardware-efficient ansatz, SPSA and the multistart VQE protocol."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Protocol

import numpy as np

from .pauli import PauliSum
from .seeding import as_generator, split_seed
from .simulator import (Circuit, NoiseModel, ShotEstimate, cz, run_circuit, run_statevector, ry, rz,
                        sampled_expectation)


@dataclass(frozen=True)
class AnsatzSpec:
    n_qubits: int
    n_entangling_layers: int = 1

    def __post_init__(self) -> None:
        if self.n_qubits < 1 or self.n_entangling_layers < 0:
            raise ValueError("invalid ansatz size")

    @property
    def n_parameters(self) -> int:
        return 2 * self.n_qubits * (self.n_entangling_layers + 1)


def build_ansatz(spec: AnsatzSpec, theta) -> Circuit:
    """Rotation layer, then per entangling layer a linear CZ chain and another rotation layer.

    ``theta`` is laid out per rotation layer as ``[ry_0, rz_0, ry_1, rz_1, ...]``.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (spec.n_parameters,):
        raise ValueError(f"expected {spec.n_parameters} angles, got {theta.size}")
    n = spec.n_qubits
    gates = []
    for layer in range(spec.n_entangling_layers + 1):
        if layer > 0:
            gates += [cz(q, q + 1) for q in range(n - 1)]
        block = theta[2 * n * layer: 2 * n * (layer + 1)]
        for q in range(n):
            gates += [ry(q, block[2 * q]), rz(q, block[2 * q + 1])]
    return Circuit(n, tuple(gates))


class Objective(Protocol):
    def __call__(self, theta: np.ndarray, rng: np.random.Generator, shot_factor: int = 1) -> ShotEstimate: ...


@dataclass
class EnergyObjective:
    """``<H>`` of the ansatz state, exact (``n_shots=None``) or shot-sampled.

    The noiseless exact path contracts a statevector with the dense
    Hamiltonian, which is what makes long optimisations affordable.
    """

    h: PauliSum
    spec: AnsatzSpec
    noise: NoiseModel | None = None
    n_shots: int | None = None
    n_evaluations: int = field(default=0, init=False)

    def __post_init__(self) -> None:
        self._dense = self.h.to_matrix()

    def state(self, theta):
        return run_circuit(build_ansatz(self.spec, theta), self.noise)

    def __call__(self, theta, rng=None, shot_factor: int = 1) -> ShotEstimate:
        self.n_evaluations += 1
        if self.noise is None and self.n_shots is None:
            psi = run_statevector(build_ansatz(self.spec, theta))
            return ShotEstimate(float(np.real(np.vdot(psi, self._dense @ psi))))
        rho = self.state(theta)
        readout = None if self.noise is None else self.noise.readout
        shots = None if self.n_shots is None else self.n_shots * shot_factor
        return sampled_expectation(rho, self.h, shots, readout, as_generator(rng))


@dataclass(frozen=True)
class SpsaSettings:
    """Gains ``a_k = a/(k+1+A)^alpha`` and ``c_k = c/(k+1)^gamma``.

    ``a=None`` calibrates ``a`` so the first step moves each parameter by
    about ``target_step`` radians, from ``n_calibration`` probe gradients.
    ``A=None`` means ``0.1 * n_steps``.
    """

    a: float | None = None
    c: float = 0.1
    A: float | None = None
    alpha: float = 0.602
    gamma: float = 0.101
    target_step: float = 0.1
    n_calibration: int = 10
    n_last: int = 10
    reeval_factor: int = 5


@dataclass(frozen=True)
class VqeConfig:
    n_init: int = 5
    n_vqe: int = 1
    n_steps: int = 100
    n_shots: int | None = 8192
    spsa: SpsaSettings = field(default_factory=SpsaSettings)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_init < 1 or self.n_vqe < 1 or self.n_steps < 0:
            raise ValueError("n_init and n_vqe must be positive, n_steps non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> VqeConfig:
        d = dict(d)
        if "spsa" in d:
            d["spsa"] = SpsaSettings(**d["spsa"])
        return cls(**d)


@dataclass
class SpsaResult:
    theta: np.ndarray
    energy: ShotEstimate
    trace: list[tuple[int, float, float]]  # (step, energy, stderr)
    best_so_far: list[float]
    a: float


def _calibrate_a(objective, theta, rng, s: SpsaSettings, A: float) -> float:
    mags = []
    for _ in range(s.n_calibration):
        delta = rng.choice([-1.0, 1.0], size=theta.size)
        fp = objective(theta + s.c * delta, rng).value
        fm = objective(theta - s.c * delta, rng).value
        mags.append(abs(fp - fm) / (2 * s.c))
    avg = float(np.mean(mags))
    if avg == 0:
        return s.target_step * (A + 1) ** s.alpha
    return s.target_step * (A + 1) ** s.alpha / avg


def spsa_minimize(objective, theta0, n_steps: int, settings: SpsaSettings = SpsaSettings(), rng=None) -> SpsaResult:
    """Two-sided SPSA with Rademacher perturbations.

    After the last step the final ``n_last`` iterates are re-evaluated with
    ``reeval_factor`` times the shots and the lowest one is returned.
    """
    rng = as_generator(rng)
    theta = np.array(theta0, dtype=float)
    if n_steps == 0:
        return SpsaResult(theta, objective(theta, rng), [], [], 0.0)
    s = settings
    A = 0.1 * n_steps if s.A is None else s.A
    a = _calibrate_a(objective, theta, rng, s, A) if s.a is None else s.a
    trace, best, history = [], [], []
    for k in range(n_steps):
        ak = a / (k + 1 + A) ** s.alpha
        ck = s.c / (k + 1) ** s.gamma
        delta = rng.choice([-1.0, 1.0], size=theta.size)
        fp = objective(theta + ck * delta, rng)
        fm = objective(theta - ck * delta, rng)
        grad = (fp.value - fm.value) / (2 * ck) * delta
        theta = theta - ak * grad
        e = 0.5 * (fp.value + fm.value)
        err = 0.5 * math.hypot(fp.stderr, fm.stderr)
        trace.append((k, e, err))
        best.append(e if not best else min(best[-1], e))
        history.append(theta.copy())
    candidates = history[-s.n_last:]
    evals = [objective(t, rng, s.reeval_factor) for t in candidates]
    i = int(np.argmin([e.value for e in evals]))
    return SpsaResult(candidates[i], evals[i], trace, best, a)


@dataclass
class VqeResult:
    theta: np.ndarray
    energy: ShotEstimate
    restarts: list[SpsaResult]

    def trace_rows(self) -> list[dict]:
        return [
            {"restart": r, "step": k, "energy": e, "stderr": s}
            for r, res in enumerate(self.restarts)
            for k, e, s in res.trace
        ]


def run_vqe(h: PauliSum, spec: AnsatzSpec, config: VqeConfig, noise: NoiseModel | None = None,
            objective: Callable | None = None) -> VqeResult:
    """Multistart VQE: per restart pick the best of ``n_init`` uniform draws, run SPSA, keep the lowest."""
    objective = objective or EnergyObjective(h, spec, noise, config.n_shots)
    restarts = []
    for r in range(config.n_vqe):
        rng = np.random.default_rng(split_seed(config.seed, r))
        starts = rng.uniform(0.0, 2 * math.pi, size=(config.n_init, spec.n_parameters))
        start = starts[int(np.argmin([objective(t, rng).value for t in starts]))]
        restarts.append(spsa_minimize(objective, start, config.n_steps, config.spsa, rng))
    best = min(restarts, key=lambda res: res.energy.value)
    return VqeResult(best.theta, best.energy, restarts)
