"""Zero-noise extrapolation by CZ folding, optionally on top of Lanczos mitigation."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .krylov import N_BOOTSTRAP, lanczos_m2, measure_moments
from .pauli import PauliSum, powers as pauli_powers
from .seeding import split_seed
from .simulator import Circuit, NoiseModel, ShotEstimate, run_circuit, sampled_expectation


@dataclass(frozen=True)
class ZneConfig:
    fold_factors: tuple[int, ...] = (1, 3, 5, 7)
    degree: int = 1
    n_shots: int | None = 8192
    shot_multiplier: int = 2

    def __post_init__(self) -> None:
        f = tuple(int(x) for x in self.fold_factors)
        object.__setattr__(self, "fold_factors", f)
        if any(x < 1 or x % 2 == 0 for x in f):
            raise ValueError("fold factors must be odd positive integers")
        if any(b <= a for a, b in zip(f, f[1:])):
            raise ValueError("fold factors must be strictly increasing")
        if self.degree < 1:
            raise ValueError("fit degree must be positive")
        if len(f) <= self.degree:
            raise ValueError("need more fold factors than the fit degree")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["fold_factors"] = list(self.fold_factors)
        return d


@dataclass(frozen=True)
class FoldPoint:
    factor: int
    estimate: ShotEstimate
    method: str


def fold_and_measure(
    circuit: Circuit,
    h: PauliSum,
    noise: NoiseModel | None,
    cfg: ZneConfig = ZneConfig(),
    estimator: str = "bare",
    seed=0,
    n_shots: int | None | str = "config",
    h_powers: Sequence[PauliSum] | None = None,
    n_resamples: int = N_BOOTSTRAP,
) -> list[FoldPoint]:
    """Energy at every fold factor with the bare or the order-2 Lanczos estimator.

    Every factor is simulated and sampled with its own seed,
    ``split_seed(seed, factor)``.
    """
    if estimator not in ("bare", "lanczos"):
        raise ValueError("estimator must be 'bare' or 'lanczos'")
    shots = cfg.n_shots if n_shots == "config" else n_shots
    readout = None if noise is None else noise.readout
    if estimator == "lanczos" and h_powers is None:
        h_powers = pauli_powers(h, 3)
    points = []
    for f in cfg.fold_factors:
        rho = run_circuit(circuit.folded(f), noise)
        s = split_seed(seed, f)
        if estimator == "bare":
            est = sampled_expectation(rho, h, shots, readout, np.random.default_rng(s))
        else:
            ms = measure_moments(rho, h, 2, shots, readout, seed=s, h_powers=h_powers)
            est = lanczos_m2(ms, n_resamples, seed=s).energy
        points.append(FoldPoint(f, est, estimator))
    return points


@dataclass(frozen=True, eq=False)
class PolynomialFit:
    """Weighted least-squares polynomial in the fold factor, lowest order first."""

    coefficients: np.ndarray
    covariance: np.ndarray

    @property
    def intercept(self) -> ShotEstimate:
        return ShotEstimate(float(self.coefficients[0]), float(math.sqrt(max(self.covariance[0, 0], 0.0))))

    def __call__(self, x) -> np.ndarray:
        return np.polynomial.polynomial.polyval(x, self.coefficients)


def fit_polynomial(factors: Sequence[float], estimates: Sequence[ShotEstimate], degree: int = 1) -> PolynomialFit:
    """Fit with weights ``1/sigma^2``.

    The covariance is ``(X^T W X)^-1`` for absolute errors.  When any point
    is exact (zero stderr) the fit is unweighted and its covariance is
    scaled by the residual variance instead (zero for exact data).
    """
    x = np.asarray(factors, dtype=float)
    y = np.array([e.value for e in estimates])
    s = np.array([e.stderr for e in estimates])
    if len(x) <= degree:
        raise ValueError(f"{len(x)} points cannot determine a degree-{degree} polynomial")
    X = np.vander(x, degree + 1, increasing=True)
    weighted = bool(np.all(s > 0))
    w = s ** -2.0 if weighted else np.ones_like(x)
    A = X.T @ (w[:, None] * X)
    if np.linalg.matrix_rank(A) < degree + 1:
        raise ValueError("degenerate design matrix (repeated fold factors?)")
    cov = np.linalg.inv(A)
    coef = cov @ (X.T @ (w * y))
    if not weighted:
        dof = len(x) - degree - 1
        resid = y - X @ coef
        cov = cov * (float(resid @ resid) / dof if dof > 0 else 0.0)
    return PolynomialFit(coef, cov)


def extrapolate(points: Sequence[FoldPoint | tuple[int, ShotEstimate]], degree: int = 1) -> ShotEstimate:
    """Zero-noise intercept of the fit; ``degree = len(points) - 1`` is Richardson extrapolation."""
    pairs = [(p.factor, p.estimate) if isinstance(p, FoldPoint) else p for p in points]
    fit = fit_polynomial([f for f, _ in pairs], [e for _, e in pairs], degree)
    return fit.intercept


def points_to_rows(points: Sequence[FoldPoint]) -> list[dict]:
    return [{"factor": p.factor, "energy": p.estimate.value, "stderr": p.estimate.stderr, "method": p.method}
            for p in points]


@dataclass
class BudgetComparison:
    lanczos_strings: int
    lanczos_budget: int
    zne_strings: int
    zne_shots_per_string: int
    zne_budget: int
    lanczos_energies: list[float] = field(default_factory=list)
    zne_energies: list[float] = field(default_factory=list)

    def summary(self) -> dict:
        def stats(v):
            return {"mean": float(np.mean(v)), "std": float(np.std(v, ddof=1)) if len(v) > 1 else 0.0,
                    "n": len(v)}

        return {
            "lanczos_strings": self.lanczos_strings,
            "lanczos_budget": self.lanczos_budget,
            "zne_strings": self.zne_strings,
            "zne_shots_per_string": self.zne_shots_per_string,
            "zne_budget": self.zne_budget,
            "lanczos": stats(self.lanczos_energies),
            "zne": stats(self.zne_energies),
        }


def measurement_budget(h: PauliSum, cfg: ZneConfig, n_shots: int,
                       h_powers: Sequence[PauliSum] | None = None,
                       lanczos_strings: int | None = None) -> tuple[int, int, int, int]:
    """``(lanczos_strings, zne_strings, zne_shots_per_string, shot_multiplier)``.

    The order-2 Lanczos run measures every string of ``H``, ``H^2`` and
    ``H^3`` with ``n_shots``; ZNE measures ``H`` at every fold factor with
    ``multiplier * n_shots``, the multiplier raised above ``cfg.shot_multiplier``
    only when needed to reach at least the Lanczos budget.  A given
    ``lanczos_strings`` overrides the count from the power expansion.
    """
    if lanczos_strings is None:
        hp = h_powers or pauli_powers(h, 3)
        lanczos_strings = sum(len(p) for p in hp[:3])
    zne_strings = len(cfg.fold_factors) * len(h)
    mult = max(cfg.shot_multiplier, math.ceil(lanczos_strings / zne_strings))
    return lanczos_strings, zne_strings, mult * n_shots, mult


def budget_matched_compare(
    circuit: Circuit,
    h: PauliSum,
    noise: NoiseModel | None,
    cfg: ZneConfig = ZneConfig(),
    n_repetitions: int = 50,
    seed=0,
    n_resamples: int = 200,
    lanczos_strings: int | None = None,
) -> BudgetComparison:
    """Lanczos (order 2) against bare ZNE with an equal or larger measurement budget."""
    if cfg.n_shots is None:
        raise ValueError("budget comparison needs a finite shot count")
    hp = pauli_powers(h, 3)
    l_strings, z_strings, z_shots, _ = measurement_budget(h, cfg, cfg.n_shots, hp, lanczos_strings)
    out = BudgetComparison(l_strings, l_strings * cfg.n_shots, z_strings, z_shots, z_strings * z_shots)
    rho = run_circuit(circuit, noise)
    readout = None if noise is None else noise.readout
    for rep in range(n_repetitions):
        s = split_seed(seed, rep)
        ms = measure_moments(rho, h, 2, cfg.n_shots, readout, seed=split_seed(s, 0), h_powers=hp)
        out.lanczos_energies.append(lanczos_m2(ms, n_resamples, seed=s).value)
        pts = fold_and_measure(circuit, h, noise, cfg, "bare", seed=split_seed(s, 1), n_shots=z_shots)
        out.zne_energies.append(extrapolate(pts, cfg.degree).value)
    return out
