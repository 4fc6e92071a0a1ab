"""Energy estimators built from Hamiltonian moments ``<H^l> = Tr[rho H^l]``.

All estimators consume a :class:`MomentSet`.  Order 2 uses the closed form
of the 2x2 Krylov matrix in the basis ``{|psi>, (H - <H>)|psi> / beta}``;
order ``m`` solves the Hankel generalized eigenproblem
``K v = E S v`` with ``S_ij = <H^(i+j)>`` and ``K_ij = <H^(i+j+1)>``.

Statistical errors are propagated by a parametric bootstrap that treats
the measured moments as independent normals.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .pauli import PauliSum, powers as pauli_powers
from .seeding import as_generator, split_seed
from .simulator import DensityMatrix, ShotEstimate, sampled_expectation

DEGENERACY_RTOL = 1e-10
RANK_RTOL = 1e-10
N_BOOTSTRAP = 2000
N_RATIO_GRID = 200


class DegenerateMomentsWarning(UserWarning):
    """Sampled moments gave a non-positive variance; the bare estimate is used."""


# -- moments ---------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MomentSet:
    """Moments ``<H^l>`` for ``l = 0 .. L-1`` with standard errors; ``<H^0> = 1`` exactly."""

    values: np.ndarray
    stderrs: np.ndarray | None = None
    n_shots: int | None = None

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("need at least <H^0> and <H>")
        if v[0] != 1.0:
            raise ValueError("<H^0> must be exactly 1")
        s = np.zeros_like(v) if self.stderrs is None else np.array(self.stderrs, dtype=float)
        if s.shape != v.shape:
            raise ValueError("stderrs must match values")
        if np.any(s < 0) or not np.all(np.isfinite(s)):
            raise ValueError("stderrs must be finite and non-negative")
        s[0] = 0.0
        v.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "stderrs", s)

    @classmethod
    def from_moments(cls, moments: Sequence[float], stderrs: Sequence[float] | None = None,
                     n_shots: int | None = None) -> MomentSet:
        """Build from ``(<H>, <H^2>, ...)``; ``<H^0>`` is prepended."""
        values = [1.0, *moments]
        errs = None if stderrs is None else [0.0, *stderrs]
        return cls(np.array(values), None if errs is None else np.array(errs), n_shots)

    @property
    def order(self) -> int:
        """Largest Krylov order ``m`` these moments support (needs ``l <= 2m - 1``)."""
        return len(self.values) // 2

    @property
    def mean(self) -> float:
        return float(self.values[1])

    @property
    def variance(self) -> float:
        return float(self.values[2] - self.values[1] ** 2) if len(self.values) > 2 else math.nan

    def estimate(self, l: int) -> ShotEstimate:
        return ShotEstimate(float(self.values[l]), float(self.stderrs[l]), self.n_shots)

    def is_degenerate(self) -> bool:
        """Variance below ``DEGENERACY_RTOL * max(1, <H^2>)``: the state is (numerically) an eigenstate."""
        return _degenerate_mask(self.values[None, :])[0]

    def resample(self, n: int, rng) -> np.ndarray:
        rng = as_generator(rng)
        noise = rng.standard_normal((n, len(self.values))) * self.stderrs
        return self.values + noise

    def to_rows(self) -> list[dict]:
        return [{"power": l, "value": float(v), "stderr": float(s)}
                for l, (v, s) in enumerate(zip(self.values, self.stderrs))]


def measure_moments(
    rho: DensityMatrix,
    h: PauliSum,
    m: int = 2,
    n_shots: int | None = None,
    readout=None,
    seed=None,
    h_powers: Sequence[PauliSum] | None = None,
) -> MomentSet:
    """Measure ``<H^l>`` for ``l = 1 .. 2m-1`` on ``rho``; ``n_shots=None`` is exact.

    Each power is sampled with its own generator, ``split_seed(seed, l)``.
    """
    if m < 1:
        raise ValueError("order must be at least 1")
    n_pow = 2 * m - 1
    if h_powers is None or len(h_powers) < n_pow:
        h_powers = pauli_powers(h, n_pow)
    base = 0 if seed is None else seed
    values, errs = [1.0], [0.0]
    for l in range(1, n_pow + 1):
        rng = None if (n_shots is None) else np.random.default_rng(split_seed(base, l))
        est = sampled_expectation(rho, h_powers[l - 1], n_shots, readout, rng)
        values.append(est.value)
        errs.append(est.stderr)
    return MomentSet(np.array(values), np.array(errs), n_shots)


# -- vectorised estimator kernels ------------------------------------------------------
# Each kernel maps an (N, L) array of moment rows to N energies and must
# handle invalid rows through its own fallback instead of producing NaN.

def _degenerate_mask(M: np.ndarray) -> np.ndarray:
    var = M[:, 2] - M[:, 1] ** 2
    return var < DEGENERACY_RTOL * np.maximum(1.0, np.abs(M[:, 2]))


def bare_kernel(M: np.ndarray) -> np.ndarray:
    return M[:, 1].copy()


def lanczos2_kernel(M: np.ndarray) -> np.ndarray:
    h1, h2, h3 = M[:, 1], M[:, 2], M[:, 3]
    deg = _degenerate_mask(M)
    b2 = np.where(deg, 1.0, h2 - h1 ** 2)
    a2 = (h3 - 2.0 * h2 * h1 + h1 ** 3) / b2
    e = 0.5 * (h1 + a2) - np.sqrt(0.25 * (h1 - a2) ** 2 + b2)
    return np.where(deg, h1, e)


def cube_root_kernel(M: np.ndarray) -> np.ndarray:
    return np.cbrt(M[:, 3])


def ratio_kernel(r: float) -> Callable[[np.ndarray], np.ndarray]:
    """``E(r)`` for fixed ``r = a0/a1``; rows with a vanishing norm fall back to ``<H>``."""

    def kernel(M: np.ndarray) -> np.ndarray:
        return _ratio_energy(M, np.array([r]))[:, 0]

    return kernel


def _ratio_energy(M: np.ndarray, r: np.ndarray) -> np.ndarray:
    """``E(r)`` for every row of ``M`` and every ``r``; shape ``(N, len(r))``."""
    h1, h2, h3 = (M[:, k][:, None] for k in (1, 2, 3))
    finite = np.isfinite(r)
    rr = np.where(finite, r, 0.0)[None, :]
    num = rr ** 2 * h1 - 2.0 * rr * h2 + h3
    den = rr ** 2 - 2.0 * rr * h1 + h2
    ok = den > DEGENERACY_RTOL * np.maximum(1.0, np.maximum(rr ** 2, np.abs(h2)))
    e = np.where(ok, num / np.where(ok, den, 1.0), h1)
    return np.where(finite[None, :], e, h1)


def general_kernel(m: int) -> Callable[[np.ndarray], np.ndarray]:
    def kernel(M: np.ndarray) -> np.ndarray:
        return np.array([_krylov_solve(row, m)[0] for row in M])

    return kernel


ESTIMATOR_KERNELS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "bare": bare_kernel,
    "lanczos": lanczos2_kernel,
    "cube_root": cube_root_kernel,
}


def propagate_uncertainty(
    ms: MomentSet,
    estimator: str | Callable[[np.ndarray], np.ndarray],
    n_resamples: int = N_BOOTSTRAP,
    seed=0,
    method: str = "bootstrap",
) -> float:
    """Standard error of ``estimator(moments)``.

    ``method="bootstrap"`` resamples every moment independently from a normal
    with its stderr and reports the sample standard deviation of the
    estimator; invalid resamples go through the estimator's own fallback.
    ``method="linear"`` uses first-order propagation with central finite
    differences, which is only trustworthy away from degeneracy.
    """
    kernel = ESTIMATOR_KERNELS[estimator] if isinstance(estimator, str) else estimator
    if not np.any(ms.stderrs > 0):
        return 0.0
    if method == "bootstrap":
        rows = ms.resample(n_resamples, seed)
        vals = kernel(rows)
        return float(np.std(vals, ddof=1))
    if method == "linear":
        var = 0.0
        for l in np.nonzero(ms.stderrs)[0]:
            step = 1e-6 * max(1.0, abs(ms.values[l]))
            up = ms.values.copy()
            dn = ms.values.copy()
            up[l] += step
            dn[l] -= step
            grad = (kernel(up[None, :])[0] - kernel(dn[None, :])[0]) / (2 * step)
            var += (grad * ms.stderrs[l]) ** 2
        return float(math.sqrt(var))
    raise ValueError(f"unknown propagation method {method!r}")


# -- results ------------------------------------------------------------------------

@dataclass(frozen=True)
class MitigatedEstimate:
    """A mitigated energy with the Krylov coefficients that produced it.

    ``coefficients`` are ``c_i`` of the polynomial ``sum_i c_i H^i`` applied to
    the state; for order 2 this is ``a0 - a1 H`` so ``a0 = c_0`` and
    ``a1 = -c_1``.  Only the ratio ``a0/a1`` (an energy) is physical.
    """

    energy: ShotEstimate
    method: str
    coefficients: tuple[float, ...] | None = None
    condition_value: float | None = None
    degenerate: bool = False
    flags: tuple[str, ...] = ()

    @property
    def a0(self) -> float | None:
        return None if self.coefficients is None else self.coefficients[0]

    @property
    def a1(self) -> float | None:
        if self.coefficients is None or len(self.coefficients) < 2:
            return None
        return -self.coefficients[1]

    @property
    def ratio(self) -> float | None:
        """``a0/a1``; ``inf`` for the bare point ``a1 = 0``."""
        if self.a1 is None:
            return None
        return math.inf if self.a1 == 0 else self.a0 / self.a1

    @property
    def value(self) -> float:
        return self.energy.value

    @property
    def stderr(self) -> float:
        return self.energy.stderr

    def to_dict(self) -> dict:
        def num(x):
            if x is None:
                return None
            return float(x) if math.isfinite(x) else str(x)

        return {
            "method": self.method,
            "energy": self.energy.value,
            "stderr": self.energy.stderr,
            "n_shots": self.energy.n_shots,
            "a0": num(self.a0),
            "a1": num(self.a1),
            "a0_over_a1": num(self.ratio),
            "coefficients": None if self.coefficients is None else [float(c) for c in self.coefficients],
            "condition_value": num(self.condition_value),
            "degenerate": self.degenerate,
            "flags": list(self.flags),
        }


def _bare_estimate(ms: MomentSet, method: str, flags=()) -> MitigatedEstimate:
    return MitigatedEstimate(ms.estimate(1), method, (1.0, 0.0), 1.0, True, tuple(flags))


def _normalise(c: np.ndarray) -> tuple[float, ...]:
    c = c / np.linalg.norm(c)
    lead = c[np.flatnonzero(np.abs(c) > 1e-14)[0]]
    return tuple(float(x) for x in (c if lead > 0 else -c))


def _with_condition(ms: MomentSet, est: MitigatedEstimate) -> MitigatedEstimate:
    cond = overlap_condition(ms, est)
    return MitigatedEstimate(est.energy, est.method, est.coefficients, cond.value,
                             est.degenerate, est.flags)


# -- order 2 ----------------------------------------------------------------------

def lanczos_m2(ms: MomentSet, n_resamples: int = N_BOOTSTRAP, seed=0) -> MitigatedEstimate:
    """Lowest eigenvalue of ``[[alpha1, beta2], [beta2, alpha2]]`` built from ``<H>, <H^2>, <H^3>``.

    When ``beta2^2 = <H^2> - <H>^2`` is below the degeneracy threshold the
    Krylov space is one-dimensional and the bare ``<H>`` is returned with
    ``degenerate=True``.
    """
    if len(ms.values) < 4:
        raise ValueError("order-2 mitigation needs <H>, <H^2> and <H^3>")
    h1, h2, h3 = ms.values[1:4]
    b2sq = h2 - h1 * h1
    if ms.is_degenerate():
        if b2sq < -DEGENERACY_RTOL * max(1.0, abs(h2)):
            warnings.warn("negative sampled variance; using the bare estimate", DegenerateMomentsWarning)
        return _bare_estimate(ms, "lanczos_m2")
    b2 = math.sqrt(b2sq)
    a2 = (h3 - 2.0 * h2 * h1 + h1 ** 3) / b2sq
    e_l = 0.5 * (h1 + a2) - math.sqrt(0.25 * (h1 - a2) ** 2 + b2sq)
    # ground eigenvector (v1, v2) of the 2x2 matrix, mapped back to a0 - a1 H
    v1, v2 = b2, e_l - h1
    a0 = v1 - v2 * h1 / b2
    a1 = -v2 / b2
    stderr = propagate_uncertainty(ms, lanczos2_kernel, n_resamples, seed)
    est = MitigatedEstimate(ShotEstimate(float(e_l), stderr, ms.n_shots), "lanczos_m2",
                            _normalise(np.array([a0, -a1])))
    return _with_condition(ms, est)


# -- order m ----------------------------------------------------------------------

def _krylov_solve(values: np.ndarray, m: int) -> tuple[float, np.ndarray | None]:
    """Smallest generalized eigenvalue on the numerically positive part of the Hankel matrix.

    Returns ``(energy, coefficients)``; ``coefficients`` is ``None`` when only
    the constant direction survives (degenerate case, energy = ``<H>``).
    """
    h2 = values[2]
    scale = math.sqrt(h2) if h2 > 0 else 1.0
    mu = values[: 2 * m] / scale ** np.arange(2 * m)
    idx = np.add.outer(np.arange(m), np.arange(m))
    S = mu[idx]
    K = mu[idx + 1]
    w, U = np.linalg.eigh(S)
    keep = w > RANK_RTOL * np.trace(S) / m
    if keep.sum() <= 1:
        return float(values[1]), None
    T = U[:, keep] / np.sqrt(w[keep])
    A = T.T @ K @ T
    ev, vec = np.linalg.eigh(0.5 * (A + A.T))
    c = T @ vec[:, 0]
    c = c / scale ** np.arange(m)
    return float(ev[0] * scale), c


def lanczos_general(ms: MomentSet, m: int, n_resamples: int = N_BOOTSTRAP, seed=0) -> MitigatedEstimate:
    """Order-``m`` Krylov estimate from moments ``l = 0 .. 2m-1``."""
    if m < 2:
        raise ValueError("Krylov order must be at least 2")
    if len(ms.values) < 2 * m:
        raise ValueError(f"order {m} needs moments up to <H^{2 * m - 1}>")
    energy, coeffs = _krylov_solve(ms.values, m)
    if coeffs is None:
        return _bare_estimate(ms, f"lanczos_m{m}")
    stderr = propagate_uncertainty(ms, general_kernel(m), n_resamples, seed) if m > 2 else \
        propagate_uncertainty(ms, lanczos2_kernel, n_resamples, seed)
    est = MitigatedEstimate(ShotEstimate(energy, stderr, ms.n_shots), f"lanczos_m{m}", _normalise(coeffs))
    return _with_condition(ms, est)


# -- cube root --------------------------------------------------------------------

def cube_root(ms: MomentSet, n_resamples: int = N_BOOTSTRAP, seed=0, tol: float = 1e-8) -> MitigatedEstimate:
    """Sign-preserving ``cbrt(<H^3>)``; flagged ``discard`` when above the bare ``<H>``."""
    h3, s3 = float(ms.values[3]), float(ms.stderrs[3])
    value = float(np.cbrt(h3))
    flags = []
    if abs(h3) > tol:
        stderr = s3 / (3.0 * abs(h3) ** (2.0 / 3.0))
    else:
        stderr = propagate_uncertainty(ms, cube_root_kernel, n_resamples, seed)
        flags.append("bootstrap_stderr")
    if value > ms.mean:
        flags.append("discard")
    return MitigatedEstimate(ShotEstimate(value, stderr, ms.n_shots), "cube_root",
                             degenerate=bool(ms.is_degenerate()), flags=tuple(flags))


# -- weighted least squares -----------------------------------------------------------

def wls_average(estimates: Sequence[MitigatedEstimate | ShotEstimate]) -> MitigatedEstimate:
    """Inverse-variance weighted mean; exact (zero-stderr) inputs dominate."""
    if not estimates:
        raise ValueError("need at least one estimate")
    shots = [e.energy if isinstance(e, MitigatedEstimate) else e for e in estimates]
    vals = np.array([s.value for s in shots])
    errs = np.array([s.stderr for s in shots])
    exact = errs == 0
    if exact.any():
        value, stderr = float(vals[exact].mean()), 0.0
    else:
        w = errs ** -2.0
        value = float(np.sum(w * vals) / np.sum(w))
        stderr = float(np.sum(w) ** -0.5)
    n_shots = shots[0].n_shots
    degenerate = all(isinstance(e, MitigatedEstimate) and e.degenerate for e in estimates)
    return MitigatedEstimate(ShotEstimate(value, stderr, n_shots), "wls", degenerate=degenerate)


# -- fixed ratio and constrained selection ------------------------------------------------

def fixed_ratio_estimate(ms: MomentSet, r: float, n_resamples: int = N_BOOTSTRAP, seed=0) -> MitigatedEstimate:
    """``E(r)`` for fixed ``r = a0/a1``; ``r = inf`` is the bare measurement.

    Raises ``ValueError`` when the norm ``r^2 - 2 r <H> + <H^2>`` is too small,
    which happens for ``r`` near an energy carrying almost all of the weight.
    """
    h1, h2, h3 = ms.values[1:4]
    if math.isinf(r):
        return MitigatedEstimate(ms.estimate(1), "fixed_ratio", (1.0, 0.0), 1.0, bool(ms.is_degenerate()))
    den = r * r - 2.0 * r * h1 + h2
    if den <= DEGENERACY_RTOL * max(1.0, r * r, abs(h2)):
        raise ValueError(
            f"a0/a1 = {r:.6g} is ill-conditioned: the projected norm {den:.3e} vanishes "
            "(the ratio sits on an energy that carries almost all spectral weight)"
        )
    value = (r * r * h1 - 2.0 * r * h2 + h3) / den
    stderr = propagate_uncertainty(ms, ratio_kernel(r), n_resamples, seed)
    est = MitigatedEstimate(ShotEstimate(float(value), stderr, ms.n_shots), "fixed_ratio",
                            _normalise(np.array([r, -1.0])), degenerate=bool(ms.is_degenerate()))
    return _with_condition(ms, est)


@dataclass(frozen=True, eq=False)
class RatioScan:
    """``E(r)`` and its bootstrap stderr along the path from the Lanczos optimum to the bare point.

    Index 0 is the optimum, the last entry is ``r = +-inf``; energies along
    the path rise monotonically from ``E_L`` to ``<H>``.
    """

    ratios: np.ndarray
    energies: np.ndarray
    stderrs: np.ndarray
    optimum: MitigatedEstimate

    def select(self, sigma_max: float) -> int | None:
        ok = np.flatnonzero(self.stderrs <= sigma_max)
        if ok.size == 0:
            return None
        return int(ok[np.argmin(self.energies[ok])])


def ratio_scan(ms: MomentSet, n_resamples: int = N_BOOTSTRAP, seed=0, n_grid: int = N_RATIO_GRID) -> RatioScan:
    opt = lanczos_m2(ms, n_resamples, seed)
    bare_err = float(ms.stderrs[1])
    if opt.degenerate:
        return RatioScan(np.array([math.inf]), np.array([ms.mean]), np.array([bare_err]), opt)
    h1, h2, h3 = ms.values[1:4]
    r_opt = opt.ratio
    # the maximiser of E(r) is the other 2x2 eigenvector; walk away from it
    b2sq = h2 - h1 * h1
    a2 = (h3 - 2.0 * h2 * h1 + h1 ** 3) / b2sq
    e_hi = 0.5 * (h1 + a2) + math.sqrt(0.25 * (h1 - a2) ** 2 + b2sq)
    v1, v2 = math.sqrt(b2sq), e_hi - h1
    a1_hi = -v2 / math.sqrt(b2sq)
    r_hi = math.inf if a1_hi == 0 else (v1 - v2 * h1 / math.sqrt(b2sq)) / a1_hi
    direction = 1.0 if (math.isinf(r_opt) or r_hi < r_opt) else -1.0
    scale = max(abs(r_opt) if math.isfinite(r_opt) else 0.0, math.sqrt(max(h2, 0.0)), 1.0)
    offsets = np.logspace(math.log10(1e-4 * scale), math.log10(1e6 * scale), n_grid)
    ratios = np.concatenate([[r_opt], r_opt + direction * offsets, [direction * math.inf]])
    rows = ms.resample(n_resamples, seed) if np.any(ms.stderrs > 0) else ms.values[None, :]
    energies = _ratio_energy(ms.values[None, :], ratios)[0]
    energies[0] = opt.value
    if rows.shape[0] > 1:
        stderrs = np.std(_ratio_energy(rows, ratios), axis=0, ddof=1)
        stderrs[0] = opt.stderr
        stderrs[-1] = bare_err
    else:
        stderrs = np.zeros_like(ratios)
    return RatioScan(ratios, energies, stderrs, opt)


def _from_scan(ms: MomentSet, scan: RatioScan, sigma_max: float) -> MitigatedEstimate:
    if scan.optimum.stderr <= sigma_max:
        return scan.optimum
    i = scan.select(sigma_max)
    if i is None:
        return MitigatedEstimate(ms.estimate(1), "fixed_ratio", (1.0, 0.0), 1.0,
                                 bool(ms.is_degenerate()), ("infeasible",))
    r = float(scan.ratios[i])
    coeffs = (1.0, 0.0) if math.isinf(r) else _normalise(np.array([r, -1.0]))
    est = MitigatedEstimate(ShotEstimate(float(scan.energies[i]), float(scan.stderrs[i]), ms.n_shots),
                            "fixed_ratio", coeffs, flags=("constrained",))
    return _with_condition(ms, est)


def constrained_select(ms: MomentSet, sigma_max: float, n_resamples: int = N_BOOTSTRAP, seed=0,
                       n_grid: int = N_RATIO_GRID) -> MitigatedEstimate:
    """Lowest ``E(a0/a1)`` whose estimated stderr does not exceed ``sigma_max``.

    Returns the unconstrained order-2 result when its stderr already
    satisfies the cap, and the bare estimate flagged ``infeasible`` when no
    ratio does.
    """
    return _from_scan(ms, ratio_scan(ms, n_resamples, seed, n_grid), sigma_max)


@dataclass(frozen=True)
class DeltaProfile:
    sigma_max: tuple[float, ...]
    delta: tuple[float, ...]
    mean_stderr: tuple[float, ...]
    bare_delta: float
    recommended: float | None

    def rows(self) -> list[dict]:
        return [{"sigma_max": s, "delta_h_E": d, "mean_stderr": e}
                for s, d, e in zip(self.sigma_max, self.delta, self.mean_stderr)]


def _summed_spacing(values: Sequence[float]) -> float:
    return float(np.sum(np.abs(np.diff(np.asarray(values, dtype=float)))))


def delta_h_profile(
    sweep: Mapping[float, MomentSet],
    sigma_max_grid: Sequence[float],
    n_resamples: int = N_BOOTSTRAP,
    seed=0,
) -> DeltaProfile:
    """Summed consecutive spacing of constrained estimates across a parameter sweep.

    The sweep is ordered by its parameter.  ``recommended`` is the cap with
    the smallest summed spacing (ties go to the larger cap, i.e. stronger
    mitigation).
    """
    if len(sweep) < 2:
        warnings.warn("a sweep needs at least two points for a spacing profile")
        return DeltaProfile((), (), (), math.nan, None)
    keys = sorted(sweep)
    scans = {h: ratio_scan(sweep[h], n_resamples, split_seed(seed, i)) for i, h in enumerate(keys)}
    bare = _summed_spacing([sweep[h].mean for h in keys])
    sig, dlt, err = [], [], []
    for s in sorted(float(x) for x in sigma_max_grid):
        ests = [_from_scan(sweep[h], scans[h], s) for h in keys]
        sig.append(s)
        dlt.append(_summed_spacing([e.value for e in ests]))
        err.append(float(np.mean([e.stderr for e in ests])))
    best = min(dlt)
    recommended = max(s for s, d in zip(sig, dlt) if d <= best + 1e-12)
    return DeltaProfile(tuple(sig), tuple(dlt), tuple(err), bare, recommended)


# -- diagnostics ------------------------------------------------------------------------

@dataclass(frozen=True)
class OverlapCondition:
    """Sufficient condition for a larger ground-state overlap after mitigation.

    ``value`` is ``p(E_L)^2 / Tr[rho p(H)^2]`` for the applied polynomial
    ``p``; for order 2, ``(a0 - a1 E_L)^2 / (a0^2 - 2 a0 a1 <H> + a1^2 <H^2>)``.
    The improvement is guaranteed when ``value > 1`` and, for ``a1 != 0``,
    ``a0/a1 > E_L`` (``ratio_ok``).
    """

    value: float
    ratio_ok: bool | None
    degenerate: bool = False

    @property
    def satisfied(self) -> bool:
        return self.value > 1.0 and self.ratio_ok is not False


def overlap_condition(ms: MomentSet, estimate: MitigatedEstimate) -> OverlapCondition:
    if estimate.degenerate or estimate.coefficients is None:
        return OverlapCondition(1.0, None, True)
    c = np.asarray(estimate.coefficients, dtype=float)
    m = len(c)
    if len(ms.values) < 2 * m - 1:
        raise ValueError("not enough moments for these coefficients")
    idx = np.add.outer(np.arange(m), np.arange(m))
    norm = float(c @ ms.values[idx] @ c)
    e = estimate.value
    num = float(np.polyval(c[::-1], e)) ** 2
    ratio_ok = None
    if m == 2 and estimate.a1 != 0:
        ratio_ok = bool(estimate.ratio > e)
    return OverlapCondition(num / norm, ratio_ok)


def condition_eq3(ms: MomentSet, estimate: MitigatedEstimate) -> float:
    """Scalar value of :func:`overlap_condition`."""
    return overlap_condition(ms, estimate).value


@dataclass(frozen=True, eq=False)
class SpectralWeights:
    energies: np.ndarray
    before: np.ndarray
    after: np.ndarray

    def by_level(self, tol: float = 1e-8) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Merge degenerate eigenvalues; returns ``(levels, before, after)``."""
        levels, b, a = [], [], []
        for e, wb, wa in zip(self.energies, self.before, self.after):
            if levels and abs(e - levels[-1]) <= tol:
                b[-1] += wb
                a[-1] += wa
            else:
                levels.append(e)
                b.append(wb)
                a.append(wa)
        return np.array(levels), np.array(b), np.array(a)


def spectral_weights(rho: DensityMatrix, h: PauliSum, a0: float, a1: float) -> SpectralWeights:
    """Eigenbasis populations of ``rho`` before and after the ``(a0 - a1 H)`` filter."""
    energies, vecs = np.linalg.eigh(h.to_matrix())
    before = np.real(np.einsum("ji,jk,ki->i", vecs.conj(), rho.data, vecs))
    f = (a0 - a1 * energies) ** 2
    after = before * f / np.sum(before * f)
    return SpectralWeights(energies, before, after)


def mitigated_density_matrix(rho: DensityMatrix, h: PauliSum, a0: float, a1: float) -> DensityMatrix:
    p = a0 * np.eye(rho.dim) - a1 * h.to_matrix()
    out = p @ rho.data @ p.conj().T
    return DensityMatrix(rho.n_qubits, out / np.trace(out).real)


def mitigated_observable(rho: DensityMatrix, h: PauliSum, o: PauliSum, a0: float, a1: float) -> float:
    """``Tr[rho_L O]`` for the filtered state; a dense diagnostic, not a measurement protocol."""
    rl = mitigated_density_matrix(rho, h, a0, a1)
    return float(np.real(np.trace(rl.data @ o.to_matrix())))
