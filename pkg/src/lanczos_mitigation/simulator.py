"""Dense density-matrix simulation of RY/RZ/CZ circuits with Kraus noise.

Qubit ``q`` is tensor factor ``q`` of the state (Kronecker order, leftmost
factor is qubit 0), consistent with :mod:`lanczos_mitigation.pauli`.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .pauli import PauliSum, pauli_string_action
from .seeding import as_generator

MAX_QUBITS = 8

_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
# rotations taking the X / Y eigenbasis to the computational basis
_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
_SDG_H = _H @ np.diag([1, -1j])


class ConsistencyError(RuntimeError):
    """A state left the set of valid density matrices."""


class ContractError(ValueError):
    """Inputs violate an operation's preconditions."""


# -- gates and circuits -----------------------------------------------------------

@dataclass(frozen=True)
class Gate:
    name: str
    qubits: tuple[int, ...]
    theta: float | None = None

    def __post_init__(self) -> None:
        name = self.name.lower()
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if name in ("ry", "rz"):
            if len(self.qubits) != 1 or self.theta is None:
                raise ValueError(f"{name} takes one qubit and an angle")
        elif name == "cz":
            if len(self.qubits) != 2 or self.qubits[0] == self.qubits[1]:
                raise ValueError("cz takes two distinct qubits")
        else:
            raise ValueError(f"unsupported gate {self.name!r}")

    def matrix(self) -> np.ndarray:
        if self.name == "ry":
            c, s = math.cos(self.theta / 2), math.sin(self.theta / 2)
            return np.array([[c, -s], [s, c]], dtype=complex)
        if self.name == "rz":
            return np.diag([np.exp(-0.5j * self.theta), np.exp(0.5j * self.theta)])
        return np.diag([1, 1, 1, -1]).astype(complex)


def ry(q: int, theta: float) -> Gate:
    return Gate("ry", (q,), float(theta))


def rz(q: int, theta: float) -> Gate:
    return Gate("rz", (q,), float(theta))


def cz(a: int, b: int) -> Gate:
    return Gate("cz", (a, b))


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple[Gate, ...] = ()
    cz_fold_factor: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "gates", tuple(self.gates))
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise ValueError(f"n_qubits must be in [1, {MAX_QUBITS}]")
        if self.cz_fold_factor < 1 or self.cz_fold_factor % 2 == 0:
            raise ValueError("cz_fold_factor must be an odd positive integer")
        for g in self.gates:
            if any(q < 0 or q >= self.n_qubits for q in g.qubits):
                raise ValueError(f"gate {g} acts outside {self.n_qubits} qubits")

    @property
    def n_cz(self) -> int:
        return sum(g.name == "cz" for g in self.gates)

    @property
    def n_physical_cz(self) -> int:
        """CZ gates executed after folding."""
        return self.n_cz * self.cz_fold_factor

    def folded(self, factor: int) -> Circuit:
        return replace(self, cz_fold_factor=factor)

    def to_dict(self) -> dict:
        gates = []
        for g in self.gates:
            d = {"g": g.name, "q": list(g.qubits)}
            if g.theta is not None:
                d["theta"] = g.theta
            gates.append(d)
        return {"n_qubits": self.n_qubits, "gates": gates, "cz_fold": self.cz_fold_factor}

    @classmethod
    def from_dict(cls, d: dict) -> Circuit:
        gates = [Gate(g["g"], tuple(g["q"]), g.get("theta")) for g in d["gates"]]
        return cls(int(d["n_qubits"]), tuple(gates), int(d.get("cz_fold", 1)))


# -- noise ----------------------------------------------------------------------

def _decay(t: float, tau: float | None) -> float:
    """``1 - exp(-t/tau)``; ``tau=None`` or ``inf`` disables the channel."""
    if tau is None or math.isinf(tau) or t == 0:
        return 0.0
    if tau <= 0:
        return 1.0
    return -math.expm1(-t / tau)


@dataclass(frozen=True)
class NoiseModel:
    """Gate and thermal noise applied after every gate, plus readout confusion.

    ``thermal_population`` is the ``p`` of the generalized amplitude damping
    channel (weight of the decay-to-|0> Kraus pair); ``tau1`` drives the
    phase flip and ``tau2`` the damping.  ``readout`` holds one
    ``(p(1|0), p(0|1))`` pair per qubit, or ``None`` for perfect readout.
    """

    p_depol_1q: float = 0.0
    p_depol_2q: float = 0.0
    tau1: float | None = None
    tau2: float | None = None
    gate_time_1q: float = 0.0
    gate_time_2q: float = 0.0
    thermal_population: float = 1.0
    readout: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self) -> None:
        for name in ("p_depol_1q", "p_depol_2q", "thermal_population"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        for name in ("gate_time_1q", "gate_time_2q"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        for name in ("tau1", "tau2"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.readout is not None:
            pairs = tuple((float(a), float(b)) for a, b in self.readout)
            if any(not (0 <= p <= 1) for pair in pairs for p in pair):
                raise ValueError("readout probabilities must lie in [0, 1]")
            object.__setattr__(self, "readout", pairs)

    def channel_parameters(self, n_gate_qubits: int) -> tuple[float, float, float]:
        """``(gamma_depol, p_phase_flip, gamma_damping)`` for a 1- or 2-qubit gate."""
        if n_gate_qubits == 1:
            p, t = self.p_depol_1q, self.gate_time_1q
        else:
            p, t = self.p_depol_2q, self.gate_time_2q
        return p, _decay(t, self.tau1), _decay(t, self.tau2)

    def without_readout(self) -> NoiseModel:
        return replace(self, readout=None)

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["readout"] is not None:
            d["readout"] = [list(p) for p in d["readout"]]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> NoiseModel:
        d = dict(d)
        if d.get("readout") is not None:
            d["readout"] = tuple(tuple(p) for p in d["readout"])
        return cls(**d)


def depolarizing_kraus(gamma: float) -> list[np.ndarray]:
    a = math.sqrt(max(0.0, 1.0 - 3.0 * gamma / 4.0))
    b = math.sqrt(gamma / 4.0)
    return [a * _I2, b * _X, b * _Y, b * _Z]


def phase_flip_kraus(p_flip: float) -> list[np.ndarray]:
    return [math.sqrt(1.0 - p_flip / 2.0) * _I2, math.sqrt(p_flip / 2.0) * _Z]


def generalized_amplitude_damping_kraus(gamma: float, population: float) -> list[np.ndarray]:
    """Damping towards ``population |0><0| + (1 - population) |1><1|``."""
    g, s = math.sqrt(1.0 - gamma), math.sqrt(gamma)
    p, q = math.sqrt(population), math.sqrt(1.0 - population)
    return [
        p * np.array([[1, 0], [0, g]], dtype=complex),
        p * np.array([[0, s], [0, 0]], dtype=complex),
        q * np.array([[g, 0], [0, 1]], dtype=complex),
        q * np.array([[0, 0], [s, 0]], dtype=complex),
    ]


# -- density matrices -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DensityMatrix:
    n_qubits: int
    data: np.ndarray

    def __post_init__(self) -> None:
        dim = 1 << self.n_qubits
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise ValueError(f"n_qubits must be in [1, {MAX_QUBITS}]")
        data = np.asarray(self.data, dtype=complex)
        if data.shape != (dim, dim):
            raise ValueError(f"expected a {dim}x{dim} matrix, got {data.shape}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def zero_state(cls, n_qubits: int) -> DensityMatrix:
        dim = 1 << n_qubits
        d = np.zeros((dim, dim), dtype=complex)
        d[0, 0] = 1.0
        return cls(n_qubits, d)

    @classmethod
    def from_statevector(cls, psi: np.ndarray) -> DensityMatrix:
        psi = np.asarray(psi, dtype=complex)
        n = int(round(math.log2(psi.size)))
        psi = psi / np.linalg.norm(psi)
        return cls(n, np.outer(psi, psi.conj()))

    @classmethod
    def maximally_mixed(cls, n_qubits: int) -> DensityMatrix:
        dim = 1 << n_qubits
        return cls(n_qubits, np.eye(dim, dtype=complex) / dim)

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    def trace(self) -> complex:
        return complex(np.trace(self.data))

    def check(self, tol: float = 1e-10, psd_tol: float = 1e-9) -> None:
        """Raise ``ConsistencyError`` unless Hermitian, unit trace and PSD."""
        if np.max(np.abs(self.data - self.data.conj().T)) > tol:
            raise ConsistencyError("density matrix is not Hermitian")
        if abs(self.trace() - 1.0) > tol:
            raise ConsistencyError(f"trace {self.trace():.3e} != 1")
        if np.linalg.eigvalsh(self.data).min() < -psd_tol:
            raise ConsistencyError("density matrix has negative eigenvalues")

    def is_valid(self, tol: float = 1e-10, psd_tol: float = 1e-9) -> bool:
        try:
            self.check(tol, psd_tol)
        except ConsistencyError:
            return False
        return True


def _apply_local(data: np.ndarray, n: int, ops: Sequence[np.ndarray], qubits: Sequence[int]) -> np.ndarray:
    """Return ``sum_k K_k rho K_k^dagger`` with each ``K_k`` acting on ``qubits``."""
    k = len(qubits)
    t = data.reshape((2,) * (2 * n))
    row_axes = list(qubits)
    col_axes = [n + q for q in qubits]
    out = np.zeros_like(t)
    for op in ops:
        op_t = op.reshape((2,) * (2 * k))
        # K acting on row indices
        r = np.tensordot(op_t, t, axes=(list(range(k, 2 * k)), row_axes))
        r = np.moveaxis(r, list(range(k)), row_axes)
        # K^dagger acting on column indices: rho K^dagger = (K rho^dagger)^dagger contracts with conj(K)
        r = np.tensordot(op_t.conj(), r, axes=(list(range(k, 2 * k)), col_axes))
        r = np.moveaxis(r, list(range(k)), col_axes)
        out += r
    return out.reshape(data.shape)


def apply_kraus(rho: DensityMatrix, ops: Sequence[np.ndarray], qubits: Sequence[int]) -> DensityMatrix:
    return DensityMatrix(rho.n_qubits, _apply_local(rho.data, rho.n_qubits, ops, qubits))


def _noise_stack(noise: NoiseModel, n_gate_qubits: int) -> list[list[np.ndarray]]:
    gamma1, p_flip, gamma2 = noise.channel_parameters(n_gate_qubits)
    stack = []
    if gamma1 > 0:
        stack.append(depolarizing_kraus(gamma1))
    if p_flip > 0:
        stack.append(phase_flip_kraus(p_flip))
    if gamma2 > 0:
        stack.append(generalized_amplitude_damping_kraus(gamma2, noise.thermal_population))
    return stack


def _apply_gate_data(data: np.ndarray, n: int, gate: Gate, noise: NoiseModel | None) -> np.ndarray:
    data = _apply_local(data, n, [gate.matrix()], gate.qubits)
    if noise is not None:
        stack = _noise_stack(noise, len(gate.qubits))
        for q in gate.qubits:
            for kraus in stack:
                data = _apply_local(data, n, kraus, (q,))
    return data


def apply_gate(rho: DensityMatrix, gate: Gate, noise: NoiseModel | None = None) -> DensityMatrix:
    """Unitary step followed by depolarizing, phase flip and damping on each involved qubit."""
    if any(q >= rho.n_qubits for q in gate.qubits):
        raise ContractError(f"gate {gate} does not fit a {rho.n_qubits}-qubit state")
    data = _apply_gate_data(rho.data, rho.n_qubits, gate, noise)
    if abs(np.trace(data) - 1.0) > 1e-8:
        raise ConsistencyError("trace drifted during gate application")
    return DensityMatrix(rho.n_qubits, data)


def _expanded_gates(c: Circuit) -> Iterable[Gate]:
    for g in c.gates:
        reps = c.cz_fold_factor if g.name == "cz" else 1
        for _ in range(reps):
            yield g


def run_statevector(c: Circuit) -> np.ndarray:
    """Noiseless pure-state evolution from ``|0...0>``."""
    n = c.n_qubits
    psi = np.zeros((2,) * n, dtype=complex)
    psi[(0,) * n] = 1.0
    for g in _expanded_gates(c):
        k = len(g.qubits)
        op = g.matrix().reshape((2,) * (2 * k))
        psi = np.tensordot(op, psi, axes=(list(range(k, 2 * k)), list(g.qubits)))
        psi = np.moveaxis(psi, list(range(k)), list(g.qubits))
    return psi.reshape(-1)


def run_circuit(c: Circuit, noise: NoiseModel | None = None) -> DensityMatrix:
    """Evolve ``|0...0><0...0|``; every CZ copy carries its own noise.

    Readout noise is never applied here; it belongs to measurement.
    """
    if noise is None:
        return DensityMatrix.from_statevector(run_statevector(c))
    n = c.n_qubits
    data = DensityMatrix.zero_state(n).data.copy()
    for g in _expanded_gates(c):
        data = _apply_gate_data(data, n, g, noise)
    if abs(np.trace(data) - 1.0) > 1e-8:
        raise ConsistencyError("trace drifted during circuit simulation")
    return DensityMatrix(n, data)


# -- expectation values ------------------------------------------------------------

@dataclass(frozen=True)
class ShotEstimate:
    """An estimate with its standard error; ``n_shots=None`` marks exact (infinite-shot) values."""

    value: float
    stderr: float = 0.0
    n_shots: int | None = None

    def __post_init__(self) -> None:
        if self.stderr < 0 or math.isnan(self.stderr):
            raise ValueError("stderr must be non-negative")
        if self.n_shots is not None and self.n_shots < 1:
            raise ValueError("n_shots must be positive")


def pauli_expectation(rho: DensityMatrix, x_mask: int, z_mask: int) -> complex:
    """``Tr[rho P]`` for one Pauli string in O(2^n)."""
    rows, phases = pauli_string_action(rho.n_qubits, x_mask, z_mask)
    cols = np.arange(rho.dim)
    # Tr[rho P] = sum_c sum_r rho[c, r] P[r, c]  with  P[rows[c], c] = phases[c]
    return complex(np.sum(rho.data[cols, rows] * phases))


def _require_hermitian(o: PauliSum) -> None:
    if not o.is_hermitian():
        raise ContractError("observable must be Hermitian (real Pauli coefficients)")


def exact_expectation(rho: DensityMatrix, o: PauliSum) -> float:
    if o.n_qubits != rho.n_qubits:
        raise ContractError("observable and state sizes differ")
    _require_hermitian(o)
    total = sum(c * pauli_expectation(rho, x, z) for (x, z), c in o.terms.items())
    total = complex(total)
    if abs(total.imag) > 1e-9:
        raise ConsistencyError(f"expectation has imaginary part {total.imag:.3e}")
    return float(total.real)


def _measurement_basis_probs(rho: DensityMatrix, x_mask: int, z_mask: int) -> np.ndarray:
    """Outcome distribution over all qubits after rotating each support site into its letter's eigenbasis."""
    n = rho.n_qubits
    data = rho.data
    for q in range(n):
        x, z = (x_mask >> q) & 1, (z_mask >> q) & 1
        if x and z:
            data = _apply_local(data, n, [_SDG_H], (q,))
        elif x:
            data = _apply_local(data, n, [_H], (q,))
    probs = np.clip(np.real(np.diag(data)), 0.0, None)
    return probs / probs.sum()


def _confused_parity_mean(probs: np.ndarray, n: int, support: int, readout) -> float:
    """Mean of the product of +-1 outcomes over ``support`` after per-qubit confusion."""
    p = probs.reshape((2,) * n)
    for q in range(n):
        if not (support >> q) & 1:
            continue
        p01, p10 = readout[q]
        # confusion[reported, true]; bit 0 <-> outcome +1
        confusion = np.array([[1 - p01, p10], [p01, 1 - p10]])
        p = np.moveaxis(np.tensordot(confusion, p, axes=([1], [q])), 0, q)
    signs = np.ones(1)
    for q in range(n):
        s = np.array([1.0, -1.0]) if (support >> q) & 1 else np.ones(2)
        signs = np.multiply.outer(signs, s)
    return float(np.sum(p * signs.reshape(p.shape)))


def readout_expectation(rho: DensityMatrix, x_mask: int, z_mask: int, readout=None) -> float:
    """Exact post-confusion mean of one Pauli string (the infinite-shot value)."""
    if x_mask == 0 and z_mask == 0:
        return 1.0
    if readout is None:
        return float(pauli_expectation(rho, x_mask, z_mask).real)
    support = x_mask | z_mask
    if all(readout[q][0] == readout[q][1] for q in range(rho.n_qubits) if (support >> q) & 1):
        scale = 1.0
        for q in range(rho.n_qubits):
            if (support >> q) & 1:
                scale *= 1.0 - 2.0 * readout[q][0]
        return scale * float(pauli_expectation(rho, x_mask, z_mask).real)
    probs = _measurement_basis_probs(rho, x_mask, z_mask)
    return _confused_parity_mean(probs, rho.n_qubits, support, readout)


def sampled_expectation(
    rho: DensityMatrix,
    o: PauliSum,
    n_shots: int | None,
    readout=None,
    rng=None,
) -> ShotEstimate:
    """Estimate ``<O>`` measuring every Pauli string independently with ``n_shots`` shots.

    ``n_shots=None`` returns the exact post-readout-error value with zero
    stderr.  ``readout`` is a per-qubit sequence of ``(p(1|0), p(0|1))`` and
    may be asymmetric.  The identity term is never measured.
    """
    if o.n_qubits != rho.n_qubits:
        raise ContractError("observable and state sizes differ")
    _require_hermitian(o)
    if n_shots is not None and n_shots < 1:
        raise ValueError("n_shots must be positive")
    if readout is not None and len(readout) != rho.n_qubits:
        raise ValueError("need one readout pair per qubit")
    rng = as_generator(rng)
    value = 0.0
    var = 0.0
    for (x, z), c in o.terms.items():
        c = c.real
        mean = readout_expectation(rho, x, z, readout)
        if (x == 0 and z == 0) or n_shots is None:
            value += c * mean
            continue
        p_plus = min(max((1.0 + mean) / 2.0, 0.0), 1.0)
        k = rng.binomial(n_shots, p_plus)
        est = 2.0 * k / n_shots - 1.0
        value += c * est
        var += c * c * (1.0 - est * est) / n_shots
    return ShotEstimate(float(value), math.sqrt(var), n_shots)


# -- readout as a channel ------------------------------------------------------------

def _symmetric_flips(flip_probs, n_qubits: int) -> list[float]:
    if np.isscalar(flip_probs):
        flips = [float(flip_probs)] * n_qubits
    else:
        flips = []
        for item in flip_probs:
            if np.isscalar(item):
                flips.append(float(item))
            else:
                a, b = item
                if abs(a - b) > 0:
                    raise ContractError(
                        "asymmetric readout error has no Kraus form and can break the variational "
                        "bound; use sampled_expectation with the confusion pairs instead"
                    )
                flips.append(float(a))
    if len(flips) != n_qubits:
        raise ValueError("need one flip probability per qubit")
    for p in flips:
        if not 0 <= p <= 2.0 / 3.0:
            raise ValueError("symmetric flip probability must lie in [0, 2/3] for a CPTP map")
    return flips


def apply_readout_channel(rho: DensityMatrix, flip_probs) -> DensityMatrix:
    """Fold symmetric readout error into the state.

    On each qubit the map ``sigma -> (1 - 2p) sigma + p Tr(sigma) 1`` is
    self-dual and equals a depolarizing channel with ``gamma = 2p``.
    """
    data = rho.data
    for q, p in enumerate(_symmetric_flips(flip_probs, rho.n_qubits)):
        if p > 0:
            data = _apply_local(data, rho.n_qubits, depolarizing_kraus(2.0 * p), (q,))
    return DensityMatrix(rho.n_qubits, data)


def readout_scaled_observable(o: PauliSum, flip_probs) -> PauliSum:
    """The dual action on an observable: each string scaled by ``prod_j (1 - 2 p_j)`` over its support."""
    flips = _symmetric_flips(flip_probs, o.n_qubits)
    out = {}
    for (x, z), c in o.terms.items():
        scale = 1.0
        for q in range(o.n_qubits):
            if ((x | z) >> q) & 1:
                scale *= 1.0 - 2.0 * flips[q]
        out[(x, z)] = c * scale
    return PauliSum(o.n_qubits, out)


def random_density_matrix(n_qubits: int, rng=None, rank: int | None = None) -> DensityMatrix:
    """Ginibre-distributed density matrix (full rank unless ``rank`` is given)."""
    rng = as_generator(rng)
    dim = 1 << n_qubits
    k = dim if rank is None else rank
    g = rng.normal(size=(dim, k)) + 1j * rng.normal(size=(dim, k))
    m = g @ g.conj().T
    return DensityMatrix(n_qubits, m / np.trace(m).real)


def save_circuit(c: Circuit, path: str | Path) -> None:
    Path(path).write_text(json.dumps(c.to_dict(), indent=1) + "\n")


def load_circuit(path: str | Path) -> Circuit:
    return Circuit.from_dict(json.loads(Path(path).read_text()))
