"""Pauli strings and weighted Pauli sums in the symplectic (x, z) bit representation.

Site ``q`` of an ``n``-qubit string is bit ``q`` of both masks and the
``q``-th character of its label (leftmost character is site 0).  Letters
decode as ``(x, z)``: ``(0, 0) -> I``, ``(1, 0) -> X``, ``(1, 1) -> Y``,
``(0, 1) -> Z``.  Coefficients always multiply the Hermitian Pauli string
itself, so a Hermitian sum has real coefficients.

Dense matrices use the Kronecker order ``sigma_0 (x) sigma_1 (x) ...``, i.e.
site ``q`` is bit ``n - 1 - q`` of a computational-basis index.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping

import numpy as np

PRUNE_TOL = 1e-12
_LETTERS = {(0, 0): "I", (1, 0): "X", (1, 1): "Y", (0, 1): "Z"}
_BITS = {v: k for k, v in _LETTERS.items()}
_PHASES = (1.0, 1.0j, -1.0, -1.0j)


class DimensionError(ValueError):
    """Operands act on different numbers of qubits."""


class HermiticityError(ValueError):
    """An operator expected to be Hermitian is not."""


def _popcount(v: int) -> int:
    return v.bit_count()


def _check_masks(n_qubits: int, x_mask: int, z_mask: int) -> None:
    if n_qubits < 1:
        raise ValueError("n_qubits must be positive")
    limit = 1 << n_qubits
    if not (0 <= x_mask < limit and 0 <= z_mask < limit):
        raise ValueError(f"masks do not fit in {n_qubits} qubits")


def encode_label(label: str) -> tuple[int, int]:
    """Return ``(x_mask, z_mask)`` for a label such as ``"XIZY"``."""
    x_mask = z_mask = 0
    for q, ch in enumerate(label.upper()):
        try:
            x, z = _BITS[ch]
        except KeyError:
            raise ValueError(f"invalid Pauli letter {ch!r} in {label!r}") from None
        x_mask |= x << q
        z_mask |= z << q
    return x_mask, z_mask


def decode_label(n_qubits: int, x_mask: int, z_mask: int) -> str:
    return "".join(
        _LETTERS[((x_mask >> q) & 1, (z_mask >> q) & 1)] for q in range(n_qubits)
    )


def product_phase(x1: int, z1: int, x2: int, z2: int) -> int:
    """Exponent ``k`` (mod 4) such that ``P1 P2 = i**k P3`` with ``P3`` the product string.

    Uses ``P = i**|x & z| X**x Z**z`` and ``Z**z1 X**x2 = (-1)**|z1 & x2| X**x2 Z**z1``.
    """
    x3 = x1 ^ x2
    z3 = z1 ^ z2
    k = _popcount(x1 & z1) + _popcount(x2 & z2) + 2 * _popcount(z1 & x2) - _popcount(x3 & z3)
    return k % 4


@dataclass(frozen=True)
class PauliTerm:
    """A single weighted Pauli string ``coefficient * P``."""

    n_qubits: int
    x_mask: int
    z_mask: int
    coefficient: complex = 1.0

    def __post_init__(self) -> None:
        _check_masks(self.n_qubits, self.x_mask, self.z_mask)

    @classmethod
    def from_label(cls, label: str, coefficient: complex = 1.0) -> PauliTerm:
        x, z = encode_label(label)
        return cls(len(label), x, z, coefficient)

    @property
    def label(self) -> str:
        return decode_label(self.n_qubits, self.x_mask, self.z_mask)

    @property
    def key(self) -> tuple[int, int]:
        return self.x_mask, self.z_mask

    @property
    def support(self) -> int:
        """Bitmask of sites carrying a non-identity letter."""
        return self.x_mask | self.z_mask

    def is_identity(self) -> bool:
        return self.x_mask == 0 and self.z_mask == 0

    def __mul__(self, other: PauliTerm) -> PauliTerm:
        return multiply_terms(self, other)

    def to_matrix(self) -> np.ndarray:
        return pauli_string_matrix(self.n_qubits, self.x_mask, self.z_mask) * self.coefficient

    def __repr__(self) -> str:
        return f"PauliTerm({self.coefficient!r}*{self.label})"


def multiply_terms(a: PauliTerm, b: PauliTerm) -> PauliTerm:
    """Exact product of two weighted Pauli strings, phase included."""
    if a.n_qubits != b.n_qubits:
        raise DimensionError(f"cannot multiply {a.n_qubits}- and {b.n_qubits}-qubit terms")
    k = product_phase(a.x_mask, a.z_mask, b.x_mask, b.z_mask)
    return PauliTerm(
        a.n_qubits,
        a.x_mask ^ b.x_mask,
        a.z_mask ^ b.z_mask,
        _PHASES[k] * complex(a.coefficient) * complex(b.coefficient),
    )


def _bit_reverse_mask(mask: int, n_qubits: int) -> int:
    """Map a site mask to the matching computational-index mask (site q -> bit n-1-q)."""
    out = 0
    for q in range(n_qubits):
        if (mask >> q) & 1:
            out |= 1 << (n_qubits - 1 - q)
    return out


def _index_parity(indices: np.ndarray, mask: int) -> np.ndarray:
    """Parity of ``indices & mask`` for an integer array."""
    v = np.bitwise_and(indices, mask)
    parity = np.zeros_like(v)
    while np.any(v):
        parity ^= v & 1
        v = v >> 1
    return parity


def pauli_string_action(n_qubits: int, x_mask: int, z_mask: int) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(cols, phases)`` with ``P[cols[r], r] = phases[r]`` (one nonzero per column)."""
    dim = 1 << n_qubits
    xb = _bit_reverse_mask(x_mask, n_qubits)
    zb = _bit_reverse_mask(z_mask, n_qubits)
    r = np.arange(dim)
    signs = 1.0 - 2.0 * _index_parity(r, zb)
    phase = _PHASES[_popcount(x_mask & z_mask) % 4]
    return r ^ xb, phase * signs


def pauli_string_matrix(n_qubits: int, x_mask: int, z_mask: int) -> np.ndarray:
    dim = 1 << n_qubits
    rows, phases = pauli_string_action(n_qubits, x_mask, z_mask)
    m = np.zeros((dim, dim), dtype=complex)
    m[rows, np.arange(dim)] = phases
    return m


@dataclass(frozen=True)
class PauliSum:
    """Weighted sum of Pauli strings keyed by ``(x_mask, z_mask)``.

    Construction canonicalises: like terms are already merged by the dict
    and coefficients below ``PRUNE_TOL`` in magnitude are dropped.
    """

    n_qubits: int
    terms: Mapping[tuple[int, int], complex] = field(default_factory=dict)

    def __post_init__(self) -> None:
        clean = {}
        for (x, z), c in self.terms.items():
            _check_masks(self.n_qubits, x, z)
            c = complex(c)
            if abs(c) >= PRUNE_TOL:
                clean[(x, z)] = c
        object.__setattr__(self, "terms", dict(sorted(clean.items(), key=_order_key)))

    # -- construction -------------------------------------------------------
    @classmethod
    def from_terms(cls, n_qubits: int, terms: Iterable[PauliTerm], prune_tol: float = PRUNE_TOL) -> PauliSum:
        acc: dict[tuple[int, int], complex] = {}
        for t in terms:
            if t.n_qubits != n_qubits:
                raise DimensionError("term size does not match sum size")
            acc[t.key] = acc.get(t.key, 0.0) + complex(t.coefficient)
        return cls(n_qubits, _pruned(acc, prune_tol))

    @classmethod
    def from_labels(cls, pairs: Iterable[tuple[str, complex]]) -> PauliSum:
        pairs = list(pairs)
        if not pairs:
            raise ValueError("need at least one term to infer n_qubits")
        n = len(pairs[0][0])
        return cls.from_terms(n, (PauliTerm.from_label(lbl, c) for lbl, c in pairs))

    @classmethod
    def identity(cls, n_qubits: int, coefficient: complex = 1.0) -> PauliSum:
        return cls(n_qubits, {(0, 0): coefficient})

    # -- views ---------------------------------------------------------------
    def __iter__(self) -> Iterator[PauliTerm]:
        for (x, z), c in self.terms.items():
            yield PauliTerm(self.n_qubits, x, z, c)

    def __len__(self) -> int:
        return len(self.terms)

    def coefficient(self, label: str) -> complex:
        return self.terms.get(encode_label(label), 0.0)

    def labels(self) -> list[str]:
        return [decode_label(self.n_qubits, x, z) for x, z in self.terms]

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        # sigma strings are Hermitian, so (c P)^dagger = conj(c) P
        return all(abs(c.imag) <= tol for c in self.terms.values())

    def real(self) -> PauliSum:
        """Drop imaginary parts; call only after checking hermiticity."""
        return PauliSum(self.n_qubits, {k: c.real for k, c in self.terms.items()})

    def adjoint(self) -> PauliSum:
        return PauliSum(self.n_qubits, {k: c.conjugate() for k, c in self.terms.items()})

    def to_matrix(self) -> np.ndarray:
        dim = 1 << self.n_qubits
        m = np.zeros((dim, dim), dtype=complex)
        cols = np.arange(dim)
        for (x, z), c in self.terms.items():
            rows, phases = pauli_string_action(self.n_qubits, x, z)
            m[rows, cols] += c * phases
        return m

    # -- arithmetic ----------------------------------------------------------
    def __add__(self, other: PauliSum) -> PauliSum:
        _same_size(self, other)
        acc = dict(self.terms)
        for k, c in other.terms.items():
            acc[k] = acc.get(k, 0.0) + c
        return PauliSum(self.n_qubits, acc)

    def __neg__(self) -> PauliSum:
        return self * -1.0

    def __sub__(self, other: PauliSum) -> PauliSum:
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, PauliSum):
            return multiply_sums(self, other)
        return PauliSum(self.n_qubits, {k: c * other for k, c in self.terms.items()})

    __rmul__ = __mul__

    def __pow__(self, k: int) -> PauliSum:
        return power(self, k)

    def allclose(self, other: PauliSum, atol: float = 1e-12) -> bool:
        _same_size(self, other)
        keys = set(self.terms) | set(other.terms)
        return all(abs(self.terms.get(k, 0.0) - other.terms.get(k, 0.0)) <= atol for k in keys)

    def __repr__(self) -> str:
        body = " + ".join(f"({c:.6g})*{lbl}" for lbl, c in zip(self.labels(), self.terms.values()))
        return f"PauliSum[{self.n_qubits}]({body or '0'})"


def _order_key(item):
    (x, z), _ = item
    return (z, x)


def _pruned(acc: dict, tol: float) -> dict:
    return {k: c for k, c in acc.items() if abs(c) >= tol}


def _same_size(a: PauliSum, b: PauliSum) -> None:
    if a.n_qubits != b.n_qubits:
        raise DimensionError(f"{a.n_qubits}-qubit and {b.n_qubits}-qubit operators")


def multiply_sums(a: PauliSum, b: PauliSum, prune_tol: float = PRUNE_TOL) -> PauliSum:
    """Distributive product ``a @ b`` with like-term combination.

    Coefficients below ``prune_tol`` are dropped after all contributions are
    accumulated, so exact cancellations never leave numerical dust.
    """
    _same_size(a, b)
    if prune_tol < 0:
        raise ValueError("prune_tol must be non-negative")
    acc: dict[tuple[int, int], complex] = {}
    for (x1, z1), c1 in a.terms.items():
        for (x2, z2), c2 in b.terms.items():
            key = (x1 ^ x2, z1 ^ z2)
            acc[key] = acc.get(key, 0.0) + _PHASES[product_phase(x1, z1, x2, z2)] * c1 * c2
    # the constructor also prunes at PRUNE_TOL, so smaller prune_tol values act as PRUNE_TOL
    return PauliSum(a.n_qubits, _pruned(acc, prune_tol))


def power(h: PauliSum, k: int, prune_tol: float = PRUNE_TOL) -> PauliSum:
    if k < 1 or int(k) != k:
        raise ValueError("power must be a positive integer")
    out = h
    for _ in range(int(k) - 1):
        out = multiply_sums(out, h, prune_tol)
    return out


def powers(h: PauliSum, k_max: int, prune_tol: float = PRUNE_TOL) -> list[PauliSum]:
    """``[H, H^2, ..., H^k_max]`` built incrementally."""
    out = [h]
    for _ in range(k_max - 1):
        out.append(multiply_sums(out[-1], h, prune_tol))
    return out


@dataclass(frozen=True)
class TermCountReport:
    """Pauli-string counts for ``H, H^2, H^3`` and the exponents ``y`` with ``n_q**y = n_pt``.

    Every distinct key is counted, the identity included when present.
    """

    n_qubits: int
    counts: tuple[int, int, int]
    exponents: tuple[float, float, float] | None

    @property
    def lanczos_strings(self) -> int:
        """Strings measured for an order-2 mitigation (H, H^2 and H^3 measured independently)."""
        return sum(self.counts)


def count_terms_report(h: PauliSum) -> TermCountReport:
    if not h.is_hermitian():
        raise HermiticityError("term-count report expects a Hermitian operator")
    counts = tuple(len(p) for p in powers(h, 3))
    exponents = None
    if h.n_qubits > 1:
        exponents = tuple(math.log(c) / math.log(h.n_qubits) for c in counts)
    return TermCountReport(h.n_qubits, counts, exponents)


def qubitwise_compatible(a: PauliTerm, b: PauliTerm) -> bool:
    """True when every site carries the same letter or an identity on one side."""
    both = a.support & b.support
    return ((a.x_mask ^ b.x_mask) & both) == 0 and ((a.z_mask ^ b.z_mask) & both) == 0


def group_qubitwise_commuting(h: PauliSum) -> list[list[PauliTerm]]:
    """Greedy first-fit partition into qubit-wise commuting measurement groups."""
    groups: list[list[PauliTerm]] = []
    for term in sorted(h, key=lambda t: (-_popcount(t.support), t.z_mask, t.x_mask)):
        for g in groups:
            if all(qubitwise_compatible(term, other) for other in g):
                g.append(term)
                break
        else:
            groups.append([term])
    return groups


# -- serialization -------------------------------------------------------------

def to_records(h: PauliSum) -> list[dict]:
    return [
        {"label": t.label, "coeff_re": float(t.coefficient.real), "coeff_im": float(t.coefficient.imag)}
        for t in h
    ]


def from_records(records: Iterable[Mapping]) -> PauliSum:
    terms = []
    n = None
    for i, rec in enumerate(records):
        try:
            label = str(rec["label"])
            c = complex(float(rec["coeff_re"]), float(rec.get("coeff_im", 0.0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"record {i}: {exc}") from exc
        if n is None:
            n = len(label)
        elif len(label) != n:
            raise DimensionError(f"record {i}: label {label!r} has length {len(label)}, expected {n}")
        terms.append(PauliTerm.from_label(label, c))
    if n is None:
        raise ValueError("no Pauli records")
    return PauliSum.from_terms(n, terms)


def dump_pauli_json(h: PauliSum, path: str | Path) -> None:
    Path(path).write_text(json.dumps(to_records(h), indent=1) + "\n")
