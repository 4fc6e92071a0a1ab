"""Hamiltonians used in the experiments."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .pauli import HermiticityError, PauliSum, PauliTerm, from_records

TETRAHEDRON_BONDS = tuple(itertools.combinations(range(4), 2))
TUNED_BOND = (0, 1)


def heisenberg_bond(n_qubits: int, i: int, j: int, coupling: float) -> list[PauliTerm]:
    terms = []
    for letter in "XYZ":
        label = ["I"] * n_qubits
        label[i] = label[j] = letter
        terms.append(PauliTerm.from_label("".join(label), coupling))
    return terms


def build_tetrahedron(J: float = 1.0, J_prime: float | None = None) -> PauliSum:
    """Spin-1/2 Heisenberg model on the 6 bonds of a tetrahedron.

    Bond ``(0, 1)`` carries ``J_prime`` (defaults to ``J``); all other bonds
    carry ``J``.  A zero coupling removes that bond's three terms.
    """
    if J_prime is None:
        J_prime = J
    terms = []
    for i, j in TETRAHEDRON_BONDS:
        terms += heisenberg_bond(4, i, j, J_prime if (i, j) == TUNED_BOND else J)
    return PauliSum.from_terms(4, terms)


def build_two_qubit_example() -> PauliSum:
    """``H = -(XX + YY + ZZ)`` on two qubits, spectrum ``{-1, -1, -1, 3}``."""
    return PauliSum.from_labels([("XX", -1.0), ("YY", -1.0), ("ZZ", -1.0)])


build_appendix_b_example = build_two_qubit_example  # name kept for API compatibility


def load_pauli_file(path: str | Path) -> PauliSum:
    """Read a Hamiltonian stored as JSON records or as ``label coeff_re [coeff_im]`` text lines.

    Duplicate labels are summed.  Raises ``ValueError`` (with the offending
    line for text files) on malformed input and ``HermiticityError`` when the
    combined operator has a non-real coefficient.
    """
    path = Path(path)
    text = path.read_text()
    stripped = text.lstrip()
    if stripped.startswith("[") or stripped.startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}:{exc.lineno}: {exc.msg}") from exc
        if isinstance(data, dict):
            data = data.get("terms", data)
        h = from_records(data)
    else:
        records = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) not in (2, 3):
                raise ValueError(f"{path}:{lineno}: expected 'label coeff_re [coeff_im]'")
            try:
                rec = {"label": parts[0], "coeff_re": float(parts[1]),
                       "coeff_im": float(parts[2]) if len(parts) == 3 else 0.0}
                PauliTerm.from_label(parts[0])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
            records.append(rec)
        try:
            h = from_records(records)
        except ValueError as exc:
            raise ValueError(f"{path}: {exc}") from exc
    if not h.is_hermitian():
        raise HermiticityError(f"{path}: Hamiltonian has non-real Pauli coefficients")
    return h.real()


@dataclass(frozen=True)
class ModelSpec:
    kind: str = "heisenberg_tetrahedron"
    J: float = 1.0
    J_prime: float | None = None
    path: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("heisenberg_tetrahedron", "pauli_file", "two_qubit_example"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.kind == "heisenberg_tetrahedron" and self.J <= 0:
            raise ValueError("the antiferromagnet needs J > 0")
        if self.kind == "pauli_file" and not self.path:
            raise ValueError("pauli_file model needs a path")

    def build(self) -> PauliSum:
        if self.kind == "heisenberg_tetrahedron":
            return build_tetrahedron(self.J, self.J_prime)
        if self.kind == "two_qubit_example":
            return build_two_qubit_example()
        return load_pauli_file(self.path)


def spectrum(h: PauliSum) -> np.ndarray:
    return np.linalg.eigvalsh(h.to_matrix())


def ground_energy(h: PauliSum) -> float:
    return float(spectrum(h)[0])
