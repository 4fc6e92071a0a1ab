"""Shared hypothesis strategies and random instances."""

import numpy as np
from hypothesis import strategies as st

from lanczos_mitigation.pauli import PauliSum, PauliTerm

LETTERS = "IXYZ"


@st.composite
def labels(draw, n_qubits):
    return "".join(draw(st.lists(st.sampled_from(LETTERS), min_size=n_qubits, max_size=n_qubits)))


@st.composite
def pauli_sums(draw, n_qubits=None, max_terms=6, complex_coeffs=False):
    n = draw(st.integers(1, 4)) if n_qubits is None else n_qubits
    k = draw(st.integers(1, max_terms))
    coeff = st.floats(-2, 2, allow_nan=False).filter(lambda c: abs(c) > 1e-3)
    terms = []
    for _ in range(k):
        c = draw(coeff)
        if complex_coeffs:
            c = complex(c, draw(st.floats(-2, 2, allow_nan=False)))
        terms.append(PauliTerm.from_label(draw(labels(n)), c))
    return PauliSum.from_terms(n, terms)


def random_hamiltonian(n_qubits, n_terms, rng):
    terms = [PauliTerm.from_label("".join(rng.choice(list(LETTERS), n_qubits)), rng.normal())
             for _ in range(n_terms)]
    return PauliSum.from_terms(n_qubits, terms)
