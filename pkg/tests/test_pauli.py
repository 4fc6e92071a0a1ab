import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lanczos_mitigation.models import build_two_qubit_example, build_tetrahedron
from lanczos_mitigation.pauli import (DimensionError, HermiticityError, PauliSum, PauliTerm, count_terms_report,
                                      decode_label, dump_pauli_json, encode_label, from_records,
                                      group_qubitwise_commuting, multiply_sums, multiply_terms, power, powers,
                                      qubitwise_compatible, to_records)

from .strategies import labels, pauli_sums

X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]])
Z = np.diag([1.0 + 0j, -1.0])


def test_single_qubit_products():
    x, y, z = (PauliTerm.from_label(c) for c in "XYZ")
    assert (x * z).label == "Y" and (x * z).coefficient == -1j
    assert (x * y).coefficient == 1j and (x * y).label == "Z"
    assert (z * z).is_identity and (z * z).coefficient == 1


def test_two_qubit_product_sign():
    p = PauliTerm.from_label("XX") * PauliTerm.from_label("ZZ")
    assert p.label == "YY" and p.coefficient == -1


def test_label_ordering_matches_kron():
    # character q acts on tensor factor q (leftmost factor first)
    m = PauliTerm.from_label("XZ").to_matrix()
    np.testing.assert_allclose(m, np.kron(X, Z))


@given(labels(3))
def test_encode_decode_roundtrip(label):
    x, z = encode_label(label)
    assert decode_label(3, x, z) == label


def test_invalid_label():
    with pytest.raises(ValueError):
        PauliTerm.from_label("XQ")


@given(labels(3), labels(3))
def test_term_product_matches_dense(a, b):
    ta, tb = PauliTerm.from_label(a, 0.7), PauliTerm.from_label(b, -1.3)
    np.testing.assert_allclose(multiply_terms(ta, tb).to_matrix(), ta.to_matrix() @ tb.to_matrix(), atol=1e-12)


@given(pauli_sums(n_qubits=3, complex_coeffs=True), pauli_sums(n_qubits=3, complex_coeffs=True))
def test_sum_product_matches_dense(a, b):
    np.testing.assert_allclose(multiply_sums(a, b).to_matrix(), a.to_matrix() @ b.to_matrix(), atol=1e-12)


@given(pauli_sums(), st.integers(1, 3))
def test_power_matches_dense(h, k):
    np.testing.assert_allclose(power(h, k).to_matrix(), np.linalg.matrix_power(h.to_matrix(), k), atol=1e-10)


@given(pauli_sums(n_qubits=2), pauli_sums(n_qubits=2), pauli_sums(n_qubits=2))
def test_product_associative(a, b, c):
    assert ((a * b) * c).allclose(a * (b * c), atol=1e-10)


def test_power_rejects_zero():
    with pytest.raises(ValueError):
        power(build_two_qubit_example(), 0)


def test_power_one_is_identity_map():
    h = build_tetrahedron()
    assert power(h, 1) == h


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        PauliSum.from_labels([("XX", 1.0)]) * PauliSum.from_labels([("X", 1.0)])


def test_two_qubit_example_cube():
    h = build_two_qubit_example()
    s = -h
    assert power(h, 2) == PauliSum.identity(2, 3.0) - s * 2
    expected = PauliSum.identity(2, 6.0) - s * 7
    assert power(h, 3) == expected


def test_pruning_removes_cancelled_terms():
    a = PauliSum.from_labels([("ZI", 1.0), ("XX", 1.0)])
    sq = a * a
    assert sq.labels() == ["II"]
    assert sq.coefficient("II") == 2


def test_tetrahedron_counts():
    rep = count_terms_report(build_tetrahedron())
    assert rep.counts == (18, 40, 40)
    assert rep.lanczos_strings == 98
    assert rep.exponents[0] == pytest.approx(np.log(18) / np.log(4))


def test_count_report_single_qubit_has_no_exponents():
    rep = count_terms_report(PauliSum.from_labels([("Z", 1.0), ("X", 0.5)]))
    assert rep.exponents is None and rep.counts == (2, 1, 2)


def test_count_report_rejects_non_hermitian():
    with pytest.raises(HermiticityError):
        count_terms_report(PauliSum.from_labels([("Z", 1j)]))


@given(pauli_sums())
def test_records_roundtrip(h):
    assert from_records(json.loads(json.dumps(to_records(h)))) == h


def test_dump_and_reload(tmp_path):
    h = build_tetrahedron(1.0, 0.5)
    dump_pauli_json(h, tmp_path / "h.json")
    recs = json.loads((tmp_path / "h.json").read_text())
    assert from_records(recs) == h


@given(pauli_sums(n_qubits=3, max_terms=10))
def test_qubitwise_groups_cover_and_commute(h):
    groups = group_qubitwise_commuting(h)
    assert sorted(t.key for g in groups for t in g) == sorted(t.key for t in h)
    for g in groups:
        for i, a in enumerate(g):
            for b in g[i + 1:]:
                assert qubitwise_compatible(a, b)
                ma, mb = a.to_matrix(), b.to_matrix()
                np.testing.assert_allclose(ma @ mb, mb @ ma, atol=1e-12)


@given(pauli_sums(complex_coeffs=True))
def test_adjoint_is_conjugate_transpose(h):
    np.testing.assert_allclose(h.adjoint().to_matrix(), h.to_matrix().conj().T, atol=1e-12)


@given(pauli_sums())
def test_real_sums_are_hermitian(h):
    m = h.to_matrix()
    assert h.is_hermitian()
    np.testing.assert_allclose(m, m.conj().T, atol=1e-12)


def _projected_count(m, n):
    """Number of Pauli strings with non-zero trace overlap, by brute force."""
    import itertools
    mats = {"I": np.eye(2), "X": X, "Y": Y, "Z": Z}
    count = 0
    for lab in itertools.product("IXYZ", repeat=n):
        p = mats[lab[0]]
        for c in lab[1:]:
            p = np.kron(p, mats[c])
        if abs(np.trace(p @ m)) / 2 ** n > 1e-10:
            count += 1
    return count


def test_tetrahedron_power_counts_match_projection_oracle():
    h = build_tetrahedron()
    m = h.to_matrix()
    hp = powers(h, 3)
    for k, p in enumerate(hp, 1):
        assert len(p) == _projected_count(np.linalg.matrix_power(m, k), 4)
