import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lanczos_mitigation.models import (ModelSpec, build_two_qubit_example, build_tetrahedron, ground_energy,
                                       load_pauli_file, spectrum)
from lanczos_mitigation.pauli import HermiticityError
from lanczos_mitigation.simulator import DensityMatrix, exact_expectation

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"


def test_tetrahedron_spectrum():
    ev = spectrum(build_tetrahedron())
    assert ev[0] == pytest.approx(-6) and ev[1] == pytest.approx(-6) and ev[2] > -5.9
    assert ev[-1] == pytest.approx(6)
    # total-spin multiplets: S=0 (x2), S=1 (x3 triplets), S=2 (quintet)
    levels, counts = np.unique(np.round(ev, 8), return_counts=True)
    assert levels.tolist() == [-6, -2, 6] and counts.tolist() == [2, 9, 5]


def test_tetrahedron_term_counts():
    assert len(build_tetrahedron()) == 18
    assert len(build_tetrahedron(1.0, 0.0)) == 15


@given(st.floats(0.1, 3), st.floats(0, 3))
def test_tetrahedron_linear_in_couplings(j, jp):
    np.testing.assert_allclose(spectrum(build_tetrahedron(2 * j, 2 * jp)), 2 * spectrum(build_tetrahedron(j, jp)),
                               atol=1e-10)


def _gap(jp):
    ev = spectrum(build_tetrahedron(1.0, jp))
    return ev[1] - ev[0]


def test_level_crossing_at_equal_couplings():
    assert _gap(1.0) < 1e-10
    assert _gap(0.6) > 0.1 and _gap(1.4) > 0.1


def test_two_qubit_example():
    h = build_two_qubit_example()
    np.testing.assert_allclose(spectrum(h), [-1, -1, -1, 3], atol=1e-12)
    assert exact_expectation(DensityMatrix.zero_state(2), h) == pytest.approx(-1)
    assert np.trace(h.to_matrix()) == pytest.approx(0)


def test_text_file(tmp_path):
    p = tmp_path / "h.txt"
    p.write_text("ZZ 1\n")
    h = load_pauli_file(p)
    assert h.n_qubits == 2 and h.labels() == ["ZZ"]


def test_duplicates_are_summed(tmp_path):
    p = tmp_path / "h.json"
    p.write_text(json.dumps([{"label": "XI", "coeff_re": 0.25}, {"label": "XI", "coeff_re": 0.5}]))
    assert load_pauli_file(p).coefficient("XI") == 0.75


def test_complex_lone_term_rejected(tmp_path):
    p = tmp_path / "h.txt"
    p.write_text("XY 1.0 0.5\n")
    with pytest.raises(HermiticityError):
        load_pauli_file(p)


@pytest.mark.parametrize("text", ["XX one\n", "XX\n", "XQ 1\n", "XX 1\nZ 1\n"])
def test_malformed_text_reports_line(tmp_path, text):
    p = tmp_path / "h.txt"
    p.write_text(text)
    with pytest.raises(ValueError, match="h.txt"):
        load_pauli_file(p)


def test_malformed_json(tmp_path):
    p = tmp_path / "h.json"
    p.write_text('[{"label": "X", ')
    with pytest.raises(ValueError, match="h.json"):
        load_pauli_file(p)


def test_fixtures_load():
    assert load_pauli_file(FIXTURES / "two_qubit_heisenberg.txt") == build_two_qubit_example()
    assert load_pauli_file(FIXTURES / "tetrahedron.json") == build_tetrahedron()


def test_model_spec():
    assert ModelSpec().build() == build_tetrahedron()
    assert ground_energy(ModelSpec("two_qubit_example").build()) == pytest.approx(-1)
    with pytest.raises(ValueError):
        ModelSpec("pauli_file")
    with pytest.raises(ValueError):
        ModelSpec("heisenberg_tetrahedron", J=-1)
