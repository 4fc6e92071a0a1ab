import numpy as np
import pytest
from hypothesis import given, strategies as st

from lanczos_mitigation.pauli import PauliSum
from lanczos_mitigation.simulator import NoiseModel, ShotEstimate, run_circuit
from lanczos_mitigation.vqe import (AnsatzSpec, EnergyObjective, SpsaSettings, VqeConfig, build_ansatz, run_vqe,
                                    spsa_minimize)

ZZ = PauliSum.from_labels([("ZZ", 1.0)])


def bowl(theta, rng=None, shot_factor=1):
    return ShotEstimate(float(np.sum((np.asarray(theta) - 1.0) ** 2)))


@pytest.mark.parametrize("n,layers,params,czs", [(4, 1, 16, 3), (2, 1, 8, 1)])
def test_ansatz_counts(n, layers, params, czs):
    spec = AnsatzSpec(n, layers)
    assert spec.n_parameters == params
    assert build_ansatz(spec, np.zeros(params)).n_cz == czs


@given(st.integers(1, 8), st.integers(0, 4))
def test_parameter_count_formula(n, layers):
    spec = AnsatzSpec(n, layers)
    c = build_ansatz(spec, np.zeros(spec.n_parameters))
    assert spec.n_parameters == 2 * n * (layers + 1)
    assert c.n_cz == layers * (n - 1)


def test_zero_angles_leave_zero_state():
    spec = AnsatzSpec(3, 2)
    rho = run_circuit(build_ansatz(spec, np.zeros(spec.n_parameters)))
    assert abs(rho.data[0, 0]) == pytest.approx(1.0)


def test_wrong_angle_count():
    with pytest.raises(ValueError):
        build_ansatz(AnsatzSpec(2, 1), np.zeros(5))


def test_spsa_quadratic_bowl():
    res = spsa_minimize(bowl, np.zeros(4), 200, rng=0)
    assert np.max(np.abs(res.theta - 1.0)) < 0.05


def test_spsa_zero_steps_returns_start():
    t0 = np.array([0.3, -0.2])
    res = spsa_minimize(bowl, t0, 0, rng=0)
    np.testing.assert_array_equal(res.theta, t0)


def test_spsa_best_so_far_non_increasing():
    res = spsa_minimize(bowl, np.zeros(3), 50, rng=1)
    assert all(b <= a for a, b in zip(res.best_so_far, res.best_so_far[1:]))


def test_spsa_fixed_gain():
    res = spsa_minimize(bowl, np.zeros(2), 100, SpsaSettings(a=0.2), rng=0)
    assert res.a == 0.2 and bowl(res.theta).value < 0.01


def test_zz_noiseless_reaches_minimum():
    spec = AnsatzSpec(2, 1)
    hits = 0
    for seed in range(10):
        res = run_vqe(ZZ, spec, VqeConfig(n_init=5, n_vqe=1, n_steps=300, n_shots=None, seed=seed))
        hits += res.energy.value <= -0.99
    assert hits >= 8


def test_best_of_restarts_is_minimum():
    res = run_vqe(ZZ, AnsatzSpec(2, 1), VqeConfig(n_vqe=3, n_steps=30, n_shots=None, seed=4))
    assert res.energy.value == min(r.energy.value for r in res.restarts)
    assert len(res.trace_rows()) == 90


def test_vqe_deterministic():
    cfg = VqeConfig(n_vqe=2, n_steps=20, n_shots=256, seed=7)
    a = run_vqe(ZZ, AnsatzSpec(2, 1), cfg)
    b = run_vqe(ZZ, AnsatzSpec(2, 1), cfg)
    np.testing.assert_array_equal(a.theta, b.theta)


def test_noisy_energy_not_below_noiseless():
    spec = AnsatzSpec(2, 1)
    noise = NoiseModel(p_depol_1q=0.005, p_depol_2q=0.03)
    res = run_vqe(ZZ, spec, VqeConfig(n_vqe=1, n_steps=60, n_shots=2048, seed=3), noise)
    clean = EnergyObjective(ZZ, spec)(res.theta).value
    assert res.energy.value >= clean - 3 * res.energy.stderr


def test_config_roundtrip():
    cfg = VqeConfig(n_init=3, n_vqe=2, n_steps=10, n_shots=None, spsa=SpsaSettings(c=0.2), seed=5)
    assert VqeConfig.from_dict(cfg.to_dict()) == cfg


def test_objective_exact_matches_density_matrix():
    spec = AnsatzSpec(2, 1)
    theta = np.linspace(0.1, 1.5, spec.n_parameters)
    obj = EnergyObjective(ZZ, spec)
    rho = run_circuit(build_ansatz(spec, theta))
    assert obj(theta).value == pytest.approx(np.real(np.trace(rho.data @ ZZ.to_matrix())), abs=1e-12)
