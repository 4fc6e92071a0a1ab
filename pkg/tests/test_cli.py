import csv
import json
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from lanczos_mitigation import cli
from lanczos_mitigation import experiments as ex
from lanczos_mitigation.models import build_tetrahedron, ground_energy
from lanczos_mitigation.simulator import ConsistencyError

NOISE = {"p_depol_1q": 0.001, "p_depol_2q": 0.01, "readout": [[0.02, 0.02]] * 4}
SCHEMA = json.loads((Path(ex.__file__).parent / "csv_schema.json").read_text())


def write_cfg(path, **over):
    cfg = {"schema_version": 1, "vqe": {"n_vqe": 1, "n_steps": 600, "n_shots": None},
           "mitigation": {"n_resamples": 200}, "n_repetitions": 4}
    cfg.update(over)
    path.write_text(json.dumps(cfg))
    return str(path)


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def check_columns(path):
    spec = SCHEMA["files"][Path(path).name]
    header = rows(path)[0].keys()
    assert set(header) == set(spec) | {"seed", "config_hash"}


@pytest.fixture(scope="module")
def tetra_run(tmp_path_factory):
    d = tmp_path_factory.mktemp("tetra")
    cfg = write_cfg(d / "cfg.json", noise=NOISE)
    out = d / "out"
    # optimise noiselessly, then every later verb runs on the noisy device
    clean = write_cfg(d / "clean.json")
    assert cli.main(["run-vqe", "--config", clean, "--out", str(out), "--seed", "3"]) == 0
    return cfg, out


def test_run_vqe_energy_and_determinism(tmp_path, tetra_run):
    _, out = tetra_run
    theta = json.loads((out / "theta.json").read_text())
    assert theta["energy"] <= -5.4
    cfg = write_cfg(tmp_path / "clean.json")
    assert cli.main(["run-vqe", "--config", cfg, "--out", str(tmp_path / "again"), "--seed", "3"]) == 0
    assert (tmp_path / "again" / "theta.json").read_bytes() == (out / "theta.json").read_bytes()
    for name in ("vqe_trace.csv", "vqe_restarts.csv"):
        check_columns(out / name)


def test_missing_model_file_exits_2(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.json", model={"kind": "pauli_file", "path": "missing.txt"})
    assert cli.main(["run-vqe", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "missing.txt" in capsys.readouterr().err


def test_malformed_model_file_exits_2(tmp_path, capsys):
    (tmp_path / "h.txt").write_text("ZZZZ 1\nXX one\n")
    cfg = write_cfg(tmp_path / "c.json", model={"kind": "pauli_file", "path": "h.txt"},
                    ansatz={"n_qubits": 4, "n_entangling_layers": 1})
    assert cli.main(["run-vqe", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert ":2:" in capsys.readouterr().err


@pytest.mark.parametrize("text", ['{"schema_version": 1,', '{"n_shots": 10}', '{"schema_version": 9}',
                                  '{"schema_version": 1, "bogus": 1}'])
def test_bad_config_exits_2(tmp_path, text):
    p = tmp_path / "c.json"
    p.write_text(text)
    assert cli.main(["mitigate", "--config", str(p), "--out", str(tmp_path)]) == 2


def test_numerical_failure_exits_3(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise ConsistencyError("invariant breach")
    monkeypatch.setattr(ex, "cmd_scaling", boom)
    assert cli.main(["scaling", "--out", str(tmp_path)]) == 3


def test_mitigate_exact_on_eigenstate(tmp_path):
    # theta = 0 prepares |0000>, the fully polarised eigenstate with E = +6
    cfg = ex.ExperimentConfig(out_dir=str(tmp_path), n_shots=None)
    (tmp_path / "theta.json").write_text(json.dumps({"theta": [0.0] * cfg.ansatz.n_parameters}))
    rec = ex.cmd_mitigate(cfg)
    energies = {k: v["energy"] for k, v in rec["estimates"].items()}
    assert set(energies) == set(ex.ESTIMATORS)
    assert all(e == pytest.approx(6.0, abs=1e-10) for e in energies.values())
    assert rec["estimates"]["lanczos"]["degenerate"]


def test_mitigate_sampled_schema(tetra_run):
    cfg, out = tetra_run
    assert cli.main(["mitigate", "--config", cfg, "--out", str(out)]) == 0
    rec = json.loads((out / "mitigate.json").read_text())
    for name in ("lanczos", "cube_root", "wls", "fixed_ratio"):
        for key in ("energy", "stderr", "condition_value", "a0", "a1"):
            assert key in rec["estimates"][name]
    assert rec["estimates"]["lanczos"]["condition_value"] > 1
    check_columns(out / "mitigate.csv")
    assert all(r["config_hash"] and r["seed"] == "0" for r in rows(out / "mitigate.csv"))


def test_histogram_threads_are_deterministic(tetra_run, tmp_path):
    cfg, out = tetra_run
    theta = str(out / "theta.json")
    assert cli.main(["histogram", "--config", cfg, "--out", str(tmp_path / "a"), "--theta", theta]) == 0
    assert cli.main(["histogram", "--config", cfg, "--out", str(tmp_path / "b"), "--theta", theta,
                     "--threads", "3"]) == 0
    assert (tmp_path / "a" / "histogram.csv").read_bytes() == (tmp_path / "b" / "histogram.csv").read_bytes()
    check_columns(tmp_path / "a" / "histogram.csv")


def test_histogram_single_repetition(tetra_run, tmp_path):
    cfg, out = tetra_run
    assert cli.main(["histogram", "--config", cfg, "--out", str(tmp_path), "--theta", str(out / "theta.json"),
                     "--seed", "5"]) == 0
    data = rows(tmp_path / "histogram.csv")
    assert len(data) == 8
    c = replace(ex.ExperimentConfig.load(cfg), n_repetitions=1, out_dir=str(tmp_path / "one"))
    ex.cmd_histogram(c, out / "theta.json")
    data = rows(tmp_path / "one" / "histogram.csv")
    assert [r["method"] for r in data] == ["bare", "lanczos"]  # one row per method


def test_zne_outputs(tetra_run, tmp_path):
    cfg, out = tetra_run
    assert cli.main(["zne", "--config", cfg, "--out", str(tmp_path), "--theta", str(out / "theta.json")]) == 0
    check_columns(tmp_path / "zne_points.csv")
    summary = json.loads((tmp_path / "zne_summary.json").read_text())
    assert summary["budget_matched"]["zne_budget"] >= summary["budget_matched"]["lanczos_budget"]
    factors = sorted({int(r["factor"]) for r in rows(tmp_path / "zne_points.csv")})
    assert factors == [0, 1, 3, 5, 7]


def test_exact_sweep_oracle_column(tmp_path):
    grid = [0.6, 0.8, 1.0, 1.2, 1.4]
    cfg = write_cfg(tmp_path / "c.json", vqe={"n_vqe": 1, "n_steps": 50, "n_shots": None},
                    sweep={"j_prime": grid})
    assert cli.main(["sweep", "--config", cfg, "--out", str(tmp_path), "--exact", "--threads", "2"]) == 0
    data = [r for r in rows(tmp_path / "sweep.csv") if r["method"] == "bare"]
    oracle = [float(r["e0_oracle"]) for r in data]
    np.testing.assert_allclose(oracle, [ground_energy(build_tetrahedron(1, j)) for j in grid])
    # V shape with the kink at the level crossing
    assert int(np.argmax(oracle)) == grid.index(1.0)
    check_columns(tmp_path / "sweep.csv")
    check_columns(tmp_path / "delta_h.csv")


def test_mitigated_sweep_recommendation(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", noise=NOISE, vqe={"n_vqe": 1, "n_steps": 300, "n_shots": None},
                    sweep={"j_prime": [0.6, 1.0, 1.4], "optimise_noiseless": True},
                    mitigation={"n_resamples": 200, "sigma_max_grid": [0.005, 0.02, 0.05, 0.1]})
    assert cli.main(["sweep", "--config", cfg, "--out", str(tmp_path)]) == 0
    s = json.loads((tmp_path / "sweep_summary.json").read_text())
    prof = {float(r["sigma_max"]): float(r["delta_h_E"]) for r in rows(tmp_path / "delta_h.csv")}
    assert prof[s["recommended_sigma_max"]] <= s["bare_delta_h_E"] + 1e-12


def test_single_point_sweep_warns(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", vqe={"n_vqe": 1, "n_steps": 5, "n_shots": None},
                    sweep={"j_prime": [1.0]})
    with pytest.warns(UserWarning):
        assert cli.main(["sweep", "--config", cfg, "--out", str(tmp_path), "--exact"]) == 0
    assert rows(tmp_path / "delta_h.csv") == []


def test_scaling(tmp_path):
    fx = Path(__file__).resolve().parents[1] / "fixtures"
    assert cli.main(["scaling", str(fx / "tetrahedron.json"), str(fx / "two_qubit_heisenberg.txt"),
                     "--out", str(tmp_path)]) == 0
    data = rows(tmp_path / "scaling.csv")
    assert [(r["n_h"], r["n_h2"], r["n_h3"]) for r in data] == [("18", "40", "40"), ("3", "4", "4")]
    check_columns(tmp_path / "scaling.csv")


def test_scaling_without_files_exits_2(tmp_path):
    assert cli.main(["scaling", "--out", str(tmp_path)]) == 2


def test_config_roundtrip_and_hash(tmp_path):
    cfg = ex.ExperimentConfig.load(write_cfg(tmp_path / "c.json", noise=NOISE))
    again = ex.ExperimentConfig.from_dict(cfg.to_dict())
    assert again == cfg and again.config_hash == cfg.config_hash
    assert ex.ExperimentConfig.from_dict({**cfg.to_dict(), "seed": 1}).config_hash != cfg.config_hash
