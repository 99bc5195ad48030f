import json
import math
import os
from pathlib import Path

import numpy as np
import pytest

import fbgate

SOURCE = Path(os.environ.get("FBGATE_SOURCE_DIR", Path(__file__).resolve().parents[2]))


def test_harmonic_limit():
    trap = fbgate.TrapConfig()
    trap.b = 0.0
    trap.d = 1.0
    trap.n_basis = 40
    basis = fbgate.solve_single_particle(trap)
    np.testing.assert_allclose(basis.energies[:20], np.arange(20) + 0.5, atol=1e-10)
    assert basis.converged


def test_barrier_element_closed_form():
    # <0| b/(sqrt(2 pi) d) exp(-x^2 / 2 d^2) |0> = b / sqrt(pi (2 d^2 + 1))
    b, d = 36.0, 1.5
    expected = b / math.sqrt(math.pi * (2.0 * d * d + 1.0))
    assert fbgate.barrier_matrix_element(0, 0, b, d) == pytest.approx(expected, rel=1e-12)
    assert fbgate.barrier_matrix_element(0, 1, b, d) == pytest.approx(0.0, abs=1e-14)


def test_pulse_envelope():
    assert fbgate.base_pulse(0.5, 2.0, 1.0) == pytest.approx(0.5)
    spec = fbgate.PulseSpec()
    spec.omega0, spec.tau, spec.omega_max = 2.0, 10.0, 0.3
    spec.freqs = fbgate.randomize_frequencies(2, 10.0, 5)
    spec.a, spec.b = [0.4, -0.2], [0.1, 0.3]
    assert spec(0.0) == 0.0 and spec(10.0) == 0.0
    assert max(abs(spec(t)) for t in np.linspace(0, 10, 1001)) <= 0.3
    with pytest.raises(fbgate.Error):
        fbgate.base_pulse(11.0, 2.0, 10.0)


def test_config_errors_are_typed():
    with pytest.raises(fbgate.ConfigError) as err:
        fbgate.parse_config('{"job": "gate", "colour": 1}')
    assert "colour" in str(err.value)


def test_spectrum_and_gate_from_shipped_config(tmp_path):
    doc = json.loads((SOURCE / "configs" / "gate.json").read_text())
    doc["feshbach"]["n_pair"] = 6
    doc["feshbach"]["n_mol"] = 2
    doc["pulse"]["tau"]["value"] = 60
    doc["propagation"]["n_steps"] = 3000
    doc["pulse"]["omega0"] = 1.0
    cfg = fbgate.parse_config(json.dumps(doc))
    assert cfg.gate.k == pytest.approx(0.2134, rel=1e-3)

    model = fbgate.build_model(cfg.trap, cfg.feshbach)
    point = fbgate.spectrum_at(model, 201.0, 12.3, 16.3)
    assert point.levels and all(12.3 < lvl.energy < 16.3 for lvl in point.levels)

    problem = fbgate.build_gate_problem(model, cfg.gate)
    pulse = fbgate.PulseSpec()
    pulse.omega0, pulse.tau = 1.0, 60.0
    result = fbgate.run_gate(problem, pulse)
    assert 0.0 <= result["fidelity"] <= 1.0
    assert result["norm_drift"] < 1e-8

    files = fbgate.run_job(cfg, tmp_path)
    names = sorted(Path(f).name for f in files)
    assert names == ["gate_result.json", "trajectory.csv"]
    payload = json.loads((tmp_path / "gate_result.json").read_text())
    assert payload["result"]["fidelity"] == pytest.approx(result["fidelity"], abs=1e-12)
    assert payload["config_hash"] == "fnv1a64:" + cfg.config_hash
