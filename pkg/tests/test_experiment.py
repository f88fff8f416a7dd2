import numpy as np
import pytest

from dyntomo.dynamics import ModelId, make_model
from dyntomo.experiment import (
    ConfigError,
    ExperimentConfig,
    run_pipeline,
    run_sweep,
    sample_frequencies,
    simulate_probabilities,
    truth_state,
)
from dyntomo.measurement import builtin, probabilities
from dyntomo.states import maximally_mixed, random_density

DEPH = make_model(ModelId("dephasing"))
PAULI = make_model(ModelId("pauli_rud"))
WEYL = make_model(ModelId("weyl_rud"))


def cfg(**kw):
    return ExperimentConfig.from_dict(kw)


def test_simulate_at_time_zero_is_born_rule():
    rho = random_density(2, 11)
    ops = builtin("qubit_m1_m2")
    p = simulate_probabilities(rho, DEPH, ops, (0.0,))
    np.testing.assert_allclose(p[:, 0], probabilities(ops, rho), atol=1e-15)


def test_maximally_mixed_is_stationary():
    ops = builtin("qubit_m1_m2")
    p = simulate_probabilities(maximally_mixed(2), DEPH, ops, (0.0, 0.5, 3.0))
    for row, e in zip(p, ops.mats):
        np.testing.assert_allclose(row, np.trace(e).real / 2, atol=1e-15)


@pytest.mark.parametrize("m,ops", [(DEPH, "qubit_m1_m2"), (PAULI, "qubit_m0"), (WEYL, "sic_qutrit")])
def test_pictures_agree(m, ops):
    rho = random_density(m.dim, 2)
    times = (0.0, 0.3, 1.1, 4.0)
    a = simulate_probabilities(rho, m, builtin(ops), times)
    b = simulate_probabilities(rho, m, builtin(ops), times, picture="heisenberg")
    np.testing.assert_allclose(a, b, atol=1e-12)
    with pytest.raises(ValueError):
        simulate_probabilities(rho, m, builtin(ops), times, picture="interaction")


def test_sample_frequencies_edges_and_concentration():
    p = np.array([[0.0, 1.0]])
    np.testing.assert_array_equal(sample_frequencies(p, 1000, 3), p)
    p = np.full((10, 10), 0.37)
    f = sample_frequencies(p, 1_000_000, 9)
    assert np.mean(np.abs(f - p) <= 0.002) >= 0.99
    with pytest.raises(ValueError):
        sample_frequencies(p, 0, 1)
    with pytest.raises(ValueError):
        sample_frequencies(np.array([1.5]), 10, 1)


def test_sample_frequencies_deterministic():
    p = np.array([[0.2, 0.4], [0.6, 0.8]])
    np.testing.assert_array_equal(sample_frequencies(p, 500, 42, 3), sample_frequencies(p, 500, 42, 3))
    assert not np.array_equal(sample_frequencies(p, 500, 42, 3), sample_frequencies(p, 500, 43, 3))


def test_truth_state_seeding():
    c = cfg(preset=3, trials=3, master_seed=5)
    a, b = truth_state(c, 0), truth_state(c, 1)
    assert not np.allclose(a.mat, b.mat)
    np.testing.assert_array_equal(a.mat, truth_state(c, 0).mat)
    pure = truth_state(cfg(preset=2, truth={"kind": "random", "pure": True}), 0)
    assert np.trace(pure.mat @ pure.mat).real == pytest.approx(1, abs=1e-12)


@pytest.mark.parametrize("preset", [2, 3, 4])
def test_exact_pipeline_recovers_truth(preset):
    rep = run_pipeline(cfg(preset=preset, trials=20, master_seed=1))
    assert rep.ok
    assert rep.fidelities.min() >= 1 - 1e-9


def test_noisy_estimates_are_states():
    rep = run_pipeline(cfg(preset=3, shots=200, trials=10))
    assert rep.ok
    for t in rep.trials:
        w = np.linalg.eigvalsh(t.estimate.mat)
        assert w.min() >= -1e-12
        assert np.trace(t.estimate.mat).real == pytest.approx(1, abs=1e-12)
        assert 0 <= t.fidelity <= 1 + 1e-12


def test_pipeline_deterministic_and_worker_independent():
    a = run_pipeline(cfg(preset=3, shots=1000, trials=6, master_seed=7))
    b = run_pipeline(cfg(preset=3, shots=1000, trials=6, master_seed=7, workers=3))
    np.testing.assert_array_equal(a.fidelities, b.fidelities)


def test_repeated_time_is_reported():
    rep = run_pipeline(cfg(model={"model": "dephasing"}, initial_ops="qubit_m1_m2", times=[0.5, 0.5]))
    assert not rep.ok
    assert rep.error["type"] == "SolvabilityError"
    assert "distinct time instants" in rep.error["message"]


def test_non_ic_is_reported():
    rep = run_pipeline(cfg(model={"model": "pauli_rud"}, initial_ops={"builtin": "sic_qubit", "select": [0]}, times=[0.1, 0.5, 1, 2]))
    assert rep.error["type"] == "NotInformationallyComplete"


def test_report_json_shape():
    d = run_pipeline(cfg(preset=2, trials=2)).to_dict()
    assert d["ok"] and d["aggregate"]["trials"] == 2
    assert {"det", "condition", "rank"} <= set(d["gamma"])


def test_sweep():
    c = cfg(preset=3, trials=4, master_seed=2)
    res, reps = run_sweep(c, [100, 10_000])
    assert [r[0] for r in res.rows] == [100, 10_000]
    assert res.to_csv().splitlines()[0] == "shots,mean_fidelity,std_fidelity,mean_cond"
    assert res.to_csv() == run_sweep(c, [100, 10_000])[0].to_csv()
    with pytest.raises(ConfigError):
        run_sweep(c, [])


@pytest.mark.parametrize(
    "obj,field",
    [
        ({}, "model"),
        ({"model": {"model": "dephasing"}}, "initial_ops"),
        ({"model": {"model": "dephasing"}, "initial_ops": "qubit_m1_m2"}, "times"),
        ({"preset": 7}, "preset"),
        ({"preset": 2, "shots": 0}, "shots"),
        ({"preset": 2, "shots": "many"}, "shots"),
        ({"preset": 2, "times": [-1, 2]}, "times"),
        ({"preset": 2, "initial_ops": "nope"}, "initial_ops"),
        ({"preset": 2, "model": {"model": "pauli_rud", "rates": [1, 1, 2]}}, "model"),
        ({"preset": 2, "truth": {"kind": "explicit", "density": {"dim": 3, "re": np.eye(3).tolist(), "im": np.zeros((3, 3)).tolist()}}}, "truth"),
        ({"preset": 2, "colour": "red"}, "colour"),
        ({"preset": 2, "trials": 0}, "trials"),
    ],
)
def test_config_errors(obj, field):
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_dict(obj)
    assert info.value.field == field


def test_master_seed_override():
    assert ExperimentConfig.from_dict({"preset": 2, "master_seed": 1}, master_seed=9).master_seed == 9
