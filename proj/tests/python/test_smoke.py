import math

import pytest

import metafl


def test_softmax_and_projection():
    w = metafl.softmax_neg([0.1, 0.5], 1.0)
    assert w == pytest.approx([0.598688, 0.401312], abs=1e-6)
    assert sum(metafl.project_simplex([1.2, -0.1])) == pytest.approx(1.0)
    assert metafl.project_simplex([1.2, -0.1]) == pytest.approx([1.0, 0.0], abs=1e-9)


def test_solvers_agree():
    errors = [0.3, 0.1, 0.7, 0.2]
    closed = metafl.weights_closed_form(errors, 2.0)
    weights, iters, residual = metafl.weights_iterative(errors, alpha=2.0)
    assert iters > 0
    assert residual < 1e-10
    assert weights == pytest.approx(closed, abs=1e-6)


def test_fedavg_embedding():
    sizes = [10, 30, 60]
    errors = [-math.log(n) for n in sizes]
    thetas = [[1.0, 0.0], [0.0, 1.0], [2.0, 2.0]]
    theta, weights = metafl.meta_agg(thetas, errors, alpha=1.0)
    assert weights == pytest.approx(metafl.fedavg_weights(sizes), abs=1e-12)
    assert theta == pytest.approx([1.3, 1.5], abs=1e-12)


def test_phi():
    assert metafl.phi_objective([0.5, 0.5], [0.0, 0.0], 1.0) == pytest.approx(-math.log(2))
    assert metafl.phi_gradient([0.5, 0.5], [0.0, 0.0], 1.0)[0] == pytest.approx(1 - math.log(2))


def test_errors_map_to_exceptions():
    with pytest.raises(metafl.ConfigError):
        metafl.parse_config("rounds = 2\n")
    with pytest.raises(metafl.Error):
        metafl.preset("no_such_preset")
    with pytest.raises(ValueError):
        metafl.softmax_neg([], 1.0)


def test_run_preset_is_deterministic():
    text = metafl.preset("preset_iid").replace("rounds = 10", "rounds = 3")
    a = metafl.run(text)
    b = metafl.run(text)
    assert len(a["history"]) == 3
    assert a == b
    for rec in a["history"]:
        assert sum(rec["weights"]) == pytest.approx(1.0, abs=1e-9)
        assert 0.0 <= rec["global_val_accuracy"] <= 1.0


def test_diagnose_and_presets():
    assert "preset_noisy_clients" in metafl.preset_names()
    d = metafl.diagnose(metafl.preset("preset_iid"))
    assert d["kl_diagnostic"] < 0.05
    assert d["contraction_estimate"] < 1.0
    assert d["jensen_gap"] >= -1e-9
    assert metafl.kl_divergence_diagnostic([[0, 0], [1, 1]], 2) == pytest.approx(math.log(2))
