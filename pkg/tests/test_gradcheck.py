import numpy as np
import pytest

import ecgssl.kernel.layers as layers
from ecgssl.errors import ParameterError
from ecgssl.kernel import Param
from ecgssl.kernel.gradcheck import (
    compare_gradients,
    finite_difference_gradients,
    frozen_parameter_check,
    run_gradcheck_suite,
)


def test_suite_all_pass():
    results = run_gradcheck_suite(seed=0)
    assert len(results) == 8
    for r in results:
        assert r.passed, f"{r.name}: max rel error {r.max_rel_error}"


def test_suite_errors_are_tiny():
    # analytic gradients should agree far below the acceptance tolerance
    for r in run_gradcheck_suite(seed=1):
        assert r.max_rel_error < 1e-6, f"{r.name}: {r.max_rel_error}"


def test_suite_deterministic():
    a = run_gradcheck_suite(seed=2)
    b = run_gradcheck_suite(seed=2)
    assert [(r.name, r.max_rel_error) for r in a] == [(r.name, r.max_rel_error) for r in b]


def test_frozen_parameter_check():
    assert frozen_parameter_check(seed=0)


def test_finite_difference_on_quadratic():
    params = {"w": Param(np.array([1.0, -2.0, 0.5]))}

    def loss(p):
        return float(np.sum(p["w"].value ** 2))

    fd = finite_difference_gradients(loss, params)
    np.testing.assert_allclose(fd["w"], 2 * params["w"].value, atol=1e-7)


def test_finite_difference_skips_frozen():
    params = {
        "w": Param(np.ones(2)),
        "frozen": Param(np.ones(2), trainable=False),
    }
    fd = finite_difference_gradients(lambda p: float(p["w"].value.sum()), params)
    assert "frozen" not in fd
    np.testing.assert_allclose(fd["w"], 1.0, atol=1e-8)


def test_finite_difference_rejects_large_fragments():
    params = {"w": Param(np.zeros(20_000))}
    with pytest.raises(ParameterError):
        finite_difference_gradients(lambda p: 0.0, params)


def test_compare_gradients_zero_for_identical():
    g = {"w": np.array([1.0, 2.0])}
    assert compare_gradients(g, {k: v.copy() for k, v in g.items()}) == 0.0


def test_compare_gradients_reports_relative_error():
    analytic = {"w": np.array([1.0])}
    numeric = {"w": np.array([1.1])}
    assert compare_gradients(analytic, numeric) == pytest.approx(0.1 / 1.1)


def test_detects_injected_sign_error(monkeypatch):
    # flip the sign of the dense input-gradient: the conv fragment must fail
    orig = layers.dense_backward

    def broken(grad_out, cache):
        dx, dw, db = orig(grad_out, cache)
        return dx, -dw, db

    monkeypatch.setattr(layers, "dense_backward", broken)
    import ecgssl.kernel.gradcheck as gc

    monkeypatch.setattr(gc.L, "dense_backward", broken)
    results = gc.run_gradcheck_suite(seed=0)
    failed = [r for r in results if not r.passed]
    assert failed, "sign-flipped dense gradient went undetected"


def test_detects_injected_scale_error(monkeypatch):
    import ecgssl.kernel.gradcheck as gc

    orig = layers.conv1d_backward

    def broken(grad_out, cache):
        dx, dk, db = orig(grad_out, cache)
        return dx, 0.5 * dk, db

    monkeypatch.setattr(gc.L, "conv1d_backward", broken)
    results = gc.run_gradcheck_suite(seed=0)
    names_failed = {r.name for r in results if not r.passed}
    assert "conv1d+relu+global_maxpool+dense" in names_failed
