"""Finite-difference verification of every analytic gradient.

Each check builds a small model fragment in float64, computes analytic
gradients, and compares them against central finite differences
(h = 1e-4) coordinate by coordinate. Relative error uses
|analytic - numeric| / max(|analytic|, |numeric|, 0.01).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import ParameterError
from ..rng import stream
from . import layers as L
from . import losses


FD_STEP = 1e-4
DEFAULT_TOL = 1e-4


@dataclass
class CheckResult:
    name: str
    max_rel_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def finite_difference_gradients(loss_fn: Callable[[dict[str, L.Param]], float],
                                params: dict[str, L.Param],
                                h: float = FD_STEP) -> dict[str, np.ndarray]:
    """Central finite differences of a scalar loss w.r.t. every trainable param."""
    n_total = sum(p.value.size for p in params.values())
    if n_total >= 10_000:
        raise ParameterError(f"fragment has {n_total} parameters; gradcheck is desk-scale (< 1e4)")
    grads = {}
    for name, p in params.items():
        if not p.trainable:
            continue
        g = np.zeros_like(p.value)
        flat = p.value.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = loss_fn(params)
            flat[i] = orig - h
            down = loss_fn(params)
            flat[i] = orig
            gflat[i] = (up - down) / (2 * h)
        grads[name] = g
    return grads


def compare_gradients(analytic: dict[str, np.ndarray],
                      numeric: dict[str, np.ndarray]) -> float:
    worst = 0.0
    for name, num in numeric.items():
        ana = analytic.get(name)
        if ana is None:
            ana = np.zeros_like(num)
        denom = np.maximum(np.maximum(np.abs(ana), np.abs(num)), 1e-2)
        worst = max(worst, float(np.max(np.abs(ana - num) / denom)))
    return worst


def _check(name: str, params: dict[str, L.Param],
           loss_and_grads: Callable[[dict[str, L.Param]], tuple[float, dict[str, np.ndarray]]],
           tol: float) -> CheckResult:
    analytic = loss_and_grads(params)[1]
    numeric = finite_difference_gradients(lambda p: loss_and_grads(p)[0], params)
    return CheckResult(name, compare_gradients(analytic, numeric), tol)


def _dense_sigmoid_bce(seed: int, tol: float) -> CheckResult:
    rng = stream(seed, 10)
    x = rng.standard_normal((4, 8))
    y = (rng.random(4) > 0.5).astype(np.float64)
    params = {
        "w": L.Param(0.5 * rng.standard_normal((8, 1))),
        "b": L.Param(0.1 * rng.standard_normal(1)),
    }

    def f(p):
        z, dc = L.dense(x, p["w"].value, p["b"].value)
        prob, sc = L.sigmoid(z[:, 0])
        loss = float(losses.bce_loss(prob, y).mean())
        dprob = losses.bce_loss_backward(prob, y) / y.size
        dz = L.sigmoid_backward(dprob, sc)[:, None]
        _, gw, gb = L.dense_backward(dz, dc)
        return loss, {"w": gw, "b": gb}

    return _check("dense+sigmoid+bce", params, f, tol)


def _conv_relu_gpool_dense(seed: int, tol: float) -> CheckResult:
    rng = stream(seed, 11)
    x = rng.standard_normal((2, 32, 2))
    y = (rng.random(2) > 0.5).astype(np.float64)
    params = {
        "k": L.Param(0.5 * rng.standard_normal((8, 2, 3))),
        "kb": L.Param(0.1 * rng.standard_normal(3)),
        "w": L.Param(0.5 * rng.standard_normal((3, 1))),
        "b": L.Param(0.1 * rng.standard_normal(1)),
    }

    def f(p):
        h1, c1 = L.conv1d(x, p["k"].value, p["kb"].value)
        h2, c2 = L.relu(h1)
        h3, c3 = L.global_maxpool(h2)
        z, c4 = L.dense(h3, p["w"].value, p["b"].value)
        prob, sc = L.sigmoid(z[:, 0])
        loss = float(losses.bce_loss(prob, y).mean())
        dprob = losses.bce_loss_backward(prob, y) / y.size
        dz = L.sigmoid_backward(dprob, sc)[:, None]
        dh3, gw, gb = L.dense_backward(dz, c4)
        dh2 = L.global_maxpool_backward(dh3, c3)
        dh1 = L.relu_backward(dh2, c2)
        _, gk, gkb = L.conv1d_backward(dh1, c1)
        return loss, {"k": gk, "kb": gkb, "w": gw, "b": gb}

    return _check("conv1d+relu+global_maxpool+dense", params, f, tol)


def _conv_input_gradient(seed: int, tol: float) -> CheckResult:
    # checks the gradient w.r.t. the conv input by treating the input as the
    # parameter being perturbed
    rng = stream(seed, 12)
    kernels = 0.5 * rng.standard_normal((5, 2, 2))
    bias = 0.1 * rng.standard_normal(2)
    target = rng.standard_normal((1, 16, 2))
    params = {"x": L.Param(rng.standard_normal((1, 16, 2)))}

    def f(p):
        h, c = L.conv1d(p["x"].value, kernels, bias)
        loss = 0.5 * float(np.sum((h - target) ** 2))
        dx, _, _ = L.conv1d_backward(h - target, c)
        return loss, {"x": dx}

    return _check("conv1d input gradient", params, f, tol)


def _maxpool_fragment(seed: int, tol: float) -> CheckResult:
    rng = stream(seed, 13)
    target = rng.standard_normal((2, 5, 2))
    params = {"x": L.Param(rng.standard_normal((2, 16, 2)))}

    def f(p):
        h, c = L.maxpool1d(p["x"].value, pool=8, stride=2)
        loss = 0.5 * float(np.sum((h - target) ** 2))
        return loss, {"x": L.maxpool1d_backward(h - target, c)}

    return _check("maxpool1d", params, f, tol)


def _dense_ce(seed: int, tol: float) -> CheckResult:
    rng = stream(seed, 14)
    x = rng.standard_normal((4, 6))
    labels = rng.integers(0, 3, size=4)
    onehot = np.eye(3)[labels]
    params = {
        "w": L.Param(0.5 * rng.standard_normal((6, 3))),
        "b": L.Param(0.1 * rng.standard_normal(3)),
    }

    def f(p):
        # mirrors the downstream objective: per-class sigmoids renormalized to
        # sum to 1 before the categorical cross-entropy
        z, dc = L.dense(x, p["w"].value, p["b"].value)
        probs, sc = L.sigmoid(z)
        s = probs.sum(axis=1, keepdims=True)
        rho = probs / s
        loss = float(losses.cross_entropy(rho, onehot).mean())
        drho = losses.cross_entropy_backward(rho, onehot) / probs.shape[0]
        dprobs = (drho - (drho * rho).sum(axis=1, keepdims=True)) / s
        dz = L.sigmoid_backward(dprobs, sc)
        _, gw, gb = L.dense_backward(dz, dc)
        return loss, {"w": gw, "b": gb}

    return _check("dense+sigmoid+cross_entropy", params, f, tol)


def _l2_fragment(seed: int, tol: float) -> CheckResult:
    rng = stream(seed, 15)
    params = {"w": L.Param(rng.standard_normal((5, 4)))}
    beta = 0.0001

    def f(p):
        return losses.l2_penalty([p["w"].value], beta), {"w": losses.l2_penalty_grad(p["w"].value, beta)}

    return _check("l2_penalty", params, f, tol)


def _dropout_off_fragment(seed: int, tol: float) -> CheckResult:
    rng = stream(seed, 16)
    x = rng.standard_normal((3, 6))
    target = rng.standard_normal((3, 4))
    params = {"w": L.Param(0.5 * rng.standard_normal((6, 4)))}

    def f(p):
        z, dc = L.dense(x, p["w"].value, np.zeros(4))
        h, mc = L.dropout(z, 0.6, None, training=False)  # inference: identity
        loss = 0.5 * float(np.sum((h - target) ** 2))
        dh = L.dropout_backward(h - target, mc)
        _, gw, _ = L.dense_backward(dh, dc)
        return loss, {"w": gw}

    return _check("dense+dropout(inference)", params, f, tol)


def _multitask_fragment(seed: int, tol: float) -> CheckResult:
    rng = stream(seed, 17)
    x = rng.standard_normal((4, 6))
    labels = np.eye(3)[rng.integers(0, 3, size=4)]
    alphas = np.array([0.5, 0.3, 0.2])
    params = {"w": L.Param(0.5 * rng.standard_normal((6, 3)))}

    def f(p):
        z, dc = L.dense(x, p["w"].value, np.zeros(3))
        probs, sc = L.sigmoid(z)
        per_task = losses.bce_loss(probs, labels).mean(axis=0)
        loss = losses.multitask_loss(per_task, alphas)
        dprobs = losses.bce_loss_backward(probs, labels) * alphas[None, :] / probs.shape[0]
        dz = L.sigmoid_backward(dprobs, sc)
        _, gw, _ = L.dense_backward(dz, dc)
        return loss, {"w": gw}

    return _check("multitask weighted bce", params, f, tol)


def frozen_parameter_check(seed: int = 0) -> bool:
    """Frozen parameters must report exactly-zero gradients."""
    rng = stream(seed, 18)
    from ..models import build_emotion_network, build_trunk, emotion_forward

    trunk = build_trunk(seed, dtype=np.float64)
    net = build_emotion_network(seed, trunk=trunk, dtype=np.float64)
    from ..training import _emotion_loss_and_grads  # desk-scale reuse

    x = rng.standard_normal((2, 2560, 1))
    y = np.array([0, 1])
    _, grads = _emotion_loss_and_grads(net, x.astype(np.float64), y, l2_beta=0.0,
                                       dropout_rate=0.0, rng=None, training=False)
    return all(not net[k].trainable and k not in grads for k in net if k.startswith("trunk/"))


_CHECKS = (
    _dense_sigmoid_bce,
    _conv_relu_gpool_dense,
    _conv_input_gradient,
    _maxpool_fragment,
    _dense_ce,
    _l2_fragment,
    _dropout_off_fragment,
    _multitask_fragment,
)


def run_gradcheck_suite(seed: int = 0, tol: float = DEFAULT_TOL) -> list[CheckResult]:
    return [check(seed, tol) for check in _CHECKS]
