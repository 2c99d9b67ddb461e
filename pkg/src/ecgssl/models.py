"""The two fixed networks.

Shared convolutional trunk (both networks)::

    input (B, 2560, 1)
    -> [conv K=32, 32 filters, relu] x 2      (B, 2560, 32)
    -> maxpool(8, stride 2)                   (B, 1277, 32)
    -> [conv K=16, 64 filters, relu] x 2      (B, 1277, 64)
    -> maxpool(8, stride 2)                   (B, 635, 64)
    -> [conv K=8, 128 filters, relu] x 2      (B, 635, 128)
    -> global maxpool                         (B, 128)

On top of the trunk sit either 7 parallel transformation-recognition heads
(dense 128-128, one sigmoid unit each) or one emotion head (dense 64-64,
M sigmoid units). Hidden dense layers use ReLU with dropout after each
hidden activation.

Transfer copies the trunk parameters byte-for-byte into a downstream network
and marks them frozen; frozen parameters receive no gradients and no
optimizer state.
"""

from __future__ import annotations

import json
import zipfile
from pathlib import Path

import numpy as np

from .errors import ShapeError, TransferError, ValidationError
from .kernel.layers import (
    Param,
    conv1d,
    conv1d_backward,
    dense,
    dense_backward,
    dropout,
    dropout_backward,
    global_maxpool,
    global_maxpool_backward,
    maxpool1d,
    maxpool1d_backward,
    relu,
    relu_backward,
    sigmoid,
    sigmoid_backward,
)
from .rng import stream

INPUT_LEN = 2560
FEATURE_DIM = 128
NUM_TASKS = 7

# (kernel size, in channels, out channels) per conv layer; pools follow
# layers 1 and 3.
CONV_SPECS = ((32, 1, 32), (32, 32, 32), (16, 32, 64), (16, 64, 64), (8, 64, 128), (8, 128, 128))
POOL_AFTER = (1, 3)
POOL_SIZE = 8
POOL_STRIDE = 2

PRETEXT_HEAD_DIMS = (FEATURE_DIM, 128, 128, 1)
EMOTION_HEAD_DIMS = (FEATURE_DIM, 64, 64, 2)

MODEL_FORMAT_VERSION = 1


def _glorot(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int,
            fan_out: int, dtype) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def _he_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int,
                dtype) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def build_trunk(seed: int, dtype=np.float32, trainable: bool = True) -> dict[str, Param]:
    # He-style fan-in init: preserves activation variance through the deep
    # ReLU conv stack and converges measurably faster than Glorot here
    params: dict[str, Param] = {}
    for i, (k, c_in, c_out) in enumerate(CONV_SPECS):
        rng = stream(seed, 1, i)
        params[f"trunk/conv{i}/kernels"] = Param(
            _he_uniform(rng, (k, c_in, c_out), k * c_in, dtype), trainable)
        params[f"trunk/conv{i}/bias"] = Param(np.zeros(c_out, dtype=dtype), trainable)
    return params


def _build_head(seed: int, prefix: str, dims: tuple[int, ...], salt: int,
                dtype=np.float32) -> dict[str, Param]:
    params: dict[str, Param] = {}
    n_layers = len(dims) - 1
    for i, (d_in, d_out) in enumerate(zip(dims[:-1], dims[1:])):
        rng = stream(seed, 2, salt, i)
        w = _glorot(rng, (d_in, d_out), d_in, d_out, dtype)
        if i == n_layers - 1:
            # small output layer: untrained heads start near p = 0.5
            w *= dtype(0.1)
        params[f"{prefix}/fc{i}/weights"] = Param(w)
        params[f"{prefix}/fc{i}/bias"] = Param(np.zeros(d_out, dtype=dtype))
    return params


def build_pretext_network(seed: int, dtype=np.float32) -> dict[str, Param]:
    """Trunk plus 7 independent transformation-recognition heads."""
    params = build_trunk(seed, dtype)
    for j in range(NUM_TASKS):
        params.update(_build_head(seed, f"head{j}", PRETEXT_HEAD_DIMS, j, dtype))
    return params


def build_emotion_network(seed: int, trunk: dict[str, Param] | None = None,
                          num_classes: int = 2, dtype=np.float32) -> dict[str, Param]:
    """Emotion classifier: transferred frozen trunk (or a fresh trainable one
    for the no-transfer supervised baseline) plus a dense head."""
    params = transfer_weights(trunk) if trunk is not None else build_trunk(seed, dtype)
    dims = EMOTION_HEAD_DIMS[:-1] + (num_classes,)
    params.update(_build_head(seed, "emotion", dims, 100, dtype))
    return params


def transfer_weights(source: dict[str, Param]) -> dict[str, Param]:
    """Deep-copy the trunk parameters of a trained network, frozen."""
    out: dict[str, Param] = {}
    for i, (k, c_in, c_out) in enumerate(CONV_SPECS):
        for leaf, shape in ((f"trunk/conv{i}/kernels", (k, c_in, c_out)),
                            (f"trunk/conv{i}/bias", (c_out,))):
            if leaf not in source:
                raise TransferError(f"source network has no parameter {leaf!r}")
            value = source[leaf].value
            if value.shape != shape:
                raise TransferError(f"{leaf}: expected shape {shape}, got {value.shape}")
            out[leaf] = Param(value.copy(), trainable=False)
    return out


def trunk_forward(params: dict[str, Param], x: np.ndarray,
                  need_cache: bool = True):
    """Run the shared trunk: (B, 2560, 1) -> (B, 128).

    Returns (features, caches, shape_trace); caches is None when
    need_cache is False (inference / frozen-trunk feature extraction).
    The trace lists one (length, channels) entry per architecture-table row:
    input, each conv pair, each pool, and the global pool.
    """
    if x.ndim != 3 or x.shape[1] != INPUT_LEN or x.shape[2] != 1:
        raise ShapeError(f"trunk expects (B, {INPUT_LEN}, 1), got {x.shape}")
    caches: list | None = [] if need_cache else None
    trace = [x.shape[1:]]
    for i in range(len(CONV_SPECS)):
        x, c = conv1d(x, params[f"trunk/conv{i}/kernels"].value,
                      params[f"trunk/conv{i}/bias"].value)
        if caches is not None:
            caches.append(("conv", i, c))
        x, c = relu(x)
        if caches is not None:
            caches.append(("relu", i, c))
        if i % 2 == 1:
            trace.append(x.shape[1:])  # end of a conv pair
        if i in POOL_AFTER:
            x, c = maxpool1d(x, POOL_SIZE, POOL_STRIDE)
            if caches is not None:
                caches.append(("pool", i, c))
            trace.append(x.shape[1:])
    feats, c = global_maxpool(x)
    if caches is not None:
        caches.append(("gpool", -1, c))
    trace.append((1, feats.shape[1]))
    return feats, caches, trace


def trunk_backward(grad_feats: np.ndarray, caches: list,
                   grads: dict[str, np.ndarray]) -> np.ndarray:
    g = grad_feats
    for kind, i, c in reversed(caches):
        if kind == "gpool":
            g = global_maxpool_backward(g, c)
        elif kind == "pool":
            g = maxpool1d_backward(g, c)
        elif kind == "relu":
            g = relu_backward(g, c)
        else:
            g, gk, gb = conv1d_backward(g, c)
            grads[f"trunk/conv{i}/kernels"] = gk
            grads[f"trunk/conv{i}/bias"] = gb
    return g


def head_forward(params: dict[str, Param], prefix: str, x: np.ndarray,
                 dropout_rate: float, rng: np.random.Generator | None,
                 training: bool):
    """Dense stack: hidden layers with ReLU + dropout, then output logits."""
    n_layers = len([k for k in params if k.startswith(f"{prefix}/fc") and k.endswith("weights")])
    caches = []
    for i in range(n_layers):
        x, c = dense(x, params[f"{prefix}/fc{i}/weights"].value,
                     params[f"{prefix}/fc{i}/bias"].value)
        caches.append(("dense", i, c))
        if i < n_layers - 1:
            x, c = relu(x)
            caches.append(("relu", i, c))
            x, c = dropout(x, dropout_rate, rng, training)
            caches.append(("dropout", i, c))
    return x, caches


def head_backward(grad_logits: np.ndarray, caches: list, prefix: str,
                  grads: dict[str, np.ndarray]) -> np.ndarray:
    g = grad_logits
    for kind, i, c in reversed(caches):
        if kind == "dropout":
            g = dropout_backward(g, c)
        elif kind == "relu":
            g = relu_backward(g, c)
        else:
            g, gw, gb = dense_backward(g, c)
            grads[f"{prefix}/fc{i}/weights"] = gw
            grads[f"{prefix}/fc{i}/bias"] = gb
    return g


def pretext_forward(params: dict[str, Param], batch: np.ndarray,
                    training: bool = False,
                    dropout_rate: float = 0.6,
                    rng: np.random.Generator | None = None,
                    need_cache: bool = False):
    """Per-task transformation probabilities, shape (B, 7)."""
    feats, trunk_caches, _ = trunk_forward(params, batch, need_cache=need_cache)
    probs = np.empty((batch.shape[0], NUM_TASKS), dtype=batch.dtype)
    head_caches = []
    for j in range(NUM_TASKS):
        logits, hc = head_forward(params, f"head{j}", feats, dropout_rate, rng, training)
        p, sc = sigmoid(logits[:, 0])
        probs[:, j] = p
        head_caches.append((hc, sc))
    if need_cache:
        return probs, (trunk_caches, head_caches)
    return probs


def emotion_forward(params: dict[str, Param], batch: np.ndarray,
                    training: bool = False,
                    dropout_rate: float = 0.6,
                    rng: np.random.Generator | None = None,
                    need_cache: bool = False):
    """Per-class sigmoid probabilities, shape (B, M); predict with argmax."""
    trunk_trainable = params["trunk/conv0/kernels"].trainable
    feats, trunk_caches, _ = trunk_forward(params, batch,
                                           need_cache=need_cache and trunk_trainable)
    logits, hc = head_forward(params, "emotion", feats, dropout_rate, rng, training)
    probs, sc = sigmoid(logits)
    if need_cache:
        return probs, (trunk_caches, hc, sc)
    return probs


def dense_weight_names(params: dict[str, Param]) -> list[str]:
    """Names of dense-layer weight matrices (the L2-regularized set)."""
    return sorted(k for k in params
                  if "/fc" in k and k.endswith("weights") and params[k].trainable)


# ---------------------------------------------------------------------------
# Serialization: a zip container with a JSON manifest plus one raw
# little-endian float32 file per named array. Round-trips are bit-exact.
# ---------------------------------------------------------------------------

def save_model(params: dict[str, Param], architecture: str, path: str | Path) -> None:
    path = Path(path)
    manifest = {
        "format_version": MODEL_FORMAT_VERSION,
        "architecture": architecture,
        "arrays": {
            name: {"shape": list(p.value.shape), "trainable": bool(p.trainable)}
            for name, p in sorted(params.items())
        },
    }
    with zipfile.ZipFile(path, "w", zipfile.ZIP_STORED) as zf:
        info = zipfile.ZipInfo("manifest.json")  # fixed timestamp: identical runs give identical bytes
        zf.writestr(info, json.dumps(manifest, indent=2, sort_keys=True))
        for name, p in sorted(params.items()):
            arr = np.ascontiguousarray(p.value, dtype="<f4")
            zf.writestr(zipfile.ZipInfo("arrays/" + name.replace("/", "__") + ".f32"),
                        arr.tobytes())


def load_model(path: str | Path) -> tuple[dict[str, Param], str]:
    path = Path(path)
    with zipfile.ZipFile(path) as zf:
        manifest = json.loads(zf.read("manifest.json"))
        version = manifest.get("format_version")
        if not isinstance(version, int) or version > MODEL_FORMAT_VERSION:
            raise ValidationError(
                f"{path}: model format version {version!r} is newer than supported "
                f"({MODEL_FORMAT_VERSION}); upgrade the package to load it")
        params: dict[str, Param] = {}
        for name, meta in manifest["arrays"].items():
            raw = zf.read("arrays/" + name.replace("/", "__") + ".f32")
            arr = np.frombuffer(raw, dtype="<f4").reshape(meta["shape"]).copy()
            params[name] = Param(arr, trainable=bool(meta["trainable"]))
    return params, manifest["architecture"]
