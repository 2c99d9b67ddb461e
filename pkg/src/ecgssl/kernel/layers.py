"""Forward/backward kernels for the fixed 1-D CNN architectures.

Conventions:
  - activations are (batch, length, channels) or (batch, features);
  - every forward returns (output, cache) and the matching ``*_backward``
    takes (grad_output, cache);
  - kernels preserve the input dtype (float32 for training, float64 for
    gradient checking).

Convolutions use "same" zero padding; max pools break ties toward the
lowest index so the backward pass is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import fft as sfft

from ..errors import ShapeError

@dataclass
class Param:
    """A named model parameter with a trainability flag."""

    value: np.ndarray
    trainable: bool = True


def _pad_lr(k: int) -> tuple[int, int]:
    # "same" padding; for even kernels the extra zero goes on the right
    return (k - 1) // 2, k // 2


def _freq_major(spec: np.ndarray) -> np.ndarray:
    # (B, F, C) -> contiguous (F, B, C) for batched per-frequency matmuls
    return np.ascontiguousarray(spec.transpose(1, 0, 2))


def conv1d(x: np.ndarray, kernels: np.ndarray, bias: np.ndarray):
    """Same-length 1-D cross-correlation plus bias.

    x: (B, L, Cin), kernels: (K, Cin, Cout), bias: (Cout,).

    Evaluated in the frequency domain (correlation theorem) with one batched
    complex matmul per frequency bin; the padded-input spectrum is cached so
    the backward pass reuses it.
    """
    if x.ndim != 3 or kernels.ndim != 3 or x.shape[2] != kernels.shape[1]:
        raise ShapeError(f"conv1d: input {x.shape} incompatible with kernels {kernels.shape}")
    if bias.shape != (kernels.shape[2],):
        raise ShapeError(f"conv1d: bias {bias.shape} incompatible with kernels {kernels.shape}")
    length = x.shape[1]
    k = kernels.shape[0]
    pl, pr = _pad_lr(k)
    n = sfft.next_fast_len(length + 2 * k - 2, real=True)
    xp = np.pad(x, ((0, 0), (pl, pr), (0, 0)))
    xpf = _freq_major(sfft.rfft(xp, n=n, axis=1))        # (F, B, Cin)
    kf = sfft.rfft(kernels, n=n, axis=0)                 # (F, Cin, Cout)
    # out[l] = sum_k xp[l+k] w[k]  ==  irfft(conj(Wf) . Xpf) at lags [0, L)
    yf = xpf @ np.conj(kf)                               # (F, B, Cout)
    y = sfft.irfft(np.ascontiguousarray(yf.transpose(1, 0, 2)), n=n, axis=1)
    out = y[:, :length, :].astype(x.dtype, copy=True)
    out += bias
    cache = (xpf, kf, kernels.shape, x.shape, n)
    return out, cache


def conv1d_backward(grad_out: np.ndarray, cache):
    xpf, kf, k_shape, x_shape, n = cache
    k, c_in, c_out = k_shape
    pl, pr = _pad_lr(k)
    length = x_shape[1]
    real_dtype = np.float64 if grad_out.dtype == np.float64 else np.float32

    grad_bias = grad_out.sum(axis=(0, 1))

    gf = _freq_major(sfft.rfft(grad_out, n=n, axis=1))   # (F, B, Cout)

    # dK[k] = sum_{b,l} g[l] xp[l+k]  ==  irfft(sum_b conj(Gf) . Xpf) at lags [0, K)
    dkf = np.matmul(xpf.transpose(0, 2, 1), np.conj(gf))  # (F, Cin, Cout)
    grad_kernels = sfft.irfft(dkf, n=n, axis=0)[:k].astype(real_dtype, copy=False)

    # dxp[t] = sum_{k} g[t-k] w[k]  ==  plain convolution, irfft(Gf . Wf)
    dxf = gf @ kf.transpose(0, 2, 1)                      # (F, B, Cin)
    dxp = sfft.irfft(np.ascontiguousarray(dxf.transpose(1, 0, 2)), n=n, axis=1)
    grad_x = dxp[:, pl:pl + length, :].astype(real_dtype, copy=True)
    return grad_x, grad_kernels, grad_bias


def relu(x: np.ndarray):
    return np.maximum(x, 0), (x > 0)


def relu_backward(grad_out: np.ndarray, cache):
    return grad_out * cache


def sigmoid(x: np.ndarray):
    from scipy.special import expit

    y = expit(x)
    return y, y


def sigmoid_backward(grad_out: np.ndarray, cache):
    y = cache
    return grad_out * y * (1 - y)


def maxpool1d(x: np.ndarray, pool: int = 8, stride: int = 2):
    """Channelwise windowed max over time: (B, L, C) -> (B, L', C)."""
    b, length, c = x.shape
    if length < pool:
        raise ShapeError(f"maxpool1d: length {length} < pool {pool}")
    w = sliding_window_view(x, pool, axis=1)[:, ::stride]  # (B, L', C, pool)
    arg = w.argmax(axis=3)
    out = np.take_along_axis(w, arg[..., None], axis=3)[..., 0]
    return out, (x.shape, arg, pool, stride, x.dtype)


def maxpool1d_backward(grad_out: np.ndarray, cache):
    x_shape, arg, pool, stride, dtype = cache
    b, length, c = x_shape
    lp = arg.shape[1]
    grad_x = np.zeros(x_shape, dtype=dtype)
    # position of each window max in the input time axis
    t = arg + stride * np.arange(lp)[None, :, None]
    b_idx = np.arange(b)[:, None, None]
    c_idx = np.arange(c)[None, None, :]
    np.add.at(grad_x, (b_idx, t, c_idx), grad_out)
    return grad_x


def global_maxpool(x: np.ndarray):
    """Per-channel max over time: (B, L, C) -> (B, C)."""
    if x.shape[1] < 1:
        raise ShapeError("global_maxpool: empty time axis")
    arg = x.argmax(axis=1)
    out = np.take_along_axis(x, arg[:, None, :], axis=1)[:, 0]
    return out, (x.shape, arg, x.dtype)


def global_maxpool_backward(grad_out: np.ndarray, cache):
    x_shape, arg, dtype = cache
    grad_x = np.zeros(x_shape, dtype=dtype)
    b_idx = np.arange(x_shape[0])[:, None]
    c_idx = np.arange(x_shape[2])[None, :]
    grad_x[b_idx, arg, c_idx] = grad_out
    return grad_x


def dense(x: np.ndarray, weights: np.ndarray, bias: np.ndarray):
    """Affine map: (B, Din) @ (Din, Dout) + (Dout,)."""
    if x.shape[1] != weights.shape[0] or bias.shape != (weights.shape[1],):
        raise ShapeError(f"dense: input {x.shape}, weights {weights.shape}, bias {bias.shape}")
    return x @ weights + bias, (x, weights)


def dense_backward(grad_out: np.ndarray, cache):
    x, weights = cache
    return grad_out @ weights.T, x.T @ grad_out, grad_out.sum(axis=0)


def dropout(x: np.ndarray, rate: float, rng: np.random.Generator | None, training: bool):
    """Inverted dropout: survivors scaled by 1/(1-rate); identity at inference."""
    if not 0 <= rate < 1:
        raise ShapeError(f"dropout rate {rate} outside [0, 1)")
    if not training or rate == 0.0:
        return x, None
    mask = (rng.random(x.shape) >= rate).astype(x.dtype) / (1.0 - rate)
    return x * mask, mask


def dropout_backward(grad_out: np.ndarray, cache):
    return grad_out if cache is None else grad_out * cache
