"""Pretext signal transformations and pseudo-labeled dataset construction.

Each transform takes a 1-D segment and returns a new segment of identical
length. Stochastic transforms are keyed by explicit seeds; dataset
construction derives a private stream per (segment index, transform id) so
results do not depend on iteration order.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .errors import ParameterError
from .rng import stream


class TransformId(IntEnum):
    ORIGINAL = 0
    NOISE = 1
    SCALE = 2
    NEGATE = 3
    HFLIP = 4
    PERMUTE = 5
    TIME_WARP = 6


@dataclass
class TransformParams:
    """Empirically chosen transformation parameters."""

    noise_sigma_rel: float = 0.5
    scale_factor: float = 2.0
    permute_pieces: int = 10
    warp_pieces: int = 4
    warp_stretch: float = 1.25
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.noise_sigma_rel <= 0:
            raise ParameterError("noise_sigma_rel must be positive")
        if self.scale_factor <= 0 or self.scale_factor == 1.0:
            raise ParameterError("scale_factor must be positive and != 1")
        if self.permute_pieces < 2:
            raise ParameterError("permute_pieces must be >= 2")
        if self.warp_pieces < 2 or self.warp_pieces % 2 != 0:
            raise ParameterError("warp_pieces must be even and >= 2")
        if self.warp_stretch <= 1.0:
            raise ParameterError("warp_stretch must be > 1")


@dataclass
class PretextSample:
    """A (possibly transformed) segment with its transformation pseudo-label."""

    segment: np.ndarray
    task: TransformId


def add_noise(seg: np.ndarray, sigma_rel: float, seed: int) -> np.ndarray:
    """Add seeded Gaussian noise with std = sigma_rel * std(seg).

    A zero-variance segment falls back to absolute std = sigma_rel so the
    output is still perturbed.
    """
    if sigma_rel <= 0:
        raise ParameterError("sigma_rel must be positive")
    seg = np.asarray(seg, dtype=np.float64)
    sigma = sigma_rel * seg.std()
    if sigma == 0.0:
        sigma = sigma_rel
    rng = stream(seed)
    return seg + sigma * rng.standard_normal(seg.size)


def scale(seg: np.ndarray, factor: float) -> np.ndarray:
    if factor <= 0:
        raise ParameterError("factor must be positive")
    return np.asarray(seg, dtype=np.float64) * factor


def negate(seg: np.ndarray) -> np.ndarray:
    return -np.asarray(seg, dtype=np.float64)


def hflip(seg: np.ndarray) -> np.ndarray:
    return np.asarray(seg, dtype=np.float64)[::-1].copy()


def permute(seg: np.ndarray, pieces: int, seed: int) -> np.ndarray:
    """Shuffle equal contiguous blocks with a non-identity permutation."""
    seg = np.asarray(seg, dtype=np.float64)
    if pieces < 2:
        raise ParameterError("pieces must be >= 2")
    if seg.size % pieces != 0:
        raise ParameterError(f"length {seg.size} not divisible by {pieces} pieces")
    rng = stream(seed)
    order = rng.permutation(pieces)
    while np.array_equal(order, np.arange(pieces)):
        order = rng.permutation(pieces)
    blocks = seg.reshape(pieces, -1)
    return blocks[order].reshape(-1).copy()


def time_warp(seg: np.ndarray, pieces: int, stretch: float, seed: int) -> np.ndarray:
    """Stretch a random half of equal blocks and squeeze the other half.

    Stretched blocks are lengthened by ``stretch`` and squeezed ones
    shortened by ``1/stretch`` via linear interpolation; the concatenation is
    then linearly resampled back to the original length.
    """
    seg = np.asarray(seg, dtype=np.float64)
    if pieces < 2 or pieces % 2 != 0:
        raise ParameterError("pieces must be even and >= 2")
    if seg.size % pieces != 0:
        raise ParameterError(f"length {seg.size} not divisible by {pieces} pieces")
    if stretch <= 1.0:
        raise ParameterError("stretch must be > 1")
    rng = stream(seed)
    stretched = set(rng.permutation(pieces)[: pieces // 2].tolist())
    block_len = seg.size // pieces
    warped = []
    for i in range(pieces):
        block = seg[i * block_len:(i + 1) * block_len]
        factor = stretch if i in stretched else 1.0 / stretch
        new_len = max(2, int(round(block_len * factor)))
        xp = np.arange(block_len)
        xq = np.linspace(0.0, block_len - 1, new_len)
        warped.append(np.interp(xq, xp, block))
    y = np.concatenate(warped)
    xq = np.linspace(0.0, y.size - 1, seg.size)
    return np.interp(xq, np.arange(y.size), y)


def apply_transform(seg: np.ndarray, task: TransformId, params: TransformParams,
                    seed: int) -> np.ndarray:
    if task == TransformId.ORIGINAL:
        return np.asarray(seg, dtype=np.float64).copy()
    if task == TransformId.NOISE:
        return add_noise(seg, params.noise_sigma_rel, seed)
    if task == TransformId.SCALE:
        return scale(seg, params.scale_factor)
    if task == TransformId.NEGATE:
        return negate(seg)
    if task == TransformId.HFLIP:
        return hflip(seg)
    if task == TransformId.PERMUTE:
        return permute(seg, params.permute_pieces, seed)
    if task == TransformId.TIME_WARP:
        return time_warp(seg, params.warp_pieces, params.warp_stretch, seed)
    raise ParameterError(f"unknown transform {task}")


def build_pretext_dataset(segments: list[np.ndarray],
                          params: TransformParams) -> list[PretextSample]:
    """Emit every segment once per transformation, pseudo-labeled by task id.

    Per-sample randomness comes from a stream keyed by
    (params.rng_seed, segment index, transform id), so two builds with equal
    seeds are bit-identical and construction parallelizes trivially.
    """
    if not segments:
        raise ParameterError("segments must be non-empty")
    samples = []
    for i, seg in enumerate(segments):
        for task in TransformId:
            # stream() keys on the full tuple; fold indices into one seed arg
            sub_seed_rng = stream(params.rng_seed, i, int(task))
            seed = int(sub_seed_rng.integers(0, 2 ** 62))
            samples.append(PretextSample(apply_transform(seg, task, params, seed), task))
    return samples
