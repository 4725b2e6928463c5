"""Synthetic corpora and simulated participants.

Used by the end-to-end reproduction runs: smoothed uniform noise stands
in for photographs (local spatial correlation gives the patch
statistics their structure), and simulated participants judge a pattern
"random" with probability logistic in its standardized
natural-randomness score plus a per-participant bias.
"""

from __future__ import annotations

import math

import numpy as np

from scenestat.experiment import StimulusSet
from scenestat.grid import GrayImage
from scenestat.stats import JudgmentAggregate, standardize


def _box_blur(values: np.ndarray, radius: int) -> np.ndarray:
    """Separable edge-padded box filter via cumulative sums."""
    if radius < 1:
        return values.astype(float)
    size = 2 * radius + 1
    out = values.astype(float)
    for axis in (0, 1):
        pad = [(0, 0), (0, 0)]
        pad[axis] = (radius, radius)
        csum = np.cumsum(np.pad(out, pad, mode="edge"), axis=axis)
        zero_shape = list(csum.shape)
        zero_shape[axis] = 1
        csum = np.concatenate([np.zeros(zero_shape), csum], axis=axis)
        n = out.shape[axis]
        out = (
            csum.take(np.arange(size, size + n), axis=axis)
            - csum.take(np.arange(n), axis=axis)
        ) / size
    return out


def smoothed_noise_image(
    rng: np.random.Generator, width: int = 128, height: int = 128, radius: int = 3
) -> GrayImage:
    """Uniform noise blurred twice, rescaled to use the full [0, 255] range."""
    values = rng.uniform(0.0, 1.0, size=(height, width))
    values = _box_blur(_box_blur(values, radius), radius)
    lo, hi = values.min(), values.max()
    scaled = np.round((values - lo) / (hi - lo) * 255.0).astype(np.uint8)
    return GrayImage(scaled)


def make_corpus(
    n_images: int, width: int = 128, height: int = 128, seed: int = 0, radius: int = 3
) -> list[GrayImage]:
    rng = np.random.default_rng(seed)
    return [smoothed_noise_image(rng, width, height, radius) for _ in range(n_images)]


def simulate_judgments(
    stimulus_set: StimulusSet,
    natural_scores: dict[int, float],
    n_participants: int,
    seed: int,
    slope: float = 2.0,
    participant_sd: float = 0.5,
) -> list[JudgmentAggregate]:
    """Bernoulli judgments with P(random) logistic in natural randomness.

    ``natural_scores`` maps pattern bits to the natural-randomness score;
    each participant adds a normal bias to the logit.
    """
    z = standardize([natural_scores[bits] for bits in stimulus_set.patterns])
    rng = np.random.default_rng(seed)
    n_random = np.zeros(len(stimulus_set.patterns), dtype=int)
    for _ in range(n_participants):
        bias = rng.normal(0.0, participant_sd)
        probabilities = 1.0 / (1.0 + np.exp(-(slope * z + bias)))
        n_random += rng.uniform(size=z.size) < probabilities
    return [
        JudgmentAggregate(
            pattern_hex=stimulus_set.pattern_hex(i),
            n_random=int(n_random[i]),
            n_total=n_participants,
        )
        for i in range(len(stimulus_set.patterns))
    ]
