"""Binary spike encoders.

Two encoders turn continuous features into spike frames, i.e. 0/1 arrays of
shape (T, n_input) and dtype uint8:

* ``prob_mel_encode`` treats power-compressed mel values as Bernoulli firing
  probabilities, rescaled so that a target fraction of bins fires on average.
* ``population_encode`` maps each MFCC coefficient onto a bank of Gaussian
  tuning curves and thresholds the responses.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from ._seeding import derive_seed
from .features import MelSpectrogram, MfccSequence


class DegenerateRangeError(ValueError):
    pass


@dataclass(frozen=True)
class ProbMelEncoderConfig:
    gamma: float = 0.5
    target_active_fraction: float = 0.10
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")
        if not 0 < self.target_active_fraction < 1:
            raise ValueError("target_active_fraction must lie in (0, 1)")


def firing_probabilities(x: np.ndarray, gamma: float, scale: float) -> np.ndarray:
    return np.clip(scale * np.power(x, gamma), 0.0, 1.0)


def calibrate_scale(x: np.ndarray, gamma: float, target: float, iters: int = 100) -> float:
    """Bisect for the scale s with mean(min(1, s * x**gamma)) == target.

    Returns 0 for an all-zero input. If the target is unreachable (too few
    non-zero bins) the scale saturating every non-zero bin is returned.
    """
    compressed = np.power(np.asarray(x, dtype=np.float64), gamma)
    nz = compressed[compressed > 0]
    if nz.size == 0:
        return 0.0
    hi = 1.0 / nz.min()
    if np.minimum(1.0, hi * compressed).mean() <= target:
        return float(hi)
    lo = 0.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if np.minimum(1.0, mid * compressed).mean() < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def prob_mel_encode(spec: MelSpectrogram | np.ndarray, cfg: ProbMelEncoderConfig,
                    utterance_id=0, scale: float | None = None) -> np.ndarray:
    """Bernoulli-sample spike frames from a [0, 1] mel spectrogram.

    The random stream is a Philox generator keyed by (seed, utterance_id);
    frame ``t`` always consumes the same slice of that stream, so encoding is
    independent of scheduling. ``scale`` overrides the per-utterance
    calibration.
    """
    x = spec.frames if isinstance(spec, MelSpectrogram) else np.asarray(spec, dtype=np.float64)
    if x.size and (x.min() < 0 or x.max() > 1):
        raise ValueError("mel values must lie in [0, 1]")
    if scale is None:
        scale = calibrate_scale(x, cfg.gamma, cfg.target_active_fraction)
    p = firing_probabilities(x, cfg.gamma, scale)
    key = derive_seed("prob-mel", cfg.seed, utterance_id)
    u = np.random.Generator(np.random.Philox(key=key)).random(x.shape)
    return (u < p).astype(np.uint8)


@dataclass
class PopulationCoder:
    centers: np.ndarray  # (M, N_pop), strictly increasing along axis 1
    sigma: np.ndarray  # (M,)
    threshold: float

    def __post_init__(self):
        self.centers = np.atleast_2d(np.asarray(self.centers, dtype=np.float64))
        self.sigma = np.broadcast_to(
            np.asarray(self.sigma, dtype=np.float64), (self.centers.shape[0],)).copy()
        if not 0 < self.threshold < 1:
            raise ValueError("threshold must lie in (0, 1)")
        if np.any(self.sigma <= 0):
            raise ValueError("sigma must be positive")
        if self.centers.shape[1] > 1 and np.any(np.diff(self.centers, axis=1) <= 0):
            raise ValueError("centers must be strictly increasing per coefficient")

    @property
    def n_coeffs(self) -> int:
        return self.centers.shape[0]

    @property
    def n_pop(self) -> int:
        return self.centers.shape[1]

    @property
    def n_input(self) -> int:
        return self.centers.size

    @property
    def radius(self) -> np.ndarray:
        """Half-width of the active window around each center, per coefficient."""
        return self.sigma * math.sqrt(-2.0 * math.log(self.threshold))

    def responses(self, frames: np.ndarray) -> np.ndarray:
        """Continuous Gaussian responses, shape (T, M * N_pop)."""
        frames = np.atleast_2d(np.asarray(frames, dtype=np.float64))
        if frames.shape[1] != self.n_coeffs:
            raise ValueError(
                f"expected {self.n_coeffs} coefficients per frame, got {frames.shape[1]}")
        d = frames[:, :, None] - self.centers[None]
        g = np.exp(-(d ** 2) / (2.0 * self.sigma[None, :, None] ** 2))
        return g.reshape(frames.shape[0], -1)

    def to_dict(self) -> dict:
        return {
            "centers": self.centers.tolist(),
            "sigma": self.sigma.tolist(),
            "threshold": self.threshold,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PopulationCoder":
        return cls(np.array(d["centers"]), np.array(d["sigma"]), float(d["threshold"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, s: str) -> "PopulationCoder":
        return cls.from_dict(json.loads(s))


def fit_population_coder(train: Iterable[MfccSequence | np.ndarray], n_pop: int,
                         sigma_frac: float = 1.0, threshold: float = 0.044,
                         percentiles: tuple[float, float] = (1.0, 99.0)) -> PopulationCoder:
    """Place ``n_pop`` centers uniformly between the 1st and 99th percentiles.

    sigma is ``sigma_frac`` times the center spacing; with a single neuron the
    spacing is taken as the full percentile range.
    """
    if n_pop < 1:
        raise ValueError("n_pop must be >= 1")
    stacked = np.concatenate(
        [np.atleast_2d(s.frames if isinstance(s, MfccSequence) else s) for s in train], axis=0)
    lo, hi = np.percentile(stacked, percentiles, axis=0)
    flat = np.flatnonzero(hi <= lo)
    if flat.size:
        raise DegenerateRangeError(f"coefficients {flat.tolist()} have an empty percentile range")
    if n_pop == 1:
        centers = ((lo + hi) / 2)[:, None]
        spacing = hi - lo
    else:
        centers = lo[:, None] + (hi - lo)[:, None] * np.linspace(0.0, 1.0, n_pop)[None]
        spacing = (hi - lo) / (n_pop - 1)
    return PopulationCoder(centers, sigma_frac * spacing, threshold)


def population_encode(seq: MfccSequence | np.ndarray, coder: PopulationCoder) -> np.ndarray:
    """Threshold the Gaussian population code: bit = g_j(x) > threshold."""
    frames = seq.frames if isinstance(seq, MfccSequence) else seq
    return (coder.responses(frames) > coder.threshold).astype(np.uint8)
