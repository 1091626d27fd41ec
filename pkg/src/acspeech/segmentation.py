"""Unsupervised boundary detection with a two-level refractory hierarchy.

Level 1 is driven by spike frames; Level 2 is driven by the binary indicator
of the Level-1 assembly. Both areas are frozen (no plasticity) and use the
frozen-repeat rule: when the k-cap candidate overlaps the previous assembly by
at least ``tau * k`` neurons the previous assembly is re-emitted unchanged.
The change signal of each level is the fraction of assembly neurons replaced
between consecutive frames.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks, peak_prominences

from ._seeding import derive_seed
from .area import Area, AreaConfig, ShapeError, build_area, k_cap, overlap
from .features import minmax_normalise
from .metrics import MatchCounts, match_boundaries, prf

PROMINENCE_SWEEP = (0.02, 0.05, 0.1, 0.15, 0.2, 0.3, 0.5)


@dataclass(frozen=True)
class LevelConfig:
    area: AreaConfig
    tau: float
    min_distance: int

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")
        if self.min_distance < 1:
            raise ValueError("min_distance must be >= 1")
        if self.area.beta != 0:
            raise ValueError("segmentation areas must be frozen (beta = 0)")


@dataclass(frozen=True)
class HierarchyConfig:
    level1: LevelConfig
    level2: LevelConfig


# Full-scale settings for TIMIT boundary detection.
FULL_SCALE_HIERARCHY = HierarchyConfig(
    level1=LevelConfig(AreaConfig(n=1531, k=135, k_in=32, rho=0.989, init="random"),
                       tau=0.761, min_distance=3),
    level2=LevelConfig(AreaConfig(n=6557, k=588, k_in=1513, rho=0.092, init="random"),
                       tau=0.745, min_distance=7),
)

# Desk-scale settings for the synthetic corpora in ``acspeech.synthetic``,
# used with a probabilistic mel encoder at gamma = 1 and 20 % activity.
# Level 1 follows phone-sized changes; the sparse, low-threshold Level 2
# holds its assembly across them and flips on word changes.
SYNTHETIC_HIERARCHY = HierarchyConfig(
    level1=LevelConfig(AreaConfig(n=500, k=200, k_in=16, rho=0.1, init="random"),
                       tau=0.47, min_distance=3),
    level2=LevelConfig(AreaConfig(n=1000, k=100, k_in=20, rho=0.05, init="random"),
                       tau=0.073, min_distance=7),
)
SYNTHETIC_ENCODER = dict(gamma=1.0, target_active_fraction=0.2)


class FrozenRepeatArea:
    """A frozen refractory area gated by a similarity threshold."""

    def __init__(self, area: Area, tau: float):
        if area.config.beta != 0:
            raise ValueError("frozen-repeat areas need beta = 0")
        self.area = area
        self.tau = tau

    def step(self, x: np.ndarray) -> np.ndarray:
        area = self.area
        drive = area.compute_drive(x)
        candidate = k_cap(drive, area.k)
        prev = area.prev_assembly
        if prev.size and overlap(candidate, prev) >= self.tau * area.k:
            assembly = prev
        else:
            assembly = candidate
        area.commit(x, drive, assembly)
        return assembly

    def run(self, frames: np.ndarray) -> list[np.ndarray]:
        self.area.reset()
        return [self.step(x) for x in frames]


def change_signal(assemblies, k: int) -> np.ndarray:
    """Raw change values 1 - |a(t) & a(t-1)| / k for t = 1..T-1."""
    return np.array([1.0 - overlap(a, b) / k for b, a in zip(assemblies[:-1], assemblies[1:])])


def normalise_change(raw: np.ndarray) -> np.ndarray:
    """Min-max normalise and prepend c(0) = 0 so the result has length T."""
    return np.concatenate([[0.0], minmax_normalise(raw) if raw.size else raw])


@dataclass
class HierarchyOutput:
    level1: np.ndarray  # normalised change signal, length T
    level2: np.ndarray
    raw1: np.ndarray  # length T - 1
    raw2: np.ndarray
    assemblies1: list = field(repr=False, default_factory=list)
    assemblies2: list = field(repr=False, default_factory=list)


class RefractoryHierarchy:
    def __init__(self, cfg: HierarchyConfig, input_width: int, seed: int = 0):
        self.cfg = cfg
        c1 = cfg.level1.area.replace(seed=derive_seed("level1", cfg.level1.area.seed, seed))
        c2 = cfg.level2.area.replace(seed=derive_seed("level2", cfg.level2.area.seed, seed))
        a1 = build_area(c1, input_width)
        a2 = build_area(c2, cfg.level1.area.n)
        self.level1 = FrozenRepeatArea(a1, cfg.level1.tau)
        self.level2 = FrozenRepeatArea(a2, cfg.level2.tau)

    @property
    def areas(self) -> tuple[Area, Area]:
        return self.level1.area, self.level2.area

    def run(self, frames: np.ndarray) -> HierarchyOutput:
        frames = np.atleast_2d(frames)
        if frames.shape[1] != self.level1.area.input_width:
            raise ShapeError(f"frames have width {frames.shape[1]}, "
                             f"level 1 expects {self.level1.area.input_width}")
        self.level1.area.reset()
        self.level2.area.reset()
        n1 = self.level1.area.n
        a1s, a2s = [], []
        indicator = np.zeros(n1, dtype=np.uint8)
        for x in frames:
            a1 = self.level1.step(x)
            indicator[:] = 0
            indicator[a1] = 1
            a2 = self.level2.step(indicator)
            a1s.append(a1)
            a2s.append(a2)
        raw1 = change_signal(a1s, self.level1.area.k)
        raw2 = change_signal(a2s, self.level2.area.k)
        return HierarchyOutput(normalise_change(raw1), normalise_change(raw2), raw1, raw2,
                               a1s, a2s)


def run_hierarchy(frames: np.ndarray, cfg: HierarchyConfig, seed: int = 0) -> HierarchyOutput:
    return RefractoryHierarchy(cfg, np.atleast_2d(frames).shape[1], seed).run(frames)


def candidate_peaks(signal: np.ndarray, prominence: float) -> np.ndarray:
    """Local maxima whose topographic prominence is at least ``prominence``."""
    signal = np.asarray(signal, dtype=np.float64)
    peaks, _ = find_peaks(signal)
    if peaks.size == 0:
        return peaks
    prom = peak_prominences(signal, peaks)[0]
    return peaks[prom >= prominence]


def prune_by_distance(signal: np.ndarray, peaks: np.ndarray, min_distance: int) -> np.ndarray:
    """Drop peaks closer than ``min_distance`` to a higher (or equal, earlier) kept peak."""
    order = sorted(peaks.tolist(), key=lambda p: (-signal[p], p))
    kept: list[int] = []
    for p in order:
        if all(abs(p - q) >= min_distance for q in kept):
            kept.append(p)
    return np.array(sorted(kept), dtype=np.int64)


@dataclass
class BoundarySet:
    frame_indices: np.ndarray
    prominence_used: float


def detect_peaks(signal: np.ndarray, prominence: float, min_distance: int = 1) -> BoundarySet:
    if prominence <= 0:
        raise ValueError("prominence must be positive")
    signal = np.asarray(signal, dtype=np.float64)
    peaks = candidate_peaks(signal, prominence)
    return BoundarySet(prune_by_distance(signal, peaks, min_distance), prominence)


@dataclass
class SweepResult:
    best_f1: float
    best_prominence: float
    boundaries: BoundarySet
    counts: MatchCounts
    f1_by_prominence: dict


def oracle_sweep(signal: np.ndarray, ground_truth, tolerance: int, min_distance: int = 1,
                 prominences=PROMINENCE_SWEEP) -> SweepResult:
    """Pick the prominence threshold maximising F1 for this utterance.

    Ties go to the smaller prominence.
    """
    gt = np.asarray(ground_truth, dtype=np.int64)
    if gt.size == 0:
        raise ValueError("ground truth must be non-empty")
    best = None
    by_prom = {}
    for p in sorted(prominences):
        bs = detect_peaks(signal, p, min_distance)
        counts = match_boundaries(bs.frame_indices, gt, tolerance)
        f1 = prf(counts)[2]
        by_prom[p] = f1
        if best is None or f1 > best[0]:
            best = (f1, p, bs, counts)
    return SweepResult(best[0], best[1], best[2], best[3], by_prom)
