"""End-to-end pipelines shared by the command line, the demos and the tests."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .classification import ClassBank, Segment, build_bank, train_bank
from .encoding import (PopulationCoder, ProbMelEncoderConfig, fit_population_coder,
                       population_encode, prob_mel_encode)
from .features import AudioBuffer, MelConfig, MfccConfig, mel_spectrogram, mfcc
from .metrics import MatchCounts, boundary_report, prf
from .segmentation import PROMINENCE_SWEEP, HierarchyConfig, RefractoryHierarchy, oracle_sweep

METHODS = ("level1", "level2", "l1_direct")
# per-frame CSV column for each method's detections
_DETECTED = {"level1": "is_phone_boundary_detected", "level2": "is_word_boundary_detected",
             "l1_direct": "is_word_boundary_detected_l1_direct"}


@dataclass
class BoundaryUtterance:
    """Mel frames plus reference phone and word boundaries (frame indices)."""

    id: str
    mel: np.ndarray  # (T, n_mels) in [0, 1]
    phone_boundaries: np.ndarray
    word_boundaries: np.ndarray


@dataclass
class SegmentationRun:
    summary: dict
    # per (seed, utterance id): dict of per-frame columns for CSV emission
    frames: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)


def boundary_utterance(uid: str, audio: AudioBuffer, phone_onsets, word_onsets,
                       mel_cfg: MelConfig = MelConfig()) -> BoundaryUtterance:
    spec = mel_spectrogram(audio, mel_cfg)
    return BoundaryUtterance(uid, spec.frames, np.asarray(phone_onsets, dtype=np.int64),
                             np.asarray(word_onsets, dtype=np.int64))


def _segment_seed(utterances: Sequence[BoundaryUtterance], cfg: HierarchyConfig, gamma: float,
                  target: float, seed: int, tolerances: tuple[int, int], prominences):
    hier = None
    enc = ProbMelEncoderConfig(gamma, target, seed)
    counts = {m: [] for m in METHODS}
    frames, failures = {}, []
    tol_p, tol_w = tolerances
    for utt in utterances:
        try:
            x = prob_mel_encode(utt.mel, enc, utterance_id=utt.id)
            if hier is None:
                hier = RefractoryHierarchy(cfg, x.shape[1], seed)
            out = hier.run(x)
            res = {}
            if utt.phone_boundaries.size:
                res["level1"] = oracle_sweep(out.level1, utt.phone_boundaries, tol_p,
                                             cfg.level1.min_distance, prominences)
            if utt.word_boundaries.size:
                res["level2"] = oracle_sweep(out.level2, utt.word_boundaries, tol_w,
                                             cfg.level2.min_distance, prominences)
                res["l1_direct"] = oracle_sweep(out.level1, utt.word_boundaries, tol_w,
                                                cfg.level2.min_distance, prominences)
        except Exception as exc:  # noqa: BLE001 - reported per utterance
            failures.append({"seed": seed, "utterance": utt.id, "error": f"{type(exc).__name__}: {exc}"})
            continue
        for m, r in res.items():
            counts[m].append(r.counts)
        T = utt.mel.shape[0]
        cols = {"c1": out.level1, "c2": out.level2,
                "phone_ref": _indicator(utt.phone_boundaries, T),
                "word_ref": _indicator(utt.word_boundaries, T)}
        for m, r in res.items():
            cols[_DETECTED[m]] = _indicator(r.boundaries.frame_indices, T)
        frames[(seed, utt.id)] = cols
    return counts, frames, failures


def _indicator(idx, T: int) -> np.ndarray:
    v = np.zeros(T, dtype=np.int64)
    idx = np.asarray(idx, dtype=np.int64)
    v[idx[(idx >= 0) & (idx < T)]] = 1
    return v


def evaluate_segmentation(utterances: Sequence[BoundaryUtterance], cfg: HierarchyConfig,
                          seeds: Sequence[int], gamma: float = 0.5, target: float = 0.1,
                          tolerances: tuple[int, int] = (2, 5), prominences=PROMINENCE_SWEEP,
                          threads: int = 1) -> SegmentationRun:
    """Run the hierarchy on every utterance for every seed and score three
    methods: Level 1 against phone boundaries, Level 2 against word boundaries,
    and Level 1 against word boundaries (the direct baseline)."""
    if not utterances:
        raise ValueError("no utterances to segment")
    seeds = list(seeds)

    def job(seed):
        return _segment_seed(utterances, cfg, gamma, target, seed, tolerances, prominences)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outs = list(pool.map(job, seeds))
    else:
        outs = [job(s) for s in seeds]

    methods, frames, failures = {}, {}, []
    for seed, (_, fr, fl) in zip(seeds, outs):
        frames.update(fr)
        failures += fl
    for m in METHODS:
        per_seed = {seed: c[m] for seed, (c, _, _) in zip(seeds, outs) if c[m]}
        if not per_seed:
            continue
        tol = tolerances[0] if m == "level1" else tolerances[1]
        methods[m] = boundary_report(per_seed, tol).to_dict()
    summary = {
        "methods": methods,
        "seeds": seeds,
        "n_utterances": len(utterances),
        "tolerances": {"phone": tolerances[0], "word": tolerances[1]},
        "failures": failures,
    }
    return SegmentationRun(summary, frames, failures)


def micro_f1(counts: Sequence[MatchCounts]) -> float:
    return prf(sum(counts, MatchCounts(0, 0, 0)))[2]


# -- classification ----------------------------------------------------------

def mfcc_frames(audio: AudioBuffer, cfg: MfccConfig = MfccConfig()) -> np.ndarray:
    return mfcc(audio, cfg).frames


def fit_coder(train_mfccs: Sequence[np.ndarray], n_pop: int, sigma_frac: float,
              threshold: float) -> PopulationCoder:
    return fit_population_coder(train_mfccs, n_pop, sigma_frac, threshold)


def encode_segments(items: Sequence[tuple[np.ndarray, str]], coder: PopulationCoder,
                    sources: Sequence | None = None) -> list[Segment]:
    out = []
    for i, (frames, label) in enumerate(items):
        src = sources[i] if sources is not None else None
        out.append(Segment(population_encode(frames, coder), label, src))
    return out


def train_classifier(train_items: Sequence[tuple[np.ndarray, str]], labels: Sequence[str], area_cfg,
                     epochs: int, n_pop: int, sigma_frac: float = 1.0, threshold: float = 0.044,
                     seed: int = 0, threads: int = 1) -> tuple[ClassBank, PopulationCoder]:
    """Fit the population coder on the training MFCCs, then train a bank."""
    coder = fit_coder([f for f, _ in train_items], n_pop, sigma_frac, threshold)
    segments = encode_segments(train_items, coder)
    bank = build_bank(labels, area_cfg, coder.n_input, seed)
    train_bank(bank, segments, epochs, threads)
    return bank, coder
