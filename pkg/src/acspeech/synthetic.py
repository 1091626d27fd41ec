"""Synthetic corpora with known structure.

Used by the test-suite, the demos and the CLI fixtures, since the real corpora
are licensed or too large to ship.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .features import AudioBuffer, hz_to_mel, mel_to_hz, write_wav


def bump(n_bins: int, center: float, width: float = 1.0, level: float = 1.0) -> np.ndarray:
    """A Gaussian spectral peak, a crude stand-in for a formant."""
    b = np.arange(n_bins)
    return level * np.exp(-0.5 * ((b - center) / width) ** 2)


def alternating_spectrogram(rng: np.random.Generator, n_bins: int = 32, period: int = 20,
                            n_segments: int = 8, noise: float = 0.01):
    """Mel-like frames alternating between two spectra with disjoint support.

    Pattern A has two peaks in the lower half of the bins, pattern B two peaks
    in the upper half. Returns (frames in [0, 1] of shape
    (period * n_segments, n_bins), boundary frame indices excluding 0).
    """
    q = n_bins / 4
    a = bump(n_bins, 0.5 * q) + bump(n_bins, 1.5 * q, level=0.7)
    b = bump(n_bins, 2.5 * q) + bump(n_bins, 3.5 * q, level=0.7)
    a[n_bins // 2:] = 0
    b[: n_bins // 2] = 0
    rows = []
    for s in range(n_segments):
        base = a if s % 2 == 0 else b
        rows.append(base + noise * rng.random((period, n_bins)))
    frames = np.clip(np.concatenate(rows), 0.0, 1.0)
    return frames, np.arange(period, period * n_segments, period)


@dataclass
class MultiscaleUtterance:
    frames: np.ndarray  # (T, n_bins) in [0, 1]
    phone_boundaries: np.ndarray
    word_boundaries: np.ndarray
    phone_labels: list
    word_labels: list


def multiscale_spectrogram(rng: np.random.Generator, n_bins: int = 32, n_words: int = 6,
                           phones_per_word: tuple[int, int] = (3, 4),
                           phone_frames: tuple[int, int] = (4, 7), n_word_types: int = 3,
                           phone_level: float = 0.6, noise: float = 0.01) -> MultiscaleUtterance:
    """Words built from phones that share a word-specific spectral peak.

    Every word type owns a peak ("core") in the lower half of the bins; each
    phone adds a peak at a random position in the upper half. A phone change
    therefore alters half of the spectrum and a word change all of it.
    Consecutive words differ in type and consecutive phones sit at least four
    bins apart.
    """
    half = n_bins // 2
    cores = (np.arange(n_word_types) + 0.5) * half / n_word_types
    rows, phone_b, word_b, phone_labels, word_labels = [], [], [], [], []
    t = 0
    prev_type = None
    prev_pos = None
    for _ in range(n_words):
        wt = int(rng.choice([c for c in range(n_word_types) if c != prev_type]))
        prev_type = wt
        if t:
            word_b.append(t)
        word_labels.append(f"w{wt}")
        n_ph = int(rng.integers(phones_per_word[0], phones_per_word[1] + 1))
        for ph in range(n_ph):
            while True:
                pos = float(rng.uniform(half + 1, n_bins - 2))
                if prev_pos is None or abs(pos - prev_pos) > 4:
                    break
            prev_pos = pos
            core = bump(n_bins, cores[wt])
            core[half:] = 0
            peak = bump(n_bins, pos, level=phone_level)
            peak[:half] = 0
            length = int(rng.integers(phone_frames[0], phone_frames[1] + 1))
            if t:
                phone_b.append(t)
            phone_labels.append(f"w{wt}p{ph}")
            rows.append(core + peak + noise * rng.random((length, n_bins)))
            t += length
    frames = np.clip(np.concatenate(rows), 0.0, 1.0)
    return MultiscaleUtterance(frames, np.array(phone_b), np.array(word_b), phone_labels, word_labels)


@dataclass
class SyntheticRecording:
    audio: AudioBuffer
    phones: list  # (start_sample, end_sample, label)
    words: list


def band_frequency(position: float, n_bands: int = 32, sample_rate: int = 16000) -> float:
    """Centre frequency (Hz) of fractional mel band ``position`` (HTK mel axis)."""
    top = hz_to_mel(sample_rate / 2)
    return float(mel_to_hz(top * (position + 1) / (n_bands + 1)))


def multiscale_audio(rng: np.random.Generator, n_words: int = 6,
                     phones_per_word: tuple[int, int] = (3, 4),
                     phone_frames: tuple[int, int] = (4, 7), n_word_types: int = 3,
                     hop: int = 320, n_bands: int = 32, sample_rate: int = 16000,
                     noise: float = 0.01) -> SyntheticRecording:
    """Audio counterpart of ``multiscale_spectrogram``.

    Each phone is a two-tone chord: a word-type tone in the lower half of the
    mel bands and a phone tone in the upper half. Span edges fall on hop
    multiples, so sample offsets map exactly onto frame indices.
    """
    half = n_bands // 2
    cores = (np.arange(n_word_types) + 0.5) * half / n_word_types
    chords, phones, words = [], [], []
    t = 0
    prev_type = None
    prev_pos = None
    for _ in range(n_words):
        wt = int(rng.choice([c for c in range(n_word_types) if c != prev_type]))
        prev_type = wt
        w_start = t
        n_ph = int(rng.integers(phones_per_word[0], phones_per_word[1] + 1))
        for ph in range(n_ph):
            while True:
                pos = float(rng.uniform(half + 1, n_bands - 2))
                if prev_pos is None or abs(pos - prev_pos) > 4:
                    break
            prev_pos = pos
            length = int(rng.integers(phone_frames[0], phone_frames[1] + 1)) * hop
            freqs = (band_frequency(cores[wt], n_bands, sample_rate),
                     band_frequency(pos, n_bands, sample_rate))
            chords.append((freqs, length / sample_rate))
            phones.append((t, t + length, f"w{wt}p{ph}"))
            t += length
        words.append((w_start, t, f"w{wt}"))
    audio = tone_audio(chords, sample_rate=sample_rate, noise=noise, rng=rng)
    return SyntheticRecording(audio, phones, words)


def tone_audio(freqs_and_durations, sample_rate: int = 16000, amplitude: float = 0.3,
               noise: float = 0.01, rng: np.random.Generator | None = None) -> AudioBuffer:
    """Concatenate sinusoid chords; each item is (sequence of Hz, seconds)."""
    rng = rng or np.random.default_rng(0)
    parts = []
    phase_t = 0
    for freqs, dur in freqs_and_durations:
        n = int(round(dur * sample_rate))
        t = (phase_t + np.arange(n)) / sample_rate
        x = sum(np.sin(2 * np.pi * f * t) for f in freqs) / max(len(freqs), 1)
        parts.append(amplitude * x)
        phase_t += n
    x = np.concatenate(parts)
    x = x + noise * rng.standard_normal(x.size)
    return AudioBuffer(np.clip(x, -1.0, 1.0), sample_rate)


def class_glides(rng: np.random.Generator, n_classes: int = 5, n_tones: int = 2,
                 fmin: float = 200.0, fmax: float = 6000.0) -> np.ndarray:
    """Per-class (start, end) frequencies of each tone, shape (C, n_tones, 2)."""
    lo, hi = np.log(fmin), np.log(fmax)
    return np.exp(rng.uniform(lo, hi, size=(n_classes, n_tones, 2)))


def glide_audio(rng: np.random.Generator, glide: np.ndarray, duration: float = 0.5,
                sample_rate: int = 16000, jitter: float = 0.05, duration_jitter: float = 0.1,
                amplitude: float = 0.3, noise: float = 0.01) -> AudioBuffer:
    """A noisy rendition of one class: each tone sweeps log-linearly from its
    start to its end frequency, with random frequency and length jitter."""
    dur = duration * (1 + duration_jitter * rng.uniform(-1, 1))
    n = int(round(dur * sample_rate))
    s = np.linspace(0.0, 1.0, n)
    x = np.zeros(n)
    for f0, f1 in glide:
        scale = 1 + jitter * rng.uniform(-1, 1, size=2)
        f = np.exp(np.log(f0 * scale[0]) * (1 - s) + np.log(f1 * scale[1]) * s)
        x += np.sin(2 * np.pi * np.cumsum(f) / sample_rate + rng.uniform(0, 2 * np.pi))
    x *= amplitude / len(glide) * (1 + 0.2 * rng.uniform(-1, 1))
    x += noise * rng.standard_normal(n)
    return AudioBuffer(np.clip(x, -1.0, 1.0), sample_rate)


# -- on-disk fixtures ----------------------------------------------------------

# Desk-scale settings matching the fixtures below (see also
# ``segmentation.SYNTHETIC_HIERARCHY``).
SEGMENT_CONFIG = {
    "encoder": {"prob_mel": {"gamma": 1.0, "target_active_fraction": 0.2}},
    "segmentation": {
        "level1": {"n": 500, "k": 200, "k_in": 16, "rho": 0.1, "tau": 0.47, "min_distance": 3},
        "level2": {"n": 1000, "k": 100, "k_in": 20, "rho": 0.05, "tau": 0.073, "min_distance": 7},
    },
}
CLASSIFY_CONFIG = {
    "encoder": {"population": {"n_pop": 10, "sigma_frac": 1.0, "threshold": 0.044}},
    "classification": {
        "area": {"n": 1000, "k": 100, "k_in": 20, "k_in_rec": 100, "beta": 0.05, "rule": "abs"},
        "epochs": 3,
    },
}


def _write_yaml(path, doc):
    with open(path, "w") as fh:
        yaml.safe_dump(doc, fh, sort_keys=True)


def write_boundary_corpus(directory, n_utterances: int = 4, n_words: int = 8, seed: int = 0) -> Path:
    """Write multiscale utterances as wav + phone/word alignments, a manifest
    and a ``config.yaml`` for the ``segment`` command. Returns the config path."""
    from .corpus import write_alignment

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    entries = []
    for i in range(n_utterances):
        rec = multiscale_audio(rng, n_words=n_words)
        uid = f"utt{i:03d}"
        write_wav(directory / f"{uid}.wav", rec.audio)
        write_alignment(directory / f"{uid}.phn", rec.phones)
        write_alignment(directory / f"{uid}.wrd", rec.words)
        entries.append({"id": uid, "wav": f"{uid}.wav", "phn": f"{uid}.phn", "wrd": f"{uid}.wrd"})
    (directory / "manifest.json").write_text(json.dumps({"utterances": entries}, indent=2) + "\n")
    cfg = {"corpus": {"manifest": "manifest.json"}, **SEGMENT_CONFIG}
    _write_yaml(directory / "config.yaml", cfg)
    return directory / "config.yaml"


def write_class_corpus(directory, n_classes: int = 5, n_train: int = 30, n_test: int = 10,
                       seed: int = 0) -> Path:
    """Write labelled glide clips with a train/test manifest and a
    ``config.yaml`` for the classification commands. Returns the config path."""
    directory = Path(directory)
    (directory / "clips").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    glides = class_glides(rng, n_classes)
    doc = {"train": [], "test": []}
    for split, count in (("train", n_train), ("test", n_test)):
        for c in range(n_classes):
            for j in range(count):
                name = f"clips/{split}_c{c}_{j:03d}.wav"
                write_wav(directory / name, glide_audio(rng, glides[c]))
                doc[split].append({"wav": name, "label": f"c{c}"})
    (directory / "manifest.json").write_text(json.dumps(doc, indent=2) + "\n")
    cfg = {"corpus": {"manifest": "manifest.json"}, **CLASSIFY_CONFIG}
    _write_yaml(directory / "config.yaml", cfg)
    return directory / "config.yaml"
