"""Audio decoding and the two continuous front-ends (log-mel, MFCC).

All transforms frame the signal without padding, so a buffer of ``L`` samples
yields ``floor((L - fft_size) / hop) + 1`` frames.
"""

from __future__ import annotations

import csv
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.fft import dct, rfft
from scipy.signal import get_window


class DecodeError(ValueError):
    """The file is not a readable RIFF/WAVE container."""


class UnsupportedFormatError(DecodeError):
    """The container is valid but the sample encoding is not integer PCM."""


class TooShortError(ValueError):
    """Audio is shorter than one analysis frame."""


@dataclass(frozen=True)
class AudioBuffer:
    samples: np.ndarray
    sample_rate: int = 16000

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("audio must be a non-empty 1-D array")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class MelSpectrogram:
    frames: np.ndarray  # (T, n_mels), values in [0, 1]
    hop: int
    fft_size: int

    @property
    def n_mels(self) -> int:
        return self.frames.shape[1]

    def __len__(self):
        return self.frames.shape[0]


@dataclass(frozen=True)
class MfccSequence:
    frames: np.ndarray  # (T, n_coeffs)
    hop: int
    fft_size: int

    @property
    def n_coeffs(self) -> int:
        return self.frames.shape[1]

    def __len__(self):
        return self.frames.shape[0]


@dataclass(frozen=True)
class MelConfig:
    fft_size: int = 512
    hop: int = 320
    n_mels: int = 32
    fmin: float = 0.0
    fmax: float | None = None


@dataclass(frozen=True)
class MfccConfig:
    fft_size: int = 512
    hop: int = 480
    n_coeffs: int = 11
    n_mels: int = 40
    fmin: float = 0.0
    fmax: float | None = None


_PCM_DTYPES = {1: np.uint8, 2: np.int16, 4: np.int32}


def decode_wav(path) -> AudioBuffer:
    """Read an integer-PCM WAV file, downmix to mono and scale to [-1, 1]."""
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as w:
            n_channels = w.getnchannels()
            width = w.getsampwidth()
            rate = w.getframerate()
            raw = w.readframes(w.getnframes())
    except wave.Error as exc:
        msg = str(exc)
        if "unknown format" in msg:
            raise UnsupportedFormatError(f"{path}: {msg}") from exc
        raise DecodeError(f"{path}: {msg}") from exc
    except EOFError as exc:
        raise DecodeError(f"{path}: truncated header") from exc

    if width == 3:
        b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3)
        ints = (b[:, 0].astype(np.int32) | (b[:, 1].astype(np.int32) << 8)
                | (b[:, 2].astype(np.int32) << 16))
        ints = np.where(ints >= 1 << 23, ints - (1 << 24), ints)
        x = ints / float(1 << 23)
    elif width in _PCM_DTYPES:
        ints = np.frombuffer(raw, dtype=np.dtype(_PCM_DTYPES[width]).newbyteorder("<"))
        if width == 1:
            x = (ints.astype(np.float64) - 128.0) / 128.0
        else:
            x = ints.astype(np.float64) / float(1 << (8 * width - 1))
    else:
        raise UnsupportedFormatError(f"{path}: {8 * width}-bit samples")

    if x.size == 0:
        raise DecodeError(f"{path}: no audio frames")
    if x.size % n_channels:
        raise DecodeError(f"{path}: payload not a whole number of frames")
    x = x.reshape(-1, n_channels).mean(axis=1)
    return AudioBuffer(np.clip(x, -1.0, 1.0), rate)


def write_wav(path, audio: AudioBuffer):
    """Write 16-bit mono PCM."""
    pcm = np.round(np.clip(audio.samples, -1.0, 1.0) * 32767).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(audio.sample_rate)
        w.writeframes(pcm.tobytes())


def n_frames(length: int, fft_size: int, hop: int) -> int:
    if length < fft_size:
        return 0
    return (length - fft_size) // hop + 1


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(sample_rate: int, fft_size: int, n_mels: int,
                   fmin: float = 0.0, fmax: float | None = None) -> np.ndarray:
    """Triangular HTK-mel filters, shape (n_mels, fft_size // 2 + 1).

    Edges are spaced uniformly on the mel scale between ``fmin`` and ``fmax``
    (Nyquist by default); each triangle peaks at 1.
    """
    fmax = sample_rate / 2 if fmax is None else fmax
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    freqs = np.arange(fft_size // 2 + 1) * sample_rate / fft_size
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs - lo) / (mid - lo)
    falling = (hi - freqs) / (hi - mid)
    fb = np.maximum(0.0, np.minimum(rising, falling))
    empty = np.flatnonzero(fb.sum(axis=1) <= 0)
    if empty.size:
        raise ValueError(
            f"{empty.size} mel filters contain no FFT bin; use fewer mels or a larger FFT")
    return fb


def power_spectrogram(audio: AudioBuffer, fft_size: int, hop: int) -> np.ndarray:
    """|STFT|^2 with a periodic Hann window, shape (T, fft_size // 2 + 1)."""
    if len(audio) < fft_size:
        raise TooShortError(
            f"audio has {len(audio)} samples, need at least fft_size={fft_size}")
    frames = np.lib.stride_tricks.sliding_window_view(audio.samples, fft_size)[::hop]
    window = get_window("hann", fft_size, fftbins=True)
    spec = rfft(frames * window, axis=1)
    return spec.real ** 2 + spec.imag ** 2


def mel_energies(audio: AudioBuffer, fft_size: int, hop: int, n_mels: int,
                 fmin: float = 0.0, fmax: float | None = None) -> np.ndarray:
    power = power_spectrogram(audio, fft_size, hop)
    fb = mel_filterbank(audio.sample_rate, fft_size, n_mels, fmin, fmax)
    return power @ fb.T


def minmax_normalise(x: np.ndarray) -> np.ndarray:
    """Scale to [0, 1]; a constant array maps to zeros."""
    x = np.asarray(x, dtype=np.float64)
    lo, hi = x.min(), x.max()
    if hi <= lo:
        return np.zeros_like(x)
    return (x - lo) / (hi - lo)


def mel_spectrogram(audio: AudioBuffer, cfg: MelConfig = MelConfig()) -> MelSpectrogram:
    """log(1 + mel energy), min-max normalised over the utterance."""
    energies = mel_energies(audio, cfg.fft_size, cfg.hop, cfg.n_mels, cfg.fmin, cfg.fmax)
    return MelSpectrogram(minmax_normalise(np.log1p(energies)), cfg.hop, cfg.fft_size)


_LOG_FLOOR = 1e-10


def mfcc(audio: AudioBuffer, cfg: MfccConfig = MfccConfig()) -> MfccSequence:
    """Mel filterbank -> natural log -> orthonormal DCT-II, keeping C0..C(M-1)."""
    if cfg.n_coeffs < 1 or cfg.n_coeffs > cfg.n_mels:
        raise ValueError("n_coeffs must be in [1, n_mels]")
    energies = mel_energies(audio, cfg.fft_size, cfg.hop, cfg.n_mels, cfg.fmin, cfg.fmax)
    logmel = np.log(np.maximum(energies, _LOG_FLOOR))
    coeffs = dct(logmel, type=2, norm="ortho", axis=1)[:, :cfg.n_coeffs]
    return MfccSequence(coeffs, cfg.hop, cfg.fft_size)


def write_frames_csv(path, frames: np.ndarray, prefix: str = "f"):
    """One frame per row, with a leading frame index column."""
    frames = np.atleast_2d(frames)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frame"] + [f"{prefix}{i}" for i in range(frames.shape[1])])
        for t, row in enumerate(frames):
            w.writerow([t] + [repr(float(v)) for v in row])
