"""Corpus readers: TIMIT-style aligned transcriptions and Speech-Commands-style
directory trees."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from ._seeding import generator
from .features import AudioBuffer, decode_wav, n_frames


# silence markers recognised when no phone map is given
SILENCE_MARKERS = frozenset({"h#", "pau", "epi"})


class CorpusParseError(ValueError):
    pass


class UnknownPhoneError(CorpusParseError):
    """A label outside the phone map's inventory."""


class CorpusValidationError(ValueError):
    pass


class UnmappedLabelError(KeyError):
    pass


class CorpusCountError(ValueError):
    pass


@dataclass(frozen=True)
class PhoneMap:
    """Raw phone label -> class label, plus silence and deletion lists."""

    mapping: dict
    drop: frozenset = frozenset()
    delete: frozenset = frozenset()

    @classmethod
    def from_json(cls, path) -> "PhoneMap":
        with open(path) as fh:
            d = json.load(fh)
        return cls(dict(d["map"]), frozenset(d.get("drop", ())), frozenset(d.get("delete", ())))

    @classmethod
    def timit39(cls) -> "PhoneMap":
        with resources.files("acspeech.data").joinpath("timit_39.json").open() as fh:
            d = json.load(fh)
        return cls(dict(d["map"]), frozenset(d["drop"]), frozenset(d["delete"]))

    @classmethod
    def identity(cls, labels: Sequence[str]) -> "PhoneMap":
        return cls({lab: lab for lab in labels})

    @property
    def classes(self) -> list[str]:
        return sorted(set(self.mapping.values()))

    @property
    def inventory(self) -> set:
        return set(self.mapping) | set(self.drop) | set(self.delete)

    def lookup(self, raw: str) -> str | None:
        """Class label, or None for silence markers and deleted symbols."""
        if raw in self.drop or raw in self.delete:
            return None
        try:
            return self.mapping[raw]
        except KeyError:
            raise UnmappedLabelError(raw) from None


@dataclass(frozen=True)
class Span:
    start: int  # sample offsets, end exclusive
    end: int
    raw: str
    label: str | None = None  # mapped label; None for silence or deleted spans
    silence: bool = False


@dataclass
class AnnotatedUtterance:
    id: str
    audio: AudioBuffer
    phones: list[Span]
    words: list[Span] = field(default_factory=list)

    def phone_boundaries(self, hop: int) -> np.ndarray:
        return onset_frames(self.phones, hop, drop_final_silence=True)

    def word_boundaries(self, hop: int) -> np.ndarray:
        return onset_frames(self.words, hop)

    def segments(self, hop: int, fft_size: int) -> list[tuple[str, int, int]]:
        """Classification spans (label, first frame, end frame exclusive),
        clipped to the feature frame count; silence and deleted spans skipped."""
        total = n_frames(self.audio.samples.size, fft_size, hop)
        out = []
        for sp in self.phones:
            if sp.label is None:
                continue
            a, b = sp.start // hop, min(sp.end // hop, total)
            if b > a:
                out.append((sp.label, a, b))
        return out


def onset_frames(spans: Sequence[Span], hop: int, drop_final_silence: bool = False) -> np.ndarray:
    """Frame indices of span onsets, excluding the utterance start.

    With ``drop_final_silence`` the onset of a trailing silence span is also
    left out, since it marks the end of speech rather than a boundary.
    """
    spans = list(spans)
    if drop_final_silence and spans and spans[-1].silence:
        spans = spans[:-1]
    frames = {sp.start // hop for sp in spans if sp.start > 0}
    return np.array(sorted(frames), dtype=np.int64)


def parse_alignment(path, phone_map: PhoneMap | None = None, n_samples: int | None = None) -> list[Span]:
    """Read "start end label" lines (sample offsets).

    Raises CorpusParseError naming the line for malformed input, and
    CorpusValidationError for unsorted, overlapping or out-of-range spans.
    """
    spans: list[Span] = []
    with open(path) as fh:
        lines = fh.read().splitlines()
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 3:
            raise CorpusParseError(f"{path}:{lineno}: expected 'start end label', got {line!r}")
        try:
            start, end = int(parts[0]), int(parts[1])
        except ValueError:
            raise CorpusParseError(f"{path}:{lineno}: non-integer offsets in {line!r}") from None
        if start < 0 or end <= start:
            raise CorpusParseError(f"{path}:{lineno}: invalid span {start}..{end}")
        raw = parts[2]
        if phone_map is None:
            silent = raw in SILENCE_MARKERS
            spans.append(Span(start, end, raw, None if silent else raw, silent))
        else:
            try:
                label = phone_map.lookup(raw)
            except UnmappedLabelError:
                raise UnknownPhoneError(f"{path}:{lineno}: label {raw!r} is not in the phone map") from None
            spans.append(Span(start, end, raw, label, raw in phone_map.drop))
    for prev, cur in zip(spans, spans[1:]):
        if cur.start < prev.end:
            raise CorpusValidationError(
                f"{path}: span {cur.start}..{cur.end} overlaps {prev.start}..{prev.end}")
    if n_samples is not None and spans and spans[-1].end > n_samples:
        raise CorpusValidationError(
            f"{path}: span ends at {spans[-1].end}, audio has {n_samples} samples")
    return spans


def load_timit_utterance(wav_path, phn_path, wrd_path=None, phone_map: PhoneMap | None = None,
                         utt_id: str | None = None, map_labels: bool = True) -> AnnotatedUtterance:
    """Read a wav file with its phone (and optional word) alignment.

    Phone labels are folded with ``phone_map`` (default: the built-in 39-class
    table). With ``map_labels=False`` raw labels are kept, which is enough for
    boundary evaluation on corpora with their own inventory.
    """
    if map_labels and phone_map is None:
        phone_map = PhoneMap.timit39()
    audio = decode_wav(wav_path)
    n = audio.samples.size
    phones = parse_alignment(phn_path, phone_map if map_labels else None, n)
    words = parse_alignment(wrd_path, None, n) if wrd_path else []
    return AnnotatedUtterance(utt_id or Path(wav_path).stem, audio, phones, words)


def write_alignment(path, spans):
    """Write (start, end, label) triples in the "start end label" format."""
    with open(path, "w") as fh:
        for start, end, label in spans:
            fh.write(f"{int(start)} {int(end)} {label}\n")


# -- Speech Commands -----------------------------------------------------------

SPEECH_COMMANDS_WORDS = ("yes", "no", "up", "down", "left", "right", "on", "off", "stop", "go")


def load_speech_commands(root, words: Sequence[str] = SPEECH_COMMANDS_WORDS, n_train: int = 200,
                         n_test: int = 50, seed: int = 0) -> dict:
    """Seeded, disjoint train/test draws per word from a directory-per-word tree.

    Returns {"train": [(relative path, word)], "test": [...]} with items in
    word order, then draw order. Only ``.wav`` files are considered.
    """
    root = Path(root)
    train, test = [], []
    for word in words:
        folder = root / word
        files = sorted(p.name for p in folder.glob("*.wav")) if folder.is_dir() else []
        need = n_train + n_test
        if len(files) < need:
            where = "missing" if not folder.is_dir() else f"has {len(files)} files"
            raise CorpusCountError(f"class {word!r}: folder {where}, need {need}")
        order = generator("speech-commands", seed, word).permutation(len(files))[:need]
        picked = [f"{word}/{files[i]}" for i in order]
        train += [(p, word) for p in picked[:n_train]]
        test += [(p, word) for p in picked[n_train:]]
    return {"train": train, "test": test}


def write_partition_manifest(path, partitions: dict, root=None, seed: int | None = None):
    doc = {"root": str(root) if root is not None else None, "seed": seed,
           "train": [list(x) for x in partitions["train"]],
           "test": [list(x) for x in partitions["test"]]}
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def read_partition_manifest(path) -> dict:
    doc = json.loads(Path(path).read_text())
    return {"root": doc.get("root"), "seed": doc.get("seed"),
            "train": [tuple(x) for x in doc["train"]], "test": [tuple(x) for x in doc["test"]]}
