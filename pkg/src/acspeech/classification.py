"""Per-class recurrent areas with resonance read-out.

A ``ClassBank`` holds one plastic recurrent area per class. Training presents
each labelled segment to its own class area only (reset, then one plastic step
per frame). At test time every area replays the segment with plasticity and
refractory bias switched off; the resonance of an area is the mean, over
frames, of the summed top-k drive, and the class whose area resonates most is
predicted.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ._seeding import derive_seed
from .area import ABS, Area, AreaConfig, ConfigError, build_area
from .metrics import classification_report, confusion_counts, row_normalise

MANIFEST = "manifest.json"
BANK_FORMAT_VERSION = 1

# Full-scale settings for TIMIT phones (39 classes, 154 input bits).
PHONE_AREA = AreaConfig(n=2250, k=732, k_in=87, k_in_rec=1245, beta=3.1e-4, rule=ABS)
PHONE_EPOCHS = 13
# Full-scale settings for the 10-word Speech Commands task (171 input bits).
WORD_AREA = AreaConfig(n=4655, k=815, k_in=74, k_in_rec=1237, beta=3.6e-3, rule=ABS)
WORD_EPOCHS = 2


class LabelError(ValueError):
    pass


class IntegrityError(ValueError):
    pass


@dataclass
class Segment:
    frames: np.ndarray  # (T', n_input) spike frames
    label: str | None = None
    source: tuple | None = None  # (utterance id, start frame, end frame)

    def __post_init__(self):
        self.frames = np.atleast_2d(np.asarray(self.frames))
        if self.frames.shape[0] == 0:
            raise ValueError("a segment needs at least one frame")


@dataclass
class Prediction:
    label: str
    scores: np.ndarray  # resonance per class, in bank label order


class ClassBank:
    def __init__(self, labels: Sequence[str], areas: Sequence[Area]):
        labels = list(labels)
        if len(labels) < 2:
            raise ConfigError("a class bank needs at least two classes")
        if len(set(labels)) != len(labels):
            raise ConfigError("class labels must be unique")
        if len(areas) != len(labels):
            raise ConfigError(f"{len(areas)} areas for {len(labels)} labels")
        widths = {a.input_width for a in areas}
        if len(widths) != 1:
            raise ConfigError(f"areas disagree on input width: {sorted(widths)}")
        self.labels = labels
        self.areas = list(areas)
        self.index = {lab: i for i, lab in enumerate(labels)}

    @property
    def input_width(self) -> int:
        return self.areas[0].input_width

    @property
    def config(self) -> AreaConfig:
        """Shared configuration (the per-class seed is that of class 0)."""
        return self.areas[0].config

    def checksums(self) -> list[str]:
        return [a.weights_checksum() for a in self.areas]


def class_seed(seed: int, class_index: int) -> int:
    return derive_seed("class-area", seed, class_index)


def build_bank(labels: Sequence[str], cfg: AreaConfig, input_width: int, seed: int = 0) -> ClassBank:
    """One area per class, identical configuration, seeds derived from
    (seed, class index)."""
    areas = [build_area(cfg.replace(seed=class_seed(seed, i)), input_width)
             for i in range(len(labels))]
    return ClassBank(labels, areas)


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def train_bank(bank: ClassBank, segments: Iterable[Segment], epochs: int, threads: int = 1):
    """Plastic training, in place.

    Each area only ever sees the segments of its own class, in corpus order,
    so training the classes in parallel gives the same weights as training
    them one after the other.
    """
    if epochs < 0:
        raise ValueError("epochs must be >= 0")
    segments = list(segments)
    per_class: list[list[Segment]] = [[] for _ in bank.labels]
    for i, seg in enumerate(segments):
        if seg.label not in bank.index:
            raise LabelError(f"segment {i} has label {seg.label!r}, not in the class bank")
        if seg.frames.shape[1] != bank.input_width:
            raise ValueError(f"segment {i} has width {seg.frames.shape[1]}, "
                             f"bank expects {bank.input_width}")
        per_class[bank.index[seg.label]].append(seg)
    if epochs == 0:
        return bank
    if bank.config.beta <= 0:
        raise ConfigError("training needs beta > 0")

    def run(c: int):
        area = bank.areas[c]
        for _ in range(epochs):
            for seg in per_class[c]:
                area.reset()
                for x in seg.frames:
                    area.step(x)
        area.reset()

    _map(run, range(len(bank.labels)), threads)
    return bank


def resonance(area: Area, segment: Segment | np.ndarray) -> float:
    frames = segment.frames if isinstance(segment, Segment) else segment
    return area.resonance(frames)


def pick_label(labels: Sequence[str], scores: np.ndarray) -> str:
    """Argmax with ties going to the lexicographically smallest label."""
    scores = np.asarray(scores, dtype=np.float64)
    best = scores.max()
    return min(lab for lab, s in zip(labels, scores) if s == best)


def score_segment(bank: ClassBank, segment: Segment | np.ndarray, threads: int = 1) -> np.ndarray:
    frames = segment.frames if isinstance(segment, Segment) else np.atleast_2d(segment)
    return np.array(_map(lambda a: a.resonance(frames), bank.areas, threads))


def classify(bank: ClassBank, segment: Segment | np.ndarray, threads: int = 1) -> Prediction:
    scores = score_segment(bank, segment, threads)
    return Prediction(pick_label(bank.labels, scores), scores)


def predict(bank: ClassBank, segments: Sequence[Segment], threads: int = 1) -> list[Prediction]:
    # parallel over segments; each resonance call keeps its own scratch state
    return _map(lambda s: classify(bank, s), list(segments), threads)


def confusion_matrix(bank: ClassBank, segments: Sequence[Segment], threads: int = 1):
    """(counts, row-normalised) with rows = true class, columns = predicted."""
    preds = predict(bank, segments, threads)
    counts = confusion_counts([p.label for p in preds], [s.label for s in segments], bank.labels)
    return counts, row_normalise(counts)


def evaluate(bank: ClassBank, segments: Sequence[Segment], threads: int = 1) -> dict:
    for i, seg in enumerate(segments):
        if seg.label not in bank.index:
            raise LabelError(f"test segment {i} has label {seg.label!r}, not in the class bank")
    preds = predict(bank, segments, threads)
    return classification_report([p.label for p in preds], [s.label for s in segments],
                                 bank.labels)


# -- persistence -------------------------------------------------------------

def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def encoder_hash(encoder: dict) -> str:
    """Content hash of an encoder description (canonical JSON)."""
    return _sha256(json.dumps(encoder, sort_keys=True, separators=(",", ":")).encode())


def save_bank(bank: ClassBank, directory, encoder: dict | None = None, extra: dict | None = None):
    """Write one snapshot per class plus a manifest.

    The manifest records labels, the shared area configuration, the encoder
    description and its hash, and the sha256 of every class file.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = []
    for i, (lab, area) in enumerate(zip(bank.labels, bank.areas)):
        name = f"class_{i:03d}.area"
        data = area.to_bytes()
        (directory / name).write_bytes(data)
        files.append({"label": lab, "file": name, "sha256": _sha256(data)})
    cfg = asdict(bank.config)
    cfg.pop("seed")
    manifest = {
        "format_version": BANK_FORMAT_VERSION,
        "labels": bank.labels,
        "area_config": cfg,
        "input_width": bank.input_width,
        "encoder": encoder,
        "encoder_hash": encoder_hash(encoder) if encoder is not None else None,
        "classes": files,
    }
    if extra:
        manifest["extra"] = extra
    (directory / MANIFEST).write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return directory


def read_manifest(directory) -> dict:
    path = Path(directory) / MANIFEST
    if not path.is_file():
        raise IntegrityError(f"no manifest in {directory}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise IntegrityError(f"unreadable manifest: {exc}") from exc


def load_bank(directory, expected_encoder_hash: str | None = None) -> tuple[ClassBank, dict]:
    """Load and verify a saved bank; returns (bank, manifest)."""
    directory = Path(directory)
    manifest = read_manifest(directory)
    if manifest.get("format_version") != BANK_FORMAT_VERSION:
        raise IntegrityError(f"unsupported bank format {manifest.get('format_version')!r}")
    if expected_encoder_hash is not None and manifest.get("encoder_hash") != expected_encoder_hash:
        raise IntegrityError("model was trained with a different encoder")
    areas = []
    for entry in manifest["classes"]:
        path = directory / entry["file"]
        if not path.is_file():
            raise IntegrityError(f"missing class file {entry['file']} ({entry['label']})")
        data = path.read_bytes()
        if _sha256(data) != entry["sha256"]:
            raise IntegrityError(f"checksum mismatch for {entry['file']}")
        areas.append(Area.from_bytes(data))
    labels = [e["label"] for e in manifest["classes"]]
    if labels != manifest["labels"]:
        raise IntegrityError("manifest label list disagrees with class files")
    return ClassBank(labels, areas), manifest
