"""Run configuration: one nested mapping, read from YAML, with dotted-key
overrides and validation.

Defaults are the full-size corpus settings; the synthetic
demos and tests override them.
"""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path
from typing import Any, Mapping

import yaml

from .area import AreaConfig
from .features import MelConfig, MfccConfig
from .segmentation import PROMINENCE_SWEEP, HierarchyConfig, LevelConfig


class ConfigError(ValueError):
    pass


DEFAULTS: dict = {
    "seed": 0,
    "seeds": list(range(10)),
    "threads": 1,
    "output_dir": "acspeech-out",
    "corpus": {
        "manifest": None,  # JSON manifest, see README
        "root": None,  # base for relative paths; defaults to the manifest's folder
        "phone_map": None,  # JSON folding table; default is the built-in 39-class map
        "speech_commands": None,  # {"root", "words", "n_train", "n_test"}
    },
    "features": {
        "mel": {"fft_size": 512, "hop": 320, "n_mels": 32, "fmin": 0.0, "fmax": None},
        "mfcc": {"fft_size": 512, "hop": 480, "n_coeffs": 11, "n_mels": 40, "fmin": 0.0, "fmax": None},
    },
    "encoder": {
        "prob_mel": {"gamma": 0.5, "target_active_fraction": 0.1},
        "population": {"n_pop": 14, "sigma_frac": 1.0, "threshold": 0.044},
    },
    "segmentation": {
        "level1": {"n": 1531, "k": 135, "k_in": 32, "rho": 0.989, "tau": 0.761,
                   "min_distance": 3, "init": "random"},
        "level2": {"n": 6557, "k": 588, "k_in": 1513, "rho": 0.092, "tau": 0.745,
                   "min_distance": 7, "init": "random"},
        "tolerance": {"phone": 2, "word": 5},
        "prominences": list(PROMINENCE_SWEEP),
    },
    "classification": {
        "area": {"n": 2250, "k": 732, "k_in": 87, "k_in_rec": 1245, "beta": 3.1e-4,
                 "rule": "abs", "init": "uniform"},
        "epochs": 13,
        "labels": None,  # restrict to these classes; others are skipped
        "model_dir": None,  # default: <output_dir>/model
    },
    "tune": {
        "objective": "segment_phone",  # segment_phone | segment_word | classify
        "n_trials": 200,
        "space": {},
        "fixed": {},
    },
}


def merge(base: Mapping, override: Mapping, path: str = "") -> dict:
    """Recursive merge; unknown keys are rejected so typos fail loudly."""
    out = copy.deepcopy(dict(base))
    for key, val in override.items():
        where = f"{path}{key}"
        if key not in out:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(out[key], dict) and out[key] and isinstance(val, Mapping):
            out[key] = merge(out[key], val, where + ".")
        else:
            out[key] = copy.deepcopy(val)
    return out


# mappings whose keys are user-defined
_OPEN = {"tune.space", "tune.fixed", "corpus.speech_commands"}


def set_key(cfg: dict, dotted: str, value: Any):
    parts = dotted.split(".")
    node = cfg
    for i, p in enumerate(parts[:-1]):
        if not isinstance(node, dict) or p not in node:
            raise ConfigError(f"unknown config key {dotted!r}")
        if node[p] is None and ".".join(parts[: i + 1]) in _OPEN:
            node[p] = {}
        node = node[p]
    parent = ".".join(parts[:-1])
    if not isinstance(node, dict) or (parts[-1] not in node and parent not in _OPEN):
        raise ConfigError(f"unknown config key {dotted!r}")
    node[parts[-1]] = value


def get_key(cfg: Mapping, dotted: str):
    node = cfg
    for p in dotted.split("."):
        node = node[p]
    return node


def parse_override(text: str) -> tuple[str, Any]:
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not key=value")
    key, raw = text.split("=", 1)
    return key.strip(), yaml.safe_load(raw)


def load_config(path=None, overrides=()) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file {path} not found")
        with open(path) as fh:
            user = yaml.safe_load(fh) or {}
        if not isinstance(user, Mapping):
            raise ConfigError("config file must hold a mapping")
        cfg = merge(cfg, user)
        # relative corpus paths resolve against the config file's folder
        base = path.resolve().parent
        corpus = cfg["corpus"]
        for key in ("manifest", "root", "phone_map"):
            if corpus.get(key) and not Path(corpus[key]).is_absolute():
                corpus[key] = str(base / corpus[key])
        sc = corpus.get("speech_commands")
        if sc and sc.get("root") and not Path(sc["root"]).is_absolute():
            sc["root"] = str(base / sc["root"])
    for item in overrides:
        key, value = parse_override(item)
        set_key(cfg, key, value)
    validate(cfg)
    return cfg


def _check(cond: bool, msg: str):
    if not cond:
        raise ConfigError(msg)


def validate(cfg: Mapping):
    _check(isinstance(cfg["seed"], int), "seed must be an integer")
    _check(isinstance(cfg["seeds"], list) and len(cfg["seeds"]) > 0
           and all(isinstance(s, int) for s in cfg["seeds"]), "seeds must be a non-empty integer list")
    _check(isinstance(cfg["threads"], int) and cfg["threads"] >= 1, "threads must be >= 1")
    try:
        mel_config(cfg)
        mfcc_config(cfg)
        hierarchy_config(cfg)
        classifier_area(cfg)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    pm = cfg["encoder"]["prob_mel"]
    _check(0 < pm["gamma"] <= 1, "encoder.prob_mel.gamma must lie in (0, 1]")
    _check(0 < pm["target_active_fraction"] < 1,
           "encoder.prob_mel.target_active_fraction must lie in (0, 1)")
    pop = cfg["encoder"]["population"]
    _check(int(pop["n_pop"]) >= 1, "encoder.population.n_pop must be >= 1")
    _check(pop["sigma_frac"] > 0, "encoder.population.sigma_frac must be positive")
    _check(0 < pop["threshold"] < 1, "encoder.population.threshold must lie in (0, 1)")
    tol = cfg["segmentation"]["tolerance"]
    _check(tol["phone"] >= 0 and tol["word"] >= 0, "tolerances must be >= 0")
    _check(len(cfg["segmentation"]["prominences"]) > 0
           and all(p > 0 for p in cfg["segmentation"]["prominences"]), "prominences must be positive")
    _check(int(cfg["classification"]["epochs"]) >= 0, "classification.epochs must be >= 0")
    _check(cfg["tune"]["objective"] in ("segment_phone", "segment_word", "classify"),
           "tune.objective must be segment_phone, segment_word or classify")
    _check(int(cfg["tune"]["n_trials"]) >= 1, "tune.n_trials must be >= 1")
    manifest = cfg["corpus"]["manifest"]
    if manifest is not None:
        _check(Path(manifest).is_file(), f"corpus manifest {manifest} not found")
    sc = cfg["corpus"]["speech_commands"]
    if sc is not None:
        _check(Path(sc.get("root", "")).is_dir(), f"speech_commands root {sc.get('root')} not found")
        words = sc.get("words")
        # YAML reads unquoted yes/no/on/off as booleans
        _check(words is None or all(isinstance(w, str) for w in words),
               "corpus.speech_commands.words must be strings; quote yes, no, on and off in YAML")


def mel_config(cfg: Mapping) -> MelConfig:
    return MelConfig(**cfg["features"]["mel"])


def mfcc_config(cfg: Mapping) -> MfccConfig:
    return MfccConfig(**cfg["features"]["mfcc"])


def _level(d: Mapping) -> LevelConfig:
    d = dict(d)
    tau, dist = d.pop("tau"), int(d.pop("min_distance"))
    return LevelConfig(AreaConfig(**d), float(tau), dist)


def hierarchy_config(cfg: Mapping) -> HierarchyConfig:
    seg = cfg["segmentation"]
    return HierarchyConfig(_level(seg["level1"]), _level(seg["level2"]))


def classifier_area(cfg: Mapping) -> AreaConfig:
    return AreaConfig(**cfg["classification"]["area"])


def identity(cfg: Mapping) -> dict:
    """The part of the config that determines results (the output folder and
    thread count do not)."""
    out = copy.deepcopy(dict(cfg))
    out.pop("output_dir", None)
    out.pop("threads", None)
    return out


def config_hash(cfg: Mapping) -> str:
    blob = json.dumps(identity(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()
