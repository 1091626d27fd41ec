"""Command line: ``acspeech <verb> [--config FILE] [--set key=value ...]``.

Verbs: features, segment, classify-train, classify-eval, tune. Every report is
JSON with sorted keys and embeds the resolved configuration plus hashes of the
configuration and of the report content. Failures print a JSON error object
and exit nonzero.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .classification import (IntegrityError, LabelError, build_bank, encoder_hash, evaluate,
                             load_bank, predict, save_bank, train_bank)
from .corpus import (SPEECH_COMMANDS_WORDS, CorpusCountError, CorpusParseError,
                     CorpusValidationError, PhoneMap, UnknownPhoneError, load_speech_commands,
                     load_timit_utterance, write_partition_manifest)
from .encoding import PopulationCoder, ProbMelEncoderConfig, prob_mel_encode
from .features import DecodeError, decode_wav, mel_spectrogram, mfcc, write_frames_csv
from .metrics import write_confusion_csv
from .pipeline import BoundaryUtterance, encode_segments, evaluate_segmentation, fit_coder
from .tuner import SearchSpace, random_search, write_trial_log

EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_INTEGRITY = 3
EXIT_LABEL = 4
EXIT_PARTIAL = 5


class PartialFailure(RuntimeError):
    def __init__(self, message: str, report_path):
        super().__init__(message)
        self.report_path = str(report_path)


# -- report helpers -----------------------------------------------------------

def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_report(path, command: str, cfg: dict, body: dict):
    report = {"command": command, "config": cfgmod.identity(cfg),
              "config_hash": cfgmod.config_hash(cfg), **body}
    report["content_hash"] = hashlib.sha256(_canonical(report).encode()).hexdigest()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(_canonical(report))
    return report


def _out(cfg) -> Path:
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- corpus access ------------------------------------------------------------

def _manifest(cfg) -> tuple[dict, Path]:
    path = cfg["corpus"]["manifest"]
    if path is None:
        raise cfgmod.ConfigError("corpus.manifest is required for this command")
    with open(path) as fh:
        doc = json.load(fh)
    root = Path(cfg["corpus"]["root"] or Path(path).resolve().parent)
    return doc, root


def _phone_map(cfg) -> PhoneMap:
    pm = cfg["corpus"]["phone_map"]
    return PhoneMap.from_json(pm) if pm else PhoneMap.timit39()


def _utterances(cfg, key: str = "utterances", map_labels: bool = False):
    doc, root = _manifest(cfg)
    items = doc.get(key) or []
    if not items:
        raise cfgmod.ConfigError(f"manifest has no {key!r} entries")
    pmap = _phone_map(cfg) if map_labels else None
    out = []
    for i, it in enumerate(items):
        wrd = it.get("wrd")
        out.append(load_timit_utterance(root / it["wav"], root / it["phn"],
                                        root / wrd if wrd else None, pmap,
                                        it.get("id") or f"utt{i:04d}", map_labels=map_labels))
    return out


def _boundary_corpus(cfg) -> list[BoundaryUtterance]:
    mel_cfg = cfgmod.mel_config(cfg)
    out = []
    for u in _utterances(cfg):
        spec = mel_spectrogram(u.audio, mel_cfg)
        out.append(BoundaryUtterance(u.id, spec.frames, u.phone_boundaries(mel_cfg.hop),
                                     u.word_boundaries(mel_cfg.hop)))
    return out


def _classification_items(cfg, split: str) -> list[tuple[np.ndarray, str, list]]:
    """(MFCC frames, label, source) for every segment of a split.

    Items are either whole clips {"wav", "label"} or aligned utterances
    {"wav", "phn"} whose phone spans become segments. A Speech Commands tree
    configured under corpus.speech_commands is partitioned on the fly.
    """
    mcfg = cfgmod.mfcc_config(cfg)
    sc = cfg["corpus"]["speech_commands"]
    if sc is not None:
        parts = load_speech_commands(sc["root"], sc.get("words") or SPEECH_COMMANDS_WORDS,
                                     int(sc.get("n_train", 200)), int(sc.get("n_test", 50)), cfg["seed"])
        write_partition_manifest(_out(cfg) / "partitions.json", parts, sc["root"], cfg["seed"])
        root = Path(sc["root"])
        return [(mfcc(decode_wav(root / rel), mcfg).frames, lab, [rel, 0, None])
                for rel, lab in parts[split]]
    doc, root = _manifest(cfg)
    items = doc.get(split) or []
    if not items:
        raise cfgmod.ConfigError(f"manifest has no {split!r} entries")
    out = []
    pmap = None
    for i, it in enumerate(items):
        if "label" in it:
            frames = mfcc(decode_wav(root / it["wav"]), mcfg).frames
            out.append((frames, str(it["label"]), [it["wav"], 0, int(frames.shape[0])]))
            continue
        pmap = pmap or _phone_map(cfg)
        utt = load_timit_utterance(root / it["wav"], root / it["phn"], None, pmap,
                                   it.get("id") or f"{split}{i:04d}")
        frames = mfcc(utt.audio, mcfg).frames
        for label, a, b in utt.segments(mcfg.hop, mcfg.fft_size):
            out.append((frames[a:b], label, [utt.id, a, b]))
    return out


def _labels(cfg, train_items) -> list[str]:
    if cfg["classification"]["labels"]:
        return [str(x) for x in cfg["classification"]["labels"]]
    return sorted({lab for _, lab, _ in train_items})


def _restrict(items, labels):
    keep = set(labels)
    return [it for it in items if it[1] in keep]


def _model_dir(cfg) -> tuple[Path, str]:
    """Model folder, and how reports name it (relative to the output folder
    when defaulted, so reports do not depend on where outputs go)."""
    if cfg["classification"]["model_dir"]:
        return Path(cfg["classification"]["model_dir"]), str(cfg["classification"]["model_dir"])
    return _out(cfg) / "model", "model"


def _encoder_description(cfg, coder: PopulationCoder) -> dict:
    return {"mfcc": cfg["features"]["mfcc"],
            "population": {**cfg["encoder"]["population"], "fitted": coder.to_dict()}}


# -- verbs --------------------------------------------------------------------

def cmd_features(cfg) -> dict:
    out = _out(cfg) / "features"
    out.mkdir(parents=True, exist_ok=True)
    mel_cfg, mfcc_cfg = cfgmod.mel_config(cfg), cfgmod.mfcc_config(cfg)
    enc = ProbMelEncoderConfig(**cfg["encoder"]["prob_mel"], seed=cfg["seed"])
    rows = []
    for u in _utterances(cfg):
        mel = mel_spectrogram(u.audio, mel_cfg)
        mf = mfcc(u.audio, mfcc_cfg)
        spikes = prob_mel_encode(mel, enc, utterance_id=u.id)
        write_frames_csv(out / f"{u.id}_mel.csv", mel.frames, "mel")
        write_frames_csv(out / f"{u.id}_mfcc.csv", mf.frames, "c")
        write_frames_csv(out / f"{u.id}_spikes.csv", spikes, "b")
        rows.append({"id": u.id, "mel_frames": int(mel.frames.shape[0]),
                     "mfcc_frames": int(mf.frames.shape[0]),
                     "active_fraction": float(spikes.mean()) if spikes.size else 0.0})
    report = write_report(out / "summary.json", "features", cfg, {"utterances": rows})
    return report


def _write_signal_csv(path, cols: dict):
    names = list(cols)
    T = len(cols[names[0]])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frame"] + names)
        for t in range(T):
            w.writerow([t] + [repr(float(cols[n][t])) if cols[n].dtype.kind == "f" else int(cols[n][t])
                              for n in names])


def cmd_segment(cfg) -> dict:
    out = _out(cfg) / "segment"
    (out / "signals").mkdir(parents=True, exist_ok=True)
    utts = _boundary_corpus(cfg)
    seg = cfg["segmentation"]
    pm = cfg["encoder"]["prob_mel"]
    run = evaluate_segmentation(utts, cfgmod.hierarchy_config(cfg), cfg["seeds"], pm["gamma"],
                                pm["target_active_fraction"],
                                (seg["tolerance"]["phone"], seg["tolerance"]["word"]),
                                tuple(seg["prominences"]), cfg["threads"])
    for (seed, uid), cols in sorted(run.frames.items()):
        _write_signal_csv(out / "signals" / f"{uid}_seed{seed}.csv", cols)
    report = write_report(out / "summary.json", "segment", cfg, run.summary)
    if run.failures:
        raise PartialFailure(f"{len(run.failures)} utterance runs failed", out / "summary.json")
    return report


def cmd_classify_train(cfg) -> dict:
    items = _classification_items(cfg, "train")
    labels = _labels(cfg, items)
    items = _restrict(items, labels)
    pop = cfg["encoder"]["population"]
    coder = fit_coder([f for f, _, _ in items], int(pop["n_pop"]), pop["sigma_frac"], pop["threshold"])
    segments = encode_segments([(f, lab) for f, lab, _ in items], coder)
    bank = build_bank(labels, cfgmod.classifier_area(cfg), coder.n_input, cfg["seed"])
    train_bank(bank, segments, int(cfg["classification"]["epochs"]), cfg["threads"])
    model_dir, model_name = _model_dir(cfg)
    encoder = _encoder_description(cfg, coder)
    save_bank(bank, model_dir, encoder,
              extra={"epochs": int(cfg["classification"]["epochs"]), "seed": cfg["seed"]})
    counts = {lab: 0 for lab in labels}
    for s in segments:
        counts[s.label] += 1
    body = {"model_dir": model_name, "labels": labels, "train_segments": counts,
            "input_width": coder.n_input, "encoder_hash": encoder_hash(encoder),
            "checksums": dict(zip(labels, bank.checksums()))}
    return write_report(_out(cfg) / "classify-train.json", "classify-train", cfg, body)


def cmd_classify_eval(cfg) -> dict:
    model_dir, model_name = _model_dir(cfg)
    bank, manifest = load_bank(model_dir)
    encoder = manifest.get("encoder") or {}
    if encoder_hash(encoder) != manifest.get("encoder_hash"):
        raise IntegrityError("manifest encoder description does not match its hash")
    want = {"mfcc": cfg["features"]["mfcc"], "population": cfg["encoder"]["population"]}
    have = {"mfcc": encoder.get("mfcc"),
            "population": {k: v for k, v in encoder.get("population", {}).items() if k != "fitted"}}
    if want != have:
        raise IntegrityError("configured encoder differs from the one the model was trained with")
    coder = PopulationCoder.from_dict(encoder["population"]["fitted"])
    if coder.n_input != bank.input_width:
        raise IntegrityError("encoder width does not match the model")
    before = bank.checksums()
    items = _restrict(_classification_items(cfg, "test"), bank.labels)
    segments = encode_segments([(f, lab) for f, lab, _ in items], coder, [s for _, _, s in items])
    preds = predict(bank, segments, cfg["threads"])
    report = evaluate(bank, segments)
    if bank.checksums() != before:  # frozen-weight guarantee
        raise IntegrityError("weights changed during evaluation")
    out = _out(cfg)
    cm = np.array(report["confusion"])
    write_confusion_csv(out / "confusion.csv", cm, bank.labels)
    write_confusion_csv(out / "confusion_normalised.csv", np.array(report["confusion_normalised"]),
                        bank.labels)
    with open(out / "predictions.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "source", "start", "end", "label", "predicted"])
        for i, (seg, p) in enumerate(zip(segments, preds)):
            src = seg.source or ["", "", ""]
            w.writerow([i, src[0], src[1], "" if src[2] is None else src[2], seg.label, p.label])
    body = {"model_dir": model_name, "encoder_hash": manifest["encoder_hash"], **report}
    return write_report(out / "classify-eval.json", "classify-eval", cfg, body)


def _tune_objective(cfg):
    objective = cfg["tune"]["objective"]
    if objective.startswith("segment"):
        cache: dict = {}

        def run(params):
            trial_cfg = _with_params(cfg, params)
            key = json.dumps(trial_cfg["features"]["mel"], sort_keys=True)
            if key not in cache:
                cache[key] = _boundary_corpus(trial_cfg)
            seg = trial_cfg["segmentation"]
            pm = trial_cfg["encoder"]["prob_mel"]
            res = evaluate_segmentation(cache[key], cfgmod.hierarchy_config(trial_cfg),
                                        trial_cfg["seeds"], pm["gamma"], pm["target_active_fraction"],
                                        (seg["tolerance"]["phone"], seg["tolerance"]["word"]),
                                        tuple(seg["prominences"]))
            if res.failures:
                raise RuntimeError(res.failures[0]["error"])
            method = "level1" if objective == "segment_phone" else "level2"
            return res.summary["methods"][method]["mean"]["f1"]
        return run

    cache = {}

    def run_cls(params):
        trial_cfg = _with_params(cfg, params)
        key = json.dumps(trial_cfg["features"]["mfcc"], sort_keys=True)
        if key not in cache:
            cache[key] = (_classification_items(trial_cfg, "train"),
                          _classification_items(trial_cfg, "valid" if _has_split(trial_cfg, "valid")
                                                else "test"))
        train, held = cache[key]
        labels = _labels(trial_cfg, train)
        train, held = _restrict(train, labels), _restrict(held, labels)
        pop = trial_cfg["encoder"]["population"]
        coder = fit_coder([f for f, _, _ in train], int(pop["n_pop"]), pop["sigma_frac"], pop["threshold"])
        bank = build_bank(labels, cfgmod.classifier_area(trial_cfg), coder.n_input, trial_cfg["seed"])
        train_bank(bank, encode_segments([(f, lab) for f, lab, _ in train], coder),
                   int(trial_cfg["classification"]["epochs"]))
        return evaluate(bank, encode_segments([(f, lab) for f, lab, _ in held], coder))["accuracy"]
    return run_cls


def _has_split(cfg, split) -> bool:
    if cfg["corpus"]["speech_commands"] is not None:
        return False
    doc, _ = _manifest(cfg)
    return bool(doc.get(split))


def _with_params(cfg, params) -> dict:
    trial = copy.deepcopy(cfg)
    for key, value in sorted(params.items()):
        cfgmod.set_key(trial, key, value.item() if isinstance(value, np.generic) else value)
    cfgmod.validate(trial)
    return trial


def cmd_tune(cfg) -> dict:
    out = _out(cfg) / "tune"
    out.mkdir(parents=True, exist_ok=True)
    space = SearchSpace.from_dict(cfg["tune"]["space"])
    if not space.params:
        raise cfgmod.ConfigError("tune.space is empty")
    result = random_search(space, _tune_objective(cfg), int(cfg["tune"]["n_trials"]), cfg["seed"],
                           fixed=cfg["tune"]["fixed"] or None)
    write_trial_log(out / "trials.csv", result)
    body = {"objective": cfg["tune"]["objective"], "best_params": result.best_params,
            "best_score": result.best_score,
            "n_failed": sum(t.status == "failed" for t in result.trials),
            "n_trials": len(result.trials)}
    return write_report(out / "best.json", "tune", cfg, body)


COMMANDS = {
    "features": cmd_features,
    "segment": cmd_segment,
    "classify-train": cmd_classify_train,
    "classify-eval": cmd_classify_eval,
    "tune": cmd_tune,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="acspeech", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", "-c", help="YAML configuration file")
        s.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key (dotted path); repeatable")
        s.add_argument("--seed", type=int, help="global seed (shortcut for --set seed=N)")
        s.add_argument("--threads", type=int, help="worker threads")
        s.add_argument("--output-dir", "-o", help="output folder")
        if name == "classify-eval":
            s.add_argument("--model", help="model folder (default: <output-dir>/model)")
    return p


def _error(exc: BaseException, code: int, output_dir=None) -> int:
    doc = {"status": "error", "error_type": type(exc).__name__, "message": str(exc), "exit_code": code}
    if isinstance(exc, PartialFailure):
        doc["report"] = exc.report_path
    text = json.dumps(doc, sort_keys=True)
    print(text)
    if output_dir:
        try:
            Path(output_dir).mkdir(parents=True, exist_ok=True)
            (Path(output_dir) / "error.json").write_text(text + "\n")
        except OSError:
            pass
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.threads is not None:
        overrides.append(f"threads={args.threads}")
    if args.output_dir is not None:
        overrides.append(f"output_dir={json.dumps(args.output_dir)}")
    if getattr(args, "model", None):
        overrides.append(f"classification.model_dir={json.dumps(args.model)}")
    output_dir = args.output_dir
    try:
        cfg = cfgmod.load_config(args.config, overrides)
        output_dir = cfg["output_dir"]
        report = COMMANDS[args.command](cfg)
    except cfgmod.ConfigError as exc:
        return _error(exc, EXIT_CONFIG, output_dir)
    except IntegrityError as exc:
        return _error(exc, EXIT_INTEGRITY, output_dir)
    except (LabelError, UnknownPhoneError) as exc:
        return _error(exc, EXIT_LABEL, output_dir)
    except PartialFailure as exc:
        return _error(exc, EXIT_PARTIAL, output_dir)
    except (CorpusParseError, CorpusValidationError, CorpusCountError, DecodeError, OSError,
            ValueError, KeyError) as exc:
        return _error(exc, EXIT_ERROR, output_dir)
    print(json.dumps({"status": "ok", "command": args.command,
                      "content_hash": report["content_hash"]}, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
