"""Unsupervised boundaries from a two-level refractory hierarchy.

Run: python3 demos/segmentation.py [output folder]

Writes one CSV per utterance with the two change signals and the reference
boundaries, ready for plotting.
"""

import sys
from pathlib import Path

import numpy as np

from acspeech.encoding import ProbMelEncoderConfig, prob_mel_encode
from acspeech.pipeline import boundary_utterance, evaluate_segmentation
from acspeech.segmentation import (SYNTHETIC_ENCODER, SYNTHETIC_HIERARCHY, oracle_sweep,
                                   run_hierarchy)
from acspeech.synthetic import alternating_spectrogram, multiscale_audio

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo-out/segmentation")
out.mkdir(parents=True, exist_ok=True)
enc = ProbMelEncoderConfig(**SYNTHETIC_ENCODER)

# %% Two spectra alternating every 20 frames: every switch is a boundary.
frames, switches = alternating_spectrogram(np.random.default_rng(0))
res = run_hierarchy(prob_mel_encode(frames, enc, utterance_id="alt"), SYNTHETIC_HIERARCHY)
sweep = oracle_sweep(res.level1, switches, tolerance=2, min_distance=3)
print("alternating input")
print("  switches:", switches.tolist())
print("  detected:", sweep.boundaries.frame_indices.tolist())
print(f"  F1 {sweep.best_f1:.2f} at prominence {sweep.best_prominence}")

# %% Words made of phones: Level 1 tracks phones, Level 2 tracks words.
rng = np.random.default_rng(1)
utts = []
for i in range(4):
    rec = multiscale_audio(rng, n_words=8)
    utts.append(boundary_utterance(f"utt{i}", rec.audio,
                                   [a // 320 for a, _, _ in rec.phones[1:]],
                                   [a // 320 for a, _, _ in rec.words[1:]]))
run = evaluate_segmentation(utts, SYNTHETIC_HIERARCHY, seeds=range(5),
                            gamma=SYNTHETIC_ENCODER["gamma"],
                            target=SYNTHETIC_ENCODER["target_active_fraction"])
print("\nmultiscale audio, 5 seeds")
for method, row in run.summary["methods"].items():
    print(f"  {method:10s} F1 {row['mean']['f1']:.3f} +/- {row['std']['f1']:.3f}")

for (seed, uid), cols in run.frames.items():
    if seed:
        continue
    names = list(cols)
    table = np.column_stack([cols[n] for n in names])
    np.savetxt(out / f"{uid}.csv", table, delimiter=",", header=",".join(names), comments="",
               fmt="%.6g")
print(f"\nper-frame signals written to {out}")

