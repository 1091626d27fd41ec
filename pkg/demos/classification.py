"""Per-class areas as classifiers, scored by resonance.

Run: python3 demos/classification.py
"""

import numpy as np

from acspeech.area import AreaConfig
from acspeech.classification import build_bank, confusion_matrix, evaluate
from acspeech.features import mfcc
from acspeech.pipeline import encode_segments, train_classifier
from acspeech.synthetic import CLASSIFY_CONFIG, class_glides, glide_audio

rng = np.random.default_rng(0)
glides = class_glides(rng, n_classes=5)
labels = [f"c{c}" for c in range(5)]


def draw(count):
    return [(mfcc(glide_audio(rng, glides[c])).frames, labels[c])
            for c in range(5) for _ in range(count)]


train, test = draw(30), draw(10)
pop = CLASSIFY_CONFIG["encoder"]["population"]
area = AreaConfig(**CLASSIFY_CONFIG["classification"]["area"])

# %% Train one area per class on its own clips, then classify held-out clips.
bank, coder = train_classifier(train, labels, area, CLASSIFY_CONFIG["classification"]["epochs"],
                               pop["n_pop"], pop["sigma_frac"], pop["threshold"])
segments = encode_segments(test, coder)
report = evaluate(bank, segments)
print(f"trained accuracy {report['accuracy']:.3f} (chance {report['chance']:.2f})")
counts, _ = confusion_matrix(bank, segments)
print(counts)

# %% Untrained banks have no class preference, so they sit near chance.
accs = [evaluate(build_bank(labels, area, coder.n_input, seed), segments)["accuracy"]
        for seed in range(10)]
print(f"untrained accuracy {np.mean(accs):.3f} +/- {np.std(accs):.3f} over 10 banks")
