"""Assemblies form, stabilise and complete sequences.

Run: python3 demos/assemblies.py
"""

import numpy as np

from acspeech.area import HEBBIAN, AreaConfig, build_area, overlap

rng = np.random.default_rng(0)

# %% A plastic area shown the same input settles on one assembly.
area = build_area(AreaConfig(n=1000, k=100, k_in=30, k_in_rec=100, beta=0.1, init="random"), 200)
x = (rng.random(200) < 0.1).astype(np.uint8)
prev = area.step(x)
print("step  overlap with previous step")
for t in range(1, 12):
    cur = area.step(x)
    print(f"{t:4d}  {overlap(cur, prev) / area.k:.2f}")
    prev = cur

# %% Recurrent weights learn a sequence; the first element alone replays it.
width, n_items = 100, 5
perm = rng.permutation(width)
seq = np.zeros((n_items, width), dtype=np.uint8)
for i in range(n_items):
    seq[i, perm[10 * i: 10 * (i + 1)]] = 1

area = build_area(AreaConfig(n=500, k=50, k_in=20, k_in_rec=100, beta=0.1, rule=HEBBIAN), width)
for _ in range(50):
    area.reset()
    trained = [area.step(s) for s in seq]

area.reset()
cue = [seq[0]] + [np.zeros(width, dtype=np.uint8)] * (n_items - 1)
recalled = [area.step(s, plastic=False) for s in cue]
print("\nposition  recalled/trained overlap")
for i, (r, t) in enumerate(zip(recalled, trained)):
    print(f"{i:8d}  {overlap(r, t) / area.k:.2f}")
