"""Seeded random search over a declared hyperparameter space.

The whole parameter sequence is drawn up front from the seed, so the sampled
points do not depend on how many trials run concurrently or which ones fail.
Staged searches (e.g. Level 1 first, then Level 2 with Level 1 frozen) pass
the frozen values as ``fixed``.
"""

from __future__ import annotations

import csv
import math
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from ._seeding import generator

DEFAULT_TRIALS = 200


@dataclass(frozen=True)
class IntParam:
    low: int
    high: int  # inclusive

    def __post_init__(self):
        if self.high < self.low:
            raise ValueError(f"empty integer range [{self.low}, {self.high}]")

    def sample(self, rng: np.random.Generator) -> int:
        return int(rng.integers(self.low, self.high + 1))


@dataclass(frozen=True)
class RealParam:
    low: float
    high: float
    log: bool = False

    def __post_init__(self):
        if self.high < self.low:
            raise ValueError(f"empty real range [{self.low}, {self.high}]")
        if self.log and self.low <= 0:
            raise ValueError("log-scale ranges must be strictly positive")

    def sample(self, rng: np.random.Generator) -> float:
        u = rng.random()
        if self.log:
            return float(math.exp(math.log(self.low) + u * (math.log(self.high) - math.log(self.low))))
        return float(self.low + u * (self.high - self.low))


@dataclass(frozen=True)
class ChoiceParam:
    options: tuple

    def __post_init__(self):
        if len(self.options) == 0:
            raise ValueError("categorical parameter needs at least one option")

    def sample(self, rng: np.random.Generator):
        return self.options[int(rng.integers(len(self.options)))]


@dataclass
class SearchSpace:
    params: dict = field(default_factory=dict)  # name -> IntParam | RealParam | ChoiceParam

    @classmethod
    def from_dict(cls, spec: Mapping[str, Mapping]) -> "SearchSpace":
        """Build from a config mapping such as
        ``{"tau": {"type": "real", "low": 0.1, "high": 0.9},
        "k": {"type": "int", "low": 10, "high": 100},
        "beta": {"type": "real", "low": 1e-4, "high": 1e-2, "log": true},
        "rule": {"type": "choice", "options": ["hebbian", "abs"]}}``."""
        params = {}
        for name, d in spec.items():
            kind = d.get("type")
            if kind == "int":
                params[name] = IntParam(int(d["low"]), int(d["high"]))
            elif kind == "real":
                params[name] = RealParam(float(d["low"]), float(d["high"]), bool(d.get("log", False)))
            elif kind == "choice":
                params[name] = ChoiceParam(tuple(d["options"]))
            else:
                raise ValueError(f"parameter {name!r}: unknown type {kind!r}")
        return cls(params)

    def sample(self, rng: np.random.Generator) -> dict:
        # fixed name order so the draw sequence only depends on the space
        return {name: self.params[name].sample(rng) for name in sorted(self.params)}


@dataclass
class Trial:
    number: int
    params: dict
    score: float | None = None
    status: str = "pending"  # "ok" | "failed"
    error: str | None = None


@dataclass
class SearchResult:
    best_params: dict | None
    best_score: float | None
    trials: list[Trial]

    @property
    def best_trial(self) -> Trial | None:
        ok = [t for t in self.trials if t.status == "ok"]
        return max(ok, key=lambda t: (t.score, -t.number)) if ok else None


def sample_trials(space: SearchSpace, n_trials: int, seed: int, fixed: Mapping | None = None) -> list[dict]:
    rng = generator("random-search", seed)
    out = []
    for _ in range(n_trials):
        p = space.sample(rng)
        if fixed:
            p.update(fixed)
        out.append(p)
    return out


def random_search(space: SearchSpace, objective: Callable[[dict], float], n_trials: int = DEFAULT_TRIALS,
                  seed: int = 0, fixed: Mapping | None = None, threads: int = 1) -> SearchResult:
    """Maximise ``objective`` over ``n_trials`` random points.

    A trial whose objective raises, or returns a non-finite value, is marked
    failed and the search carries on. Ties keep the earliest trial.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    points = sample_trials(space, n_trials, seed, fixed)

    def run(i: int) -> Trial:
        trial = Trial(i, points[i])
        try:
            score = float(objective(dict(points[i])))
            if not math.isfinite(score):
                raise ValueError(f"non-finite score {score}")
            trial.score, trial.status = score, "ok"
        except Exception as exc:  # noqa: BLE001 - a failed trial must not stop the search
            trial.status = "failed"
            trial.error = "".join(traceback.format_exception_only(type(exc), exc)).strip()
        return trial

    if threads <= 1:
        trials = [run(i) for i in range(n_trials)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trials = list(pool.map(run, range(n_trials)))
    result = SearchResult(None, None, trials)
    best = result.best_trial
    if best is not None:
        result.best_params, result.best_score = dict(best.params), best.score
    return result


def write_trial_log(path, result: SearchResult, param_names: Sequence[str] | None = None):
    names = list(param_names) if param_names else sorted({k for t in result.trials for k in t.params})
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trial", "status", "score"] + names + ["error"])
        for t in result.trials:
            w.writerow([t.number, t.status, "" if t.score is None else repr(t.score)]
                       + [_cell(t.params.get(n)) for n in names] + [t.error or ""])


def _cell(v: Any) -> str:
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)
