"""Assembly areas: fixed in-degree random connectivity, k-cap, refractory
adaptation and the Hebbian / ABS plasticity rules.

Weights are stored per destination neuron. ``ff_src[v]`` lists the ``k_in``
input indices feeding neuron ``v`` and ``ff_w[v]`` their weights; the same
buffer backs a CSR matrix so the drive is a single sparse mat-vec. The
recurrent graph is stored the same way with ``k_in_rec`` sources per neuron.
"""

from __future__ import annotations

import copy
import hashlib
import io
import json
import zipfile
from dataclasses import asdict, dataclass

import numpy as np
from scipy import sparse

from ._seeding import generator

HEBBIAN = "hebbian"
ABS = "abs"
FORMAT_VERSION = 1

_EMPTY = np.zeros(0, dtype=np.int64)


class ConfigError(ValueError):
    pass


class ShapeError(ValueError):
    pass


class SnapshotVersionError(ValueError):
    pass


@dataclass(frozen=True)
class AreaConfig:
    n: int
    k: int
    k_in: int
    k_in_rec: int = 0
    rho: float = 0.0
    beta: float = 0.0
    rule: str = HEBBIAN
    seed: int = 0
    # "uniform": every incoming weight 1/in-degree; "random": U(0,1) then
    # normalised per destination.
    init: str = "uniform"

    def __post_init__(self):
        if not 0 < self.k <= self.n:
            raise ConfigError(f"need 0 < k <= n, got k={self.k}, n={self.n}")
        if self.k_in <= 0:
            raise ConfigError("k_in must be positive")
        if not 0 <= self.k_in_rec < self.n:
            raise ConfigError(f"need 0 <= k_in_rec < n, got {self.k_in_rec}")
        if self.rho < 0 or self.beta < 0:
            raise ConfigError("rho and beta must be non-negative")
        if self.rule not in (HEBBIAN, ABS):
            raise ConfigError(f"unknown plasticity rule {self.rule!r}")
        if self.rule == ABS and self.beta >= 1:
            raise ConfigError("ABS depression needs beta < 1")
        if self.init not in ("uniform", "random"):
            raise ConfigError(f"unknown init {self.init!r}")

    def replace(self, **changes) -> "AreaConfig":
        return AreaConfig(**{**asdict(self), **changes})


def _sample_sources(rng: np.random.Generator, n_rows: int, pool: int, k: int,
                    exclude_self: bool = False) -> np.ndarray:
    """Per row, ``k`` distinct indices drawn uniformly from ``range(pool)``.

    With ``exclude_self`` row ``v`` never lists ``v`` (``pool`` is then the
    row count and sampling is over the other ``pool - 1`` indices).
    """
    choices = pool - 1 if exclude_self else pool
    out = np.empty((n_rows, k), dtype=np.int32)
    chunk = max(1, 4_000_000 // max(choices, 1))
    for start in range(0, n_rows, chunk):
        stop = min(n_rows, start + chunk)
        keys = rng.random((stop - start, choices))
        idx = np.argpartition(keys, k - 1, axis=1)[:, :k] if k < choices else \
            np.broadcast_to(np.arange(choices), keys.shape).copy()
        if exclude_self:
            rows = np.arange(start, stop)[:, None]
            idx = idx + (idx >= rows)
        out[start:stop] = np.sort(idx, axis=1)
    return out


def _initial_weights(rng: np.random.Generator, shape, init: str) -> np.ndarray:
    if shape[1] == 0:
        return np.zeros(shape)
    if init == "uniform":
        return np.full(shape, 1.0 / shape[1])
    w = rng.random(shape)
    return w / w.sum(axis=1, keepdims=True)


def _csr(w: np.ndarray, src: np.ndarray, n_cols: int) -> sparse.csr_array:
    n, deg = w.shape
    indptr = np.arange(n + 1, dtype=np.int64) * deg
    return sparse.csr_array((w.reshape(-1), src.reshape(-1), indptr),
                            shape=(n, n_cols), copy=False)


def k_cap(drive: np.ndarray, k: int) -> np.ndarray:
    """Sorted indices of the ``k`` largest drives; ties go to the lower index."""
    drive = np.asarray(drive)
    n = drive.size
    if k >= n:
        return np.arange(n)
    thr = np.partition(drive, n - k)[n - k]
    above = np.flatnonzero(drive > thr)
    ties = np.flatnonzero(drive == thr)[: k - above.size]
    return np.sort(np.concatenate([above, ties]))


def overlap(a: np.ndarray, b: np.ndarray) -> int:
    return int(np.intersect1d(a, b, assume_unique=True).size)


class Area:
    """A population of ``n`` neurons with k-cap competition.

    Mutable state machine: ``refractory_bias`` and ``prev_assembly`` evolve
    with every :meth:`step`; weights change only when ``beta > 0``.
    """

    def __init__(self, config: AreaConfig, input_width: int, ff_src, ff_w, rec_src, rec_w):
        self.config = config
        self.input_width = int(input_width)
        self.ff_src = np.ascontiguousarray(ff_src, dtype=np.int32)
        self.rec_src = np.ascontiguousarray(rec_src, dtype=np.int32)
        self._ff = _csr(np.ascontiguousarray(ff_w, dtype=np.float64), self.ff_src, self.input_width)
        self._rec = _csr(np.ascontiguousarray(rec_w, dtype=np.float64), self.rec_src, config.n)
        self.refractory_bias = np.zeros(config.n)
        self.prev_assembly = _EMPTY

    # weight views share memory with the sparse matrices
    @property
    def ff_w(self) -> np.ndarray:
        return self._ff.data.reshape(self.config.n, self.config.k_in)

    @property
    def rec_w(self) -> np.ndarray:
        return self._rec.data.reshape(self.config.n, self.config.k_in_rec)

    @property
    def n(self) -> int:
        return self.config.n

    @property
    def k(self) -> int:
        return self.config.k

    def prev_indicator(self) -> np.ndarray:
        a = np.zeros(self.config.n)
        a[self.prev_assembly] = 1.0
        return a

    def feedforward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if x.shape != (self.input_width,):
            raise ShapeError(f"input has shape {x.shape}, area expects ({self.input_width},)")
        return self._ff @ x.astype(np.float64, copy=False)

    def recurrent(self, assembly: np.ndarray) -> np.ndarray:
        if self.config.k_in_rec == 0 or assembly.size == 0:
            return np.zeros(self.config.n)
        a = np.zeros(self.config.n)
        a[assembly] = 1.0
        return self._rec @ a

    def compute_drive(self, x: np.ndarray) -> np.ndarray:
        """Feedforward + recurrent input minus the refractory bias."""
        return self.feedforward(x) + self.recurrent(self.prev_assembly) - self.refractory_bias

    def apply_plasticity(self, x: np.ndarray, assembly: np.ndarray):
        beta = self.config.beta
        if beta <= 0 or assembly.size == 0:
            return
        depress = self.config.rule == ABS
        x = np.asarray(x)
        _update_rows(self.ff_w, self.ff_src, assembly, x != 0, beta, depress)
        if self.config.k_in_rec:
            pre = np.zeros(self.config.n, dtype=bool)
            pre[self.prev_assembly] = True
            _update_rows(self.rec_w, self.rec_src, assembly, pre, beta, depress)

    def apply_refractory(self, drive: np.ndarray, assembly: np.ndarray):
        """Single-step suppression proportional to the fired neurons' raw input."""
        bias = np.zeros(self.config.n)
        rho = self.config.rho
        if rho > 0 and assembly.size:
            raw = drive[assembly] + self.refractory_bias[assembly]
            bias[assembly] = rho * np.maximum(raw, 0.0)
        self.refractory_bias = bias

    def commit(self, x: np.ndarray, drive: np.ndarray, assembly: np.ndarray, plastic: bool = True):
        """Finish a step with ``assembly`` as the firing set."""
        if plastic:
            self.apply_plasticity(x, assembly)
        self.apply_refractory(drive, assembly)
        self.prev_assembly = np.asarray(assembly, dtype=np.int64)

    def step(self, x: np.ndarray, plastic: bool = True) -> np.ndarray:
        """One time step; ``plastic=False`` freezes the weights for this step."""
        drive = self.compute_drive(x)
        assembly = k_cap(drive, self.config.k)
        self.commit(x, drive, assembly, plastic)
        return assembly

    def reset(self):
        self.prev_assembly = _EMPTY
        self.refractory_bias = np.zeros(self.config.n)

    def resonance(self, frames: np.ndarray) -> float:
        """Mean over frames of the summed top-k pre-competition drive.

        Runs the area's frozen feedforward + recurrent dynamics from a reset
        state with no plasticity and no refractory bias, on private scratch
        state; the area itself is left untouched.
        """
        frames = np.atleast_2d(frames)
        if frames.shape[0] == 0:
            raise ValueError("empty segment")
        k = self.config.k
        prev = _EMPTY
        total = 0.0
        for x in frames:
            u = self.feedforward(x) + self.recurrent(prev)
            prev = k_cap(u, k)
            total += float(u[prev].sum())
        return total / frames.shape[0]

    def copy(self) -> "Area":
        return copy.deepcopy(self)

    def weights_checksum(self) -> str:
        h = hashlib.sha256()
        for arr in (self.ff_src, self.ff_w, self.rec_src, self.rec_w):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()

    def dense_weights(self) -> tuple[np.ndarray, np.ndarray]:
        """(n, input_width) and (n, n) dense matrices; for tests and inspection."""
        return self._ff.toarray(), self._rec.toarray()

    # snapshots ---------------------------------------------------------

    def to_bytes(self) -> bytes:
        """Deterministic zip of .npy members plus a JSON header."""
        header = {
            "format_version": FORMAT_VERSION,
            "config": asdict(self.config),
            "input_width": self.input_width,
        }
        buf = io.BytesIO()
        with zipfile.ZipFile(buf, "w", compression=zipfile.ZIP_DEFLATED) as zf:
            _write_member(zf, "header.json", json.dumps(header, sort_keys=True).encode())
            for name in ("ff_src", "ff_w", "rec_src", "rec_w"):
                arr_buf = io.BytesIO()
                np.lib.format.write_array(arr_buf, np.ascontiguousarray(getattr(self, name)),
                                          allow_pickle=False)
                _write_member(zf, name + ".npy", arr_buf.getvalue())
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "Area":
        with zipfile.ZipFile(io.BytesIO(data)) as zf:
            header = json.loads(zf.read("header.json"))
            version = header.get("format_version")
            if version != FORMAT_VERSION:
                raise SnapshotVersionError(
                    f"snapshot format {version!r}, this build reads {FORMAT_VERSION}")
            arrays = {name: np.lib.format.read_array(io.BytesIO(zf.read(name + ".npy")),
                                                     allow_pickle=False)
                      for name in ("ff_src", "ff_w", "rec_src", "rec_w")}
        cfg = AreaConfig(**header["config"])
        return cls(cfg, header["input_width"], **arrays)

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "Area":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def _write_member(zf: zipfile.ZipFile, name: str, payload: bytes):
    info = zipfile.ZipInfo(name, date_time=(1980, 1, 1, 0, 0, 0))
    info.compress_type = zipfile.ZIP_DEFLATED
    info.external_attr = 0o644 << 16
    zf.writestr(info, payload)


def _update_rows(w: np.ndarray, src: np.ndarray, rows: np.ndarray, pre_active: np.ndarray,
                 beta: float, depress: bool):
    """Scale the incoming edges of the ``rows`` neurons, clamp, renormalise."""
    active = pre_active[src[rows]]
    block = w[rows]
    if depress:
        block *= np.where(active, 1.0 + beta, 1.0 - beta)
        np.maximum(block, 0.0, out=block)
    else:
        block *= np.where(active, 1.0 + beta, 1.0)
    sums = block.sum(axis=1, keepdims=True)
    np.divide(block, sums, out=block, where=sums > 0)
    w[rows] = block


def build_area(cfg: AreaConfig, input_width: int) -> Area:
    """Sample a fresh area: ``k_in`` distinct feedforward sources per neuron and
    ``k_in_rec`` distinct recurrent sources excluding the neuron itself."""
    if cfg.k_in > input_width:
        raise ConfigError(f"k_in={cfg.k_in} exceeds input width {input_width}")
    rng = generator("area", cfg.seed)
    ff_src = _sample_sources(rng, cfg.n, input_width, cfg.k_in)
    if cfg.k_in_rec:
        rec_src = _sample_sources(rng, cfg.n, cfg.n, cfg.k_in_rec, exclude_self=True)
    else:
        rec_src = np.zeros((cfg.n, 0), dtype=np.int32)
    ff_w = _initial_weights(rng, ff_src.shape, cfg.init)
    rec_w = _initial_weights(rng, rec_src.shape, cfg.init)
    return Area(cfg, input_width, ff_src, ff_w, rec_src, rec_w)
