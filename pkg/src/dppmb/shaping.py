"""Memory of high-scoring molecules and reward shaping (IMS penalty, TanhRND novelty)."""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .fingerprints import FP_BITS, Molecule
from .streams import as_generator

SHAPING_MODES = ("none", "ims", "tanhrnd")


@dataclass(frozen=True)
class MemoryEntry:
    step: int
    molecule: Molecule
    reward: float
    qed: float = float("nan")
    activity: float = float("nan")


@dataclass
class MemoryStore:
    """Append-only store of molecules whose extrinsic reward reached ``h``."""

    h: float = 0.5
    entries: list[MemoryEntry] = field(default_factory=list)
    scaffold_buckets: Counter = field(default_factory=Counter)

    def admit(self, m: Molecule, reward: float, step: int, qed: float = float("nan"),
              activity: float = float("nan")) -> bool:
        if not 0.0 <= reward <= 1.0:
            raise ValueError(f"reward {reward} outside [0, 1]")
        if reward < self.h:
            return False
        self.entries.append(MemoryEntry(step, m, float(reward), float(qed), float(activity)))
        self.scaffold_buckets[m.scaffold.key] += 1
        return True

    def bucket_count(self, m: Molecule) -> int:
        return self.scaffold_buckets.get(m.scaffold.key, 0)

    def __len__(self):
        return len(self.entries)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "reward", "scaffold_key", "tokens", "qed", "activity"])
            for e in self.entries:
                w.writerow([e.step, repr(e.reward), e.molecule.scaffold.key, e.molecule.key,
                            repr(e.qed), repr(e.activity)])


def read_memory_csv(path) -> list[MemoryEntry]:
    entries = []
    with open(Path(path), newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"step", "reward", "tokens"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            tokens = tuple(int(t) for t in row["tokens"].split())
            entries.append(MemoryEntry(
                step=int(row["step"]),
                molecule=Molecule(tokens),
                reward=float(row["reward"]),
                qed=float(row.get("qed") or "nan"),
                activity=float(row.get("activity") or "nan"),
            ))
    return entries


def memory_admit(mem: MemoryStore, m: Molecule, reward: float, step: int) -> MemoryStore:
    mem.admit(m, reward, step)
    return mem


def ims_factor(mem: MemoryStore, m: Molecule, bucket_size: int = 25) -> int:
    """0 once ``bucket_size`` molecules sharing m's scaffold are in memory, else 1."""
    return 0 if mem.bucket_count(m) >= bucket_size else 1


class RndState:
    """Random network distillation over bit fingerprints.

    A fixed random map ``tanh(W_t x)`` is the target; a second map of the
    same form is trained online to imitate it. Inputs are fingerprints
    rescaled to +-1. Prediction error, normalised by its running mean and
    squashed with tanh, is the novelty signal.
    """

    def __init__(self, rng=None, out_dim: int = 32, in_dim: int = FP_BITS,
                 lr: float = 1e-3, decay: float = 0.99):
        rng = as_generator(rng)
        scale = 1.0 / np.sqrt(in_dim)
        self.target = rng.normal(0.0, scale, (out_dim, in_dim))
        self.target.flags.writeable = False
        self.predictor = rng.normal(0.0, scale, (out_dim, in_dim))
        self.lr = lr
        self.decay = decay
        self.mean: float | None = None
        self.var = 0.0

    @staticmethod
    def _inputs(m: Molecule) -> np.ndarray:
        return np.where(m.bit_fp, 1.0, -1.0)

    def error(self, m: Molecule) -> float:
        x = self._inputs(m)
        diff = np.tanh(self.predictor @ x) - np.tanh(self.target @ x)
        return float(np.mean(diff * diff))

    def novelty(self, m: Molecule) -> float:
        e = self.error(m)
        mean = e if self.mean is None else self.mean
        return float(np.tanh(e / (mean + 1e-8)))

    def update(self, molecules) -> None:
        for m in molecules:
            x = self._inputs(m)
            pred = np.tanh(self.predictor @ x)
            diff = pred - np.tanh(self.target @ x)
            e = float(np.mean(diff * diff))
            if self.mean is None:
                self.mean = e
            else:
                delta = e - self.mean
                self.mean += (1.0 - self.decay) * delta
                self.var = self.decay * (self.var + (1.0 - self.decay) * delta * delta)
            g = (2.0 / diff.size) * diff * (1.0 - pred * pred)
            self.predictor -= self.lr * np.outer(g, x)


def rnd_novelty(state: RndState, m: Molecule) -> float:
    return state.novelty(m)


def rnd_update(state: RndState, selected) -> RndState:
    state.update(selected)
    return state


def reshape(mode: str, reward: float, m: Molecule, mem: MemoryStore | None = None,
            rnd: RndState | None = None, bucket_size: int = 25) -> float:
    """Reward observed by the agent under the given shaping mode."""
    if mode == "none":
        return reward
    if mode == "ims":
        return ims_factor(mem, m, bucket_size) * reward
    if mode == "tanhrnd":
        return reward * (0.5 + 0.5 * rnd.novelty(m))
    raise ValueError(f"unknown shaping mode {mode!r}; expected one of {SHAPING_MODES}")
