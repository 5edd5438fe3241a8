"""Diversity metrics: active filtering, diverse actives and scaffold counts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import tanimoto_gram
from .streams import as_generator

ACTIVE_THRESHOLD = 0.5
BRUTE_FORCE_MAX_N = 20


@dataclass(frozen=True)
class DiversityReport:
    step: int
    n_actives: int
    n_scaffolds: int
    diverse_actives: float
    selected: tuple[int, ...] = ()


def is_active(scores) -> bool:
    """Both drug-likeness and activity strictly above 0.5."""
    return scores.qed > ACTIVE_THRESHOLD and scores.activity > ACTIVE_THRESHOLD


def _distances(fps) -> np.ndarray:
    return 1.0 - tanimoto_gram(fps)


def maxmin_diverse_actives(fps, threshold: float, rng=None) -> tuple[int, list[int]]:
    """Greedy MaxMin packing under Tanimoto distance.

    Seeds with one random item, then repeatedly adds the item farthest from
    the current selection until that distance drops below ``threshold``.
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold D must lie in (0, 1]")
    fps = np.asarray(fps, dtype=bool)
    n = fps.shape[0] if fps.ndim == 2 else 0
    if n == 0:
        return 0, []
    rng = as_generator(rng)
    x = fps.astype(np.float64)
    pop = x.sum(axis=1)

    def dist_to(i):
        inter = x @ x[i]
        union = pop + pop[i] - inter
        with np.errstate(invalid="ignore", divide="ignore"):
            sim = np.where(union > 0, inter / union, 1.0)
        return 1.0 - sim

    first = int(rng.integers(n))
    picked = [first]
    mind = dist_to(first)
    mind[first] = -1.0
    while len(picked) < n:
        cand = int(np.argmax(mind))
        if mind[cand] < threshold:
            break
        picked.append(cand)
        mind = np.minimum(mind, dist_to(cand))
        mind[picked] = -1.0
    return len(picked), picked


def bruteforce_diverse_actives(fps, threshold: float) -> int:
    """Largest subset with all pairwise distances >= threshold (exact).

    Maximum independent set in the graph joining pairs closer than the
    threshold, by branch and bound over bitmasks.
    """
    fps = np.asarray(fps, dtype=bool)
    n = fps.shape[0] if fps.ndim == 2 else 0
    if n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"refusing exact search over {n} > {BRUTE_FORCE_MAX_N} items")
    if n == 0:
        return 0
    close = _distances(fps) < threshold
    nbr = [sum(1 << j for j in range(n) if j != i and close[i, j]) for i in range(n)]
    best = 0

    def search(cands: int, size: int):
        nonlocal best
        if size + bin(cands).count("1") <= best:
            return
        if cands == 0:
            best = size
            return
        v = (cands & -cands).bit_length() - 1
        search(cands & ~(1 << v) & ~nbr[v], size + 1)
        search(cands & ~(1 << v), size)

    search((1 << n) - 1, 0)
    return best


def is_valid_packing(fps, selected, threshold: float) -> bool:
    if len(selected) < 2:
        return True
    d = _distances(np.asarray(fps, dtype=bool)[list(selected)])
    off = ~np.eye(len(selected), dtype=bool)
    return bool(np.all(d[off] >= threshold))


def is_maximal_packing(fps, selected, threshold: float) -> bool:
    d = _distances(np.asarray(fps, dtype=bool))
    chosen = set(selected)
    for i in range(d.shape[0]):
        if i not in chosen and all(d[i, j] >= threshold for j in chosen):
            return False
    return True


def active_entries(entries):
    """Distinct active molecules from memory entries, first occurrence kept."""
    seen = {}
    for e in entries:
        if e.qed > ACTIVE_THRESHOLD and e.activity > ACTIVE_THRESHOLD:
            seen.setdefault(e.molecule.tokens, e)
    return list(seen.values())


def cumulative_scaffolds(entries, step: int | None = None) -> int:
    """Distinct scaffolds among active entries added up to ``step``."""
    actives = active_entries(e for e in entries if step is None or e.step <= step)
    return len({e.molecule.scaffold.key for e in actives})


def diversity_report(entries, step: int, threshold: float = 0.7, rng=None,
                     reseeds: int = 1) -> DiversityReport:
    """Metrics over entries up to ``step``.

    With ``reseeds > 1`` the MaxMin count is averaged over that many picking
    orders drawn from ``rng``.
    """
    rng = as_generator(rng)
    actives = active_entries(e for e in entries if e.step <= step)
    n_scaffolds = len({e.molecule.scaffold.key for e in actives})
    if not actives:
        return DiversityReport(step, 0, 0, 0)
    fps = np.stack([e.molecule.bit_fp for e in actives])
    counts, first_pick = [], ()
    for r in range(max(1, reseeds)):
        count, picked = maxmin_diverse_actives(fps, threshold, rng)
        counts.append(count)
        if r == 0:
            first_pick = tuple(picked)
    value = counts[0] if len(counts) == 1 else float(np.mean(counts))
    return DiversityReport(step, len(actives), n_scaffolds, value, first_pick)
