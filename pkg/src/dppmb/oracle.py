"""Synthetic reward: property proxies, score transforms and a multimodal activity landscape.

The extrinsic reward is the weighted geometric mean of five component
scores in [0, 1]: a double-sigmoid of the summed token weight, a reverse
sigmoid of the donor count, an entropy-based drug-likeness proxy, a binary
alert flag, and activity (rescaled max Tanimoto similarity to hidden motifs).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .fingerprints import DEFAULT_ALPHABET, Molecule, TokenAlphabet, tanimoto
from .kernels import tanimoto_gram

DEFAULT_SPEC_SEED = 0xC0FFEE
COMPONENTS = ("mw", "hbd", "qed", "alerts", "activity")


def _check(cond: bool, msg: str):
    if not cond:
        raise ValueError(msg)


def _logistic10(z):
    # 1 / (1 + 10**-z) without overflow
    return 0.5 * (1.0 + np.tanh(0.5 * math.log(10.0) * np.asarray(z, dtype=np.float64)))


def double_sigmoid(x, low, high, c_div, c_si, c_se):
    _check(low < high, "double_sigmoid needs low < high")
    _check(c_div > 0, "double_sigmoid needs c_div > 0")
    rise = _logistic10(c_se * (np.asarray(x) - low) / c_div)
    fall = _logistic10(c_si * (np.asarray(x) - high) / c_div)
    out = np.clip(rise - fall, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def reverse_sigmoid(x, low, high, k):
    _check(low < high, "reverse_sigmoid needs low < high")
    _check(k > 0, "reverse_sigmoid needs k > 0")
    z = k * (np.asarray(x) - (low + high) / 2.0) * 10.0 / (high - low)
    out = np.clip(_logistic10(-z), 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class OracleSpec:
    motifs: tuple[tuple[int, ...], ...]
    forbidden_bigrams: tuple[tuple[int, int], ...] = ()
    weights: tuple[float, ...] = (1.0, 1.0, 1.0, 1.0, 5.0)
    mw_high: float = 550.0
    mw_low: float = 200.0
    mw_c_div: float = 500.0
    mw_c_si: float = 20.0
    mw_c_se: float = 20.0
    hbd_high: float = 6.0
    hbd_low: float = 2.0
    hbd_k: float = 0.5
    qed_target: float = 2.0
    qed_width: float = 1.0
    activity_low: float = 0.3
    activity_high: float = 0.8
    seed: int | None = None
    alphabet: TokenAlphabet = field(default=DEFAULT_ALPHABET, compare=False, repr=False)

    def __post_init__(self):
        _check(len(self.weights) == len(COMPONENTS), "need one weight per component")
        _check(all(w > 0 for w in self.weights), "weights must be positive")
        _check(len(self.motifs) > 0, "at least one motif is required")
        _check(self.activity_low < self.activity_high, "activity bounds need a0 < a1")

    def motif_molecules(self) -> list[Molecule]:
        return [Molecule(m, self.alphabet) for m in self.motifs]

    @classmethod
    def default(cls, seed: int = DEFAULT_SPEC_SEED, alphabet: TokenAlphabet = DEFAULT_ALPHABET) -> OracleSpec:
        return generate_spec(seed, alphabet)

    def save(self, path) -> None:
        Path(path).write_text(dumps_spec(self))

    @classmethod
    def load(cls, path, alphabet: TokenAlphabet = DEFAULT_ALPHABET) -> OracleSpec:
        return loads_spec(Path(path).read_text(), alphabet)


_SCALAR_KEYS = (
    "mw_high", "mw_low", "mw_c_div", "mw_c_si", "mw_c_se",
    "hbd_high", "hbd_low", "hbd_k", "qed_target", "qed_width",
    "activity_low", "activity_high",
)


def dumps_spec(spec: OracleSpec) -> str:
    lines = ["# dppmb oracle spec v1"]
    if spec.seed is not None:
        lines.append(f"seed = {spec.seed}")
    lines.append("weights = " + " ".join(repr(float(w)) for w in spec.weights))
    for key in _SCALAR_KEYS:
        lines.append(f"{key} = {float(getattr(spec, key))!r}")
    for a, b in spec.forbidden_bigrams:
        lines.append(f"forbidden_bigram = {a} {b}")
    for motif in spec.motifs:
        lines.append("motif = " + " ".join(map(str, motif)))
    return "\n".join(lines) + "\n"


def loads_spec(text: str, alphabet: TokenAlphabet = DEFAULT_ALPHABET) -> OracleSpec:
    kwargs: dict = {}
    motifs, bigrams = [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = (part.strip() for part in line.partition("="))
        if not sep:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        try:
            if key == "motif":
                motifs.append(tuple(int(t) for t in value.split()))
            elif key == "forbidden_bigram":
                a, b = (int(t) for t in value.split())
                bigrams.append((a, b))
            elif key == "weights":
                kwargs["weights"] = tuple(float(t) for t in value.split())
            elif key == "seed":
                kwargs["seed"] = int(value)
            elif key in _SCALAR_KEYS:
                kwargs[key] = float(value)
            else:
                raise ValueError(f"unknown key {key!r}")
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    return OracleSpec(motifs=tuple(motifs), forbidden_bigrams=tuple(bigrams), alphabet=alphabet, **kwargs)


@dataclass(frozen=True)
class ScoreBreakdown:
    mw: float
    hbd: float
    qed: float
    alerts: float
    activity: float
    reward: float

    def components(self) -> tuple[float, ...]:
        return (self.mw, self.hbd, self.qed, self.alerts, self.activity)


def token_entropy(tokens) -> float:
    if len(tokens) == 0:
        return 0.0
    _, counts = np.unique(np.asarray(tokens), return_counts=True)
    p = counts / counts.sum()
    return float(-np.sum(p * np.log(p)))


def has_bigram(tokens, bigrams) -> bool:
    if not bigrams:
        return False
    wanted = set(bigrams)
    return any(pair in wanted for pair in zip(tokens, tokens[1:]))


def property_proxies(m: Molecule, alphabet: TokenAlphabet | None = None,
                     spec: OracleSpec | None = None) -> tuple[float, int, float, int]:
    """Raw (mw, hbd, qed, alerts) for a molecule."""
    alphabet = alphabet or m.alphabet
    target = spec.qed_target if spec else 2.0
    width = spec.qed_width if spec else 1.0
    mw = float(sum(alphabet.weight[t] for t in m.tokens))
    hbd = sum(1 for t in m.tokens if alphabet.donor[t])
    qed = math.exp(-((token_entropy(m.tokens) - target) ** 2) / width**2)
    alerts = 0 if has_bigram(m.tokens, spec.forbidden_bigrams if spec else ()) else 1
    return mw, hbd, qed, alerts


def rescale_activity(a_raw: float, low: float = 0.3, high: float = 0.8) -> float:
    return float(np.clip((a_raw - low) / (high - low), 0.0, 1.0))


def activity(m: Molecule, spec: OracleSpec) -> float:
    a_raw = max(tanimoto(m.bit_fp, motif.bit_fp) for motif in spec.motif_molecules())
    return rescale_activity(a_raw, spec.activity_low, spec.activity_high)


def geometric_mean(scores, weights) -> float:
    s = np.asarray(scores, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if np.any(s <= 0.0):
        return 0.0
    return float(np.exp(np.sum(w * np.log(s)) / w.sum()))


def extrinsic_reward(m: Molecule, spec: OracleSpec) -> ScoreBreakdown:
    return Oracle(spec).score(m)


class Oracle:
    """Callable scorer that counts its evaluations (the budget metric)."""

    def __init__(self, spec: OracleSpec):
        self.spec = spec
        self.calls = 0
        self._motif_fps = np.stack([m.bit_fp for m in spec.motif_molecules()])

    def _activity(self, m: Molecule) -> float:
        both = np.vstack([m.bit_fp[None, :], self._motif_fps])
        a_raw = float(tanimoto_gram(both)[0, 1:].max())
        return rescale_activity(a_raw, self.spec.activity_low, self.spec.activity_high)

    def score(self, m: Molecule) -> ScoreBreakdown:
        s = self.spec
        mw, hbd, qed, alerts = property_proxies(m, m.alphabet, s)
        comps = (
            double_sigmoid(mw, s.mw_low, s.mw_high, s.mw_c_div, s.mw_c_si, s.mw_c_se),
            reverse_sigmoid(hbd, s.hbd_low, s.hbd_high, s.hbd_k),
            qed,
            float(alerts),
            self._activity(m),
        )
        return ScoreBreakdown(*comps, reward=geometric_mean(comps, s.weights))

    def __call__(self, m: Molecule) -> ScoreBreakdown:
        self.calls += 1
        return self.score(m)


def generate_spec(seed: int = DEFAULT_SPEC_SEED, alphabet: TokenAlphabet = DEFAULT_ALPHABET,
                  n_motifs: int = 5, motif_length: int = 30, max_similarity: float = 0.3,
                  n_bigrams: int = 4, vocab_per_motif: int = 5, min_qed: float = 0.75,
                  max_attempts: int = 10_000) -> OracleSpec:
    """Deterministically draw forbidden bigrams and mutually dissimilar motifs.

    Motifs use disjoint small vocabularies of non-donor tokens, so each
    hidden active sits in its own region of sequence space and its token
    entropy lands near the drug-likeness optimum. Candidates are rejected
    until every motif scores well on all non-activity components and pairwise
    Tanimoto similarity stays at or below ``max_similarity``.
    """
    rng = np.random.default_rng(seed)
    ids = alphabet.emittable
    side = np.array([t for t in ids if not alphabet.backbone[t]])
    pool = np.array([t for t in ids if not alphabet.donor[t]])
    if n_motifs * vocab_per_motif > pool.size:
        raise ValueError(f"{n_motifs} disjoint vocabularies of {vocab_per_motif} exceed {pool.size} tokens")

    pairs = set()
    while len(pairs) < n_bigrams:
        a, b = rng.choice(side, size=2)
        pairs.add((int(a), int(b)))
    bigrams = tuple(sorted(pairs))

    probe = OracleSpec(motifs=((int(pool[0]),),), forbidden_bigrams=bigrams, alphabet=alphabet)

    def admissible(cand: Molecule, chosen) -> bool:
        mw, hbd, qed, alerts = property_proxies(cand, alphabet, probe)
        if not alerts or qed <= min_qed or hbd > 2:
            return False
        if double_sigmoid(mw, probe.mw_low, probe.mw_high, probe.mw_c_div, probe.mw_c_si, probe.mw_c_se) < 0.9:
            return False
        return all(tanimoto(cand.bit_fp, Molecule(m, alphabet).bit_fp) <= max_similarity for m in chosen)

    for _ in range(max_attempts):
        perm = rng.permutation(pool)
        motifs: list[tuple[int, ...]] = []
        for i in range(n_motifs):
            vocab = perm[i * vocab_per_motif:(i + 1) * vocab_per_motif]
            for _ in range(200):
                cand = Molecule(tuple(int(t) for t in rng.choice(vocab, size=motif_length)), alphabet)
                if admissible(cand, motifs):
                    motifs.append(cand.tokens)
                    break
            else:
                break
        if len(motifs) == n_motifs:
            return replace(probe, motifs=tuple(motifs), seed=int(seed))
    raise RuntimeError(f"no admissible motif set found in {max_attempts} draws")
