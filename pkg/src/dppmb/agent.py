"""Autoregressive token policy, rollouts, and the augmented-likelihood update.

The policy is a softmax table indexed by the previous ``context`` tokens
(left-padded with the start token). The start token itself is never emitted:
its column is masked out of every softmax.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .fingerprints import DEFAULT_ALPHABET, Molecule, TokenAlphabet
from .streams import as_generator

POLICY_MAGIC = b"DPPMBPOL"
POLICY_VERSION = 1


@dataclass(frozen=True)
class PolicyParams:
    logits: np.ndarray  # (size**context, size)
    context: int = 2
    alphabet: TokenAlphabet = field(default=DEFAULT_ALPHABET, repr=False)

    def __post_init__(self):
        logits = np.asarray(self.logits, dtype=np.float64)
        size = self.alphabet.size
        if self.context < 1:
            raise ValueError("context length must be at least 1")
        if logits.shape != (size**self.context, size):
            raise ValueError(f"logits shape {logits.shape} does not match alphabet/context")
        if not np.all(np.isfinite(logits)):
            raise ValueError("policy logits must be finite")
        object.__setattr__(self, "logits", logits)

    @classmethod
    def uniform(cls, context: int = 2, alphabet: TokenAlphabet = DEFAULT_ALPHABET) -> PolicyParams:
        return cls(np.zeros((alphabet.size**context, alphabet.size)), context, alphabet)

    def with_logits(self, logits) -> PolicyParams:
        return replace(self, logits=logits)

    def log_probs(self) -> np.ndarray:
        """Row-wise log-softmax with the start column at -inf."""
        z = self.logits.copy()
        z[:, self.alphabet.start_id] = -np.inf
        z -= z.max(axis=1, keepdims=True)
        return z - np.log(np.exp(z).sum(axis=1, keepdims=True))

    def probs(self) -> np.ndarray:
        return np.exp(self.log_probs())

    def save(self, path) -> None:
        header = POLICY_MAGIC + struct.pack("<III", POLICY_VERSION, self.alphabet.size, self.context)
        Path(path).write_bytes(header + self.logits.astype("<f8").tobytes())

    @classmethod
    def load(cls, path, alphabet: TokenAlphabet = DEFAULT_ALPHABET) -> PolicyParams:
        raw = Path(path).read_bytes()
        head = len(POLICY_MAGIC) + 12
        if len(raw) < head or raw[: len(POLICY_MAGIC)] != POLICY_MAGIC:
            raise ValueError(f"{path}: not a policy file")
        version, size, context = struct.unpack("<III", raw[len(POLICY_MAGIC):head])
        if version != POLICY_VERSION:
            raise ValueError(f"{path}: unsupported policy file version {version}")
        if size != alphabet.size:
            raise ValueError(f"{path}: alphabet size {size} != {alphabet.size}")
        body = np.frombuffer(raw[head:], dtype="<f8")
        if body.size != size ** (context + 1):
            raise ValueError(f"{path}: truncated parameter block")
        return cls(body.reshape(size**context, size).astype(np.float64), context, alphabet)


@dataclass(frozen=True)
class Trajectory:
    tokens: tuple[int, ...]  # start, actions..., [stop]
    logps: np.ndarray
    alphabet: TokenAlphabet = field(default=DEFAULT_ALPHABET, repr=False, compare=False)

    @property
    def actions(self) -> tuple[int, ...]:
        return self.tokens[1:]

    @property
    def stopped(self) -> bool:
        return len(self.tokens) > 1 and self.tokens[-1] == self.alphabet.stop_id

    @property
    def molecule(self) -> Molecule:
        body = self.tokens[1:-1] if self.stopped else self.tokens[1:]
        return Molecule(body, self.alphabet)


def context_indices(actions, context: int, alphabet: TokenAlphabet) -> np.ndarray:
    """Context row used to emit each action."""
    padded = [alphabet.start_id] * context + list(actions)
    idx = np.zeros(len(actions), dtype=np.int64)
    for offset in range(context):
        idx = idx * alphabet.size + np.asarray(padded[offset:offset + len(actions)], dtype=np.int64)
    return idx


def rollout_batch(policy: PolicyParams, uniforms: np.ndarray) -> list[Trajectory]:
    """Roll out one trajectory per row of ``uniforms`` (shape (n, T)).

    Row ``b`` uses only ``uniforms[b]`` (inverse-CDF sampling), so outputs do
    not depend on how rows are batched or threaded.
    """
    u = np.asarray(uniforms, dtype=np.float64)
    n, horizon = u.shape
    a = policy.alphabet
    size, c = a.size, policy.context
    logp = policy.log_probs()
    cdf = np.cumsum(np.exp(logp), axis=1)
    cdf /= cdf[:, -1:]
    ctx = np.zeros(n, dtype=np.int64)
    for _ in range(c):
        ctx = ctx * size + a.start_id
    actions = np.full((n, horizon), -1, dtype=np.int64)
    step_logp = np.zeros((n, horizon))
    alive = np.ones(n, dtype=bool)
    modulus = size ** (c - 1)
    for t in range(horizon):
        rows = np.flatnonzero(alive)
        if rows.size == 0:
            break
        tok = (cdf[ctx[rows]] <= u[rows, t, None]).sum(axis=1)
        tok = np.minimum(tok, size - 1)
        actions[rows, t] = tok
        step_logp[rows, t] = logp[ctx[rows], tok]
        ctx[rows] = (ctx[rows] % modulus) * size + tok
        alive[rows[tok == a.stop_id]] = False
    out = []
    for b in range(n):
        acts = actions[b][actions[b] >= 0]
        out.append(Trajectory((a.start_id, *map(int, acts)), step_logp[b, : acts.size].copy(), a))
    return out


def rollout(policy: PolicyParams, rng, horizon: int) -> Trajectory:
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    rng = as_generator(rng)
    return rollout_batch(policy, rng.random((1, horizon)))[0]


def log_prob(policy: PolicyParams, traj: Trajectory, logp: np.ndarray | None = None) -> float:
    """Sum of log-probabilities of every generated action, stop included."""
    logp = policy.log_probs() if logp is None else logp
    acts = np.asarray(traj.actions, dtype=np.int64)
    ctx = context_indices(traj.actions, policy.context, policy.alphabet)
    return float(logp[ctx, acts].sum())


def augmented_log_likelihood(prior: PolicyParams, sigma: float, reward: float, traj: Trajectory) -> float:
    return log_prob(prior, traj) + sigma * reward


def reinvent_loss_and_grad(policy: PolicyParams, prior: PolicyParams, batch, sigma: float):
    """Mean squared gap between augmented prior likelihood and policy likelihood.

    ``batch`` holds ``(trajectory, reward)`` pairs; the reward is the one the
    agent observes (reshaped when shaping is active). Returns ``(loss, grad)``
    with ``grad`` shaped like ``policy.logits``.
    """
    if not batch:
        raise ValueError("batch must be non-empty")
    logp = policy.log_probs()
    prior_logp = prior.log_probs()
    probs = np.exp(logp)
    k = len(batch)
    grad = np.zeros_like(policy.logits)
    loss = 0.0
    for traj, reward in batch:
        acts = np.asarray(traj.actions, dtype=np.int64)
        ctx = context_indices(traj.actions, policy.context, policy.alphabet)
        agent_ll = logp[ctx, acts].sum()
        aug_ll = prior_logp[ctx, acts].sum() + sigma * reward
        diff = agent_ll - aug_ll
        loss += diff * diff / k
        w = 2.0 * diff / k
        np.add.at(grad, (ctx, acts), w)
        np.add.at(grad, ctx, -w * probs[ctx])
    return float(loss), grad


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: np.ndarray, **hyper) -> AdamState:
        return cls(np.zeros_like(params), np.zeros_like(params), **hyper)


def adam_step(state: AdamState, params: np.ndarray, grad: np.ndarray) -> tuple[np.ndarray, AdamState]:
    if params.shape != grad.shape or state.m.shape != params.shape:
        raise ValueError(f"shape mismatch: params {params.shape}, grad {grad.shape}, state {state.m.shape}")
    t = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_params = params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new_params, replace(state, m=m, v=v, step=t)


def train_prior(corpus, smoothing: float = 0.01, context: int = 2,
                alphabet: TokenAlphabet = DEFAULT_ALPHABET) -> PolicyParams:
    """Count-based prior: logits are log(count + smoothing) per context row."""
    if not corpus:
        raise ValueError("corpus must be non-empty")
    if smoothing <= 0:
        raise ValueError("smoothing must be positive")
    size = alphabet.size
    counts = np.zeros((size**context, size))
    for mol in corpus:
        tokens = mol.tokens if isinstance(mol, Molecule) else tuple(mol)
        acts = (*tokens, alphabet.stop_id)
        np.add.at(counts, (context_indices(acts, context, alphabet), np.asarray(acts)), 1.0)
    return PolicyParams(np.log(counts + smoothing), context, alphabet)


def prior_corpus(spec, n: int = 2000, mutation_rate: float = 0.3, seed: int | None = None,
                 length_range: tuple[int, int] = (20, 60)) -> list[Molecule]:
    """Half mutated motifs, half uniformly random sequences.

    Mutations resample a position from the motif's own token set, so the
    mutated half reads as close analogs of the hidden actives.
    """
    alphabet = spec.alphabet
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    ids = alphabet.emittable
    corpus = []
    n_mutated = n // 2
    for i in range(n_mutated):
        motif = np.array(spec.motifs[i % len(spec.motifs)])
        flip = rng.random(motif.size) < mutation_rate
        motif[flip] = rng.choice(np.unique(motif), size=int(flip.sum()))
        corpus.append(Molecule(tuple(int(t) for t in motif), alphabet))
    for _ in range(n - n_mutated):
        length = int(rng.integers(length_range[0], length_range[1] + 1))
        corpus.append(Molecule(tuple(int(t) for t in rng.choice(ids, size=length)), alphabet))
    return corpus
