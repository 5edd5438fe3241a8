import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dppmb.agent import (
    AdamState,
    PolicyParams,
    Trajectory,
    adam_step,
    augmented_log_likelihood,
    context_indices,
    log_prob,
    prior_corpus,
    reinvent_loss_and_grad,
    rollout,
    rollout_batch,
    train_prior,
)
from dppmb.fingerprints import DEFAULT_ALPHABET, Molecule
from dppmb.oracle import OracleSpec

A = DEFAULT_ALPHABET


def random_policy(rng, context=2, scale=1.0):
    return PolicyParams(rng.normal(scale=scale, size=(A.size**context, A.size)), context)


def traj(actions):
    return Trajectory((A.start_id, *actions), np.zeros(len(actions)))


def test_probabilities_normalised(rng):
    p = random_policy(rng, scale=3.0)
    np.testing.assert_allclose(p.probs().sum(axis=1), 1.0, atol=1e-12)
    assert np.all(p.probs()[:, A.start_id] == 0.0)


def test_policy_validation():
    with pytest.raises(ValueError):
        PolicyParams(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        PolicyParams(np.full((A.size**2, A.size), np.nan))
    with pytest.raises(ValueError):
        PolicyParams(np.zeros((1, A.size)), context=0)


def test_forced_stop():
    logits = np.zeros((A.size**2, A.size))
    logits[:, A.stop_id] = 100.0
    t = rollout(PolicyParams(logits), np.random.default_rng(0), 10)
    assert t.tokens == (A.start_id, A.stop_id)
    assert t.stopped and t.molecule.tokens == ()


def test_uniform_horizon_bound():
    p = PolicyParams.uniform()
    rng = np.random.default_rng(1)
    for _ in range(200):
        t = rollout(p, rng, 5)
        assert len(t.tokens) <= 6 and t.tokens[0] == A.start_id
        assert all(tok != A.start_id for tok in t.tokens[1:])


def test_rollout_deterministic(rng):
    p = random_policy(rng)
    a = rollout(p, np.random.default_rng(5), 30)
    b = rollout(p, np.random.default_rng(5), 30)
    assert a.tokens == b.tokens
    np.testing.assert_array_equal(a.logps, b.logps)
    with pytest.raises(ValueError):
        rollout(p, np.random.default_rng(5), 0)


def test_rollout_rows_independent(rng):
    p = random_policy(rng)
    u = np.random.default_rng(2).random((12, 20))
    whole = rollout_batch(p, u)
    pieces = rollout_batch(p, u[:5]) + rollout_batch(p, u[5:])
    assert [t.tokens for t in whole] == [t.tokens for t in pieces]


def test_rollout_logps_match_log_prob(rng):
    p = random_policy(rng)
    for t in rollout_batch(p, np.random.default_rng(3).random((20, 25))):
        assert float(t.logps.sum()) == pytest.approx(log_prob(p, t), abs=1e-10)


def test_inverse_cdf_frequencies():
    logits = np.zeros((A.size, A.size))
    logits[A.start_id, 2:] = -50.0
    logits[A.start_id, 2] = math.log(3.0)
    logits[A.start_id, 3] = 0.0
    logits[A.start_id, A.stop_id] = -50.0
    p = PolicyParams(logits, context=1)
    first = [t.tokens[1] for t in rollout_batch(p, np.random.default_rng(4).random((20_000, 1)))]
    assert first.count(2) / 20_000 == pytest.approx(0.75, abs=0.01)


def test_log_prob_examples():
    logits = np.zeros((A.size**2, A.size))
    logits[:, 7] = 1000.0
    det_policy = PolicyParams(logits)
    t = rollout(det_policy, np.random.default_rng(0), 5)
    assert log_prob(det_policy, t) == 0.0
    # The start token is never emitted, so a uniform row spreads over 33 tokens.
    assert log_prob(PolicyParams.uniform(), traj((4, 5, 6))) == pytest.approx(3 * math.log(1 / 33))


@given(st.lists(st.integers(2, A.size - 1), min_size=1, max_size=15), st.integers(2, A.size - 1))
def test_log_prob_monotone(actions, extra):
    p = random_policy(np.random.default_rng(len(actions)))
    assert log_prob(p, traj((*actions, extra))) <= log_prob(p, traj(actions))


def test_context_indices():
    idx = context_indices((5, 6, 7), 2, A)
    assert list(idx) == [0 * 34 + 0, 0 * 34 + 5, 5 * 34 + 6]


def test_augmented_log_likelihood():
    prior = PolicyParams.uniform()
    t = traj((4, 5, 6))
    lp = log_prob(prior, t)
    assert augmented_log_likelihood(prior, 0.0, 0.7, t) == lp
    assert augmented_log_likelihood(prior, 128.0, 0.0, t) == lp
    assert augmented_log_likelihood(prior, 128.0, 1.0, t) == pytest.approx(lp + 128.0)


def test_loss_examples(rng):
    prior = random_policy(rng)
    t = rollout(prior, rng, 20)
    loss, grad = reinvent_loss_and_grad(prior, prior, [(t, 0.9)], 0.0)
    assert loss == 0.0 and not grad.any()
    loss, _ = reinvent_loss_and_grad(prior, prior, [(t, 1.0)], 128.0)
    assert loss == pytest.approx(16384.0)
    with pytest.raises(ValueError):
        reinvent_loss_and_grad(prior, prior, [], 1.0)


def finite_difference_check(seed, context=1):
    rng = np.random.default_rng(seed)
    policy = random_policy(rng, context)
    prior = random_policy(rng, context)
    batch = [(rollout(policy, rng, 8), float(rng.random())) for _ in range(4)]
    sigma = float(rng.uniform(0.5, 10.0))
    _, grad = reinvent_loss_and_grad(policy, prior, batch, sigma)
    touched = np.argwhere(grad != 0)
    picks = touched[rng.choice(len(touched), size=min(25, len(touched)), replace=False)]
    picks = np.vstack([picks, [[0, A.stop_id], [0, 5]]])
    h = 1e-5
    worst = 0.0
    for r, c in picks:
        plus = policy.logits.copy()
        minus = policy.logits.copy()
        plus[r, c] += h
        minus[r, c] -= h
        fd = (reinvent_loss_and_grad(policy.with_logits(plus), prior, batch, sigma)[0]
              - reinvent_loss_and_grad(policy.with_logits(minus), prior, batch, sigma)[0]) / (2 * h)
        worst = max(worst, abs(fd - grad[r, c]) / max(abs(fd), abs(grad[r, c]), 1e-6))
    return worst


@pytest.mark.parametrize("seed", range(5))
def test_gradient_finite_differences(seed):
    assert finite_difference_check(seed) <= 1e-4


def test_gradient_start_column_is_zero(rng):
    p = random_policy(rng)
    _, grad = reinvent_loss_and_grad(p, p, [(rollout(p, rng, 10), 0.5)], 4.0)
    assert not grad[:, A.start_id].any()


def test_loss_shift_invariance(rng):
    policy, prior = random_policy(rng), random_policy(rng)
    batch = [(rollout(policy, rng, 15), 0.3) for _ in range(3)]
    shifted = policy.logits.copy()
    shifted[17] += 3.7
    a = reinvent_loss_and_grad(policy, prior, batch, 8.0)[0]
    b = reinvent_loss_and_grad(policy.with_logits(shifted), prior, batch, 8.0)[0]
    assert a == pytest.approx(b, rel=1e-12)


def test_adam_zero_grad():
    params = np.arange(4.0)
    state = AdamState(m=np.ones(4), v=np.ones(4), step=3)
    new, s2 = adam_step(state, params, np.zeros(4))
    np.testing.assert_allclose(new, params - 1e-4 * (0.9 / (1 - 0.9**4)) / (np.sqrt(0.999 / (1 - 0.999**4)) + 1e-8))
    np.testing.assert_allclose(s2.m, 0.9)
    np.testing.assert_allclose(s2.v, 0.999)
    fresh, _ = adam_step(AdamState.zeros_like(params), params, np.zeros(4))
    np.testing.assert_array_equal(fresh, params)


def test_adam_constant_grad_step_size():
    params = np.zeros(3)
    state = AdamState.zeros_like(params, lr=1e-3)
    g = np.array([0.5, -2.0, 7.0])
    for _ in range(2000):
        new, state = adam_step(state, params, g)
        delta = new - params
        params = new
    np.testing.assert_allclose(np.abs(delta), 1e-3, rtol=1e-6)
    np.testing.assert_array_equal(np.sign(delta), -np.sign(g))


def test_adam_deterministic_and_checked():
    params = np.ones(2)
    state = AdamState.zeros_like(params)
    a = adam_step(state, params, np.array([1.0, -1.0]))
    b = adam_step(state, params, np.array([1.0, -1.0]))
    np.testing.assert_array_equal(a[0], b[0])
    with pytest.raises(ValueError):
        adam_step(state, params, np.ones(3))


def test_train_prior_single_sequence_dominates():
    seq = Molecule((4, 9, 4, 12, 30, 22))
    prior = train_prior([seq], 0.01)
    best = log_prob(prior, traj((*seq.tokens, A.stop_id)))
    rng = np.random.default_rng(0)
    for _ in range(200):
        other = tuple(int(t) for t in rng.choice(A.emittable, size=len(seq)))
        if other != seq.tokens:
            assert log_prob(prior, traj((*other, A.stop_id))) < best


def test_train_prior_limits_and_determinism():
    corpus = [Molecule((2, 3, 4)), Molecule((5, 6))]
    flat = train_prior(corpus, 1e9)
    np.testing.assert_allclose(flat.probs()[:, 2:], 1 / 33, atol=1e-8)
    np.testing.assert_array_equal(train_prior(corpus).logits, train_prior(corpus).logits)
    with pytest.raises(ValueError):
        train_prior([])
    with pytest.raises(ValueError):
        train_prior(corpus, 0.0)


def test_policy_file_round_trip(tmp_path, rng):
    p = random_policy(rng, context=1)
    f = tmp_path / "p.bin"
    p.save(f)
    raw = f.read_bytes()
    assert raw[:8] == b"DPPMBPOL"
    q = PolicyParams.load(f)
    assert q.context == 1
    np.testing.assert_array_equal(q.logits, p.logits)
    f.write_bytes(raw[:-8])
    with pytest.raises(ValueError):
        PolicyParams.load(f)
    f.write_bytes(b"garbage")
    with pytest.raises(ValueError):
        PolicyParams.load(f)


def test_prior_corpus_composition():
    spec = OracleSpec.default()
    corpus = prior_corpus(spec)
    assert len(corpus) == 2000
    mutated, rand = corpus[:1000], corpus[1000:]
    assert all(len(m) == 30 for m in mutated)
    assert all(20 <= len(m) <= 60 for m in rand)
    motif = spec.motifs[0]
    same = np.mean([a == b for m in mutated[::5] for a, b in zip(m.tokens, motif)])
    assert 0.65 < same < 0.85
    assert prior_corpus(spec) == corpus
