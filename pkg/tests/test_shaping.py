import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dppmb.fingerprints import Molecule
from dppmb.shaping import (
    MemoryStore,
    RndState,
    ims_factor,
    memory_admit,
    read_memory_csv,
    reshape,
    rnd_novelty,
    rnd_update,
)
from helpers import random_molecule

M1 = Molecule((2, 3, 25, 4))
M1_SIBLING = Molecule((2, 26, 3, 4))  # same scaffold (2, 3, 4)
OTHER = Molecule((10, 11, 12))


def test_admission_threshold():
    mem = MemoryStore(h=0.5)
    assert not mem.admit(M1, 0.49, 1)
    assert mem.admit(M1, 0.5, 1)
    for _ in range(2):
        memory_admit(mem, M1_SIBLING, 0.9, 2)
    assert mem.bucket_count(M1) == 3
    assert len(mem) == 3
    with pytest.raises(ValueError):
        mem.admit(M1, 1.5, 3)


def test_ims_factor_boundary():
    mem = MemoryStore()
    for _ in range(24):
        mem.admit(M1, 0.8, 1)
    assert ims_factor(mem, M1, 25) == 1
    mem.admit(M1_SIBLING, 0.8, 1)
    assert ims_factor(mem, M1, 25) == 0
    assert ims_factor(mem, OTHER, 25) == 1


def test_reshape_modes():
    mem = MemoryStore()
    rnd = RndState(np.random.default_rng(0))
    assert reshape("none", 0.7, M1) == 0.7
    for _ in range(25):
        mem.admit(M1, 0.9, 1)
    assert reshape("ims", 0.7, M1, mem) == 0.0
    assert reshape("ims", 0.7, OTHER, mem) == 0.7
    with pytest.raises(ValueError):
        reshape("bonus", 0.7, M1)


def test_tanhrnd_substitution(monkeypatch):
    rnd = RndState(np.random.default_rng(0))
    monkeypatch.setattr(rnd, "novelty", lambda m: 1.0)
    assert reshape("tanhrnd", 0.8, M1, rnd=rnd) == pytest.approx(0.8)
    monkeypatch.setattr(rnd, "novelty", lambda m: 0.0)
    assert reshape("tanhrnd", 0.8, M1, rnd=rnd) == pytest.approx(0.4)


@given(st.floats(0, 1), st.integers(0, 2**32 - 1))
def test_reshape_bounds(r, seed):
    rng = np.random.default_rng(seed)
    m = random_molecule(rng)
    rnd = RndState(rng, out_dim=8)
    mem = MemoryStore()
    assert r / 2 - 1e-15 <= reshape("tanhrnd", r, m, mem, rnd) <= r + 1e-15
    assert 0.0 <= reshape("ims", r, m, mem) <= r


def test_ims_fuller_bucket_never_higher():
    mem = MemoryStore()
    for _ in range(30):
        mem.admit(M1, 0.9, 1)
    mem.admit(OTHER, 0.9, 1)
    assert reshape("ims", 0.6, M1, mem) <= reshape("ims", 0.6, OTHER, mem)


def test_fresh_novelty_is_tanh_one():
    rnd = RndState(np.random.default_rng(1))
    assert rnd_novelty(rnd, M1) == pytest.approx(math.tanh(1.0))


def test_update_reduces_error_and_keeps_target():
    rnd = RndState(np.random.default_rng(2))
    target = rnd.target.copy()
    before = rnd.error(M1)
    errs = [before]
    while errs[-1] >= 1e-3:
        rnd_update(rnd, [M1])
        errs.append(rnd.error(M1))
        assert len(errs) < 500
    assert all(b < a for a, b in zip(errs, errs[1:]))
    np.testing.assert_array_equal(rnd.target, target)
    assert not rnd.target.flags.writeable


def test_novelty_drops_after_training():
    rnd = RndState(np.random.default_rng(3))
    rnd_update(rnd, [OTHER, M1_SIBLING])
    before = rnd.novelty(M1)
    for _ in range(100):
        rnd.update([M1])
    assert rnd.novelty(M1) < before


def test_empty_update_is_noop():
    rnd = RndState(np.random.default_rng(4))
    pred = rnd.predictor.copy()
    rnd_update(rnd, [])
    np.testing.assert_array_equal(rnd.predictor, pred)
    assert rnd.mean is None


def test_memory_csv_round_trip(tmp_path):
    mem = MemoryStore()
    mem.admit(M1, 0.75, 3, qed=0.6, activity=0.7)
    mem.admit(OTHER, 0.5, 9, qed=0.2, activity=0.9)
    p = tmp_path / "mem.csv"
    mem.to_csv(p)
    assert p.read_text().splitlines()[0] == "step,reward,scaffold_key,tokens,qed,activity"
    back = read_memory_csv(p)
    assert [(e.step, e.molecule, e.reward, e.qed, e.activity) for e in back] == \
        [(e.step, e.molecule, e.reward, e.qed, e.activity) for e in mem.entries]


def test_memory_csv_missing_columns(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("step,reward\n1,0.5\n")
    with pytest.raises(ValueError):
        read_memory_csv(p)
