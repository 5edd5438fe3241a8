import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dppmb.fingerprints import (
    AP_BUCKETS,
    DEFAULT_ALPHABET,
    FP_BITS,
    FingerprintFileError,
    Molecule,
    TokenAlphabet,
    atompair_fingerprint,
    dice,
    encode_ids,
    fnv1a_64,
    load_fingerprint_file,
    ngram_fingerprint,
    scaffold_of,
    tanimoto,
)

A = DEFAULT_ALPHABET
token_lists = st.lists(st.integers(2, A.size - 1), max_size=40)
bitsets = st.sets(st.integers(0, 63), max_size=20)


def bits(indices, width=64):
    fp = np.zeros(width, dtype=bool)
    fp[list(indices)] = True
    return fp


def reference_ngram_bits(tokens):
    """Scalar re-derivation of the n-gram fingerprint from the hash definition."""
    out = set()
    for n in (1, 2, 3):
        for i in range(len(tokens) - n + 1):
            out.add(fnv1a_64(encode_ids(*tokens[i:i + n])) % FP_BITS)
    return out


def test_fnv_reference_vectors():
    # Published FNV-1a 64-bit test vectors.
    assert fnv1a_64(b"") == 0xCBF29CE484222325
    assert fnv1a_64(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a_64(b"foobar") == 0x85944171F73967E8


def test_encode_ids_little_endian():
    assert encode_ids(1, 258) == b"\x01\x00\x02\x01"


def test_default_alphabet_layout():
    assert A.size == 34 and A.start_id == 0 and A.stop_id == 1
    assert [i for i in range(34) if A.backbone[i]] == list(range(2, 22))
    assert [i for i in range(34) if A.donor[i]] == [30, 31, 32, 33]
    assert A.weight[0] == 8.0 and A.weight[-1] == 18.0
    assert 0 not in A.emittable and 1 not in A.emittable and len(A.emittable) == 32


def test_alphabet_validation():
    with pytest.raises(ValueError):
        TokenAlphabet(3, 0, 0, (False,) * 3, (False,) * 3, (1.0,) * 3)
    with pytest.raises(ValueError):
        TokenAlphabet(4, 0, 1, (False, False, True, True), (False,) * 4, (1.0,) * 4)


def test_molecule_rejects_bad_tokens():
    with pytest.raises(ValueError):
        Molecule((2, 0, 3))
    with pytest.raises(ValueError):
        Molecule((99,))


def test_scaffold_examples():
    assert scaffold_of(Molecule((2, 25, 3))).tokens == (2, 3)
    backbone = Molecule((2, 3, 4, 5))
    assert scaffold_of(backbone) == backbone
    assert scaffold_of(Molecule(())).tokens == ()


@given(token_lists)
def test_scaffold_idempotent_and_shrinking(tokens):
    m = Molecule(tuple(tokens))
    s = scaffold_of(m)
    assert scaffold_of(s) == s
    assert len(s) <= len(m)


def test_ngram_examples():
    m = Molecule((5, 7, 9))
    np.testing.assert_array_equal(ngram_fingerprint(m), ngram_fingerprint(Molecule((5, 7, 9))))
    assert not ngram_fingerprint(Molecule(())).any()
    single = ngram_fingerprint(Molecule((12,)))
    assert single.sum() == 1
    assert single[fnv1a_64(encode_ids(12)) % FP_BITS]


@given(token_lists)
def test_ngram_matches_scalar_hash(tokens):
    fp = Molecule(tuple(tokens)).bit_fp
    assert set(np.flatnonzero(fp)) == reference_ngram_bits(tokens)
    assert not fp.flags.writeable


def test_atompair_examples():
    assert atompair_fingerprint(Molecule((4,))) == {}
    pair = atompair_fingerprint(Molecule((4, 6)))
    assert pair == {fnv1a_64(encode_ids(4, 6, 1)) % AP_BUCKETS: 1}
    triple = atompair_fingerprint(Molecule((4, 4, 4)))
    assert sorted(triple.values()) == [1, 2]
    assert triple[fnv1a_64(encode_ids(4, 4, 1)) % AP_BUCKETS] == 2


@given(st.lists(st.integers(2, 21), max_size=30))
def test_atompair_total_pairs(tokens):
    counts = atompair_fingerprint(Molecule(tuple(tokens)))
    n = len(tokens)
    expected = sum(n - d for d in range(1, min(8, n - 1) + 1)) if n > 1 else 0
    assert sum(counts.values()) == expected


def test_tanimoto_examples():
    assert tanimoto(bits({1, 2}), bits({1, 2})) == 1.0
    assert tanimoto(bits({1}), bits({2})) == 0.0
    assert tanimoto(bits({1, 2, 3}), bits({2, 3, 4})) == pytest.approx(0.5)
    assert tanimoto(bits(()), bits(())) == 1.0
    with pytest.raises(ValueError):
        tanimoto(bits({1}), bits({1}, width=32))


def test_dice_examples():
    assert dice({1: 2, 4: 1}, {1: 2, 4: 1}) == 1.0
    assert dice({1: 1}, {2: 1}) == 0.0
    assert dice({10: 2, 11: 1}, {11: 1, 12: 1}) == pytest.approx(0.4)
    assert dice({}, {}) == 1.0


@given(bitsets, bitsets)
def test_tanimoto_properties(a, b):
    s = tanimoto(bits(a), bits(b))
    assert 0.0 <= s <= 1.0
    assert s == tanimoto(bits(b), bits(a))
    assert tanimoto(bits(a), bits(a)) == 1.0


@given(st.dictionaries(st.integers(0, 20), st.integers(1, 5)), st.dictionaries(st.integers(0, 20), st.integers(1, 5)))
def test_dice_properties(a, b):
    s = dice(a, b)
    assert 0.0 <= s <= 1.0
    assert s == pytest.approx(dice(b, a))
    assert dice(a, a) == 1.0


def test_cache_coherence():
    m = Molecule((3, 4, 25, 5))
    np.testing.assert_array_equal(m.bit_fp, ngram_fingerprint(m))
    assert m.scaffold_counts == atompair_fingerprint(scaffold_of(m))
    assert m.key == "3 4 25 5"


def test_load_fingerprint_file(tmp_path):
    p = tmp_path / "fps.txt"
    p.write_text("# header\nmol1 3 17 200\n\nmol2\n")
    recs = load_fingerprint_file(p)
    assert [r[0] for r in recs] == ["mol1", "mol2"]
    assert set(np.flatnonzero(recs[0][1])) == {3, 17, 200}
    assert not recs[1][1].any()
    empty = tmp_path / "empty.txt"
    empty.write_text("")
    assert load_fingerprint_file(empty) == []


@pytest.mark.parametrize("body", ["mol1 9999\n", "mol1 -1\n", "mol1 x\n", "a 1\na 2\n"])
def test_load_fingerprint_file_errors(tmp_path, body):
    p = tmp_path / "bad.txt"
    p.write_text(body)
    with pytest.raises(FingerprintFileError):
        load_fingerprint_file(p)
