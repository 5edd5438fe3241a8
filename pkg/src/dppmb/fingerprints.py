"""Token-sequence molecules, scaffolds, fingerprints and similarity coefficients.

A molecule is a sequence of token ids. Its scaffold is the subsequence of
backbone tokens. Molecules get a 2048-bit hashed n-gram fingerprint (n <= 3)
and scaffolds get a 1024-bucket count fingerprint of token pairs at
separation <= 8. All hashing is 64-bit FNV-1a over 2-byte little-endian ids,
so fingerprints are bit-exact across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from pathlib import Path

import numpy as np

FP_BITS = 2048
AP_BUCKETS = 1024
AP_MAX_SEPARATION = 8
NGRAM_SIZES = (1, 2, 3)

FNV_OFFSET = 14695981039346656037
FNV_PRIME = 1099511628211
_MASK64 = (1 << 64) - 1


def fnv1a_64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & _MASK64
    return h


def encode_ids(*ids: int) -> bytes:
    return b"".join(int(i).to_bytes(2, "little") for i in ids)


def _fnv1a_columns(cols: np.ndarray) -> np.ndarray:
    """Vectorised FNV-1a: each row of ``cols`` (uint16 ids) is one message."""
    h = np.full(cols.shape[0], FNV_OFFSET, dtype=np.uint64)
    prime = np.uint64(FNV_PRIME)
    with np.errstate(over="ignore"):
        for c in range(cols.shape[1]):
            v = cols[:, c].astype(np.uint64)
            for byte in (v & np.uint64(0xFF), v >> np.uint64(8)):
                h ^= byte
                h *= prime
    return h


@lru_cache(maxsize=8)
def _ngram_tables(size: int) -> tuple[np.ndarray, ...]:
    tables = []
    for n in NGRAM_SIZES:
        grid = np.indices((size,) * n).reshape(n, -1).T
        tables.append((_fnv1a_columns(grid) % np.uint64(FP_BITS)).astype(np.int64))
    return tuple(tables)


@lru_cache(maxsize=8)
def _atompair_table(size: int) -> np.ndarray:
    a, b, d = np.indices((size, size, AP_MAX_SEPARATION)).reshape(3, -1)
    grid = np.stack([a, b, d + 1], axis=1)
    table = _fnv1a_columns(grid) % np.uint64(AP_BUCKETS)
    return table.astype(np.int64).reshape(size, size, AP_MAX_SEPARATION)


@dataclass(frozen=True)
class TokenAlphabet:
    size: int
    start_id: int
    stop_id: int
    backbone: tuple[bool, ...]
    donor: tuple[bool, ...]
    weight: tuple[float, ...]

    def __post_init__(self):
        if self.size < 3:
            raise ValueError("alphabet needs at least 3 tokens")
        if self.start_id == self.stop_id:
            raise ValueError("start and stop ids must differ")
        for name in ("backbone", "donor", "weight"):
            if len(getattr(self, name)) != self.size:
                raise ValueError(f"{name} must have one entry per token")
        emittable = [i for i in range(self.size) if i not in (self.start_id, self.stop_id)]
        flags = {self.backbone[i] for i in emittable}
        if flags != {True, False}:
            raise ValueError("need at least one backbone and one non-backbone token")
        if min(self.weight) <= 0:
            raise ValueError("token weights must be positive")

    @classmethod
    def default(cls) -> TokenAlphabet:
        size = 34
        return cls(
            size=size,
            start_id=0,
            stop_id=1,
            backbone=tuple(2 <= i <= 21 for i in range(size)),
            donor=tuple(30 <= i <= 33 for i in range(size)),
            weight=tuple(float(w) for w in np.linspace(8.0, 18.0, size)),
        )

    @property
    def emittable(self) -> np.ndarray:
        """Token ids that may appear inside a molecule."""
        ids = np.arange(self.size)
        return ids[(ids != self.start_id) & (ids != self.stop_id)]


DEFAULT_ALPHABET = TokenAlphabet.default()


@dataclass(frozen=True)
class Molecule:
    """A generated token sequence, start/stop excluded.

    Scaffold and fingerprints are derived lazily and cached; equality and
    hashing use the token sequence only.
    """

    tokens: tuple[int, ...]
    alphabet: TokenAlphabet = field(default=DEFAULT_ALPHABET, compare=False, repr=False)

    def __post_init__(self):
        toks = tuple(int(t) for t in self.tokens)
        object.__setattr__(self, "tokens", toks)
        a = self.alphabet
        for t in toks:
            if not 0 <= t < a.size:
                raise ValueError(f"token id {t} outside alphabet of size {a.size}")
            if t in (a.start_id, a.stop_id):
                raise ValueError("start/stop tokens cannot appear inside a molecule")

    def __len__(self):
        return len(self.tokens)

    @cached_property
    def scaffold(self) -> Molecule:
        return scaffold_of(self, self.alphabet)

    @cached_property
    def key(self) -> str:
        return " ".join(map(str, self.tokens))

    @cached_property
    def bit_fp(self) -> np.ndarray:
        fp = ngram_fingerprint(self)
        fp.flags.writeable = False
        return fp

    @cached_property
    def scaffold_counts(self) -> dict[int, int]:
        return atompair_fingerprint(self.scaffold)


def scaffold_of(m: Molecule, alphabet: TokenAlphabet | None = None) -> Molecule:
    alphabet = alphabet or m.alphabet
    kept = tuple(t for t in m.tokens if alphabet.backbone[t])
    return Molecule(kept, alphabet)


def ngram_fingerprint(m: Molecule) -> np.ndarray:
    """2048-bit boolean fingerprint of all contiguous 1-, 2- and 3-grams."""
    fp = np.zeros(FP_BITS, dtype=bool)
    toks = np.asarray(m.tokens, dtype=np.int64)
    size = m.alphabet.size
    for n, table in zip(NGRAM_SIZES, _ngram_tables(size)):
        if toks.size < n:
            break
        idx = np.zeros(toks.size - n + 1, dtype=np.int64)
        for offset in range(n):
            idx = idx * size + toks[offset:toks.size - n + 1 + offset]
        fp[table[idx]] = True
    return fp


def atompair_fingerprint(scaffold: Molecule) -> dict[int, int]:
    toks = np.asarray(scaffold.tokens, dtype=np.int64)
    table = _atompair_table(scaffold.alphabet.size)
    buckets = []
    for sep in range(1, min(AP_MAX_SEPARATION, toks.size - 1) + 1):
        buckets.append(table[toks[:-sep], toks[sep:], sep - 1])
    if not buckets:
        return {}
    keys, counts = np.unique(np.concatenate(buckets), return_counts=True)
    return {int(k): int(c) for k, c in zip(keys, counts)}


def counts_to_dense(counts: dict[int, int], width: int = AP_BUCKETS) -> np.ndarray:
    dense = np.zeros(width, dtype=np.int64)
    for k, c in counts.items():
        dense[k] = c
    return dense


def tanimoto(a, b) -> float:
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ValueError("fingerprints must have equal width")
    union = np.count_nonzero(a | b)
    if union == 0:
        return 1.0
    return np.count_nonzero(a & b) / union


def dice(a: dict[int, int], b: dict[int, int]) -> float:
    total = sum(a.values()) + sum(b.values())
    if total == 0:
        return 1.0
    overlap = sum(min(c, b[k]) for k, c in a.items() if k in b)
    return 2.0 * overlap / total


class FingerprintFileError(ValueError):
    pass


def load_fingerprint_file(path) -> list[tuple[str, np.ndarray]]:
    """Read ``<id> <bit> <bit> ...`` records; ``#`` starts a comment line."""
    records = []
    seen = set()
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = stripped.split(" ")
        ident = fields[0]
        try:
            bits = [int(f) for f in fields[1:] if f]
        except ValueError as exc:
            raise FingerprintFileError(f"line {lineno}: bad bit index ({exc})") from None
        for b in bits:
            if not 0 <= b < FP_BITS:
                raise FingerprintFileError(f"line {lineno}: bit index {b} outside [0, {FP_BITS})")
        if ident in seen:
            raise FingerprintFileError(f"line {lineno}: duplicate id {ident!r}")
        seen.add(ident)
        fp = np.zeros(FP_BITS, dtype=bool)
        fp[bits] = True
        records.append((ident, fp))
    return records
