"""Adaptive binary arithmetic coding of bounded integer symbol streams.

This is the classic 32-bit integer arithmetic coder (Witten/Neal/Cleary
lineage): `low`/`high` straddle a shrinking interval, equal top bits are
shifted out as coded bits, and near-convergence states around the
midpoint are counted as underflow bits emitted with the next resolved
bit.  Probabilities come from an order-0 adaptive model shared by
encoder and decoder:

* every symbol starts with count 1 (no zero-probability symbols),
* a coded symbol's count grows by 32,
* when the total exceeds 2^24 all counts are halved, rounding up.

Cumulative frequencies live in a Fenwick tree, so model queries and
updates are O(log alphabet).  A payload is framed as

    [symbol count: u32 LE][coded bytes, MSB-first within each byte]

and the encoder flushes the entire 32-bit low register after the last
symbol before padding to a byte.  The full flush costs a few bytes over
the minimal two-bit variant but buys a sharp property: the decoder
consumes exactly the bits the encoder wrote (32 for priming plus one
per renormalization on both sides), so it never has to invent bits past
the payload end, and running out of bits is always truncation.

Encoding is also canonical -- one byte string per symbol sequence --
and the decoder exploits that for corruption detection: after decoding
`count` symbols it re-encodes them and requires the result to match the
received bytes exactly.  Every payload that is not the canonical
encoding of some stream therefore raises `CorruptPayloadError`: framing
violations, trailing garbage, truncation anywhere, and the vast
majority of bit flips.  The unavoidable residue is corruption that
happens to transform one canonical payload into another, which is
indistinguishable from a legitimate encoding of a different stream
without out-of-band redundancy; callers that frame payloads (the
container layer does) should cross-check expected symbol counts and
section lengths, which is how the codec narrows the window further.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from ._accel import jit

_MASK = (1 << 32) - 1
_TOP = 1 << 31
_SECOND = 1 << 30

COUNT_INIT = 1
COUNT_INCREMENT = 32
RESCALE_LIMIT = 1 << 24

MIN_ALPHABET = 2
MAX_ALPHABET = 1 << 16
MAX_SYMBOLS = (1 << 32) - 1


class CorruptPayloadError(ValueError):
    """An entropy-coded payload failed framing or canonicality checks."""


@dataclass
class SymbolStream:
    """Integer symbols in [0, alphabet_size) destined for one payload."""

    alphabet_size: int
    symbols: np.ndarray

    def __post_init__(self) -> None:
        if not MIN_ALPHABET <= self.alphabet_size <= MAX_ALPHABET:
            raise ValueError(
                f"alphabet_size must be in [{MIN_ALPHABET}, {MAX_ALPHABET}]"
            )
        self.symbols = np.ascontiguousarray(self.symbols, dtype=np.int64)
        if self.symbols.ndim != 1:
            raise ValueError("symbols must be 1-D")
        if self.symbols.shape[0] > MAX_SYMBOLS:
            raise ValueError("stream too long for u32 framing")
        if self.symbols.size and (
            self.symbols.min() < 0 or self.symbols.max() >= self.alphabet_size
        ):
            raise ValueError("symbols must lie in [0, alphabet_size)")

    def __len__(self) -> int:
        return self.symbols.shape[0]


@jit
def _fenwick_rebuild(counts, tree):
    a = counts.shape[0]
    for i in range(a + 1):
        tree[i] = 0
    for i in range(1, a + 1):
        tree[i] += counts[i - 1]
        j = i + (i & (-i))
        if j <= a:
            tree[j] += tree[i]


@jit
def _fenwick_add(tree, sym, delta):
    j = sym + 1
    while j < tree.shape[0]:
        tree[j] += delta
        j += j & (-j)


@jit
def _fenwick_prefix(tree, sym):
    """Sum of counts[0:sym]."""
    s = 0
    j = sym
    while j > 0:
        s += tree[j]
        j -= j & (-j)
    return s


@jit
def _fenwick_locate(tree, a, top_bit, target):
    """(symbol, prefix) with prefix = cum(symbol) <= target < cum(symbol+1)."""
    pos = 0
    rem = target
    bit = top_bit
    while bit > 0:
        nxt = pos + bit
        if nxt <= a and tree[nxt] <= rem:
            pos = nxt
            rem -= tree[nxt]
        bit >>= 1
    return pos, target - rem


@jit
def _aac_encode_core(symbols, alphabet, out):
    """Encode into `out` (zeroed uint8); returns bit count, or -1 on a bad symbol."""
    n = symbols.shape[0]
    counts = np.full(alphabet, COUNT_INIT, dtype=np.int64)
    tree = np.zeros(alphabet + 1, dtype=np.int64)
    _fenwick_rebuild(counts, tree)
    total = alphabet * COUNT_INIT

    low = 0
    high = _MASK
    underflow = 0
    pos = 0
    for i in range(n):
        sym = symbols[i]
        if sym < 0 or sym >= alphabet:
            return -1
        cumlow = _fenwick_prefix(tree, sym)
        cumhigh = cumlow + counts[sym]
        rng = high - low + 1
        high = low + cumhigh * rng // total - 1
        low = low + cumlow * rng // total
        while True:
            if ((low ^ high) & _TOP) == 0:
                bit = (low >> 31) & 1
                if bit == 1:
                    out[pos >> 3] |= 1 << (7 - (pos & 7))
                pos += 1
                while underflow > 0:
                    if bit == 0:
                        out[pos >> 3] |= 1 << (7 - (pos & 7))
                    pos += 1
                    underflow -= 1
                low = (low << 1) & _MASK
                high = ((high << 1) & _MASK) | 1
            elif (low & ~high & _SECOND) != 0:
                underflow += 1
                low = (low << 1) & (_MASK >> 1)
                high = ((high << 1) & (_MASK >> 1)) | _TOP | 1
            else:
                break
        counts[sym] += COUNT_INCREMENT
        _fenwick_add(tree, sym, COUNT_INCREMENT)
        total += COUNT_INCREMENT
        if total > RESCALE_LIMIT:
            total = 0
            for s in range(alphabet):
                c = (counts[s] + 1) >> 1
                counts[s] = c
                total += c
            _fenwick_rebuild(counts, tree)
    # Flush the whole low register (pending underflow bits trail the
    # first one, as in renormalization).  The stream value is then low
    # itself, and the decoder consumes exactly this many bits: priming
    # plus one per renormalization adds up to the same total, so a
    # canonical payload never makes the decoder read past its end.
    for k in range(31, -1, -1):
        bit = (low >> k) & 1
        if bit == 1:
            out[pos >> 3] |= 1 << (7 - (pos & 7))
        pos += 1
        while underflow > 0:
            if bit == 0:
                out[pos >> 3] |= 1 << (7 - (pos & 7))
            pos += 1
            underflow -= 1
    return pos


@jit
def _aac_decode_core(payload, alphabet, out):
    """Decode len(out) symbols from `payload` (uint8, MSB-first bits).

    Returns 0 on success, -1 if the payload runs out of bits.  The
    canonical encoder writes exactly the bits consumed here, so hitting
    the end mid-stream means truncation.
    """
    n = out.shape[0]
    counts = np.full(alphabet, COUNT_INIT, dtype=np.int64)
    tree = np.zeros(alphabet + 1, dtype=np.int64)
    _fenwick_rebuild(counts, tree)
    total = alphabet * COUNT_INIT

    top_bit = 1
    while (top_bit << 1) <= alphabet:
        top_bit <<= 1

    nbits = payload.shape[0] * 8
    low = 0
    high = _MASK
    code = 0
    bitpos = 0
    for _ in range(32):
        if bitpos >= nbits:
            return -1
        b = (payload[bitpos >> 3] >> (7 - (bitpos & 7))) & 1
        code = (code << 1) | b
        bitpos += 1

    for i in range(n):
        rng = high - low + 1
        value = ((code - low + 1) * total - 1) // rng
        sym, cumlow = _fenwick_locate(tree, alphabet, top_bit, value)
        cumhigh = cumlow + counts[sym]
        high = low + cumhigh * rng // total - 1
        low = low + cumlow * rng // total
        while True:
            if ((low ^ high) & _TOP) == 0:
                if bitpos >= nbits:
                    return -1
                b = (payload[bitpos >> 3] >> (7 - (bitpos & 7))) & 1
                bitpos += 1
                code = ((code << 1) & _MASK) | b
                low = (low << 1) & _MASK
                high = ((high << 1) & _MASK) | 1
            elif (low & ~high & _SECOND) != 0:
                if bitpos >= nbits:
                    return -1
                b = (payload[bitpos >> 3] >> (7 - (bitpos & 7))) & 1
                bitpos += 1
                code = (code & _TOP) | ((code << 1) & (_MASK >> 1)) | b
                low = (low << 1) & (_MASK >> 1)
                high = ((high << 1) & (_MASK >> 1)) | _TOP | 1
            else:
                break
        out[i] = sym
        counts[sym] += COUNT_INCREMENT
        _fenwick_add(tree, sym, COUNT_INCREMENT)
        total += COUNT_INCREMENT
        if total > RESCALE_LIMIT:
            total = 0
            for s in range(alphabet):
                c = (counts[s] + 1) >> 1
                counts[s] = c
                total += c
            _fenwick_rebuild(counts, tree)
    return 0


def _encode_bytes(symbols: np.ndarray, alphabet: int) -> bytes:
    if symbols.shape[0] == 0:
        return b""
    # 32 bits per symbol comfortably dominates the worst case of
    # ~log2(RESCALE_LIMIT) + renormalization slack per symbol.
    out = np.zeros(4 * symbols.shape[0] + 16, dtype=np.uint8)
    bits = _aac_encode_core(symbols, alphabet, out)
    if bits < 0:
        raise ValueError("symbols out of range for the declared alphabet")
    return out[: (bits + 7) // 8].tobytes()


def aac_encode(stream: SymbolStream) -> bytes:
    """Encode a stream into its canonical [count u32][coded bytes] payload."""
    return struct.pack("<I", len(stream)) + _encode_bytes(
        stream.symbols, stream.alphabet_size
    )


def aac_decode(payload: bytes, alphabet_size: int) -> SymbolStream:
    """Decode a payload; raises `CorruptPayloadError` on any inconsistency."""
    if not MIN_ALPHABET <= alphabet_size <= MAX_ALPHABET:
        raise ValueError(
            f"alphabet_size must be in [{MIN_ALPHABET}, {MAX_ALPHABET}]"
        )
    if len(payload) < 4:
        raise CorruptPayloadError("payload shorter than its count header")
    (count,) = struct.unpack_from("<I", payload, 0)
    data = np.frombuffer(payload, dtype=np.uint8, offset=4)
    if count == 0:
        if len(payload) != 4:
            raise CorruptPayloadError("empty stream carries trailing bytes")
        return SymbolStream(alphabet_size, np.empty(0, dtype=np.int64))
    try:
        symbols = np.empty(count, dtype=np.int64)
    except MemoryError as exc:
        raise CorruptPayloadError("symbol count exceeds available memory") from exc
    if _aac_decode_core(data, alphabet_size, symbols) != 0:
        raise CorruptPayloadError("payload ends before its symbol count is met")
    if _encode_bytes(symbols, alphabet_size) != payload[4:]:
        raise CorruptPayloadError(
            "payload fails canonical re-encoding (truncated or corrupt)"
        )
    return SymbolStream(alphabet_size, symbols)


def empirical_entropy_bits(symbols: np.ndarray, alphabet_size: int) -> float:
    """Order-0 empirical entropy of a stream, in total bits (n * H)."""
    sym = np.asarray(symbols, dtype=np.int64)
    n = sym.shape[0]
    if n == 0:
        return 0.0
    freq = np.bincount(sym, minlength=alphabet_size)
    p = freq[freq > 0] / n
    return float(n * -(p * np.log2(p)).sum())
