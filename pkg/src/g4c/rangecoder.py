"""Static-model range coding of symbol and integer streams.

Probabilities are carried as integer counts summing to ``2**16``.  The coder
core lives in :mod:`g4c.kernels`; this module builds coding ops, sizes output
buffers and turns decoder status codes into exceptions.
"""
from __future__ import annotations

import numpy as np

from . import kernels
from .errors import DecodingError, EncodingError, ValidationError

PROB_BITS = 16
TOTAL = 1 << PROB_BITS


class FrequencyTable:
    """Integer symbol counts normalised to :data:`TOTAL`."""

    def __init__(self, counts):
        counts = np.asarray(counts, dtype=np.int64)
        if counts.ndim != 1 or counts.size == 0:
            raise ValidationError("frequency table needs at least one symbol")
        if counts.min() < 0 or counts.sum() != TOTAL:
            raise ValidationError(f"counts must be non-negative and sum to {TOTAL}")
        self.counts = counts
        self.cum = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        self.lookup = np.repeat(np.arange(counts.size, dtype=np.int64), counts)

    def __len__(self):
        return self.counts.size

    def __eq__(self, other):
        return isinstance(other, FrequencyTable) and np.array_equal(self.counts, other.counts)

    @property
    def probabilities(self):
        return self.counts / TOTAL

    def bits(self, symbols):
        """Ideal code length ``sum(-log2 p)`` of ``symbols`` under this table."""
        symbols = np.asarray(symbols, dtype=np.int64)
        if symbols.size == 0:
            return 0.0
        c = self.counts[symbols]
        if np.any(c == 0):
            raise EncodingError("symbol with zero probability")
        return float(np.sum(PROB_BITS - np.log2(c)))

    @classmethod
    def from_probabilities(cls, p):
        """Round probabilities to counts; every ``p > 0`` keeps a count of at least 1."""
        p = np.asarray(p, dtype=np.float64)
        if p.ndim != 1 or p.size == 0 or np.any(p < 0) or not np.isfinite(p).all():
            raise ValidationError("probabilities must be a non-empty 1-D array of p >= 0")
        if p.sum() <= 0:
            raise ValidationError("probabilities sum to zero")
        if np.count_nonzero(p) > TOTAL:
            raise ValidationError("too many symbols for the count precision")
        scaled = p / p.sum() * TOTAL
        counts = np.floor(scaled).astype(np.int64)
        counts[(p > 0) & (counts == 0)] = 1
        diff = TOTAL - int(counts.sum())
        if diff > 0:
            frac = scaled - np.floor(scaled)
            frac[p == 0] = -1.0
            order = np.lexsort((np.arange(p.size), -frac))
            live = order[: np.count_nonzero(p > 0)]
            counts[live[np.arange(diff) % live.size]] += 1
        while diff < 0:
            # only reachable when many tiny p were bumped to 1
            j = int(np.argmax(counts))
            take = min(-diff, int(counts[j]) - 1)
            counts[j] -= take
            diff += take
        return cls(counts)

    @classmethod
    def from_histogram(cls, hist):
        return cls.from_probabilities(np.asarray(hist, dtype=np.float64))

    # serialisation: u16 little-endian (count - 1); only valid when all counts >= 1
    def to_u16(self) -> bytes:
        if self.counts.min() < 1:
            raise EncodingError("u16 table form needs every count >= 1")
        return (self.counts - 1).astype("<u2").tobytes()

    @classmethod
    def from_u16(cls, data: bytes):
        return cls(np.frombuffer(data, dtype="<u2").astype(np.int64) + 1)

    # serialisation: LEB128 varints, allows zero counts
    def to_varints(self) -> bytes:
        return encode_varints(self.counts)

    @classmethod
    def from_varints(cls, data, n, offset=0):
        counts, offset = decode_varints(data, n, offset)
        return cls(counts), offset


def encode_varints(values) -> bytes:
    out = bytearray()
    for v in np.asarray(values, dtype=np.int64).tolist():
        if v < 0:
            raise EncodingError("varints are unsigned")
        while True:
            b = v & 0x7F
            v >>= 7
            if v:
                out.append(b | 0x80)
            else:
                out.append(b)
                break
    return bytes(out)


def decode_varints(data, n, offset=0):
    values = np.empty(n, dtype=np.int64)
    for i in range(n):
        v = 0
        shift = 0
        while True:
            if offset >= len(data):
                raise DecodingError("varint runs past end of data", position=offset)
            b = data[offset]
            offset += 1
            v |= (b & 0x7F) << shift
            shift += 7
            if not b & 0x80:
                break
            if shift > 63:
                raise DecodingError("varint too long", position=offset)
        values[i] = v
    return values, offset


def _as_table(table):
    if isinstance(table, FrequencyTable):
        return table
    return FrequencyTable.from_probabilities(table)


def _run_encoder(start, size, total):
    if start.size == 0:
        return b""
    out = np.zeros(3 * start.size + 16, dtype=np.uint8)
    n = kernels.rc_encode(start, size, total, out)
    return out[:n].tobytes()


def _raise_status(status, pos, consumed_expected=None):
    if status == kernels.ERR_TRUNCATED:
        raise DecodingError("range-coded stream truncated", position=pos)
    if status == kernels.ERR_INVALID:
        raise DecodingError("range-coded stream is not decodable", position=pos)


def range_encode(symbols, table) -> bytes:
    """Range-code ``symbols`` with a static table (counts or probabilities)."""
    table = _as_table(table)
    symbols = np.asarray(symbols, dtype=np.int64)
    if symbols.size == 0:
        return b""
    if symbols.min() < 0 or symbols.max() >= len(table):
        raise EncodingError("symbol outside table support")
    size = table.counts[symbols]
    if np.any(size == 0):
        raise EncodingError("symbol with zero probability",)
    start = table.cum[symbols]
    total = np.full(symbols.size, TOTAL, dtype=np.int64)
    return _run_encoder(start, size, total)


def range_decode(data, table, count) -> np.ndarray:
    """Decode exactly ``count`` symbols; every input byte must be consumed."""
    table = _as_table(table)
    if count == 0:
        if len(data):
            raise DecodingError("trailing bytes after empty stream", position=0)
        return np.zeros(0, dtype=np.int64)
    buf = np.frombuffer(bytes(data), dtype=np.uint8)
    out = np.empty(count, dtype=np.int64)
    status, pos = kernels.rc_decode_symbols(buf, table.cum, table.lookup, TOTAL, count, out)
    _raise_status(status, pos)
    if pos != buf.size:
        raise DecodingError(f"{buf.size - pos} trailing byte(s) after stream", position=pos)
    return out


# ---------------------------------------------------------------------------
# signed integers: zigzag, then (bit-length category, raw mantissa bits)

def zigzag(v):
    v = np.asarray(v, dtype=np.int64)
    return np.where(v >= 0, 2 * v, -2 * v - 1)


def int_categories(values):
    z = zigzag(values)
    cats = np.zeros(z.shape, dtype=np.int64)
    nz = z > 0
    cats[nz] = np.floor(np.log2(z[nz])).astype(np.int64) + 1
    # guard float rounding near powers of two
    too_big = nz & ((np.int64(1) << np.maximum(cats - 1, 0)) > z)
    cats[too_big] -= 1
    too_small = nz & ((np.int64(1) << np.minimum(cats, 62)) <= z)
    cats[too_small] += 1
    return cats


def int_table(values):
    """Category table fitted to ``values`` (alphabet ``0..max category``)."""
    cats = int_categories(values)
    hist = np.bincount(cats.ravel(), minlength=1) if cats.size else np.ones(1)
    return FrequencyTable.from_histogram(hist)


def int_bits(values, table):
    cats = int_categories(values)
    return table.bits(cats) + float(np.sum(np.maximum(cats - 1, 0)))


def encode_ints(values, table) -> bytes:
    values = np.asarray(values, dtype=np.int64).ravel()
    if values.size == 0:
        return b""
    z = zigzag(values)
    cats = int_categories(values)
    if cats.max() >= len(table) or np.any(table.counts[cats] == 0):
        raise EncodingError("integer category outside table support")
    start, size, total = [], [], []
    cum, counts = table.cum.tolist(), table.counts.tolist()
    for zi, c in zip(z.tolist(), cats.tolist()):
        start.append(cum[c])
        size.append(counts[c])
        total.append(TOTAL)
        left = c - 1
        while left > 0:
            b = min(left, 16)
            left -= b
            start.append((zi >> left) & ((1 << b) - 1))
            size.append(1)
            total.append(1 << b)
    return _run_encoder(np.array(start, dtype=np.int64), np.array(size, dtype=np.int64),
                        np.array(total, dtype=np.int64))


def decode_ints(data, table, count) -> np.ndarray:
    if count == 0:
        if len(data):
            raise DecodingError("trailing bytes after empty stream", position=0)
        return np.zeros(0, dtype=np.int64)
    buf = np.frombuffer(bytes(data), dtype=np.uint8)
    out = np.empty(count, dtype=np.int64)
    status, pos = kernels.rc_decode_ints(buf, table.cum, table.lookup, TOTAL, count, out)
    _raise_status(status, pos)
    if pos != buf.size:
        raise DecodingError(f"{buf.size - pos} trailing byte(s) after stream", position=pos)
    return out
