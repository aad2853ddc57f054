"""Byte layout of ``.g4c`` containers.

All integers and floats are little-endian::

    b"G4DC"  u16 version  u16 flags  u32 header_len
    scene header (header_len bytes, see SceneHeader.pack)   u32 crc32(header)
    u16 n_sections, then n_sections x (u32 length, u32 crc32)
    section payloads, concatenated in SECTIONS order

The file size must equal exactly the sum of all of the above.  Section
contents are produced and parsed by :mod:`g4c.codec`.
"""
from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import CorruptionError, FormatError

MAGIC = b"G4DC"
VERSION = 1
KNOWN_FLAGS = 0  # no optional features defined yet

SECTIONS = ("gaussian_mask", "sh_mask", "sort_idx", "indexes", "F_masked", "mu_disp", "mu_0",
            "codebooks", "logits", "opacity_centers", "beta_var", "base_opacities")

#: attributes that may carry a scalar quantizer range, in header order
RANGED = ("static_opacity", "dynamic_opacity", "center_start", "center_end",
          "variance_start", "variance_end")
POLICY_BITS = {"static_opacity": 1, "dynamic_opacity": 2, "centers": 4, "variances": 8}

_PREFIX = struct.Struct("<4sHHI")
_ENTRY = struct.Struct("<II")


class Reader:
    """Sequential little-endian reader that reports the section on failure."""

    def __init__(self, data, section):
        self.data = bytes(data)
        self.pos = 0
        self.section = section

    def fail(self, message):
        raise CorruptionError(message, section=self.section, position=self.pos)

    def take(self, n):
        if n < 0 or self.pos + n > len(self.data):
            self.fail(f"needs {n} more byte(s), {len(self.data) - self.pos} left")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        s = struct.Struct("<" + fmt)
        vals = s.unpack(self.take(s.size))
        return vals[0] if len(vals) == 1 else vals

    def array(self, dtype, count):
        dt = np.dtype(dtype)
        return np.frombuffer(self.take(dt.itemsize * count), dtype=dt).copy()

    def varint(self):
        v = shift = 0
        while True:
            b = self.take(1)[0]
            v |= (b & 0x7F) << shift
            shift += 7
            if not b & 0x80:
                return v
            if shift > 63:
                self.fail("varint too long")

    def done(self):
        if self.pos != len(self.data):
            self.fail(f"{len(self.data) - self.pos} unparsed byte(s)")

    @property
    def remaining(self):
        return len(self.data) - self.pos


def varint(v) -> bytes:
    v = int(v)
    out = bytearray()
    while True:
        b = v & 0x7F
        v >>= 7
        if v:
            out.append(b | 0x80)
        else:
            out.append(b)
            return bytes(out)


@dataclass
class SceneHeader:
    n_static_orig: int
    n_dynamic_orig: int
    n_static: int
    n_dynamic: int
    duration: float
    keyframe_interval: int
    sh_degree: int
    timestamps: tuple
    wavelet_levels: int
    kept_levels: int
    traj_step: float
    policy: int  # POLICY_BITS mask
    qbits: int
    ranges: dict = field(default_factory=dict)  # RANGED name -> (lo, hi)
    level: int = 0

    def quantized(self, attr):
        return bool(self.policy & POLICY_BITS[attr])

    def pack(self) -> bytes:
        t = np.asarray(self.timestamps, dtype=np.float64)
        parts = [struct.pack("<IIIIdIB", self.n_static_orig, self.n_dynamic_orig, self.n_static,
                             self.n_dynamic, self.duration, self.keyframe_interval,
                             self.sh_degree)]
        uniform = (t.size >= 2 and np.array_equal(t, t[0] + np.arange(t.size) * (t[1] - t[0])))
        if uniform:
            parts.append(struct.pack("<BIdd", 1, t.size, t[0], t[1] - t[0]))
        else:
            parts.append(struct.pack("<BI", 0, t.size) + t.astype("<f8").tobytes())
        parts.append(struct.pack("<BBdBBB", self.wavelet_levels, self.kept_levels, self.traj_step,
                                 self.policy, self.qbits, self.level))
        mask = 0
        body = b""
        for i, name in enumerate(RANGED):
            if name in self.ranges:
                mask |= 1 << i
                body += struct.pack("<dd", *self.ranges[name])
        parts.append(struct.pack("<B", mask) + body)
        return b"".join(parts)

    @classmethod
    def unpack(cls, data):
        r = Reader(data, "header")
        ns0, nd0, ns, nd, duration, interval, k = r.unpack("IIIIdIB")
        mode, count = r.unpack("BI")
        if mode == 1:
            t0, dt = r.unpack("dd")
            times = tuple((t0 + np.arange(count) * dt).tolist())
        elif mode == 0:
            times = tuple(r.array("<f8", count).tolist())
        else:
            r.fail(f"unknown timestamp mode {mode}")
        levels, kept, step, policy, qbits, level = r.unpack("BBdBBB")
        mask = r.unpack("B")
        ranges = {}
        for i, name in enumerate(RANGED):
            if mask & (1 << i):
                ranges[name] = r.unpack("dd")
        r.done()
        return cls(ns0, nd0, ns, nd, duration, interval, k, times, levels, kept, step, policy,
                   qbits, ranges, level)


def assemble(header: SceneHeader, sections: dict, flags=0) -> bytes:
    hbytes = header.pack()
    table = [struct.pack("<H", len(SECTIONS))]
    for name in SECTIONS:
        payload = sections.get(name, b"")
        table.append(_ENTRY.pack(len(payload), zlib.crc32(payload)))
    return b"".join([_PREFIX.pack(MAGIC, VERSION, flags, len(hbytes)), hbytes,
                     struct.pack("<I", zlib.crc32(hbytes)), *table,
                     *(sections.get(name, b"") for name in SECTIONS)])


@dataclass
class Layout:
    header: SceneHeader
    header_bytes: int  # everything that is not a section payload
    lengths: dict
    offsets: dict
    flags: int


def read_layout(data: bytes, verify=True) -> Layout:
    """Parse and check the fixed structure; payloads are located, not decoded."""
    data = bytes(data)
    if len(data) < 4 or data[:4] != MAGIC:
        raise FormatError("not a .g4c container (unknown magic)")
    if len(data) < _PREFIX.size:
        raise CorruptionError("file ends inside the fixed prefix", section="prefix",
                              position=len(data))
    _, version, flags, hlen = _PREFIX.unpack_from(data)
    if version != VERSION:
        raise FormatError(f"unsupported container version {version} (expected {VERSION})")
    if flags & ~KNOWN_FLAGS:
        raise FormatError(f"unsupported container flags {flags:#06x}")
    pos = _PREFIX.size
    if pos + hlen + 4 > len(data):
        raise CorruptionError("file ends inside the scene header", section="header",
                              position=len(data))
    hbytes = data[pos:pos + hlen]
    (crc,) = struct.unpack_from("<I", data, pos + hlen)
    if verify and zlib.crc32(hbytes) != crc:
        raise CorruptionError("header checksum mismatch", section="header", position=pos)
    header = SceneHeader.unpack(hbytes)
    pos += hlen + 4
    if pos + 2 > len(data):
        raise CorruptionError("file ends before the section table", section="table",
                              position=len(data))
    (n_sec,) = struct.unpack_from("<H", data, pos)
    if n_sec != len(SECTIONS):
        raise CorruptionError(f"expected {len(SECTIONS)} sections, table lists {n_sec}",
                              section="table", position=pos)
    pos += 2
    if pos + n_sec * _ENTRY.size > len(data):
        raise CorruptionError("file ends inside the section table", section="table",
                              position=len(data))
    entries = [_ENTRY.unpack_from(data, pos + i * _ENTRY.size) for i in range(n_sec)]
    pos += n_sec * _ENTRY.size
    lengths, offsets = {}, {}
    for name, (length, crc) in zip(SECTIONS, entries):
        if pos + length > len(data):
            raise CorruptionError(f"section truncated: {len(data) - pos} of {length} byte(s) "
                                  "present", section=name, position=len(data))
        if verify and zlib.crc32(data[pos:pos + length]) != crc:
            raise CorruptionError("section checksum mismatch", section=name, position=pos)
        lengths[name] = length
        offsets[name] = pos
        pos += length
    if pos != len(data):
        raise CorruptionError(f"{len(data) - pos} byte(s) past the last section",
                              section="table", position=pos)
    return Layout(header, len(data) - sum(lengths.values()), lengths, offsets, flags)
