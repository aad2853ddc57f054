"""Scene encoder/decoder and per-section size accounting.

The encoder reduces a scene to a :class:`Payload` (masks, integer streams,
codebooks, raw float32 arrays), serializes it into the sections of a
``.g4c`` container, and builds its own view of the compressed model with
:func:`reconstruct`.  The decoder parses the sections back into a
``Payload`` and calls the same function, so both sides agree bit for bit.

Section contents
----------------
gaussian_mask    kept-flag per original Gaussian (statics then dynamics), packed bits
sh_mask          u8 pattern count, u8 SH-degree patterns (bit l-1 = degree l kept),
                 varint Gaussians per pattern
sort_idx         per kept Gaussian, its pattern number at fixed width
                 ceil(log2 n_patterns) bits; a stable sort on it is the order in
                 which SH streams list their Gaussians
indexes          12 x varint byte length, then the 12 range-coded ECVQ index streams
F_masked         quantized trajectory coefficients as three integer streams
                 (first approximation value, approximation differences, kept
                 details), each: varint table size, varint counts, varint byte
                 length, range-coded bytes
mu_disp          packed bits (static has a displacement), float32 rows for those set
mu_0             float32 pivots
codebooks        per group: varint codeword count, float16 codewords
logits           per group: u16 (count - 1) per codeword, counts sum to 2**16
opacity_centers  a_s, a_f: u8/u16 codes if quantized, else float32
beta_var         b_s, b_f: float32 (codes only in the variance ablation)
base_opacities   static then dynamic base opacity: codes or float32

The 12 ECVQ groups are ``(static, dynamic) x (scale, rotation, dc, sh1, sh2,
sh3)`` in that order; dynamic rotations carry one sample per keyframe.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rangecoder as rc
from .container import (POLICY_BITS, SECTIONS, Reader, SceneHeader, assemble, read_layout,
                        varint)
from .errors import CorruptionError, EncodingError, G4CError, ValidationError
from .model import (DynamicGaussians, GaussianScene, StaticGaussians, hermite_interpolate,
                    sh_count, temporal_opacity)
from .presets import LevelPreset
from .quant import (EcvqCodebook, PruneMask, PruneResult, ScalarQuantizer, ShMask,
                    canonical_quat, ecvq_assign, ecvq_train, rd_greedy_prune)
from .wavelet import from_coefficients, haar_forward, haar_inverse, mask_details, padded_length

COMPONENTS = ("static", "dynamic")
ATTRIBUTES = ("scale", "rotation", "dc", "sh1", "sh2", "sh3")
GROUPS = tuple((c, a) for c in COMPONENTS for a in ATTRIBUTES)
DIMS = {"scale": 3, "rotation": 4, "dc": 3, "sh1": 9, "sh2": 15, "sh3": 21}
TRAJ_STREAMS = ("first", "diff", "details")


# ---------------------------------------------------------------------------
# payload and the shared reconstruction

@dataclass
class Payload:
    header: SceneHeader
    keep: np.ndarray  # bool, original Gaussians
    patterns: np.ndarray  # uint8 SH-degree patterns in use
    pattern_index: np.ndarray  # per kept Gaussian, index into patterns
    indexes: dict  # group -> int64 indices
    codebooks: dict  # group -> float16 (M, D)
    counts: dict  # group -> int64 frequency counts (sum 2**16)
    traj: np.ndarray  # int64 (n_dynamic, n_coeff, 3)
    pivot: np.ndarray  # float32 (ns, 3)
    disp_rows: np.ndarray  # bool (ns,)
    disp: np.ndarray  # float32 (rows, 3)
    opacity: dict = field(default_factory=dict)  # name -> codes (int) or float32 values


def _f32(a):
    return np.asarray(a, dtype=np.float32).astype(np.float64)


def _unit(q):
    q = np.asarray(q, dtype=np.float64)
    n = np.linalg.norm(q, axis=-1, keepdims=True)
    ident = np.zeros_like(q)
    ident[..., 0] = 1.0
    return np.where(n > 1e-12, q / np.where(n > 1e-12, n, 1.0), ident)


def _sh_layout(payload: Payload):
    """Per kept Gaussian: degree-present flags and the stable sort order."""
    h = payload.header
    n = h.n_static + h.n_dynamic
    pattern = payload.patterns[payload.pattern_index] if n else np.zeros(0, np.uint8)
    has = np.stack([(pattern >> (l - 1)) & 1 for l in range(1, h.sh_degree + 1)], axis=1) \
        if h.sh_degree else np.zeros((n, 0), np.uint8)
    order = np.argsort(payload.pattern_index, kind="stable")
    return has.astype(bool), order


def sh_rows(payload: Payload, component, level):
    """Kept-Gaussian rows (within ``component``) that carry SH degree ``level``."""
    h = payload.header
    has, order = _sh_layout(payload)
    rows = order[has[order, level - 1]]
    if component == "static":
        return rows[rows < h.n_static]
    return rows[rows >= h.n_static] - h.n_static


def _lookup(payload, group):
    idx = payload.indexes.get(group)
    if idx is None or idx.size == 0:
        return np.zeros((0, DIMS[group[1]]))
    return payload.codebooks[group].astype(np.float64)[idx]


def _opacity_values(payload, name, hname=None):
    h = payload.header
    v = payload.opacity[name]
    key = hname or name
    if np.issubdtype(v.dtype, np.integer):
        lo, hi = h.ranges[key]
        return ScalarQuantizer(h.qbits, lo, hi).dequantize(v)
    return v.astype(np.float64)


def reconstruct(payload: Payload) -> GaussianScene:
    """The compressed model described by ``payload`` (float32-exact values)."""
    h = payload.header
    k = h.sh_degree
    kk = sh_count(k)
    ns, nd, tk = h.n_static, h.n_dynamic, _n_keys(h)
    sh = {c: np.zeros((n, kk, 3)) for c, n in (("static", ns), ("dynamic", nd))}
    for comp in COMPONENTS:
        sh[comp][:, 0] = _lookup(payload, (comp, "dc")).reshape(-1, 3)
        for level in range(1, k + 1):
            rows = sh_rows(payload, comp, level)
            vals = _lookup(payload, (comp, f"sh{level}")).reshape(len(rows), 2 * level + 1, 3)
            sh[comp][rows, level * level:(level + 1) ** 2] = vals

    disp = np.zeros((ns, 3))
    disp[payload.disp_rows] = payload.disp
    statics = StaticGaussians(
        _f32(payload.pivot), _f32(disp), _f32(_lookup(payload, ("static", "scale"))),
        _f32(_unit(_lookup(payload, ("static", "rotation")))),
        _f32(np.clip(_opacity_values(payload, "static_opacity"), 0, 1)), _f32(sh["static"]))

    coeffs = payload.traj.astype(np.float64) * h.traj_step
    if nd and h.wavelet_levels:
        pyr = from_coefficients(coeffs, h.wavelet_levels, tk, h.kept_levels)
        positions = haar_inverse(pyr)
    else:
        positions = coeffs.reshape(nd, tk, 3)
    a_s = _opacity_values(payload, "center_start")
    a_f = np.maximum(_opacity_values(payload, "center_end"), a_s)
    var = np.stack([_opacity_values(payload, "variance_start"),
                    _opacity_values(payload, "variance_end")], axis=1).reshape(nd, 2)
    rot = _unit(_lookup(payload, ("dynamic", "rotation"))).reshape(nd, tk, 4)
    dynamics = DynamicGaussians(
        _f32(positions), _f32(rot), _f32(_lookup(payload, ("dynamic", "scale"))),
        _f32(np.clip(_opacity_values(payload, "dynamic_opacity"), 0, 1)),
        _f32(np.stack([a_s, a_f], axis=1).reshape(nd, 2)), _f32(var), _f32(sh["dynamic"]))
    return GaussianScene(statics, dynamics, h.duration, h.keyframe_interval, h.timestamps, k)


def _n_keys(h: SceneHeader):
    from .model import keyframe_count
    return keyframe_count(h.duration, h.keyframe_interval)


def _n_coeff(h: SceneHeader):
    tk = _n_keys(h)
    if not h.wavelet_levels:
        return tk, tk
    total = padded_length(tk, h.wavelet_levels)
    n_a = total >> h.wavelet_levels
    kept = sum(total >> (lvl + 1) for lvl in range(h.wavelet_levels - h.kept_levels,
                                                     h.wavelet_levels))
    return n_a + kept, n_a


def _group_sizes(payload: Payload):
    """Expected sample count of each ECVQ group."""
    h = payload.header
    tk = _n_keys(h)
    sizes = {}
    for comp, n in (("static", h.n_static), ("dynamic", h.n_dynamic)):
        sizes[(comp, "scale")] = n
        sizes[(comp, "rotation")] = n * (tk if comp == "dynamic" else 1)
        sizes[(comp, "dc")] = n
        for level in range(1, 4):
            sizes[(comp, f"sh{level}")] = (len(sh_rows(payload, comp, level))
                                           if level <= h.sh_degree else 0)
    return sizes


# ---------------------------------------------------------------------------
# section writers

def _pack_bits(bits):
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes() if len(bits) else b""


def _unpack_bits(r: Reader, n):
    raw = np.frombuffer(r.take((n + 7) // 8), dtype=np.uint8)
    bits = np.unpackbits(raw)[:n].astype(bool) if n else np.zeros(0, bool)
    if n and np.any(np.unpackbits(raw)[n:]):
        r.fail("non-zero padding bits")
    return bits


def _index_width(n_patterns):
    return max(0, math.ceil(math.log2(n_patterns))) if n_patterns > 1 else 0


def _fixed_width(values, width):
    if width == 0 or len(values) == 0:
        return b""
    v = np.asarray(values, dtype=np.uint64)
    shifts = np.arange(width - 1, -1, -1, dtype=np.uint64)
    bits = ((v[:, None] >> shifts[None, :]) & np.uint64(1)).astype(np.uint8).ravel()
    return np.packbits(bits).tobytes()


def _read_fixed_width(r: Reader, n, width):
    if width == 0 or n == 0:
        return np.zeros(n, dtype=np.int64)
    bits = _unpack_bits(r, n * width).reshape(n, width).astype(np.int64)
    return bits @ (1 << np.arange(width - 1, -1, -1, dtype=np.int64))


def _write_table_stream(values):
    values = np.asarray(values, dtype=np.int64).ravel()
    if values.size == 0:
        return varint(0)
    table = rc.int_table(values)
    data = rc.encode_ints(values, table)
    return varint(len(table)) + table.to_varints() + varint(len(data)) + data


def _read_table_stream(r: Reader, count):
    n_cats = r.varint()
    if n_cats == 0:
        if count:
            r.fail("integer stream missing")
        return np.zeros(0, dtype=np.int64)
    if n_cats > 64:
        r.fail("integer table too large")
    counts = np.array([r.varint() for _ in range(n_cats)], dtype=np.int64)
    if counts.sum() != rc.TOTAL:
        r.fail("integer table does not sum to 2**16")
    table = rc.FrequencyTable(counts)
    data = r.take(r.varint())
    try:
        return rc.decode_ints(data, table, count)
    except CorruptionError as exc:
        r.fail(f"integer stream: {exc}")


def _opacity_bytes(v, qbits):
    if np.issubdtype(v.dtype, np.integer):
        return v.astype("<u1" if qbits <= 8 else "<u2").tobytes()
    return v.astype("<f4").tobytes()


def _read_opacity(r: Reader, n, quantized, qbits, limit=None):
    if quantized:
        codes = r.array("<u1" if qbits <= 8 else "<u2", n).astype(np.int64)
        if codes.size and codes.max() > (1 << qbits) - 1:
            r.fail("quantizer code out of range")
        return codes
    return r.array("<f4", n)


def serialize(payload: Payload) -> dict:
    h = payload.header
    ns, nd = h.n_static, h.n_dynamic
    s = {}
    s["gaussian_mask"] = _pack_bits(payload.keep)
    if h.sh_degree and ns + nd:
        sizes = np.bincount(payload.pattern_index, minlength=len(payload.patterns))
        s["sh_mask"] = (bytes([len(payload.patterns)]) + payload.patterns.astype(np.uint8).tobytes()
                        + b"".join(varint(v) for v in sizes))
        s["sort_idx"] = _fixed_width(payload.pattern_index, _index_width(len(payload.patterns)))

    streams, books, logits = [], [], []
    for g in GROUPS:
        idx = payload.indexes.get(g, np.zeros(0, np.int64))
        if idx.size:
            table = rc.FrequencyTable(payload.counts[g])
            streams.append(rc.range_encode(idx, table))
            cw = payload.codebooks[g]
            books.append(varint(cw.shape[0]) + cw.astype("<f2").tobytes())
            logits.append(table.to_u16())
        else:
            streams.append(b"")
            books.append(varint(0))
    if ns + nd:
        s["indexes"] = b"".join(varint(len(b)) for b in streams) + b"".join(streams)
        s["codebooks"] = b"".join(books)
        s["logits"] = b"".join(logits)

    if nd:
        _, n_a = _n_coeff(h)
        t = payload.traj
        s["F_masked"] = (_write_table_stream(t[:, 0, :])
                         + _write_table_stream(np.diff(t[:, :n_a, :], axis=1))
                         + _write_table_stream(t[:, n_a:, :]))
    if ns:
        s["mu_disp"] = _pack_bits(payload.disp_rows) + payload.disp.astype("<f4").tobytes()
        s["mu_0"] = payload.pivot.astype("<f4").tobytes()
    o = payload.opacity
    if nd:
        s["opacity_centers"] = (_opacity_bytes(o["center_start"], h.qbits)
                                + _opacity_bytes(o["center_end"], h.qbits))
        s["beta_var"] = (_opacity_bytes(o["variance_start"], h.qbits)
                         + _opacity_bytes(o["variance_end"], h.qbits))
    if ns + nd:
        s["base_opacities"] = (_opacity_bytes(o["static_opacity"], h.qbits)
                               + _opacity_bytes(o["dynamic_opacity"], h.qbits))
    return s


def parse(data: bytes) -> Payload:
    layout = read_layout(data)
    h = layout.header
    data = bytes(data)

    def reader(name):
        off = layout.offsets[name]
        return Reader(data[off:off + layout.lengths[name]], name)

    ns, nd, k = h.n_static, h.n_dynamic, h.sh_degree
    n = ns + nd
    if h.n_static > h.n_static_orig or h.n_dynamic > h.n_dynamic_orig or k > 3:
        raise CorruptionError("inconsistent counts", section="header")
    if h.wavelet_levels and h.kept_levels > h.wavelet_levels:
        raise CorruptionError("kept levels exceed wavelet levels", section="header")

    r = reader("gaussian_mask")
    keep = _unpack_bits(r, h.n_static_orig + h.n_dynamic_orig)
    r.done()
    if keep[:h.n_static_orig].sum() != ns or keep[h.n_static_orig:].sum() != nd:
        r.fail("mask does not match the kept counts")

    r = reader("sh_mask")
    if k and n:
        n_pat = r.take(1)[0]
        patterns = np.frombuffer(r.take(n_pat), dtype=np.uint8).copy()
        sizes = np.array([r.varint() for _ in range(n_pat)], dtype=np.int64)
        r.done()
        if n_pat == 0 or sizes.sum() != n or np.any(patterns >= (1 << k)):
            r.fail("pattern table inconsistent")
        r = reader("sort_idx")
        pattern_index = _read_fixed_width(r, n, _index_width(n_pat))
        r.done()
        if pattern_index.size and pattern_index.max() >= n_pat:
            r.fail("pattern number out of range")
        if not np.array_equal(np.bincount(pattern_index, minlength=n_pat), sizes):
            r.fail("pattern sizes disagree with the pattern table")
    else:
        r.done()
        reader("sort_idx").done()
        patterns = np.zeros(1, np.uint8)
        pattern_index = np.zeros(n, np.int64)

    payload = Payload(h, keep, patterns, pattern_index, {}, {}, {},
                      np.zeros((nd, 0, 3), np.int64), None, None, None)
    sizes = _group_sizes(payload)

    rb, rl, ri = reader("codebooks"), reader("logits"), reader("indexes")
    if n:
        lengths = [ri.varint() for _ in GROUPS]
        for g, length in zip(GROUPS, lengths):
            m = rb.varint()
            blob = ri.take(length)
            if m == 0:
                if sizes[g] or length:
                    rb.fail(f"{g[0]} {g[1]} codebook missing")
                continue
            if sizes[g] == 0:
                rb.fail(f"unexpected {g[0]} {g[1]} codebook")
            cw = rb.array("<f2", m * DIMS[g[1]]).reshape(m, DIMS[g[1]])
            counts = rl.array("<u2", m).astype(np.int64) + 1
            if counts.sum() != rc.TOTAL:
                rl.fail(f"{g[0]} {g[1]} table does not sum to 2**16")
            try:
                idx = rc.range_decode(blob, rc.FrequencyTable(counts), sizes[g])
            except CorruptionError as exc:
                ri.fail(f"{g[0]} {g[1]} stream: {exc}")
            payload.indexes[g] = idx
            payload.codebooks[g] = cw
            payload.counts[g] = counts
    for rr in (rb, rl, ri):
        rr.done()

    r = reader("F_masked")
    if nd:
        n_coeff, n_a = _n_coeff(h)
        first = _read_table_stream(r, nd * 3).reshape(nd, 1, 3)
        diff = _read_table_stream(r, nd * (n_a - 1) * 3).reshape(nd, n_a - 1, 3)
        det = _read_table_stream(r, nd * (n_coeff - n_a) * 3).reshape(nd, n_coeff - n_a, 3)
        approx = np.cumsum(np.concatenate([first, diff], axis=1), axis=1)
        payload.traj = np.concatenate([approx, det], axis=1)
    r.done()

    r = reader("mu_disp")
    if ns:
        payload.disp_rows = _unpack_bits(r, ns)
        payload.disp = r.array("<f4", 3 * int(payload.disp_rows.sum())).reshape(-1, 3)
    else:
        payload.disp_rows = np.zeros(0, bool)
        payload.disp = np.zeros((0, 3), np.float32)
    r.done()
    r = reader("mu_0")
    payload.pivot = r.array("<f4", 3 * ns).reshape(ns, 3)
    r.done()

    q = h.quantized
    r = reader("opacity_centers")
    payload.opacity["center_start"] = _read_opacity(r, nd, q("centers"), h.qbits)
    payload.opacity["center_end"] = _read_opacity(r, nd, q("centers"), h.qbits)
    r.done()
    r = reader("beta_var")
    payload.opacity["variance_start"] = _read_opacity(r, nd, q("variances"), h.qbits)
    payload.opacity["variance_end"] = _read_opacity(r, nd, q("variances"), h.qbits)
    r.done()
    r = reader("base_opacities")
    payload.opacity["static_opacity"] = _read_opacity(r, ns, q("static_opacity"), h.qbits)
    payload.opacity["dynamic_opacity"] = _read_opacity(r, nd, q("dynamic_opacity"), h.qbits)
    r.done()
    for name, v in payload.opacity.items():
        if np.issubdtype(v.dtype, np.integer) and v.size and name not in h.ranges:
            raise CorruptionError(f"no quantizer range for {name}", section="header")
    return payload


# ---------------------------------------------------------------------------
# encoder

@dataclass
class CompressedContainer:
    data: bytes
    header: SceneHeader
    sections: dict
    model: GaussianScene = None  # encoder-side compressed model
    prune: PruneResult = None

    @property
    def size(self):
        return len(self.data)

    def write(self, path):
        with open(path, "wb") as f:
            f.write(self.data)


@dataclass
class RateReport:
    total_bytes: int
    header_bytes: int
    sections: dict  # name -> bytes
    counts: dict  # static/dynamic before/after

    @property
    def total_mb(self):
        return self.total_bytes / 1e6

    @property
    def percentages(self):
        t = self.total_bytes or 1
        out = {name: 100.0 * b / t for name, b in self.sections.items()}
        out["header"] = 100.0 * self.header_bytes / t
        return out

    def rows(self):
        pct = self.percentages
        rows = [(name, self.sections[name], pct[name]) for name in SECTIONS]
        rows.append(("header", self.header_bytes, pct["header"]))
        return rows

    def format_table(self):
        lines = [f"{'component':<16}{'bytes':>10}{'MB':>10}{'%':>8}"]
        for name, b, p in self.rows():
            lines.append(f"{name:<16}{b:>10d}{b / 1e6:>10.4f}{p:>8.2f}")
        lines.append(f"{'total':<16}{self.total_bytes:>10d}{self.total_mb:>10.4f}{100.0:>8.2f}")
        c = self.counts
        lines.append(f"static  {c['static_before']} -> {c['static_after']}   "
                     f"dynamic {c['dynamic_before']} -> {c['dynamic_after']}")
        return "\n".join(lines)


def size_report(container) -> RateReport:
    """Per-section byte accounting of a container (object or raw bytes)."""
    data = container.data if isinstance(container, CompressedContainer) else bytes(container)
    layout = read_layout(data, verify=False)
    h = layout.header
    counts = {"static_before": h.n_static_orig, "static_after": h.n_static,
              "dynamic_before": h.n_dynamic_orig, "dynamic_after": h.n_dynamic}
    return RateReport(len(data), layout.header_bytes, dict(layout.lengths), counts)


def _vq_group(samples, preset: LevelPreset, seed, gid, attr, comp):
    m = min(preset.codebook_size, samples.shape[0])
    spread = float(np.mean(np.sum((samples - samples.mean(axis=0)) ** 2, axis=1)))
    lam = preset.lambda_r * preset.vq_weight * spread
    cb = ecvq_train(samples, m, lam, preset.ecvq_iters, seed=seed * 1009 + gid,
                    attribute=attr, component=comp)
    cw16 = cb.codewords.astype(np.float16)
    if not np.isfinite(cw16).all():
        raise EncodingError(f"{comp} {attr} codewords overflow float16")
    cbq = EcvqCodebook(cw16.astype(np.float64), cb.probabilities, lam, attr, comp)
    idx, _, _ = ecvq_assign(samples, cbq)
    used, idx = np.unique(idx, return_inverse=True)
    table = rc.FrequencyTable.from_histogram(np.bincount(idx, minlength=used.size))
    return idx.astype(np.int64), cw16[used], table.counts


def _refit(coeffs, d: DynamicGaussians, h: SceneHeader, ridge=1e-6):
    """Re-solve the kept coefficients against the unmasked trajectory.

    Zeroing details leaves the coarse coefficients optimal at the keyframes
    only; the renderer samples the Hermite curve at the scene timestamps.
    Both the inverse transform and the interpolation are linear, so the kept
    coefficients that best reproduce the original positions at those times,
    weighted by each Gaussian's temporal opacity, solve a small normal
    system.  A weak pull towards the plain masked coefficients keeps it
    well posed when few timestamps are visible.
    """
    tk = d.positions.shape[1]
    n_k = coeffs.shape[1]
    unit = from_coefficients(np.eye(n_k)[:, :, None], h.wavelet_levels, tk, h.kept_levels)
    keys = haar_inverse(unit)  # (n_k, tk, 1) keyframes of each coefficient
    times = np.asarray(h.timestamps, dtype=np.float64)
    basis = np.stack([hermite_interpolate(keys, t, h.keyframe_interval)[:, 0] for t in times])
    target = np.stack([hermite_interpolate(d.positions, t, h.keyframe_interval) for t in times],
                      axis=1)
    w = temporal_opacity(times[None, :], d.centers[:, None, :], d.variances[:, None, :]) + 1e-3
    lhs = np.einsum("tk,gt,tl->gkl", basis, w, basis)
    scale = np.trace(lhs, axis1=1, axis2=2)[:, None, None] / n_k
    lhs = lhs + ridge * scale * np.eye(n_k)
    rhs = np.einsum("tk,gt,gtc->gkc", basis, w, target) + ridge * scale * coeffs
    return np.linalg.solve(lhs, rhs)


def _trajectory_ints(d: DynamicGaussians, h: SceneHeader):
    positions = d.positions
    if h.wavelet_levels:
        pyr = mask_details(haar_forward(positions, h.wavelet_levels), h.kept_levels)
        coeffs = pyr.coefficients()
        if h.kept_levels < h.wavelet_levels and len(h.timestamps):
            coeffs = _refit(coeffs, d, h)
    else:
        coeffs = positions
    v = coeffs / h.traj_step
    return (np.sign(v) * np.floor(np.abs(v) + 0.5)).astype(np.int64)


def _opacity_entry(values, name, quantize, h: SceneHeader, bits):
    values = np.asarray(values, dtype=np.float64)
    if not quantize:
        return values.astype(np.float32)
    q = ScalarQuantizer.fit(values, bits)
    h.ranges[name] = (q.lo, q.hi)
    return q.quantize(values)


def build_payload(scene: GaussianScene, preset: LevelPreset, gs: PruneMask, sh: ShMask,
                  seed=0) -> Payload:
    ns0, nd0 = len(scene.statics), len(scene.dynamics)
    keep = gs.hard
    sh_hard = sh.hard
    s = scene.statics.subset(keep[:ns0])
    d = scene.dynamics.subset(keep[ns0:])
    ns, nd = len(s), len(d)
    k = scene.sh_degree
    policy = preset.policy
    h = SceneHeader(
        ns0, nd0, ns, nd, scene.duration, scene.keyframe_interval, k, scene.timestamps,
        preset.wavelet_levels, preset.keep_levels, preset.traj_step * scene.extent(),
        sum(POLICY_BITS[a] for a in policy.attributes), policy.bits, {}, preset.level)

    if k and ns + nd:
        kept_sh = sh_hard[keep]
        pattern = (kept_sh.astype(np.int64) << np.arange(k)).sum(axis=1)
        patterns, pattern_index = np.unique(pattern, return_inverse=True)
    else:
        patterns, pattern_index = np.zeros(1, np.int64), np.zeros(ns + nd, np.int64)
    payload = Payload(h, keep.copy(), patterns.astype(np.uint8), pattern_index.astype(np.int64),
                      {}, {}, {}, np.zeros((nd, 0, 3), np.int64), None, None, None)

    samples = {
        ("static", "scale"): s.log_scale, ("static", "rotation"): canonical_quat(s.rotation),
        ("static", "dc"): s.sh[:, 0], ("dynamic", "scale"): d.log_scale,
        ("dynamic", "rotation"): canonical_quat(d.rotations.reshape(-1, 4)),
        ("dynamic", "dc"): d.sh[:, 0]}
    for comp, group in (("static", s), ("dynamic", d)):
        for level in range(1, k + 1):
            rows = sh_rows(payload, comp, level)
            samples[(comp, f"sh{level}")] = group.sh[rows, level * level:(level + 1) ** 2].reshape(
                len(rows), DIMS[f"sh{level}"])
    for gid, g in enumerate(GROUPS):
        x = samples.get(g)
        if x is None or x.shape[0] == 0:
            continue
        idx, cw, counts = _vq_group(np.asarray(x, dtype=np.float64), preset, seed, gid, g[1], g[0])
        payload.indexes[g], payload.codebooks[g], payload.counts[g] = idx, cw, counts

    if nd:
        payload.traj = _trajectory_ints(d, h)
    payload.pivot = s.pivot.astype(np.float32)
    rows = np.any(s.disp != 0, axis=1)
    payload.disp_rows = rows
    payload.disp = s.disp[rows].astype(np.float32)

    bits = policy.bits
    o = payload.opacity
    o["static_opacity"] = _opacity_entry(s.opacity, "static_opacity", "static_opacity" in policy,
                                         h, bits)
    o["dynamic_opacity"] = _opacity_entry(d.opacity, "dynamic_opacity",
                                          "dynamic_opacity" in policy, h, bits)
    o["center_start"] = _opacity_entry(d.centers[:, 0], "center_start", "centers" in policy, h, bits)
    o["center_end"] = _opacity_entry(d.centers[:, 1], "center_end", "centers" in policy, h, bits)
    o["variance_start"] = _opacity_entry(d.variances[:, 0], "variance_start",
                                         "variances" in policy, h, bits)
    o["variance_end"] = _opacity_entry(d.variances[:, 1], "variance_end", "variances" in policy,
                                       h, bits)
    return payload


def choose_masks(scene: GaussianScene, preset: LevelPreset, probes=None, seed=0) -> PruneResult:
    if preset.lambda_gs <= 0 and preset.lambda_sh <= 0:
        n = scene.n_gaussians
        ns, nd = len(scene.statics), len(scene.dynamics)
        return PruneResult(PruneMask.keep_all(n, preset.phi_thres),
                           ShMask.keep_all(n, scene.sh_degree, preset.theta_th),
                           ns, nd, 0, 0, 0, 0.0)
    if probes is None:
        from .render import ProbeSet
        probes = ProbeSet.standard(scene, seed=seed, lambda_dssim=preset.lambda_dssim)
    return rd_greedy_prune(scene, preset.lambda_gs, preset.lambda_sh, probes,
                           lambda_r=preset.lambda_r, grid=preset.prune_grid,
                           phi_thres=preset.phi_thres, theta_th=preset.theta_th)


def encode_scene(scene: GaussianScene, preset: LevelPreset, seed=0, probes=None, masks=None):
    """Compress ``scene``; returns ``(CompressedContainer, RateReport)``.

    ``masks`` may supply a precomputed :class:`PruneResult` (or a
    ``(PruneMask, ShMask)`` pair) in place of the greedy search.
    """
    if not isinstance(scene, GaussianScene):
        raise ValidationError("encode_scene needs a GaussianScene")
    if masks is None:
        prune = choose_masks(scene, preset, probes, seed)
    elif isinstance(masks, PruneResult):
        prune = masks
    else:
        gs, sh = masks
        ns = len(scene.statics)
        hard = gs.hard
        prune = PruneResult(gs, sh, ns, len(scene.dynamics), int(ns - hard[:ns].sum()),
                            int(len(scene.dynamics) - hard[ns:].sum()), 0, 0.0)
    if prune.gs.soft.shape != (scene.n_gaussians,) or \
            prune.sh.soft.shape != (scene.n_gaussians, scene.sh_degree):
        raise ValidationError("mask shapes do not match the scene")
    payload = build_payload(scene, preset, prune.gs, prune.sh, seed)
    sections = serialize(payload)
    data = assemble(payload.header, sections)
    container = CompressedContainer(data, payload.header, {n: sections.get(n, b"")
                                                           for n in SECTIONS},
                                    reconstruct(payload), prune)
    return container, size_report(container)


def decode_scene(container) -> GaussianScene:
    """Rebuild the compressed model from container bytes (or a container object)."""
    data = container.data if isinstance(container, CompressedContainer) else bytes(container)
    payload = parse(data)
    try:
        return reconstruct(payload)
    except G4CError:
        raise
    except (ValueError, IndexError) as exc:
        raise CorruptionError(f"inconsistent container contents: {exc}") from None


def read_container(path) -> bytes:
    with open(path, "rb") as f:
        return f.read()
