"""Hot inner loops, each in a numba and a plain numpy/python flavour.

The ``*_nb`` functions are ``@njit`` compiled; the ``*_py`` functions are
the fallback path.  The un-suffixed names at the bottom are bound according
to :data:`g4c._jit.USE_NUMBA`.  Both flavours implement the same arithmetic
in the same order, so range-coded bytes are identical between them and
rendered images agree to floating-point rounding of ``exp``.

Range coder
-----------
Byte-oriented range coder with carry propagation (the LZMA scheme): 32-bit
``range``, 33-bit ``low``, renormalise whenever ``range < 2**24``.  A coding
op is a triple ``(start, size, total)`` with ``total <= 2**16``; a symbol
with cumulative count ``start`` and count ``size`` narrows the interval by
``size / total``.  The leading byte LZMA writes is always zero and is
dropped; the decoder supplies it implicitly.
"""
import numpy as np

from ._jit import USE_NUMBA, njit

TOP = 1 << 24
MASK32 = 0xFFFFFFFF
MAX_TOTAL = 1 << 16

# decoder status codes
OK = 0
ERR_TRUNCATED = -1
ERR_INVALID = -2


# ---------------------------------------------------------------------------
# range encoder

@njit(cache=True)
def _shift_low_nb(low, cache, cache_size, pos, out):
    if low < 0xFF000000 or low > MASK32:
        carry = low >> 32
        temp = cache
        while True:
            if pos >= 0:
                out[pos] = (temp + carry) & 0xFF
            pos += 1
            temp = 0xFF
            cache_size -= 1
            if cache_size == 0:
                break
        cache = (low >> 24) & 0xFF
    cache_size += 1
    low = (low & 0x00FFFFFF) << 8
    return low, cache, cache_size, pos


@njit(cache=True)
def rc_encode_nb(start, size, total, out):
    low = 0
    rng = MASK32
    cache = 0
    cache_size = 1
    pos = -1  # first emitted byte is the dummy zero, dropped
    for i in range(start.shape[0]):
        r = rng // total[i]
        low += r * start[i]
        rng = r * size[i]
        while rng < TOP:
            low, cache, cache_size, pos = _shift_low_nb(low, cache, cache_size, pos, out)
            rng = (rng << 8) & MASK32
    for _ in range(5):
        low, cache, cache_size, pos = _shift_low_nb(low, cache, cache_size, pos, out)
    return pos


def rc_encode_py(start, size, total, out):
    low = 0
    rng = MASK32
    cache = 0
    cache_size = 1
    pos = -1
    start = start.tolist()
    size = size.tolist()
    total = total.tolist()
    n = len(start)

    def shift_low():
        nonlocal low, cache, cache_size, pos
        if low < 0xFF000000 or low > MASK32:
            carry = low >> 32
            temp = cache
            while True:
                if pos >= 0:
                    out[pos] = (temp + carry) & 0xFF
                pos += 1
                temp = 0xFF
                cache_size -= 1
                if cache_size == 0:
                    break
            cache = (low >> 24) & 0xFF
        cache_size += 1
        low = (low & 0x00FFFFFF) << 8

    for i in range(n):
        r = rng // total[i]
        low += r * start[i]
        rng = r * size[i]
        while rng < TOP:
            shift_low()
            rng = (rng << 8) & MASK32
    for _ in range(5):
        shift_low()
    return pos


# ---------------------------------------------------------------------------
# range decoders.  Each returns (status, bytes_consumed).

@njit(cache=True)
def rc_decode_symbols_nb(data, cum, lookup, total, count, out):
    n_data = data.shape[0]
    pos = 0
    code = 0
    for _ in range(4):
        if pos >= n_data:
            return ERR_TRUNCATED, pos
        code = (code << 8) | data[pos]
        pos += 1
    rng = MASK32
    for i in range(count):
        r = rng // total
        v = code // r
        if v >= total:
            return ERR_INVALID, pos
        s = lookup[v]
        out[i] = s
        code -= r * cum[s]
        rng = r * (cum[s + 1] - cum[s])
        while rng < TOP:
            if pos >= n_data:
                return ERR_TRUNCATED, pos
            code = ((code << 8) | data[pos]) & MASK32
            rng = (rng << 8) & MASK32
            pos += 1
    return OK, pos


def rc_decode_symbols_py(data, cum, lookup, total, count, out):
    data = bytes(data)
    cum = cum.tolist()
    lookup = lookup.tolist()
    n_data = len(data)
    if n_data < 4:
        return ERR_TRUNCATED, n_data
    code = int.from_bytes(data[:4], "big")
    pos = 4
    rng = MASK32
    for i in range(count):
        r = rng // total
        v = code // r
        if v >= total:
            return ERR_INVALID, pos
        s = lookup[v]
        out[i] = s
        code -= r * cum[s]
        rng = r * (cum[s + 1] - cum[s])
        while rng < TOP:
            if pos >= n_data:
                return ERR_TRUNCATED, pos
            code = ((code << 8) | data[pos]) & MASK32
            rng = (rng << 8) & MASK32
            pos += 1
    return OK, pos


@njit(cache=True)
def rc_decode_ints_nb(data, cum, lookup, total, count, out):
    """Decode zigzag integers coded as (bit-length symbol, raw mantissa bits)."""
    n_data = data.shape[0]
    pos = 0
    code = 0
    for _ in range(4):
        if pos >= n_data:
            return ERR_TRUNCATED, pos
        code = (code << 8) | data[pos]
        pos += 1
    rng = MASK32
    for i in range(count):
        # category symbol
        r = rng // total
        v = code // r
        if v >= total:
            return ERR_INVALID, pos
        cat = lookup[v]
        code -= r * cum[cat]
        rng = r * (cum[cat + 1] - cum[cat])
        while rng < TOP:
            if pos >= n_data:
                return ERR_TRUNCATED, pos
            code = ((code << 8) | data[pos]) & MASK32
            rng = (rng << 8) & MASK32
            pos += 1
        if cat == 0:
            out[i] = 0
            continue
        z = 1
        left = cat - 1
        while left > 0:
            b = left if left < 16 else 16
            t = 1 << b
            r = rng // t
            v = code // r
            if v >= t:
                return ERR_INVALID, pos
            z = (z << b) | v
            code -= r * v
            rng = r
            while rng < TOP:
                if pos >= n_data:
                    return ERR_TRUNCATED, pos
                code = ((code << 8) | data[pos]) & MASK32
                rng = (rng << 8) & MASK32
                pos += 1
            left -= b
        out[i] = (z >> 1) ^ -(z & 1)
    return OK, pos


def rc_decode_ints_py(data, cum, lookup, total, count, out):
    data = bytes(data)
    cum = cum.tolist()
    lookup = lookup.tolist()
    n_data = len(data)
    if n_data < 4:
        return ERR_TRUNCATED, n_data
    state = {"code": int.from_bytes(data[:4], "big"), "rng": MASK32, "pos": 4}

    def narrow(start, size, r):
        state["code"] -= r * start
        state["rng"] = r * size
        while state["rng"] < TOP:
            if state["pos"] >= n_data:
                return False
            state["code"] = ((state["code"] << 8) | data[state["pos"]]) & MASK32
            state["rng"] = (state["rng"] << 8) & MASK32
            state["pos"] += 1
        return True

    for i in range(count):
        r = state["rng"] // total
        v = state["code"] // r
        if v >= total:
            return ERR_INVALID, state["pos"]
        cat = lookup[v]
        if not narrow(cum[cat], cum[cat + 1] - cum[cat], r):
            return ERR_TRUNCATED, state["pos"]
        if cat == 0:
            out[i] = 0
            continue
        z = 1
        left = cat - 1
        while left > 0:
            b = min(left, 16)
            t = 1 << b
            r = state["rng"] // t
            v = state["code"] // r
            if v >= t:
                return ERR_INVALID, state["pos"]
            z = (z << b) | v
            if not narrow(v, 1, r):
                return ERR_TRUNCATED, state["pos"]
            left -= b
        out[i] = (z >> 1) ^ -(z & 1)
    return OK, state["pos"]


# ---------------------------------------------------------------------------
# front-to-back splat compositing

ALPHA_MIN = 1.0 / 255.0


@njit(cache=True)
def composite_nb(means, conics, opacity, colors, radii, order, keep, width, height, background):
    img = np.zeros((height, width, 3))
    trans = np.ones((height, width))
    for k in range(order.shape[0]):
        g = order[k]
        if not keep[g]:
            continue
        r = radii[g]
        if r <= 0:
            continue
        mx = means[g, 0]
        my = means[g, 1]
        x0 = max(int(np.floor(mx - r)), 0)
        x1 = min(int(np.ceil(mx + r)), width - 1)
        y0 = max(int(np.floor(my - r)), 0)
        y1 = min(int(np.ceil(my + r)), height - 1)
        a = conics[g, 0]
        b = conics[g, 1]
        c = conics[g, 2]
        o = opacity[g]
        for y in range(y0, y1 + 1):
            dy = y - my
            for x in range(x0, x1 + 1):
                dx = x - mx
                power = -0.5 * (a * dx * dx + c * dy * dy) - b * dx * dy
                if power > 0.0:
                    continue
                alpha = o * np.exp(power)
                if alpha > 1.0:
                    alpha = 1.0
                if alpha < ALPHA_MIN:
                    continue
                w = trans[y, x] * alpha
                img[y, x, 0] += w * colors[g, 0]
                img[y, x, 1] += w * colors[g, 1]
                img[y, x, 2] += w * colors[g, 2]
                trans[y, x] = trans[y, x] * (1.0 - alpha)
    for y in range(height):
        for x in range(width):
            for ch in range(3):
                v = img[y, x, ch] + trans[y, x] * background[ch]
                img[y, x, ch] = min(max(v, 0.0), 1.0)
    return img


def composite_py(means, conics, opacity, colors, radii, order, keep, width, height, background):
    img = np.zeros((height, width, 3))
    trans = np.ones((height, width))
    for g in order:
        if not keep[g] or radii[g] <= 0:
            continue
        r = radii[g]
        mx, my = means[g]
        x0 = max(int(np.floor(mx - r)), 0)
        x1 = min(int(np.ceil(mx + r)), width - 1)
        y0 = max(int(np.floor(my - r)), 0)
        y1 = min(int(np.ceil(my + r)), height - 1)
        if x1 < x0 or y1 < y0:
            continue
        dx = np.arange(x0, x1 + 1) - mx
        dy = (np.arange(y0, y1 + 1) - my)[:, None]
        a, b, c = conics[g]
        power = -0.5 * (a * dx * dx + c * dy * dy) - b * dx * dy
        alpha = np.minimum(opacity[g] * np.exp(np.minimum(power, 0.0)), 1.0)
        alpha = np.where((power > 0.0) | (alpha < ALPHA_MIN), 0.0, alpha)
        t = trans[y0:y1 + 1, x0:x1 + 1]
        img[y0:y1 + 1, x0:x1 + 1] += (t * alpha)[..., None] * colors[g]
        trans[y0:y1 + 1, x0:x1 + 1] = t * (1.0 - alpha)
    img += trans[..., None] * np.asarray(background)
    return np.clip(img, 0.0, 1.0)


if USE_NUMBA:
    rc_encode = rc_encode_nb
    rc_decode_symbols = rc_decode_symbols_nb
    rc_decode_ints = rc_decode_ints_nb
    composite = composite_nb
else:
    rc_encode = rc_encode_py
    rc_decode_symbols = rc_decode_symbols_py
    rc_decode_ints = rc_decode_ints_py
    composite = composite_py
