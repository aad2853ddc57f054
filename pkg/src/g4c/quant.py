"""Lossy parameter reduction: pruning masks, ECVQ and scalar quantization."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ValidationError
from .model import GaussianScene

PHI_THRES = 0.01
THETA_TH = 0.5
CODEBOOK_SIZE = 256


# ---------------------------------------------------------------------------
# masks

def binarize(soft, threshold):
    """Hard mask bit(s): ``soft > threshold`` (strict)."""
    out = np.asarray(soft) > threshold
    return bool(out) if out.ndim == 0 else out


def squash(ratio, threshold):
    """Monotone map of an importance ratio to (0, 1) with ``squash(1) == threshold``."""
    ratio = np.asarray(ratio, dtype=np.float64)
    return threshold * ratio / (threshold * ratio + (1.0 - threshold))


@dataclass(frozen=True, eq=False)
class PruneMask:
    soft: np.ndarray
    threshold: float = PHI_THRES

    def __post_init__(self):
        soft = np.asarray(self.soft, dtype=np.float64)
        if soft.ndim != 1 or np.any((soft < 0) | (soft > 1)):
            raise ValidationError("soft mask values must lie in [0, 1]")
        if not 0 < self.threshold < 1:
            raise ValidationError("mask threshold must lie in (0, 1)")
        object.__setattr__(self, "soft", soft)

    @property
    def hard(self):
        return binarize(self.soft, self.threshold)

    @classmethod
    def keep_all(cls, n, threshold=PHI_THRES):
        return cls(np.ones(n), threshold)

    @classmethod
    def from_hard(cls, hard, threshold=PHI_THRES):
        """Soft values sitting on either side of the threshold."""
        hard = np.asarray(hard, dtype=bool)
        return cls(np.where(hard, 0.5 * (1.0 + threshold), 0.5 * threshold), threshold)


@dataclass(frozen=True, eq=False)
class ShMask:
    """Per-Gaussian, per-degree (1..k) soft masks; column ``l - 1`` is degree ``l``."""

    soft: np.ndarray
    threshold: float = THETA_TH

    def __post_init__(self):
        soft = np.asarray(self.soft, dtype=np.float64)
        if soft.ndim != 2 or np.any((soft < 0) | (soft > 1)):
            raise ValidationError("SH soft mask must be (N, k) with values in [0, 1]")
        if not 0 < self.threshold < 1:
            raise ValidationError("mask threshold must lie in (0, 1)")
        object.__setattr__(self, "soft", soft)

    @property
    def hard(self):
        return binarize(self.soft, self.threshold)

    @property
    def degree(self):
        return self.soft.shape[1]

    @classmethod
    def keep_all(cls, n, degree, threshold=THETA_TH):
        return cls(np.ones((n, degree)), threshold)

    @classmethod
    def from_hard(cls, hard, threshold=THETA_TH):
        hard = np.asarray(hard, dtype=bool)
        return cls(np.where(hard, 0.5 * (1.0 + threshold), 0.5 * threshold), threshold)

    def apply(self, sh):
        """Zero every coefficient triple of each masked degree."""
        sh = np.array(sh, dtype=np.float64)
        hard = self.hard
        for level in range(1, self.degree + 1):
            sh[~hard[:, level - 1], level * level:(level + 1) ** 2] = 0.0
        return sh


def gs_prune_loss(mask: PruneMask) -> float:
    if mask.soft.size == 0:
        raise ValidationError("pruning loss needs at least one Gaussian")
    return float(np.mean(mask.soft))


def sh_degree_weights(k):
    """``(2l + 1) / ((k + 1)**2 - 1)`` for ``l = 1..k``; sums to 1."""
    if not 1 <= k <= 3:
        raise ValidationError("SH degree must be in 1..3")
    l = np.arange(1, k + 1)
    return (2 * l + 1) / ((k + 1) ** 2 - 1)


def sh_prune_loss(mask: ShMask, k=None) -> float:
    k = mask.degree if k is None else k
    if mask.soft.shape[1] != k:
        raise ValidationError(f"mask has {mask.soft.shape[1]} degrees, expected {k}")
    if mask.soft.shape[0] == 0:
        raise ValidationError("pruning loss needs at least one Gaussian")
    return float(np.sum(mask.soft @ sh_degree_weights(k)) / mask.soft.shape[0])


def apply_masks(scene: GaussianScene, gs: PruneMask | None, sh: ShMask | None):
    """Scene with pruned Gaussians removed and masked SH degrees zeroed."""
    ns = len(scene.statics)
    statics, dynamics = scene.statics, scene.dynamics
    if sh is not None and scene.sh_degree > 0:
        soft = sh.soft
        statics = _with_sh(statics, ShMask(soft[:ns], sh.threshold).apply(statics.sh))
        dynamics = _with_sh(dynamics, ShMask(soft[ns:], sh.threshold).apply(dynamics.sh))
    if gs is not None:
        hard = gs.hard
        statics = statics.subset(hard[:ns])
        dynamics = dynamics.subset(hard[ns:])
    return scene.with_gaussians(statics, dynamics)


def _with_sh(group, sh):
    return replace(group, sh=sh)


# ---------------------------------------------------------------------------
# entropy-constrained VQ

GROUP_DIMS = {"scale": 3, "rotation": 4, "dc": 3, "sh1": 9, "sh2": 15, "sh3": 21}


def canonical_quat(q):
    """Flip quaternions to ``w >= 0`` so ``q`` and ``-q`` quantize alike."""
    q = np.asarray(q, dtype=np.float64)
    return np.where(q[..., :1] < 0, -q, q)


@dataclass(frozen=True, eq=False)
class EcvqCodebook:
    codewords: np.ndarray  # (M, D)
    probabilities: np.ndarray  # (M,)
    lam: float = 0.0
    attribute: str = ""
    component: str = ""
    history: tuple = field(default=(), repr=False)

    def __post_init__(self):
        cw = np.atleast_2d(np.asarray(self.codewords, dtype=np.float64))
        p = np.asarray(self.probabilities, dtype=np.float64)
        if cw.shape[0] == 0:
            raise ValidationError("empty codebook")
        if p.shape != (cw.shape[0],) or np.any(p <= 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ValidationError("codebook probabilities must be positive and sum to 1")
        if self.lam < 0:
            raise ValidationError("lambda must be non-negative")
        dim = GROUP_DIMS.get(self.attribute)
        if dim is not None and cw.shape[1] != dim:
            raise ValidationError(f"{self.attribute} codewords must have dimension {dim}")
        object.__setattr__(self, "codewords", cw)
        object.__setattr__(self, "probabilities", p)

    def __len__(self):
        return self.codewords.shape[0]

    @property
    def dim(self):
        return self.codewords.shape[1]

    @property
    def rates(self):
        return -np.log2(self.probabilities)


def _sq_dist(x, codewords, chunk=4096):
    out = np.empty((x.shape[0], codewords.shape[0]))
    for s in range(0, x.shape[0], chunk):
        diff = x[s:s + chunk, None, :] - codewords[None, :, :]
        out[s:s + chunk] = np.einsum("nmd,nmd->nm", diff, diff)
    return out


def _assign(x, codewords, rates, lam):
    d = _sq_dist(x, codewords)
    cost = d + lam * rates[None, :] if lam else d
    idx = np.argmin(cost, axis=1)  # first minimum: lowest index wins ties
    rows = np.arange(x.shape[0])
    return idx, d[rows, idx]


def ecvq_assign(samples, cb: EcvqCodebook):
    """Vectorised :func:`ecvq_encode`: ``(indices, rate_bits, distortions)``."""
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != cb.dim:
        raise ValidationError(f"samples must be (n, {cb.dim})")
    if x.shape[0] == 0:
        return np.zeros(0, np.int64), np.zeros(0), np.zeros(0)
    rates = cb.rates
    idx, d = _assign(x, cb.codewords, rates, cb.lam)
    return idx.astype(np.int64), rates[idx], d


def ecvq_encode(x, cb: EcvqCodebook):
    """Index minimising ``squared distance + lam * (-log2 p)``."""
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    idx, rate, dist = ecvq_assign(x, cb)
    return int(idx[0]), float(rate[0]), float(dist[0])


def waterfill(counts, floor):
    """Maximum-likelihood probabilities under a per-symbol floor.

    Minimises ``-sum(n_j log p_j)`` subject to ``sum(p) = 1, p >= floor``;
    the solution is ``p_j = max(floor, n_j / nu)``.
    """
    counts = np.asarray(counts, dtype=np.float64)
    m = counts.size
    if floor * m > 1:
        raise ValidationError("probability floor too large for alphabet")
    floored = counts <= 0
    while True:
        nu = counts[~floored].sum() / (1.0 - floored.sum() * floor)
        p = np.where(floored, floor, counts / nu)
        newly = ~floored & (p < floor)
        if not newly.any():
            return p / p.sum()
        floored |= newly


def ecvq_objective(x, codewords, p, idx, lam):
    d = np.sum((x - codewords[idx]) ** 2, axis=1)
    return float(np.mean(d + lam * -np.log2(p[idx])))


def ecvq_train(samples, m=CODEBOOK_SIZE, lam=0.0, iters=30, seed=0, attribute="",
               component="", floor=None, tol=1e-12) -> EcvqCodebook:
    """Alternate assignment, centroid and probability updates.

    The objective after each full iteration is recorded in ``history`` and
    never increases.  Codewords left without samples are dropped at the end.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValidationError("need a non-empty (n, d) sample array")
    if m < 1:
        raise ValidationError("codebook size must be >= 1")
    n = x.shape[0]
    if n < m:
        raise ValidationError(f"need at least {m} samples, got {n}")
    if lam < 0:
        raise ValidationError("lambda must be non-negative")
    floor = 1.0 / (64 * m) if floor is None else floor
    rng = np.random.default_rng(seed)
    codewords = x[np.sort(rng.choice(n, m, replace=False))].copy()
    p = np.full(m, 1.0 / m)
    history = []
    prev_idx = None
    for _ in range(iters):
        idx, _ = _assign(x, codewords, -np.log2(p), lam)
        counts = np.bincount(idx, minlength=m)
        sums = np.zeros_like(codewords)
        np.add.at(sums, idx, x)
        used = counts > 0
        codewords[used] = sums[used] / counts[used, None]
        p = waterfill(counts, floor)
        history.append(ecvq_objective(x, codewords, p, idx, lam))
        if prev_idx is not None and np.array_equal(idx, prev_idx):
            break
        if len(history) > 1 and history[-2] - history[-1] <= tol * max(1.0, abs(history[-1])):
            break
        prev_idx = idx
    idx, _ = _assign(x, codewords, -np.log2(p), lam)
    counts = np.bincount(idx, minlength=m)
    used = counts > 0
    codewords = codewords[used]
    p = waterfill(counts[used], 1.0 / (64 * used.sum()))
    return EcvqCodebook(codewords, p, lam, attribute, component, tuple(history))


def index_entropy(indices, m=None):
    """Empirical entropy (bits/symbol) of an index stream."""
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size == 0:
        return 0.0
    counts = np.bincount(indices, minlength=m or 0)
    f = counts[counts > 0] / indices.size
    return float(-np.sum(f * np.log2(f)))


# ---------------------------------------------------------------------------
# scalar quantization

OPACITY_ATTRIBUTES = ("static_opacity", "dynamic_opacity", "centers", "variances")
DEFAULT_QUANTIZED = ("static_opacity", "dynamic_opacity", "centers")


@dataclass(frozen=True)
class ScalarQuantizer:
    """Uniform ``2**bits``-level quantizer over ``[lo, hi]``.

    Codes are ``round((x - lo) / step)`` with ``step = (hi - lo) / (2**bits - 1)``
    and halves rounded away from zero, so ``lo`` and ``hi`` are reproduced
    exactly and the error stays within half a step.
    """

    bits: int
    lo: float
    hi: float

    def __post_init__(self):
        if not 1 <= self.bits <= 16:
            raise ValidationError("bit depth must be in 1..16")
        if not self.hi > self.lo:
            raise ValidationError("quantizer range needs hi > lo")

    @property
    def levels(self):
        return (1 << self.bits) - 1

    @property
    def step(self):
        return (self.hi - self.lo) / self.levels

    def quantize(self, x):
        x = np.clip(np.asarray(x, dtype=np.float64), self.lo, self.hi)
        v = (x - self.lo) / (self.hi - self.lo) * self.levels
        return np.floor(v + 0.5).astype(np.int64)  # v >= 0: half away from zero

    def dequantize(self, code):
        code = np.asarray(code, dtype=np.int64)
        return self.lo + code * ((self.hi - self.lo) / self.levels)

    @classmethod
    def fit(cls, values, bits=8):
        """Quantizer over the observed range (widened when degenerate)."""
        values = np.asarray(values, dtype=np.float64)
        if values.size == 0:
            return cls(bits, 0.0, 1.0)
        lo, hi = float(values.min()), float(values.max())
        return cls(bits, lo, hi if hi > lo else lo + 1.0)


def scalar_quantize(x, q: ScalarQuantizer):
    """``(code, dequantized)`` for a scalar or an array."""
    code = q.quantize(x)
    deq = q.dequantize(code)
    if code.ndim == 0:
        return int(code), float(deq)
    return code, deq


@dataclass(frozen=True)
class QuantPolicy:
    """Which opacity-related attributes go through the scalar quantizer.

    Temporal variances stay raw unless ``allow_variances`` is set, which only
    the ablation ladder does.
    """

    attributes: tuple = DEFAULT_QUANTIZED
    bits: int = 8
    allow_variances: bool = False

    def __post_init__(self):
        attrs = tuple(self.attributes)
        unknown = set(attrs) - set(OPACITY_ATTRIBUTES)
        if unknown:
            raise ValidationError(f"unknown quantized attribute(s): {sorted(unknown)}")
        if "variances" in attrs and not self.allow_variances:
            raise ValidationError("temporal variances are never quantized outside ablations")
        object.__setattr__(self, "attributes", tuple(a for a in OPACITY_ATTRIBUTES if a in attrs))

    def __contains__(self, name):
        return name in self.attributes


#: the cumulative ladder evaluated by the opacity ablation
POLICY_LADDER = (
    ("none", QuantPolicy(())),
    ("static_opacity", QuantPolicy(("static_opacity",))),
    ("+dynamic_opacity", QuantPolicy(("static_opacity", "dynamic_opacity"))),
    ("+centers", QuantPolicy(DEFAULT_QUANTIZED)),
    ("+variances", QuantPolicy(OPACITY_ATTRIBUTES, allow_variances=True)),
)


# ---------------------------------------------------------------------------
# greedy rate-distortion pruning

@dataclass
class PruneResult:
    gs: PruneMask
    sh: ShMask
    n_static: int
    n_dynamic: int
    static_pruned: int
    dynamic_pruned: int
    sh_pruned: int
    distortion: float

    @property
    def prune_counts(self):
        return {"static_before": self.n_static, "static_after": self.n_static - self.static_pruned,
                "dynamic_before": self.n_dynamic,
                "dynamic_after": self.n_dynamic - self.dynamic_pruned}


def importance(splats):
    """Per-Gaussian mean over probes of (effective opacity x projected area).

    The effective opacity already carries the temporal window at each probe
    time, so averaging over probe times folds in temporal coverage.
    """
    total = None
    for sp in splats:
        a, b, c = sp.conics[:, 0], sp.conics[:, 1], sp.conics[:, 2]
        area = np.pi / np.sqrt(np.maximum(a * c - b * b, 1e-300))
        val = np.where(sp.radii > 0, sp.opacity * area, 0.0)
        total = val if total is None else total + val
    return total / len(splats)


def _grid_candidates(n, grid):
    """Prefix sizes ``0..n`` thinned to at most ``grid + 1`` evenly spaced values."""
    return np.unique(np.round(np.linspace(0, n, min(grid, n) + 1)).astype(np.int64))


def _best_prefix(candidates, distortion_of, saving_of, weight):
    best_n, best_obj, best_d = 0, None, 0.0
    for n in candidates:
        d = distortion_of(int(n))
        obj = d - weight * saving_of(int(n))
        if best_obj is None or obj < best_obj:
            best_n, best_obj, best_d = int(n), obj, d
    return best_n, best_d


def _soft_from_rank(order, n_pruned, size, threshold):
    """Soft mask that rises along the visiting order and crosses ``threshold``
    between position ``n_pruned - 1`` and ``n_pruned``.

    Entries not listed in ``order`` get 0.
    """
    soft = np.zeros(size)
    rank = np.arange(1, len(order) + 1, dtype=np.float64)
    soft[order] = squash(rank / (n_pruned + 0.5), threshold)
    return soft


def rd_greedy_prune(scene: GaussianScene, lambda_gs, lambda_sh, probes, lambda_r=1.0,
                    grid=64, phi_thres=PHI_THRES, theta_th=THETA_TH) -> PruneResult:
    """Choose Gaussian and SH-degree masks against a probe distortion oracle.

    Gaussians are visited in ascending importance (index breaks ties); the
    pruned set is the prefix minimising
    ``D(prefix) - lambda_r * lambda_gs * |prefix| / N`` (smallest prefix on
    ties), searched over ``grid + 1`` evenly spaced prefix sizes.  SH degrees of the survivors follow with
    ``importance x band energy`` ordering and per-degree rate weights.
    """
    n_total = scene.n_gaussians
    ns, nd = len(scene.statics), len(scene.dynamics)
    k = scene.sh_degree
    if n_total == 0:
        return PruneResult(PruneMask(np.zeros(0), phi_thres), ShMask(np.zeros((0, k)), theta_th),
                           0, 0, 0, 0, 0, 0.0)
    from .model import scene_digest
    from .render import composite

    need_render = lambda_gs > 0 or (lambda_sh > 0 and k > 0)
    # distortion values are pure functions of (scene, probes, masks): memoise
    # them on the probe set so several lambdas share one curve
    key = scene_digest(scene)
    memo = probes.cache.setdefault(("prune", key), {}) if need_render else {}
    if need_render and "splats" not in memo:
        memo["splats"] = probes.splats(scene)
    splats = memo.get("splats")
    imp = importance(splats) if need_render else np.ones(n_total)
    ids = np.arange(n_total)

    # stage 1: whole Gaussians
    keep = np.ones(n_total, dtype=bool)
    d0 = 0.0
    order = np.lexsort((ids, imp))
    n_pruned = 0
    if lambda_gs > 0:
        curve = memo.setdefault("gs", {})

        def dist(n):
            if n in curve:
                return curve[n]
            mask = np.ones(n_total, dtype=bool)
            mask[order[:n]] = False
            curve[n] = probes.distortion([composite(sp, mask, background=probes.background)
                                          for sp in splats])
            return curve[n]

        cands = _grid_candidates(n_total, grid)
        n_pruned, d0 = _best_prefix(cands, dist, lambda n: n / n_total, lambda_r * lambda_gs)
    gs = PruneMask(_soft_from_rank(order, n_pruned, n_total, phi_thres), phi_thres)
    keep = gs.hard

    # stage 2: SH degrees of survivors
    sh_pruned = 0
    if k > 0:
        sh_all = np.concatenate([scene.statics.sh, scene.dynamics.sh], axis=0)
        energy = np.stack([np.sum(sh_all[:, l * l:(l + 1) ** 2] ** 2, axis=(1, 2))
                           for l in range(1, k + 1)], axis=1)
        score = imp[:, None] * energy
        w = sh_degree_weights(k)
        pair_i, pair_l = np.nonzero(np.broadcast_to(keep[:, None], score.shape))
        if lambda_sh > 0 and pair_i.size:
            pscore = score[pair_i, pair_l]
            porder = np.lexsort((pair_l, pair_i, pscore))
            saving = np.concatenate([[0.0], np.cumsum(w[pair_l[porder]])]) / n_total

            sh_curve = memo.setdefault(("sh", keep.tobytes()), {})

            def sh_dist(n):
                if n in sh_curve:
                    return sh_curve[n]
                sk = np.ones((n_total, k), dtype=bool)
                sk[pair_i[porder[:n]], pair_l[porder[:n]]] = False
                sh_curve[n] = probes.distortion([composite(sp, keep, sk, probes.background)
                                                 for sp in splats])
                return sh_curve[n]

            cands = _grid_candidates(pair_i.size, grid)
            sh_pruned, d0 = _best_prefix(cands, sh_dist, lambda n: saving[n],
                                         lambda_r * lambda_sh)
        else:
            porder = np.arange(pair_i.size)
        flat = np.ravel_multi_index((pair_i[porder], pair_l[porder]), score.shape)
        sh_soft = _soft_from_rank(flat, sh_pruned, score.size, theta_th).reshape(score.shape)
    else:
        sh_soft = np.zeros((n_total, 0))
    sh = ShMask(sh_soft, theta_th)
    sh_pruned = int(np.count_nonzero(~sh.hard[keep]))
    return PruneResult(gs, sh, ns, nd, int(ns - keep[:ns].sum()), int(nd - keep[ns:].sum()),
                       sh_pruned, float(d0))
