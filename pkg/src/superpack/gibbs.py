"""Grand canonical hard superball model and its birth-death sampler.

The model places unordered configurations of superballs of radius r
(default: the unit-volume radius) in a bounded region S with activity
lam. Configurations with any pair of centers closer than 2r are
forbidden. Canonical weights are

    Zhat(t) = (1/t!) integral over S^t of the packing indicator,

with Zhat(0) = 1, and the grand partition function is
Z(lam) = sum_t lam^t Zhat(t). The occupancy density is
alpha = E|X| / vol(S); it equals lam times the expected free-volume
fraction, is nondecreasing in lam, and lam vol(S) alpha'(lam) equals
Var|X|. The sampler targets this measure with single insertions and
deletions accepted at the textbook grand canonical rates.

Deterministic evaluation routes exist for one-dimensional regions
(closed forms for both the interval and the ring) and for t <= 4 in
n <= 2 (midpoint quadrature, accuracy O(1/points_per_axis)); a Monte
Carlo packing-probability estimator covers everything else and reports
its standard error.
"""
from __future__ import annotations

import itertools
import math
import warnings
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .constants import ConstantChain, compute_constant_chain
from .errors import ComputationError, InputError
from .geometry import (
    SpaceParams,
    SuperballRegion,
    TorusRegion,
    norm_batch,
)

__all__ = [
    "ModelParams",
    "Configuration",
    "PartitionEstimate",
    "canonical_partition",
    "GrandPartition",
    "grand_partition",
    "exact_moments",
    "ChainEstimate",
    "run_chain",
    "estimate_alpha_curve",
    "merge_estimates",
    "intersection_volume_mc",
    "IntersectionReport",
    "intersection_volume_check",
]

_TAIL_CUTOFF = 1e-15


@dataclass(frozen=True)
class ModelParams:
    """Region, activity and superball radius of one hard-core model."""

    space: SpaceParams
    region: object
    fugacity: float
    radius: float | None = None

    def __post_init__(self):
        if not (self.fugacity > 0) or not math.isfinite(self.fugacity):
            raise InputError(f"fugacity must be positive and finite, got {self.fugacity}")
        if self.radius is None:
            object.__setattr__(self, "radius", self.space.r_unit)
        if not (self.radius > 0):
            raise InputError(f"radius must be positive, got {self.radius}")
        if not isinstance(self.region, (SuperballRegion, TorusRegion)):
            raise InputError(f"unsupported region {self.region!r}")
        if not (0 < self.volume < math.inf):
            raise InputError("region volume must be positive and finite")
        if isinstance(self.region, TorusRegion) and self.exclusion > self.region.side / 2:
            warnings.warn(
                "exclusion diameter exceeds half the torus side; every pair of "
                "centers interacts with its own image",
                stacklevel=2,
            )

    @property
    def exclusion(self) -> float:
        return 2.0 * self.radius

    @property
    def volume(self) -> float:
        return self.region.volume(self.space)

    def to_json(self) -> dict:
        return {
            "space": self.space.to_json(),
            "region": self.region.to_json(),
            "fugacity": self.fugacity,
            "radius": self.radius,
        }


def _pair_distance_fn(space: SpaceParams, region):
    """Distances from one point to a block of points, minimal overhead.

    Returns dists(C, y) -> 1d array of |c_i - y| with the torus minimum
    image applied when the region is a torus.
    """
    p = space.p
    n = space.n
    starts = space.blocks.starts
    single = space.blocks.m == 1
    torus = isinstance(region, TorusRegion)
    side = region.side if torus else 0.0

    def dists(C, y):
        d = C - y
        if torus:
            d -= side * np.round(d / side)
        if n == 1:
            return np.abs(d).reshape(-1)
        if p == 2.0:
            return np.sqrt(np.einsum("ij,ij->i", d, d))
        sq = d * d
        bn = np.sqrt(sq.sum(axis=1) if single else np.add.reduceat(sq, starts, axis=1))
        if single:
            return bn
        if p == 1.0:
            return bn.sum(axis=1)
        return (bn**p).sum(axis=1) ** (1.0 / p)

    return dists


def _cross_distance_fn(space: SpaceParams, region):
    """Distances between two point sets, shape (len(A), len(B))."""
    torus = isinstance(region, TorusRegion)
    side = region.side if torus else 0.0

    def dists(A, B):
        d = A[:, None, :] - B[None, :, :]
        if torus:
            d -= side * np.round(d / side)
        return norm_batch(d, space)

    return dists


@dataclass
class Configuration:
    """A hard-core state: center array of shape (t, n)."""

    centers: np.ndarray
    params: ModelParams

    def validate(self) -> float:
        """Recheck the hard-core and membership invariants exactly.

        Returns the minimum pairwise distance (inf for t < 2); raises
        ComputationError on any violation.
        """
        C = np.asarray(self.centers, dtype=np.float64).reshape(-1, self.params.space.n)
        space, region = self.params.space, self.params.region
        if len(C) and not region.contains_points(C, space).all():
            raise ComputationError("configuration has a center outside the region")
        if len(C) < 2:
            return math.inf
        cross = _cross_distance_fn(space, region)
        dmat = cross(C, C)
        iu = np.triu_indices(len(C), 1)
        dmin = float(dmat[iu].min())
        if dmin < self.params.exclusion:
            raise ComputationError(
                f"hard-core violation: pair at distance {dmin} < {self.params.exclusion}"
            )
        return dmin


def _closed_form_1d(t: int, params: ModelParams) -> float:
    """Hard rods: interval and ring partition functions.

    Interval of length L: (L - (t-1) s)_+^t / t!. Ring of circumference
    L: L (L - t s)_+^(t-1) / t!. Both count unordered configurations
    with pairwise distance >= s = 2r.
    """
    s = params.exclusion
    L = params.volume
    if t == 0:
        return 1.0
    if isinstance(params.region, TorusRegion):
        if t == 1:
            return L
        gap = L - t * s
        return L * gap ** (t - 1) / math.factorial(t) if gap > 0 else 0.0
    gap = L - (t - 1) * s
    return gap**t / math.factorial(t) if gap > 0 else 0.0


def _quad_grid(params: ModelParams, points_per_axis: int):
    """Midpoint grid restricted to the region; returns (points, weight)."""
    space, region = params.space, params.region
    n = space.n
    if isinstance(region, TorusRegion):
        lo, hi = 0.0, region.side
    else:
        lo, hi = -region.radius, region.radius
    step = (hi - lo) / points_per_axis
    axis = lo + step * (np.arange(points_per_axis) + 0.5)
    pts = np.stack(np.meshgrid(*([axis] * n), indexing="ij"), axis=-1).reshape(-1, n)
    if isinstance(region, SuperballRegion):
        pts = pts[region.contains_points(pts, space)]
    return pts, step**n


def _quadrature(t: int, params: ModelParams, points_per_axis: int | None) -> float:
    n = params.space.n
    if n > 2 or t > 4:
        raise InputError("quadrature route supports n <= 2 and t <= 4 only")
    if points_per_axis is None:
        # keep the pair/triple/quadruple counting under a fixed flop budget
        per_t = {2: 4096, 3: 420, 4: 150}
        points_per_axis = max(3, int(per_t[t] ** (1.0 / n)))
    pts, w = _quad_grid(params, points_per_axis)
    M = len(pts)
    if M == 0:
        return 0.0
    cross = _cross_distance_fn(params.space, params.region)
    ok = cross(pts, pts) >= params.exclusion
    np.fill_diagonal(ok, False)
    if t == 2:
        ordered = float(ok.sum())
    elif t == 3:
        A = ok.astype(np.float32)
        ordered = float(((A @ A) * A).sum())
    else:
        A = ok.astype(np.float32)
        total = 0.0
        ii, jj = np.nonzero(np.triu(ok, 1))
        for i, j in zip(ii, jj):
            v = A[i] * A[j]
            total += 2.0 * float(v @ A @ v)
        ordered = total
    return w**t * ordered / math.factorial(t)


def _mc_partition(t, params, samples, seed):
    space, region = params.space, params.region
    excl = params.exclusion
    rng = np.random.default_rng(seed)
    iu = np.triu_indices(t, 1)
    hits = 0
    done = 0
    chunk = max(1, min(samples, 200_000 // max(1, t * t)))
    torus = isinstance(region, TorusRegion)
    while done < samples:
        m = min(chunk, samples - done)
        X = region.sample(space, rng, m * t).reshape(m, t, space.n)
        d = X[:, :, None, :] - X[:, None, :, :]
        if torus:
            d -= region.side * np.round(d / region.side)
        dn = norm_batch(d, space)
        hits += int((dn[:, iu[0], iu[1]] >= excl).all(axis=1).sum())
        done += m
    phat = hits / samples
    V = params.volume
    scale = math.exp(t * math.log(V) - math.lgamma(t + 1))
    return phat * scale, scale * math.sqrt(phat * (1.0 - phat) / samples)


@dataclass(frozen=True)
class PartitionEstimate:
    t: int
    value: float
    se: float
    method: str


def canonical_partition(
    t: int,
    params: ModelParams,
    method: str = "auto",
    *,
    mc_samples: int = 200_000,
    seed: int = 0,
    points_per_axis: int | None = None,
) -> PartitionEstimate:
    """Canonical configuration integral Zhat(t) for t superballs.

    ``method`` chooses the route: "auto" prefers closed forms (t <= 1
    anywhere, any t in one dimension), then quadrature (n <= 2, t <= 4),
    then Monte Carlo. Deterministic routes report se = 0.
    """
    if not isinstance(t, (int, np.integer)) or t < 0:
        raise InputError(f"t must be a nonnegative integer, got {t!r}")
    t = int(t)
    if method not in ("auto", "closed_form", "quadrature", "mc"):
        raise InputError(f"unknown method {method!r}")

    have_closed = t <= 1 or params.space.n == 1
    if method == "closed_form" and not have_closed:
        raise InputError("no closed form for this region and t")
    if method in ("closed_form", "auto") and have_closed:
        if t == 0:
            return PartitionEstimate(t, 1.0, 0.0, "closed_form")
        if t == 1:
            return PartitionEstimate(t, params.volume, 0.0, "closed_form")
        return PartitionEstimate(t, _closed_form_1d(t, params), 0.0, "closed_form")

    if method == "quadrature" or (method == "auto" and params.space.n <= 2 and t <= 4):
        return PartitionEstimate(t, _quadrature(t, params, points_per_axis), 0.0, "quadrature")

    value, se = _mc_partition(t, params, mc_samples, seed)
    return PartitionEstimate(t, value, se, "mc")


@dataclass(frozen=True)
class GrandPartition:
    value: float
    log_value: float
    log_terms: tuple[float, ...]  # log(lam^t Zhat(t)), -inf where Zhat = 0
    t_max: int
    capacity_truncated: bool

    @property
    def terms(self) -> tuple[float, ...]:
        return tuple(math.exp(x) for x in self.log_terms)


def _auto_t_max(lam: float, V: float) -> int:
    t = 1
    while True:
        log_term = (t + 1) * (math.log(lam) + math.log(V)) - math.lgamma(t + 2)
        if log_term < math.log(_TAIL_CUTOFF):
            return t
        t += 1
        if t > 100_000:
            raise ComputationError("tail of the grand series does not fall below 1e-15")


def grand_partition(params: ModelParams, t_max: int | None = None) -> GrandPartition:
    """Z(lam) summed over deterministic canonical values.

    The truncation point must make the crude tail term
    lam^t vol^t / t! fall below 1e-15 (a Poisson bound on everything
    dropped); an explicit t_max that fails this raises ComputationError.
    Regions with no deterministic route for some needed t also raise.
    """
    lam = params.fugacity
    V = params.volume

    def exact_zhat(t):
        est = canonical_partition(t, params, "auto")
        if est.method == "mc" or est.se != 0.0:
            raise ComputationError(
                f"no deterministic route for Zhat({t}) in this region; "
                "grand_partition only composes exact terms"
            )
        return est.value

    auto = _auto_t_max(lam, V)
    if t_max is None:
        t_max = auto
    elif t_max < auto:
        log_term = (t_max + 1) * (math.log(lam) + math.log(V)) - math.lgamma(t_max + 2)
        # a vanished canonical term means everything past it is zero too
        if log_term >= math.log(_TAIL_CUTOFF) and exact_zhat(t_max + 1) > 0.0:
            raise ComputationError(
                f"tail term at t_max={t_max} is above 1e-15; use t_max >= {auto}"
            )

    log_terms = []
    truncated = False
    for t in range(t_max + 1):
        zhat = exact_zhat(t)
        log_terms.append(t * math.log(lam) + math.log(zhat) if zhat > 0 else -math.inf)
        if zhat == 0.0 and t >= 1:
            truncated = True
            break
    arr = np.array(log_terms)
    log_value = float(logsumexp(arr[np.isfinite(arr)]))
    if not log_value <= lam * V + 1e-9 * max(1.0, abs(lam * V)):
        raise ComputationError("log Z exceeded its ideal-gas ceiling lam*vol")
    return GrandPartition(
        value=float(math.exp(log_value)) if log_value < 700 else math.inf,
        log_value=log_value,
        log_terms=tuple(float(x) for x in arr),
        t_max=len(log_terms) - 1,
        capacity_truncated=truncated,
    )


def exact_moments(params: ModelParams, t_max: int | None = None) -> dict:
    """log Z, occupancy density, and count variance from exact weights."""
    gp = grand_partition(params, t_max)
    log_w = np.asarray(gp.log_terms)
    w = np.exp(log_w - gp.log_value)  # normalized, safe for any magnitude
    tvals = np.arange(len(w))
    mean = float((tvals * w).sum())
    mean2 = float((tvals**2 * w).sum())
    V = params.volume
    return {
        "log_z": gp.log_value,
        "mean_count": mean,
        "var_count": mean2 - mean**2,
        "alpha": mean / V,
        "t_max": gp.t_max,
    }


@dataclass(frozen=True)
class ChainEstimate:
    """Summary of one birth-death run.

    alpha_hat is the mean occupancy per unit volume over the recorded
    window, fv_hat the probe estimate of the free-volume fraction, and
    var_count the sample variance of the count series. Standard errors
    come from 32 batch means. Counters satisfy
    accepted_births + accepted_deaths + rejections = steps.
    """

    alpha_hat: float
    alpha_se: float
    fv_hat: float
    fv_se: float
    var_count: float
    var_count_se: float
    mean_count: float
    steps: int
    burn_in: int
    accepted_births: int
    accepted_deaths: int
    seed: int
    final_count: int
    trace: dict | None = field(default=None, compare=False, repr=False)
    final_configuration: Configuration | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not (self.alpha_hat >= 0 and 0.0 <= self.fv_hat <= 1.0):
            raise ComputationError("chain summary out of range")
        if self.rejections < 0:
            raise ComputationError("move counters went inconsistent")

    @property
    def rejections(self) -> int:
        return self.steps - self.accepted_births - self.accepted_deaths

    def to_json(self) -> dict:
        return {
            "alpha_hat": self.alpha_hat,
            "alpha_se": self.alpha_se,
            "fv_hat": self.fv_hat,
            "fv_se": self.fv_se,
            "var_count": self.var_count,
            "var_count_se": self.var_count_se,
            "mean_count": self.mean_count,
            "steps": self.steps,
            "burn_in": self.burn_in,
            "accepted_births": self.accepted_births,
            "accepted_deaths": self.accepted_deaths,
            "rejections": self.rejections,
            "seed": self.seed,
            "final_count": self.final_count,
        }


def _batch_se(series: np.ndarray, nbatch: int = 32) -> float:
    m = len(series)
    if m < 2:
        return math.inf
    if m < 2 * nbatch:
        return float(series.std(ddof=1) / math.sqrt(m))
    size = m // nbatch
    bm = series[: nbatch * size].reshape(nbatch, size).mean(axis=1)
    return float(bm.std(ddof=1) / math.sqrt(nbatch))


def _batch_var_se(series: np.ndarray, nbatch: int = 32) -> float:
    m = len(series)
    if m < 4 * nbatch:
        return math.inf
    size = m // nbatch
    bv = series[: nbatch * size].reshape(nbatch, size).var(ddof=1, axis=1)
    return float(bv.std(ddof=1) / math.sqrt(nbatch))


def _sample_one(region, space, rng):
    if isinstance(region, TorusRegion):
        return rng.random(space.n) * region.side
    R = region.radius
    while True:  # rejection from the bounding cube, deterministic draw order
        y = rng.uniform(-R, R, space.n)
        if float(norm_batch(y, space)) <= R:
            return y


class _CellIndex:
    """Uniform-grid cell list over the region's bounding box.

    Cell side >= the exclusion diameter, so any conflicting pair sits in
    the same or an adjacent cell per axis: |u_i - v_i| <= d(u, v) by
    coordinatewise monotonicity. Gathered candidates still get the exact
    distance test. Mirrors the swap-with-last deletion of the caller.
    """

    def __init__(self, space, region, exclusion):
        self.torus = isinstance(region, TorusRegion)
        if self.torus:
            self.lo, span = 0.0, region.side
        else:
            self.lo, span = -region.radius, 2.0 * region.radius
        self.ncell = max(1, int(span / exclusion))
        self.h = span / self.ncell
        self.n = space.n
        self.cells = defaultdict(list)
        self.key_of = []
        self.offsets = list(itertools.product((-1, 0, 1), repeat=space.n))

    @property
    def usable(self) -> bool:
        return self.ncell >= 3  # otherwise every cell is a candidate anyway

    def _key(self, y):
        c = ((y - self.lo) / self.h).astype(np.int64)
        np.clip(c, 0, self.ncell - 1, out=c)
        return tuple(c.tolist())

    def candidates(self, y):
        key = self._key(y)
        out = []
        for off in self.offsets:
            if self.torus:
                k = tuple((a + b) % self.ncell for a, b in zip(key, off))
            else:
                k = tuple(a + b for a, b in zip(key, off))
                if any(c < 0 or c >= self.ncell for c in k):
                    continue
            got = self.cells.get(k)
            if got:
                out.extend(got)
        return out

    def add(self, index, y):
        key = self._key(y)
        self.cells[key].append(index)
        self.key_of.append(key)

    def remove_swap(self, index, last):
        """Delete center ``index``; center ``last`` is renamed to ``index``."""
        self.cells[self.key_of[index]].remove(index)
        if last != index:
            key = self.key_of[last]
            cell = self.cells[key]
            cell[cell.index(last)] = index
            self.key_of[index] = key
        self.key_of.pop()


def run_chain(
    params: ModelParams,
    steps: int,
    burn_in: int,
    seed: int,
    *,
    fv_probes: int = 64,
    fv_stride: int = 8,
    validate_every: int = 4096,
    collect_trace: bool = False,
    cell_list_min: int = 2048,
) -> ChainEstimate:
    """Birth-death Metropolis chain for the hard-core grand ensemble.

    Each step flips a fair coin. Insertion draws a uniform point of the
    region and, when it violates no exclusion, accepts with probability
    min(1, lam V / (t+1)); deletion picks a uniform existing center and
    accepts with min(1, t / (lam V)). The chain starts empty. Counts
    are recorded after ``burn_in`` steps; free-volume probes run every
    ``fv_stride``-th recorded step with ``fv_probes`` fresh uniform
    points each. All randomness comes from one generator in a fixed
    draw order, so results are bit-for-bit reproducible from the seed.

    Every accepted insertion has passed an exact exclusion screen
    against all current centers, so the hard-core invariant holds by
    induction after every accepted move; the configuration is
    re-validated from scratch every ``validate_every`` accepted moves
    (0 disables) and always at the end. The screen goes through a
    uniform-grid cell list once the population reaches
    ``cell_list_min`` (pruning justified by coordinatewise
    monotonicity); both screens are exact, so the chain's trajectory
    does not depend on the switch point.
    """
    if not (steps > burn_in >= 0):
        raise InputError(f"need steps > burn_in >= 0, got {steps}, {burn_in}")
    space, region = params.space, params.region
    n = space.n
    V = params.volume
    lamV = params.fugacity * V
    excl = params.exclusion
    rng = np.random.default_rng(seed)
    dists = _pair_distance_fn(space, region)
    cross = _cross_distance_fn(space, region)

    cap = 64
    centers = np.empty((cap, n))
    t = 0
    births = 0
    deaths = 0
    accepted_since_check = 0
    cells = None  # built once the population first reaches cell_list_min

    def conflicted(y):
        if cells is not None:
            cand = cells.candidates(y)
            return bool(cand) and bool((dists(centers[cand], y) < excl).any())
        return t > 0 and bool((dists(centers[:t], y) < excl).any())

    recorded = steps - burn_in
    counts = np.empty(recorded, dtype=np.int64)
    fv_fracs = []
    if collect_trace:
        tr_count = np.empty(steps, dtype=np.int64)
        tr_fv = np.full(steps, -1, dtype=np.int64)
        tr_acc = np.zeros(steps, dtype=np.uint8)
        tr_birth = np.zeros(steps, dtype=np.uint8)

    for step in range(steps):
        birth = rng.random() < 0.5
        accepted = False
        if birth:
            y = _sample_one(region, space, rng)
            if not conflicted(y):
                a = lamV / (t + 1)
                if a >= 1.0 or rng.random() < a:
                    if t == cap:
                        cap *= 2
                        grown = np.empty((cap, n))
                        grown[:t] = centers[:t]
                        centers = grown
                    centers[t] = y
                    if cells is not None:
                        cells.add(t, y)
                    t += 1
                    births += 1
                    accepted = True
        elif t > 0:
            i = int(rng.integers(t))
            a = t / lamV
            if a >= 1.0 or rng.random() < a:
                centers[i] = centers[t - 1]
                if cells is not None:
                    cells.remove_swap(i, t - 1)
                t -= 1
                deaths += 1
                accepted = True

        if cells is None and t >= cell_list_min:
            built = _CellIndex(space, region, excl)
            if built.usable:
                for j in range(t):
                    built.add(j, centers[j])
                cells = built
            else:
                cell_list_min = np.inf  # region too small to subdivide

        if accepted:
            accepted_since_check += 1
            if validate_every and accepted_since_check >= validate_every:
                Configuration(centers[:t].copy(), params).validate()
                accepted_since_check = 0

        rec = step - burn_in
        fv_now = -1
        if rec >= 0:
            counts[rec] = t
            if rec % fv_stride == 0:
                probes = region.sample(space, rng, fv_probes)
                if t == 0:
                    free = fv_probes
                else:
                    free = int((cross(probes, centers[:t]).min(axis=1) >= excl).sum())
                fv_fracs.append(free / fv_probes)
                fv_now = free
        if collect_trace:
            tr_count[step] = t
            tr_fv[step] = fv_now
            tr_acc[step] = accepted
            tr_birth[step] = birth

    final = Configuration(centers[:t].copy(), params)
    final.validate()

    fv_arr = np.asarray(fv_fracs)
    counts_f = counts.astype(np.float64)
    est = ChainEstimate(
        alpha_hat=float(counts_f.mean() / V),
        alpha_se=_batch_se(counts_f) / V,
        fv_hat=float(fv_arr.mean()),
        fv_se=_batch_se(fv_arr),
        var_count=float(counts_f.var(ddof=1)),
        var_count_se=_batch_var_se(counts_f),
        mean_count=float(counts_f.mean()),
        steps=steps,
        burn_in=burn_in,
        accepted_births=births,
        accepted_deaths=deaths,
        seed=int(seed),
        final_count=t,
        trace=(
            {"count": tr_count, "fv_probe_hits": tr_fv, "accepted": tr_acc, "birth": tr_birth}
            if collect_trace
            else None
        ),
        final_configuration=final,
    )
    return est


def estimate_alpha_curve(
    params: ModelParams,
    fugacities,
    steps: int,
    burn_in: int,
    seed: int,
    **chain_kwargs,
) -> list[tuple[float, ChainEstimate]]:
    """Independent chains across an activity grid, fresh seed per point."""
    fugacities = [float(x) for x in fugacities]
    if any(x <= 0 for x in fugacities):
        raise InputError("all fugacities must be positive")
    if any(b <= a for a, b in zip(fugacities, fugacities[1:])):
        raise InputError("fugacity grid must be strictly increasing")
    child_seeds = np.random.SeedSequence(seed).generate_state(len(fugacities), dtype=np.uint64)
    out = []
    for lam, s in zip(fugacities, child_seeds):
        p = ModelParams(params.space, params.region, lam, params.radius)
        out.append((lam, run_chain(p, steps, burn_in, int(s), **chain_kwargs)))
    return out


def merge_estimates(estimates: list[ChainEstimate]) -> ChainEstimate:
    """Pool independent equal-length replicas into one summary.

    Point estimates average with equal weight; standard errors combine
    as for a mean of independent estimates. Counters add up; the seed
    reported is the first replica's.
    """
    if not estimates:
        raise InputError("nothing to merge")
    if len({e.steps for e in estimates}) > 1 or len({e.burn_in for e in estimates}) > 1:
        raise InputError("replicas must share steps and burn_in")
    k = len(estimates)

    def pool(vals, ses):
        return float(np.mean(vals)), float(np.sqrt(np.sum(np.square(ses))) / k)

    a, a_se = pool([e.alpha_hat for e in estimates], [e.alpha_se for e in estimates])
    f, f_se = pool([e.fv_hat for e in estimates], [e.fv_se for e in estimates])
    v, v_se = pool([e.var_count for e in estimates], [e.var_count_se for e in estimates])
    return ChainEstimate(
        alpha_hat=a,
        alpha_se=a_se,
        fv_hat=f,
        fv_se=f_se,
        var_count=v,
        var_count_se=v_se,
        mean_count=float(np.mean([e.mean_count for e in estimates])),
        steps=sum(e.steps for e in estimates),
        burn_in=estimates[0].burn_in,
        accepted_births=sum(e.accepted_births for e in estimates),
        accepted_deaths=sum(e.accepted_deaths for e in estimates),
        seed=estimates[0].seed,
        final_count=estimates[-1].final_count,
    )


def intersection_volume_mc(
    space: SpaceParams, u, samples: int, seed: int
) -> tuple[float, float]:
    """MC volume of B(u, 2 r_unit) cap B(0, |u|) with its standard error.

    Sampling happens inside B(0, |u|); u = 0 gives exactly (0, 0).
    """
    u = np.asarray(u, dtype=np.float64)
    nu = float(norm_batch(u, space))
    if nu == 0.0:
        return 0.0, 0.0
    rng = np.random.default_rng(seed)
    ball = SuperballRegion(nu)
    pts = ball.sample(space, rng, samples)
    inside = norm_batch(pts - u, space) <= 2.0 * space.r_unit
    frac = float(inside.mean())
    vol_outer = (nu / space.r_unit) ** space.n
    return vol_outer * frac, vol_outer * math.sqrt(frac * (1 - frac) / samples)


@dataclass(frozen=True)
class IntersectionReport:
    p: float
    n: int
    c_p: float
    records: tuple[dict, ...]
    all_ok: bool
    containment_ok: bool


def intersection_volume_check(
    space: SpaceParams,
    trials: int,
    seed: int,
    *,
    samples_per_trial: int = 20_000,
    chain: ConstantChain | None = None,
) -> IntersectionReport:
    """Random centers u in B(0, 2 r_unit): test the c_p^n volume bound.

    For each u the Monte Carlo intersection volume must satisfy
    vol <= c_p^n + 3 se. Whenever |u| >= x_p r_unit, the sampled
    intersection points are additionally required to lie in
    B(u/2, c'_p r_unit), the containment behind the bound.
    """
    if space.n > 8:
        raise InputError("intersection check supports n <= 8")
    if chain is None:
        chain = compute_constant_chain(space.p)
    r = space.r_unit
    bound = chain.c_p**space.n
    rng = np.random.default_rng(seed)
    us = SuperballRegion(2.0 * r).sample(space, rng, trials)
    sub_seeds = np.random.SeedSequence(seed).generate_state(trials, dtype=np.uint64)

    records = []
    all_ok = True
    containment_ok = True
    for u, s in zip(us, sub_seeds):
        nu = float(norm_batch(u, space))
        vol, se = intersection_volume_mc(space, u, samples_per_trial, int(s))
        ok = vol <= bound + 3.0 * se
        cont = True
        if nu >= chain.x_p * r:
            # recheck the two-ball containment on the sampled points
            sub = np.random.default_rng(int(s))
            pts = SuperballRegion(nu).sample(space, sub, samples_per_trial)
            in_lens = norm_batch(pts - u, space) <= 2.0 * r
            if in_lens.any():
                d_mid = norm_batch(pts[in_lens] - u / 2.0, space)
                cont = bool((d_mid <= chain.c_prime * r * (1 + 1e-12)).all())
        records.append(
            {
                "u_norm": nu,
                "volume": vol,
                "se": se,
                "ok": ok,
                "containment_checked": nu >= chain.x_p * r,
                "containment_ok": cont,
            }
        )
        all_ok &= ok
        containment_ok &= cont
    return IntersectionReport(
        p=space.p,
        n=space.n,
        c_p=chain.c_p,
        records=tuple(records),
        all_ok=all_ok,
        containment_ok=containment_ok,
    )
