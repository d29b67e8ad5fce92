"""Block mixed-norm geometry.

Vectors in R^n are split into contiguous coordinate blocks by a cut
sequence 0 = k_1 < k_2 < ... < k_{m+1} = n. The block norm takes the
Euclidean norm inside each block and combines the block norms through
an outer lp sum:

    |x| = (sum_j |x_(j)|_2^p)^(1/p)

For p = 2 this is the plain Euclidean norm regardless of the cuts; with
every block of size one it is the classical lp norm. The norm is
monotone in the absolute value of every coordinate, which several
routines here exploit (cube containment, cell pruning, torus images).

Volumes are Lebesgue. ``r_unit`` is the radius at which the norm ball
has volume exactly one; superballs of that radius are the packing
objects used elsewhere in the package.

Norms go through squared block sums without rescaling, so coordinates
should stay inside roughly [1e-150, 1e150]; packing geometry lives at
O(1) scales and the hot paths are not taxed for robustness nobody uses.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import gammaln

from .errors import InputError

__all__ = [
    "BlockSpec",
    "SpaceParams",
    "SuperballRegion",
    "TorusRegion",
    "unit_ball_volume",
    "log_unit_ball_volume",
    "r_unit",
    "norm",
    "norm_batch",
    "distance",
    "distance_batch",
    "contains",
]


@dataclass(frozen=True)
class BlockSpec:
    """Cut sequence defining the coordinate blocks.

    ``cuts`` must start at 0, end at the dimension n, and be strictly
    increasing. Block j covers coordinates cuts[j] .. cuts[j+1]-1.
    """

    cuts: tuple[int, ...]

    def __post_init__(self):
        cuts = tuple(int(c) for c in self.cuts)
        object.__setattr__(self, "cuts", cuts)
        if len(cuts) < 2:
            raise InputError("cuts needs at least two entries, got %r" % (cuts,))
        if cuts[0] != 0:
            raise InputError("cuts must start at 0, got %r" % (cuts,))
        if any(b <= a for a, b in zip(cuts, cuts[1:])):
            raise InputError("cuts must be strictly increasing, got %r" % (cuts,))

    @property
    def n(self) -> int:
        return self.cuts[-1]

    @property
    def block_dims(self) -> tuple[int, ...]:
        return tuple(b - a for a, b in zip(self.cuts, self.cuts[1:]))

    @property
    def m(self) -> int:
        """Number of blocks."""
        return len(self.cuts) - 1

    @cached_property
    def starts(self) -> np.ndarray:
        # reduceat segment starts; cached because the norm hot path uses it
        return np.asarray(self.cuts[:-1], dtype=np.intp)

    def to_json(self) -> dict:
        return {"cuts": list(self.cuts)}

    @classmethod
    def from_json(cls, obj: dict) -> "BlockSpec":
        try:
            return cls(tuple(obj["cuts"]))
        except (KeyError, TypeError) as exc:
            raise InputError(f"malformed BlockSpec encoding: {obj!r}") from exc


def log_unit_ball_volume(p: float, blocks: BlockSpec) -> float:
    """log of the Lebesgue volume of the unit ball of the block norm.

    Closed form via the Dirichlet integral: the volume factorizes over
    blocks as prod_j V_{d_j} Gamma(d_j/p + 1) / Gamma(n/p + 1) where
    V_d is the Euclidean unit-ball volume in dimension d.
    """
    p = float(p)
    if not (p >= 1.0) or not math.isfinite(p):
        raise InputError(f"p must be a finite real >= 1, got {p}")
    n = blocks.n
    lv = -gammaln(n / p + 1.0)
    for d in blocks.block_dims:
        lv += (d / 2.0) * math.log(math.pi) - gammaln(d / 2.0 + 1.0)
        lv += gammaln(d / p + 1.0)
    return float(lv)


def unit_ball_volume(p: float, blocks: BlockSpec) -> float:
    return math.exp(log_unit_ball_volume(p, blocks))


def r_unit(p: float, blocks: BlockSpec) -> float:
    """Radius of the unit-volume ball: vol(B(r_unit)) = 1."""
    return math.exp(-log_unit_ball_volume(p, blocks) / blocks.n)


@dataclass(frozen=True)
class SpaceParams:
    """Resolved norm parameters: exponent, blocks, conjugate, unit radius.

    Build through :meth:`create`. ``p`` may be any real >= 1 for norm
    and volume work; the convexity-constant machinery elsewhere is
    restricted to 1 < p <= 2 and p > 2 sets ``p_above_two`` plus a
    warning at construction.
    """

    p: float
    q: float
    blocks: BlockSpec
    r_unit: float
    p_above_two: bool = False

    @classmethod
    def create(cls, p: float, cuts) -> "SpaceParams":
        p = float(p)
        if not math.isfinite(p) or p < 1.0:
            raise InputError(f"p must be a finite real >= 1, got {p}")
        blocks = cuts if isinstance(cuts, BlockSpec) else BlockSpec(tuple(cuts))
        above = p > 2.0
        if above:
            warnings.warn(
                f"p={p} is outside (1, 2]; norms and volumes are fine but the "
                "convexity constant chain is unavailable",
                stacklevel=2,
            )
        q = p / (p - 1.0) if p > 1.0 else math.inf
        return cls(p=p, q=q, blocks=blocks, r_unit=r_unit(p, blocks), p_above_two=above)

    def __post_init__(self):
        # conjugate exponent identity and the unit-volume identity are
        # cheap to re-check and catch hand-built instances
        if abs(1.0 / self.p + (0.0 if math.isinf(self.q) else 1.0 / self.q) - 1.0) > 1e-12:
            raise InputError(f"q={self.q} is not conjugate to p={self.p}")
        vol = unit_ball_volume(self.p, self.blocks)
        if abs(vol * self.r_unit**self.n - 1.0) > 1e-9:
            raise InputError("r_unit does not normalize the unit ball volume")

    @property
    def n(self) -> int:
        return self.blocks.n

    def to_json(self) -> dict:
        return {"p": self.p, "cuts": list(self.blocks.cuts)}

    @classmethod
    def from_json(cls, obj: dict) -> "SpaceParams":
        try:
            return cls.create(obj["p"], tuple(obj["cuts"]))
        except (KeyError, TypeError) as exc:
            raise InputError(f"malformed SpaceParams encoding: {obj!r}") from exc


def norm_batch(X, space: SpaceParams) -> np.ndarray:
    """Block norm along the last axis of ``X``.

    Accepts any array shape (..., n) and returns shape (...,).
    """
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != space.n:
        raise InputError(f"vector length {X.shape[-1]} does not match n={space.n}")
    if space.p == 2.0:
        return np.sqrt(np.einsum("...i,...i->...", X, X))
    sq = X * X
    if space.blocks.m == 1:
        block = np.sqrt(sq.sum(axis=-1))
        return block
    bs = np.add.reduceat(sq, space.blocks.starts, axis=-1)
    bn = np.sqrt(bs)
    if space.p == 1.0:
        return bn.sum(axis=-1)
    return np.power(np.power(bn, space.p).sum(axis=-1), 1.0 / space.p)


def norm(x, space: SpaceParams) -> float:
    return float(norm_batch(np.asarray(x, dtype=np.float64), space))


def _min_image(diff: np.ndarray, side: float) -> np.ndarray:
    # wraps each coordinate difference into (-L/2, L/2]; the block norm is
    # coordinatewise monotone so per-coordinate wrapping minimizes it
    return diff - side * np.round(diff / side)


def distance_batch(X, y, space: SpaceParams, region=None) -> np.ndarray:
    """Distances from each row of ``X`` to the single point ``y``.

    On a torus region, the minimum-image convention applies.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    diff = X - y
    if isinstance(region, TorusRegion):
        diff = _min_image(diff, region.side)
    return norm_batch(diff, space)


def distance(x, y, space: SpaceParams, region=None) -> float:
    return float(distance_batch(np.asarray(x, dtype=np.float64), y, space, region))


def contains(center, r: float, y, space: SpaceParams, region=None) -> bool:
    """Whether ``y`` lies in the closed ball of radius r about center."""
    if r < 0:
        raise InputError(f"radius must be nonnegative, got {r}")
    return distance(center, y, space, region) <= r


@dataclass(frozen=True)
class SuperballRegion:
    """Closed ball of the block norm centered at the origin, radius R."""

    radius: float

    def __post_init__(self):
        if not (self.radius > 0) or not math.isfinite(self.radius):
            raise InputError(f"region radius must be positive, got {self.radius}")

    def volume(self, space: SpaceParams) -> float:
        return (self.radius / space.r_unit) ** space.n

    def contains_points(self, pts, space: SpaceParams) -> np.ndarray:
        return norm_batch(pts, space) <= self.radius

    def sample(self, space: SpaceParams, rng: np.random.Generator, size: int) -> np.ndarray:
        """Uniform points by rejection from the bounding cube.

        The draw sequence is deterministic for a given generator state:
        fixed-size batches are drawn until enough points are accepted.
        """
        R = self.radius
        out = np.empty((size, space.n))
        have = 0
        batch = max(64, 2 * size)
        while have < size:
            cand = rng.uniform(-R, R, size=(batch, space.n))
            keep = cand[norm_batch(cand, space) <= R]
            take = min(size - have, len(keep))
            out[have : have + take] = keep[:take]
            have += take
        return out

    def to_json(self) -> dict:
        return {"kind": "ball", "size": self.radius}


@dataclass(frozen=True)
class TorusRegion:
    """Flat torus [0, L)^n with minimum-image metric."""

    side: float

    def __post_init__(self):
        if not (self.side > 0) or not math.isfinite(self.side):
            raise InputError(f"torus side must be positive, got {self.side}")

    def volume(self, space: SpaceParams) -> float:
        return self.side**space.n

    def contains_points(self, pts, space: SpaceParams) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64)
        return ((pts >= 0.0) & (pts < self.side)).all(axis=-1)

    def sample(self, space: SpaceParams, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.random((size, space.n)) * self.side

    def to_json(self) -> dict:
        return {"kind": "torus", "size": self.side}


def region_from_json(obj: dict):
    try:
        kind = obj["kind"]
        size = float(obj["size"])
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed region encoding: {obj!r}") from exc
    if kind == "ball":
        return SuperballRegion(size)
    if kind == "torus":
        return TorusRegion(size)
    raise InputError(f"unknown region kind {kind!r}")
