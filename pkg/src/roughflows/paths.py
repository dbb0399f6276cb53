"""Weak geometric Hölder p-rough paths and their concrete constructors.

A rough path here is a two-parameter family of group-like increments in the
tensor algebra truncated at level [p], multiplicative in the Chen sense:
the increment over [s, t] equals (increment over [s, u]) * (increment over
[u, t]), earlier window on the left.  Three deterministic constructors ship:
the canonical lift of a piecewise-linear path, the pure-area path, and
one-parameter subgroups through a fixed Lie element.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tensor import (
    GroupLikeElement,
    LieElement,
    TensorElement,
    level_norms,
    lie_defect,
    tensor_exp,
    tensor_mul,
)


@dataclass(frozen=True)
class HolderExponent:
    """Hölder scale p > 2; associated tensors are truncated at level floor(p)."""

    p: float

    def __post_init__(self):
        if not self.p > 2:
            raise ValueError(f"need p > 2, got p={self.p}")

    @property
    def level(self) -> int:
        return math.floor(self.p)

    @property
    def sewing_exponent(self) -> float:
        """The approximate-flow exponent ([p]+1)/p, always > 1."""
        return (self.level + 1) / self.p


class SampledPath:
    """Piecewise-linear path through sample points: times (N,), points (N, d)."""

    def __init__(self, times, points):
        times = np.ascontiguousarray(times, dtype=float)
        points = np.ascontiguousarray(points, dtype=float)
        if times.ndim != 1 or points.ndim != 2 or len(times) != len(points):
            raise ValueError("times must be (N,), points (N, d) with matching N")
        if len(times) < 2:
            raise ValueError("need at least two samples")
        if not np.all(np.diff(times) > 0):
            raise ValueError("times must be strictly increasing")
        times.flags.writeable = False
        points.flags.writeable = False
        self.times = times
        self.points = points

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def t_min(self) -> float:
        return float(self.times[0])

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def point_at(self, t: float) -> np.ndarray:
        """Linear interpolation; t must lie within the sampled window."""
        if t < self.times[0] or t > self.times[-1]:
            raise ValueError(f"t={t} outside sampled window [{self.times[0]}, {self.times[-1]}]")
        out = np.empty(self.d)
        for j in range(self.d):
            out[j] = np.interp(t, self.times, self.points[:, j])
        return out

    @classmethod
    def from_csv(cls, path) -> "SampledPath":
        """Read "t,x1,...,xd" CSV."""
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1:])

    def to_csv(self, path):
        header = "t," + ",".join(f"x{j + 1}" for j in range(self.d))
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for t, x in zip(self.times, self.points):
                fh.write(",".join(repr(float(v)) for v in (t, *x)) + "\n")


def signature_of_segment(path: SampledPath, s: float, t: float, level: int) -> GroupLikeElement:
    """Truncated signature of the piecewise-linear path over [s, t].

    Chen product of exponentials of the straight-piece increments, earliest
    piece leftmost; multiplicative across any intermediate split point.
    """
    if s > t:
        raise ValueError(f"need s <= t, got s={s}, t={t}")
    if s < path.t_min or t > path.horizon:
        raise ValueError(
            f"[{s}, {t}] outside path window [{path.t_min}, {path.horizon}]"
        )
    d = path.d
    if s == t:
        return GroupLikeElement.wrap(TensorElement.unit(d, level))
    # breakpoints: s, interior sample times, t
    inner = path.times[(path.times > s) & (path.times < t)]
    knots = np.concatenate(([s], inner, [t]))
    sig = TensorElement.unit(d, level)
    prev = path.point_at(knots[0])
    for knot in knots[1:]:
        cur = path.point_at(knot)
        step = tensor_exp(TensorElement.from_vector(cur - prev, level))
        sig = tensor_mul(sig, step)
        prev = cur
    return GroupLikeElement.wrap(sig)


class RoughPath:
    """Group-valued increment family X_(s,t) at level floor(p) on [t_min, T]."""

    def __init__(self, holder: HolderExponent, d: int, t_min: float, horizon: float,
                 kind: str, fn):
        if horizon <= t_min:
            raise ValueError("horizon must exceed t_min")
        self.holder = holder
        self.d = int(d)
        self.t_min = float(t_min)
        self.horizon = float(horizon)
        self.kind = kind
        self._fn = fn

    @property
    def p(self) -> float:
        return self.holder.p

    @property
    def level(self) -> int:
        return self.holder.level

    def increment(self, s: float, t: float) -> GroupLikeElement:
        """X over [s, t]; the unit element when s == t."""
        if s > t:
            raise ValueError(f"need s <= t, got s={s}, t={t}")
        if s < self.t_min or t > self.horizon:
            raise ValueError(f"[{s}, {t}] outside horizon [{self.t_min}, {self.horizon}]")
        if s == t:
            return GroupLikeElement.wrap(TensorElement.unit(self.d, self.level))
        return self._fn(s, t)


def increment(X: RoughPath, s: float, t: float) -> GroupLikeElement:
    return X.increment(s, t)


def lift_sampled_path(path: SampledPath, p: float) -> RoughPath:
    """Canonical (signature) lift of a piecewise-linear path."""
    holder = HolderExponent(p)

    def fn(s, t):
        return signature_of_segment(path, s, t, holder.level)

    return RoughPath(holder, path.d, path.t_min, path.horizon, "pwl_lift", fn)


def make_pure_area(d: int, scale: float, p: float, horizon: float = 1.0) -> RoughPath:
    """Pure-area path: no level-1 part, area scale*(t-s) in the (1,2) plane.

    Defined only at truncation level 2 ([p] = 2); there the generator is
    central, so the Chen relation holds exactly.
    """
    holder = HolderExponent(p)
    if holder.level != 2:
        raise ValueError(f"pure-area driver requires floor(p) == 2, got p={p}")
    if d < 2:
        raise ValueError("pure-area driver needs d >= 2")
    area = TensorElement.from_coeffs(d, 2, {(1, 2): 1.0, (2, 1): -1.0})

    def fn(s, t):
        return GroupLikeElement.wrap(tensor_exp(scale * (t - s) * area))

    return RoughPath(holder, d, 0.0, horizon, "pure_area", fn)


def make_log_linear(lam: TensorElement, p: float, horizon: float = 1.0,
                    lie_tol: float = 1e-10) -> RoughPath:
    """One-parameter subgroup X_(s,t) = exp((t-s) * lam) through a Lie element."""
    holder = HolderExponent(p)
    if lam.n != holder.level:
        raise ValueError(f"generator truncated at {lam.n}, but floor(p) = {holder.level}")
    if lie_defect(lam) > lie_tol:
        raise ValueError("generator is not a Lie element (Dynkin defect above tolerance)")
    lam = LieElement.wrap(lam)

    def fn(s, t):
        return GroupLikeElement.wrap(tensor_exp((t - s) * lam))

    return RoughPath(holder, lam.d, 0.0, horizon, "log_linear", fn)


@dataclass(frozen=True)
class HolderNorm:
    """Grid Hölder norm: per_level[i-1] = sup |pi_i X_(s,t)|_1 / |t-s|^(i/p)."""

    per_level: np.ndarray
    overall: float
    pairs: int


def holder_norm(X: RoughPath, pairs) -> HolderNorm:
    """Hölder norm of X restricted to a finite set of (s, t) pairs, s < t."""
    pairs = [(float(s), float(t)) for s, t in pairs]
    if not pairs:
        raise ValueError("empty grid of (s, t) pairs")
    level = X.level
    best = np.zeros(level)
    for s, t in pairs:
        if not s < t:
            raise ValueError(f"pairs need s < t, got ({s}, {t})")
        norms = level_norms(X.increment(s, t))
        dt = t - s
        for i in range(1, level + 1):
            best[i - 1] = max(best[i - 1], norms[i] / dt ** (i / X.p))
    return HolderNorm(best, float(best.max()), len(pairs))


def uniform_pair_grid(t_min: float, horizon: float, points: int = 64):
    """All ordered pairs (s, t), s < t, from a uniform mesh; default 64 points."""
    mesh = np.linspace(t_min, horizon, points)
    return [(mesh[i], mesh[j]) for i in range(points) for j in range(i + 1, points)]


def chen_defect(X: RoughPath, s: float, u: float, t: float) -> float:
    """Max-abs coefficient gap between X_(s,u) * X_(u,t) and X_(s,t)."""
    from .tensor import max_abs_diff

    composed = tensor_mul(X.increment(s, u), X.increment(u, t))
    return max_abs_diff(composed, X.increment(s, t))
