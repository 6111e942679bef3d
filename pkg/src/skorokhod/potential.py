"""Convex potential of an atomic law and its tangent geometry.

For a target ``mu`` with mean ``m`` the potential is

    c(x) = E|X - x| + |m|,

a convex, piecewise linear function with one kink per atom. Every object
the embeddings need (touch points, tangent crossings with the diagonals,
the barrier on the running maximum, the sharp bound on the law of the
maximum and the slope used by the modulus rule) is read off its support
lines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .errors import NoCrossing
from .measure import TargetMeasure, mean

__all__ = [
    "PotentialFunction",
    "TangentFrame",
    "NormalizedH",
    "build_potential",
    "eval_c",
    "left_derivative",
    "touch_point_u",
    "tangent_frame",
    "barrier_table",
    "barrier_b",
    "max_law_bound",
    "normalize_h",
    "theta_zero",
]

NEG_INF = -math.inf
POS_INF = math.inf


@dataclass(frozen=True)
class PotentialFunction:
    """Piecewise linear convex potential ``c(x) = E|X - x| + |m|``.

    Attributes
    ----------
    mu : TargetMeasure
    m : float
        Mean of ``mu``.
    xs, cs : ndarray
        Kink abscissae (the atoms) and ``c`` at those points.
    slope_left, slope_right : ndarray
        One-sided slopes at each kink; ``slope_right[i] == slope_left[i+1]``
        holds bit-for-bit.
    """

    mu: TargetMeasure
    m: float
    xs: np.ndarray
    cs: np.ndarray
    slope_left: np.ndarray
    slope_right: np.ndarray
    _tail_ge: np.ndarray  # mu([x_i, inf))
    _prefix_w: np.ndarray  # sum_{j < i} w_j
    _prefix_s: np.ndarray  # sum_{j < i} w_j x_j

    def __call__(self, x):
        return eval_c(self, x)

    @property
    def kinks(self) -> list[tuple[float, float, float, float]]:
        return list(
            zip(
                self.xs.tolist(),
                self.cs.tolist(),
                self.slope_left.tolist(),
                self.slope_right.tolist(),
            )
        )


@dataclass(frozen=True)
class TangentFrame:
    """Support line of slope ``theta`` and its crossings with ``y = +-x``.

    ``u`` is the leftmost touch point, ``z_plus`` solves ``line(z) = z`` and
    ``z_minus`` solves ``line(-z) = z``.
    """

    theta: float
    u: float
    intercept: float
    z_plus: float
    z_minus: float

    def line(self, x):
        """Evaluate the support line at ``x``."""
        return self.intercept + self.theta * np.asarray(x, dtype=float)


def build_potential(mu: TargetMeasure) -> PotentialFunction:
    """Tabulate the potential of ``mu`` at its atoms."""
    x, w = mu.values, mu.weights
    m = mean(mu)
    n = x.size
    # closed upper tails mu([x_i, inf)), accumulated from the top
    tail_ge = np.cumsum(w[::-1])[::-1].copy()
    tail_ge[0] = 1.0
    sl = 1.0 - 2.0 * tail_ge
    sr = np.empty(n)
    sr[:-1] = sl[1:]
    sr[-1] = 1.0
    prefix_w = np.concatenate([[0.0], np.cumsum(w)])
    prefix_s = np.concatenate([[0.0], np.cumsum(w * x)])
    pf = PotentialFunction(
        mu=mu,
        m=m,
        xs=x,
        cs=np.empty(0),
        slope_left=sl,
        slope_right=sr,
        _tail_ge=tail_ge,
        _prefix_w=prefix_w,
        _prefix_s=prefix_s,
    )
    cs = np.asarray(eval_c(pf, x), dtype=float)
    for arr in (cs, sl, sr):
        arr.setflags(write=False)
    object.__setattr__(pf, "cs", cs)
    return pf


def eval_c(pf: PotentialFunction, x):
    """Evaluate the potential; vectorised, exact linear tails."""
    xa = np.asarray(x, dtype=float)
    m = pf.m
    k = np.searchsorted(pf.xs, xa, side="right")
    w_lo = pf._prefix_w[k]
    s_lo = pf._prefix_s[k]
    w_hi = pf._prefix_w[-1] - w_lo
    s_hi = pf._prefix_s[-1] - s_lo
    inner = (s_hi - xa * w_hi) + (xa * w_lo - s_lo) + abs(m)
    with np.errstate(invalid="ignore"):
        out = np.where(
            xa <= pf.xs[0],
            -xa + (abs(m) + m),
            np.where(xa >= pf.xs[-1], xa + (abs(m) - m), inner),
        )
    return float(out) if out.ndim == 0 else out


def left_derivative(pf: PotentialFunction, x):
    """Left derivative ``1 - 2 mu([x, inf))``."""
    xa = np.asarray(x, dtype=float)
    k = np.searchsorted(pf.xs, xa, side="left")
    tail = np.concatenate([pf._tail_ge, [0.0]])[k]
    out = 1.0 - 2.0 * tail
    return float(out) if out.ndim == 0 else out


def touch_point_u(pf: PotentialFunction, theta: float) -> float:
    """Leftmost point where the support line of slope ``theta`` touches ``c``.

    Returns ``-inf`` for ``theta == -1`` since the left tail has that slope.
    """
    theta = float(theta)
    if not -1.0 <= theta <= 1.0:
        raise ValueError(f"slope must lie in [-1, 1], got {theta!r}")
    if theta == -1.0:
        return NEG_INF
    i = int(np.searchsorted(pf.slope_right, theta, side="left"))
    return float(pf.xs[min(i, pf.xs.size - 1)])


def _intercept(pf: PotentialFunction, theta: float, u: float) -> float:
    # exact limits on the two diagonal slopes
    if theta == -1.0:
        return abs(pf.m) + pf.m
    if theta == 1.0:
        return abs(pf.m) - pf.m
    i = int(np.searchsorted(pf.xs, u))
    return float(pf.cs[i] - theta * u)


def tangent_frame(pf: PotentialFunction, theta: float) -> TangentFrame:
    """Support line of slope ``theta`` with its touch point and crossings."""
    theta = float(theta)
    u = touch_point_u(pf, theta)
    icpt = _intercept(pf, theta, u)
    if theta < 1.0:
        z_plus = icpt / (1.0 - theta)
    else:
        z_plus = POS_INF if icpt > 0.0 else pf.mu.support_hi
    if theta > -1.0:
        z_minus = icpt / (1.0 + theta)
    else:
        z_minus = POS_INF if icpt > 0.0 else -pf.mu.support_lo
    return TangentFrame(theta=theta, u=u, intercept=icpt, z_plus=z_plus, z_minus=z_minus)


def _z_plus_at(pf: PotentialFunction, i: int, theta: float) -> float:
    if theta == -1.0:
        return max(pf.m, 0.0)
    if theta == 1.0:
        return POS_INF if pf.m < 0.0 else pf.mu.support_hi
    return float((pf.cs[i] - theta * pf.xs[i]) / (1.0 - theta))


def barrier_table(pf: PotentialFunction) -> list[tuple[float, float]]:
    """Step barrier on the running maximum.

    Returns
    -------
    list of (threshold, barrier)
        Thresholds increase from 0; entry ``k`` gives the barrier in force
        while the running maximum lies in ``[t_k, t_{k+1})``. A barrier of
        ``-inf`` means no stopping. When the mean is non-negative the last
        entry sets the barrier equal to its threshold at the top of the
        support, so reaching that level stops the path.
    """
    xs = pf.xs
    n = xs.size
    scale = max(1.0, float(np.max(np.abs(xs))), abs(pf.m))
    eps = 1e-12 * scale
    table: list[tuple[float, float]] = []
    if pf.m > 0.0:
        table.append((0.0, NEG_INF))
    lo = _z_plus_at(pf, 0, -1.0)
    for i in range(n):
        hi = _z_plus_at(pf, i, float(pf.slope_right[i]))
        if hi - lo > eps and hi > 0.0:
            start = max(lo, 0.0)
            if table and start <= table[-1][0] + eps:
                table[-1] = (table[-1][0], float(xs[i]))
            else:
                table.append((start, float(xs[i])))
        lo = hi
    if pf.m >= 0.0:
        top = pf.mu.support_hi
        if table and abs(table[-1][0] - top) <= eps:
            table[-1] = (top, top)
        else:
            table.append((top, top))
    return table


def barrier_b(pf: PotentialFunction, x: float) -> float:
    """Barrier level ``b(x)`` for a running maximum ``x > 0``.

    Left-continuous in ``x``: at a threshold the previous level is still in
    force. Beyond the top of the support the value is the top itself.
    """
    if x <= 0:
        raise ValueError("barrier is defined for positive maxima")
    table = barrier_table(pf)
    level = table[0][1]
    for t, bar in table:
        if t < x:
            level = bar
        else:
            break
    return level


def max_law_bound(pf: PotentialFunction, x: float) -> float:
    """Sharp upper bound on ``P(max B >= x)`` over minimal embeddings.

    Evaluates ``0.5 * inf_{lam < x} (c(lam) - lam) / (x - lam)`` over the
    kinks below ``x``, the limit ``lam -> -inf`` and, when ``c(x) = x``,
    the limit ``lam -> x``.
    """
    x = float(x)
    if not x > 0.0:
        raise ValueError("bound is defined for x > 0")
    best = 2.0
    below = pf.xs < x
    if np.any(below):
        lam = pf.xs[below]
        ratios = (pf.cs[below] - lam) / (x - lam)
        best = min(best, float(ratios.min()))
    if eval_c(pf, x) - x <= 0.0:
        best = min(best, 1.0 - left_derivative(pf, x))
    return min(1.0, max(0.0, 0.5 * best))


class NormalizedH:
    """Monotone envelope of ``|h|`` on each half-line, shifted to vanish at 0.

    ``h_tilde(x) = max_{y between 0 and x} |h(y)| - |h(0)|``. The running
    maximum is tabulated on a grid per half-line; at a query point the
    grid envelope is combined with ``|h|`` at the point itself, so values
    at grid nodes and at queried points are exact and peaks strictly
    between nodes are resolved to the grid spacing.

    Parameters
    ----------
    h : callable
        Scalar function accepting float arrays.
    extent : float
        Half-width of the tabulated range ``[-extent, extent]``.
    n_grid : int
        Grid points per half-line.
    points : iterable of float
        Extra abscissae added to the grid.
    """

    def __init__(
        self,
        h: Callable,
        extent: float,
        n_grid: int = 10_000,
        points: Iterable[float] = (),
    ):
        self.h = h
        self.h0 = abs(float(np.asarray(h(np.array(0.0)))))
        extra = np.array([p for p in points if np.isfinite(p)], dtype=float)
        base = np.linspace(0.0, float(extent), int(n_grid))
        self._pos = np.unique(np.concatenate([base, extra[extra >= 0]]))
        self._neg = np.unique(np.concatenate([base, -extra[extra <= 0]]))
        self._pos_env = np.maximum.accumulate(self._abs_h(self._pos))
        self._neg_env = np.maximum.accumulate(self._abs_h(-self._neg))

    def _abs_h(self, x):
        with np.errstate(all="ignore"):
            v = np.abs(np.asarray(self.h(np.asarray(x, dtype=float)), dtype=float))
        return np.broadcast_to(v, np.shape(x)).astype(float)

    def _half(self, r, nodes, env, sign):
        k = np.searchsorted(nodes, r, side="right") - 1
        at = self._abs_h(sign * r)
        at = np.where(np.isfinite(at), at, env[k])
        return np.maximum(env[k], at)

    def __call__(self, x):
        xa = np.asarray(x, dtype=float)
        r = np.abs(xa)
        pos = self._half(r, self._pos, self._pos_env, 1.0)
        neg = self._half(r, self._neg, self._neg_env, -1.0)
        out = np.where(xa >= 0, pos, neg) - self.h0
        out = np.maximum(out, 0.0)
        return float(out) if out.ndim == 0 else out


def normalize_h(
    h: Callable,
    extent: float = 1.0,
    n_grid: int = 10_000,
    points: Iterable[float] = (),
) -> NormalizedH:
    """Normalise ``h`` to be zero at 0 and monotone in ``|x|`` on each side."""
    return NormalizedH(h, extent, n_grid, points)


def theta_zero(
    pf: PotentialFunction,
    h_tilde: Callable,
    tol: float = 1e-12,
) -> TangentFrame:
    """Slope at which the upper crossing first dominates the lower one.

    Finds ``inf{theta in [-1, 1] : h(z_plus(theta)) >= h(-z_minus(theta))}``
    by bisection and snaps the result to a kink slope when within ``tol``.

    Parameters
    ----------
    pf : PotentialFunction
    h_tilde : callable
        Normalised function (see :func:`normalize_h`).
    tol : float
        Bisection tolerance on the slope.

    Raises
    ------
    NoCrossing
        If the defining set is empty.
    """

    def holds(theta: float) -> bool:
        fr = tangent_frame(pf, theta)
        return bool(h_tilde(fr.z_plus) >= h_tilde(-fr.z_minus))

    if holds(-1.0):
        return tangent_frame(pf, -1.0)
    if not holds(1.0):
        raise NoCrossing("no slope in [-1, 1] satisfies the crossing condition")
    lo, hi = -1.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if holds(mid):
            hi = mid
        else:
            lo = mid
    slopes = np.unique(np.concatenate([pf.slope_left, pf.slope_right]))
    j = int(np.argmin(np.abs(slopes - hi)))
    snap = float(slopes[j])
    if abs(snap - hi) <= 10 * tol and holds(snap):
        return tangent_frame(pf, snap)
    return tangent_frame(pf, hi)
