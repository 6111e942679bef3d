"""Scale functions of one-dimensional diffusions and their embeddings.

For ``dX = b(X) dt + sigma(X) dW`` the scale function

    s(x) = int_0^x exp(-int_0^y 2 b / sigma^2 du) dy

puts ``Y = s(X)`` in natural scale, i.e. makes it a time-changed Brownian
motion. Embedding a law for ``X`` reduces to embedding its image under
``s`` for ``Y``, provided the image respects the range of ``s``.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import DomainExit, OutOfRange, QuadratureOverflow
from .measure import TargetMeasure, pushforward
from .rules import StoppingRule
from .simulate import RandomStream, SampleRecord, SampleSet, monte_carlo, _program
from . import _kernels as K

__all__ = [
    "DiffusionSpec",
    "ScaleTable",
    "Case",
    "Classification",
    "scale_function",
    "classify_embeddable",
    "invert_scale",
    "euler_diffusion",
    "simulate_diffusion",
]

_EXP_LIMIT = 700.0
FINITENESS_CUTOFF = 1e-6


@dataclass(frozen=True)
class DiffusionSpec:
    """Drift, volatility and state interval of a diffusion started at 0.

    ``drift`` and ``vol`` must accept float arrays.
    """

    drift: Callable
    vol: Callable
    domain: tuple[float, float] = (-math.inf, math.inf)

    def __post_init__(self):
        lo, hi = self.domain
        if not lo < 0.0 < hi:
            raise ValueError("the state interval must contain 0 in its interior")

    def coefficients(self, x):
        x = np.asarray(x, dtype=float)
        b = np.broadcast_to(np.asarray(self.drift(x), dtype=float), x.shape)
        s = np.broadcast_to(np.asarray(self.vol(x), dtype=float), x.shape)
        return b, s


class Case(Enum):
    RECURRENT = "CaseRecurrent"
    HALF_LINE = "CaseHalfLine"
    BOUNDED = "CaseBounded"


@dataclass(frozen=True)
class Classification:
    """Shape of the open scale range and the embeddability verdict.

    ``side`` is ``"upper"`` when the range is ``(-inf, alpha)`` and
    ``"lower"`` when it is ``(alpha, inf)``.
    """

    case: Case
    side: str | None
    s_range: tuple[float, float]
    scale_mean: float
    embeddable: bool
    reason: str

    def to_text(self) -> str:
        lo, hi = self.s_range
        lines = [
            f"case: {self.case.value}" + (f"({self.side})" if self.side else ""),
            "scale_range: (%.17g, %.17g)" % (lo, hi),
            "scale_mean: %.17g" % self.scale_mean,
            f"verdict: {'embeddable' if self.embeddable else 'not-embeddable'}",
            f"reason: {self.reason}",
        ]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ScaleTable:
    """Scale function tabulated on a uniform grid that contains 0.

    Attributes
    ----------
    grid : ndarray
        ``x0 + h * arange(n)`` with 0 among the nodes.
    values, derivative : ndarray
        ``s`` and ``s'`` on the grid.
    s_range : tuple of float
        Limits of ``s`` at the ends of the state interval (may be infinite).
    spec : DiffusionSpec
    h : float
        Grid spacing; ``grid[j] == grid[0] + h * j`` up to rounding.
    """

    grid: np.ndarray
    values: np.ndarray
    derivative: np.ndarray
    s_range: tuple[float, float]
    spec: DiffusionSpec
    h: float

    @property
    def x0(self) -> float:
        return float(self.grid[0])

    def evaluate(self, x):
        """``s(x)`` by linear interpolation on the grid.

        Raises
        ------
        OutOfRange
            If ``x`` is outside the grid.
        """
        xa = np.asarray(x, dtype=float)
        if np.any(xa < self.grid[0]) or np.any(xa > self.grid[-1]):
            raise OutOfRange("abscissa outside the tabulated grid")
        out = _lin(self.values, self.x0, self.h, xa)
        return float(out) if out.ndim == 0 else out

    def invert(self, y):
        return invert_scale(self, y)

    def kernel_tables(self):
        b, s = self.spec.coefficients(self.grid)
        return (
            self.x0, self.h,
            np.ascontiguousarray(self.values), np.ascontiguousarray(self.derivative),
            np.ascontiguousarray(b, dtype=float), np.ascontiguousarray(s, dtype=float),
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("x,s\n")
        for x, v in zip(self.grid, self.values):
            buf.write("%.17g,%.17g\n" % (x, v))
        return buf.getvalue()


def _lin(tab, x0, h, x):
    r = (x - x0) / h
    j = np.clip(np.floor(r).astype(np.int64), 0, tab.size - 2)
    f = r - j
    return tab[j] + f * (tab[j + 1] - tab[j])


def _grid(lo: float, hi: float, n: int) -> tuple[np.ndarray, float]:
    h = (hi - lo) / (n - 1)
    n_lo = int(math.ceil(-lo / h - 1e-9))
    n_hi = int(math.ceil(hi / h - 1e-9))
    return h * np.arange(-n_lo, n_hi + 1, dtype=float), h


def _half_integral(y, x):
    # cumulative Simpson from 0 outward on a grid with x[0] == 0
    if x.size < 2:
        return np.zeros_like(x)
    if x.size == 2:
        return integrate.cumulative_trapezoid(y, x, initial=0.0)
    return integrate.cumulative_simpson(y, x=x, initial=0.0)


def _signed_cumulative(f, grid, zero):
    out = np.empty_like(grid)
    right = grid[zero:]
    out[zero:] = _half_integral(f[zero:], right)
    # reflect the left half so the abscissae increase
    left = -grid[: zero + 1][::-1]
    out[: zero + 1] = -_half_integral(f[: zero + 1][::-1], left)[::-1]
    out[zero] = 0.0
    return out


def _tail_limit(spec: DiffusionSpec, g: float, s_g: float, sp_g: float, edge: float) -> float:
    """Limit of ``s`` from the grid end ``g`` towards the interval end ``edge``.

    Integrates ``s'`` over blocks of geometrically growing length (or
    shrinking distance to a finite edge), extrapolates the partial sums
    with Aitken's delta-squared and declares the limit infinite when the
    partial sums exceed ``1 / FINITENESS_CUTOFF`` or stop contracting.
    """
    direction = 1.0 if edge > g else -1.0

    def rate(u):
        b, s = spec.coefficients(u)
        return float(2.0 * b / (s * s))

    def block_points():
        k = 0
        while True:
            if math.isinf(edge):
                yield g + direction * (2.0 ** k - 1.0)
            else:
                yield edge - (edge - g) * 2.0 ** (-k)
            k += 1

    pts = block_points()
    a = next(pts)
    inner = 0.0  # int_g^a of 2b/sigma^2
    total = 0.0
    sums = []
    for _ in range(80):
        b_pt = next(pts)
        if b_pt == a:
            break

        def sprime(u, a=a, inner=inner):
            e = -(inner + integrate.quad(rate, a, u, limit=200)[0])
            if e > _EXP_LIMIT:
                return math.inf
            return sp_g * math.exp(e)

        with np.errstate(all="ignore"):
            piece = abs(integrate.quad(sprime, a, b_pt, limit=200)[0])
        if not math.isfinite(piece):
            return direction * math.inf
        inner += integrate.quad(rate, a, b_pt, limit=200)[0]
        total += piece
        sums.append(total)
        if total > 1.0 / FINITENESS_CUTOFF:
            return direction * math.inf
        # blocks double in length (or halve their gap); pieces that keep
        # their size over three blocks mean a divergent tail
        if len(sums) >= 5:
            d = np.diff(sums[-5:])
            if np.all(d[1:] > 0.95 * d[:-1]):
                return direction * math.inf
        if piece <= 1e-15 * max(1.0, total):
            break
        a = b_pt
    if len(sums) >= 3:
        d1 = sums[-1] - sums[-2]
        d0 = sums[-2] - sums[-3]
        if d0 > 0 and d1 / d0 > 0.95:
            return direction * math.inf
        if d0 > d1:
            total = sums[-1] + d1 * d1 / (d0 - d1)
    return s_g + direction * total


def scale_function(
    spec: DiffusionSpec,
    lo: float | None = None,
    hi: float | None = None,
    n_grid: int = 100_000,
    points=(),
) -> ScaleTable:
    """Tabulate the scale function of ``spec``.

    Parameters
    ----------
    spec : DiffusionSpec
    lo, hi : float, optional
        Grid range; by default wide enough that ``points`` sit at least ten
        cells inside, and at least ``[-1, 1]`` clipped to the state interval.
    n_grid : int
        Approximate number of grid points.
    points : iterable of float
        Abscissae the grid must cover (target atoms, exit levels).

    Raises
    ------
    QuadratureOverflow
        If the scale density leaves the floating point range on the grid.
    """
    dlo, dhi = spec.domain
    pts = np.asarray(list(points), dtype=float)
    reach = max(1.0, 2.0 * float(np.max(np.abs(pts)))) if pts.size else 1.0
    if lo is None:
        lo = -reach
        if math.isfinite(dlo):
            lo = max(lo, dlo + 1e-3 * (0.0 - dlo))
    if hi is None:
        hi = reach
        if math.isfinite(dhi):
            hi = min(hi, dhi - 1e-3 * dhi)
    if not (dlo < lo < 0.0 < hi < dhi):
        raise ValueError("grid range must lie inside the state interval and contain 0")
    grid, h = _grid(lo, hi, n_grid)
    if pts.size:
        cell = grid[1] - grid[0]
        if pts.min() < grid[0] + 10 * cell or pts.max() > grid[-1] - 10 * cell:
            raise OutOfRange("grid does not cover the requested points with a margin")
    zero = int(np.argmin(np.abs(grid)))
    grid[zero] = 0.0
    b, s = spec.coefficients(grid)
    if np.any(~(s > 0)):
        bad = grid[np.argmax(~(s > 0))]
        raise ValueError(f"volatility must be positive, fails at x = {bad!r}")
    inner = _signed_cumulative(2.0 * b / (s * s), grid, zero)
    expo = -inner
    if np.any(expo > _EXP_LIMIT) or not np.all(np.isfinite(expo)):
        bad = np.flatnonzero((expo > _EXP_LIMIT) | ~np.isfinite(expo))
        raise QuadratureOverflow(grid[bad[np.argmin(np.abs(grid[bad]))]])
    sprime = np.exp(expo)
    values = _signed_cumulative(sprime, grid, zero)
    if np.any(np.diff(values) <= 0):
        raise ValueError("tabulated scale function is not strictly increasing")
    s_hi = _tail_limit(spec, float(grid[-1]), float(values[-1]), float(sprime[-1]), dhi)
    s_lo = _tail_limit(spec, float(grid[0]), float(values[0]), float(sprime[0]), dlo)
    for arr in (grid, values, sprime):
        arr.setflags(write=False)
    return ScaleTable(grid, values, sprime, (s_lo, s_hi), spec, h)


def invert_scale(st: ScaleTable, y):
    """Inverse of the tabulated scale function.

    Raises
    ------
    OutOfRange
        If ``y`` lies outside the tabulated values.
    """
    ya = np.asarray(y, dtype=float)
    if np.any(ya < st.values[0]) or np.any(ya > st.values[-1]):
        raise OutOfRange("value outside the tabulated range of the scale function")
    out = np.interp(ya, st.values, st.grid)
    return float(out) if out.ndim == 0 else out


def classify_embeddable(st: ScaleTable, mu_x: TargetMeasure, tol: float = 1e-8) -> Classification:
    """Decide whether ``mu_x`` can be embedded in the diffusion.

    The open scale range is the whole line (any target), a half-line
    ``(-inf, alpha)`` (targets whose scale mean is non-negative), a
    half-line ``(alpha, inf)`` (scale mean non-positive) or a bounded
    interval (scale mean zero). Sign tests allow a slack of ``tol``.
    """
    mu_y = pushforward(mu_x, st)
    m = float(np.dot(mu_y.values, mu_y.weights))
    lo, hi = st.s_range
    lo_inf, hi_inf = math.isinf(lo), math.isinf(hi)
    inside = bool(np.all(mu_y.values > lo) and np.all(mu_y.values < hi))
    if lo_inf and hi_inf:
        case, side, ok, why = Case.RECURRENT, None, True, "scale range is the whole line"
    elif lo_inf:
        case, side, ok = Case.HALF_LINE, "upper", m >= -tol
        why = "scale range bounded above: needs scale mean >= 0"
    elif hi_inf:
        case, side, ok = Case.HALF_LINE, "lower", m <= tol
        why = "scale range bounded below: needs scale mean <= 0"
    else:
        case, side, ok = Case.BOUNDED, None, abs(m) <= tol
        why = "bounded scale range: needs scale mean = 0"
    if not inside:
        ok, why = False, "target atoms outside the open scale range"
    return Classification(case, side, (lo, hi), m, bool(ok), why)


def euler_diffusion(
    st: ScaleTable,
    rule_in_scale: StoppingRule,
    dt: float,
    horizon: float,
    stream: RandomStream,
    bridge_correction: bool = True,
) -> SampleRecord:
    """One Euler path of the diffusion, stopped by a rule read in scale space.

    Returns the scale-space record with ``x_T`` set to the stopped value in
    natural coordinates.

    Raises
    ------
    DomainExit
        If the path leaves the tabulated grid before stopping.
    """
    b, M, J, cnt, status, steps, x = K.euler_one(
        *_program(rule_in_scale), stream.key, float(dt), float(horizon),
        bool(bridge_correction), False, True, *st.kernel_tables(),
    )
    if status == K.DOMAIN_EXIT:
        raise DomainExit("path left the tabulated domain before stopping")
    return SampleRecord(b, M, J, int(cnt), steps * dt, status != K.STOPPED, x)


def simulate_diffusion(
    st: ScaleTable,
    rule_in_scale: StoppingRule,
    n: int,
    master_seed: int,
    dt: float,
    horizon: float = 1e4,
    bridge: bool = True,
    workers: int = 1,
) -> SampleSet:
    """Many diffusion paths; domain exits are counted, not raised."""
    return monte_carlo(
        rule_in_scale, n, master_seed, engine="euler", dt=dt, horizon=horizon,
        bridge=bridge, workers=workers, diffusion_tables=st.kernel_tables(),
    )

