"""Finite atomic probability measures on the real line."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import EmptyMeasure, InvalidSplit, NegativeWeight, OutOfRange

__all__ = [
    "TargetMeasure",
    "from_atoms",
    "mean",
    "mass_geq",
    "mass_gt",
    "cdf",
    "quantile_split",
    "pushforward",
    "reflect",
    "shift",
    "discretize",
    "read_atoms",
    "parse_atoms",
]

# atoms whose weight falls below this after a split are dropped
_ZERO_WEIGHT = 1e-14


@dataclass(frozen=True)
class TargetMeasure:
    """Atomic probability measure with strictly increasing support.

    Parameters
    ----------
    values : ndarray
        Atom locations, strictly increasing.
    weights : ndarray
        Positive weights summing to one.

    Notes
    -----
    Build instances through :func:`from_atoms`, which sorts, merges
    duplicates and normalises. The arrays are made read-only.
    """

    values: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if v.size == 0:
            raise EmptyMeasure("a measure needs at least one atom")
        if v.shape != w.shape or v.ndim != 1:
            raise ValueError("values and weights must be 1-d arrays of equal length")
        if not np.all(np.isfinite(v)):
            raise ValueError("atom values must be finite")
        if np.any(~np.isfinite(w)) or np.any(w <= 0):
            raise NegativeWeight("atom weights must be positive")
        if np.any(np.diff(v) <= 0):
            raise ValueError("atom values must be strictly increasing")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to one")
        v.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "weights", w)

    @property
    def support_lo(self) -> float:
        return float(self.values[0])

    @property
    def support_hi(self) -> float:
        return float(self.values[-1])

    @property
    def atoms(self) -> list[tuple[float, float]]:
        return [(float(x), float(p)) for x, p in zip(self.values, self.weights)]

    def __len__(self) -> int:
        return self.values.size

    def __repr__(self) -> str:
        body = ", ".join(f"({x:.6g}, {p:.6g})" for x, p in self.atoms)
        return f"TargetMeasure([{body}])"


def from_atoms(pairs: Iterable[tuple[float, float]]) -> TargetMeasure:
    """Build a measure from ``(value, weight)`` pairs.

    Pairs are sorted by value, weights of equal values are added and the
    result is normalised to total mass one.

    Raises
    ------
    EmptyMeasure
        If no pairs are given.
    NegativeWeight
        If any weight is not strictly positive.
    """
    pairs = [(float(x), float(w)) for x, w in pairs]
    if not pairs:
        raise EmptyMeasure("a measure needs at least one atom")
    v = np.array([x for x, _ in pairs])
    w = np.array([p for _, p in pairs])
    if np.any(~np.isfinite(w)) or np.any(w <= 0):
        raise NegativeWeight("atom weights must be positive")
    if not np.all(np.isfinite(v)):
        raise ValueError("atom values must be finite")
    order = np.argsort(v, kind="stable")
    v, w = v[order], w[order]
    uniq, start = np.unique(v, return_index=True)
    merged = np.add.reduceat(w, start)
    return TargetMeasure(uniq, merged / merged.sum())


def mean(mu: TargetMeasure) -> float:
    """Mean of ``mu``; exactly zero for numerically centred measures."""
    m = float(np.dot(mu.values, mu.weights))
    scale = max(1.0, float(np.max(np.abs(mu.values))))
    return 0.0 if abs(m) <= 1e-12 * scale else m


def mass_geq(mu: TargetMeasure, x: float) -> float:
    """Mass of the closed upper tail ``[x, inf)``."""
    k = np.searchsorted(mu.values, x, side="left")
    return float(mu.weights[k:].sum())


def mass_gt(mu: TargetMeasure, x: float) -> float:
    """Mass of the open upper tail ``(x, inf)``."""
    k = np.searchsorted(mu.values, x, side="right")
    return float(mu.weights[k:].sum())


def cdf(mu: TargetMeasure, x) -> np.ndarray:
    """Distribution function ``mu((-inf, x])``, vectorised over ``x``."""
    c = np.concatenate([[0.0], np.cumsum(mu.weights)])
    c[-1] = 1.0
    return c[np.searchsorted(mu.values, np.asarray(x, dtype=float), side="right")]


def quantile_split(
    mu: TargetMeasure, p: float, u: float, tol: float = 1e-12
) -> tuple[TargetMeasure, TargetMeasure]:
    """Split ``mu`` into its upper ``p``-quantile and lower remainder.

    The upper part keeps the mass of ``(u, inf)`` plus whatever share of
    an atom at ``u`` is needed to reach total mass ``p``; the lower part
    keeps the rest. Both parts are renormalised, so that
    ``p * mu_plus + (1 - p) * mu_minus == mu``.

    Parameters
    ----------
    mu : TargetMeasure
    p : float
        Upper mass, strictly between 0 and 1.
    u : float
        Split point with ``mu((u, inf)) <= p <= mu([u, inf))``.
    tol : float
        Slack allowed in the bracketing condition.

    Returns
    -------
    mu_plus, mu_minus : TargetMeasure

    Raises
    ------
    InvalidSplit
        If ``p`` is outside ``(0, 1)`` or does not bracket ``u``.
    """
    if not 0.0 < p < 1.0:
        raise InvalidSplit(f"split mass must lie in (0, 1), got {p!r}")
    above = mass_gt(mu, u)
    at_or_above = mass_geq(mu, u)
    if not (above - tol <= p <= at_or_above + tol):
        raise InvalidSplit(
            f"p = {p!r} is not in [mu((u,inf)), mu([u,inf))] = [{above!r}, {at_or_above!r}]"
        )
    below = 1.0 - at_or_above
    v, w = mu.values, mu.weights
    upper = [(x, q / p) for x, q in zip(v, w) if x > u]
    lower = [(x, q / (1.0 - p)) for x, q in zip(v, w) if x < u]
    w_up = min(1.0, max(0.0, 1.0 - above / p))
    w_lo = min(1.0, max(0.0, 1.0 - below / (1.0 - p)))
    if w_up > _ZERO_WEIGHT:
        upper.append((float(u), w_up))
    if w_lo > _ZERO_WEIGHT:
        lower.append((float(u), w_lo))
    return from_atoms(upper), from_atoms(lower)


def reflect(mu: TargetMeasure) -> TargetMeasure:
    """Law of ``-X`` for ``X ~ mu``."""
    return TargetMeasure(-mu.values[::-1].copy(), mu.weights[::-1].copy())


def shift(mu: TargetMeasure, d: float) -> TargetMeasure:
    """Law of ``X + d`` for ``X ~ mu``."""
    return from_atoms(zip(mu.values + d, mu.weights))


def pushforward(mu_x: TargetMeasure, st) -> TargetMeasure:
    """Image of ``mu_x`` under the scale map of a :class:`ScaleTable`.

    Raises
    ------
    OutOfRange
        If an atom lies outside the tabulated grid.
    """
    y = st.evaluate(mu_x.values)
    return from_atoms(zip(np.atleast_1d(y), mu_x.weights))


def discretize(dist, n_atoms: int) -> TargetMeasure:
    """Equal-weight atoms at the mid-point quantiles of a continuous law.

    Parameters
    ----------
    dist : frozen ``scipy.stats`` distribution
    n_atoms : int
        Number of atoms.
    """
    if n_atoms < 1:
        raise ValueError("n_atoms must be positive")
    q = (np.arange(n_atoms) + 0.5) / n_atoms
    x = np.asarray(dist.ppf(q), dtype=float)
    if not np.all(np.isfinite(x)):
        raise OutOfRange("quantile discretisation produced non-finite atoms")
    return from_atoms(zip(x, np.full(n_atoms, 1.0 / n_atoms)))


def parse_atoms(lines: Iterable[str]) -> TargetMeasure:
    """Parse ``value weight`` lines; ``#`` starts a comment."""
    pairs = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'value weight', got {raw.strip()!r}")
        try:
            pairs.append((float(parts[0]), float(parts[1])))
        except ValueError:
            raise ValueError(f"line {lineno}: not a number in {raw.strip()!r}") from None
    return from_atoms(pairs)


def read_atoms(path: str | Path) -> TargetMeasure:
    """Read an atom file (one ``value weight`` pair per line)."""
    with open(path, encoding="utf-8") as fh:
        return parse_atoms(fh)

