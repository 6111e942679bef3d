"""Statistical checks on simulated stopped paths.

Embedding correctness is measured by the Kolmogorov distance and the
Wasserstein-1 distance between the law of ``b_T`` and the target.
Optimality is measured against the sharp bound on ``P(m_T >= x)``.
Minimality is probed by two necessary conditions that can be read off
terminal records: ``gamma * P(j_T <= -gamma) -> 0`` and
``E[B_{T ^ H_x}] = 0`` for every ``x > 0`` (with the mirrored versions
for targets of positive mean).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import NoSamples, WrongOrientation
from .measure import TargetMeasure, cdf
from .potential import PotentialFunction, max_law_bound
from .simulate import SampleSet

__all__ = [
    "VerificationReport",
    "DEFAULT_GAMMAS",
    "default_x_grid",
    "ks_distance",
    "ks_two_sample",
    "wasserstein1",
    "max_law_curve",
    "max_law_sharpness",
    "minimality_diagnostic",
    "stopped_mean_check",
    "pathwise_violations",
    "disjointness_violations",
]

DEFAULT_GAMMAS = (0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0)


def default_x_grid(mu: TargetMeasure, n: int = 20) -> np.ndarray:
    """``n`` log-spaced points up to ``max(2 * support_hi, 4)``."""
    top = max(2.0 * mu.support_hi, 4.0)
    return np.geomspace(top / 64.0, top, n)


def _stopped(samples: SampleSet) -> SampleSet:
    if len(samples) == 0:
        raise NoSamples("empty sample")
    return samples.valid()


def _snap(values: np.ndarray, atoms: np.ndarray, atol: float) -> np.ndarray:
    # map values within atol of an atom onto the atom
    k = np.clip(np.searchsorted(atoms, values), 1, atoms.size - 1) if atoms.size > 1 else None
    if k is None:
        near = atoms[np.zeros(values.size, dtype=int)]
    else:
        left, right = atoms[k - 1], atoms[k]
        near = np.where(np.abs(values - left) <= np.abs(values - right), left, right)
    return np.where(np.abs(values - near) <= atol, near, values)


def ks_distance(samples: SampleSet, mu: TargetMeasure, atol: float = 1e-9) -> float:
    """Sup distance between the empirical law of ``b_T`` and ``mu``.

    Stopped values within ``atol`` of an atom count as that atom. Both
    distribution functions are right-continuous step functions, so the
    supremum is attained at one of the jump points.

    Raises
    ------
    NoSamples
        If there is no uncensored record.
    """
    s = _stopped(samples)
    b = np.sort(_snap(s.b_T, mu.values, atol))
    pts = np.union1d(b, mu.values)
    emp = np.searchsorted(b, pts, side="right") / b.size
    return float(np.max(np.abs(emp - cdf(mu, pts))))


def ks_two_sample(a: SampleSet, b: SampleSet) -> float:
    """Kolmogorov distance between the stopped-value laws of two samples."""
    return float(stats.ks_2samp(_stopped(a).b_T, _stopped(b).b_T).statistic)


def wasserstein1(samples: SampleSet, mu: TargetMeasure) -> float:
    """L1 distance between the quantile functions of ``b_T`` and ``mu``."""
    s = _stopped(samples)
    return float(stats.wasserstein_distance(s.b_T, mu.values, v_weights=mu.weights))


def max_law_curve(samples: SampleSet, x_grid, side: str = "max") -> np.ndarray:
    """Empirical ``P(m_T >= x)`` (or ``P(-j_T >= x)`` for ``side="min"``)."""
    s = _stopped(samples)
    ext = np.sort(s.m_T if side == "max" else -s.j_T)
    x = np.asarray(x_grid, dtype=float)
    return 1.0 - np.searchsorted(ext, x, side="left") / ext.size


def max_law_sharpness(
    samples: SampleSet, pf: PotentialFunction, x_grid, side: str = "max"
) -> tuple[float, list[tuple[float, float, float]]]:
    """Deviation of the empirical law of the maximum from the sharp bound.

    Returns
    -------
    max_abs_dev : float
    curve : list of (x, empirical, bound)
    """
    x = np.asarray(x_grid, dtype=float)
    emp = max_law_curve(samples, x, side)
    bound = np.array([max_law_bound(pf, xi) for xi in x])
    curve = [(float(a), float(e), float(bd)) for a, e, bd in zip(x, emp, bound)]
    return float(np.max(np.abs(emp - bound))), curve


def _orientation(mean: float | None, orientation: str | None) -> str:
    if orientation is None:
        return "upper" if (mean is not None and mean > 0) else "lower"
    if orientation not in ("lower", "upper"):
        raise ValueError("orientation must be 'lower' or 'upper'")
    if mean is not None and (
        (orientation == "lower" and mean > 0) or (orientation == "upper" and mean < 0)
    ):
        raise WrongOrientation(f"orientation {orientation!r} does not match mean {mean!r}")
    return orientation


def minimality_diagnostic(
    samples: SampleSet,
    gamma_grid=DEFAULT_GAMMAS,
    mean: float | None = None,
    orientation: str | None = None,
) -> list[tuple[float, float, float]]:
    """Tail probe ``gamma * P(j_T <= -gamma)`` on a grid of ``gamma``.

    For a minimal embedding of a target with non-positive mean the probe
    tends to 0 and ``E[b_T; j_T <= -gamma] <= -gamma P(j_T <= -gamma)``.
    With ``orientation="upper"`` (targets of positive mean) the path is
    reflected first.

    Returns
    -------
    list of (gamma, gamma * P_hat, slack)
        ``slack = -gamma P_hat - E_hat[b_T; event]``; non-negative up to
        sampling error when the inequality holds.

    Raises
    ------
    WrongOrientation
        If ``orientation`` contradicts the sign of ``mean``.
    """
    side = _orientation(mean, orientation)
    s = _stopped(samples)
    if side == "lower":
        low, val = s.j_T, s.b_T
    else:
        low, val = -s.m_T, -s.b_T
    n = low.size
    out = []
    for g in gamma_grid:
        hit = low <= -g
        p = np.count_nonzero(hit) / n
        part = float(np.sum(val[hit])) / n
        out.append((float(g), float(g * p), float(-g * p - part)))
    return out


def stopped_mean_check(
    samples: SampleSet,
    x_grid,
    mean: float | None = None,
    orientation: str | None = None,
) -> list[tuple[float, float, float]]:
    """Mean of the path stopped at ``T ^ H_x`` for each ``x > 0``.

    Uses ``B_{T ^ H_x} = x 1{m_T >= x} + b_T 1{m_T < x}`` so only terminal
    records are needed.

    Returns
    -------
    list of (x, mean estimate, standard error)
    """
    side = _orientation(mean, orientation)
    s = _stopped(samples)
    if side == "lower":
        hi, val, sgn = s.m_T, s.b_T, 1.0
    else:
        hi, val, sgn = -s.j_T, -s.b_T, -1.0
    n = hi.size
    out = []
    for x in np.asarray(x_grid, dtype=float):
        if not x > 0:
            raise ValueError("stopping levels must be positive")
        y = np.where(hi >= x, x, val)
        m = float(np.mean(y))
        se = float(np.std(y, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
        out.append((float(x), sgn * m, se))
    return out


def pathwise_violations(samples: SampleSet, xs, lams, tol: float = 1e-12) -> int:
    """Count records breaking the pathwise inequality behind the sharp bound.

    For ``lam < x`` and ``v = x`` if ``m_T >= x`` else ``b_T``::

        1{m_T >= x} <= (v + (|b_T - lam| - (b_T + lam)) / 2) / (x - lam)
    """
    s = _stopped(samples)
    bad = 0
    for x in xs:
        for lam in lams:
            if not lam < x:
                continue
            v = np.where(s.m_T >= x, x, s.b_T)
            rhs = (v + 0.5 * (np.abs(s.b_T - lam) - (s.b_T + lam))) / (x - lam)
            lhs = (s.m_T >= x).astype(float)
            bad += int(np.count_nonzero(lhs > rhs + tol))
    return bad


def disjointness_violations(samples: SampleSet, h_tilde, y: float) -> int:
    """Records on which both ``h(m_T) >= y`` and ``h(j_T) >= y`` hold."""
    s = _stopped(samples)
    up = np.asarray(h_tilde(s.m_T)) >= y
    down = np.asarray(h_tilde(s.j_T)) >= y
    return int(np.count_nonzero(up & down))


@dataclass
class VerificationReport:
    """Checks on one sample with per-check verdicts.

    ``verdicts`` maps a check name to ``(passed, value, threshold)``.
    """

    ks: float
    w1: float
    max_law_max_abs_dev: float | None
    max_law_curve: list
    minimality_curve: list
    stopped_mean_curve: list
    censored_fraction: float
    n_used: int
    verdicts: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v[0] for v in self.verdicts.values())

    def verdict_lines(self) -> list[str]:
        return [
            f"{'PASS' if ok else 'FAIL'} {name} value={val:.6g} threshold={thr:.6g}"
            for name, (ok, val, thr) in self.verdicts.items()
        ]
