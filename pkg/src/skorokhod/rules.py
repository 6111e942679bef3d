"""Executable stopping rules for Brownian motion started at 0.

Every rule is a small program of *stages*. A stage is either

``interval``
    run until the path leaves ``(lo, hi)``; each side either stops the
    rule or hands over to another stage, or
``ay``
    a barrier rule on ``w = sign * (B - origin)``: stop as soon as
    ``w <= barrier(max w)``, the maximum taken since the stage began.

This covers the maximising embedding (one ``ay`` stage), its mirror image
(``sign = -1``), the two-stage modulus rule, hitting times, first exits
and the control rules used as baselines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .errors import MeanSignError
from .measure import TargetMeasure, from_atoms, mean, quantile_split, reflect, shift
from .potential import barrier_table, build_potential, normalize_h, tangent_frame, theta_zero

__all__ = [
    "Stage",
    "StoppingRule",
    "Decision",
    "compile_tmax",
    "compile_tmin",
    "compile_tmod",
    "compile_naive",
    "hitting",
    "first_exit",
    "non_minimal_control",
    "stop_decision",
    "rule_to_text",
    "rule_from_text",
]

STOP = -1


class Decision(Enum):
    CONTINUE = "continue"
    STOP = "stop"
    ADVANCE = "advance"


@dataclass(frozen=True)
class Stage:
    """One stage of a stopping rule (see module docstring)."""

    kind: str
    lo: float = -math.inf
    hi: float = math.inf
    next_lo: int = STOP
    next_hi: int = STOP
    origin: float = 0.0
    sign: float = 1.0
    thresholds: tuple[float, ...] = ()
    barriers: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ("interval", "ay"):
            raise ValueError(f"unknown stage kind {self.kind!r}")
        if self.kind == "ay":
            thr, bar = self.thresholds, self.barriers
            if not thr or len(thr) != len(bar) or thr[0] != 0.0:
                raise ValueError("barrier table must start at threshold 0")
            if any(b > a for a, b in zip(thr[1:], thr[:-1])):
                raise ValueError("thresholds must increase")
            if any(b > a for a, b in zip(bar[1:], bar[:-1])):
                raise ValueError("barriers must be non-decreasing")
            if self.sign not in (1.0, -1.0):
                raise ValueError("sign must be +1 or -1")
        elif self.lo > self.hi:
            raise ValueError("interval stage needs lo <= hi")

    def barrier_at(self, wmax: float) -> float:
        """Barrier in force for a stage-local maximum ``wmax`` of ``w``."""
        k = int(np.searchsorted(self.thresholds, wmax, side="right")) - 1
        return self.barriers[max(k, 0)]


@dataclass(frozen=True)
class StoppingRule:
    """Compiled stopping rule.

    Attributes
    ----------
    kind : str
        One of ``ExtendedAY``, ``ReflectedAY``, ``TwoStageMod``,
        ``Hitting``, ``FirstExit``, ``NonMinimalControl``, ``NaiveAY``.
    stages : tuple of Stage
        Stage 0 is entered at time 0.
    target : TargetMeasure or None
        Law the rule is meant to embed, when there is one.
    info : dict
        Construction details (tangent frame, split masses, ...).
    notes : tuple of str
        Caveats attached at compile time.
    """

    kind: str
    stages: tuple[Stage, ...]
    target: TargetMeasure | None = None
    info: dict = field(default_factory=dict, compare=False)
    notes: tuple[str, ...] = ()

    def program(self):
        """Flat array encoding consumed by the simulation kernels."""
        n = len(self.stages)
        kind = np.array([0 if s.kind == "interval" else 1 for s in self.stages], np.int64)
        lo = np.array([s.lo for s in self.stages], float)
        hi = np.array([s.hi for s in self.stages], float)
        nlo = np.array([s.next_lo for s in self.stages], np.int64)
        nhi = np.array([s.next_hi for s in self.stages], np.int64)
        origin = np.array([s.origin for s in self.stages], float)
        sign = np.array([s.sign for s in self.stages], float)
        tstart = np.zeros(n, np.int64)
        tlen = np.zeros(n, np.int64)
        thr: list[float] = []
        bar: list[float] = []
        for i, s in enumerate(self.stages):
            tstart[i] = len(thr)
            tlen[i] = len(s.thresholds)
            thr.extend(s.thresholds)
            bar.extend(s.barriers)
        return (
            kind, lo, hi, nlo, nhi, origin, sign, tstart, tlen,
            np.array(thr, float), np.array(bar, float),
        )

    @property
    def levels(self) -> list[float]:
        """Finite absolute levels at which the rule can stop or switch."""
        out: set[float] = set()
        for s in self.stages:
            if s.kind == "interval":
                out.update(v for v in (s.lo, s.hi) if math.isfinite(v))
            else:
                out.update(
                    s.origin + s.sign * v
                    for v in (*s.thresholds, *s.barriers)
                    if math.isfinite(v)
                )
        return sorted(out)


def _ay_stage(table, origin=0.0, sign=1.0) -> Stage:
    thr = tuple(float(t) for t, _ in table)
    bar = tuple(float(b) for _, b in table)
    return Stage("ay", origin=float(origin), sign=float(sign), thresholds=thr, barriers=bar)


def hitting(level: float) -> StoppingRule:
    """First hitting time of ``level``."""
    level = float(level)
    if level < 0:
        st = Stage("interval", lo=level)
    elif level > 0:
        st = Stage("interval", hi=level)
    else:
        st = Stage("interval", lo=0.0, hi=0.0)
    return StoppingRule("Hitting", (st,), from_atoms([(level, 1.0)]), {"level": level})


def first_exit(a: float, b: float) -> StoppingRule:
    """First exit from ``(a, b)`` with ``a <= 0 <= b``; ends may be infinite."""
    a, b = float(a), float(b)
    if not a <= 0.0 <= b:
        raise ValueError("the exit interval must contain the starting point 0")
    if math.isinf(a) and math.isinf(b):
        raise ValueError("at least one end must be finite")
    target = None
    if math.isfinite(a) and math.isfinite(b) and b > a:
        target = from_atoms([(a, b / (b - a)), (b, -a / (b - a))] if a < 0 < b else [(0.0, 1.0)])
    elif math.isfinite(a) != math.isfinite(b):
        target = from_atoms([(a if math.isfinite(a) else b, 1.0)])
    return StoppingRule("FirstExit", (Stage("interval", lo=a, hi=b),), target, {"a": a, "b": b})


def non_minimal_control(waypoint: float = 1.0, a: float = -1.0, b: float = 1.0) -> StoppingRule:
    """Reach ``waypoint > 0``, come back to 0, then exit ``(a, b)``.

    Embeds the same law as the plain first exit but is not minimal; it
    serves as a negative control for the minimality diagnostics.
    """
    if not waypoint > 0:
        raise ValueError("waypoint must be positive")
    payload = first_exit(a, b)
    stages = (
        Stage("interval", hi=float(waypoint), next_hi=1),
        Stage("interval", lo=0.0, next_lo=2),
        payload.stages[0],
    )
    info = {"waypoint": float(waypoint), "a": float(a), "b": float(b)}
    return StoppingRule("NonMinimalControl", stages, payload.target, info)


def compile_tmax(mu: TargetMeasure) -> StoppingRule:
    """Embedding of ``mu`` maximising the law of the running maximum.

    The rule stops when the path falls to the barrier of its running
    maximum. For a negative mean the barrier starts at the lowest atom;
    for a positive mean there is no barrier until the maximum reaches the
    mean.
    """
    if len(mu) == 1:
        return hitting(mu.support_lo)
    pf = build_potential(mu)
    table = barrier_table(pf)
    return StoppingRule("ExtendedAY", (_ay_stage(table),), mu, {"table": table, "mean": pf.m})


def compile_tmin(mu: TargetMeasure) -> StoppingRule:
    """Embedding of ``mu`` maximising the law of ``-min B``.

    The mirror image of :func:`compile_tmax` for the reflected target.
    """
    if len(mu) == 1:
        return hitting(mu.support_lo)
    ref = reflect(mu)
    table = barrier_table(build_potential(ref))
    return StoppingRule(
        "ReflectedAY", (_ay_stage(table, 0.0, -1.0),), mu, {"table": table, "mean": mean(mu)}
    )


def compile_naive(mu: TargetMeasure) -> StoppingRule:
    """Wait for the mean, then run the centred barrier rule from there."""
    m = mean(mu)
    if len(mu) == 1:
        return hitting(mu.support_lo)
    if m == 0.0:
        rule = compile_tmax(mu)
        return StoppingRule("NaiveAY", rule.stages, mu, rule.info)
    centred = shift(mu, -m)
    table = barrier_table(build_potential(centred))
    first = Stage("interval", lo=m, next_lo=1) if m < 0 else Stage("interval", hi=m, next_hi=1)
    return StoppingRule("NaiveAY", (first, _ay_stage(table, m, 1.0)), mu, {"table": table, "mean": m})


def compile_tmod(
    mu: TargetMeasure,
    h: Callable,
    n_grid: int = 10_000,
) -> StoppingRule:
    """Minimal embedding of ``mu`` maximising the law of ``sup |h(B)|``.

    Run to the first exit of ``(-z_minus, z_plus)`` taken at the slope
    ``theta0`` that balances the normalised ``h`` at the two exit levels.
    From the upper level embed the upper quantile part of ``mu`` with the
    maximising rule; from the lower level embed the lower part with the
    mirrored rule.

    Parameters
    ----------
    mu : TargetMeasure
        Target with non-negative mean.
    h : callable
        Function of interest, evaluated on float arrays.
    n_grid : int
        Grid points per half-line for normalising ``h``.

    Raises
    ------
    MeanSignError
        If the mean of ``mu`` is negative; reflect the problem instead.
    """
    m = mean(mu)
    if m < 0:
        raise MeanSignError("the modulus rule is built for targets with non-negative mean")
    if len(mu) == 1:
        return hitting(mu.support_lo)
    pf = build_potential(mu)
    points = list(mu.values)
    for s in np.unique(np.concatenate([pf.slope_left, pf.slope_right])):
        fr = tangent_frame(pf, float(s))
        points.extend(v for v in (fr.z_plus, -fr.z_minus) if math.isfinite(v))
    extent = 4.0 * max(1.0, float(np.max(np.abs(points))))
    h_tilde = normalize_h(h, extent, n_grid, points)
    frame = theta_zero(pf, h_tilde)
    zp, zm = frame.z_plus, frame.z_minus
    if math.isinf(zm):
        p = 1.0
    else:
        p = zm / (zp + zm)
    if p >= 1.0:
        mu_plus, mu_minus = mu, None
    elif p <= 0.0:
        mu_plus, mu_minus = None, mu
    else:
        mu_plus, mu_minus = quantile_split(mu, p, frame.u, tol=1e-9)

    stages = [Stage("interval", lo=-zm, hi=zp, next_lo=STOP, next_hi=STOP)]
    next_hi = next_lo = STOP
    if mu_plus is not None:
        up = shift(mu_plus, -zp)
        if len(up) == 1:
            table = [(0.0, float(up.values[0]))]
        else:
            table = barrier_table(build_potential(up))
        next_hi = len(stages)
        stages.append(_ay_stage(table, zp, 1.0))
    if mu_minus is not None:
        # w = -(B + z_minus) runs the maximising rule for the law of -(X + z_minus)
        down = shift(reflect(mu_minus), -zm)
        if len(down) == 1:
            table = [(0.0, float(down.values[0]))]
        else:
            table = barrier_table(build_potential(down))
        next_lo = len(stages)
        stages.append(_ay_stage(table, -zm, -1.0))
    stages[0] = Stage("interval", lo=-zm, hi=zp, next_lo=next_lo, next_hi=next_hi)
    notes = ("covered-by-remark-only",) if m == 0.0 else ()
    info = {
        "theta0": frame.theta,
        "u": frame.u,
        "z_plus": zp,
        "z_minus": zm,
        "p": p,
        "mu_plus": mu_plus,
        "mu_minus": mu_minus,
        "h_tilde": h_tilde,
    }
    return StoppingRule("TwoStageMod", tuple(stages), mu, info, notes)


def stop_decision(rule: StoppingRule, state) -> Decision:
    """Decide what the rule does in ``state = (value, max, min, stage)``.

    ``max`` and ``min`` are the extremes of the path since the current
    stage was entered (for single-stage rules, since time 0).
    """
    v, hi_, lo_, k = state
    st = rule.stages[int(k)]
    if st.kind == "interval":
        if v <= st.lo:
            nxt = st.next_lo
        elif v >= st.hi:
            nxt = st.next_hi
        else:
            return Decision.CONTINUE
        return Decision.STOP if nxt == STOP else Decision.ADVANCE
    if st.sign > 0:
        w, wmax = v - st.origin, hi_ - st.origin
    else:
        w, wmax = st.origin - v, st.origin - lo_
    return Decision.STOP if w <= st.barrier_at(wmax) else Decision.CONTINUE


def _fmt(x: float) -> str:
    return "%.17g" % x


def rule_to_text(rule: StoppingRule) -> str:
    """Plain-text table form of a rule (17 significant digits)."""
    lines = [f"rule {rule.kind}"]
    for i, s in enumerate(rule.stages):
        if s.kind == "interval":
            lines.append(
                f"stage {i} interval lo={_fmt(s.lo)} hi={_fmt(s.hi)} "
                f"next_lo={s.next_lo} next_hi={s.next_hi}"
            )
        else:
            lines.append(f"stage {i} ay origin={_fmt(s.origin)} sign={_fmt(s.sign)}")
            lines.append("threshold,barrier")
            lines.extend(f"{_fmt(t)},{_fmt(b)}" for t, b in zip(s.thresholds, s.barriers))
    return "\n".join(lines) + "\n"


def rule_from_text(text: str) -> StoppingRule:
    """Inverse of :func:`rule_to_text` (construction details are not kept)."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("rule "):
        raise ValueError("missing 'rule' header")
    kind = lines[0].split(None, 1)[1]
    stages: list[Stage] = []
    i = 1
    while i < len(lines):
        head = lines[i].split()
        if head[0] != "stage":
            raise ValueError(f"unexpected line {lines[i]!r}")
        fields = dict(item.split("=", 1) for item in head[3:])
        if head[2] == "interval":
            stages.append(
                Stage(
                    "interval",
                    lo=float(fields["lo"]),
                    hi=float(fields["hi"]),
                    next_lo=int(fields["next_lo"]),
                    next_hi=int(fields["next_hi"]),
                )
            )
            i += 1
            continue
        i += 2  # skip the column header
        rows = []
        while i < len(lines) and not lines[i].startswith("stage"):
            t, b = lines[i].split(",")
            rows.append((float(t), float(b)))
            i += 1
        stages.append(_ay_stage(rows, float(fields["origin"]), float(fields["sign"])))
    return StoppingRule(kind, tuple(stages))
