"""Monte Carlo engines for compiled stopping rules.

Two engines share the stage programs of :mod:`skorokhod.rules`:

``exact``
    event-driven: inside every segment where the rule's levels are fixed
    the exit side and the running extremum before the exit are drawn from
    their closed-form laws, so stopped values and extremes carry no
    discretisation error;
``euler``
    Gaussian increments on a time grid with Brownian-bridge monitoring of
    levels and extremes. Far from every level, consecutive steps are
    merged into one Gaussian increment of the summed variance, which
    leaves the law of the monitored path unchanged.

Path ``i`` draws from a counter-based stream keyed by
``(master_seed, i)``, so results do not depend on the number of workers.
"""

from __future__ import annotations

import io
import math
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from . import _kernels as K
from .errors import InvalidStep, NoSamples, UnboundedSegment
from .rules import StoppingRule

__all__ = [
    "RandomStream",
    "SampleRecord",
    "SampleSet",
    "exact_walk",
    "euler_path",
    "monte_carlo",
    "write_samples_csv",
    "read_samples_csv",
]

_U64 = (1 << 64) - 1
_NO_TABLES = (0.0, 1.0, np.zeros(2), np.zeros(2), np.zeros(2), np.zeros(2))


@dataclass(frozen=True)
class RandomStream:
    """Identifies the random stream of one path."""

    master_seed: int
    index: int

    @property
    def key(self) -> np.uint64:
        key = K.path_key(np.uint64(self.master_seed & _U64), np.uint64(self.index))
        return np.uint64(int(key) & _U64)


@dataclass(frozen=True)
class SampleRecord:
    """Outcome of one path.

    ``clock`` is the elapsed time for the Euler engine and ``None`` for
    the exact engine. ``censored`` marks paths that did not stop before
    the horizon (or left the domain of a diffusion).
    """

    b_T: float
    m_T: float
    j_T: float
    stage_count: int
    clock: float | None = None
    censored: bool = False
    x_T: float | None = None


@dataclass
class SampleSet:
    """Seeded collection of path outcomes, indexed by path number.

    Attributes
    ----------
    b_T, m_T, j_T : ndarray
        Stopped value, running maximum and running minimum.
    status : ndarray of int8
        0 stopped, 1 censored at the horizon, 2 left the diffusion domain.
    stage_count : ndarray of int32
        Number of stages entered.
    clock : ndarray or None
        Elapsed time (Euler engine only).
    x_T : ndarray or None
        Stopped value in natural coordinates (diffusions only).
    """

    b_T: np.ndarray
    m_T: np.ndarray
    j_T: np.ndarray
    status: np.ndarray
    stage_count: np.ndarray
    master_seed: int
    n_requested: int
    engine: str
    dt: float | None = None
    clock: np.ndarray | None = None
    x_T: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.b_T.size

    @property
    def censored(self) -> np.ndarray:
        return self.status != K.STOPPED

    @property
    def n_censored(self) -> int:
        return int(np.count_nonzero(self.censored))

    @property
    def n_domain_exit(self) -> int:
        return int(np.count_nonzero(self.status == K.DOMAIN_EXIT))

    @property
    def censored_fraction(self) -> float:
        return self.n_censored / max(1, len(self))

    def valid(self) -> "SampleSet":
        """Uncensored records only.

        Raises
        ------
        NoSamples
            If no record stopped.
        """
        keep = ~self.censored
        if not np.any(keep):
            raise NoSamples("no uncensored records")
        sub = lambda a: None if a is None else a[keep]  # noqa: E731
        return SampleSet(
            self.b_T[keep], self.m_T[keep], self.j_T[keep], self.status[keep],
            self.stage_count[keep], self.master_seed, self.n_requested,
            self.engine, self.dt, sub(self.clock), sub(self.x_T), dict(self.meta),
        )

    def records(self) -> Iterator[SampleRecord]:
        for i in range(len(self)):
            yield self.record(i)

    def record(self, i: int) -> SampleRecord:
        return SampleRecord(
            float(self.b_T[i]), float(self.m_T[i]), float(self.j_T[i]),
            int(self.stage_count[i]),
            None if self.clock is None else float(self.clock[i]),
            bool(self.status[i] != K.STOPPED),
            None if self.x_T is None else float(self.x_T[i]),
        )


def _program(rule: StoppingRule):
    prog = rule.program()
    return tuple(np.ascontiguousarray(a) for a in prog)


def exact_walk(rule: StoppingRule, stream: RandomStream) -> SampleRecord:
    """Simulate one path of ``rule`` with the exact event-driven engine.

    Raises
    ------
    UnboundedSegment
        If a segment has no finite end.
    """
    b, M, J, cnt, st = K.exact_one(*_program(rule), stream.key)
    if st == K.UNBOUNDED:
        raise UnboundedSegment("segment unbounded on both sides")
    return SampleRecord(b, M, J, int(cnt))


def _check_step(dt, horizon):
    if dt is None or not dt > 0 or not math.isfinite(dt):
        raise InvalidStep(f"time step must be positive, got {dt!r}")
    if horizon is None or not horizon > 0:
        raise InvalidStep(f"horizon must be positive, got {horizon!r}")


def euler_path(
    rule: StoppingRule,
    dt: float,
    horizon: float,
    stream: RandomStream,
    bridge_correction: bool = True,
    aggregate: bool = True,
) -> SampleRecord:
    """Simulate one path of ``rule`` on a time grid of step ``dt``.

    Parameters
    ----------
    rule : StoppingRule
    dt : float
        Time step.
    horizon : float
        Paths still running at this time are censored.
    stream : RandomStream
    bridge_correction : bool
        Sample Brownian-bridge extremes between grid points near levels.
    aggregate : bool
        Merge steps far from every level (only with bridge correction).
    """
    _check_step(dt, horizon)
    b, M, J, cnt, st, steps, _ = K.euler_one(
        *_program(rule), stream.key, float(dt), float(horizon),
        bool(bridge_correction), bool(aggregate), False, *_NO_TABLES,
    )
    return SampleRecord(b, M, J, int(cnt), steps * dt, st != K.STOPPED)


def _chunks(n: int, workers: int) -> list[tuple[int, int]]:
    workers = max(1, min(int(workers), n))
    edges = np.linspace(0, n, workers + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def _run_threads(target, chunks):
    if len(chunks) == 1:
        target(*chunks[0])
        return
    threads = [threading.Thread(target=target, args=c) for c in chunks]
    for t in threads:
        t.start()
    for t in threads:
        t.join()


def monte_carlo(
    rule: StoppingRule,
    n: int,
    master_seed: int,
    engine: str = "exact",
    dt: float | None = None,
    horizon: float = 1e4,
    bridge: bool = True,
    aggregate: bool = True,
    workers: int = 1,
    diffusion_tables=None,
) -> SampleSet:
    """Simulate ``n`` independent paths of ``rule``.

    Parameters
    ----------
    rule : StoppingRule
    n : int
        Number of paths.
    master_seed : int
        64-bit seed; path ``i`` uses the stream ``(master_seed, i)``.
    engine : {"exact", "euler"}
    dt, horizon, bridge, aggregate
        Euler engine settings (see :func:`euler_path`).
    workers : int
        Number of threads; has no effect on the results.
    diffusion_tables : tuple, optional
        Tabulated scale, scale density, drift and volatility on a uniform
        grid, as produced by :meth:`ScaleTable.kernel_tables`. The rule is
        then read in scale coordinates and driven by the diffusion.

    Returns
    -------
    SampleSet
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    seed = np.uint64(int(master_seed) & _U64)
    prog = _program(rule)
    b = np.empty(n)
    M = np.empty(n)
    J = np.empty(n)
    cnt = np.empty(n, np.int32)
    st = np.empty(n, np.int8)
    chunks = _chunks(n, workers)
    if engine == "exact":
        _run_threads(lambda a, z: K.exact_batch(prog, seed, a, z, b, M, J, cnt, st), chunks)
        if np.any(st == K.UNBOUNDED):
            raise UnboundedSegment("segment unbounded on both sides")
        return SampleSet(b, M, J, st, cnt, int(master_seed), n, "exact")
    if engine != "euler":
        raise ValueError(f"unknown engine {engine!r}")
    _check_step(dt, horizon)
    steps = np.empty(n, np.int64)
    xs = np.empty(n)
    diffusion = diffusion_tables is not None
    tables = diffusion_tables if diffusion else _NO_TABLES
    if diffusion:
        aggregate = False

    def work(a, z):
        K.euler_batch(
            prog, seed, a, z, float(dt), float(horizon), bool(bridge), bool(aggregate),
            diffusion, tables, b, M, J, cnt, st, steps, xs,
        )

    _run_threads(work, chunks)
    meta = {"horizon": float(horizon), "bridge": bool(bridge), "aggregate": bool(aggregate)}
    return SampleSet(
        b, M, J, st, cnt, int(master_seed), n, "euler", float(dt),
        steps * float(dt), xs if diffusion else None, meta,
    )


def _g(x: float) -> str:
    return "%.17g" % x


def write_samples_csv(samples: SampleSet, path: str | Path | None = None) -> str:
    """Write ``path_index,b_T,m_T,j_T,censored,stage_count[,clock]`` rows.

    Returns the CSV text; also writes it to ``path`` when given.
    """
    buf = io.StringIO()
    cols = ["path_index", "b_T", "m_T", "j_T", "censored", "stage_count"]
    has_clock = samples.clock is not None
    if has_clock:
        cols.append("clock")
    buf.write(",".join(cols) + "\n")
    for i in range(len(samples)):
        row = [
            str(i), _g(samples.b_T[i]), _g(samples.m_T[i]), _g(samples.j_T[i]),
            str(int(samples.status[i] != K.STOPPED)), str(int(samples.stage_count[i])),
        ]
        if has_clock:
            row.append(_g(samples.clock[i]))
        buf.write(",".join(row) + "\n")
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return text


def read_samples_csv(path: str | Path) -> SampleSet:
    """Read a samples file written by :func:`write_samples_csv`.

    Raises
    ------
    NoSamples
        If the file holds no records.
    """
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = [ln.strip().split(",") for ln in fh if ln.strip()]
    if not rows:
        raise NoSamples(f"{path}: no records")
    col = {name: j for j, name in enumerate(header)}
    for need in ("b_T", "m_T", "j_T", "censored", "stage_count"):
        if need not in col:
            raise ValueError(f"{path}: missing column {need!r}")
    arr = lambda name, dtype=float: np.array([r[col[name]] for r in rows], dtype=dtype)  # noqa: E731
    clock = arr("clock") if "clock" in col else None
    return SampleSet(
        arr("b_T"), arr("m_T"), arr("j_T"), arr("censored", np.int8),
        arr("stage_count", np.int32), 0, len(rows),
        "euler" if clock is not None else "exact", None, clock,
    )
