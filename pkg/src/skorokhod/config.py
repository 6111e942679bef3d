"""Experiment configuration files.

An experiment is an INI-style text file::

    [measure]
    atoms = -2 0.5; 0 0.5

    [rule]
    kind = tmax

    [simulate]
    engine = exact
    n = 200000
    seed = 20240601

Unknown sections and keys are rejected so that typos cannot silently
change an experiment.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .errors import ConfigError, ExprSyntaxError
from .exprlang import Expr, parse
from .measure import TargetMeasure, discretize, parse_atoms, read_atoms
from .verify import DEFAULT_GAMMAS

__all__ = ["ExperimentConfig", "load_config", "parse_config"]

RULE_KINDS = ("tmax", "tmin", "tmod", "hitting", "first_exit", "control", "naive")

_KEYS = {
    "measure": {"atoms", "file", "distribution", "params", "n_atoms"},
    "rule": {"kind", "h", "level", "a", "b", "waypoint", "h_grid"},
    "simulate": {"engine", "n", "seed", "dt", "horizon", "bridge", "aggregate", "workers"},
    "diffusion": {"drift", "vol", "domain", "grid", "grid_lo", "grid_hi"},
    "verify": {
        "gamma_grid", "x_grid", "ks_threshold", "max_law_threshold",
        "gamma_threshold", "samples",
    },
}


@dataclass
class ExperimentConfig:
    """Parsed and validated experiment description."""

    source: str
    measure: TargetMeasure | None
    rule_kind: str
    rule_params: dict
    h: Expr | None
    engine: str
    n: int
    seed: int
    dt: float | None
    horizon: float
    bridge: bool
    aggregate: bool
    workers: int
    diffusion: dict | None
    gamma_grid: tuple[float, ...]
    x_grid: np.ndarray | None
    ks_threshold: float | None
    max_law_threshold: float | None
    gamma_threshold: float
    samples_path: Path | None
    notes: list[str] = field(default_factory=list)


def _err(section: str, key: str | None, msg: str) -> ConfigError:
    where = f"[{section}]" + (f" {key}" if key else "")
    return ConfigError(f"{where}: {msg}")


def _float(sec, key, raw) -> float:
    try:
        return float(raw)
    except ValueError:
        raise _err(sec, key, f"not a number: {raw!r}") from None


def _int(sec, key, raw) -> int:
    try:
        return int(raw, 0)
    except ValueError:
        raise _err(sec, key, f"not an integer: {raw!r}") from None


def _bool(sec, key, raw) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise _err(sec, key, f"not a boolean: {raw!r}")


def _floats(sec, key, raw) -> list[float]:
    parts = [p for p in raw.replace(";", ",").replace("\n", ",").split(",") if p.strip()]
    if not parts:
        raise _err(sec, key, "empty list")
    return [_float(sec, key, p.strip()) for p in parts]


def _expr(sec, key, raw) -> Expr:
    try:
        return parse(raw)
    except ExprSyntaxError as exc:
        raise _err(sec, key, f"{exc.message} at offset {exc.offset} in {raw!r}") from None


def _measure(sec: configparser.SectionProxy, base: Path) -> TargetMeasure:
    given = [k for k in ("atoms", "file", "distribution") if k in sec]
    if len(given) != 1:
        raise _err("measure", None, "give exactly one of atoms, file, distribution")
    try:
        if "atoms" in sec:
            return parse_atoms(sec["atoms"].replace(";", "\n").splitlines())
        if "file" in sec:
            path = Path(sec["file"])
            if not path.is_absolute():
                path = base / path
            return read_atoms(path)
    except (ValueError, OSError) as exc:
        raise _err("measure", given[0], str(exc)) from None
    name = sec["distribution"].strip()
    dist_cls = getattr(stats, name, None)
    if dist_cls is None or not hasattr(dist_cls, "ppf"):
        raise _err("measure", "distribution", f"unknown distribution {name!r}")
    params = _floats("measure", "params", sec["params"]) if "params" in sec else []
    if "n_atoms" not in sec:
        raise _err("measure", "n_atoms", "required with distribution")
    n_atoms = _int("measure", "n_atoms", sec["n_atoms"])
    try:
        return discretize(dist_cls(*params), n_atoms)
    except (ValueError, TypeError) as exc:
        raise _err("measure", "params", str(exc)) from None


def parse_config(text: str, base: str | Path = ".", source: str = "<string>") -> ExperimentConfig:
    """Parse configuration text.

    Raises
    ------
    ConfigError
        Naming the offending section and key.
    """
    cp = configparser.ConfigParser(
        interpolation=None, comment_prefixes=("#",), inline_comment_prefixes=("#",),
        strict=True,
    )
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    for sec in cp.sections():
        if sec not in _KEYS:
            raise _err(sec, None, "unknown section")
        for key in cp[sec]:
            if key not in _KEYS[sec]:
                raise _err(sec, key, "unknown key")
    base = Path(base)

    measure = _measure(cp["measure"], base) if cp.has_section("measure") else None

    if not cp.has_section("rule"):
        rule = {"kind": "tmax"}
    else:
        rule = dict(cp["rule"])
    kind = rule.get("kind", "tmax").strip()
    if kind not in RULE_KINDS:
        raise _err("rule", "kind", f"expected one of {', '.join(RULE_KINDS)}, got {kind!r}")
    params: dict = {}
    need = {
        "hitting": ("level",),
        "first_exit": ("a", "b"),
        "control": ("waypoint", "a", "b"),
    }.get(kind, ())
    for key in need:
        if key not in rule:
            raise _err("rule", key, f"required for kind {kind}")
        params[key] = _float("rule", key, rule[key])
    h = None
    if kind == "tmod":
        if "h" not in rule:
            raise _err("rule", "h", "required for kind tmod")
        h = _expr("rule", "h", rule["h"])
        if "h_grid" in rule:
            params["h_grid"] = _int("rule", "h_grid", rule["h_grid"])
    if kind in ("tmax", "tmin", "tmod", "naive") and measure is None:
        raise _err("measure", None, f"section required for rule kind {kind}")

    sim = cp["simulate"] if cp.has_section("simulate") else {}
    engine = sim.get("engine", "exact").strip()
    if engine not in ("exact", "euler"):
        raise _err("simulate", "engine", f"expected exact or euler, got {engine!r}")
    n = _int("simulate", "n", sim.get("n", "200000"))
    if n < 1:
        raise _err("simulate", "n", "must be positive")
    seed = _int("simulate", "seed", sim.get("seed", "0"))
    if not 0 <= seed < 2**64:
        raise _err("simulate", "seed", "must be a 64-bit unsigned integer")
    dt = _float("simulate", "dt", sim["dt"]) if "dt" in sim else None
    cp_has_diffusion = cp.has_section("diffusion")
    if (engine == "euler" or cp_has_diffusion) and dt is None:
        raise _err("simulate", "dt", "required for the euler engine")
    if dt is not None and not dt > 0:
        raise _err("simulate", "dt", "must be positive")
    horizon = _float("simulate", "horizon", sim.get("horizon", "1e4"))
    if not horizon > 0:
        raise _err("simulate", "horizon", "must be positive")
    bridge = _bool("simulate", "bridge", sim.get("bridge", "true"))
    aggregate = _bool("simulate", "aggregate", sim.get("aggregate", "true"))
    workers = _int("simulate", "workers", sim.get("workers", "1"))
    if workers < 1:
        raise _err("simulate", "workers", "must be positive")

    diffusion = None
    if cp_has_diffusion:
        d = cp["diffusion"]
        for key in ("drift", "vol"):
            if key not in d:
                raise _err("diffusion", key, "required")
        if measure is None:
            raise _err("measure", None, "section required with [diffusion]")
        domain = (-math.inf, math.inf)
        if "domain" in d:
            lims = _floats("diffusion", "domain", d["domain"])
            if len(lims) != 2 or not lims[0] < 0 < lims[1]:
                raise _err("diffusion", "domain", "expected 'lo, hi' with lo < 0 < hi")
            domain = (lims[0], lims[1])
        diffusion = {
            "drift": _expr("diffusion", "drift", d["drift"]),
            "vol": _expr("diffusion", "vol", d["vol"]),
            "domain": domain,
            "grid": _int("diffusion", "grid", d.get("grid", "100000")),
            "grid_lo": _float("diffusion", "grid_lo", d["grid_lo"]) if "grid_lo" in d else None,
            "grid_hi": _float("diffusion", "grid_hi", d["grid_hi"]) if "grid_hi" in d else None,
        }

    ver = cp["verify"] if cp.has_section("verify") else {}
    gammas = tuple(_floats("verify", "gamma_grid", ver["gamma_grid"])) if "gamma_grid" in ver else DEFAULT_GAMMAS
    x_grid = np.array(_floats("verify", "x_grid", ver["x_grid"])) if "x_grid" in ver else None
    if x_grid is not None and np.any(x_grid <= 0):
        raise _err("verify", "x_grid", "levels must be positive")
    ks_thr = _float("verify", "ks_threshold", ver["ks_threshold"]) if "ks_threshold" in ver else None
    ml_thr = (
        _float("verify", "max_law_threshold", ver["max_law_threshold"])
        if "max_law_threshold" in ver
        else None
    )
    g_thr = _float("verify", "gamma_threshold", ver.get("gamma_threshold", "0.05"))
    samples_path = None
    if "samples" in ver:
        samples_path = Path(ver["samples"])
        if not samples_path.is_absolute():
            samples_path = base / samples_path

    return ExperimentConfig(
        source=source, measure=measure, rule_kind=kind, rule_params=params, h=h,
        engine=engine, n=n, seed=seed, dt=dt, horizon=horizon, bridge=bridge,
        aggregate=aggregate, workers=workers, diffusion=diffusion, gamma_grid=gammas,
        x_grid=x_grid, ks_threshold=ks_thr, max_law_threshold=ml_thr,
        gamma_threshold=g_thr, samples_path=samples_path,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    """Read and parse a configuration file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, path.parent, str(path))
