"""Command line runner: ``skorokhod SUBCOMMAND --config PATH [--out DIR]``.

Subcommands
-----------
construct   potential, barrier table and max-law bound of ``[measure]``
simulate    Monte Carlo samples of the configured rule
verify      embedding, max-law and minimality checks with PASS/FAIL lines
compare     ``P(m_T >= x)`` of two configured rules side by side
diffusion   scale function, embeddability verdict and diffusion samples

Exit codes: 0 pass, 1 verification failure, 2 usage or config error,
3 infeasible embedding.
"""

from __future__ import annotations

import argparse
import io
import math
import sys
from pathlib import Path

import numpy as np

from . import errors as E
from .config import ExperimentConfig, load_config
from .diffusion import Case, DiffusionSpec, classify_embeddable, scale_function
from .measure import TargetMeasure, mean, pushforward, reflect, shift
from .potential import barrier_table, build_potential, eval_c, left_derivative, max_law_bound
from .rules import (
    StoppingRule,
    compile_naive,
    compile_tmax,
    compile_tmin,
    compile_tmod,
    first_exit,
    hitting,
    non_minimal_control,
    rule_to_text,
)
from .simulate import SampleSet, monte_carlo, read_samples_csv, write_samples_csv
from .verify import (
    VerificationReport,
    default_x_grid,
    disjointness_violations,
    ks_distance,
    max_law_curve,
    max_law_sharpness,
    minimality_diagnostic,
    stopped_mean_check,
    wasserstein1,
)

__all__ = ["main", "build_rule", "run_verification"]

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INFEASIBLE = 0, 1, 2, 3
CLASSIFY_TOL = 1e-8


def _g(x) -> str:
    return "%.17g" % x


def _csv(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(v if isinstance(v, str) else _g(v) for v in row) + "\n")
    return buf.getvalue()


def _write(out: Path, name: str, text: str) -> None:
    with open(out / name, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def build_rule(cfg: ExperimentConfig, mu: TargetMeasure | None = None, h=None) -> StoppingRule:
    """Compile the rule described by ``[rule]``.

    ``mu`` and ``h`` override the configured target and function (used
    when the rule is read in scale coordinates).
    """
    mu = cfg.measure if mu is None else mu
    h = cfg.h if h is None else h
    p = cfg.rule_params
    kind = cfg.rule_kind
    if kind == "tmax":
        return compile_tmax(mu)
    if kind == "tmin":
        return compile_tmin(mu)
    if kind == "naive":
        return compile_naive(mu)
    if kind == "tmod":
        return compile_tmod(mu, h, p.get("h_grid", 10_000))
    if kind == "hitting":
        return hitting(p["level"])
    if kind == "first_exit":
        return first_exit(p["a"], p["b"])
    return non_minimal_control(p["waypoint"], p["a"], p["b"])


def _simulate(cfg: ExperimentConfig, rule: StoppingRule) -> SampleSet:
    return monte_carlo(
        rule, cfg.n, cfg.seed, engine=cfg.engine, dt=cfg.dt, horizon=cfg.horizon,
        bridge=cfg.bridge, aggregate=cfg.aggregate, workers=cfg.workers,
    )


def _target(cfg: ExperimentConfig, rule: StoppingRule) -> TargetMeasure | None:
    return cfg.measure if cfg.measure is not None else rule.target


def _x_grid(cfg: ExperimentConfig, target: TargetMeasure | None) -> np.ndarray:
    if cfg.x_grid is not None:
        return np.asarray(cfg.x_grid, dtype=float)
    if target is not None:
        return default_x_grid(target)
    return np.geomspace(4.0 / 64.0, 4.0, 20)


def _bound_grid(cfg: ExperimentConfig, target: TargetMeasure | None) -> np.ndarray:
    # configured (or default) grid united with the half-integers up to its top
    base = _x_grid(cfg, target)
    top = float(np.max(base))
    halves = 0.5 * np.arange(1, int(math.floor(2 * top)) + 1)
    return np.union1d(base, halves)


def run_verification(
    cfg: ExperimentConfig, rule: StoppingRule, samples: SampleSet
) -> VerificationReport:
    """All checks that apply to ``rule``, with per-check verdicts."""
    euler = cfg.engine == "euler" or samples.engine == "euler"
    ks_thr = cfg.ks_threshold if cfg.ks_threshold is not None else (0.02 if euler else 0.01)
    ml_thr = (
        cfg.max_law_threshold
        if cfg.max_law_threshold is not None
        else (0.02 if euler else 0.015)
    )
    target = _target(cfg, rule)
    x_grid = _x_grid(cfg, target)
    valid = samples.valid()
    verdicts: dict = {}

    ks = w1 = math.nan
    m = None
    if target is not None:
        m = mean(target)
        ks = ks_distance(valid, target)
        w1 = wasserstein1(valid, target)
        verdicts["ks"] = (ks <= ks_thr, ks, ks_thr)

    dev, curve = None, []
    if rule.kind in ("ExtendedAY", "ReflectedAY"):
        side = "max" if rule.kind == "ExtendedAY" else "min"
        pf = build_potential(target if side == "max" else reflect(target))
        dev, curve = max_law_sharpness(valid, pf, x_grid, side)
        verdicts["max_law"] = (dev <= ml_thr, dev, ml_thr)
    elif target is not None:
        # any minimal embedding respects the bound from above
        pf = build_potential(target)
        emp = max_law_curve(valid, x_grid, "max")
        bound = np.array([max_law_bound(pf, x) for x in x_grid])
        curve = [(float(a), float(e), float(b)) for a, e, b in zip(x_grid, emp, bound)]
        excess = float(np.max(emp - bound))
        verdicts["max_law_upper"] = (excess <= ml_thr, excess, ml_thr)

    gamma_curve = minimality_diagnostic(valid, cfg.gamma_grid, mean=m)
    g_last = gamma_curve[-1][1]
    verdicts["minimality_gamma"] = (g_last <= cfg.gamma_threshold, g_last, cfg.gamma_threshold)

    sm_curve = stopped_mean_check(valid, x_grid, mean=m)
    ratio = max(abs(mu_) / se if se > 0 else (0.0 if mu_ == 0 else math.inf) for _, mu_, se in sm_curve)
    verdicts["stopped_mean"] = (ratio <= 3.0, ratio, 3.0)

    if target is not None and m is not None and m != 0:
        if m > 0:
            over = float(np.max(valid.m_T) - target.support_hi)
        else:
            over = float(target.support_lo - np.min(valid.j_T))
        verdicts["support_ceiling"] = (over <= 1e-9, max(over, 0.0), 1e-9)

    if rule.kind == "TwoStageMod":
        h_tilde = rule.info["h_tilde"]
        floor = max(
            float(h_tilde(rule.info["z_plus"])) if math.isfinite(rule.info["z_plus"]) else 0.0,
            float(h_tilde(-rule.info["z_minus"])) if math.isfinite(rule.info["z_minus"]) else 0.0,
        )
        ys = [y for y in _bound_grid(cfg, target) if y > floor]
        bad = sum(disjointness_violations(valid, h_tilde, y) for y in ys)
        verdicts["disjointness"] = (bad == 0, float(bad), 0.0)

    if euler:
        frac = samples.censored_fraction
        verdicts["censored"] = (frac <= 1e-3, frac, 1e-3)

    return VerificationReport(
        ks=ks, w1=w1, max_law_max_abs_dev=dev, max_law_curve=curve,
        minimality_curve=gamma_curve, stopped_mean_curve=sm_curve,
        censored_fraction=samples.censored_fraction, n_used=len(valid), verdicts=verdicts,
    )


def _report_csv(rep: VerificationReport) -> str:
    parts = [
        _csv(
            ["check", "passed", "value", "threshold"],
            [(k, str(int(ok)), v, t) for k, (ok, v, t) in rep.verdicts.items()],
        ),
        _csv(
            ["statistic", "value"],
            [
                ("ks", rep.ks), ("w1", rep.w1),
                ("censored_fraction", rep.censored_fraction), ("n_used", float(rep.n_used)),
            ],
        ),
        _csv(["x", "empirical", "bound"], rep.max_law_curve),
        _csv(["gamma", "gamma_p_hat", "slack"], rep.minimality_curve),
        _csv(["x", "stopped_mean", "std_err"], rep.stopped_mean_curve),
    ]
    return "\n".join(parts)


# subcommands ---------------------------------------------------------------


def cmd_construct(cfg: ExperimentConfig, out: Path) -> int:
    if cfg.measure is None:
        raise E.ConfigError("[measure]: section required for construct")
    mu = cfg.measure
    pf = build_potential(mu)
    span = max(1.0, mu.support_hi - mu.support_lo)
    xs = np.union1d(mu.values, np.linspace(mu.support_lo - span, mu.support_hi + span, 201))
    c = np.atleast_1d(eval_c(pf, xs))
    d = np.atleast_1d(left_derivative(pf, xs))
    _write(out, "potential.csv", _csv(["x", "c", "c_left_derivative"], zip(xs, c, d)))
    table = barrier_table(pf)
    _write(out, "barrier.csv", _csv(["threshold", "barrier"], table))
    grid = _bound_grid(cfg, mu)
    _write(out, "bound.csv", _csv(["x", "bound"], [(x, max_law_bound(pf, x)) for x in grid]))
    print(f"construct: {len(mu)} atoms, mean {_g(pf.m)}, {len(table)} barrier steps")
    return EXIT_OK


def cmd_simulate(cfg: ExperimentConfig, out: Path) -> int:
    rule = build_rule(cfg)
    samples = _simulate(cfg, rule)
    write_samples_csv(samples, out / "samples.csv")
    _write(out, "rule.txt", rule_to_text(rule))
    print(
        f"simulate: {rule.kind}, {len(samples)} paths, engine {samples.engine}, "
        f"censored {samples.n_censored}"
    )
    return EXIT_OK


def cmd_verify(cfg: ExperimentConfig, out: Path) -> int:
    rule = build_rule(cfg)
    if cfg.samples_path is not None:
        try:
            samples = read_samples_csv(cfg.samples_path)
        except OSError as exc:
            raise E.ConfigError(f"[verify] samples: cannot read {cfg.samples_path}: {exc.strerror}") from None
    else:
        samples = _simulate(cfg, rule)
    rep = run_verification(cfg, rule, samples)
    _write(out, "report.csv", _report_csv(rep))
    for line in rep.verdict_lines():
        print(line)
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_compare(cfg_a: ExperimentConfig, cfg_b: ExperimentConfig, out: Path) -> int:
    rule_a, rule_b = build_rule(cfg_a), build_rule(cfg_b)
    sa, sb = _simulate(cfg_a, rule_a).valid(), _simulate(cfg_b, rule_b).valid()
    grid = _bound_grid(cfg_a, _target(cfg_a, rule_a))
    pa = max_law_curve(sa, grid)
    pb = max_law_curve(sb, grid)
    se = np.sqrt(pa * (1 - pa) / len(sa) + pb * (1 - pb) / len(sb))
    diff = pa - pb
    _write(out, "compare.csv", _csv(["x", "p_a", "p_b", "diff", "std_err"], zip(grid, pa, pb, diff, se)))
    band = 3.0 * se
    above = int(np.count_nonzero(diff > band))
    below = int(np.count_nonzero(diff < -band))
    print(
        f"compare: {rule_a.kind} vs {rule_b.kind}: a>b at {above}, a<b at {below}, "
        f"within noise at {grid.size - above - below} of {grid.size} levels"
    )
    return EXIT_OK


def cmd_diffusion(cfg: ExperimentConfig, out: Path) -> int:
    d = cfg.diffusion
    if d is None:
        raise E.ConfigError("[diffusion]: section required for diffusion")
    if cfg.rule_kind in ("naive", "control"):
        raise E.ConfigError(f"[rule] kind: {cfg.rule_kind} is not available for diffusions")
    spec = DiffusionSpec(d["drift"], d["vol"], d["domain"])
    mu_x = cfg.measure
    pts = list(mu_x.values)
    pts += [v for k, v in cfg.rule_params.items() if k in ("level", "a", "b") and math.isfinite(v)]
    st = scale_function(spec, d["grid_lo"], d["grid_hi"], d["grid"], pts)
    _write(out, "scale.csv", st.to_csv())
    cls = classify_embeddable(st, mu_x, CLASSIFY_TOL)
    _write(out, "classification.txt", cls.to_text())
    print(f"diffusion: {cls.case.value}, {'embeddable' if cls.embeddable else 'not-embeddable'}")
    if not cls.embeddable:
        raise E.Infeasible(cls.reason)

    mu_y = pushforward(mu_x, st)
    m_y = mean(mu_y)
    if m_y != 0.0 and abs(m_y) <= CLASSIFY_TOL and cls.case is not Case.RECURRENT:
        # quadrature noise in s must not flip the sign of a zero scale mean
        mu_y = shift(mu_y, -m_y)
    h_scale = None
    if cfg.h is not None:
        h = cfg.h
        h_scale = lambda y: h(np.interp(y, st.values, st.grid))  # noqa: E731
    p = cfg.rule_params
    if cfg.rule_kind == "hitting":
        rule = hitting(st.evaluate(p["level"]))
    elif cfg.rule_kind == "first_exit":
        rule = first_exit(*(st.evaluate(v) if math.isfinite(v) else v for v in (p["a"], p["b"])))
    else:
        rule = build_rule(cfg, mu=mu_y, h=h_scale)
    samples = monte_carlo(
        rule, cfg.n, cfg.seed, engine="euler", dt=cfg.dt, horizon=cfg.horizon,
        bridge=cfg.bridge, workers=cfg.workers, diffusion_tables=st.kernel_tables(),
    )

    rows = []
    for i in range(len(samples)):
        rows.append((
            str(i), samples.x_T[i], samples.b_T[i], samples.m_T[i], samples.j_T[i],
            str(int(samples.status[i])), str(int(samples.stage_count[i])), samples.clock[i],
        ))
    _write(
        out, "samples_x.csv",
        _csv(["path_index", "x_T", "s_x_T", "m_T", "j_T", "status", "stage_count", "clock"], rows),
    )

    ks_thr = cfg.ks_threshold if cfg.ks_threshold is not None else 0.02
    verdicts = {}
    if np.any(~samples.censored):
        valid = samples.valid()
        ks_y = ks_distance(valid, mu_y)
        as_x = SampleSet(valid.x_T, valid.m_T, valid.j_T, valid.status, valid.stage_count,
                         valid.master_seed, valid.n_requested, "euler")
        ks_x = ks_distance(as_x, mu_x, atol=1e-6)
        verdicts["ks_scale"] = (ks_y <= ks_thr, ks_y, ks_thr)
        verdicts["ks_x"] = (ks_x <= ks_thr, ks_x, ks_thr)
    else:
        verdicts["ks_scale"] = (False, math.nan, ks_thr)
    lo, hi = st.s_range
    crossed = 0
    if math.isfinite(hi):
        crossed += int(np.count_nonzero(samples.m_T >= hi))
    if math.isfinite(lo):
        crossed += int(np.count_nonzero(samples.j_T <= lo))
    verdicts["endpoint_crossings"] = (crossed == 0, float(crossed), 0.0)
    verdicts["censored"] = (samples.censored_fraction <= 1e-3, samples.censored_fraction, 1e-3)
    report = _csv(
        ["check", "passed", "value", "threshold"],
        [(k, str(int(ok)), v, t) for k, (ok, v, t) in verdicts.items()],
    )
    report += "\n" + _csv(
        ["statistic", "value"],
        [("domain_exits", float(samples.n_domain_exit)), ("scale_mean", cls.scale_mean)],
    )
    _write(out, "report.csv", report)
    ok = True
    for name, (passed, val, thr) in verdicts.items():
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'} {name} value={val:.6g} threshold={thr:.6g}")
    return EXIT_OK if ok else EXIT_FAIL


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="skorokhod", description=__doc__.splitlines()[0])
    ap.add_argument(
        "command", choices=("construct", "simulate", "verify", "compare", "diffusion")
    )
    ap.add_argument(
        "--config", action="append", required=True, metavar="PATH",
        help="experiment file (give two for compare)",
    )
    ap.add_argument("--out", default=".", metavar="DIR", help="output directory")
    return ap


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        want = 2 if args.command == "compare" else 1
        if len(args.config) != want:
            raise E.ConfigError(f"{args.command} takes {want} --config option(s)")
        cfgs = [load_config(p) for p in args.config]
        if args.command == "construct":
            return cmd_construct(cfgs[0], out)
        if args.command == "simulate":
            return cmd_simulate(cfgs[0], out)
        if args.command == "verify":
            return cmd_verify(cfgs[0], out)
        if args.command == "compare":
            return cmd_compare(cfgs[0], cfgs[1], out)
        return cmd_diffusion(cfgs[0], out)
    except (E.Infeasible, E.NoCrossing, E.UnboundedSegment) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (E.SkorokhodError, ValueError, ArithmeticError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
