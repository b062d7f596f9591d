"""Command-line entry point: sweeps, closed-form tables and self-validation.

Subcommands
-----------
ber-sweep     Monte-Carlo BER plus the ZF/JML closed forms over ``sweep_dbm``.
outage-sweep  Monte-Carlo outage plus both closed forms for every ``C``.
analytic      Closed forms only, no simulation.
validate      Oracle and invariant checks; non-zero exit on any failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np
from scipy import special as _special

from . import analytic, sim
from .config import default_workers, load_config
from .constellation import build_combined, decision_geometry, distance_sets
from .errors import AmbiguityError, ConfigError, ConvergenceError, DomainError, GeometryError

__all__ = ["main", "CSV_COLUMNS", "run_experiment", "run_validation", "read_csv"]

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "p_com_dbm", "ue_index", "receiver", "metric_name", "value",
    "ci_low", "ci_high", "trials", "seed", "config_hash",
)

FAMILIES = {
    "ber-sweep": ("ber", ("mc_ber", "semi_ber", "upper_zf", "upper_jml")),
    "outage-sweep": ("outage", ("mc_outage", "outage_zf", "outage_jml")),
    "analytic": ("analytic", ("semi_ber", "upper_zf", "upper_jml", "outage_zf", "outage_jml")),
}

EXIT_OK, EXIT_CHECKS_FAILED, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

# Gauss-Legendre nodes for averaging closed forms over d1 ~ U(30, 80)
_DISTANCE_NODES = 16


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _c_tag(C):
    return f"C{C:g}"


class _Rows:
    def __init__(self, config):
        self.config = config
        self.hash = config.config_hash()
        self.seed = "" if config.seed is None else config.seed
        self.rows = []

    def add(self, p, ue, rx, metric, value, ci=(None, None), trials=0):
        self.rows.append((float(p), ue, rx, metric, float(value), ci[0], ci[1], trials, self.seed, self.hash))

    def text(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([_fmt(v) for v in r])
        return buf.getvalue()


def read_csv(path):
    """Parse a CSV written by this tool back into typed dicts."""
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            for k in ("p_com_dbm", "value", "ci_low", "ci_high"):
                row[k] = float(row[k]) if row[k] != "" else None
            for k in ("ue_index", "trials"):
                row[k] = int(row[k])
            row["seed"] = int(row["seed"]) if row["seed"] != "" else None
            out.append(row)
    return out


# ---------------------------------------------------------------------------
# Closed forms with optional distance averaging
# ---------------------------------------------------------------------------

def _distance_average(config, p_dbm, fn):
    """Evaluate ``fn(params)`` at fixed distances, or its mean over d1 ~ U(30, 80)."""
    if config.distance_mode == "fixed":
        return fn(config.system_params(p_dbm))
    x, w = np.polynomial.legendre.leggauss(_DISTANCE_NODES)
    d1 = 55.0 + 25.0 * x
    vals = [fn(config.system_params(p_dbm, d1=float(d), d2=1.2 * float(d))) for d in d1]
    return math.fsum(wi * vi for wi, vi in zip(w, vals)) / 2.0


def _closed_forms(config, rows, p, wanted):
    jm = config.jml_bound_mode
    for ue in (1, 2):
        if "semi_ber" in wanted:
            v = _distance_average(config, p, lambda q: analytic.semi_analytic_ber_zf(q, ue))
            rows.add(p, ue, "zf", "semi_ber", v)
        if "upper_zf" in wanted:
            v = _distance_average(config, p, lambda q: analytic.upper_ber_zf(q, ue).value)
            rows.add(p, ue, "zf", "upper_zf", v)
            rows.add(p, ue, "zf", "upper_zf_clamped", min(v, 1.0))
        if "upper_jml" in wanted:
            v = _distance_average(config, p, lambda q: analytic.upper_ber_jml(q, ue, jm).value)
            rows.add(p, ue, "jml", "upper_jml", v)
            rows.add(p, ue, "jml", "upper_jml_clamped", min(v, 1.0))
    for C in config.C_list:
        for rx, fn in (("zf", analytic.outage_zf), ("jml", analytic.outage_jml)):
            if f"outage_{rx}" not in wanted:
                continue
            per_ue = [_distance_average(config, p, lambda q: fn(q, ue, C)) for ue in (1, 2)]
            for ue, v in zip((1, 2), per_ue):
                rows.add(p, ue, rx, f"outage_{_c_tag(C)}", v)
            rows.add(p, 0, rx, f"outage_{_c_tag(C)}", 0.5 * (per_ue[0] + per_ue[1]))


def run_experiment(config, command, out_dir):
    """Run one subcommand's sweep and write its CSV. Returns the CSV path."""
    family, allowed = FAMILIES[command]
    explicit = "analyses" in config.origins
    wanted = [a for a in (config.analyses if explicit else allowed) if a in allowed]
    if not wanted:
        raise ConfigError(f"no analysis selected applies to {command}", key="analyses",
                          line=config.where("analyses"))
    need_mc = any(a.startswith("mc_") for a in wanted)
    config.validate(need_mc=need_mc)
    constellation = build_combined(config.theta_o, config.theta_r, config.rotation_convention)

    rows = _Rows(config)
    t0 = time.perf_counter()
    for point, p in enumerate(config.sweep_dbm):
        params = config.system_params(p)
        if "mc_ber" in wanted:
            stats = sim.run_ber(
                params, config.trials, config.seed, receivers=config.receivers,
                workers=config.workers, point=point, block_size=config.block_size,
                distance_mode=config.distance_mode, drift=config.drift_mode,
                constellation=constellation,
            )
            for (rx, ue), st in stats.items():
                rows.add(p, ue, rx, "mc_ber", st.ber, st.ci, config.trials)
        if "mc_outage" in wanted:
            stats = sim.run_outage(
                params, config.C_list, config.trials, config.seed, workers=config.workers,
                point=point, block_size=config.block_size * 10, distance_mode=config.distance_mode,
            )
            for C in config.C_list:
                for rx in config.receivers:
                    for ue in (1, 2, 0):
                        st = stats[(rx, ue, C)]
                        rows.add(p, ue, rx, f"mc_outage_{_c_tag(C)}", st.probability, st.ci, st.trials)
        _closed_forms(config, rows, p, set(wanted))

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{family}.csv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(rows.text())
    elapsed = time.perf_counter() - t0
    print(
        f"{command}: {len(config.sweep_dbm)} points, {config.trials if need_mc else 0} trials/point, "
        f"{len(rows.rows)} rows, {elapsed:.1f} s -> {path}",
        file=sys.stderr,
    )
    return path


# ---------------------------------------------------------------------------
# Validation suite
# ---------------------------------------------------------------------------

@dataclasses.dataclass
class Check:
    name: str
    passed: bool
    deviation: float = math.nan
    detail: str = ""

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        dev = "" if math.isnan(self.deviation) else f" deviation={self.deviation:.3e}"
        extra = f" ({self.detail})" if self.detail else ""
        return f"{tag} {self.name}{dev}{extra}"


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def _check_specfun():
    from .specfun import gauss_2f1, q_function, regularized_gamma

    worst_q = max(_rel(q_function(x), float(_special.ndtr(-x))) for x in np.linspace(-6, 30, 73))
    worst_g = max(
        _rel(regularized_gamma(a, x), float(_special.gammainc(a, x)))
        for a in (0.5, 1, 4, 5, 20) for x in (0.01, 0.5, 3, 10, 40)
        if _special.gammainc(a, x) > 1e-250
    )
    grid = [(0.5, 4.5, 1.5, z) for z in (-1e3, -10, -0.5, 0.3, 0.95)]
    grid += [(5, 5.5, 6, z) for z in (-200, -2, -0.1)]
    worst_h = max(_rel(gauss_2f1(*g), float(_special.hyp2f1(*g))) for g in grid)
    pf = max(
        _rel(gauss_2f1(a, b, c, z), (1 - z) ** (-a) * gauss_2f1(a, c - b, c, z / (z - 1)))
        for a, b, c, z in ((0.5, 2.5, 1.5, -0.7), (3, 3.5, 4, -0.4), (1.2, 0.7, 2.9, 0.3))
    )
    return [
        Check("q_function vs ndtr", worst_q < 1e-12, worst_q),
        Check("regularized_gamma vs gammainc", worst_g < 1e-10, worst_g),
        Check("gauss_2f1 vs hyp2f1", worst_h < 1e-10, worst_h),
        Check("Pfaff identity", pf < 1e-12, pf),
    ]


def _check_constellation(c):
    pts = c.points
    dmin = float(np.min(np.abs(pts[:, None] - pts[None, :])[~np.eye(len(pts), dtype=bool)]))
    ms = [distance_sets(c, b).sorted_multiset() for b in (1, 2, 3, 4)]
    spread = max(float(np.max(np.abs(m - ms[0]))) for m in ms)
    checks = [
        Check("distinct combined points", dmin > 1e-9, dmin),
        Check("bit positions share distance multiset", spread < 1e-12, spread),
    ]
    if c.is_default:
        try:
            decision_geometry(c)
            checks.append(Check("decision geometry symmetric", True))
        except GeometryError as exc:
            checks.append(Check("decision geometry symmetric", False, detail=str(exc)))
    return checks


def _check_closed_forms():
    worst = 0.0
    for M in (1, 2, 5):
        for eta in np.logspace(-3, 3, 7):
            v = analytic.jml_union_term(eta, M)
            if v > 1e-12:
                worst = max(worst, _rel(v, analytic.jml_union_term_quadrature(eta, M)))
        for A in np.logspace(-3, 3, 7):
            v = analytic.zf_union_term(A, M, 1.0)
            if v > 1e-12:
                worst = max(worst, _rel(v, analytic.zf_union_term_quadrature(A, M, 1.0)))
    m1 = max(abs(analytic.jml_union_term(e, 1) - (1 - math.sqrt(e / (2 + e))) / 2) for e in (0.1, 1, 10, 100))
    return [
        Check("union terms vs quadrature", worst < 1e-6, worst),
        Check("M=1 JML term identity", m1 < 1e-10, m1),
    ]


def _check_conditional():
    worst = 0.0
    for pn in (0.01, 0.1, 1.0):
        a = analytic.conditional_ber_zf(pn)
        o = analytic.conditional_ber_oracle(pn)
        worst = max(worst, abs(a - o) / max(1e-4, 0.01 * abs(o)))
    return [Check("conditional BER vs grid oracle", worst <= 1.0, worst, "in units of the tolerance")]


def _check_mc(config):
    params = config.system_params(config.sweep_dbm[len(config.sweep_dbm) // 2])
    seed = 0 if config.seed is None else config.seed
    checks = []
    stats = sim.run_ber(params, 20_000, seed, receivers=("zf",))
    worst = 0.0
    for ue in (1, 2):
        st = stats[("zf", ue)]
        ref = analytic.semi_analytic_ber_zf(params, ue)
        worst = max(worst, abs(st.ber - ref) / max(st.ci_half_width, 1e-12))
    checks.append(Check("MC ZF BER vs semi-analytic", worst <= 4.0, worst, "in CI half-widths"))
    C = config.C_list[0] if config.C_list else 5.0
    out = sim.run_outage(params, (C,), 100_000, seed)
    worst = 0.0
    for rx, fn in (("zf", analytic.outage_zf), ("jml", analytic.outage_jml)):
        for ue in (1, 2):
            st = out[(rx, ue, C)]
            worst = max(worst, abs(st.probability - fn(params, ue, C)) / max(st.ci_half_width, 1e-12))
    checks.append(Check("MC outage vs closed forms", worst <= 4.0, worst, "in CI half-widths"))
    return checks


def run_validation(config, mc=True):
    """Run every check; returns the list of :class:`Check` results."""
    checks = []
    try:
        config.validate()
    except ConfigError as exc:
        return [Check("configuration", False, detail=str(exc))]
    checks.append(Check("configuration", True))
    checks += _check_specfun()
    try:
        c = build_combined(config.theta_o, config.theta_r, config.rotation_convention)
    except AmbiguityError as exc:
        checks.append(Check("constellation", False, detail=str(exc)))
        return checks
    checks += _check_constellation(c)
    checks += _check_closed_forms()
    if c.is_default:
        checks += _check_conditional()
        if mc:
            checks += _check_mc(config)
    return checks


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _parser():
    p = argparse.ArgumentParser(prog="noma-isac", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("ber-sweep", "Monte-Carlo and analytical BER versus P_com"),
        ("outage-sweep", "Monte-Carlo and analytical outage versus P_com"),
        ("analytic", "closed forms only"),
        ("validate", "oracle and invariant checks"),
    ):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", type=Path, help="INI configuration file")
        s.add_argument("--seed", type=int, help="root seed (overrides the config)")
        s.add_argument("--workers", type=int, help="worker processes (default $NOMA_ISAC_WORKERS or 1)")
        s.add_argument("--out", type=Path, default=Path("results"), help="output directory")
        s.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="override one config key; repeatable")
        if name == "validate":
            s.add_argument("--no-mc", action="store_true", help="skip the Monte-Carlo smoke checks")
    return p


def _resolve(args):
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    cfg = load_config(args.config, overrides)
    workers = args.workers if args.workers is not None else default_workers()
    return dataclasses.replace(cfg, workers=workers, origins=cfg.origins)


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        config = _resolve(args)
        if args.command == "validate":
            checks = run_validation(config, mc=not args.no_mc)
            for ch in checks:
                print(ch.line())
            failed = [ch.name for ch in checks if not ch.passed]
            if failed:
                print(f"{len(failed)} check(s) failed: {', '.join(failed)}", file=sys.stderr)
                return EXIT_CHECKS_FAILED
            print(f"all {len(checks)} checks passed", file=sys.stderr)
            return EXIT_OK
        run_experiment(config, args.command, args.out)
        return EXIT_OK
    except (ConfigError, AmbiguityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, DomainError, GeometryError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
