"""Command-line front end: ``bosecorr simulate|sweep|oracle|analyze|verify``.

Exit codes: 0 success, 1 failed verification or sweep entries, 2 usage
errors, 3 numeric blow-up during a simulation (partial outputs are kept).
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import acceptance, analysis, convergence, io, oracles
from .runner import RunAborted, cached_table, run_simulation
from .table import CorrelationTable, SimulationConfig

WORKERS_ENV = "BOSECORR_WORKERS"
EXIT_USAGE, EXIT_NUMERIC = 2, 3

log = logging.getLogger("bosecorr")


def code_version() -> str:
    try:
        from importlib.metadata import version

        return version("artifact")
    except Exception:  # not installed, e.g. running from a source tree
        return "0.1.0"


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def parse_range(text: str) -> np.ndarray:
    """``"start:step:stop"`` (inclusive), ``"a:b"`` (integers a..b) or ``"x,y,..."``."""
    if ":" in text:
        parts = [float(x) for x in text.split(":")]
        if len(parts) == 2:
            if parts[1] < parts[0]:
                raise ValueError(f"bad range {text!r}")
            return np.arange(int(parts[0]), int(parts[1]) + 1)
        a, c, b = parts
        if c <= 0 or b < a:
            raise ValueError(f"bad range {text!r}")
        n = int(np.floor((b - a) / c + 1e-9)) + 1
        return np.round(a + c * np.arange(n), 12)
    return np.array([float(x) for x in text.split(",")])


# --- simulate ---------------------------------------------------------------


def config_from_args(args) -> SimulationConfig:
    base = convergence.parameter_table(args.gamma)
    changes = {
        "delta": args.delta,
        "n_max": args.nmax,
        "eps": args.eps,
        "chi_max": args.chi_max,
        "tau_end": args.tau_end,
        "d_max": args.dmax,
        "output_dt": args.output_dt,
    }
    changes = {k: v for k, v in changes.items() if v is not None}
    if "delta" in changes and "output_dt" not in changes:
        changes["output_dt"] = max(base.output_dt, changes["delta"])
    return base.with_(**changes)


def write_run(out: Path, config: SimulationConfig, table: CorrelationTable, started: str, status="ok") -> dict:
    out.mkdir(parents=True, exist_ok=True)
    probe = min(convergence.DEFAULT_PROBE_D, table.d_max)
    report = convergence.q_ratio(table, probe)
    paths = {
        "table": str(io.write_table(out / "table.csv", table)),
        "convergence": str(io.write_json(out / "convergence.json", report.to_dict())),
    }
    diag = table.meta.get("diagnostics")
    if diag:
        io.write_json(out / "diagnostics.json", {"tau": table.tau, **diag})
        paths["diagnostics"] = str(out / "diagnostics.json")
    manifest = {
        "config_hash": config.config_hash(),
        "code_version": code_version(),
        "started": started,
        "finished": _now(),
        "config": config.to_dict(),
        "outputs": paths,
        "status": status,
        "convergence": {"tau_max": report.tau_max, "trigger": report.trigger, "probe_d": report.probe_d},
    }
    io.write_json(out / "manifest.json", manifest)
    return manifest


def cmd_simulate(args) -> int:
    config = config_from_args(args)
    out = Path(args.out)
    started = _now()

    def progress(tau, G, rep):
        log.info("tau=%.3f chi=%s ell=%.6g", tau, rep.bond_dims, G @ np.arange(1, len(G) + 1))

    try:
        table = cached_table(config, stop_on_q=convergence.Q_THRESHOLD if args.stop_on_q else None,
                             progress=progress if args.verbose else None)
    except RunAborted as exc:
        log.error("numeric blow-up: %s", exc)
        write_run(out, config, exc.partial, started, status="aborted")
        return EXIT_NUMERIC
    man = write_run(out, config, table, started)
    print(f"wrote {out} (tau_max {man['convergence']['tau_max']:.3g}, {man['convergence']['trigger']})")
    return 0


# --- analysis helpers shared by sweep and analyze ---------------------------


def analyze_table(table: CorrelationTable, window=(2.2, 3.3), sat_d=(1, 2, 3, 4, 5, 6)) -> dict:
    """Fits, front trace and saturation values for one table."""
    probe = min(convergence.DEFAULT_PROBE_D, table.d_max)
    rep = convergence.q_ratio(table, probe)
    conv = table.window(0.0, rep.tau_max)
    sigma = float(rep.sigma.max()) if rep.sigma.size else 0.0
    out = {"tau_max": rep.tau_max, "trigger": rep.trigger, "noise_floor": sigma, "flags": []}
    t0, t1 = window
    t1 = min(t1, rep.tau_max)
    sel = (conv.tau >= t0 - 1e-9) & (conv.tau <= t1 + 1e-9)
    if sel.sum() < 5:
        t0, t1 = rep.tau_max / 2, rep.tau_max
        out["flags"].append("fit_window_fallback")
    try:
        out["ctd_fit"] = analysis.fit_power_law(conv.tau, conv.ctd, (t0, t1)).to_dict()
    except ValueError as exc:
        out["ctd_fit"] = None
        out["flags"].append(f"ctd_fit: {exc}")
    N, ell_n = analysis.compute_norm_and_normalized_ctd(conv, sigma)
    try:
        ok = np.isfinite(ell_n)
        out["normalized_ctd_fit"] = analysis.fit_power_law(conv.tau[ok], ell_n[ok], (t0, t1)).to_dict()
    except ValueError as exc:
        out["normalized_ctd_fit"] = None
        out["flags"].append(f"normalized_ctd_fit: {exc}")
    front = analysis.detect_front(conv, sigma)
    out["front"] = front.to_dict()
    for name, fn in (("velocity_fit", analysis.fit_front_velocity), ("decay_fit", analysis.fit_front_decay)):
        try:
            fit = fn(front)
            out[name] = fit.to_dict()
            if name == "velocity_fit":
                out["front_residuals"] = analysis.front_residuals(front, fit).tolist()
        except ValueError as exc:
            out[name] = None
            out["flags"].append(f"{name}: {exc}")
    out["saturation"] = {str(d): analysis.saturation_value(conv, front, d) for d in sat_d if d <= conv.d_max}
    return out


def _param(fit, key):
    return None if fit is None else fit["params"][key]


# --- sweep ------------------------------------------------------------------


def _sweep_one(job):
    gamma, out, tau_end, chi_max, window = job
    over = {"tau_end": tau_end}
    if chi_max is not None:
        over["chi_max"] = chi_max
    config = convergence.parameter_table(gamma, **over)
    run_dir = Path(out) / f"gamma_{gamma:.6g}"
    started = _now()
    try:
        res = run_simulation(config, stop_on_q=convergence.Q_THRESHOLD)
        write_run(run_dir, config, res.table, started)
        summary = analyze_table(res.table, window)
        io.write_json(run_dir / "analysis.json", summary)
        return gamma, "ok", summary
    except RunAborted as exc:
        write_run(run_dir, config, exc.partial, started, status="aborted")
        return gamma, f"aborted: {exc}", None
    except Exception as exc:  # recorded per gamma, the sweep continues
        return gamma, f"error: {exc!r}", None


SUMMARY_COLUMNS = ("gamma", "status", "tau_max", "alpha", "beta", "v_cf", "eta", "g_sat_d1")


def cmd_sweep(args) -> int:
    if args.gammas:
        gammas = [float(x) for x in args.gammas.split(",")]
    else:
        lo, hi = args.log_range
        n = int(round(np.log10(hi / lo) * args.per_decade)) + 1
        gammas = list(np.round(np.logspace(np.log10(lo), np.log10(hi), n), 8))
    if not gammas or any(g <= 0 for g in gammas):
        print("sweep needs a non-empty set of positive gammas", file=sys.stderr)
        return EXIT_USAGE
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(g, str(out), args.tau_end, args.chi_max, tuple(args.fit_window)) for g in gammas]
    workers = args.workers or int(os.environ.get(WORKERS_ENV, "1"))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(j) for j in jobs]
    failed = 0
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        for gamma, status, s in results:
            if s is None:
                failed += 1
                w.writerow([io.fmt(gamma), status] + [""] * (len(SUMMARY_COLUMNS) - 2))
                continue
            vals = [s["tau_max"], _param(s["ctd_fit"], "alpha"), _param(s["ctd_fit"], "beta"),
                    _param(s["velocity_fit"], "v"), _param(s["decay_fit"], "eta"), s["saturation"].get("1")]
            w.writerow([io.fmt(gamma), status] + ["" if v is None else io.fmt(v) for v in vals])
    print(f"sweep of {len(gammas)} gammas written to {out / 'summary.csv'} ({failed} failed)")
    return 1 if failed else 0


# --- oracle -----------------------------------------------------------------


def cmd_oracle(args) -> int:
    if args.limit == "zero":
        if args.gamma is None:
            print("--gamma is required for --limit zero", file=sys.stderr)
            return EXIT_USAGE
        limit = oracles.gamma_to_zero(args.gamma)
    else:
        limit = oracles.GAMMA_INF
    taus = parse_range(args.tau)
    ds = parse_range(args.d).astype(int) if args.d else np.arange(1, 51)
    if args.quantity == "Gd":
        G = np.zeros((taus.size, int(ds.max())))
        G[:, ds - 1] = oracles.correlation_grid(limit, taus, ds)
        table = CorrelationTable(taus, np.abs(G), {"source": "oracle", "limit": limit.tag, "gamma": limit.gamma})
        text = io.table_to_csv(table)
    else:
        rows = []
        if args.quantity == "ctd":
            rows = [("tau", "ctd")] + [(io.fmt(t), io.fmt(v)) for t, v in zip(taus, oracles.ctd_closed_form(limit, taus))]
        elif args.quantity == "norm":
            rows = [("tau", "norm")] + [(io.fmt(t), io.fmt(v)) for t, v in zip(taus, oracles.norm_closed_form(limit, taus))]
        elif args.quantity == "front_time":
            rows = [("d", "tau_d")] + [(int(d), io.fmt(oracles.front_time(limit, d))) for d in ds]
        text = "".join(",".join(map(str, r)) + "\n" for r in rows)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


# --- analyze ----------------------------------------------------------------


def cmd_analyze(args) -> int:
    tables = [(p, io.read_table(p)) for p in args.tables]
    t0, t1 = args.window
    for p, t in tables:
        if t.tau.size == 0 or t0 < t.tau[0] - 1e-9 or t1 > t.tau[-1] + 1e-9 or t1 <= t0:
            lo, hi = (t.tau[0], t.tau[-1]) if t.tau.size else (float("nan"),) * 2
            print(f"window [{t0:g}, {t1:g}] outside data of {p}: valid range [{lo:g}, {hi:g}]", file=sys.stderr)
            return EXIT_USAGE
    result = {"inputs": {str(p): io.file_hash(p) for p, _ in tables}, "code_version": code_version(), "results": {}}
    for p, t in tables:
        res = analyze_table(t, (t0, t1))
        res["config_hash"] = t.meta.get("config_hash")
        result["results"][str(p)] = res
    if len(tables) == 2:
        (pa, a), (pb, b) = tables
        n = min(a.tau.size, b.tau.size)
        dm = min(a.d_max, b.d_max)
        if np.allclose(a.tau[:n], b.tau[:n], atol=1e-9):
            diff = np.abs(a.G[:n, :dm] - b.G[:n, :dm])
            result["comparison"] = {"max_abs_diff": float(diff.max()), "per_d": diff.max(axis=0).tolist(), "tau_end": float(a.tau[n - 1])}
        else:
            result["comparison"] = {"error": "tau grids differ"}
    text = io.dumps_json(result)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return 0


# --- verify -----------------------------------------------------------------


def cmd_verify(args) -> int:
    tol = acceptance.load_tolerances(Path(args.tolerances).read_text() if args.tolerances else None)
    keys = args.only.split(",") if args.only else None
    results = acceptance.run_all(quick=args.quick, keys=keys, tol=tol, report=lambda r: print(r.line(), flush=True))
    failed = [r.key for r in results if not r.ok]
    if args.json:
        io.write_json(args.json, {"results": [r.to_dict() for r in results], "failed": failed})
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed or skipped" + (f"; failed: {', '.join(failed)}" if failed else ""))
    return 1 if failed else 0


# --- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bosecorr", description="Density-correlation spreading in the 1D Bose-Hubbard chain")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run iTEBD for one gamma")
    s.add_argument("--gamma", type=float, required=True)
    s.add_argument("--delta", type=float)
    s.add_argument("--nmax", type=int)
    s.add_argument("--eps", type=float)
    s.add_argument("--chi-max", type=int)
    s.add_argument("--tau-end", type=float)
    s.add_argument("--dmax", type=int)
    s.add_argument("--output-dt", type=float)
    s.add_argument("--stop-on-q", action="store_true", help="stop once Q(tau) exceeds 2e-4")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("sweep", help="run a set of gammas with per-gamma defaults")
    g = w.add_mutually_exclusive_group(required=True)
    g.add_argument("--gammas", help="comma-separated list")
    g.add_argument("--log-range", nargs=2, type=float, metavar=("LO", "HI"))
    w.add_argument("--per-decade", type=int, default=10)
    w.add_argument("--tau-end", type=float, default=2.0)
    w.add_argument("--chi-max", type=int)
    w.add_argument("--fit-window", nargs=2, type=float, default=(2.2, 3.3))
    w.add_argument("--workers", type=int, help=f"worker processes (default ${WORKERS_ENV} or 1)")
    w.add_argument("--out", required=True)
    w.set_defaults(func=cmd_sweep)

    o = sub.add_parser("oracle", help="tabulate closed forms in the integrable limits")
    o.add_argument("--limit", choices=("inf", "zero"), required=True)
    o.add_argument("--gamma", type=float)
    o.add_argument("--quantity", choices=("Gd", "ctd", "norm", "front_time"), required=True)
    o.add_argument("--tau", default="0:0.05:5", help="start:step:stop, inclusive")
    o.add_argument("--d", help="distances, e.g. 1:30 or 1,2,5")
    o.add_argument("--out")
    o.set_defaults(func=cmd_oracle)

    a = sub.add_parser("analyze", help="fits, fronts and saturation values from table.csv files")
    a.add_argument("tables", nargs="+")
    a.add_argument("--window", nargs=2, type=float, default=(2.2, 3.3), metavar=("T0", "T1"))
    a.add_argument("--out")
    a.set_defaults(func=cmd_analyze)

    v = sub.add_parser("verify", help="run the acceptance suite")
    v.add_argument("--quick", action="store_true")
    v.add_argument("--only", help="comma-separated criterion keys")
    v.add_argument("--tolerances", help="replacement acceptance.ini")
    v.add_argument("--json")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "simulate":
        try:
            config_from_args(args)
        except ValueError as exc:
            parser.error(str(exc))
    if args.command == "oracle":
        try:
            parse_range(args.tau)
            if args.d:
                parse_range(args.d)
        except ValueError as exc:
            parser.error(str(exc))
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
