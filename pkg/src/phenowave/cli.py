"""Command-line entry point: ``phenowave {ibm,continuum,compare,sweep,ibm2d}``."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .config import build_bundle, load_config, with_overrides
from .continuum import SchemeError, Snapshot, run_continuum
from .ibm import InitializationError, PositivityError, run_replicates, thread_count
from .ibm2d import run_2d, transect_ensemble
from .model import ConfigError
from .wave import (ORACLE_METRICS, EmptySupportError, compare_to_oracle, oracle_E, oracle_M, oracle_rho,
                   profile_speed, relative_l1, structure_checks, wave_profile)

log = logging.getLogger("phenowave")

LOG_NAME = "run.ndjson"


class Run:
    """Artifacts and check results of one invocation."""

    def __init__(self, out: Path, spec, params):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.log_path = self.out / LOG_NAME
        self.report_path = self.out / "report.ndjson"
        for stale in (self.log_path, self.report_path):
            stale.unlink(missing_ok=True)
        self.checks: list[dict] = []
        io.append_ndjson(self.log_path, {
            "event": "start", "mode": spec.mode, "seed": spec.seed, "replicates": spec.replicates,
            "config": spec.config_path, "config_hash": spec.config_hash, "snapshots": spec.snapshots,
            "params": {k: v for k, v in dataclasses.asdict(params).items()},
        })

    def record(self, **rec):
        io.append_ndjson(self.log_path, rec)

    def check(self, name: str, value, tolerance, passed: bool | None, **extra):
        rec = {"event": "check", "metric": name, "value": value, "tolerance": tolerance,
               "passed": None if passed is None else bool(passed), **extra}
        self.checks.append(rec)
        io.append_ndjson(self.report_path, rec)
        self.record(**rec)

    @property
    def ok(self) -> bool:
        return all(c["passed"] is not False for c in self.checks)


def _log_snapshots(run: Run, snaps, engine: str, replicate=None):
    for s in snaps:
        meta = {k: v for k, v in s.meta.items() if k not in ("ring_sites", "engine")}
        run.record(event="snapshot", engine=engine, t=s.t, replicate=replicate, **meta)


def oracle_rows(snap: Snapshot, params, laws):
    w = wave_profile(snap, params)
    rho_or = np.where(w.mask, oracle_rho(np.where(w.mask, w.ybar, params.Y), laws, params), 0.0)
    M_or = oracle_M(w.ybar, w.mask, laws, params)
    E_or = oracle_E(w.mask, params)
    return np.column_stack([np.full(w.x.size, snap.t), w.x, w.ybar, w.rho, rho_or, w.M, M_or, w.E, E_or])


# ------------------------------------------------------------------ modes


def mode_continuum(params, laws, profile, spec, run: Run):
    snaps = run_continuum(params, laws, profile, spec.snapshots, spec.continuum_refine)
    io.emit_snapshot(snaps, "full", run.out / "continuum_full.csv")
    io.emit_snapshot(snaps, "summary", run.out / "continuum_summary.csv")
    _log_snapshots(run, snaps, "continuum")
    return snaps


def mode_ibm(params, laws, profile, spec, run: Run, threads=None):
    ens = run_replicates(params, laws, profile, spec.snapshots, spec.replicates, seed=spec.seed, threads=threads)
    io.emit_snapshot(ens.mean, "full", run.out / "ibm_mean_full.csv")
    io.emit_snapshot(ens.mean, "summary", run.out / "ibm_mean_summary.csv")
    for k, (rep, sd) in enumerate(zip(ens.replicates, ens.seeds)):
        io.emit_snapshot(rep, "summary", run.out / f"ibm_rep{k}_summary.csv")
        run.record(event="replicate", replicate=k, seed=sd)
        _log_snapshots(run, rep, "ibm", k)
    return ens


def _oracle_checks(run: Run, snap, params, laws, engine: str, tol=None):
    metrics = compare_to_oracle(wave_profile(snap, params), laws, params)
    for name in ORACLE_METRICS:
        t = tol if (name == "rho_linf" and tol is not None) else None
        run.check(f"{engine}.oracle.{name}", metrics[name], t, None if t is None else metrics[name] <= t,
                  t_snapshot=snap.t)
    return metrics


def mode_compare(params, laws, profile, spec, run: Run, threads=None):
    cont = mode_continuum(params, laws, profile, spec, run)
    ens = mode_ibm(params, laws, profile, spec, run, threads)
    rows = []
    for c, m in zip(cont, ens.mean):
        d = relative_l1(m.rho, c.rho)
        final = c is cont[-1]
        tol = spec.checks.get("cross_l1_tol") if final else None
        run.check("cross.rho_l1", d, tol, None if tol is None else d <= tol, t_snapshot=c.t)
        rows.append(oracle_rows(c, params, laws))
    io.write_table(run.out / "oracle_continuum.csv", io.ORACLE_COLUMNS, np.vstack(rows))
    io.write_table(run.out / "oracle_ibm.csv", io.ORACLE_COLUMNS,
                   np.vstack([oracle_rows(m, params, laws) for m in ens.mean]))
    _oracle_checks(run, cont[-1], params, laws, "continuum")
    _oracle_checks(run, ens.mean[-1], params, laws, "ibm")
    if len(cont) >= 2:
        c_speed, resid = profile_speed([wave_profile(s, params) for s in cont])
        run.check("continuum.front_speed", c_speed, None, None, residual=resid)
    return cont, ens


def mid_support_sigma(profile) -> float:
    i0, i1 = profile.support
    return float(profile.sigma_y[(i0 + i1) // 2])


def mode_sweep(params, laws, profile, spec, run: Run, threads=None):
    rows = []
    results = {}
    for eps in spec.sweep_eps:
        raw = with_overrides(spec.raw, eps=eps, mode="sweep")
        if "snapshots" not in spec.raw:
            raw.pop("snapshots", None)
        p_e, l_e, prof_e, s_e = build_bundle(raw, spec.config_path)
        snaps = run_continuum(p_e, l_e, prof_e, s_e.snapshots, spec.continuum_refine)
        tag = f"eps{eps:g}"
        io.emit_snapshot(snaps, "summary", run.out / f"sweep_{tag}_continuum_summary.csv")
        _log_snapshots(run, snaps, f"continuum-{tag}")
        profiles = [wave_profile(s, p_e) for s in snaps]
        final = profiles[-1]
        metrics = compare_to_oracle(final, l_e, p_e)
        sc = structure_checks(final, spec.checks.get("structure_tol", 0.05))
        entry = dict(metrics)
        entry.update({k: sc[k] for k in ("ybar_violation_fraction", "rho_violation_fraction",
                                          "rear_ybar", "edge_ybar")})
        entry["sigma_mid"] = mid_support_sigma(final)
        entry["ell"] = final.ell
        entry["t_final"] = final.t
        if len(profiles) >= 2:
            entry["front_speed"], entry["front_speed_residual"] = profile_speed(profiles)
        if spec.sweep_ibm:
            ens = run_replicates(p_e, l_e, prof_e, s_e.snapshots, spec.replicates, seed=spec.seed, threads=threads)
            io.emit_snapshot(ens.mean, "summary", run.out / f"sweep_{tag}_ibm_mean_summary.csv")
            entry["cross_rho_l1"] = relative_l1(ens.mean[-1].rho, snaps[-1].rho)
        results[eps] = entry
        rows += [(eps, k, v) for k, v in entry.items()]
        run.record(event="sweep_point", eps=eps, **entry)

    with open(run.out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eps", "metric", "value"])
        for eps, k, v in rows:
            w.writerow([io.FLOAT_FMT % eps, k, io.FLOAT_FMT % v])

    order = sorted(results, reverse=True)
    for name in ORACLE_METRICS:
        vals = [results[e][name] for e in order]
        mono = all(b < a for a, b in zip(vals, vals[1:]))
        run.check(f"sweep.monotone.{name}", vals, "strictly decreasing in eps", mono)
    small, large = results[order[-1]], results[order[0]]
    c = spec.checks
    if "oracle_rho_linf_tol" in c:
        run.check("sweep.smallest_eps.rho_linf", small["rho_linf"], c["oracle_rho_linf_tol"],
                  small["rho_linf"] <= c["oracle_rho_linf_tol"])
    if "structure_tol" in c:
        worst = max(small["ybar_violation_fraction"], small["rho_violation_fraction"])
        run.check("sweep.smallest_eps.structure_violations", worst, c["structure_tol"], worst <= c["structure_tol"])
    if "rear_ybar_max" in c:
        run.check("sweep.smallest_eps.rear_ybar", small["rear_ybar"], c["rear_ybar_max"],
                  small["rear_ybar"] <= c["rear_ybar_max"])
    if "edge_ybar_min" in c:
        run.check("sweep.smallest_eps.edge_ybar", small["edge_ybar"], c["edge_ybar_min"],
                  small["edge_ybar"] >= c["edge_ybar_min"])
    if "sigma_ratio_min" in c and len(order) >= 2:
        ratio = large["sigma_mid"] / small["sigma_mid"]
        run.check("sweep.sigma_ratio", ratio, c["sigma_ratio_min"], ratio >= c["sigma_ratio_min"])
    return results


def check_transect(summary, params, tol: float, z: float = 3.0) -> dict:
    """Structure checks on a replicate-mean transect, ignoring reversals within ``z`` standard errors."""
    prof = wave_profile(summary.mean, params)
    sc = structure_checks(prof, tol, rho_tol=z * summary.rho_se, ybar_tol=z * summary.ybar_se)
    sc["passed"] = bool(sc["passed"] and sc["edge_ybar"] > sc["rear_ybar"])
    sc["ell"] = prof.ell
    return sc


def mode_ibm2d(params, laws, profile, spec, run: Run, threads=None):
    ens = run_replicates(params, laws, profile, spec.snapshots, spec.replicates, seed=spec.seed, threads=threads,
                         runner=run_2d)
    io.emit_snapshot(ens.mean, "summary", run.out / "ibm2d_mean_summary.csv")
    for k, (rep, sd) in enumerate(zip(ens.replicates, ens.seeds)):
        run.record(event="replicate", replicate=k, seed=sd)
        _log_snapshots(run, rep, "ibm2d", k)
    results = []
    for idx, t in enumerate(ens.times):
        summary = transect_ensemble([rep[idx] for rep in ens.replicates], seed=spec.seed)
        io.emit_snapshot(summary.mean, "summary", run.out / f"ibm2d_transect_t{t:g}.csv")
        if idx == len(ens.times) - 1:
            sc = check_transect(summary, params, spec.checks.get("structure_tol", 0.05))
            run.check("ibm2d.transect_structure", {k: sc[k] for k in ("ybar_violation_fraction",
                      "rho_violation_fraction", "rear_ybar", "edge_ybar")},
                      spec.checks.get("structure_tol", 0.05), sc["passed"])
            results.append(sc)
    return ens, results


MODE_FUNCS = {"ibm": mode_ibm, "continuum": mode_continuum, "compare": mode_compare,
              "sweep": mode_sweep, "ibm2d": mode_ibm2d}


def run(params, laws, profile, spec, threads=None) -> int:
    out = Path(spec.out)
    r = Run(out, spec, params)
    func = MODE_FUNCS[spec.mode]
    if func is mode_continuum:
        func(params, laws, profile, spec, r)
    else:
        func(params, laws, profile, spec, r, threads)
    r.record(event="end", passed=r.ok, checks=len(r.checks))
    if spec.mode in ("compare", "sweep", "ibm2d"):
        return 0 if r.ok else 1
    return 0


# ------------------------------------------------------------------ argv


def _times(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad snapshot list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="phenowave", description="Phenotype-structured invasion fronts: lattice "
                                 "simulator, continuum solver and front diagnostics.")
    sub = ap.add_subparsers(dest="mode", required=True)
    for mode in MODE_FUNCS:
        sp = sub.add_parser(mode)
        sp.add_argument("--config", required=True, help="YAML file or built-in preset name")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--replicates", type=int)
        sp.add_argument("--out")
        sp.add_argument("--snapshots", type=_times, help="comma-separated rescaled times")
        sp.add_argument("--threads", type=int, help="worker threads (default: PHENOWAVE_THREADS or CPU count)")
        sp.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    try:
        params, laws, profile, spec = load_config(args.config)
        overrides = {"mode": args.mode, "seed": args.seed, "replicates": args.replicates, "out": args.out,
                     "snapshots": args.snapshots}
        raw = with_overrides(spec.raw, **overrides)
        digest = spec.config_hash
        params, laws, profile, spec = build_bundle(raw, spec.config_path)
        spec.config_hash = digest
        threads = args.threads if args.threads is not None else thread_count()
        status = run(params, laws, profile, spec, threads)
    except (ConfigError, InitializationError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (SchemeError, PositivityError, EmptySupportError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 3
    log.info("%s finished with status %d; artifacts in %s", spec.mode, status, spec.out)
    return status


if __name__ == "__main__":
    sys.exit(main())
