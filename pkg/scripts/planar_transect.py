"""Planar lattice ensemble: radial transect of ybar and rho with bootstrap errors."""
import argparse

from phenowave.cli import check_transect
from phenowave.config import load_config
from phenowave.ibm import run_replicates
from phenowave.ibm2d import run_2d, transect_ensemble


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default="desk-2d")
    ap.add_argument("--replicates", type=int)
    args = ap.parse_args()
    params, laws, profile, spec = load_config(args.config)
    reps = args.replicates or spec.replicates
    ens = run_replicates(params, laws, profile, spec.snapshots, n_reps=reps, seed=spec.seed, runner=run_2d)
    s = transect_ensemble([rep[-1] for rep in ens.replicates], seed=spec.seed)
    ybar = s.mean.y[s.mean.n.argmax(axis=1)]
    print("     r      rho   rho_se   ybar  ybar_se")
    for i, r in enumerate(s.mean.x):
        print(f"{r:6.2f} {s.mean.rho[i]:8.1f} {s.rho_se[i]:8.2f} {ybar[i]:6.2f} {s.ybar_se[i]:8.3f}")
    sc = check_transect(s, params, spec.checks.get("structure_tol", 0.05))
    print({k: sc[k] for k in ("passed", "rear_ybar", "edge_ybar", "ybar_violation_fraction",
                              "rho_violation_fraction")})


if __name__ == "__main__":
    main()
