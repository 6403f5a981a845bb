"""Lattice ensemble against the continuum solver on one preset; prints relative L1 per snapshot."""
import argparse

from phenowave.config import load_config
from phenowave.continuum import run_continuum
from phenowave.ibm import run_replicates
from phenowave.wave import relative_l1


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default="desk-1d-eps1e2")
    ap.add_argument("--replicates", type=int, default=5)
    args = ap.parse_args()
    params, laws, profile, spec = load_config(args.config)
    cont = run_continuum(params, laws, profile, spec.snapshots)
    ens = run_replicates(params, laws, profile, spec.snapshots, n_reps=args.replicates, seed=spec.seed)
    for c, m in zip(cont, ens.mean):
        print(f"t={c.t:<6g} rho L1 {relative_l1(m.rho, c.rho):.4f}  M L1 {relative_l1(m.M, c.M):.4f}")


if __name__ == "__main__":
    main()
