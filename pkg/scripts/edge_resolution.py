"""Edge ybar of the continuum front as the space grid is refined (eps fixed, short horizon)."""
import argparse
import time

from phenowave.config import build_bundle, merged_raw, with_overrides
from phenowave.continuum import run_continuum
from phenowave.wave import structure_checks, wave_profile


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps", type=float, default=1e-3)
    ap.add_argument("--T", type=float, default=2.0)
    ap.add_argument("--X", type=float, default=20.0)
    ap.add_argument("--refine", type=int, nargs="*", default=[1, 2, 4, 8])
    args = ap.parse_args()
    raw = with_overrides(merged_raw({"preset": "desk-sweep"}), eps=args.eps, T=args.T, X=args.X,
                         snapshots=[args.T])
    params, laws, profile, spec = build_bundle(raw)
    print(" refine       hx  edge_ybar  rear_ybar  seconds")
    for k in args.refine:
        t0 = time.perf_counter()
        snap = run_continuum(params, laws, profile, [args.T], refine=k)[-1]
        sc = structure_checks(wave_profile(snap, params))
        print(f"{k:7d} {params.dx / k:8.4g} {sc['edge_ybar']:10.3f} {sc['rear_ybar']:10.3f} "
              f"{time.perf_counter() - t0:8.1f}")


if __name__ == "__main__":
    main()
