"""Continuum sweep over eps: oracle errors, structure diagnostics and widths at the final snapshot."""
import argparse

from phenowave.cli import mid_support_sigma
from phenowave.config import build_bundle, merged_raw, with_overrides
from phenowave.continuum import run_continuum
from phenowave.wave import ORACLE_METRICS, compare_to_oracle, structure_checks, wave_profile


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--preset", default="desk-sweep")
    ap.add_argument("--eps", type=float, nargs="*")
    args = ap.parse_args()
    base = merged_raw({"preset": args.preset})
    cols = list(ORACLE_METRICS) + ["sigma_mid", "rear_ybar", "edge_ybar", "t"]
    print("eps      " + " ".join(f"{c:>10}" for c in cols))
    for eps in args.eps or base["sweep_eps"]:
        params, laws, profile, spec = build_bundle(with_overrides(base, eps=eps))
        snap = run_continuum(params, laws, profile, spec.snapshots)[-1]
        prof = wave_profile(snap, params)
        row = compare_to_oracle(prof, laws, params)
        sc = structure_checks(prof)
        row.update(sigma_mid=mid_support_sigma(prof), rear_ybar=sc["rear_ybar"], edge_ybar=sc["edge_ybar"],
                   t=snap.t)
        print(f"{eps:<8g} " + " ".join(f"{row[c]:10.4g}" for c in cols))


if __name__ == "__main__":
    main()
