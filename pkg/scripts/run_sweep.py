"""Deficit sweep over r = 1 + eps cos(k theta) with fitted log-log exponents."""
import argparse
import json

from symlab.stability import mode_family, ratio_spread, stability_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--mode", type=int, default=2)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.02, 0.04, 0.06, 0.08])
    ap.add_argument("--h-cap", type=float, default=0.05)
    ap.add_argument("--json", help="write the full sweep result here")
    args = ap.parse_args()
    sw = stability_sweep(mode_family(args.mode), args.eps, h_cap=args.h_cap,
                         family_id=f"cos{args.mode}")
    rows = sw.table_rows()
    cols = list(rows[0])
    print(" ".join(f"{c:>11.11s}" for c in cols))
    for r in rows:
        print(" ".join(f"{'-':>11s}" if r[c] is None else f"{r[c]:11.4e}" for c in cols))
    print()
    for name, f in sw.fitted_exponents.items():
        print(f"{name:12s} slope {f.slope:6.3f} (expected {f.expected}) R2 {f.r2:.5f} "
              f"{'ok' if f.accepted else 'rejected'}")
    for name, vals in sw.ratio_tables.items():
        print(f"{name}: spread {ratio_spread(vals):.3f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(sw.to_dict(), fh, indent=2, sort_keys=True)


if __name__ == "__main__":
    main()
