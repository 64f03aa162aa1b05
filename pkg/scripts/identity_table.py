"""Print identity residuals for one curve at a mesh size and its red refinement."""
import argparse

from symlab.geometry import BoundaryCurve
from symlab.identities import identity_suite
from symlab.mesh import refine, triangulate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cos", type=float, nargs="*", default=[0.0, 0.1],
                    help="cosine coefficients a_1, a_2, ...")
    ap.add_argument("--h", type=float, default=0.02)
    args = ap.parse_args()
    curve = BoundaryCurve(1.0, tuple(args.cos))
    mesh = triangulate(curve, args.h)
    coarse = identity_suite(curve, args.h, mesh=mesh)
    fine = identity_suite(curve, args.h / 2, mesh=refine(mesh))
    print(f"{'identity':16s} {'h':>10s} {'h/2':>10s} {'ratio':>7s}")
    for a, b in zip(coarse, fine):
        if not a.applicable:
            print(f"{a.identity_id:16s} {'n/a':>10s}  {a.reason}")
            continue
        ratio = a.relative_residual / b.relative_residual if b.relative_residual > 0 else float("inf")
        print(f"{a.identity_id:16s} {a.relative_residual:10.3e} {b.relative_residual:10.3e} "
              f"{ratio:7.2f}")


if __name__ == "__main__":
    main()
