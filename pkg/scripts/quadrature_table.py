"""Normalized top gap (E - lambda_max(J[1,m])) m^2 / b(0) for several potentials and block sizes.

The bound predicts a gap of at least j00^2 = 5.783 up to O(1/m). Also prints
the boundary-decay slope of conditional minimizers for each potential.

    python scripts/quadrature_table.py --ms 16 32 64 128 256
"""
import argparse

from edgelab.minimizers import J00, boundary_decay_rate, quadrature_bound_check
from edgelab.potential import Potential

POTENTIALS = {
    "hermite": (0.0, 0.0, 0.25),
    "quartic": (0.0, 0.0, 0.5, 0.0, 0.25),
    "sextic": (0.1, 0.3, 1.0, 0.2, 0.5, 0.0, 0.1),
}


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--ms", type=int, nargs="+", default=[16, 32, 64, 128])
    args = p.parse_args()
    print(f"j00^2 = {J00**2:.4f}")
    print("potential,m,lambda_max,bound,normalized_gap")
    for name, coeffs in POTENTIALS.items():
        V = Potential(coeffs)
        for m in args.ms:
            q = quadrature_bound_check(V, m)
            print(f"{name},{m},{q.lambda_max:.10f},{q.bound:.10f},{q.normalized_gap:.4f}")
    for name, coeffs in POTENTIALS.items():
        fit = boundary_decay_rate(Potential(coeffs))
        print(f"decay {name}: slope {fit.slope:.3f}{' (saturated)' if fit.saturated else ''}")


if __name__ == "__main__":
    main()
