"""Reference samples for the conjectured nonregular operator family (k >= 1).

The limit law is conjectural; the script prints the deterministic ground
energy at two resolutions as a self-consistency check and writes a sample
batch to CSV.

    python scripts/nonregular_reference.py --k 1 --beta 2 --samples 2000 --out k1.csv
"""
import argparse
import math

import numpy as np

from edgelab.sao import SAOConfig, deterministic_ground_energy, sample_tw_beta, shooting_eigenvalues


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--beta", type=float, default=2.0)
    p.add_argument("--h", type=float, default=0.05)
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--seed", type=int, default=13)
    p.add_argument("--out", default=None)
    args = p.parse_args()

    v1, _ = deterministic_ground_energy(args.k, hs=(0.04, 0.02, 0.01))
    v2, _ = deterministic_ground_energy(args.k, hs=(0.05, 0.025, 0.0125))
    shoot = shooting_eigenvalues(1, k=args.k, L=SAOConfig(beta=math.inf, k=args.k).L)[0]
    print(f"beta = inf ground energy: {v1:.8f} / {v2:.8f} (two resolutions), shooting {shoot:.8f}")
    batch = sample_tw_beta(SAOConfig(beta=args.beta, k=args.k, h=args.h, seed=args.seed), args.samples)
    v = batch.values
    print(f"-Lambda_0 samples: mean {v.mean():.4f}, variance {v.var(ddof=1):.4f}, quantiles {np.quantile(v, [0.05, 0.5, 0.95]).round(4)}")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(batch.to_csv())


if __name__ == "__main__":
    main()
