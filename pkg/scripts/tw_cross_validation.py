"""Tracy-Widom-beta from two routes: the discretized stochastic Airy operator and dense GUE/GOE edges.

    python scripts/tw_cross_validation.py --beta 2 --sao-samples 5000 --dense-n 1000 --dense-samples 2000
"""
import argparse
import json

from edgelab.ensembles import HERMITE, dense_gaussian_edge, rng_stream
from edgelab.local_equilibrium import scaling_constants
from edgelab.sao import SAOConfig, sample_tw_beta
from edgelab.stats import compare_samples


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--beta", type=int, default=2, choices=(1, 2))
    p.add_argument("--h", type=float, default=0.05)
    p.add_argument("--L", type=float, default=12.0)
    p.add_argument("--sao-samples", type=int, default=5000)
    p.add_argument("--dense-n", type=int, default=1000)
    p.add_argument("--dense-samples", type=int, default=2000)
    p.add_argument("--seed", type=int, default=808)
    p.add_argument("--out", default=None, help="write the SAO batch as CSV here")
    args = p.parse_args()

    batch = sample_tw_beta(SAOConfig(beta=float(args.beta), h=args.h, L=args.L, seed=args.seed), args.sao_samples)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(batch.to_csv())
    sc = scaling_constants(HERMITE)
    n = args.dense_n
    lam = dense_gaussian_edge(n, args.beta, rng_stream(args.seed + 1, 0), args.dense_samples)
    dense = sc.gamma * n ** (2 / 3) * (lam - sc.edge)
    print(json.dumps(compare_samples(batch.values, dense), indent=2))


if __name__ == "__main__":
    main()
