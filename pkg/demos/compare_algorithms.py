"""Solve one generated instance with all three algorithms and brute force."""
import argparse

from specoa.instances import GeneratorSpec, brute_force
from specoa.oa import run_lazy_soc, run_oa, run_oa_soc


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--family", default="qkp", choices=["bls_normal", "bls_binary", "qkp"])
    ap.add_argument("--n", type=int, default=10)
    ap.add_argument("--param", type=float, default=0.3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    spec = GeneratorSpec(args.family, args.n, args.param, args.seed)
    inst = spec.generate()
    print(f"{spec.name}: brute force {brute_force(inst).value:.6f}")
    for algo in (run_oa, run_oa_soc, run_lazy_soc):
        rep = algo(inst)
        print(f"  {rep.algo:9s} {rep.status:10s} value={rep.value:.6f} "
              f"iterations={rep.iterations} cuts={rep.cuts} nodes={rep.nodes} "
              f"time={rep.time_s:.2f}s")


if __name__ == "__main__":
    main()
