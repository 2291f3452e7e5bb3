"""Time the dense corpus decoder on every available kernel backend.

    python benchmarks/bench_decode.py --n 20000 --repeats 5
"""
import argparse
import time

import numpy as np

from biascal.constraints import build_margin_constraints
from biascal.decoder import DenseCorpus, PenaltyView
from biascal.kernels import BACKEND, available_backends
from biascal.metrics import bias_table, count_cooccurrences
from biascal.schema import Family
from biascal.synth import SynthConfig, bias_range, generate


def parse_args():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=20000, help="eval instances")
    p.add_argument("--verbs", type=int, default=20)
    p.add_argument("--roles", type=int, default=3)
    p.add_argument("--nouns", type=int, default=4)
    p.add_argument("--family", choices=[f.value for f in Family], default="VSRL")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--workers", type=int, default=1)
    return p.parse_args()


def main():
    args = parse_args()
    config = SynthConfig(seed=0, n_instances=args.n, n_train=2000, n_verbs=args.verbs, roles_per_verb=args.roles,
                         nouns_per_role=args.nouns, train_bias=bias_range(0.6, 0.9, args.verbs),
                         family=Family(args.family))
    t0 = time.perf_counter()
    train, ev = generate(config)
    dense = DenseCorpus(ev)
    print(f"built {args.n} instances in {time.perf_counter() - t0:.2f} s; default backend: {BACKEND}")

    cs = build_margin_constraints(ev.schema, bias_table(count_cooccurrences(train.gold, ev.schema)), 0.05)
    rng = np.random.default_rng(0)
    penalties = PenaltyView(cs, rng.exponential(0.5, len(cs)))

    reference = None
    for name, impl in sorted(available_backends().items()):
        dense.decode(penalties, args.workers, backend=impl)
        times = []
        for _ in range(args.repeats):
            t0 = time.perf_counter()
            decoded = dense.decode(penalties, args.workers, backend=impl)
            times.append(time.perf_counter() - t0)
        key = (decoded.choice.tobytes(), decoded.parts.tobytes(), decoded.penalized.tobytes())
        same = "reference" if reference is None else ("identical" if key == reference else "DIFFERENT")
        reference = reference or key
        best = min(times)
        print(f"{name:>8}: best {best * 1e3:8.2f} ms  median {np.median(times) * 1e3:8.2f} ms  "
              f"{args.n / best / 1e6:6.2f} M inst/s  output {same}")


if __name__ == "__main__":
    main()
