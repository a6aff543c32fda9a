"""GA recovery study: how often does the GA tally find the planted wavelengths?

Generates synthetic spectra with five informative columns out of 200
(three classes of 50), runs the GA with its default settings per seed and
reports how many planted columns land in the top five.

    python3 scripts/ga_recovery.py --seeds 10 --out ga_recovery.json
"""

import argparse
import json
import time

import numpy as np

from nirbench.dataset import synth_spectra
from nirbench.select import GaConfig, ga_run

INFORMATIVE = (3, 7, 11, 19, 23)


def recovery_data(seed, noise_sd=0.5):
    return synth_spectra(50, 200, 3, INFORMATIVE, noise_sd=noise_sd, seed=seed, bump_width=0)


def recover(seed, config=None, noise_sd=0.5):
    """One seeded run; returns (hits, selected indices, seconds, evaluations)."""
    config = config or GaConfig()
    t0 = time.perf_counter()
    res = ga_run(recovery_data(seed, noise_sd), GaConfig(**{**config.to_dict(), "seed": seed}))
    hits = len(set(res.subset.indices.tolist()) & set(INFORMATIVE))
    return hits, res.subset.indices.tolist(), time.perf_counter() - t0, res.n_evaluations


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--first-seed", type=int, default=0)
    ap.add_argument("--noise-sd", type=float, default=0.5)
    ap.add_argument("--generations", type=int, default=100)
    ap.add_argument("--population", type=int, default=50)
    ap.add_argument("--mutation", choices=("bit", "individual"), default="bit")
    ap.add_argument("--out")
    args = ap.parse_args(argv)

    cfg = GaConfig(generations=args.generations, population_size=args.population, mutation=args.mutation)
    rows = []
    for seed in range(args.first_seed, args.first_seed + args.seeds):
        hits, sel, secs, evals = recover(seed, cfg, args.noise_sd)
        rows.append({"seed": seed, "hits": hits, "selected": sel, "seconds": round(secs, 1), "evaluations": evals})
        print(f"seed {seed}: {hits}/5 {sel} {secs:.0f}s {evals} evals", flush=True)
    good = sum(r["hits"] >= 4 for r in rows)
    print(f"runs with >= 4/5 recovered: {good}/{len(rows)}; mean time {np.mean([r['seconds'] for r in rows]):.0f}s")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump({"config": cfg.to_dict(), "noise_sd": args.noise_sd, "runs": rows}, fh, indent=2)


if __name__ == "__main__":
    main()
