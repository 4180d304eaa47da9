"""Distribution of closed-form vs reprojection disagreement over random
configurations, plus timing.

    python scripts/derivation_check.py --trials 10000 --seed 0
"""
from __future__ import annotations

import argparse
import time
from dataclasses import dataclass

import numpy as np

from planeparallax.verification import DerivationConfig, derivation_errors


@dataclass
class Experiment:
    trials: int = 10_000
    seed: int = 0
    max_rotation_deg: float = 30.0
    max_translation: float = 2.0


def run(exp: Experiment):
    cfg = DerivationConfig(trials=exp.trials, max_rotation_deg=exp.max_rotation_deg,
                           max_translation=exp.max_translation)
    start = time.perf_counter()
    err = derivation_errors(exp.seed, cfg)
    secs = time.perf_counter() - start
    ok = err[np.isfinite(err)]
    print(f"samples {err.size}  valid {ok.size}  seconds {secs:.2f}")
    for q in (50, 90, 99, 99.9, 100):
        print(f"  p{q:<5} {np.percentile(ok, q):.3e} px")


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--trials", type=int, default=Experiment.trials)
    p.add_argument("--seed", type=int, default=Experiment.seed)
    p.add_argument("--max-rotation-deg", type=float, default=Experiment.max_rotation_deg)
    p.add_argument("--max-translation", type=float, default=Experiment.max_translation)
    a = p.parse_args()
    run(Experiment(a.trials, a.seed, a.max_rotation_deg, a.max_translation))


if __name__ == "__main__":
    main()
