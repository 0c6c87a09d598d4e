#!/usr/bin/env python3
"""End-to-end timing run of every rank-metric pipeline at realistic shape
(N=500 examples, K=730 concepts, L=50 labels).

Run:  python3 scripts/run_table_shape.py [--seed 0]
"""

import argparse
import time

import numpy as np

from uace.activations import compute_stats
from uace.baselines import oracle_explain, tcav_explain, ycbm_explain
from uace.estimator import BayesConfig, SparsifyConfig, explain
from uace.metrics import drift, kendall_tau_distance, to_ranked, topk_abs_diff
from uace.synth import gen_random_bundle
from uace.uncertainty import evaluate_uncertainty


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    t0 = time.monotonic()

    def tick(label):
        print(f"  {label:<24s} {time.monotonic() - t0:7.1f}s", flush=True)

    bundle_a = gen_random_bundle(500, 730, 50, d_f=512, d_g=512, seed=args.seed)
    bundle_b = gen_random_bundle(500, 730, 50, d_f=512, d_g=512, seed=args.seed + 1)
    tick("bundles")
    stats_a, stats_b = compute_stats(bundle_a), compute_stats(bundle_b)
    tick("stats")
    expl_a = explain(bundle_a, BayesConfig(), SparsifyConfig(0.02), stats=stats_a)
    expl_b = explain(bundle_b, BayesConfig(), SparsifyConfig(0.02), stats=stats_b)
    tick("posterior estimator")
    oracle = oracle_explain(bundle_a, l1_strength=1e-2)
    tick("oracle lasso")
    ycbm = ycbm_explain(bundle_a, l1_strength=1e-2)
    tick("ycbm lasso")
    tcav = tcav_explain(bundle_a)
    tick("tcav probes")

    names = bundle_a.concept_names
    ranked_oracle = to_ranked(names, oracle.scores[0])
    ranked_uace = to_ranked(names, expl_a.importance[0])
    ranked_ycbm = to_ranked(names, ycbm.scores[0])
    restrict = [n for n, s in zip(names, oracle.scores[0]) if s != 0.0]
    print("  top-20 diff (uace):    ", topk_abs_diff(ranked_oracle, ranked_uace, 20))
    print("  top-20 diff (ycbm):    ", topk_abs_diff(ranked_oracle, ranked_ycbm, 20))
    print("  ranking distance:      ",
          kendall_tau_distance(ranked_oracle, ranked_uace, restrict))
    print("  probe drift:           ",
          drift(ranked_uace, to_ranked(names, expl_b.importance[0])))
    quality = evaluate_uncertainty(stats_a.epsilon, bundle_a)
    print("  uncertainty cos-sim:   ", np.round(quality["cos_sim"], 3))
    tick("metrics")
    print(f"total {time.monotonic() - t0:.1f}s")


if __name__ == "__main__":
    main()
