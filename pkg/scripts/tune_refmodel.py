#!/usr/bin/env python3
"""Search reference-model parameters for minimum branch loss.

Pattern search over (alpha, omega, gamma) in log space, subject to the
adaptive run keeping its terminal peak under 1.25 of the bus voltage.
"""

import argparse
import dataclasses
import json
from pathlib import Path

from reflectwave import default_config, validate
from reflectwave.analysis import optimize_refmodel


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--budget", type=int, default=24)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--t-end", type=float, default=260e-6,
                    help="shortened horizon per evaluation (s)")
    ap.add_argument("--out", default="out/tune.json")
    args = ap.parse_args()

    base = default_config()
    cfg = validate(dataclasses.replace(
        base, sim=dataclasses.replace(base.sim, t_end=args.t_end)))
    space = {k: (getattr(cfg.mrac, k) / 3, getattr(cfg.mrac, k) * 3)
             for k in ("alpha", "omega", "gamma")}

    res = optimize_refmodel(cfg, space, budget=args.budget, seed=args.seed)
    print(f"evaluations: {res.evaluations}  feasible: {res.feasible}")
    for k, v in res.params.items():
        print(f"  {k:6s} = {v:.4g}")
    print(f"  loss   = {res.metrics.branch_loss_w:.1f} W  "
          f"peak_ratio = {res.metrics.peak_ratio:.3f}")

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as fh:
        json.dump({"params": res.params, "feasible": res.feasible,
                   "metrics": res.metrics.as_dict(), "log": res.log},
                  fh, indent=2)
    print(f"full log: {out}")


if __name__ == "__main__":
    main()
