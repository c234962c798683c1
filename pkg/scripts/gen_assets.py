#!/usr/bin/env python3
"""Generate the default datasets and train the two study surrogates.

Produces under assets/:
  dataset_default.jsonl.gz   sigma = 0.05 on all three families
  dataset_material.jsonl.gz  sigma = 0.05 geometry / 0.2 material
  model_default.json         surrogate trained on the default dataset
  model_material.json        surrogate for the material / grid studies
"""

import argparse
import os
import sys
import time

from plateopt import dataset as ds
from plateopt import surrogate as sg


def build(name: str, cfg: ds.GenConfig, outdir: str, train_cfg: sg.TrainConfig):
    data_path = os.path.join(outdir, f"dataset_{name}.jsonl.gz")
    if os.path.exists(data_path):
        print(f"[{name}] dataset exists, loading", flush=True)
        samples = ds.SampleSet.load(data_path)
    else:
        t0 = time.time()
        samples = ds.generate(cfg=cfg)
        ds.split(samples, seed=cfg.seed + 1)
        samples.save(data_path)
        print(f"[{name}] generated {len(samples)} samples in {time.time()-t0:.0f}s",
              flush=True)
    if not samples.has_split:
        ds.split(samples, seed=cfg.seed + 1)
        samples.save(data_path)

    t0 = time.time()
    model = sg.train(samples, train_cfg)
    model.save(os.path.join(outdir, f"model_{name}.json"))
    rep = model.fit_report
    print(f"[{name}] trained in {time.time()-t0:.0f}s: epochs={rep['epochs']} "
          f"R2={rep['r2_test_aggregate']:.4f} rmse={rep['rmse_test_hz']:.3f} Hz",
          flush=True)
    return model


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--outdir", default="assets")
    ap.add_argument("--n", type=int, default=3000)
    ap.add_argument("--hidden-width", type=int, default=30)
    ap.add_argument("--only", choices=["default", "material"], default=None)
    args = ap.parse_args()
    os.makedirs(args.outdir, exist_ok=True)

    tcfg = sg.TrainConfig(hidden_width=args.hidden_width)
    ok = True
    if args.only in (None, "default"):
        m = build("default", ds.GenConfig(n=args.n, seed=11), args.outdir, tcfg)
        ok &= m.fit_report["r2_test_aggregate"] > sg.R2_GATE
    if args.only in (None, "material"):
        m = build(
            "material",
            ds.GenConfig(n=args.n, sigma_material=0.2, seed=23),
            args.outdir,
            tcfg,
        )
        ok &= m.fit_report["r2_test_aggregate"] > sg.R2_GATE
    sys.exit(0 if ok else 1)


if __name__ == "__main__":
    main()
