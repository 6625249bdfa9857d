"""Train a small optimal-slip estimator and look at where it does well.

A reduced dataset keeps this to a few seconds; the CLI defaults
(`optislip gen-data` then `optislip train`) build the full-size version.

Run: python3 demos/02_train_estimator.py
"""

# %% setup
from pathlib import Path

import numpy as np

from optislip.dataset import FrictionCube, build_dataset, reference_split
from optislip.friction import optimal_slip, reference_surface
from optislip.mlp import TrainConfig, evaluate_rmse, init_model, predict, train
from optislip.sensing import NoiseConfig
from optislip.svgplot import line_chart

OUT = Path(__file__).with_name("out")
OUT.mkdir(exist_ok=True)

# %% dataset: whole curves go to one split, so test curves are never seen in training
splits = build_dataset(FrictionCube(), n_diag=10, n_hyp=30, P=50, stride=4, noise=NoiseConfig(0.005, 0), seed=0)
for name in ("train", "validation", "test"):
    print(f"{name:<10} {len(splits.split(name)):>6} windows")

# %% training
model = init_model((100, 64, 64, 1), seed=0)
report = train(model, splits.train, splits.validation, TrainConfig(learning_rate=0.01, epochs=15, batch_size=32, seed=0),
               progress=lambda e, mse, val: print(f"epoch {e:>2}  train mse {mse:.5f}  val rmse {val:.4f}"))
print(f"best epoch {report.best_epoch}")

# %% held-out curves and the three reference roads
ref = reference_split(50, 1, NoiseConfig(0.005, 0))
print(f"\ntest rmse      {evaluate_rmse(report.model, splits.test):.4f}")
print(f"reference rmse {evaluate_rmse(report.model, ref):.4f}")

# %% estimate along each reference curve, indexed by the slip at the window start
series = {}
for cid, tag in zip((-1, -2, -3), "DWS"):
    rows = ref.curve_ids == cid
    feats = ref.features[rows]
    series[f"{tag} estimate"] = (feats[:, 0], predict(report.model, feats))
    series[f"{tag} truth"] = (feats[:, 0], np.full(rows.sum(), optimal_slip(reference_surface(tag)).lambda_star))
line_chart(series, OUT / "estimates_along_curve.svg", title="Estimated optimal slip per window",
           xlabel="first slip in window", ylabel="optimal slip")
print(f"plot in {OUT}")
