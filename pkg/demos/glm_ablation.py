"""
Switching the GLM output layer on and off
=========================================

The output layer can be fitted as a penalized GLM on the propagated
features of any hidden initializer. This compares Stein and He hidden
layers with and without it on a 20-layer network.
"""

import numpy as np

from steinit.bench import config_from_dict, run_experiment

config = config_from_dict({
    "datasets": [{"name": "abalone", "bundled": "abalone", "width": 8}],
    "depths": [20],
    "schemes": ["SteinGLM", "Stein", "HeNormal+GLM", "HeNormal"],
    "repeats": 3,
    "train": {"max_epochs": 60},
})
report = run_experiment(config, "demo-results/glm-ablation")

for row in report.aggregates:
    trials = report.trials_for(row["dataset"], row["depth"], row["scheme"])
    start = np.mean([t.initial_train_loss for t in trials])
    print(f"{row['scheme']:>13}: initial loss {start:.4f}  "
          f"test RMSE {row['mean']:.4f}±{row['std']:.4f}")
