"""
Learned summaries of a chaotic time series
==========================================

The Ricker model has no tractable likelihood. A convolutional summary network
reads the whole count series and hands a fixed-size vector to the
invertible network. A short run is enough to see parameter recovery and to
compute the standard validation metrics.
"""

import numpy as np

from amortflow import NetworkConfig, TrainConfig, build_amortizer, build_model, sample_posterior_batch, train_online
from amortflow.diagnostics import evaluate, simulate_validation

model = build_model("ricker", t_range=(100, 300))
net = build_amortizer(model, NetworkConfig(n_blocks=4, hidden=(64, 64), summary="temporal", summary_dim=32), seed=0)
train_online(net, TrainConfig(iterations=500, epochs=4), seed=0, log=lambda m: print("  " + m))

theta, data = simulate_validation(model, 100, seed=5, size=300)
result = sample_posterior_batch(net, data, 300, seed=5)
draws = np.stack([s.draws for s in result.samples])
report = evaluate(model, theta, data, draws, seed=5, n_boot=200)
print(report.to_text())

# Longer series carry more information, so posteriors of a well-trained network
# contract as T grows. A run this short may not show it yet; the full-length
# run in configs/ricker.json does.
for length in (100, 300):
    _, d = simulate_validation(model, 50, seed=6, size=length)
    spread = np.median([s.draws.std(0) for s in sample_posterior_batch(net, d, 300, seed=6).samples], axis=0)
    print(f"T={length}: median posterior std", "  ".join(f"{n} {v:.3f}" for n, v in zip(model.param_names, spread)))
