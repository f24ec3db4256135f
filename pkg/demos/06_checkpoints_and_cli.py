"""
Checkpoints and the command line
================================

Training is paid once; the checkpoint carries the networks and the run
config, and loads back into an identical object. The same workflow is
available from the shell through ``amortflow train``, ``sample``,
``validate``, ``sbc`` and ``logpdf``.
"""

import json
import tempfile
from pathlib import Path

import numpy as np

from amortflow import RunConfig, build_amortizer, load_checkpoint, save_checkpoint, train_online
from amortflow.cli import main
from amortflow.simulators import write_observations

work = Path(tempfile.mkdtemp())
config = RunConfig.from_dict({
    "model": "mvn",
    "model_options": {"dim": 2},
    "network": {"n_blocks": 2, "hidden": [32]},
    "train": {"iterations": 300, "epochs": 1},
    "seed": 4,
})

net = build_amortizer(config.build_model(), config.network, config.seed)
train_online(net, config.train, config.seed)
ident = save_checkpoint(work / "net.bflw", net, config)
again, cfg, header = load_checkpoint(work / "net.bflw")
x = np.array([[0.2, 1.0]])
print(f"checkpoint {ident}; identical densities after reload:",
      np.array_equal(net.log_posterior(x, x), again.log_posterior(x, x)))

# The same run from the command line (as `amortflow ...` in a shell).
(work / "config.json").write_text(json.dumps(config.to_dict()))
main(["train", "--config", str(work / "config.json"), "--out", str(work / "run")])
write_observations(work / "obs.csv", {"a": x, "b": -x}, cfg.build_model().data_names)
main(["sample", "--checkpoint", str(work / "run" / "checkpoint.bflw"), "--data", str(work / "obs.csv"),
      "--draws", "5", "--out", str(work / "draws.csv")])
print((work / "draws.csv").read_text())

# Errors are one line on stderr and exit status 2.
print("exit status for a missing checkpoint:", main(["sample", "--checkpoint", str(work / "nope.bflw"),
      "--data", str(work / "obs.csv"), "--draws", "5", "--out", str(work / "x.csv")]))
