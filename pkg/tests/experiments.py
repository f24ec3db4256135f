"""Desk-scale training experiments shared by the acceptance suite and the demos.

Trained networks are cached under ``.acceptance_cache/`` (or the directory
named by ``AMORTFLOW_CACHE``), keyed by the config hash. Delete the cache to
force retraining.
"""

import os
import sys
import time
from pathlib import Path


from amortflow import RunConfig, build_amortizer, load_checkpoint, save_checkpoint, train_online
from amortflow.training import write_trace

ROOT = Path(__file__).resolve().parent.parent
CONFIG_DIR = ROOT / "configs"
CACHE_DIR = Path(os.environ.get("AMORTFLOW_CACHE", ROOT / ".acceptance_cache"))

EXPERIMENTS = ("mvn_d5", "gmm", "ricker", "sir", "lv_learned", "lv_handcrafted")


def load_config(name):
    return RunConfig.load(CONFIG_DIR / f"{name}.json")


def trained(name, log=print):
    """Return ``(amortizer, run_config, seconds)``, training and caching on first use."""
    config = load_config(name)
    CACHE_DIR.mkdir(parents=True, exist_ok=True)
    path = CACHE_DIR / f"{name}-{config.config_hash()[:16]}.bflw"
    if path.exists():
        amortizer, config, header = load_checkpoint(path)
        return amortizer, config, header["meta"].get("seconds", 0.0)
    amortizer = build_amortizer(config.build_model(), config.network, config.seed)
    start = time.perf_counter()
    trace = train_online(amortizer, config.train, config.seed, log=lambda m: log(f"[{name}] {m}"))
    seconds = time.perf_counter() - start
    write_trace(path.with_suffix(".trace.csv"), trace)
    save_checkpoint(path, amortizer, config, {"seconds": seconds})
    return amortizer, config, seconds


if __name__ == "__main__":
    for name in sys.argv[1:] or EXPERIMENTS:
        _, _, secs = trained(name, log=lambda m: print(m, flush=True))
        print(f"{name}: {secs:.0f}s", flush=True)
