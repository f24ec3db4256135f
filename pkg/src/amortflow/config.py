"""Run configuration files (JSON) with strict key checking and a stable hash."""

import hashlib
import json
from dataclasses import dataclass, field, fields

from amortflow.amortizer import NetworkConfig
from amortflow.exceptions import ConfigurationError
from amortflow.simulators import MODELS, build_model
from amortflow.training import TrainConfig

TOP_LEVEL_KEYS = ("model", "model_options", "network", "train", "seed", "paths")


def _from_dict(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigurationError(f"{where}: expected an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigurationError(f"{where}: unknown keys {unknown}")
    try:
        return cls(**data)
    except TypeError as err:
        raise ConfigurationError(f"{where}: {err}") from None


@dataclass
class RunConfig:
    """Everything needed to rebuild a model, its networks and a training run.

    ``model`` is one of ``mvn``, ``gmm``, ``ricker``, ``sir``, ``lv``,
    ``lv_handcrafted``; ``model_options`` are that model's constructor
    arguments. ``paths`` is free-form and excluded from the hash.
    """

    model: str
    model_options: dict = field(default_factory=dict)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 0
    paths: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigurationError(f"unknown model {self.model!r}; choose from {sorted(MODELS)}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigurationError("seed must be an unsigned 64-bit integer")
        self.seed = int(self.seed)

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigurationError("config must be a JSON object")
        unknown = sorted(set(data) - set(TOP_LEVEL_KEYS))
        if unknown:
            raise ConfigurationError(f"unknown config keys {unknown}")
        if "model" not in data:
            raise ConfigurationError("config is missing the 'model' key")
        return cls(
            model=data["model"],
            model_options=dict(data.get("model_options", {})),
            network=_from_dict(NetworkConfig, data.get("network", {}), "network"),
            train=_from_dict(TrainConfig, data.get("train", {}), "train"),
            seed=data.get("seed", 0),
            paths=dict(data.get("paths", {})),
        )

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                data = json.load(fh)
        except json.JSONDecodeError as err:
            raise ConfigurationError(f"{path}: invalid JSON ({err.msg} at line {err.lineno})") from None
        return cls.from_dict(data)

    def build_model(self):
        return build_model(self.model, **self.model_options)

    def to_dict(self):
        return {
            "model": self.model,
            "model_options": self.build_model().options(),
            "network": self.network.to_dict(),
            "train": self.train.to_dict(),
            "seed": self.seed,
            "paths": dict(self.paths),
        }

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def config_hash(self):
        """SHA-256 of the canonical JSON of everything except ``paths``."""
        d = self.to_dict()
        d.pop("paths")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()

    def with_seed(self, seed):
        d = self.to_dict()
        d["seed"] = seed
        return RunConfig.from_dict(d)
