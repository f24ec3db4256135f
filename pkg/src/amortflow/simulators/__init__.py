"""Forward models behind one contract, plus exact posterior oracles where they exist."""

from amortflow.exceptions import ConfigurationError
from amortflow.simulators.base import SimulatorModel, valid_rows
from amortflow.simulators.gmm import GaussianMixture2D, GMMModel, gmm_posterior_oracle, onehot
from amortflow.simulators.io import read_observations, write_observations
from amortflow.simulators.lv import LVHandcraftedModel, LVModel, lv_handcrafted_summary, rk4_integrate
from amortflow.simulators.mvn import MVNModel, mvn_posterior_oracle, random_covariance
from amortflow.simulators.ricker import RickerModel, ricker_latent_path
from amortflow.simulators.sir import SIRModel

MODELS = {
    "mvn": MVNModel,
    "gmm": GMMModel,
    "ricker": RickerModel,
    "sir": SIRModel,
    "lv": LVModel,
    "lv_handcrafted": LVHandcraftedModel,
}


def build_model(name, **options):
    """Instantiate a registered model by name with constructor keyword ``options``."""
    if name not in MODELS:
        raise ConfigurationError(f"unknown model {name!r}; choose from {sorted(MODELS)}")
    try:
        return MODELS[name](**options)
    except TypeError as err:
        raise ConfigurationError(f"bad options for model {name!r}: {err}") from None


__all__ = [
    "GMMModel",
    "GaussianMixture2D",
    "LVHandcraftedModel",
    "LVModel",
    "MODELS",
    "MVNModel",
    "RickerModel",
    "SIRModel",
    "SimulatorModel",
    "build_model",
    "gmm_posterior_oracle",
    "lv_handcrafted_summary",
    "mvn_posterior_oracle",
    "onehot",
    "random_covariance",
    "read_observations",
    "ricker_latent_path",
    "rk4_integrate",
    "valid_rows",
    "write_observations",
]
