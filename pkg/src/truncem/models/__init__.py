from .gsc import GSC
from .linear import BSC, DSC, TSC, DiscreteLinearModel
from .maxcauses import MCA, MMCA, effective_weight, winner_indicator
from .mixture import GMM, PMM, log_factorial_constant

MODELS = {"bsc": BSC, "tsc": TSC, "dsc": DSC, "gsc": GSC, "mca": MCA, "mmca": MMCA, "gmm": GMM, "pmm": PMM}

__all__ = [
    "BSC", "TSC", "DSC", "GSC", "MCA", "MMCA", "GMM", "PMM", "MODELS",
    "make_model", "model_from_config",
    "DiscreteLinearModel", "effective_weight", "winner_indicator", "log_factorial_constant",
]


def make_model(name, D, H, Hprime=None, gamma=None, values=None, symmetric=False, rho=None):
    """Instantiate a model by its lower-case name (as used by the CLI and manifests)."""
    from ..core import ConfigError

    name = name.lower()
    if name not in MODELS:
        raise ConfigError(f"unknown model {name!r}; choose from {sorted(MODELS)}")
    if name in ("gmm", "pmm"):
        return MODELS[name](D, H)
    if Hprime is None or gamma is None:
        raise ConfigError(f"model {name} needs --hprime and --gamma")
    if name == "dsc":
        if values is None:
            raise ConfigError("model dsc needs --values (latent alphabet including 0)")
        return DSC(D, H, Hprime, gamma, values, symmetric=symmetric)
    if name in ("mca", "mmca"):
        return MODELS[name](D, H, Hprime, gamma, rho=rho)
    return MODELS[name](D, H, Hprime, gamma)


def model_from_config(cfg):
    return make_model(
        cfg["model"], cfg["D"], cfg["H"], cfg.get("Hprime"), cfg.get("gamma"),
        values=cfg.get("values"), symmetric=cfg.get("symmetric", False), rho=cfg.get("rho"),
    )
