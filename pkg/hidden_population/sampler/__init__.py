from .chain import VARIANCE_FLOOR, initial_state, run_chain, run_chains
from .models import (
    VARIANCE_NAMES,
    CarDegreesOfFreedom,
    ChainConfig,
    ChainDiagnostics,
    PanelDataset,
    ParameterState,
    PosteriorDraws,
    PriorConfig,
    SamplerBlock,
    SpatialUpdate,
)
from .updates import (
    update_beta,
    update_eta_plus,
    update_sigma2_alpha_eps_mh,
    update_sigma2_eta,
    update_sigma2_u,
    update_sigma2_v,
    update_u_plus,
    update_v,
    update_v_block,
    update_variances_collapsed,
)

__all__ = [
    "VARIANCE_FLOOR",
    "VARIANCE_NAMES",
    "CarDegreesOfFreedom",
    "ChainConfig",
    "ChainDiagnostics",
    "PanelDataset",
    "ParameterState",
    "PosteriorDraws",
    "PriorConfig",
    "SamplerBlock",
    "SpatialUpdate",
    "initial_state",
    "run_chain",
    "run_chains",
    "update_beta",
    "update_eta_plus",
    "update_sigma2_alpha_eps_mh",
    "update_sigma2_eta",
    "update_sigma2_u",
    "update_sigma2_v",
    "update_u_plus",
    "update_v",
    "update_v_block",
    "update_variances_collapsed",
]
