"""Survey-driven firm disclosure ranking, microstructure estimation, validation."""

__version__ = "0.1.0"

from .elo import (
    DEFAULT_INITIAL_RATING,
    DEFAULT_K_FACTOR,
    EloConfig,
    Firm,
    RatingState,
    VoteEvent,
    apply_vote,
    expected_win_probability,
    replay,
    snapshot_ranking,
    with_universe,
)
from .pin import (
    PinFit,
    PinParams,
    TradeDay,
    day_likelihood_direct,
    estimate_pin,
    log_likelihood_factorized,
    pin_ratio,
    simulate_trades,
)
from .proxies import (
    FirmPanelRow,
    assemble_panel,
    compute_baa,
    compute_error,
    compute_tobinq,
    compute_vol,
)
from .validation import (
    PUBLISHED_MODEL,
    KSweepResult,
    RegressionFit,
    WaveCut,
    backward_eliminate,
    ols_fit,
    predict_iai,
    ranks_from_scores,
    spearman_rho,
    sweep_k,
)

__all__ = [
    "__version__",
    "DEFAULT_INITIAL_RATING",
    "DEFAULT_K_FACTOR",
    "EloConfig",
    "Firm",
    "RatingState",
    "VoteEvent",
    "apply_vote",
    "expected_win_probability",
    "replay",
    "snapshot_ranking",
    "with_universe",
    "PinFit",
    "PinParams",
    "TradeDay",
    "day_likelihood_direct",
    "estimate_pin",
    "log_likelihood_factorized",
    "pin_ratio",
    "simulate_trades",
    "FirmPanelRow",
    "assemble_panel",
    "compute_baa",
    "compute_error",
    "compute_tobinq",
    "compute_vol",
    "PUBLISHED_MODEL",
    "KSweepResult",
    "RegressionFit",
    "WaveCut",
    "backward_eliminate",
    "ols_fit",
    "predict_iai",
    "ranks_from_scores",
    "spearman_rho",
    "sweep_k",
]
