"""Zeroth-order diffusion Monte Carlo sampling."""

from ._core import (
    ConfigError,
    QueryLedger,
    RgoStarved,
    Schedule,
    Target,
    __version__,
    acceptance_study,
    benchmark_gmm_2d,
    benchmark_gmm_2d_means,
    benchmark_gmm_5d,
    build_schedule,
    ei_step,
    expected_proposals,
    gaussian_target,
    gmm_score_at_time,
    gmm_target,
    ground_truth,
    mmd,
    mode_weights,
    mueller_brown_target,
    ou_kl_bound,
    ou_w2_bound,
    rgo_sample,
    run_experiment,
    run_ula,
    run_zodmc,
    score_error_study,
    validate_config,
    w2_empirical,
    with_annulus,
)

__all__ = [
    "ConfigError",
    "QueryLedger",
    "RgoStarved",
    "Schedule",
    "Target",
    "__version__",
    "acceptance_study",
    "benchmark_gmm_2d",
    "benchmark_gmm_2d_means",
    "benchmark_gmm_5d",
    "build_schedule",
    "ei_step",
    "expected_proposals",
    "gaussian_target",
    "gmm_score_at_time",
    "gmm_target",
    "ground_truth",
    "mmd",
    "mode_weights",
    "mueller_brown_target",
    "ou_kl_bound",
    "ou_w2_bound",
    "rgo_sample",
    "run_experiment",
    "run_ula",
    "run_zodmc",
    "score_error_study",
    "validate_config",
    "w2_empirical",
    "with_annulus",
]
