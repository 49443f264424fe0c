"""Reward-feature models for personalised preference learning."""

from ._core import (  # noqa: F401
    NUM_BASE_FEATURES,
    ConfigError,
    DataError,
    FeatureExtractor,
    FeatureNormalizer,
    PreferencePair,
    PreferenceRecord,
    RfmError,
    RfmModel,
    adapt,
    capped_log,
    confidence_interval,
    covering_number_bound,
    epsilon_limit_n,
    epsilon_single,
    exact_mean_loss_variance,
    exact_moments,
    generate_pairs,
    label_preference,
    load_model,
    load_preference_pairs,
    load_preference_records,
    monte_carlo_coverage,
    oracle_policy_gain,
    rademacher_excess_bound,
    run_experiment,
    sample_users,
    save_preference_pairs,
    sigmoid,
    train,
    utility,
)

__all__ = [name for name in dir() if not name.startswith("_")]
