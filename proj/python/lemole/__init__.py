"""LLM-enhanced mixture of linear experts for time series forecasting."""

from ._lemole import (
    ChannelStats,
    ConditioningMode,
    DatasetMeta,
    ExpertDomain,
    HashProvider,
    LemoleError,
    Model,
    SeriesFrame,
    SplitSpec,
    SyntheticSpec,
    TrainConfig,
    adf_statistic,
    chrono_split,
    destandardize,
    evaluate,
    few_shot_subset,
    fit_stats,
    fnv1a64,
    hash_encoder,
    irfft,
    load_checkpoint,
    load_csv,
    mae,
    make_synthetic,
    mse,
    persistence_metrics,
    render_dynamic_prompt,
    render_static_prompt,
    rfft,
    save_checkpoint,
    select_channel,
    standardize,
    train,
    window_count,
    window_schedule,
    write_csv,
    write_embedding_file,
)

__all__ = [
    "ChannelStats",
    "ConditioningMode",
    "DatasetMeta",
    "ExpertDomain",
    "HashProvider",
    "LemoleError",
    "Model",
    "SeriesFrame",
    "SplitSpec",
    "SyntheticSpec",
    "TrainConfig",
    "adf_statistic",
    "chrono_split",
    "destandardize",
    "evaluate",
    "few_shot_subset",
    "fit_stats",
    "fnv1a64",
    "hash_encoder",
    "irfft",
    "load_checkpoint",
    "load_csv",
    "mae",
    "make_synthetic",
    "mse",
    "persistence_metrics",
    "render_dynamic_prompt",
    "render_static_prompt",
    "rfft",
    "save_checkpoint",
    "select_channel",
    "standardize",
    "train",
    "window_count",
    "window_schedule",
    "write_csv",
    "write_embedding_file",
]
