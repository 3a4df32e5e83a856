"""Unsupervised crack detection by adversarial image restoration."""

from ._crackres import (
    ArgumentError,
    ConfigError,
    DimensionError,
    Error,
    auroc,
    build_mask_pool,
    compute_metrics,
    confusion_counts,
    corrupt,
    detect,
    error_map,
    generate_synthetic_dataset,
    gms_map,
    load_image,
    mae_loss,
    msgms_loss,
    otsu_level,
    otsu_threshold,
    run,
    smooth_bilateral,
    ssim_loss,
)

__all__ = [name for name in dir() if not name.startswith("_")]
