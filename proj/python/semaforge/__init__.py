"""Python bindings for the semaforge C++ library."""

from ._core import (
    __version__,
    blend,
    feather_alpha,
    fid,
    kid,
    roc_auc,
    run_cli,
    ssim,
    window_origins,
)

__all__ = [
    "__version__",
    "blend",
    "feather_alpha",
    "fid",
    "kid",
    "roc_auc",
    "run_cli",
    "ssim",
    "window_origins",
]
