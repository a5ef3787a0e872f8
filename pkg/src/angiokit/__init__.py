"""Coronary angiogram analysis toolkit.

Automatic whole-tree and interactive per-segment stenosis detection:
preprocessing, two-phase contour segmentation, centerline tracking,
diameter measurement, stenosis grading, and evaluation metrics, verified
against synthetic vessel phantoms.
"""

from .core import (
    AngioError,
    Config,
    ConfigError,
    CvParams,
    Direction2,
    GrayImage,
    ImageFormatError,
    Point2,
    PreprocessParams,
    config_default,
    load_config,
    load_gray_image,
    save_gray_image,
)

__all__ = [
    "AngioError",
    "Config",
    "ConfigError",
    "CvParams",
    "Direction2",
    "GrayImage",
    "ImageFormatError",
    "Point2",
    "PreprocessParams",
    "config_default",
    "load_config",
    "load_gray_image",
    "save_gray_image",
]

__version__ = "0.1.0"
