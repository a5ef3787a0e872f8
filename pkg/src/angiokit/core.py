"""Shared domain types, configuration defaults, and image/config file I/O.

Coordinate convention used everywhere: x = column, y = row, origin at the
top-left corner, pixel centers at integer coordinates. Angles are stored in
radians internally; config files accept degrees for angle-valued keys.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError


class AngioError(Exception):
    """Base class for all toolkit errors."""


class ImageFormatError(AngioError):
    """Raised for unreadable, malformed, or unsupported image files."""


class ConfigError(AngioError):
    """Raised for malformed config files or invalid parameter values."""


@dataclass(frozen=True)
class Point2:
    """A 2-D point in pixel coordinates (x = column, y = row)."""

    x: float
    y: float

    def dist(self, other: "Point2") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def as_tuple(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class Direction2:
    """A unit direction vector with its angle theta = atan2(uy, ux)."""

    ux: float
    uy: float
    theta: float

    def __post_init__(self):
        n = math.hypot(self.ux, self.uy)
        if abs(n - 1.0) > 1e-9:
            raise ValueError(f"direction not unit length: |u| = {n}")

    @classmethod
    def from_vector(cls, dx: float, dy: float) -> "Direction2":
        n = math.hypot(dx, dy)
        if n == 0.0:
            raise ValueError("zero vector has no direction")
        return cls(dx / n, dy / n, math.atan2(dy / n, dx / n))

    @classmethod
    def from_angle(cls, theta: float) -> "Direction2":
        theta = math.atan2(math.sin(theta), math.cos(theta))
        return cls(math.cos(theta), math.sin(theta), theta)

    def flipped(self) -> "Direction2":
        return Direction2.from_vector(-self.ux, -self.uy)

    def normal(self) -> "Direction2":
        """Perpendicular direction (rotated +90 degrees)."""
        return Direction2.from_vector(-self.uy, self.ux)


class GrayImage:
    """A 2-D grayscale raster with real-valued intensities in [0, 255].

    Pixel data is held row-major as float64; `data[y, x]` is the intensity at
    column x, row y. Instances are treated as immutable after construction.
    """

    def __init__(self, data: np.ndarray):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"image data must be 2-D and non-empty, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("image intensities must be finite")
        if arr.min() < 0.0 or arr.max() > 255.0:
            raise ValueError("image intensities must lie in [0, 255]")
        self._data = arr
        self._data.setflags(write=False)

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def width(self) -> int:
        return self._data.shape[1]

    @property
    def height(self) -> int:
        return self._data.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self._data.shape

    def in_bounds(self, x: float, y: float, margin: float = 0.0) -> bool:
        return (margin <= x <= self.width - 1 - margin
                and margin <= y <= self.height - 1 - margin)

    def sample(self, x: float, y: float) -> float:
        """Bilinear intensity at sub-pixel (x, y), clamped to the image edge."""
        return float(self.sample_many(np.array([x]), np.array([y]))[0])

    def sample_many(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Vectorized bilinear sampling with clamp-to-edge behavior."""
        xs = np.clip(np.asarray(xs, dtype=np.float64), 0.0, self.width - 1.0)
        ys = np.clip(np.asarray(ys, dtype=np.float64), 0.0, self.height - 1.0)
        x0 = np.floor(xs).astype(int)
        y0 = np.floor(ys).astype(int)
        x1 = np.minimum(x0 + 1, self.width - 1)
        y1 = np.minimum(y0 + 1, self.height - 1)
        fx = xs - x0
        fy = ys - y0
        d = self._data
        return ((1 - fx) * (1 - fy) * d[y0, x0] + fx * (1 - fy) * d[y0, x1]
                + (1 - fx) * fy * d[y1, x0] + fx * fy * d[y1, x1])

    def __eq__(self, other) -> bool:
        return isinstance(other, GrayImage) and np.array_equal(self._data, other._data)


def clamp_image(arr: np.ndarray) -> GrayImage:
    """Clamp a float array into [0, 255] and wrap it as a GrayImage."""
    return GrayImage(np.clip(arr, 0.0, 255.0))


@dataclass(frozen=True)
class PreprocessParams:
    """Parameters of the preprocessing chain (denoise, sharpen, equalize, enhance)."""

    rof_lambda: float = 0.125      # fidelity weight of the TV model
    rof_iters: int = 100
    um_amount: float = 1.0         # sharpening gain
    um_sigma: float = 2.0          # blur std-dev, pixels
    clahe_tiles: int = 8           # tile grid count per axis
    clahe_clip: float = 0.01       # normalized histogram clip limit
    frangi_scales: tuple = (1.0, 2.0, 3.0, 4.0)
    frangi_beta: float = 0.5
    frangi_c: float | None = None  # None: half of max Hessian norm, per image
    frangi_floor: float = 5.0      # responses below this (of 255) are zeroed

    def __post_init__(self):
        if self.rof_lambda <= 0 or self.rof_iters <= 0 or self.um_sigma <= 0:
            raise ConfigError("preprocess parameters must be positive")
        if self.clahe_tiles <= 0 or self.clahe_clip <= 0 or self.frangi_beta <= 0:
            raise ConfigError("preprocess parameters must be positive")
        if len(self.frangi_scales) == 0 or list(self.frangi_scales) != sorted(self.frangi_scales):
            raise ConfigError("frangi_scales must be nonempty and ascending")
        if any(s <= 0 for s in self.frangi_scales):
            raise ConfigError("frangi_scales must be positive")


@dataclass(frozen=True)
class CvParams:
    """Parameters of the two-phase region segmentation (level-set evolution)."""

    mu: float = 0.2 * 255.0 ** 2   # contour length penalty
    nu: float = 0.0                # area penalty
    lambda_in: float = 1.0
    lambda_out: float = 1.0
    dt: float = 0.5
    eps: float = 1.0               # Heaviside regularization width
    max_iters: int = 300
    tol: float = 1e-3              # mean-update stopping tolerance

    def __post_init__(self):
        if self.mu <= 0 or self.dt <= 0 or self.eps <= 0 or self.max_iters <= 0:
            raise ConfigError("mu, dt, eps, and max_iters must be positive")
        if self.tol <= 0:
            raise ConfigError("tol must be positive")


@dataclass(frozen=True)
class Config:
    """Tracking and detection parameters, defaulting to the standard settings."""

    search_radius_d: float = 5.0           # arc search radius / step length, pixels
    delta_theta: float = math.radians(45.0)
    bif_r1: float = 7.0                    # bifurcation fan ring inner radius
    bif_r2: float = 12.0                   # bifurcation fan ring outer radius
    bif_delta_theta: float = math.radians(135.0)
    gray_floor_I0: float = 10.0            # minimum tracking intensity
    crowd_tau_P: int = 4                   # visit-count ceiling per locale
    tau_1: float = math.radians(45.0)      # branch vs current direction threshold
    tau_2: float = math.radians(30.0)      # branch vs previous direction threshold
    min_branch_dist_d: float = 5.0
    bif_crowd_tau_B: int = 2               # bifurcation-count ceiling per locale
    stenosis_tau_3: float = 0.8            # stenotic-degree threshold
    energy_lambda: float = 10000.0         # endpoint-attraction weight
    stop_tau_d: float = 5.0                # endpoint arrival distance
    neighborhood_radius_P: float = 5.0     # radius for visit counting
    neighborhood_radius_B: float = 5.0     # radius for bifurcation counting
    rng_seed: int = 0
    seed_budget: int = 200                 # max seeds per automatic run
    coverage_stop: float = 0.01            # stop when unvisited ridge fraction < this
    min_track_points: int = 5
    min_segment_points: int = 5
    diameter_outlier_factor: float = 4.0   # reject diameters above this x running median
    overlay_centerline_color: str = "#00c8ff"
    overlay_contour_color: str = "#00ff6e"
    overlay_finding_color: str = "#ff3030"
    preprocess: PreprocessParams = field(default_factory=PreprocessParams)
    chan_vese: CvParams = field(default_factory=CvParams)

    def __post_init__(self):
        positives = [
            self.search_radius_d, self.delta_theta, self.bif_r1, self.bif_r2,
            self.bif_delta_theta, self.crowd_tau_P, self.tau_1, self.tau_2,
            self.min_branch_dist_d, self.bif_crowd_tau_B, self.energy_lambda,
            self.stop_tau_d, self.neighborhood_radius_P, self.neighborhood_radius_B,
        ]
        if any(v <= 0 for v in positives):
            raise ConfigError("radii, counts, and angle thresholds must be positive")
        if not 0.0 < self.stenosis_tau_3 < 1.0:
            raise ConfigError("stenosis_tau_3 must lie in (0, 1)")
        if self.bif_r1 >= self.bif_r2:
            raise ConfigError("bif_r1 must be smaller than bif_r2")


def config_default() -> Config:
    """The standard parameter set."""
    return Config()


# Config-file keys holding angles, accepted in degrees and converted on load.
_ANGLE_KEYS = {"delta_theta", "bif_delta_theta", "tau_1", "tau_2"}
_COLOR_KEYS = {"overlay_centerline_color", "overlay_contour_color", "overlay_finding_color"}


def load_config(path: str | Path) -> Config:
    """Parse a flat `key = value` UTF-8 config file into a Config.

    Angle keys are given in degrees. Keys prefixed `preprocess.` or
    `chan_vese.` address the nested parameter groups. Unknown keys are errors.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")

    top: dict = {}
    pp: dict = {}
    cv: dict = {}
    cfg_fields = {f.name: f for f in fields(Config)}
    pp_fields = {f.name: f for f in fields(PreprocessParams)}
    cv_fields = {f.name: f for f in fields(CvParams)}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected `key = value`")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key.startswith("preprocess."):
            name = key[len("preprocess."):]
            if name not in pp_fields:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            pp[name] = _parse_value(name, value, lineno, path)
        elif key.startswith("chan_vese."):
            name = key[len("chan_vese."):]
            if name not in cv_fields:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            cv[name] = _parse_value(name, value, lineno, path)
        else:
            if key not in cfg_fields or key in ("preprocess", "chan_vese"):
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            top[key] = _parse_value(key, value, lineno, path)

    base = Config(preprocess=PreprocessParams(**pp), chan_vese=CvParams(**cv), **top)
    return base


def _parse_value(name: str, value: str, lineno: int, path: Path):
    if name in _COLOR_KEYS:
        return value
    if name == "frangi_scales":
        try:
            return tuple(float(v) for v in value.split(","))
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: bad scale list {value!r}")
    try:
        num = float(value)
    except ValueError:
        raise ConfigError(f"{path}:{lineno}: bad numeric value {value!r}")
    if name in _ANGLE_KEYS:
        return math.radians(num)
    if name in ("rof_iters", "clahe_tiles", "rng_seed", "seed_budget", "crowd_tau_P",
                "bif_crowd_tau_B", "max_iters", "min_track_points", "min_segment_points"):
        return int(num)
    return num


def load_gray_image(path: str | Path) -> GrayImage:
    """Load an 8-bit grayscale PNG or PGM (P5) file.

    Intensities are preserved bit-exactly as reals. Missing files, unsupported
    formats, and non-grayscale inputs are reported as distinct errors.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"image file not found: {path}")
    try:
        with Image.open(path) as im:
            fmt = im.format
            if fmt not in ("PNG", "PPM"):
                raise ImageFormatError(f"unsupported image format {fmt!r}: {path}")
            if im.mode != "L":
                raise ImageFormatError(
                    f"expected 8-bit grayscale, got mode {im.mode!r}: {path}")
            arr = np.asarray(im, dtype=np.uint8)
    except UnidentifiedImageError:
        raise ImageFormatError(f"not a readable PNG/PGM image: {path}")
    except (OSError, SyntaxError, ValueError) as exc:
        raise ImageFormatError(f"malformed image file: {path}: {exc}")
    return GrayImage(arr.astype(np.float64))


def save_gray_image(img: GrayImage, path: str | Path) -> None:
    """Write a GrayImage as 8-bit PNG or PGM depending on the file suffix.

    Intensities are rounded to the nearest integer; save-then-load of any
    integer-valued image is bit-identical.
    """
    path = Path(path)
    arr = np.clip(np.rint(img.data), 0, 255).astype(np.uint8)
    pil = Image.fromarray(arr, mode="L")
    suffix = path.suffix.lower()
    if suffix == ".png":
        pil.save(path, format="PNG")
    elif suffix in (".pgm", ".ppm"):
        pil.save(path, format="PPM")
    else:
        raise ImageFormatError(f"unsupported output suffix {suffix!r} (use .png or .pgm)")
