"""Image preprocessing chain: TV denoising, unsharp masking, CLAHE, and
multiscale Hessian-based vesselness enhancement.

The chain runs ROF -> UM -> CLAHE to produce the luminance image L used for
region segmentation, computes the multiscale tubular response V on L, and
forms the tracking image T = L * V / 255 (vesselness-gated luminance) on
which ridge detection and centerline tracking operate. All convolutions use
mirror padding so borders do not grow phantom structures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .core import Direction2, GrayImage, Point2, PreprocessParams, clamp_image

CHAMBOLLE_STEP = 0.248


@dataclass(frozen=True)
class HessianEigen:
    """Eigen-decomposition of the scale-normalized Hessian at one point.

    Eigenvalues are ordered by absolute value, |lambda1| <= |lambda2|;
    principal_dir is the eigenvector of lambda1 (the along-vessel direction
    for tubular structures).
    """

    lambda1: float
    lambda2: float
    principal_dir: Direction2


@dataclass(frozen=True)
class PreprocessResult:
    """All intermediate stages of the preprocessing chain."""

    denoised: GrayImage
    sharpened: GrayImage
    equalized: GrayImage    # luminance image L (segmentation input)
    vesselness: GrayImage   # tubular response V, rescaled to [0, 255]
    tracking: GrayImage     # T = L * V / 255 (ridge detection and tracking input)

    def stages(self) -> dict[str, GrayImage]:
        return {
            "denoised": self.denoised,
            "sharpened": self.sharpened,
            "equalized": self.equalized,
            "vesselness": self.vesselness,
            "tracking": self.tracking,
        }


def rof_denoise(img: GrayImage, params: PreprocessParams) -> GrayImage:
    """Total-variation denoising of the ROF model by dual projection.

    Minimizes TV(u) + (lambda/2) ||u - f||^2 with Chambolle's fixed-step
    projection iteration; rof_iters iterations, no convergence test. The
    result never has larger discrete total variation than the input.
    """
    f = img.data
    weight = 1.0 / params.rof_lambda  # dual-ball radius of the TV term
    px = np.zeros_like(f)
    py = np.zeros_like(f)
    for _ in range(params.rof_iters):
        div_p = _divergence(px, py)
        u = div_p - f / weight
        gx, gy = _forward_gradient(u)
        norm = np.sqrt(gx ** 2 + gy ** 2)
        denom = 1.0 + CHAMBOLLE_STEP * norm
        px = (px + CHAMBOLLE_STEP * gx) / denom
        py = (py + CHAMBOLLE_STEP * gy) / denom
    u = f - weight * _divergence(px, py)
    return clamp_image(u)


def _forward_gradient(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    gx = np.zeros_like(u)
    gy = np.zeros_like(u)
    gx[:, :-1] = u[:, 1:] - u[:, :-1]
    gy[:-1, :] = u[1:, :] - u[:-1, :]
    return gx, gy


def _divergence(px: np.ndarray, py: np.ndarray) -> np.ndarray:
    div = np.zeros_like(px)
    div[:, :-1] += px[:, :-1]
    div[:, 1:] -= px[:, :-1]
    div[:-1, :] += py[:-1, :]
    div[1:, :] -= py[:-1, :]
    return div


def total_variation(img: GrayImage | np.ndarray) -> float:
    """Discrete isotropic TV with forward differences."""
    u = img.data if isinstance(img, GrayImage) else np.asarray(img, dtype=np.float64)
    gx, gy = _forward_gradient(u)
    return float(np.sqrt(gx ** 2 + gy ** 2).sum())


def unsharp_mask(img: GrayImage, params: PreprocessParams) -> GrayImage:
    """Sharpen by adding back the high-pass residual of a Gaussian blur."""
    blurred = gaussian_filter(img.data, params.um_sigma, mode="mirror")
    out = img.data + params.um_amount * (img.data - blurred)
    return clamp_image(out)


def clahe(img: GrayImage, params: PreprocessParams) -> GrayImage:
    """Contrast-limited adaptive histogram equalization.

    Per-tile 256-bin histograms are clipped at clahe_clip x tile pixel count
    with the excess spread uniformly over all bins; the per-tile equalization
    maps (255 x clipped CDF, always non-decreasing) are blended by bilinear
    interpolation between tile centers.
    """
    tiles = params.clahe_tiles
    h, w = img.shape
    if w < tiles or h < tiles:
        raise ValueError(f"image {w}x{h} smaller than the {tiles}x{tiles} tile grid")

    bins = np.clip(np.rint(img.data), 0, 255).astype(np.int64)
    # Tile boundaries cover the image; last tiles absorb the remainder.
    xs = np.linspace(0, w, tiles + 1).astype(int)
    ys = np.linspace(0, h, tiles + 1).astype(int)
    maps = np.zeros((tiles, tiles, 256), dtype=np.float64)
    centers_x = np.zeros(tiles)
    centers_y = np.zeros(tiles)
    for ty in range(tiles):
        for tx in range(tiles):
            tile = bins[ys[ty]:ys[ty + 1], xs[tx]:xs[tx + 1]]
            count = tile.size
            hist = np.bincount(tile.ravel(), minlength=256).astype(np.float64)
            limit = params.clahe_clip * count
            excess = np.maximum(hist - limit, 0.0).sum()
            hist = np.minimum(hist, limit) + excess / 256.0
            cdf = np.cumsum(hist) / count
            maps[ty, tx] = 255.0 * cdf
            centers_x[tx] = (xs[tx] + xs[tx + 1] - 1) / 2.0
            centers_y[ty] = (ys[ty] + ys[ty + 1] - 1) / 2.0

    # Bilinear blend of the four surrounding tile maps, clamped at the rim.
    gx = np.arange(w, dtype=np.float64)
    gy = np.arange(h, dtype=np.float64)
    ix = np.clip(np.searchsorted(centers_x, gx) - 1, 0, tiles - 2)
    iy = np.clip(np.searchsorted(centers_y, gy) - 1, 0, tiles - 2)
    fx = np.clip((gx - centers_x[ix]) / (centers_x[ix + 1] - centers_x[ix]), 0.0, 1.0)
    fy = np.clip((gy - centers_y[iy]) / (centers_y[iy + 1] - centers_y[iy]), 0.0, 1.0)

    iy2 = iy[:, None]
    ix2 = ix[None, :]
    fy2 = fy[:, None]
    fx2 = fx[None, :]
    v00 = maps[iy2, ix2, bins]
    v01 = maps[iy2, ix2 + 1, bins]
    v10 = maps[iy2 + 1, ix2, bins]
    v11 = maps[iy2 + 1, ix2 + 1, bins]
    out = ((1 - fy2) * ((1 - fx2) * v00 + fx2 * v01)
           + fy2 * ((1 - fx2) * v10 + fx2 * v11))
    return clamp_image(out)


def clahe_tile_maps(img: GrayImage, params: PreprocessParams) -> np.ndarray:
    """The per-tile equalization maps (tiles x tiles x 256), for inspection."""
    tiles = params.clahe_tiles
    h, w = img.shape
    bins = np.clip(np.rint(img.data), 0, 255).astype(np.int64)
    xs = np.linspace(0, w, tiles + 1).astype(int)
    ys = np.linspace(0, h, tiles + 1).astype(int)
    maps = np.zeros((tiles, tiles, 256), dtype=np.float64)
    for ty in range(tiles):
        for tx in range(tiles):
            tile = bins[ys[ty]:ys[ty + 1], xs[tx]:xs[tx + 1]]
            hist = np.bincount(tile.ravel(), minlength=256).astype(np.float64)
            limit = params.clahe_clip * tile.size
            excess = np.maximum(hist - limit, 0.0).sum()
            hist = np.minimum(hist, limit) + excess / 256.0
            maps[ty, tx] = 255.0 * np.cumsum(hist) / tile.size
    return maps


def hessian_fields(img: GrayImage, sigma: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Scale-normalized (gamma = 2) Gaussian Hessian components (Ixx, Ixy, Iyy).

    The mean is removed first: the sampled derivative kernels have a tiny
    nonzero DC response that would otherwise give flat regions a spurious
    intensity-proportional curvature.
    """
    d = img.data - img.data.mean()
    s2 = sigma ** 2
    ixx = s2 * gaussian_filter(d, sigma, order=(0, 2), mode="mirror")
    iyy = s2 * gaussian_filter(d, sigma, order=(2, 0), mode="mirror")
    ixy = s2 * gaussian_filter(d, sigma, order=(1, 1), mode="mirror")
    return ixx, ixy, iyy


def hessian_eigen_fields(ixx: np.ndarray, ixy: np.ndarray,
                         iyy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel eigenvalues of the symmetric 2x2 Hessian, |l1| <= |l2|."""
    half_trace = (ixx + iyy) / 2.0
    disc = np.sqrt(((ixx - iyy) / 2.0) ** 2 + ixy ** 2)
    e_lo = half_trace - disc
    e_hi = half_trace + disc
    swap = np.abs(e_lo) > np.abs(e_hi)
    lam1 = np.where(swap, e_hi, e_lo)
    lam2 = np.where(swap, e_lo, e_hi)
    return lam1, lam2


def hessian_at(img: GrayImage, p: Point2, sigma: float) -> HessianEigen:
    """Hessian eigen-structure at one (possibly sub-pixel) point.

    The dense sigma-normalized Hessian is sampled bilinearly at p, then
    eigen-decomposed with eigenvalues ordered by absolute value.
    """
    margin = 3.0 * sigma
    if not img.in_bounds(p.x, p.y, margin=margin):
        raise ValueError(f"point {p} closer than 3*sigma = {margin} to the border")
    ixx, ixy, iyy = hessian_fields(img, sigma)
    hxx = _bilinear(ixx, p.x, p.y)
    hxy = _bilinear(ixy, p.x, p.y)
    hyy = _bilinear(iyy, p.x, p.y)
    half_trace = (hxx + hyy) / 2.0
    disc = math.sqrt(((hxx - hyy) / 2.0) ** 2 + hxy ** 2)
    e_lo, e_hi = half_trace - disc, half_trace + disc
    lam1, lam2 = (e_hi, e_lo) if abs(e_lo) > abs(e_hi) else (e_lo, e_hi)
    # Eigenvector of lam1 for the symmetric matrix [[hxx, hxy], [hxy, hyy]].
    if abs(hxy) > 1e-12:
        vx, vy = lam1 - hyy, hxy
    elif abs(hxx - lam1) <= abs(hyy - lam1):
        vx, vy = 1.0, 0.0
    else:
        vx, vy = 0.0, 1.0
    n = math.hypot(vx, vy)
    if n == 0.0:
        vx, vy, n = 1.0, 0.0, 1.0
    return HessianEigen(lam1, lam2, Direction2.from_vector(vx / n, vy / n))


def _bilinear(field: np.ndarray, x: float, y: float) -> float:
    h, w = field.shape
    x = min(max(x, 0.0), w - 1.0)
    y = min(max(y, 0.0), h - 1.0)
    x0, y0 = int(x), int(y)
    x1, y1 = min(x0 + 1, w - 1), min(y0 + 1, h - 1)
    fx, fy = x - x0, y - y0
    return float((1 - fx) * (1 - fy) * field[y0, x0] + fx * (1 - fy) * field[y0, x1]
                 + (1 - fx) * fy * field[y1, x0] + fx * fy * field[y1, x1])


def vesselness(img: GrayImage, params: PreprocessParams) -> GrayImage:
    """Multiscale bright-tube response, rescaled to [0, 255].

    Per scale: blobness exp(-Rb^2 / 2 beta^2) x structureness
    (1 - exp(-S^2 / 2 c^2)), zero wherever lambda2 > 0 (dark-on-bright
    polarity suppressed); the per-pixel maximum over scales is kept. When
    params.frangi_c is None, c is half the maximum Frobenius norm of the
    Hessian at the smallest scale.
    """
    best = np.zeros(img.shape, dtype=np.float64)
    c = params.frangi_c
    for i, sigma in enumerate(params.frangi_scales):
        ixx, ixy, iyy = hessian_fields(img, sigma)
        lam1, lam2 = hessian_eigen_fields(ixx, ixy, iyy)
        if i == 0 and c is None:
            c = 0.5 * float(np.sqrt(ixx ** 2 + 2 * ixy ** 2 + iyy ** 2).max())
            if c <= 0:
                c = 1.0
        rb2 = (lam1 / np.where(lam2 == 0, 1e-30, lam2)) ** 2
        s2 = lam1 ** 2 + lam2 ** 2
        resp = np.exp(-rb2 / (2.0 * params.frangi_beta ** 2)) \
            * (1.0 - np.exp(-s2 / (2.0 * c ** 2)))
        resp[lam2 > 0] = 0.0
        np.maximum(best, resp, out=best)
    peak = best.max()
    if peak > 0:
        best = np.clip(best * (255.0 / peak), 0.0, 255.0)
    return GrayImage(best)


def preprocess(img: GrayImage, params: PreprocessParams | None = None) -> PreprocessResult:
    """Run the full chain and return every stage.

    Deterministic: the same image and parameters give bit-identical outputs.
    """
    params = params or PreprocessParams()
    denoised = rof_denoise(img, params)
    sharpened = unsharp_mask(denoised, params)
    equalized = clahe(sharpened, params)
    vessel = vesselness(equalized, params)
    # The tracking image multiplies the tubular response by the pre-sharpened
    # luminance: sharpening overshoot would imprint twin off-axis crests on
    # the product, and the luminance factor damps the outer sidelobes of the
    # largest Hessian scale. Sub-floor products are zeroed so the background
    # stays exactly dark for the intensity stop and the ridge test.
    product = denoised.data * vessel.data / 255.0
    tracking = GrayImage(np.where(product >= params.frangi_floor, product, 0.0))
    return PreprocessResult(denoised, sharpened, equalized, vessel, tracking)
