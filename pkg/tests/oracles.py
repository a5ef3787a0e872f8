"""Independent oracles used to derive expected test values.

These deliberately avoid the library's own code paths: plain loops and
direct summation wherever the thing they check uses vectorized or
structured algorithms.
"""

import math

import numpy as np
from scipy.ndimage import gaussian_filter


def tv_direct(arr) -> float:
    """Discrete isotropic total variation by direct per-pixel summation."""
    a = np.asarray(arr, dtype=float)
    h, w = a.shape
    total = 0.0
    for y in range(h):
        for x in range(w):
            dx = a[y, x + 1] - a[y, x] if x + 1 < w else 0.0
            dy = a[y + 1, x] - a[y, x] if y + 1 < h else 0.0
            total += math.hypot(dx, dy)
    return total


def finite_diff_hessian(data: np.ndarray, x: int, y: int, sigma: float):
    """Scale-normalized Hessian at an integer pixel by central differences
    on the Gaussian-smoothed image."""
    sm = gaussian_filter(np.asarray(data, dtype=float), sigma, mode="mirror")
    hxx = sm[y, x + 1] - 2 * sm[y, x] + sm[y, x - 1]
    hyy = sm[y + 1, x] - 2 * sm[y, x] + sm[y - 1, x]
    hxy = (sm[y + 1, x + 1] - sm[y + 1, x - 1] - sm[y - 1, x + 1] + sm[y - 1, x - 1]) / 4.0
    s2 = sigma ** 2
    return s2 * hxx, s2 * hxy, s2 * hyy


def brute_force_ridges(gx, gy, lam1, lam2, lam1_tol=0.08) -> set:
    """Per-pixel evaluation of the ridge conditions with plain loops."""
    h, w = gx.shape
    out = set()
    for y in range(h - 1):
        for x in range(w - 1):
            dot_main = gx[y, x] * gx[y + 1, x + 1] + gy[y, x] * gy[y + 1, x + 1]
            dot_anti = gx[y, x + 1] * gx[y + 1, x] + gy[y, x + 1] * gy[y + 1, x]
            if not (dot_main < 0 or dot_anti < 0):
                continue
            ok = True
            for (yy, xx) in ((y, x), (y, x + 1), (y + 1, x), (y + 1, x + 1)):
                if lam2[yy, xx] > 0 or lam1[yy, xx] > lam1_tol * abs(lam2[yy, xx]):
                    ok = False
                    break
            if ok:
                out.add((x, y))
    return out


def shoelace(points) -> float:
    pts = np.asarray(points, dtype=float)
    total = 0.0
    for i in range(len(pts) - 1):
        total += pts[i, 0] * pts[i + 1, 1] - pts[i + 1, 0] * pts[i, 1]
    return total / 2.0


def gaussian_kernel_1d(sigma: float, truncate: float = 4.0) -> np.ndarray:
    r = int(truncate * sigma + 0.5)
    xs = np.arange(-r, r + 1, dtype=float)
    k = np.exp(-xs ** 2 / (2.0 * sigma ** 2))
    return k / k.sum()


def blur_row_direct(row: np.ndarray, sigma: float) -> np.ndarray:
    """1-D Gaussian blur with mirror padding by direct convolution."""
    k = gaussian_kernel_1d(sigma)
    r = len(k) // 2
    padded = np.concatenate([row[1:r + 1][::-1], row, row[-r - 1:-1][::-1]])
    out = np.empty_like(row, dtype=float)
    for i in range(len(row)):
        out[i] = float((padded[i:i + 2 * r + 1] * k).sum())
    return out


def route_arc_energies(img, center, theta, half_width, radius, p_end, lam):
    """Energies over a search arc, computed from scratch (1 degree steps)."""
    n = int(round(2 * half_width / math.radians(1.0))) + 1
    angles = theta + np.linspace(-half_width, half_width, n)
    out = []
    for a in angles:
        px = center[0] + radius * math.cos(a)
        py = center[1] + radius * math.sin(a)
        if not (0 <= px <= img.width - 1 and 0 <= py <= img.height - 1):
            continue
        d = math.hypot(px - p_end[0], py - p_end[1])
        e = img.sample(px, py) + (lam / math.sqrt(d) if d > 0 else math.inf)
        out.append((e, px, py))
    return out
