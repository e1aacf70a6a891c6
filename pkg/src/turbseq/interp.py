"""Low-level grid sampling primitives shared by the warping and simulation code.

All samplers use bilinear interpolation with edge clamping: out-of-range
coordinates are clamped to the nearest border pixel. Coordinates follow
numpy order: ``px`` indexes columns (x), ``py`` indexes rows (y).
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "identity_grid",
    "sample_bilinear",
    "sample_bilinear_with_grad",
    "splat_bilinear",
    "resize_bilinear",
]


def identity_grid(height: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    """Return (px, py) float64 grids holding each pixel's own coordinates."""
    py, px = np.mgrid[0:height, 0:width].astype(np.float64)
    return px, py


def _corner_weights(grid_shape, px, py):
    """Clamp coordinates and split into corner indices plus fractions."""
    h, w = grid_shape
    xc = np.clip(px, 0.0, w - 1.0)
    yc = np.clip(py, 0.0, h - 1.0)
    x0 = np.clip(np.floor(xc), 0, max(w - 2, 0)).astype(np.intp)
    y0 = np.clip(np.floor(yc), 0, max(h - 2, 0)).astype(np.intp)
    fx = xc - x0
    fy = yc - y0
    return x0, y0, fx, fy


def sample_bilinear(img: np.ndarray, px: np.ndarray, py: np.ndarray) -> np.ndarray:
    """Sample img at real-valued positions with edge-clamped bilinear lookup."""
    h, w = img.shape
    if w == 1 and h == 1:
        return np.full(px.shape, img[0, 0], dtype=np.float64)
    x0, y0, fx, fy = _corner_weights(img.shape, px, py)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    flat = img.ravel()
    i00 = flat[y0 * w + x0]
    i01 = flat[y0 * w + x1]
    i10 = flat[y1 * w + x0]
    i11 = flat[y1 * w + x1]
    # the (1-f)*a + f*b form is exact when f is 0 or 1, so integer
    # coordinates reproduce pixel values bit-for-bit
    top = (1.0 - fx) * i00 + fx * i01
    bot = (1.0 - fx) * i10 + fx * i11
    return (1.0 - fy) * top + fy * bot


def sample_bilinear_with_grad(
    img: np.ndarray, px: np.ndarray, py: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sample img and return (value, d/dpx, d/dpy) of the interpolant.

    Where a coordinate is clamped the interpolant is locally constant along
    that axis, so the corresponding derivative is zero.
    """
    h, w = img.shape
    x0, y0, fx, fy = _corner_weights(img.shape, px, py)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    flat = img.ravel()
    i00 = flat[y0 * w + x0]
    i01 = flat[y0 * w + x1]
    i10 = flat[y1 * w + x0]
    i11 = flat[y1 * w + x1]
    top = (1.0 - fx) * i00 + fx * i01
    bot = (1.0 - fx) * i10 + fx * i11
    val = (1.0 - fy) * top + fy * bot
    ddx = (1.0 - fy) * (i01 - i00) + fy * (i11 - i10)
    ddy = bot - top
    inside_x = (px > 0.0) & (px < w - 1.0)
    inside_y = (py > 0.0) & (py < h - 1.0)
    ddx = np.where(inside_x, ddx, 0.0)
    ddy = np.where(inside_y, ddy, 0.0)
    return val, ddx, ddy


def splat_bilinear(
    values: np.ndarray, px: np.ndarray, py: np.ndarray, shape: tuple[int, int]
) -> np.ndarray:
    """Scatter-add values onto a grid with the transposed bilinear weights.

    Exact adjoint of sample_bilinear with the same edge clamping, which is
    what makes the registration gradient match finite differences.
    """
    h, w = shape
    x0, y0, fx, fy = _corner_weights(shape, px, py)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    v = values.ravel()
    fx = fx.ravel()
    fy = fy.ravel()
    idx00 = (y0 * w + x0).ravel()
    idx01 = (y0 * w + x1).ravel()
    idx10 = (y1 * w + x0).ravel()
    idx11 = (y1 * w + x1).ravel()
    n = h * w
    out = np.bincount(idx00, weights=v * (1 - fx) * (1 - fy), minlength=n)
    out += np.bincount(idx01, weights=v * fx * (1 - fy), minlength=n)
    out += np.bincount(idx10, weights=v * (1 - fx) * fy, minlength=n)
    out += np.bincount(idx11, weights=v * fx * fy, minlength=n)
    return out.reshape(h, w)


def resize_bilinear(img: np.ndarray, height: int, width: int) -> np.ndarray:
    """Resize with endpoint-aligned bilinear sampling."""
    h, w = img.shape
    if (h, w) == (height, width):
        return img.copy()
    xs = np.linspace(0.0, w - 1.0, width) if width > 1 else np.array([0.0])
    ys = np.linspace(0.0, h - 1.0, height) if height > 1 else np.array([0.0])
    px, py = np.meshgrid(xs, ys)
    return sample_bilinear(img, px, py)
