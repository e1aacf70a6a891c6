"""Shared scene builders and independent oracles for the test suite.

Oracles here deliberately avoid the library code paths they check: the
pseudo-MTF reference is a plain double loop, edge sharpness is measured by
direct profile interpolation, and displacement inversion uses fixed-point
iteration on the raw arrays.
"""

import numpy as np
from scipy.ndimage import gaussian_filter

from turbseq.imgseq import Frame

# Barchart geometry used across the NLAM tests: five zones of 48 columns,
# strictly increasing spatial frequency (periods 24, 16, 12, 8, 6 px).
BARCHART_ZONES = [(8, 56, 2), (64, 112, 3), (120, 168, 4), (176, 224, 6), (232, 280, 8)]
BARCHART_SIZE = (288, 96)  # (width, height)
BARCHART_ROW_BAND = (16, 80)


def make_smooth_image(height, width, seed=0, lo=0.1, hi=0.9, sigma=6.0):
    """Smooth random field scaled to [lo, hi], as a [0, 1]-range array."""
    rng = np.random.default_rng(seed)
    f = gaussian_filter(rng.standard_normal((height, width)), sigma, mode="reflect")
    f = (f - f.min()) / (f.max() - f.min())
    return lo + (hi - lo) * f


def make_smooth_frame(height, width, seed=0, max_value=255.0):
    return Frame(make_smooth_image(height, width, seed) * max_value, max_value=max_value)


def make_structured_frame(height, width, seed=3):
    """Smooth background plus sharp shapes; good registration target."""
    rng = np.random.default_rng(seed)
    base = gaussian_filter(rng.standard_normal((height, width)), 8.0, mode="reflect")
    base = (base - base.min()) / (base.max() - base.min()) * 140 + 40
    yy, xx = np.mgrid[0:height, 0:width]
    disk = (yy - height * 0.35) ** 2 + (xx - width * 0.4) ** 2 < (height * 0.16) ** 2
    base[disk] = 230.0
    base[int(height * 0.55) : int(height * 0.8), int(width * 0.55) : int(width * 0.85)] = 15.0
    return Frame(np.clip(base, 0, 255), max_value=255)


def make_textured_frame(height, width, seed=3):
    """Scene with fine (2-3 px) high-contrast texture plus large structures.

    The fine texture is what a pointwise temporal median destroys under
    image dancing, which is the regime where warping correction pays off.
    """
    rng = np.random.default_rng(seed)
    base = gaussian_filter(rng.standard_normal((height, width)), 8.0, mode="reflect")
    base = (base - base.min()) / (base.max() - base.min()) * 110 + 50
    tex = gaussian_filter(rng.standard_normal((height, width)), 1.2, mode="reflect")
    base = base + np.where(tex > 0, 45.0, -45.0) * np.minimum(np.abs(tex) * 4, 1.0)
    yy, xx = np.mgrid[0:height, 0:width]
    disk = (yy - height * 0.3) ** 2 + (xx - width * 0.35) ** 2 < (height * 0.14) ** 2
    base[disk] += 60.0
    base[int(height * 0.6) : int(height * 0.85), int(width * 0.55) : int(width * 0.8)] -= 50.0
    return Frame(np.clip(base, 0, 255), max_value=255)


def make_full_texture_frame(height, width, seed=21):
    """Two-scale random field with gradients everywhere; no flat regions."""
    rng = np.random.default_rng(seed)
    a = gaussian_filter(rng.standard_normal((height, width)), 4.0, mode="reflect")
    b = gaussian_filter(rng.standard_normal((height, width)), 10.0, mode="reflect")
    f = a / np.abs(a).max() + b / np.abs(b).max()
    f = (f - f.min()) / (f.max() - f.min())
    return Frame(20 + 215 * f, max_value=255)


def make_step_edge_frame(height, width, lo=30.0, hi=220.0):
    """Vertical step edge at the image center."""
    img = np.where(np.arange(width)[None, :] < width // 2, lo, hi) * np.ones((height, 1))
    return Frame(img, max_value=255)


def rmse(a: Frame, b: Frame) -> float:
    d = a.pixels - b.pixels
    return float(np.sqrt(np.mean(d * d)))


def edge_rise_distance(profile) -> float:
    """10%-90% rise distance of a left-low/right-high profile.

    Asymptotic levels come from the outer eighths of the profile; crossing
    positions are linearly interpolated between samples.
    """
    p = np.asarray(profile, dtype=float)
    n = p.size
    lo = p[: n // 8].mean()
    hi = p[-(n // 8) :].mean()

    def crossing(level):
        above = p >= level
        idx = int(np.argmax(above))
        if idx == 0:
            return 0.0
        x0 = idx - 1
        return x0 + (level - p[x0]) / (p[idx] - p[x0])

    t10 = lo + 0.10 * (hi - lo)
    t90 = lo + 0.90 * (hi - lo)
    return crossing(t90) - crossing(t10)


def nlam_reference(frame: Frame, part) -> list[float]:
    """Naive double-loop evaluation of the per-zone average gain."""
    gains = []
    for zone in part.zones:
        total = 0.0
        for row in part.line_rows:
            signal = [float(frame.pixels[row, c]) for c in range(zone.col_start, zone.col_end)]
            total += abs(max(signal) - min(signal))
        gains.append(total / part.lines)
    return gains


def random_partition_layout(rng, width, height):
    """Random valid partition: ordered zones with increasing frequency."""
    n_zones = int(rng.integers(1, 5))
    edges = np.sort(rng.choice(np.arange(1, width), size=2 * n_zones, replace=False))
    zones = []
    prev_freq = 0.0
    for i in range(n_zones):
        c0, c1 = int(edges[2 * i]), int(edges[2 * i + 1])
        if c1 - c0 < 2:
            c1 = min(c0 + 2, width)
        zw = c1 - c0
        min_cycles = int(np.floor(prev_freq * zw)) + 1
        cycles = int(min_cycles + rng.integers(0, 3))
        zones.append((c0, c1, cycles))
        prev_freq = cycles / zw
    r0 = int(rng.integers(0, height // 2))
    r1 = int(rng.integers(r0, height))
    p = int(rng.integers(1, 7))
    return zones, (r0, r1), p


def invert_displacement(dx, dy, iters=40):
    """Fixed-point inversion: find u with u(x) = -d(x + u(x))."""
    from turbseq.interp import identity_grid, sample_bilinear

    h, w = dx.shape
    px0, py0 = identity_grid(h, w)
    ux = np.zeros_like(dx)
    uy = np.zeros_like(dy)
    for _ in range(iters):
        ux = -sample_bilinear(dx, px0 + ux, py0 + uy)
        uy = -sample_bilinear(dy, px0 + ux, py0 + uy)
    return ux, uy
