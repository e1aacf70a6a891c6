"""Synthetic turbulence-like degradation with known ground truth.

Generates sequences from a clean frame by composing, per frame: a random
smooth displacement (image dancing), Gaussian blur, a slowly varying
multiplicative gain (scintillation) and per-pixel multiplicative noise
(speckle). Each frame draws from an RNG substream derived from
(seed, frame index), so output is reproducible and independent of
generation order.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .imgseq import Frame, Sequence
from .interp import identity_grid, sample_bilinear
from .registration import DisplacementMap

__all__ = [
    "SimConfig",
    "GroundTruth",
    "random_smooth_displacement",
    "degrade",
    "save_displacement_maps",
    "load_displacement_maps",
]

TDSP_MAGIC = b"TDSP"


@dataclass(frozen=True)
class SimConfig:
    """Degradation strengths; all effects are off at 0."""

    dancing_amplitude: float = 0.0  # peak displacement, pixels
    dancing_scale: float = 8.0      # correlation length of the field, pixels
    speckle_contrast: float = 0.0   # sigma of multiplicative noise
    scintillation_amplitude: float = 0.0  # peak of the smooth gain deviation
    blur_sigma: float = 0.0         # Gaussian PSF width, pixels
    seed: int = 0
    frames: int = 1

    def __post_init__(self):
        if self.dancing_amplitude < 0:
            raise ValueError("dancing_amplitude must be >= 0")
        if self.dancing_scale <= 0:
            raise ValueError("dancing_scale must be > 0")
        if self.speckle_contrast < 0:
            raise ValueError("speckle_contrast must be >= 0")
        if self.scintillation_amplitude < 0:
            raise ValueError("scintillation_amplitude must be >= 0")
        if self.blur_sigma < 0:
            raise ValueError("blur_sigma must be >= 0")
        if self.frames < 1:
            raise ValueError("frames must be >= 1")


@dataclass(frozen=True)
class GroundTruth:
    clean: Frame
    displacements: tuple[DisplacementMap, ...]


def _smooth_noise(shape, scale, rng) -> np.ndarray:
    return gaussian_filter(rng.standard_normal(shape), scale, mode="reflect")


def random_smooth_displacement(
    width: int,
    height: int,
    amplitude: float,
    scale: float,
    rng: np.random.Generator,
) -> DisplacementMap:
    """Gaussian-smoothed white noise rescaled to a peak magnitude.

    Each component is white noise smoothed by a Gaussian of width `scale`;
    the field is then rescaled so its maximum vector magnitude equals
    `amplitude` (zero amplitude yields the zero field).
    """
    if amplitude < 0:
        raise ValueError("amplitude must be >= 0")
    if scale <= 0:
        raise ValueError("scale must be > 0")
    if amplitude == 0:
        return DisplacementMap.zero(height, width)
    dx = _smooth_noise((height, width), scale, rng)
    dy = _smooth_noise((height, width), scale, rng)
    peak = float(np.hypot(dx, dy).max())
    if peak == 0.0:
        return DisplacementMap.zero(height, width)
    factor = amplitude / peak
    return DisplacementMap(dx * factor, dy * factor)


def _frame_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


def degrade(clean: Frame, config: SimConfig) -> tuple[Sequence, GroundTruth]:
    """Produce a degraded sequence plus the ground truth used to build it.

    Per frame: warp by a fresh random smooth displacement, blur, multiply
    by the scintillation gain and the speckle factor, clamp to the valid
    intensity range.
    """
    h, w = clean.shape
    px0, py0 = identity_grid(h, w)
    scint_scale = max(min(h, w) / 4.0, 1.0)
    frames = []
    maps = []
    for n in range(config.frames):
        rng = _frame_rng(config.seed, n)
        disp = random_smooth_displacement(
            w, h, config.dancing_amplitude, config.dancing_scale, rng
        )
        maps.append(disp)
        if config.dancing_amplitude > 0:
            img = sample_bilinear(clean.pixels, px0 + disp.dx, py0 + disp.dy)
        else:
            img = clean.pixels.copy()
        if config.blur_sigma > 0:
            img = gaussian_filter(img, config.blur_sigma, mode="nearest")
        if config.scintillation_amplitude > 0:
            gain = _smooth_noise((h, w), scint_scale, rng)
            gain -= gain.mean()
            peak = float(np.abs(gain).max())
            if peak > 0:
                gain *= config.scintillation_amplitude / peak
            img = img * (1.0 + gain)
        if config.speckle_contrast > 0:
            factor = 1.0 + config.speckle_contrast * rng.standard_normal((h, w))
            img = img * np.maximum(factor, 0.0)
        img = np.clip(img, 0.0, clean.max_value)
        frames.append(Frame(img, max_value=clean.max_value))
    truth = GroundTruth(clean=clean, displacements=tuple(maps))
    return Sequence(frames), truth


# ---------------------------------------------------------------------------
# TDSP sidecar: displacement maps on disk.
# Header: magic "TDSP", then width, height, frame count as 4-byte
# little-endian unsigned ints. Body: per frame, row-major (dx, dy) pairs of
# 4-byte little-endian IEEE-754 floats.
# ---------------------------------------------------------------------------


def save_displacement_maps(maps, path: str | os.PathLike) -> None:
    maps = list(maps)
    if not maps:
        raise ValueError("no displacement maps to save")
    h, w = maps[0].shape
    for m in maps:
        if m.shape != (h, w):
            raise ValueError("all displacement maps must share dimensions")
    header = TDSP_MAGIC + struct.pack("<III", w, h, len(maps))
    chunks = [header]
    for m in maps:
        pair = np.empty((h, w, 2), dtype="<f4")
        pair[:, :, 0] = m.dx
        pair[:, :, 1] = m.dy
        chunks.append(pair.tobytes())
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(b"".join(chunks))
    os.replace(tmp, path)


def load_displacement_maps(path: str | os.PathLike) -> list[DisplacementMap]:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != TDSP_MAGIC:
        raise ValueError(f"{path}: not a TDSP displacement file")
    if len(data) < 16:
        raise ValueError(f"{path}: truncated TDSP header")
    w, h, count = struct.unpack("<III", data[4:16])
    expected = 16 + count * h * w * 2 * 4
    if len(data) != expected:
        raise ValueError(
            f"{path}: TDSP size mismatch, expected {expected} bytes, got {len(data)}"
        )
    body = np.frombuffer(data[16:], dtype="<f4").reshape(count, h, w, 2)
    return [
        DisplacementMap(body[n, :, :, 0].astype(np.float64),
                        body[n, :, :, 1].astype(np.float64))
        for n in range(count)
    ]
