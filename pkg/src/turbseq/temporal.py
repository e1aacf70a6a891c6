"""Pixel-wise temporal mean and median filters over an image sequence.

Both filters exist in a whole-sequence form producing a single frame and a
sliding-window form producing a sequence of the same length (window indices
outside the sequence are clamped to the first/last frame).

The median uses the lower of the two middle values for even-length samples,
so its output never contains a value that did not occur at that pixel.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .imgseq import Frame, Sequence

__all__ = [
    "FilterKind",
    "WindowSpec",
    "temporal_mean",
    "temporal_median",
    "sliding_filter",
]


class FilterKind(enum.Enum):
    MEAN = "mean"
    MEDIAN = "median"

    @classmethod
    def from_name(cls, name: str) -> "FilterKind":
        try:
            return cls(name.lower())
        except ValueError:
            raise ValueError(
                f"unknown filter kind {name!r}, expected 'mean' or 'median'"
            ) from None


@dataclass(frozen=True)
class WindowSpec:
    """Sliding-window parameters: window length P and the boundary rule."""

    window: int
    boundary: str = "clamp"

    def __post_init__(self):
        if self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")
        if self.boundary != "clamp":
            raise ValueError(f"unsupported boundary rule {self.boundary!r}")


def _mean_stack(stack: np.ndarray) -> np.ndarray:
    return np.mean(stack, axis=0)


def _median_stack(stack: np.ndarray) -> np.ndarray:
    # Lower median: element (N-1)//2 of the sorted temporal vector. For odd N
    # this is the usual middle element; for even N the lower of the two.
    n = stack.shape[0]
    k = (n - 1) // 2
    part = np.partition(stack, k, axis=0)
    return part[k]


def temporal_mean(seq: Sequence) -> Frame:
    """Per-pixel arithmetic mean over all frames."""
    return Frame(_mean_stack(seq.stack()), max_value=seq.max_value)


def temporal_median(seq: Sequence) -> Frame:
    """Per-pixel temporal median over all frames (lower median for even N)."""
    return Frame(_median_stack(seq.stack()), max_value=seq.max_value)


def sliding_filter(seq: Sequence, kind: FilterKind, spec: WindowSpec) -> Sequence:
    """Time-shifted filter: window of P frames centered at each index.

    The window covers offsets -floor(P/2) .. ceil(P/2)-1; indices falling
    outside the sequence are clamped, so the output has the same count as
    the input.
    """
    if not isinstance(kind, FilterKind):
        raise TypeError(f"kind must be a FilterKind, got {kind!r}")
    stack = seq.stack()
    n = seq.count
    p = spec.window
    lo = -(p // 2)
    hi = (p + 1) // 2  # exclusive
    reduce = _mean_stack if kind is FilterKind.MEAN else _median_stack
    out = []
    for i in range(n):
        idx = np.clip(np.arange(i + lo, i + hi), 0, n - 1)
        out.append(Frame(reduce(stack[idx]), max_value=seq.max_value))
    return Sequence(out)
