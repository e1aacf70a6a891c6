"""NLAM pseudo-MTF measurement on barchart imagery.

The image is partitioned into column zones, one spatial frequency each.
Within a configured row band, p lines are sampled; for every zone the gain
is the per-line (max - min) averaged over the lines. The resulting
(zone, gain) curve behaves like an MTF, and curves from several frames can
be averaged into a single pseudo-MTF for the system.

Zone geometry comes from a plain-text config (see load_partition_file)
rather than being auto-detected from the chart.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .imgseq import Frame

__all__ = [
    "Zone",
    "ZonePartition",
    "NLAMCurve",
    "build_partition",
    "extract_signal",
    "nlam_curve",
    "average_nlam",
    "normalize_curve",
    "load_partition_file",
    "parse_partition_text",
    "make_barchart",
]


@dataclass(frozen=True)
class Zone:
    index: int
    col_start: int
    col_end: int  # exclusive
    cycles: int
    frequency: float  # cycles per pixel

    @property
    def width(self) -> int:
        return self.col_end - self.col_start


@dataclass(frozen=True)
class ZonePartition:
    zones: tuple[Zone, ...]
    row_band: tuple[int, int]  # inclusive
    lines: int
    line_rows: tuple[int, ...]


@dataclass(frozen=True)
class NLAMCurve:
    """Ordered (zone index, frequency, gain) triples for one source frame."""

    zone_indices: tuple[int, ...]
    frequencies: tuple[float, ...]
    delta_s: tuple[float, ...]
    provenance: str = ""

    def __post_init__(self):
        if not (len(self.zone_indices) == len(self.frequencies) == len(self.delta_s)):
            raise ValueError("curve fields must have equal lengths")


def build_partition(
    image_width: int,
    image_height: int,
    zones: list[tuple[int, int, int]],
    row_band: tuple[int, int],
    p: int,
) -> ZonePartition:
    """Validate zone geometry and place p evenly spaced sample lines.

    `zones` is a list of (col_start, col_end, cycles); the spatial frequency
    of a zone is cycles / zone width. Zones must lie inside the image, must
    not overlap, and must be ordered by increasing frequency.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if not zones:
        raise ValueError("at least one zone is required")
    r0, r1 = row_band
    if not (0 <= r0 <= r1 < image_height):
        raise ValueError(f"row band {row_band} outside image height {image_height}")

    built = []
    prev_end = None
    prev_freq = None
    for k, (c0, c1, cycles) in enumerate(zones):
        if not (0 <= c0 < c1 <= image_width):
            raise ValueError(f"zone {k} columns [{c0}, {c1}) outside image width {image_width}")
        if cycles < 1:
            raise ValueError(f"zone {k} must contain at least one cycle")
        if prev_end is not None and c0 < prev_end:
            raise ValueError(f"zone {k} overlaps zone {k - 1}")
        freq = cycles / (c1 - c0)
        if prev_freq is not None and freq <= prev_freq:
            raise ValueError(
                f"zone {k} frequency {freq:g} not greater than zone {k - 1}'s {prev_freq:g}"
            )
        built.append(Zone(k, c0, c1, cycles, freq))
        prev_end, prev_freq = c1, freq

    if p == 1:
        rows = ((r0 + r1) // 2,)
    else:
        rows = tuple(int(np.floor(x + 0.5)) for x in np.linspace(r0, r1, p))
    return ZonePartition(tuple(built), (r0, r1), p, rows)


def extract_signal(frame: Frame, part: ZonePartition, j: int, k: int) -> np.ndarray:
    """Intensities along line j restricted to zone k."""
    if not 0 <= j < part.lines:
        raise IndexError(f"line index {j} out of range [0, {part.lines})")
    if not 0 <= k < len(part.zones):
        raise IndexError(f"zone index {k} out of range [0, {len(part.zones)})")
    zone = part.zones[k]
    row = part.line_rows[j]
    return frame.pixels[row, zone.col_start : zone.col_end].copy()


def nlam_curve(frame: Frame, part: ZonePartition, provenance: str = "") -> NLAMCurve:
    """Per-zone average of the per-line (max - min) gains."""
    for zone in part.zones:
        if zone.col_end > frame.width:
            raise ValueError(f"zone {zone.index} exceeds frame width {frame.width}")
    if part.row_band[1] >= frame.height:
        raise ValueError(f"row band {part.row_band} exceeds frame height {frame.height}")
    rows = np.asarray(part.line_rows)
    gains = []
    for zone in part.zones:
        sub = frame.pixels[rows, zone.col_start : zone.col_end]
        span = sub.max(axis=1) - sub.min(axis=1)
        gains.append(float(span.sum()) / part.lines)
    return NLAMCurve(
        zone_indices=tuple(z.index for z in part.zones),
        frequencies=tuple(z.frequency for z in part.zones),
        delta_s=tuple(gains),
        provenance=provenance,
    )


def average_nlam(curves: list[NLAMCurve]) -> NLAMCurve:
    """Pointwise mean of several curves sharing the same zone set."""
    if not curves:
        raise ValueError("no curves to average")
    first = curves[0]
    for c in curves[1:]:
        if c.zone_indices != first.zone_indices or c.frequencies != first.frequencies:
            raise ValueError("curves measured on different zone sets")
    stacked = np.array([c.delta_s for c in curves])
    return NLAMCurve(
        zone_indices=first.zone_indices,
        frequencies=first.frequencies,
        delta_s=tuple(stacked.mean(axis=0)),
        provenance="average",
    )


def normalize_curve(curve: NLAMCurve) -> NLAMCurve:
    """Scale so the lowest-frequency gain reads 1.0."""
    base = curve.delta_s[0]
    if base <= 0:
        raise ValueError("cannot normalize: lowest-frequency gain is not positive")
    return NLAMCurve(
        zone_indices=curve.zone_indices,
        frequencies=curve.frequencies,
        delta_s=tuple(v / base for v in curve.delta_s),
        provenance=curve.provenance,
    )


# ---------------------------------------------------------------------------
# Partition config files.
#
# Plain text, '#' comments, optional [section] headers. Keys:
#   rows = <first> <last>      sampling band, inclusive rows
#   p = <count>                number of sampled lines
#   zone <k>: <c0> <c1> <cycles>   one line per zone, ordered by k
# ---------------------------------------------------------------------------


def parse_partition_text(text: str) -> dict:
    rows = None
    p = None
    zones: dict[int, tuple[int, int, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line or (line.startswith("[") and line.endswith("]")):
            continue
        for sep in ("=", ":"):
            if sep in line:
                key, value = line.split(sep, 1)
                break
        else:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key = key.strip().lower()
        parts = value.split()
        try:
            if key == "rows":
                if len(parts) != 2:
                    raise ValueError
                rows = (int(parts[0]), int(parts[1]))
            elif key == "p":
                if len(parts) != 1:
                    raise ValueError
                p = int(parts[0])
            elif key.startswith("zone"):
                k = int(key[4:].strip())
                if len(parts) != 3 or k in zones:
                    raise ValueError
                zones[k] = (int(parts[0]), int(parts[1]), int(parts[2]))
            else:
                raise ValueError
        except ValueError:
            raise ValueError(f"line {lineno}: malformed entry {raw!r}") from None
    if rows is None:
        raise ValueError("partition config missing 'rows'")
    if p is None:
        raise ValueError("partition config missing 'p'")
    if not zones:
        raise ValueError("partition config declares no zones")
    if sorted(zones) != list(range(len(zones))):
        raise ValueError("zone indices must be 0..n-1 without gaps")
    return {"rows": rows, "p": p, "zones": [zones[k] for k in sorted(zones)]}


def load_partition_file(
    path: str | os.PathLike, image_width: int, image_height: int
) -> ZonePartition:
    with open(path, "r", encoding="utf-8") as fh:
        layout = parse_partition_text(fh.read())
    return build_partition(
        image_width, image_height, layout["zones"], layout["rows"], layout["p"]
    )


def make_barchart(
    width: int,
    height: int,
    zones: list[tuple[int, int, int]],
    low: float = 20.0,
    high: float = 220.0,
    max_value: float = 255.0,
) -> Frame:
    """Ideal bar target: per zone, a square wave of the given cycle count.

    Bars span the full image height; everything outside the zones sits at
    the low level.
    """
    img = np.full((height, width), float(low))
    for c0, c1, cycles in zones:
        period = (c1 - c0) / cycles
        cols = np.arange(c0, c1)
        phase = (cols - c0) % period
        bar = phase < period / 2.0
        img[:, c0:c1] = np.where(bar, float(high), float(low))
    return Frame(img, max_value=max_value)
