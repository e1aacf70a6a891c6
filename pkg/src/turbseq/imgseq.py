"""Grayscale image-sequence data model and bit-exact PGM (P5) file I/O.

Pixels are kept as real numbers internally so that averaging filters and
sub-quantization metrology keep full precision; quantization to integers
happens only when a frame is written to disk.
"""

from __future__ import annotations

import os
from typing import Iterable, Sequence as SequenceType

import numpy as np

__all__ = [
    "Frame",
    "Sequence",
    "read_pgm",
    "write_pgm",
    "quantize_to_integers",
    "load_sequence",
    "save_frame",
    "save_sequence",
]


class Frame:
    """A single grayscale image: a height x width grid of real intensities.

    Invariants (enforced at construction):
      * pixels is 2-D with width >= 1 and height >= 1,
      * every value is finite and within [0, max_value].

    Frames are immutable; the pixel array is marked read-only.
    """

    __slots__ = ("_pixels", "_max_value")

    def __init__(self, pixels: np.ndarray, max_value: float = 255):
        arr = np.asarray(pixels, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"frame pixels must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"frame dimensions must be >= 1, got {arr.shape}")
        if max_value <= 0:
            raise ValueError(f"max_value must be positive, got {max_value}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("frame contains non-finite pixel values")
        if arr.min() < 0 or arr.max() > max_value:
            raise ValueError(
                f"pixel values outside [0, {max_value}]: "
                f"range is [{arr.min()}, {arr.max()}]"
            )
        arr = arr.copy()
        arr.flags.writeable = False
        self._pixels = arr
        self._max_value = float(max_value)

    @property
    def pixels(self) -> np.ndarray:
        """Read-only (height, width) float64 array."""
        return self._pixels

    @property
    def max_value(self) -> float:
        return self._max_value

    @property
    def width(self) -> int:
        return self._pixels.shape[1]

    @property
    def height(self) -> int:
        return self._pixels.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self._pixels.shape

    def __repr__(self) -> str:
        return f"Frame({self.width}x{self.height}, max_value={self._max_value:g})"


class Sequence:
    """An ordered list of same-sized frames."""

    __slots__ = ("_frames",)

    def __init__(self, frames: Iterable[Frame]):
        frames = tuple(frames)
        if not frames:
            raise ValueError("sequence must contain at least one frame")
        first = frames[0]
        for n, f in enumerate(frames):
            if not isinstance(f, Frame):
                raise TypeError(f"frame {n} is not a Frame")
            if f.shape != first.shape:
                raise ValueError(
                    f"frame {n} has dimensions {f.width}x{f.height}, "
                    f"expected {first.width}x{first.height}"
                )
            if f.max_value != first.max_value:
                raise ValueError(
                    f"frame {n} has max_value {f.max_value}, "
                    f"expected {first.max_value}"
                )
        self._frames = frames

    @property
    def frames(self) -> tuple[Frame, ...]:
        return self._frames

    @property
    def count(self) -> int:
        return len(self._frames)

    @property
    def width(self) -> int:
        return self._frames[0].width

    @property
    def height(self) -> int:
        return self._frames[0].height

    @property
    def max_value(self) -> float:
        return self._frames[0].max_value

    def stack(self) -> np.ndarray:
        """Pixel data as a (count, height, width) float64 array."""
        return np.stack([f.pixels for f in self._frames], axis=0)

    def __len__(self) -> int:
        return len(self._frames)

    def __iter__(self):
        return iter(self._frames)

    def __getitem__(self, n: int) -> Frame:
        return self._frames[n]

    def __repr__(self) -> str:
        return f"Sequence({self.count} frames, {self.width}x{self.height})"


# ---------------------------------------------------------------------------
# Binary PGM (P5) codec.
#
# Layout: "P5\n<width> <height>\n<maxval>\n" followed by width*height samples,
# 1 byte each for maxval <= 255 and big-endian 2 bytes otherwise. The reader
# additionally tolerates '#' comments and arbitrary whitespace in the header,
# which the format allows.
# ---------------------------------------------------------------------------


def _next_token(data: bytes, pos: int) -> tuple[bytes, int]:
    """Next whitespace-delimited header token, skipping comments."""
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not data[pos : pos + 1].isspace():
        pos += 1
    if start == pos:
        raise ValueError("truncated PGM header")
    return data[start:pos], pos


def read_pgm(path: str | os.PathLike) -> Frame:
    """Read a binary PGM (P5) file, 8- or 16-bit, into a Frame."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:2] != b"P5":
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    pos = 2
    fields = []
    for _ in range(3):
        tok, pos = _next_token(data, pos)
        try:
            fields.append(int(tok))
        except ValueError:
            raise ValueError(f"{path}: malformed PGM header token {tok!r}") from None
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise ValueError(f"{path}: invalid PGM dimensions {width}x{height}")
    if not 1 <= maxval <= 65535:
        raise ValueError(f"{path}: invalid PGM maxval {maxval}")
    pos += 1  # single whitespace byte after maxval
    nbytes = width * height * (2 if maxval > 255 else 1)
    raster = data[pos : pos + nbytes]
    if len(raster) != nbytes:
        raise ValueError(
            f"{path}: truncated raster, expected {nbytes} bytes, got {len(raster)}"
        )
    if len(data) - pos != nbytes:
        raise ValueError(f"{path}: trailing bytes after raster")
    dtype = ">u2" if maxval > 255 else np.uint8
    samples = np.frombuffer(raster, dtype=dtype).reshape(height, width)
    return Frame(samples.astype(np.float64), max_value=maxval)


def quantize_to_integers(pixels: np.ndarray, max_value: float) -> np.ndarray:
    """Round half-up to the nearest integer and clamp to [0, max_value]."""
    maxval = int(round(max_value))
    return np.clip(np.floor(np.asarray(pixels, dtype=np.float64) + 0.5), 0, maxval)


def write_pgm(frame: Frame, path: str | os.PathLike) -> None:
    """Write a Frame as binary PGM (P5).

    Values are rounded half-up to the nearest integer and clamped to
    [0, max_value], so integer-valued frames round-trip bit-exactly.
    The file is written atomically (temp file + rename).
    """
    maxval = int(round(frame.max_value))
    quantized = quantize_to_integers(frame.pixels, maxval)
    if maxval > 255:
        body = quantized.astype(">u2").tobytes()
    else:
        body = quantized.astype(np.uint8).tobytes()
    header = f"P5\n{frame.width} {frame.height}\n{maxval}\n".encode("ascii")
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(header + body)
    os.replace(tmp, path)


def save_frame(frame: Frame, path: str | os.PathLike) -> None:
    """Alias of write_pgm; the canonical single-frame save operation."""
    write_pgm(frame, path)


def load_sequence(paths: SequenceType[str | os.PathLike]) -> Sequence:
    """Load an ordered list of PGM files as a Sequence.

    Frames appear in path order. Raises with the offending index when a
    file fails to parse or its dimensions differ from frame 0's.
    """
    if not paths:
        raise ValueError("no input paths given")
    frames = []
    for n, p in enumerate(paths):
        try:
            frames.append(read_pgm(p))
        except OSError as exc:
            raise OSError(f"frame {n}: cannot read {p}: {exc}") from exc
        except ValueError as exc:
            raise ValueError(f"frame {n}: {exc}") from exc
        if frames[-1].shape != frames[0].shape:
            raise ValueError(
                f"frame {n} ({p}) has dimensions "
                f"{frames[-1].width}x{frames[-1].height}, expected "
                f"{frames[0].width}x{frames[0].height}"
            )
    return Sequence(frames)


def save_sequence(seq: Sequence, paths: SequenceType[str | os.PathLike]) -> None:
    """Write each frame of a sequence to the corresponding path."""
    if len(paths) != seq.count:
        raise ValueError(f"{len(paths)} paths for {seq.count} frames")
    for frame, path in zip(seq, paths):
        write_pgm(frame, path)
