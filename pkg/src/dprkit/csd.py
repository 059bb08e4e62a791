"""Color structure descriptor (CSD) and histogram-distance cut detection.

A color structure histogram counts, for every quantized color, how many
positions of an 8x8 structuring element (slid with stride 1) contain that
color at least once. Consecutive frames are compared with the L1 distance
of their histograms; a distance above the threshold marks a cut.

``ColorStructureDescriptor`` and ``CutDetector`` expose the same model with
the scikit-learn estimator interface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .errors import DprError

WINDOW = 8
LEVELS = (8, 16, 32)
FRAME_SUFFIXES = (".pgm", ".ppm", ".pnm")


class FrameTooSmall(DprError):
    pass


class DimensionMismatch(DprError):
    pass


class FrameFormatError(DprError):
    pass


def num_positions(height: int, width: int, sw: int = WINDOW) -> int:
    if height < sw or width < sw:
        raise FrameTooSmall(f"{height}x{width} frame is smaller than the {sw}x{sw} structuring element")
    return (height - sw + 1) * (width - sw + 1)


def counter_width(n_positions: int) -> int:
    """Smallest bit width whose counter range reaches ``n_positions``."""
    if n_positions < 1:
        raise ValueError("need at least one window position")
    return (n_positions - 1).bit_length()


@dataclass(frozen=True)
class Quantizer:
    n: int = 8
    mode: str = "rgb"

    def __post_init__(self):
        if self.n not in LEVELS:
            raise ValueError(f"quantization levels must be one of {LEVELS}, got {self.n}")
        if self.mode not in ("gray", "rgb"):
            raise ValueError(f"mode must be 'gray' or 'rgb', got {self.mode!r}")

    @property
    def channel_bits(self) -> tuple[int, int, int]:
        # R gets the first spare bit, then G
        b = int(math.log2(self.n))
        return (b + 2) // 3, (b + 1) // 3, b // 3

    def __call__(self, pixels) -> np.ndarray:
        px = np.asarray(pixels)
        if self.mode == "gray":
            if px.ndim == 3:
                raise FrameFormatError("gray quantizer got a multi-channel frame")
            return (px.astype(np.int64) * self.n) >> 8
        if px.shape[-1:] != (3,):
            raise FrameFormatError("rgb quantizer needs frames with 3 channels")
        rb, gb, bb = self.channel_bits
        px = px.astype(np.int64)
        r = px[..., 0] >> (8 - rb)
        g = px[..., 1] >> (8 - gb)
        b = px[..., 2] >> (8 - bb)
        return (r << (gb + bb)) | (g << bb) | b


def quantize(pixel, q: Quantizer) -> int:
    return int(q(np.asarray(pixel, dtype=np.uint8)))


@dataclass(frozen=True, eq=False)
class ColorStructureHistogram:
    bins: np.ndarray
    n_positions: int

    @property
    def n(self) -> int:
        return len(self.bins)

    def __eq__(self, other):
        if not isinstance(other, ColorStructureHistogram):
            return NotImplemented
        return self.n_positions == other.n_positions and np.array_equal(self.bins, other.bins)


def _frame_shape(frame: np.ndarray) -> tuple[int, int]:
    if frame.ndim not in (2, 3):
        raise FrameFormatError(f"frame must be 2-D gray or 3-D RGB, got {frame.ndim} dims")
    return frame.shape[0], frame.shape[1]


def extract_csd(frame, q: Quantizer, sw: int = WINDOW) -> ColorStructureHistogram:
    frame = np.asarray(frame)
    height, width = _frame_shape(frame)
    n_pos = num_positions(height, width, sw)
    labels = q(frame)
    bins = np.zeros(q.n, dtype=np.int64)
    for color in np.unique(labels):
        # summed-area table of the color mask; a window holds the color iff its sum > 0
        mask = (labels == color).astype(np.int32)
        sat = np.zeros((height + 1, width + 1), dtype=np.int32)
        sat[1:, 1:] = mask.cumsum(0).cumsum(1)
        window = sat[sw:, sw:] - sat[:-sw, sw:] - sat[sw:, :-sw] + sat[:-sw, :-sw]
        bins[color] = np.count_nonzero(window)
    return ColorStructureHistogram(bins, n_pos)


def manhattan_distance(h_cur, h_prev) -> int:
    a = h_cur.bins if isinstance(h_cur, ColorStructureHistogram) else np.asarray(h_cur)
    b = h_prev.bins if isinstance(h_prev, ColorStructureHistogram) else np.asarray(h_prev)
    if a.shape != b.shape:
        raise DimensionMismatch(f"histograms have {a.shape} and {b.shape} bins")
    return int(np.abs(a.astype(np.int64) - b.astype(np.int64)).sum())


@dataclass(frozen=True)
class CutReport:
    cuts: tuple[int, ...]
    key_frames: tuple[int, ...]
    distances: tuple[int, ...]  # distances[i - 1] compares frame i with frame i - 1
    threshold: float
    n_positions: int

    def rows(self) -> list[tuple[int, int, bool]]:
        cut_set = set(self.cuts)
        return [(i, d, i in cut_set) for i, d in enumerate(self.distances, start=1)]


def default_threshold(n_positions: int) -> float:
    """Half of the largest distance a single-color change can produce."""
    return 0.5 * 2 * n_positions


def detect_cuts(frames: Iterable, q: Quantizer, alpha: float | None = None, sw: int = WINDOW) -> CutReport:
    histograms = []
    shape = None
    for i, frame in enumerate(frames):
        frame = np.asarray(frame)
        if shape is None:
            shape = frame.shape
        elif frame.shape != shape:
            raise DimensionMismatch(f"frame {i} has shape {frame.shape}, frame 0 has {shape}")
        histograms.append(extract_csd(frame, q, sw))
    if len(histograms) < 2:
        raise ValueError("cut detection needs at least two frames")
    n_pos = histograms[0].n_positions
    if alpha is None:
        alpha = default_threshold(n_pos)
    distances = tuple(manhattan_distance(histograms[i], histograms[i - 1]) for i in range(1, len(histograms)))
    cuts = tuple(i for i, d in enumerate(distances, start=1) if d > alpha)
    return CutReport(cuts, (0,) + cuts, distances, alpha, n_pos)


# -- frame files -------------------------------------------------------------


def read_frame(path) -> np.ndarray:
    """Load a PGM (gray) or PPM (RGB) file as a uint8 array."""
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(path) as img:
            if img.mode not in ("L", "RGB"):
                raise FrameFormatError(f"{path}: unsupported pixel mode {img.mode} (need 8-bit gray or RGB)")
            return np.asarray(img, dtype=np.uint8).copy()
    except UnidentifiedImageError as exc:
        raise FrameFormatError(f"{path}: not a PGM/PPM file") from exc


def write_frame(path, frame) -> None:
    from PIL import Image

    frame = np.asarray(frame, dtype=np.uint8)
    Image.fromarray(frame, "L" if frame.ndim == 2 else "RGB").save(path)


def frame_paths(directory) -> list[Path]:
    paths = sorted(p for p in Path(directory).iterdir() if p.suffix.lower() in FRAME_SUFFIXES)
    if not paths:
        raise FrameFormatError(f"{directory}: no .pgm/.ppm frames found")
    return paths


# -- estimator interface -----------------------------------------------------


def _as_frames(X) -> Sequence[np.ndarray]:
    if isinstance(X, np.ndarray):
        if X.ndim not in (3, 4):
            raise FrameFormatError("expected an array of frames (n, h, w[, 3])")
        return list(X)
    return [np.asarray(f) for f in X]


class ColorStructureDescriptor(TransformerMixin, BaseEstimator):
    """Map a sequence of frames to their color structure histograms.

    Parameters
    ----------
    n_levels : int
        Number of quantized colors (8, 16 or 32).
    mode : {"rgb", "gray"}
        How pixels are quantized.
    window : int
        Side of the square structuring element.
    """

    def __init__(self, n_levels=8, mode="rgb", window=WINDOW):
        self.n_levels = n_levels
        self.mode = mode
        self.window = window

    def fit(self, X=None, y=None):
        self.quantizer_ = Quantizer(self.n_levels, self.mode)
        if X is not None:
            frames = _as_frames(X)
            if frames:
                h, w = _frame_shape(frames[0])
                self.n_positions_ = num_positions(h, w, self.window)
        return self

    def transform(self, X):
        check_is_fitted(self, "quantizer_")
        frames = _as_frames(X)
        out = np.zeros((len(frames), self.n_levels), dtype=np.int64)
        for i, frame in enumerate(frames):
            out[i] = extract_csd(frame, self.quantizer_, self.window).bins
        return out


class CutDetector(BaseEstimator):
    """Flag frames that start a new shot.

    ``predict`` returns one boolean per frame; frame 0 is never a cut.
    ``threshold=None`` uses :func:`default_threshold` for the fitted frame size.
    """

    def __init__(self, n_levels=8, mode="rgb", threshold=None, window=WINDOW):
        self.n_levels = n_levels
        self.mode = mode
        self.threshold = threshold
        self.window = window

    def fit(self, X, y=None):
        frames = _as_frames(X)
        if not frames:
            raise ValueError("fit needs at least one frame to size the threshold")
        h, w = _frame_shape(frames[0])
        self.n_positions_ = num_positions(h, w, self.window)
        self.threshold_ = default_threshold(self.n_positions_) if self.threshold is None else float(self.threshold)
        self.quantizer_ = Quantizer(self.n_levels, self.mode)
        return self

    def detect(self, X) -> CutReport:
        check_is_fitted(self, "threshold_")
        return detect_cuts(_as_frames(X), self.quantizer_, self.threshold_, self.window)

    def predict(self, X):
        report = self.detect(X)
        flags = np.zeros(len(report.distances) + 1, dtype=bool)
        flags[list(report.cuts)] = True
        return flags
