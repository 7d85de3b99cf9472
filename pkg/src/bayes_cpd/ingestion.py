"""Turn a raw scalar monitoring series into a density-valued sequence.

Pipeline order: boxplot-filter the full series, estimate the common
support from what survives, map values onto [0, 1], split into fixed
time windows, and fit one boundary-reflected Gaussian KDE per window.
Each retained window becomes one density, in time order.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .cleaning import DEFAULT_WHISKER, boxplot_keep_mask
from .density import DensityFunction, Grid, integrate, zero_avoid
from .engine import DistributionalSequence
from .errors import DegenerateInputError, StructuralError
from .seeds import parallel_map

DEFAULT_MIN_SEGMENT_COUNT = 30
DEFAULT_MARGIN_FRACTION = 0.05
MIN_BANDWIDTH = 1e-3

#: Sample-block size bounding memory of the vectorized KDE evaluation.
_KDE_BLOCK = 4096


@dataclass(frozen=True)
class RawSeries:
    """Scalar feature samples at non-decreasing timestamps (epoch seconds)."""

    timestamps: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.timestamps, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.float64)
        if t.shape != v.shape or t.ndim != 1:
            raise StructuralError("timestamps and values must be equal-length 1-d")
        if t.size == 0:
            raise StructuralError("empty series")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise StructuralError("non-finite timestamp or value")
        if np.any(np.diff(t) < 0):
            raise StructuralError("timestamps must be non-decreasing")
        object.__setattr__(self, "timestamps", t)
        object.__setattr__(self, "values", v)

    @property
    def size(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class SupportEstimate:
    """Common support of the feature values, with a symmetric margin."""

    lower: float
    upper: float
    margin_fraction: float

    def __post_init__(self):
        if not self.lower < self.upper:
            raise DegenerateInputError(
                f"support must satisfy lower < upper, got [{self.lower}, {self.upper}]"
            )


def estimate_support(values, margin_fraction: float = DEFAULT_MARGIN_FRACTION) -> SupportEstimate:
    """Min/max support widened by ``margin_fraction`` of the range each side."""
    values = np.asarray(values, dtype=np.float64)
    if margin_fraction < 0:
        raise StructuralError(f"margin_fraction must be >= 0, got {margin_fraction}")
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        raise DegenerateInputError("all values equal; support is degenerate")
    span = hi - lo
    return SupportEstimate(lo - margin_fraction * span, hi + margin_fraction * span,
                           margin_fraction)


def normalize(values, support: SupportEstimate) -> np.ndarray:
    """Map values onto [0, 1] by the support transform, clamping overshoots."""
    values = np.asarray(values, dtype=np.float64)
    unit = (values - support.lower) / (support.upper - support.lower)
    return np.clip(unit, 0.0, 1.0)


def denormalize(unit_values, support: SupportEstimate) -> np.ndarray:
    """Inverse of :func:`normalize` on in-range values."""
    unit_values = np.asarray(unit_values, dtype=np.float64)
    return support.lower + unit_values * (support.upper - support.lower)


def count_outside_support(values, support: SupportEstimate) -> int:
    values = np.asarray(values, dtype=np.float64)
    return int(np.count_nonzero((values < support.lower) | (values > support.upper)))


@dataclass(frozen=True)
class SegmentationResult:
    """Retained window values plus records of everything dropped."""

    segments: list[np.ndarray]
    segment_indices: list[int]
    dropped: list[tuple[int, int]]  # (window index, sample count)


def segment(
    series: RawSeries,
    window_seconds: float,
    min_count: int = DEFAULT_MIN_SEGMENT_COUNT,
) -> SegmentationResult:
    """Split into contiguous windows aligned to the first timestamp.

    Window j covers [t0 + j*w, t0 + (j+1)*w); windows with fewer than
    ``min_count`` samples (including empty ones inside gaps) are dropped
    and recorded.
    """
    if window_seconds <= 0:
        raise StructuralError(f"window must be positive, got {window_seconds}")
    t0 = series.timestamps[0]
    window_ids = np.floor((series.timestamps - t0) / window_seconds).astype(np.int64)
    segments, indices, dropped = [], [], []
    for j in range(int(window_ids[-1]) + 1):
        values = series.values[window_ids == j]
        if values.size >= min_count:
            segments.append(values)
            indices.append(j)
        else:
            dropped.append((j, int(values.size)))
    return SegmentationResult(segments=segments, segment_indices=indices, dropped=dropped)


def silverman_bandwidth(values) -> float:
    """Silverman's rule 1.06 * min(sd, IQR/1.34) * n^(-1/5), floored at 1e-3."""
    values = np.asarray(values, dtype=np.float64)
    n = values.size
    if n < 2:
        raise StructuralError("bandwidth needs at least 2 samples")
    sd = float(np.std(values, ddof=1))
    q1, q3 = np.percentile(values, [25, 75])
    scale = min(sd, (q3 - q1) / 1.34)
    bandwidth = 1.06 * scale * n ** (-0.2)
    if bandwidth < MIN_BANDWIDTH:
        warnings.warn(
            f"bandwidth {bandwidth:.3g} below floor; using {MIN_BANDWIDTH}"
        )
        return MIN_BANDWIDTH
    return float(bandwidth)


def kde(values, grid: Grid, bandwidth: float | None = None) -> DensityFunction:
    """Gaussian KDE on [0, 1] with boundary reflection at both endpoints.

    Mass leaking past an endpoint is folded back by mirroring every sample
    across 0 and across 1.  The estimate is renormalized to unit trapezoid
    integral and passed through the zero-avoidance floor.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise StructuralError("KDE needs at least one sample")
    if np.any((values < 0.0) | (values > 1.0)):
        raise StructuralError("KDE samples must lie in [0, 1]")
    if bandwidth is None:
        bandwidth = silverman_bandwidth(values)
    if bandwidth <= 0:
        raise StructuralError(f"bandwidth must be positive, got {bandwidth}")
    nodes = grid.nodes[:, None]
    total = np.zeros(grid.node_count)
    for start in range(0, values.size, _KDE_BLOCK):
        block = values[start:start + _KDE_BLOCK][None, :]
        for mirrored in (block, -block, 2.0 - block):
            z = (nodes - mirrored) / bandwidth
            total += np.exp(-0.5 * z * z).sum(axis=1)
    total /= values.size * bandwidth * np.sqrt(2.0 * np.pi)
    estimate = DensityFunction(grid, total / integrate(total, grid))
    return zero_avoid(estimate)


@dataclass(frozen=True)
class IngestConfig:
    """Settings for the raw-series-to-densities pipeline."""

    window_seconds: float = 86400.0
    whisker: float = DEFAULT_WHISKER
    margin_fraction: float = DEFAULT_MARGIN_FRACTION
    grid_nodes: int = 512
    bandwidth: float | None = None  # None = Silverman per segment
    min_count: int = DEFAULT_MIN_SEGMENT_COUNT
    support: tuple[float, float] | None = None  # externally estimated, optional
    threads: int = 1


@dataclass(frozen=True)
class IngestionReport:
    """What the pipeline kept, dropped, clamped, and smoothed with."""

    segments_total: int
    segments_dropped: list[tuple[int, int]]
    scalar_outliers_removed: int
    clamped_values: int
    support: SupportEstimate
    bandwidth_per_segment: list[float] = field(default_factory=list)


def build_sequence(
    series: RawSeries, config: IngestConfig | None = None
) -> tuple[DistributionalSequence, IngestionReport]:
    """Full ingestion: filter, support, normalize, segment, per-window KDE."""
    config = config or IngestConfig()
    grid = Grid(config.grid_nodes)

    keep = boxplot_keep_mask(series.values, config.whisker)
    removed = int(np.count_nonzero(~keep))
    filtered = RawSeries(series.timestamps[keep], series.values[keep])

    if config.support is not None:
        lo, hi = config.support
        support = SupportEstimate(lo, hi, 0.0)
    else:
        support = estimate_support(filtered.values, config.margin_fraction)
    clamped = count_outside_support(filtered.values, support)
    unit = normalize(filtered.values, support)

    seg = segment(RawSeries(filtered.timestamps, unit), config.window_seconds,
                  config.min_count)
    if len(seg.segments) < 4:
        raise StructuralError(
            f"only {len(seg.segments)} usable segments; need at least 4"
        )

    bandwidths = [
        config.bandwidth if config.bandwidth is not None else silverman_bandwidth(v)
        for v in seg.segments
    ]
    densities = parallel_map(
        lambda i: kde(seg.segments[i], grid, bandwidths[i]),
        range(len(seg.segments)),
        config.threads,
    )
    report = IngestionReport(
        segments_total=len(seg.segments) + len(seg.dropped),
        segments_dropped=seg.dropped,
        scalar_outliers_removed=removed,
        clamped_values=clamped,
        support=support,
        bandwidth_per_segment=[float(b) for b in bandwidths],
    )
    return DistributionalSequence(tuple(densities)), report
