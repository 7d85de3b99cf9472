"""Robust outlier removal around change-point detection.

Two layers: a classic boxplot filter for scalar samples, and a pluggable
distributional outlier detector that flags whole densities.  The cleaning
pipeline removes flagged densities, detects on the remainder, and maps the
estimated break back to original indexing, so reported change-points
always refer to positions in the uncleaned sequence.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace as dc_replace
from typing import Protocol, runtime_checkable

import numpy as np

from .engine import DetectionResult, DistributionalSequence, detect
from .errors import StructuralError

DEFAULT_WHISKER = 1.5


def boxplot_keep_mask(samples: np.ndarray, whisker: float = DEFAULT_WHISKER) -> np.ndarray:
    """Boolean mask of samples inside [Q1 - w*IQR, Q3 + w*IQR].

    Quartiles are linear interpolations of the order statistics.  Fewer
    than 4 samples: everything kept, with a warning.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if whisker <= 0:
        raise StructuralError(f"whisker must be positive, got {whisker}")
    if samples.size < 4:
        warnings.warn("fewer than 4 samples; boxplot filter is a pass-through")
        return np.ones(samples.shape, dtype=bool)
    q1, q3 = np.percentile(samples, [25, 75])
    iqr = q3 - q1
    lo, hi = q1 - whisker * iqr, q3 + whisker * iqr
    return (samples >= lo) & (samples <= hi)


def scalar_boxplot_filter(samples, whisker: float = DEFAULT_WHISKER) -> np.ndarray:
    """Samples with boxplot outliers removed (order preserved)."""
    samples = np.asarray(samples, dtype=np.float64)
    return samples[boxplot_keep_mask(samples, whisker)]


@dataclass(frozen=True)
class DetectorConfig:
    """Named tuning knobs a distributional outlier detector may honor.

    The default detector uses only ``whisker``; ``detection_region`` and
    the MO/VO whiskers are carried for QF-FDO-style plug-ins so external
    implementations can be configured through the same surface.
    """

    whisker: float = DEFAULT_WHISKER
    detection_region: tuple[float, float] = (0.2, 0.8)
    whisker_mo: float = 1.5
    whisker_vo: float = 2.5

    def as_dict(self) -> dict:
        return {
            "whisker": self.whisker,
            "detection_region": list(self.detection_region),
            "whisker_mo": self.whisker_mo,
            "whisker_vo": self.whisker_vo,
        }


@runtime_checkable
class OutlierDetector(Protocol):
    """A detector sees only the sequence and returns 1-based flagged indices."""

    name: str
    config: DetectorConfig

    def flag(self, seq: DistributionalSequence) -> tuple[int, ...]: ...


class ClrMedianDistanceDetector:
    """Flag densities unusually far (in L2) from the pointwise clr median.

    Distances from the median curve are screened with an upper boxplot
    fence only: small distances mean "close to the consensus" and are
    never outlying.
    """

    name = "clr-median-distance"

    def __init__(self, config: DetectorConfig | None = None):
        self.config = config or DetectorConfig()

    def flag(self, seq: DistributionalSequence) -> tuple[int, ...]:
        mat = seq.clr_matrix()
        median_curve = np.median(mat, axis=0)
        diff = mat - median_curve
        distances = np.sqrt((diff * diff) @ seq.grid.weights)
        q1, q3 = np.percentile(distances, [25, 75])
        fence = q3 + self.config.whisker * (q3 - q1)
        return tuple(int(i) + 1 for i in np.nonzero(distances > fence)[0])


class NeverFlagDetector:
    """Detector that flags nothing; cleaning composes to a no-op."""

    name = "none"

    def __init__(self, config: DetectorConfig | None = None):
        self.config = config or DetectorConfig()

    def flag(self, seq: DistributionalSequence) -> tuple[int, ...]:
        return ()


_DETECTOR_CLASSES = {
    ClrMedianDistanceDetector.name: ClrMedianDistanceDetector,
    NeverFlagDetector.name: NeverFlagDetector,
}

DETECTOR_NAMES = tuple(sorted(_DETECTOR_CLASSES))


def build_detector(name: str, config: DetectorConfig | None = None) -> OutlierDetector:
    try:
        cls = _DETECTOR_CLASSES[name]
    except KeyError:
        raise StructuralError(
            f"unknown detector {name!r}; choose from {DETECTOR_NAMES}"
        ) from None
    return cls(config)


@dataclass(frozen=True)
class CleaningReport:
    """Which original indices were removed, which kept, and by whom.

    ``removed_indices`` and ``kept_indices`` partition 1..n; kept indices
    stay ascending so position j of the cleaned sequence corresponds to
    original index ``kept_indices[j - 1]``.
    """

    removed_indices: tuple[int, ...]
    kept_indices: tuple[int, ...]
    detector_tags: tuple[str, ...]
    detector: str
    params: dict

    def map_position(self, position: int) -> int:
        """Original index of 1-based position ``position`` in the cleaned sequence."""
        return self.kept_indices[position - 1]


def detect_distributional_outliers(
    seq: DistributionalSequence,
    detector: OutlierDetector | None = None,
) -> tuple[int, ...]:
    """Ascending 1-based indices of densities flagged by the detector."""
    detector = detector or ClrMedianDistanceDetector()
    flagged = detector.flag(seq)
    if any(not 1 <= i <= seq.n for i in flagged):
        raise StructuralError(f"detector returned out-of-range indices: {flagged}")
    return tuple(sorted(set(int(i) for i in flagged)))


def clean_and_detect(
    seq: DistributionalSequence,
    detector: OutlierDetector | None = None,
    secondary_detector: OutlierDetector | None = None,
    **detect_kwargs,
) -> tuple[CleaningReport, DetectionResult]:
    """Remove flagged densities, detect on the remainder, restore indexing.

    The optional secondary detector is a complementary screen whose flags
    are unioned with the primary's; it is never enabled implicitly.
    """
    detector = detector or ClrMedianDistanceDetector()
    flagged = {(i, detector.name) for i in detect_distributional_outliers(seq, detector)}
    if secondary_detector is not None:
        primary_idx = {i for i, _ in flagged}
        for i in detect_distributional_outliers(seq, secondary_detector):
            if i not in primary_idx:
                flagged.add((i, secondary_detector.name))
    removed = sorted(i for i, _ in flagged)
    tags = tuple(tag for _, tag in sorted(flagged))
    kept = [i for i in range(1, seq.n + 1) if i not in set(removed)]
    if len(kept) < 4:
        raise StructuralError(
            f"cleaning removed {len(removed)} of {seq.n} densities; "
            "fewer than 4 remain"
        )
    report = CleaningReport(
        removed_indices=tuple(removed),
        kept_indices=tuple(kept),
        detector_tags=tags,
        detector=detector.name,
        params=detector.config.as_dict(),
    )
    result = detect(seq.subsequence(kept), **detect_kwargs)
    return report, dc_replace(result, k_hat=report.map_position(result.k_hat))
