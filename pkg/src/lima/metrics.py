"""Faithfulness evaluation: insertion/deletion AUC, highest confidence within a
search budget, and sampling-based fidelity correlation."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Division, InvalidArgument, RasterImage, complement_composite, composite
from .oracle import ModelOracle

DEFAULT_MU_SAMPLES = 200


@dataclass(frozen=True)
class RevealSchedule:
    """Strictly increasing pixel counts from 0 to the pixel total."""

    thresholds: tuple[int, ...]

    def __post_init__(self):
        t = tuple(int(v) for v in self.thresholds)
        if len(t) < 2 or t[0] != 0:
            raise InvalidArgument("schedule must start at 0 and contain 2+ steps")
        if any(t[i] >= t[i + 1] for i in range(len(t) - 1)):
            raise InvalidArgument("schedule must be strictly increasing")
        object.__setattr__(self, "thresholds", t)

    @property
    def total(self) -> int:
        return self.thresholds[-1]


@dataclass(frozen=True)
class FaithfulnessCurve:
    schedule: RevealSchedule
    values: tuple[float, ...]
    mode: str  # insertion | deletion

    def __post_init__(self):
        if self.mode not in ("insertion", "deletion"):
            raise InvalidArgument(f"unknown curve mode {self.mode!r}")
        vals = tuple(float(v) for v in self.values)
        if len(vals) != len(self.schedule.thresholds):
            raise InvalidArgument("one value per schedule step is required")
        if any(v < 0.0 or v > 1.0 for v in vals):
            raise InvalidArgument("curve values must lie in [0, 1]")
        object.__setattr__(self, "values", vals)


def region_schedule(division: Division, order: Sequence[int]) -> RevealSchedule:
    """One step per region in attribution order; thresholds jump by each
    region's pixel count."""
    sizes = division.region_sizes
    steps = [0]
    for rid in order:
        steps.append(steps[-1] + int(sizes[rid]))
    return RevealSchedule(tuple(steps))


def build_curve(image: RasterImage, division: Division, order: Sequence[int],
                oracle: ModelOracle, class_index: int, mode: str) -> FaithfulnessCurve:
    """Target-class probability as regions are revealed (insertion) or zeroed
    (deletion) in attribution order, one oracle batch for the whole schedule."""
    if sorted(order) != list(range(len(division))):
        raise InvalidArgument("order must be a permutation of the division")
    if not 0 <= class_index < oracle.num_classes:
        raise InvalidArgument(f"class index {class_index} out of range")
    prefixes = [list(order[:i]) for i in range(len(order) + 1)]
    if mode == "insertion":
        images = [composite(image, division, p) for p in prefixes]
    elif mode == "deletion":
        images = [complement_composite(image, division, p) for p in prefixes]
    else:
        raise InvalidArgument(f"unknown curve mode {mode!r}")
    values = oracle.probs(images)[:, class_index]
    return FaithfulnessCurve(schedule=region_schedule(division, order),
                             values=tuple(float(v) for v in values), mode=mode)


def _trapezoid(curve: FaithfulnessCurve) -> float:
    t = np.asarray(curve.schedule.thresholds, dtype=np.float64)
    f = np.asarray(curve.values, dtype=np.float64)
    return float(((f[1:] + f[:-1]) * np.diff(t)).sum() / (2.0 * t[-1]))


def deletion_auc(curve: FaithfulnessCurve) -> float:
    """Area under the confidence curve while important pixels are removed;
    lower is better."""
    if curve.mode != "deletion":
        raise InvalidArgument("deletion_auc expects a deletion curve")
    return _trapezoid(curve)


def insertion_auc(curve: FaithfulnessCurve) -> float:
    """Area under the confidence curve while important pixels are revealed;
    higher is better."""
    if curve.mode != "insertion":
        raise InvalidArgument("insertion_auc expects an insertion curve")
    return _trapezoid(curve)


def highest_confidence(curve: FaithfulnessCurve, limit_fraction: float) -> float:
    """Peak curve value among steps revealing at most the given fraction of
    the input."""
    if not 0.0 < limit_fraction <= 1.0:
        raise InvalidArgument("limit_fraction must lie in (0, 1]")
    budget = limit_fraction * curve.schedule.total
    eligible = [v for t, v in zip(curve.schedule.thresholds, curve.values) if t <= budget]
    return max(eligible)


def mu_fidelity(scores_by_region: Sequence[float], image: RasterImage,
                division: Division, oracle: ModelOracle, class_index: int,
                subset_size: int | None = None, n_samples: int = DEFAULT_MU_SAMPLES,
                seed: int = 0) -> float:
    """Pearson correlation between the attribution mass of random fixed-size
    region subsets and the model-score drop from zeroing them.

    Returns 0 (with a warning) when either side has no variance.
    """
    m = len(division)
    scores = np.asarray(scores_by_region, dtype=np.float64)
    if scores.shape != (m,):
        raise InvalidArgument("need one score per region")
    if subset_size is None:
        subset_size = max(1, int(0.2 * m))
    if not 1 <= subset_size <= m:
        raise InvalidArgument(f"subset_size must lie in [1, {m}]")
    rng = np.random.default_rng(seed)
    subsets = [rng.choice(m, size=subset_size, replace=False) for _ in range(n_samples)]
    base = oracle.probs([image])[0, class_index]
    occluded = [complement_composite(image, division, s) for s in subsets]
    drops = base - oracle.probs(occluded)[:, class_index]
    masses = np.array([scores[s].sum() for s in subsets])
    if masses.std() < 1e-15 or drops.std() < 1e-15:
        warnings.warn("mu-fidelity degenerate: zero variance on one side")
        return 0.0
    return float(np.corrcoef(masses, drops)[0, 1])
