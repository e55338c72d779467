"""Turn a region ranking into per-region importance scores and saliency maps."""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from PIL import Image

from .core import Division, InvalidArgument, RasterImage, division_to_jsonable

RESULT_SCHEMA_VERSION = 1
DEFAULT_BASELINE = 1.0


def assign_scores(order: Sequence[int], step_cons_colla: Sequence[float],
                  b_base: float = DEFAULT_BASELINE) -> list[float]:
    """First-order assignment from marginal contribution scores.

    The top region starts at the baseline; every later region drops by the
    absolute change of the prefix consistency+collaboration sum, so scores are
    non-increasing whatever the deltas look like.
    """
    if len(order) != len(step_cons_colla):
        raise InvalidArgument("one prefix score per ranked region is required")
    if not order:
        raise InvalidArgument("empty order")
    scores = [float(b_base)]
    for i in range(1, len(order)):
        scores.append(scores[-1] - abs(step_cons_colla[i] - step_cons_colla[i - 1]))
    return scores


def assign_scores_uniform(order: Sequence[int], b_base: float = DEFAULT_BASELINE,
                          gap: float = 1.0) -> list[float]:
    """Ablation baseline: a constant unit gap between adjacent ranks."""
    if not order:
        raise InvalidArgument("empty order")
    return [float(b_base) - i * gap for i in range(len(order))]


@dataclass(frozen=True, eq=False)
class SaliencyMap:
    """Per-pixel importance: each pixel carries its region's score."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


def render_saliency(division: Division, order: Sequence[int],
                    scores: Sequence[float]) -> SaliencyMap:
    """Paint each region's score over its mask."""
    if len(order) != len(scores) or sorted(order) != list(range(len(division))):
        raise InvalidArgument("order/scores must cover the division's regions")
    by_region = np.empty(len(division), dtype=np.float64)
    for rank, rid in enumerate(order):
        by_region[rid] = scores[rank]
    return SaliencyMap(by_region[division.label_map])


def saliency_to_png(smap: SaliencyMap, path: str, colormap: str = "viridis") -> None:
    """8-bit PNG of the map after min-max normalization (a constant map
    renders as all zeros) through a fixed matplotlib colormap."""
    from matplotlib import colormaps

    v = smap.values
    span = v.max() - v.min()
    norm = np.zeros_like(v) if span == 0 else (v - v.min()) / span
    rgba = colormaps[colormap](norm, bytes=True)
    Image.fromarray(rgba[:, :, :3], mode="RGB").save(path)


def overlay_saliency(image: RasterImage, smap: SaliencyMap, alpha: float = 0.5,
                     colormap: str = "viridis") -> RasterImage:
    """Simple alpha composite of the colormapped saliency over the input."""
    from matplotlib import colormaps

    if not 0.0 <= alpha <= 1.0:
        raise InvalidArgument("alpha must lie in [0, 1]")
    v = smap.values
    span = v.max() - v.min()
    norm = np.zeros_like(v) if span == 0 else (v - v.min()) / span
    heat = colormaps[colormap](norm)[:, :, :3]
    base = image.data if image.channels == 3 else np.repeat(image.data, 3, axis=2)
    return RasterImage(alpha * heat + (1 - alpha) * base)


# --- result JSON ----------------------------------------------------------------

def build_result(image_path: str, image: RasterImage, division: Division,
                 attribution, trace, lambdas: Sequence[float], seed: int,
                 metrics: dict, oracle_calls: dict, target_source: str) -> dict:
    """Schema-versioned result document for one explained input."""
    return {
        "schema_version": RESULT_SCHEMA_VERSION,
        "image": image_path,
        "height": image.height,
        "width": image.width,
        "channels": image.channels,
        "division": division_to_jsonable(division),
        "order": list(attribution.order),
        "scores": list(attribution.scores),
        "step_values": list(attribution.step_values),
        "step_cons_colla": list(attribution.step_cons_colla),
        "baseline": attribution.baseline,
        "lambdas": list(lambdas),
        "seed": seed,
        "search": {
            "algorithm": trace.algorithm,
            "n_p": trace.n_p,
            "evaluations": trace.evaluations,
            "completion_evaluations": trace.completion_evaluations,
            "cache_hits": trace.cache_hits,
        },
        "target": {"source": target_source},
        "metrics": metrics,
        "oracle_calls": oracle_calls,
    }


def write_result_json(result: dict, path: str) -> None:
    # sorted keys + repr floats keep reruns byte-identical
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(result, fh, sort_keys=True, indent=1)
        fh.write("\n")
