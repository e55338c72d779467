"""Shared domain types: raster images, region masks, divisions, attribution results.

All types are immutable after construction (numpy buffers are frozen), so they
can be shared freely across threads.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from PIL import Image


class InvalidArgument(ValueError):
    """An operation received arguments that violate its contract."""


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class RasterImage:
    """Dense H x W x C float image with every value finite and in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise InvalidArgument(f"expected (H, W, C) with C in (1, 3), got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InvalidArgument("image must contain at least one pixel")
        if not np.all(np.isfinite(arr)):
            raise InvalidArgument("image contains non-finite values")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise InvalidArgument("image values must lie in [0, 1]")
        object.__setattr__(self, "data", _freeze(arr))

    @staticmethod
    def _wrap(arr: np.ndarray) -> "RasterImage":
        # Fast path for arrays derived from an already-validated image.
        img = object.__new__(RasterImage)
        object.__setattr__(img, "data", _freeze(arr))
        return img

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def pixel_count(self) -> int:
        return self.height * self.width


@dataclass(frozen=True, eq=False)
class RegionMask:
    """Boolean pixel mask identifying one sub-region of an image."""

    region_id: int
    bits: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.bits)
        if arr.dtype != np.bool_:
            arr = arr.astype(bool)
        if arr.ndim != 2:
            raise InvalidArgument(f"mask must be 2-D, got shape {arr.shape}")
        object.__setattr__(self, "bits", _freeze(arr))

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def area(self) -> int:
        return int(self.bits.sum())


_DIVISION_METHODS = ("grid", "superpixel", "imported", "grid_fallback")


@dataclass(frozen=True, eq=False)
class Division:
    """A set of pairwise-disjoint region masks that exactly covers an image.

    Region ids equal list positions, so subsets of regions are plain sets of
    indices into ``regions``.
    """

    image_ref: str
    regions: tuple[RegionMask, ...]
    method: str
    label_map: np.ndarray = field(init=False, repr=False, default=None)

    def __post_init__(self):
        regions = tuple(self.regions)
        if len(regions) < 2:
            raise InvalidArgument("a division needs at least 2 regions")
        if self.method not in _DIVISION_METHODS:
            raise InvalidArgument(f"unknown division method {self.method!r}")
        h, w = regions[0].height, regions[0].width
        labels = np.full((h, w), -1, dtype=np.int32)
        coverage = np.zeros((h, w), dtype=np.int32)
        for idx, mask in enumerate(regions):
            if mask.region_id != idx:
                raise InvalidArgument(f"region_id {mask.region_id} at position {idx}")
            if (mask.height, mask.width) != (h, w):
                raise InvalidArgument("mask dimensions differ within division")
            if not mask.bits.any():
                raise InvalidArgument(f"region {idx} is empty")
            labels[mask.bits] = idx
            coverage += mask.bits
        if coverage.max() > 1:
            raise InvalidArgument("region masks overlap")
        if coverage.min() < 1:
            raise InvalidArgument("region masks do not cover the image")
        object.__setattr__(self, "regions", regions)
        object.__setattr__(self, "label_map", _freeze(labels))

    def __len__(self) -> int:
        return len(self.regions)

    @property
    def height(self) -> int:
        return self.regions[0].height

    @property
    def width(self) -> int:
        return self.regions[0].width

    @property
    def region_sizes(self) -> np.ndarray:
        return np.array([m.area for m in self.regions], dtype=np.int64)


def _subset_membership(division: Division, subset: Iterable[int]) -> np.ndarray:
    ids = list(subset)
    m = len(division)
    member = np.zeros(m, dtype=bool)
    for rid in ids:
        rid = int(rid)
        if rid < 0 or rid >= m:
            raise InvalidArgument(f"region id {rid} out of range [0, {m})")
        if member[rid]:
            raise InvalidArgument(f"duplicate region id {rid}")
        member[rid] = True
    return member


def subset_mask(division: Division, subset: Iterable[int]) -> np.ndarray:
    """Boolean H x W mask of all pixels belonging to the given regions."""
    member = _subset_membership(division, subset)
    return member[division.label_map]


def composite(image: RasterImage, division: Division, subset: Iterable[int]) -> RasterImage:
    """Image keeping subset pixels, with everything else at the baseline 0."""
    _check_dims(image, division)
    mask = subset_mask(division, subset)
    return RasterImage._wrap(image.data * mask[:, :, None])


def complement_composite(image: RasterImage, division: Division,
                         subset: Iterable[int]) -> RasterImage:
    """Image with subset pixels zeroed; the pixel-wise complement of composite()."""
    _check_dims(image, division)
    mask = subset_mask(division, subset)
    return RasterImage._wrap(image.data * (~mask)[:, :, None])


def _check_dims(image: RasterImage, division: Division) -> None:
    if (image.height, image.width) != (division.height, division.width):
        raise InvalidArgument("image and division dimensions differ")


@dataclass(frozen=True)
class OrderedAttribution:
    """Regions ranked most-to-least important, with per-step diagnostics.

    ``scores[i]`` is the importance assigned to region ``order[i]``;
    ``step_values[i]`` is the combined objective at the prefix of length i+1,
    and ``step_cons_colla[i]`` the unweighted consistency+collaboration sum
    at the same prefix (the quantity the first-order score assignment reads).
    """

    division_ref: str
    order: tuple[int, ...]
    step_values: tuple[float, ...]
    step_cons_colla: tuple[float, ...]
    scores: tuple[float, ...]
    baseline: float

    def __post_init__(self):
        m = len(self.order)
        if sorted(self.order) != list(range(m)):
            raise InvalidArgument("order is not a permutation of region ids")
        for name in ("step_values", "step_cons_colla", "scores"):
            if len(getattr(self, name)) != m:
                raise InvalidArgument(f"{name} length differs from order length")
        scores = self.scores
        if any(scores[i] < scores[i + 1] for i in range(m - 1)):
            raise InvalidArgument("scores must be non-increasing along the order")

    def scores_by_region(self) -> np.ndarray:
        """Importance score indexed by region id instead of rank."""
        out = np.empty(len(self.order), dtype=np.float64)
        for rank, rid in enumerate(self.order):
            out[rid] = self.scores[rank]
        return out


# --- run-length mask serialization ------------------------------------------

def rle_encode(bits: np.ndarray) -> dict:
    """Encode a boolean mask as alternating run lengths over the row-major
    flattening, first run counting zeros (a leading 0 run may be empty)."""
    bits = np.asarray(bits)
    if bits.ndim != 2:
        raise InvalidArgument("rle_encode expects a 2-D mask")
    flat = bits.astype(np.uint8).ravel()
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    starts = np.concatenate(([0], change))
    ends = np.concatenate((change, [flat.size]))
    runs = (ends - starts).tolist()
    if flat[0] == 1:
        runs = [0] + runs
    return {"height": int(bits.shape[0]), "width": int(bits.shape[1]), "counts": runs}


def rle_decode(obj: dict) -> np.ndarray:
    h, w = int(obj["height"]), int(obj["width"])
    counts = np.asarray(obj["counts"], dtype=np.int64)
    if counts.sum() != h * w:
        raise InvalidArgument("run lengths do not sum to the pixel count")
    values = np.zeros(len(counts), dtype=bool)
    values[1::2] = True
    return np.repeat(values, counts).reshape(h, w)


def division_to_jsonable(division: Division) -> dict:
    return {
        "method": division.method,
        "masks": [rle_encode(m.bits) for m in division.regions],
    }


def division_from_jsonable(obj: dict, image_ref: str = "") -> Division:
    regions = tuple(
        RegionMask(region_id=i, bits=rle_decode(spec))
        for i, spec in enumerate(obj["masks"])
    )
    return Division(image_ref=image_ref, regions=regions, method=obj["method"])


# --- PNG I/O ------------------------------------------------------------------

def load_image_png(path: str) -> RasterImage:
    """Read an 8-bit PNG as a [0, 1] float image (grayscale or RGB)."""
    with Image.open(path) as im:
        if im.mode == "L":
            arr = np.asarray(im, dtype=np.float64)[:, :, None]
        else:
            arr = np.asarray(im.convert("RGB"), dtype=np.float64)
        return RasterImage(arr / 255.0)


def save_image_png(image: RasterImage, path: str) -> None:
    arr = np.clip(np.round(image.data * 255.0), 0, 255).astype(np.uint8)
    if arr.shape[2] == 1:
        Image.fromarray(arr[:, :, 0], mode="L").save(path)
    else:
        Image.fromarray(arr, mode="RGB").save(path)
