"""Ground-set construction: grid patches, SLICO-style superpixels, and
imported semantic masks with overlap resolution."""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Division, InvalidArgument, RasterImage, RegionMask, rle_decode

DEFAULT_DELETE_THRESHOLD = 0.0005
_SLIC_ITERATIONS = 10


@dataclass(frozen=True)
class DivisionConfig:
    method: str = "grid"  # grid | superpixel | imported
    grid_rows: int = 7
    grid_cols: int = 7
    target_regions: int = 49
    compactness_seed: int = 0
    delete_threshold: float = DEFAULT_DELETE_THRESHOLD

    def __post_init__(self):
        if self.target_regions < 2:
            raise InvalidArgument("target_regions must be at least 2")
        if not 0.0 < self.delete_threshold < 0.5:
            raise InvalidArgument("delete_threshold must lie in (0, 0.5)")


def _division_from_labels(image_ref: str, labels: np.ndarray, method: str) -> Division:
    ids = np.unique(labels)
    regions = tuple(
        RegionMask(region_id=i, bits=labels == rid) for i, rid in enumerate(ids)
    )
    return Division(image_ref=image_ref, regions=regions, method=method)


def _grid_labels(height: int, width: int, rows: int, cols: int) -> np.ndarray:
    # integer edges; the last row/column absorbs any remainder
    row_edges = [i * (height // rows) for i in range(rows)] + [height]
    col_edges = [j * (width // cols) for j in range(cols)] + [width]
    labels = np.empty((height, width), dtype=np.int32)
    for i in range(rows):
        for j in range(cols):
            labels[row_edges[i]:row_edges[i + 1], col_edges[j]:col_edges[j + 1]] = i * cols + j
    return labels


def divide_grid(image: RasterImage, rows: int, cols: int) -> Division:
    """Partition into rows x cols axis-aligned patches."""
    if rows < 1 or cols < 1:
        raise InvalidArgument("rows and cols must be positive")
    if rows * cols < 2:
        raise InvalidArgument("a grid division needs at least 2 patches")
    if rows > image.height or cols > image.width:
        raise InvalidArgument(
            f"grid {rows}x{cols} yields empty patches on a "
            f"{image.height}x{image.width} image")
    labels = _grid_labels(image.height, image.width, rows, cols)
    return _division_from_labels(image_ref="", labels=labels, method="grid")


# --- SLICO-style superpixels ---------------------------------------------------

def _srgb_to_lab(rgb: np.ndarray) -> np.ndarray:
    """sRGB in [0,1] (H, W, 3) -> CIELAB (D65)."""
    c = np.where(rgb <= 0.04045, rgb / 12.92, ((rgb + 0.055) / 1.055) ** 2.4)
    m = np.array([[0.4124564, 0.3575761, 0.1804375],
                  [0.2126729, 0.7151522, 0.0721750],
                  [0.0193339, 0.1191920, 0.9503041]])
    xyz = c @ m.T
    white = np.array([0.95047, 1.0, 1.08883])
    t = xyz / white
    f = np.where(t > (6 / 29) ** 3, np.cbrt(t), t / (3 * (6 / 29) ** 2) + 4 / 29)
    lab = np.empty_like(xyz)
    lab[..., 0] = 116 * f[..., 1] - 16
    lab[..., 1] = 500 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200 * (f[..., 1] - f[..., 2])
    return lab


def _seed_layout(height: int, width: int, target: int) -> tuple[int, int]:
    """Rows x cols of seed points approximating `target` with image aspect."""
    best = None
    r0 = max(1, round(math.sqrt(target * height / width)))
    for r in range(max(1, r0 - 2), r0 + 3):
        c = max(1, round(target / r))
        cand = (abs(r * c - target), abs(r - c), r)
        if best is None or cand < best[0]:
            best = (cand, r, c)
    return best[1], best[2]


def _connected_components(labels: np.ndarray) -> tuple[np.ndarray, int]:
    """4-connected components of a label image, numbered in raster order."""
    h, w = labels.shape
    comp = np.full((h, w), -1, dtype=np.int32)
    n = 0
    for sy in range(h):
        for sx in range(w):
            if comp[sy, sx] >= 0:
                continue
            lab = labels[sy, sx]
            stack = [(sy, sx)]
            comp[sy, sx] = n
            while stack:
                y, x = stack.pop()
                for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
                    if 0 <= ny < h and 0 <= nx < w and comp[ny, nx] < 0 \
                            and labels[ny, nx] == lab:
                        comp[ny, nx] = n
                        stack.append((ny, nx))
            n += 1
    return comp, n


def _enforce_connectivity(labels: np.ndarray) -> np.ndarray:
    """Keep each label's largest component; merge orphan components into the
    largest 4-adjacent component."""
    h, w = labels.shape
    comp, n = _connected_components(labels)
    sizes = np.bincount(comp.ravel(), minlength=n)
    comp_label = np.zeros(n, dtype=np.int64)
    comp_label[comp.ravel()] = labels.ravel()

    # canonical component per label = largest (ties -> lowest component id)
    canonical: dict[int, int] = {}
    for cid in range(n):
        lab = int(comp_label[cid])
        cur = canonical.get(lab)
        if cur is None or sizes[cid] > sizes[cur]:
            canonical[lab] = cid

    # adjacency between components
    neighbors: list[set[int]] = [set() for _ in range(n)]
    a, b = comp[:, :-1], comp[:, 1:]
    for p, q in zip(a[a != b].ravel(), b[a != b].ravel()):
        neighbors[p].add(int(q))
        neighbors[q].add(int(p))
    a, b = comp[:-1, :], comp[1:, :]
    for p, q in zip(a[a != b].ravel(), b[a != b].ravel()):
        neighbors[p].add(int(q))
        neighbors[q].add(int(p))

    target = np.arange(n, dtype=np.int64)  # merge destination per component
    merged_size = sizes.astype(np.int64).copy()

    def resolve(cid: int) -> int:
        while target[cid] != cid:
            cid = int(target[cid])
        return cid

    for cid in range(n):
        if canonical[int(comp_label[cid])] == cid:
            continue
        # orphan: merge into the largest neighboring component group
        best, best_size = None, -1
        for nb in sorted(neighbors[cid]):
            root = resolve(nb)
            if root == cid:
                continue
            if merged_size[root] > best_size:
                best, best_size = root, int(merged_size[root])
        if best is None:  # isolated orphan; leave as its own region
            canonical[int(comp_label[cid])] = cid
            continue
        target[cid] = best
        merged_size[best] += merged_size[cid]

    roots = np.array([resolve(c) for c in range(n)], dtype=np.int64)
    out = roots[comp]
    # renumber to 0..m-1 in raster order of first appearance
    _, first = np.unique(out, return_index=True)
    remap = {int(out.ravel()[pos]): i for i, pos in enumerate(sorted(first))}
    return np.vectorize(remap.get)(out).astype(np.int32)


def divide_superpixel(image: RasterImage, target_regions: int, seed: int = 0) -> Division:
    """SLICO-style superpixel division.

    K-means over (L, a, b, y, x) from regular grid seeds with per-cluster
    adaptive compactness, 10 iterations, then a connectivity pass. Falls back
    to a near-square grid when the image is constant. Deterministic for a
    given (image, target_regions, seed); `seed` is reserved and does not
    currently randomize anything.
    """
    h, w = image.height, image.width
    if not 2 <= target_regions <= h * w // 4:
        raise InvalidArgument("target_regions must lie in [2, pixels/4]")
    data = image.data
    if np.ptp(data) == 0.0:
        side = max(2, round(math.sqrt(target_regions)))
        rows, cols = _seed_layout(h, w, side * side)
        labels = _grid_labels(h, w, rows, cols)
        return _division_from_labels("", labels, method="grid_fallback")

    rgb = np.repeat(data, 3, axis=2) if image.channels == 1 else data
    lab = _srgb_to_lab(rgb)

    rows, cols = _seed_layout(h, w, target_regions)
    k = rows * cols
    cy = ((np.arange(rows) + 0.5) * h / rows).astype(np.int64)
    cx = ((np.arange(cols) + 0.5) * w / cols).astype(np.int64)
    centers = np.empty((k, 5))  # L, a, b, y, x
    for i, y in enumerate(cy):
        for j, x in enumerate(cx):
            centers[i * cols + j] = (*lab[y, x], y, x)

    step = math.sqrt(h * w / k)
    max_color = np.full(k, 10.0)  # adaptive compactness, classic init
    ys, xs = np.mgrid[0:h, 0:w]

    labels = np.zeros((h, w), dtype=np.int32)
    for _ in range(_SLIC_ITERATIONS):
        best = np.full((h, w), np.inf)
        labels.fill(-1)
        new_max = np.zeros(k)
        for c in range(k):
            Lc, ac, bc, ycen, xcen = centers[c]
            y0, y1 = max(0, int(ycen - 2 * step)), min(h, int(ycen + 2 * step) + 1)
            x0, x1 = max(0, int(xcen - 2 * step)), min(w, int(xcen + 2 * step) + 1)
            win = lab[y0:y1, x0:x1]
            dc2 = ((win[..., 0] - Lc) ** 2 + (win[..., 1] - ac) ** 2
                   + (win[..., 2] - bc) ** 2)
            ds2 = ((ys[y0:y1, x0:x1] - ycen) ** 2 + (xs[y0:y1, x0:x1] - xcen) ** 2)
            dist = dc2 / max_color[c] ** 2 + ds2 / step ** 2
            closer = dist < best[y0:y1, x0:x1]
            best[y0:y1, x0:x1][closer] = dist[closer]
            labels[y0:y1, x0:x1][closer] = c
        unassigned = labels < 0
        if unassigned.any():
            dy = ys[unassigned][:, None] - centers[None, :, 3]
            dx = xs[unassigned][:, None] - centers[None, :, 4]
            labels[unassigned] = np.argmin(dy ** 2 + dx ** 2, axis=1)
        for c in range(k):
            sel = labels == c
            if not sel.any():
                continue
            centers[c, :3] = lab[sel].mean(axis=0)
            centers[c, 3] = ys[sel].mean()
            centers[c, 4] = xs[sel].mean()
            dc2 = ((lab[sel] - centers[c, :3]) ** 2).sum(axis=1)
            new_max[c] = math.sqrt(dc2.max()) if dc2.size else 0.0
        max_color = np.maximum(new_max, 1.0)

    labels = _enforce_connectivity(labels)
    return _division_from_labels("", labels, method="superpixel")


# --- imported semantic masks ----------------------------------------------------

def resolve_imported_masks(image: RasterImage, masks: Sequence[RegionMask],
                           delete_threshold: float = DEFAULT_DELETE_THRESHOLD) -> Division:
    """Turn possibly-overlapping imported masks into a valid division.

    Overlaps are resolved pairwise in index order: the mask with the larger
    current area loses the contested pixels (on ties the higher index loses).
    Masks whose mean coverage afterwards is <= delete_threshold are dropped,
    and a residual region picks up every pixel left unclaimed.
    """
    if not 0.0 < delete_threshold < 0.5:
        raise InvalidArgument("delete_threshold must lie in (0, 0.5)")
    if not masks:
        raise InvalidArgument("no masks supplied")
    h, w = image.height, image.width
    arrays = []
    for m in masks:
        if (m.height, m.width) != (h, w):
            raise InvalidArgument("mask dimensions differ from the image")
        arrays.append(m.bits.copy())

    for i in range(len(arrays) - 1):
        for j in range(i + 1, len(arrays)):
            inter = arrays[i] & arrays[j]
            if inter.any():
                if arrays[i].sum() > arrays[j].sum():
                    arrays[i] &= ~inter
                else:
                    arrays[j] &= ~inter

    kept = [a for a in arrays if a.mean() > delete_threshold]
    if not kept:
        raise InvalidArgument(
            "all masks fell below the delete threshold; lower delete_threshold")

    covered = np.zeros((h, w), dtype=bool)
    for a in kept:
        covered |= a
    residual = ~covered
    if residual.any():
        kept.append(residual)

    regions = tuple(RegionMask(region_id=i, bits=a) for i, a in enumerate(kept))
    return Division(image_ref="", regions=regions, method="imported")


def load_masks(path: str) -> list[RegionMask]:
    """Read imported masks from a directory of single-channel PNGs (non-zero =
    inside, sorted by filename) or from a JSON file of run-length encodings."""
    from PIL import Image as PILImage

    if os.path.isdir(path):
        names = sorted(f for f in os.listdir(path) if f.lower().endswith(".png"))
        if not names:
            raise InvalidArgument(f"no PNG masks found in {path}")
        masks = []
        for i, name in enumerate(names):
            with PILImage.open(os.path.join(path, name)) as im:
                arr = np.asarray(im.convert("L")) > 0
            masks.append(RegionMask(region_id=i, bits=arr))
        return masks
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    entries = payload["masks"] if isinstance(payload, dict) else payload
    return [RegionMask(region_id=i, bits=rle_decode(e)) for i, e in enumerate(entries)]
