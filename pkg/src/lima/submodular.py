"""The four region-subset scores and their weighted combination.

Consistency and collaboration compare oracle embeddings of the revealed and
occluded image against the target feature; confidence is one minus the
normalized entropy of the class output; effectiveness sums each member's
minimum cosine distance to the other members. The combined objective is their
non-negative weighted sum, memoized by canonical subset key.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import Division, InvalidArgument, RasterImage, complement_composite, composite
from .oracle import ModelOracle, SemanticTarget

DEFAULT_LAMBDAS = (20.0, 5.0, 0.05, 0.01)
ZERO_NORM_GUARD = 1e-12


@dataclass(frozen=True)
class ScoreComponents:
    consistency: float
    collaboration: float
    confidence: float
    effectiveness: float

    def combined(self, lambdas: Sequence[float]) -> float:
        return (lambdas[0] * self.consistency + lambdas[1] * self.collaboration
                + lambdas[2] * self.confidence + lambdas[3] * self.effectiveness)


def _guarded_cosine(vec: np.ndarray, unit_target: np.ndarray) -> float:
    """Cosine of vec against a unit vector; 0 when vec has (near-)zero norm,
    so empty composites stay legal intermediate states instead of NaN."""
    norm = np.linalg.norm(vec)
    if norm < ZERO_NORM_GUARD:
        return 0.0
    return float(vec @ unit_target / norm)


def confidence_score(prob_row: Sequence[float]) -> float:
    """1 - normalized entropy of a class-probability row (natural log)."""
    p = np.asarray(prob_row, dtype=np.float64)
    c = p.size
    if c < 2:
        raise InvalidArgument("confidence needs at least 2 classes")
    if p.min() < 0 or abs(p.sum() - 1.0) > 1e-6:
        raise InvalidArgument("probability row is not a simplex vector")
    nz = p[p > 0]
    return float(1.0 + (nz * np.log(nz)).sum() / math.log(c))


class SubmodularContext:
    """Everything one objective evaluation needs: image, division, oracle,
    target vector, and the four weights."""

    def __init__(self, image: RasterImage, division: Division, oracle: ModelOracle,
                 target: SemanticTarget, lambdas: Sequence[float] = DEFAULT_LAMBDAS,
                 distance: str = "cosine"):
        lambdas = tuple(float(v) for v in lambdas)
        if len(lambdas) != 4 or any(not math.isfinite(v) or v < 0 for v in lambdas):
            raise InvalidArgument("lambdas must be 4 finite non-negative floats")
        if distance != "cosine":
            raise InvalidArgument(f"unsupported distance {distance!r}")
        if target.vector.shape != (oracle.embed_dim,):
            raise InvalidArgument("target vector length differs from embed_dim")
        self.image = image
        self.division = division
        self.oracle = oracle
        self.target = target
        self.lambdas = lambdas
        self.distance = distance
        self._memo: dict[frozenset, tuple[float, ScoreComponents]] = {}
        self._lock = threading.Lock()
        self.evaluations = 0  # fresh objective computations
        self.cache_hits = 0
        self._region_embeddings = None
        if lambdas[3] > 0:
            self._ensure_region_embeddings()

    def _ensure_region_embeddings(self) -> np.ndarray:
        """Normalized embeddings of each sub-region composited alone, computed
        once per context."""
        if self._region_embeddings is None:
            singles = [composite(self.image, self.division, [i])
                       for i in range(len(self.division))]
            emb = self.oracle.embed(singles)
            norms = np.linalg.norm(emb, axis=1, keepdims=True)
            unit = np.where(norms < ZERO_NORM_GUARD, 0.0, emb / np.maximum(norms, 1e-300))
            self._region_embeddings = unit
        return self._region_embeddings

    def region_distance_matrix(self) -> np.ndarray:
        unit = self._ensure_region_embeddings()
        return 1.0 - unit @ unit.T


def consistency_score(ctx: SubmodularContext, subset: Iterable[int]) -> float:
    """Cosine between the revealed subset's embedding and the target feature."""
    emb = ctx.oracle.embed([composite(ctx.image, ctx.division, subset)])[0]
    return _guarded_cosine(emb, ctx.target.vector)


def collaboration_score(ctx: SubmodularContext, subset: Iterable[int]) -> float:
    """One minus the cosine between the occluded image's embedding and the
    target: large when excluding the subset destroys the semantics."""
    emb = ctx.oracle.embed([complement_composite(ctx.image, ctx.division, subset)])[0]
    return 1.0 - _guarded_cosine(emb, ctx.target.vector)


def effectiveness_score(ctx: SubmodularContext, subset: Iterable[int]) -> float:
    """Sum over members of the minimum cosine distance to any other member;
    singletons score 0 by convention."""
    ids = sorted({int(i) for i in subset})
    if not ids:
        return 0.0
    for rid in ids:
        if rid < 0 or rid >= len(ctx.division):
            raise InvalidArgument(f"region id {rid} out of range")
    if len(ids) == 1:
        return 0.0
    unit = ctx._ensure_region_embeddings()[ids]
    dist = 1.0 - unit @ unit.T
    np.fill_diagonal(dist, np.inf)
    return float(dist.min(axis=1).sum())


def _evaluate_fresh(ctx: SubmodularContext, keys: list[frozenset]) -> list[tuple[float, ScoreComponents]]:
    """Compute the objective for uncached subsets with one embed batch (the
    revealed and occluded image per subset) plus one probs batch."""
    lam = ctx.lambdas
    comps = [composite(ctx.image, ctx.division, sorted(k)) for k in keys]
    compls = [complement_composite(ctx.image, ctx.division, sorted(k)) for k in keys]
    emb = ctx.oracle.embed(comps + compls)
    cons = np.array([_guarded_cosine(emb[i], ctx.target.vector) for i in range(len(keys))])
    colla = 1.0 - np.array([_guarded_cosine(emb[len(keys) + i], ctx.target.vector)
                            for i in range(len(keys))])
    if lam[2] > 0:
        prob = ctx.oracle.probs(comps)
        conf = np.array([confidence_score(row) for row in prob])
    else:
        conf = np.zeros(len(keys))
    results = []
    for i, key in enumerate(keys):
        eff = effectiveness_score(ctx, key) if lam[3] > 0 else 0.0
        parts = ScoreComponents(float(cons[i]), float(colla[i]), float(conf[i]), eff)
        results.append((parts.combined(lam), parts))
    return results


def submodular_value_batch(ctx: SubmodularContext,
                           subsets: Sequence[Iterable[int]]) -> list[tuple[float, ScoreComponents]]:
    """Evaluate many subsets at once; cached entries are returned as-is and the
    misses share a single oracle batch. Values are pure given the context, so
    the result is independent of dispatch order."""
    keys = [frozenset(int(i) for i in s) for s in subsets]
    out: list = [None] * len(keys)
    fresh_keys: list[frozenset] = []
    fresh_pos: list[int] = []
    seen: dict[frozenset, int] = {}
    with ctx._lock:
        for pos, key in enumerate(keys):
            hit = ctx._memo.get(key)
            if hit is not None:
                out[pos] = hit
                ctx.cache_hits += 1
            elif key in seen:
                fresh_pos.append(pos)  # duplicate within the batch
            else:
                seen[key] = len(fresh_keys)
                fresh_keys.append(key)
                fresh_pos.append(pos)
    if fresh_keys:
        computed = _evaluate_fresh(ctx, fresh_keys)
        with ctx._lock:
            for key, value in zip(fresh_keys, computed):
                ctx._memo[key] = value
            ctx.evaluations += len(fresh_keys)
        for pos in fresh_pos:
            out[pos] = ctx._memo[keys[pos]]
    return out


def submodular_value(ctx: SubmodularContext, subset: Iterable[int]) -> tuple[float, ScoreComponents]:
    """Combined objective and its component breakdown for one subset."""
    return submodular_value_batch(ctx, [subset])[0]
