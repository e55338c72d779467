"""The only gateway to the model under explanation.

Every embedding or class-probability query anywhere in the engine goes through
a ModelOracle, so a test double can intercept 100% of model traffic. Batched
evaluation is the primitive; the call log counts one unit per image per query
regardless of internal batching.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import InvalidArgument, RasterImage

PROB_SUM_TOL = 1e-6


@dataclass
class OracleCallLog:
    embed_calls: int = 0
    prob_calls: int = 0

    def snapshot(self) -> tuple[int, int]:
        return (self.embed_calls, self.prob_calls)


class ModelOracle:
    """Base class: subclasses implement _embed_batch / _probs_batch."""

    embed_dim: int
    num_classes: int
    capabilities: frozenset = frozenset({"features", "probabilities"})

    def __init__(self):
        self.call_log = OracleCallLog()

    def embed(self, images: Sequence[RasterImage]) -> np.ndarray:
        """Feature vectors, one row of length embed_dim per image."""
        if len(images) == 0:
            return np.zeros((0, self.embed_dim))
        out = np.asarray(self._embed_batch(list(images)), dtype=np.float64)
        if out.shape != (len(images), self.embed_dim) or not np.all(np.isfinite(out)):
            raise InvalidArgument(
                f"oracle returned bad embedding matrix of shape {out.shape}")
        self.call_log.embed_calls += len(images)
        return out

    def probs(self, images: Sequence[RasterImage]) -> np.ndarray:
        """Class probabilities, one simplex row of length num_classes per image."""
        if len(images) == 0:
            return np.zeros((0, self.num_classes))
        out = np.asarray(self._probs_batch(list(images)), dtype=np.float64)
        bad = (out.shape != (len(images), self.num_classes)
               or not np.all(np.isfinite(out))
               or out.min() < 0.0
               or np.abs(out.sum(axis=1) - 1.0).max() > PROB_SUM_TOL)
        if bad:
            raise InvalidArgument("oracle returned non-simplex probability rows")
        self.call_log.prob_calls += len(images)
        return out

    def _embed_batch(self, images: list[RasterImage]) -> np.ndarray:
        raise NotImplementedError

    def _probs_batch(self, images: list[RasterImage]) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class SemanticTarget:
    """Unit-norm target feature vector the search aligns against."""

    vector: np.ndarray
    source: str  # full_image_embedding | classifier_row | user_supplied

    def __post_init__(self):
        vec = np.asarray(self.vector, dtype=np.float64).ravel()
        norm = np.linalg.norm(vec)
        if abs(norm - 1.0) > PROB_SUM_TOL:
            raise InvalidArgument("semantic target must be unit-norm")
        vec = np.ascontiguousarray(vec)
        vec.flags.writeable = False
        object.__setattr__(self, "vector", vec)


def _normalized(vec: np.ndarray, what: str) -> np.ndarray:
    vec = np.asarray(vec, dtype=np.float64).ravel()
    norm = np.linalg.norm(vec)
    if norm < 1e-12:
        raise InvalidArgument(f"{what} has zero norm")
    return vec / norm


def make_semantic_target(oracle: ModelOracle, spec: dict) -> SemanticTarget:
    """Build the target vector from {"from_image": img}, {"class_row": k} or
    {"vector": floats}."""
    if "from_image" in spec:
        emb = oracle.embed([spec["from_image"]])[0]
        return SemanticTarget(_normalized(emb, "image embedding"),
                              source="full_image_embedding")
    if "class_row" in spec:
        row_fn = getattr(oracle, "class_row", None)
        if row_fn is None:
            raise InvalidArgument("oracle does not expose classifier rows")
        return SemanticTarget(_normalized(row_fn(int(spec["class_row"])), "classifier row"),
                              source="classifier_row")
    if "vector" in spec:
        return SemanticTarget(_normalized(spec["vector"], "user vector"),
                              source="user_supplied")
    raise InvalidArgument("target spec needs from_image, class_row or vector")


# --- synthetic oracles -----------------------------------------------------------


class IdentityOracle(ModelOracle):
    """Embeds an image as its flattened pixels; probabilities are uniform."""

    def __init__(self, height: int, width: int, channels: int = 1, num_classes: int = 10):
        super().__init__()
        if num_classes < 2:
            raise InvalidArgument("num_classes must be at least 2")
        self.height, self.width, self.channels = height, width, channels
        self.embed_dim = height * width * channels
        self.num_classes = num_classes

    def _check(self, images):
        for img in images:
            if (img.height, img.width, img.channels) != (self.height, self.width, self.channels):
                raise InvalidArgument("image dimensions not accepted by the oracle")

    def _embed_batch(self, images):
        self._check(images)
        return np.stack([img.data.ravel() for img in images])

    def _probs_batch(self, images):
        self._check(images)
        return np.full((len(images), self.num_classes), 1.0 / self.num_classes)


def identity_oracle(height: int, width: int, channels: int = 1,
                    num_classes: int = 10) -> IdentityOracle:
    return IdentityOracle(height, width, channels, num_classes)


class LinearPrototypeOracle(ModelOracle):
    """Linear classifier over flattened pixels with one prototype image per
    class; logits are prototype dot products divided by the temperature."""

    def __init__(self, prototypes: Sequence[RasterImage], temperature: float = 1.0):
        super().__init__()
        if len(prototypes) < 2:
            raise InvalidArgument("need at least 2 class prototypes")
        if temperature <= 0:
            raise InvalidArgument("temperature must be positive")
        shape = (prototypes[0].height, prototypes[0].width, prototypes[0].channels)
        for p in prototypes:
            if (p.height, p.width, p.channels) != shape:
                raise InvalidArgument("prototype dimensions differ")
        self.shape = shape
        self.temperature = float(temperature)
        self.rows = np.stack([p.data.ravel() for p in prototypes])
        self.embed_dim = self.rows.shape[1]
        self.num_classes = self.rows.shape[0]

    def class_row(self, k: int) -> np.ndarray:
        if not 0 <= k < self.num_classes:
            raise InvalidArgument(f"class index {k} out of range")
        return self.rows[k].copy()

    def _embed_batch(self, images):
        return np.stack([img.data.ravel() for img in images])

    def _probs_batch(self, images):
        x = np.stack([img.data.ravel() for img in images])
        logits = x @ self.rows.T / self.temperature
        logits -= logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        return e / e.sum(axis=1, keepdims=True)


def linear_prototype_oracle(prototypes: Sequence[RasterImage],
                            temperature: float = 1.0) -> LinearPrototypeOracle:
    return LinearPrototypeOracle(prototypes, temperature)


class PlantedRegionOracle(ModelOracle):
    """Synthetic model whose target-class probability is a known modular
    function of which planted areas are present.

    A pixel counts as present when any channel is positive. With presence
    fraction g (weighted over the planted areas), the embedding is the unit
    vector [g, sqrt(1 - g^2)] and the probability row is [1 - g, g], so the
    cosine against the full-image target is exactly g and the target-class
    probability is additive across disjoint planted areas.
    """

    def __init__(self, masks: Sequence[np.ndarray], weights: Sequence[float]):
        super().__init__()
        if len(masks) != len(weights) or not masks:
            raise InvalidArgument("need matching non-empty masks and weights")
        weights = np.asarray(weights, dtype=np.float64)
        if weights.min() < 0 or weights.sum() <= 0:
            raise InvalidArgument("weights must be non-negative with positive sum")
        flat = []
        areas = []
        shape = np.asarray(masks[0]).shape
        for m in masks:
            m = np.asarray(m).astype(bool)
            if m.shape != shape or not m.any():
                raise InvalidArgument("planted masks must be non-empty and same shape")
            flat.append(m.ravel())
            areas.append(m.sum())
        self._masks = np.stack(flat).astype(np.float64)  # (m, H*W)
        self._areas = np.asarray(areas, dtype=np.float64)
        self._weights = weights / weights.sum()
        self.embed_dim = 2
        self.num_classes = 2

    def presence(self, image: RasterImage) -> float:
        """Weighted fraction of planted pixels present in the image."""
        present = (image.data > 0).any(axis=2).ravel().astype(np.float64)
        frac = (self._masks @ present) / self._areas
        return float(self._weights @ frac)

    def _embed_batch(self, images):
        g = np.array([self.presence(img) for img in images])
        return np.stack([g, np.sqrt(np.clip(1.0 - g ** 2, 0.0, None))], axis=1)

    def _probs_batch(self, images):
        g = np.array([self.presence(img) for img in images])
        g = np.clip(g, 0.0, 1.0)
        return np.stack([1.0 - g, g], axis=1)


def planted_region_oracle(masks: Sequence[np.ndarray],
                          weights: Sequence[float]) -> PlantedRegionOracle:
    return PlantedRegionOracle(masks, weights)
