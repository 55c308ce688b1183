"""Backend interfaces for every learned model the metrics depend on.

Implementations receive image *locators* (paths or URIs) and are responsible
for decoding; the data layer never touches pixels. Each backend declares an
``identity`` string ("name@version", recorded into report snapshots) and a
``concurrency`` mode ("concurrent-safe" or "exclusive" -- the harness
serializes calls to exclusive backends).
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, fields

from ..errors import BackendError

CONCURRENT_SAFE = "concurrent-safe"
EXCLUSIVE = "exclusive"

_UNIT_NORM_TOL = 1e-6
_DIST_SUM_TOL = 1e-6


@dataclass(frozen=True)
class FaceObservation:
    """A detected face: pixel box, detector confidence, unit-norm embedding."""

    box: tuple[float, float, float, float]  # x, y, w, h
    confidence: float
    embedding: tuple[float, ...] | None = None

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise BackendError(f"face confidence {self.confidence} outside [0, 1]")
        if self.embedding is not None:
            check_unit_norm(self.embedding, what="face embedding")


@dataclass(frozen=True)
class Detection:
    """One localized object detection."""

    label: str
    box: tuple[float, float, float, float]
    confidence: float

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise BackendError(f"detection confidence {self.confidence} outside [0, 1]")


@dataclass(frozen=True)
class SceneGraphTriplet:
    """A subject--object pair with a probability distribution over predicates."""

    subject_label: str
    object_label: str
    subject_box: tuple[float, float, float, float]
    object_box: tuple[float, float, float, float]
    relation_distribution: dict[str, float]

    def __post_init__(self):
        total = 0.0
        for predicate, prob in self.relation_distribution.items():
            if prob < 0.0:
                raise BackendError(
                    f"negative probability {prob} for predicate {predicate!r}"
                )
            total += prob
        if abs(total - 1.0) > _DIST_SUM_TOL:
            raise BackendError(
                f"relation distribution of ({self.subject_label!r}, "
                f"{self.object_label!r}) sums to {total}, expected 1"
            )


@dataclass(frozen=True)
class SceneGraph:
    triplets: tuple[SceneGraphTriplet, ...] = ()


def check_unit_norm(vector, what: str = "embedding") -> None:
    """Raise BackendError unless ||vector|| = 1 within 1e-6."""
    norm = math.sqrt(sum(v * v for v in vector))
    if abs(norm - 1.0) > _UNIT_NORM_TOL:
        raise BackendError(f"{what} has norm {norm:.8f}, expected unit length")


class Backend(ABC):
    """Common surface of every backend implementation."""

    identity: str = "unknown@0"
    concurrency: str = CONCURRENT_SAFE


class FaceDetector(Backend):
    @abstractmethod
    def detect_faces(self, image_ref: str) -> list[FaceObservation]:
        """Detect faces, sorted by descending confidence (possibly empty)."""


class FaceEmbedder(Backend):
    @abstractmethod
    def embed_face(self, image_ref: str, box) -> tuple[float, ...]:
        """Embed the face at ``box``; result is unit-norm."""


class TextImageScorer(Backend):
    @abstractmethod
    def score_text_image(self, prompt_text: str, image_ref: str) -> float:
        """Similarity of a prompt and an image; pure in (identity, inputs)."""


class ImageEmbedder(Backend):
    @abstractmethod
    def embed_image(self, image_ref: str) -> tuple[float, ...]: ...


class ObjectDetector(Backend):
    @abstractmethod
    def detect_objects(self, image_ref: str, query_labels: list[str]) -> list[Detection]:
        """Detect the queried labels only; multiple boxes per label allowed."""


class SceneGraphGenerator(Backend):
    predicate_vocabulary: tuple[str, ...] = ()

    @abstractmethod
    def generate_scene_graph(self, image_ref: str) -> SceneGraph: ...


class SentenceEmbedder(Backend):
    dimension: int = 0

    @abstractmethod
    def embed_sentence(self, text: str) -> tuple[float, ...]: ...


@dataclass
class BackendSuite:
    """The full set of model handles one evaluation run depends on.

    Slots are optional; the runner errors upfront when an enabled metric
    needs a slot that is None.
    """

    face_detector: FaceDetector | None = None
    face_embedder: FaceEmbedder | None = None
    text_image_scorer: TextImageScorer | None = None
    image_embedder: ImageEmbedder | None = None
    object_detector: ObjectDetector | None = None
    scene_graph_generator: SceneGraphGenerator | None = None
    sentence_embedder: SentenceEmbedder | None = None
    suite_meta: dict = field(default_factory=dict)

    def identities(self) -> dict[str, str]:
        """Identity string per populated slot (goes into config snapshots)."""
        out = {}
        for f in fields(self):
            if f.name == "suite_meta":
                continue
            backend = getattr(self, f.name)
            if backend is not None:
                out[f.name] = backend.identity
        return out

    def require(self, slot: str, needed_for: str):
        backend = getattr(self, slot, None)
        if backend is None:
            raise BackendError(f"metric {needed_for!r} requires backend {slot!r}, none configured")
        return backend
