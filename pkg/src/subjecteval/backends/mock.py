"""Deterministic mock backends driven by declarative fixture side-files.

A fixture maps image locators to canned faces, detections and scene graphs,
plus (prompt, image) -> score entries. Everything a fixture does not pin is
derived from cryptographic hashes of the inputs, so mocks are pure functions
of (identity, inputs) and bit-reproducible across platforms. This is what
lets every metric be tested against hand-computable oracles without a GPU.

Fixture layout (YAML or the equivalent dict):

    sgg_vocabulary: [riding, near, holding]
    images:
      "subj1_a.png":
        size: [128, 128]            # optional, enables box-bounds checks
        faces:
          - box: [8, 8, 48, 48]
            confidence: 0.9
            embedding: [0.6, 0.8]
        objects:
          tiger: [0.8, 0.55]        # confidences, or {confidence:, box:}
        graph:
          - subject: person
            object: tiger
            relations: {riding: 0.7, near: 0.3}
        error: true                 # optional: simulate a decode failure
    scores:
      - {prompt: "riding a tiger", image: "subj1_a.png", value: 0.35}
"""

from __future__ import annotations

import hashlib
import math
from pathlib import Path

import yaml

from ..errors import BackendError, DataError, UsageError
from .base import (
    CONCURRENT_SAFE,
    BackendSuite,
    Detection,
    FaceDetector,
    FaceEmbedder,
    FaceObservation,
    ImageEmbedder,
    ObjectDetector,
    SceneGraph,
    SceneGraphGenerator,
    SceneGraphTriplet,
    SentenceEmbedder,
    TextImageScorer,
)

_DEFAULT_BOX = (0.0, 0.0, 1.0, 1.0)


def _as_box(value, context: str) -> tuple[float, float, float, float]:
    if value is None:
        return _DEFAULT_BOX
    if not isinstance(value, (list, tuple)) or len(value) != 4:
        raise DataError(f"{context}: box must be [x, y, w, h], got {value!r}")
    return tuple(float(v) for v in value)


def _check_box_bounds(box, size, context: str) -> None:
    if size is None:
        return
    w, h = size
    x, y, bw, bh = box
    if x < 0 or y < 0 or x + bw > w or y + bh > h:
        raise DataError(f"{context}: box {box} outside image bounds {size}")


class MockFixture:
    """Parsed and validated fixture data shared by all mock backends."""

    def __init__(self, data: dict, source: str = "<dict>"):
        if not isinstance(data, dict):
            raise DataError(f"{source}: fixture root must be a mapping")
        self.source = source
        self.faces: dict[str, list[FaceObservation]] = {}
        self.face_embeddings: dict[tuple[str, tuple], tuple[float, ...]] = {}
        self.objects: dict[str, list[Detection]] = {}
        self.graphs: dict[str, SceneGraph] = {}
        self.error_images: set[str] = set()
        self.scores: dict[tuple[str, str], float] = {}

        images = data.get("images") or {}
        for ref, entry in images.items():
            self._load_image(str(ref), entry or {})
        for row in data.get("scores") or []:
            try:
                key = (str(row["prompt"]), str(row["image"]))
                self.scores[key] = float(row["value"])
            except (KeyError, TypeError) as exc:
                raise DataError(f"{self.source}: bad score entry {row!r}") from exc

        declared = data.get("sgg_vocabulary")
        if declared is not None:
            self.sgg_vocabulary = tuple(str(p) for p in declared)
        else:
            seen: list[str] = []
            for graph in self.graphs.values():
                for triplet in graph.triplets:
                    for predicate in triplet.relation_distribution:
                        if predicate not in seen:
                            seen.append(predicate)
            self.sgg_vocabulary = tuple(seen)

    def _load_image(self, ref: str, entry: dict) -> None:
        context = f"{self.source}: image {ref!r}"
        if entry.get("error"):
            self.error_images.add(ref)
        size = entry.get("size")

        observations = []
        for i, face in enumerate(entry.get("faces") or []):
            box = _as_box(face.get("box"), f"{context} face {i}")
            _check_box_bounds(box, size, f"{context} face {i}")
            embedding = face.get("embedding")
            if embedding is not None:
                embedding = tuple(float(v) for v in embedding)
            try:
                obs = FaceObservation(box=box, confidence=float(face["confidence"]),
                                      embedding=embedding)
            except KeyError as exc:
                raise DataError(f"{context} face {i}: missing confidence") from exc
            except BackendError as exc:
                raise DataError(f"{context} face {i}: {exc}") from exc
            observations.append(obs)
            if embedding is not None:
                self.face_embeddings[(ref, box)] = embedding
        observations.sort(key=lambda o: -o.confidence)
        self.faces[ref] = observations

        detections = []
        for label, hits in (entry.get("objects") or {}).items():
            for j, hit in enumerate(hits):
                if isinstance(hit, dict):
                    conf = float(hit["confidence"])
                    box = _as_box(hit.get("box"), f"{context} object {label!r} #{j}")
                else:
                    conf = float(hit)
                    box = _DEFAULT_BOX
                _check_box_bounds(box, size, f"{context} object {label!r} #{j}")
                try:
                    detections.append(Detection(label=str(label), box=box, confidence=conf))
                except BackendError as exc:
                    raise DataError(f"{context} object {label!r} #{j}: {exc}") from exc
        self.objects[ref] = detections

        triplets = []
        for j, item in enumerate(entry.get("graph") or []):
            tcontext = f"{context} graph triplet {j}"
            try:
                sbox = _as_box(item.get("subject_box"), tcontext)
                obox = _as_box(item.get("object_box"), tcontext)
                _check_box_bounds(sbox, size, tcontext)
                _check_box_bounds(obox, size, tcontext)
                triplet = SceneGraphTriplet(
                    subject_label=str(item["subject"]),
                    object_label=str(item["object"]),
                    subject_box=sbox,
                    object_box=obox,
                    relation_distribution={str(k): float(v)
                                           for k, v in item["relations"].items()},
                )
            except KeyError as exc:
                raise DataError(f"{tcontext}: missing field {exc}") from exc
            except BackendError as exc:
                raise DataError(f"{tcontext}: {exc}") from exc
            triplets.append(triplet)
        self.graphs[ref] = SceneGraph(triplets=tuple(triplets))

    def check_decodable(self, ref: str) -> None:
        if ref in self.error_images:
            raise BackendError(f"mock decode failure for image {ref!r}")


def load_fixture(path: str | Path) -> MockFixture:
    path = Path(path)
    if not path.exists():
        raise DataError(f"fixture file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise DataError(f"cannot parse fixture {path}: {exc}") from exc
    return MockFixture(data or {}, source=str(path))


def _hash_unit_interval(*parts: str) -> float:
    """Stable hash of the given strings mapped into [0, 1)."""
    digest = hashlib.blake2b("|".join(parts).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") / 2.0**64


class MockFaceDetector(FaceDetector):
    identity = "mock-face-detector@1"
    concurrency = CONCURRENT_SAFE

    def __init__(self, fixture: MockFixture):
        self._fixture = fixture

    def detect_faces(self, image_ref: str) -> list[FaceObservation]:
        self._fixture.check_decodable(image_ref)
        return list(self._fixture.faces.get(image_ref, ()))


class MockFaceEmbedder(FaceEmbedder):
    identity = "mock-face-embedder@1"
    concurrency = CONCURRENT_SAFE

    def __init__(self, fixture: MockFixture):
        self._fixture = fixture

    def embed_face(self, image_ref: str, box) -> tuple[float, ...]:
        self._fixture.check_decodable(image_ref)
        key = (image_ref, tuple(float(v) for v in box))
        try:
            return self._fixture.face_embeddings[key]
        except KeyError:
            raise BackendError(
                f"mock fixture declares no embedding for face {box} in {image_ref!r}"
            ) from None


class MockTextImageScorer(TextImageScorer):
    """Returns fixture-pinned scores, hash-derived values otherwise."""

    identity = "mock-text-image-scorer@1"
    concurrency = CONCURRENT_SAFE

    def __init__(self, fixture: MockFixture):
        self._fixture = fixture

    def score_text_image(self, prompt_text: str, image_ref: str) -> float:
        if not prompt_text:
            raise UsageError("score_text_image requires a non-empty prompt")
        self._fixture.check_decodable(image_ref)
        pinned = self._fixture.scores.get((prompt_text, image_ref))
        if pinned is not None:
            return pinned
        return _hash_unit_interval(self.identity, prompt_text, image_ref)


class MockObjectDetector(ObjectDetector):
    identity = "mock-object-detector@1"
    concurrency = CONCURRENT_SAFE

    def __init__(self, fixture: MockFixture):
        self._fixture = fixture

    def detect_objects(self, image_ref: str, query_labels: list[str]) -> list[Detection]:
        if not query_labels:
            raise UsageError("detect_objects requires a non-empty query list")
        self._fixture.check_decodable(image_ref)
        wanted = set(query_labels)
        return [d for d in self._fixture.objects.get(image_ref, ()) if d.label in wanted]


class MockSceneGraphGenerator(SceneGraphGenerator):
    identity = "mock-scene-graph@1"
    concurrency = CONCURRENT_SAFE

    def __init__(self, fixture: MockFixture):
        self._fixture = fixture
        self.predicate_vocabulary = fixture.sgg_vocabulary

    def generate_scene_graph(self, image_ref: str) -> SceneGraph:
        self._fixture.check_decodable(image_ref)
        return self._fixture.graphs.get(image_ref, SceneGraph())


class HashSentenceEmbedder(SentenceEmbedder):
    """Token-hash sentence embedding: fixed dimension, platform-stable."""

    identity = "hash-sentence-embedder@1"
    concurrency = CONCURRENT_SAFE

    def __init__(self, dimension: int = 16):
        self.dimension = dimension

    def embed_sentence(self, text: str) -> tuple[float, ...]:
        if not text or not text.split():
            raise UsageError("embed_sentence requires non-empty text")
        acc = [0.0] * self.dimension
        for token in text.lower().split():
            digest = hashlib.blake2b(token.encode("utf-8"),
                                     digest_size=self.dimension).digest()
            for i, byte in enumerate(digest):
                acc[i] += byte / 255.0 - 0.5
        norm = math.sqrt(sum(v * v for v in acc))
        if norm == 0.0:
            acc[0] = 1.0
            norm = 1.0
        return tuple(v / norm for v in acc)


class HashImageEmbedder(ImageEmbedder):
    """Locator-hash image embedding; stands in for CLIP-image-like backends."""

    identity = "hash-image-embedder@1"
    concurrency = CONCURRENT_SAFE

    def __init__(self, dimension: int = 16):
        self.dimension = dimension

    def embed_image(self, image_ref: str) -> tuple[float, ...]:
        digest = hashlib.blake2b(image_ref.encode("utf-8"),
                                 digest_size=self.dimension).digest()
        values = [b / 255.0 - 0.5 for b in digest]
        norm = math.sqrt(sum(v * v for v in values)) or 1.0
        return tuple(v / norm for v in values)


def build_mock_suite(fixture: MockFixture | dict | str | Path,
                     sentence_dimension: int = 16) -> BackendSuite:
    """Assemble a full all-mock BackendSuite from one fixture."""
    if isinstance(fixture, (str, Path)):
        fixture = load_fixture(fixture)
    elif isinstance(fixture, dict):
        fixture = MockFixture(fixture)
    return BackendSuite(
        face_detector=MockFaceDetector(fixture),
        face_embedder=MockFaceEmbedder(fixture),
        text_image_scorer=MockTextImageScorer(fixture),
        image_embedder=HashImageEmbedder(),
        object_detector=MockObjectDetector(fixture),
        scene_graph_generator=MockSceneGraphGenerator(fixture),
        sentence_embedder=HashSentenceEmbedder(dimension=sentence_dimension),
        suite_meta={"fixture": fixture.source},
    )
