"""Content-addressed caching and concurrency control for backend calls.

Cache keys hash (backend identity, operation, inputs); image inputs hash by
file content when the locator resolves to a file, by the locator string
otherwise. Entries are JSON files under two-level fan-out directories and
are written atomically, so concurrent workers and deleted entries are safe:
a missing entry just recomputes.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from pathlib import Path

from .base import (
    EXCLUSIVE,
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


def content_token(image_ref: str) -> str:
    path = Path(image_ref)
    try:
        if path.is_file():
            return "sha256:" + hashlib.sha256(path.read_bytes()).hexdigest()
    except OSError:
        pass
    return "ref:" + image_ref


class CallCache:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def key(identity: str, operation: str, inputs) -> str:
        payload = json.dumps([identity, operation, inputs],
                             sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def _path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.json"

    def get(self, key: str):
        path = self._path(key)
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError):
            return None

    def put(self, key: str, payload) -> None:
        path = self._path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(f".{os.getpid()}.{threading.get_ident()}.tmp")
        tmp.write_text(json.dumps(payload, sort_keys=True, separators=(",", ":")),
                       encoding="utf-8")
        os.replace(tmp, path)


def _face_to_obj(face: FaceObservation) -> dict:
    return {
        "box": list(face.box),
        "confidence": face.confidence,
        "embedding": list(face.embedding) if face.embedding is not None else None,
    }


def _face_from_obj(obj: dict) -> FaceObservation:
    embedding = obj.get("embedding")
    return FaceObservation(
        box=tuple(obj["box"]),
        confidence=obj["confidence"],
        embedding=tuple(embedding) if embedding is not None else None,
    )


def _graph_to_obj(graph: SceneGraph) -> list:
    return [
        {
            "subject": t.subject_label,
            "object": t.object_label,
            "subject_box": list(t.subject_box),
            "object_box": list(t.object_box),
            "relations": t.relation_distribution,
        }
        for t in graph.triplets
    ]


def _graph_from_obj(rows: list) -> SceneGraph:
    return SceneGraph(triplets=tuple(
        SceneGraphTriplet(
            subject_label=r["subject"],
            object_label=r["object"],
            subject_box=tuple(r["subject_box"]),
            object_box=tuple(r["object_box"]),
            relation_distribution=dict(r["relations"]),
        )
        for r in rows
    ))


class _Wrapper:
    """Shared plumbing: lock exclusive backends, memoize through the cache."""

    def __init__(self, inner, cache: CallCache | None):
        self._inner = inner
        self._cache = cache
        self._lock = threading.Lock() if inner.concurrency == EXCLUSIVE else None
        self.identity = inner.identity
        self.concurrency = inner.concurrency

    def _call(self, operation: str, inputs, compute, encode, decode):
        key = None
        if self._cache is not None:
            key = CallCache.key(self.identity, operation, inputs)
            hit = self._cache.get(key)
            if hit is not None:
                return decode(hit["result"])
        if self._lock is not None:
            with self._lock:
                result = compute()
        else:
            result = compute()
        if key is not None:
            self._cache.put(key, {"result": encode(result)})
        return result


class CachedFaceDetector(_Wrapper, FaceDetector):
    def detect_faces(self, image_ref: str):
        return self._call(
            "detect_faces", [content_token(image_ref)],
            lambda: self._inner.detect_faces(image_ref),
            lambda faces: [_face_to_obj(f) for f in faces],
            lambda rows: [_face_from_obj(r) for r in rows],
        )


class CachedFaceEmbedder(_Wrapper, FaceEmbedder):
    def embed_face(self, image_ref: str, box):
        return self._call(
            "embed_face", [content_token(image_ref), list(box)],
            lambda: self._inner.embed_face(image_ref, box),
            list, tuple,
        )


class CachedTextImageScorer(_Wrapper, TextImageScorer):
    def score_text_image(self, prompt_text: str, image_ref: str):
        return self._call(
            "score_text_image", [prompt_text, content_token(image_ref)],
            lambda: self._inner.score_text_image(prompt_text, image_ref),
            lambda v: v, lambda v: v,
        )


class CachedImageEmbedder(_Wrapper, ImageEmbedder):
    def embed_image(self, image_ref: str):
        return self._call(
            "embed_image", [content_token(image_ref)],
            lambda: self._inner.embed_image(image_ref),
            list, tuple,
        )


class CachedObjectDetector(_Wrapper, ObjectDetector):
    def detect_objects(self, image_ref: str, query_labels):
        return self._call(
            "detect_objects", [content_token(image_ref), sorted(query_labels)],
            lambda: self._inner.detect_objects(image_ref, query_labels),
            lambda dets: [
                {"label": d.label, "box": list(d.box), "confidence": d.confidence}
                for d in dets
            ],
            lambda rows: [
                Detection(label=r["label"], box=tuple(r["box"]),
                          confidence=r["confidence"])
                for r in rows
            ],
        )


class CachedSceneGraphGenerator(_Wrapper, SceneGraphGenerator):
    @property
    def predicate_vocabulary(self):
        return self._inner.predicate_vocabulary

    def generate_scene_graph(self, image_ref: str):
        return self._call(
            "generate_scene_graph", [content_token(image_ref)],
            lambda: self._inner.generate_scene_graph(image_ref),
            _graph_to_obj, _graph_from_obj,
        )


class CachedSentenceEmbedder(_Wrapper, SentenceEmbedder):
    @property
    def dimension(self):
        return self._inner.dimension

    def embed_sentence(self, text: str):
        return self._call(
            "embed_sentence", [text],
            lambda: self._inner.embed_sentence(text),
            list, tuple,
        )


_WRAPPERS = {
    "face_detector": CachedFaceDetector,
    "face_embedder": CachedFaceEmbedder,
    "text_image_scorer": CachedTextImageScorer,
    "image_embedder": CachedImageEmbedder,
    "object_detector": CachedObjectDetector,
    "scene_graph_generator": CachedSceneGraphGenerator,
    "sentence_embedder": CachedSentenceEmbedder,
}


def wrap_suite(suite: BackendSuite, cache_dir: str | Path | None) -> BackendSuite:
    """Wrap every populated slot with caching (when a dir is given) and
    exclusive-backend serialization. Results are identical to direct calls."""
    cache = CallCache(cache_dir) if cache_dir is not None else None
    kwargs = {}
    for slot, wrapper in _WRAPPERS.items():
        inner = getattr(suite, slot)
        kwargs[slot] = wrapper(inner, cache) if inner is not None else None
    return BackendSuite(suite_meta=dict(suite.suite_meta), **kwargs)
