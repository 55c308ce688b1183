"""Object-centric context metrics: grounded-object accuracy and relation
fidelity against a prompt's annotated <human, predicate, object> triplets.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .backends.base import BackendSuite
from .errors import DataError, UsageError
from .manifest import AnnotatedTriplet, PromptRecord

ZERO_SCORE = "zero-score"
EMBED_NEAREST = "embed-nearest"
UNMAPPED_POLICIES = (ZERO_SCORE, EMBED_NEAREST)

DEFAULT_HUMAN_SYNONYMS = frozenset(
    {"person", "man", "woman", "human", "boy", "girl", "lady", "guy", "people"}
)

# first-match suffix rewrites; intentionally conservative so loose matching
# cannot inflate scores
DEFAULT_PLURAL_RULES = (
    ("ies", "y"),
    ("sses", "ss"),
    ("shes", "sh"),
    ("ches", "ch"),
    ("xes", "x"),
    ("zes", "z"),
    ("s", ""),
)
_PLURAL_KEEP = ("ss", "us", "is")  # glass, cactus, tennis


@dataclass(frozen=True)
class ObjectMatchConfig:
    canonicalization: tuple[tuple[str, str], ...] = DEFAULT_PLURAL_RULES
    detector_floor: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.detector_floor <= 1.0:
            raise UsageError(
                f"detector_floor must be in [0, 1], got {self.detector_floor}"
            )

    def canonical(self, label: str) -> str:
        label = label.strip().lower()
        if label.endswith(_PLURAL_KEEP):
            return label
        for suffix, replacement in self.canonicalization:
            if label.endswith(suffix) and len(label) > len(suffix) + 1:
                return label[: -len(suffix)] + replacement
        return label


@dataclass(frozen=True)
class RelationVocabularyMap:
    """Maps annotated predicates onto an SGG backend's closed vocabulary."""

    entries: dict[str, str] = field(default_factory=dict)
    unmapped_policy: str = ZERO_SCORE

    def __post_init__(self):
        if self.unmapped_policy not in UNMAPPED_POLICIES:
            raise UsageError(
                f"unmapped_policy must be one of {UNMAPPED_POLICIES}, "
                f"got {self.unmapped_policy!r}"
            )

    def validate_against(self, vocabulary) -> None:
        vocab = set(vocabulary)
        missing = sorted(v for v in self.entries.values() if v not in vocab)
        if missing:
            raise DataError(
                f"relation map targets {missing} missing from the SGG vocabulary"
            )


def load_relation_map(path: str | Path) -> RelationVocabularyMap:
    """Parse the text map format: one "annotated -> sgg" line per entry,
    plus an optional "policy: zero-score | embed-nearest" line."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"relation map not found: {path}")
    entries: dict[str, str] = {}
    policy = ZERO_SCORE
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.lower().startswith("policy:"):
            policy = line.split(":", 1)[1].strip()
            continue
        if "->" not in line:
            raise DataError(f"{path.name}:{lineno}: expected 'annotated -> sgg', got {line!r}")
        source, target = (part.strip() for part in line.split("->", 1))
        if not source or not target:
            raise DataError(f"{path.name}:{lineno}: empty predicate in {line!r}")
        entries[source] = target
    return RelationVocabularyMap(entries=entries, unmapped_policy=policy)


def map_relations(prompt_triplets, vocabulary, vocab_map: RelationVocabularyMap,
                  sentence_embedder=None) -> list[tuple[AnnotatedTriplet, str | None]]:
    """Resolve each annotated predicate to an SGG predicate (or None).

    Explicit map entries win; predicates already in the vocabulary map to
    themselves; anything else follows the unmapped policy (embed-nearest
    picks the highest-cosine vocabulary predicate, zero-score yields None).
    """
    vocab = list(vocabulary)
    vocab_set = set(vocab)
    resolved = []
    for triplet in prompt_triplets:
        predicate = triplet.predicate
        if predicate in vocab_map.entries:
            resolved.append((triplet, vocab_map.entries[predicate]))
        elif predicate in vocab_set:
            resolved.append((triplet, predicate))
        elif vocab_map.unmapped_policy == EMBED_NEAREST and vocab:
            if sentence_embedder is None:
                raise UsageError("embed-nearest policy needs a sentence embedder")
            query = sentence_embedder.embed_sentence(predicate)
            best, best_cos = None, -2.0
            for candidate in vocab:
                vec = sentence_embedder.embed_sentence(candidate)
                cos = sum(a * b for a, b in zip(query, vec))
                if cos > best_cos:
                    best, best_cos = candidate, cos
            resolved.append((triplet, best))
        else:
            resolved.append((triplet, None))
    return resolved


def goa(prompt: PromptRecord, output_image_ref: str, suite: BackendSuite,
        cfg: ObjectMatchConfig) -> float | None:
    """Mean over referenced objects of the best detection confidence.

    For each object only the single highest-confidence box counts; objects
    that are not detected contribute zero. None when the prompt carries no
    object annotations (metric undefined).
    """
    if not prompt.referenced_objects:
        return None
    detector = suite.require("object_detector", "grounded-object accuracy")
    detections = detector.detect_objects(output_image_ref, list(prompt.referenced_objects))
    best: dict[str, float] = {}
    for detection in detections:
        if detection.confidence < cfg.detector_floor:
            continue
        key = cfg.canonical(detection.label)
        if detection.confidence > best.get(key, 0.0):
            best[key] = detection.confidence
    total = sum(best.get(cfg.canonical(obj), 0.0) for obj in prompt.referenced_objects)
    return total / len(prompt.referenced_objects)


@dataclass(frozen=True)
class RfsResult:
    value: float | None     # None = prompt has no annotated relations
    n_relations: int
    n_matched: int


def rfs_detail(prompt: PromptRecord, output_image_ref: str, suite: BackendSuite,
               vocab_map: RelationVocabularyMap, cfg: ObjectMatchConfig,
               human_synonyms=DEFAULT_HUMAN_SYNONYMS) -> RfsResult:
    """Relation fidelity: probability mass the output's scene graph assigns
    to each annotated relation.

    Graph triplets survive only with a human-class subject and an object
    matching the annotated object; each annotated relation reads its mapped
    predicate's probability from the best surviving triplet, unmatched
    relations contribute zero, and the mean runs over all annotated
    relations.
    """
    if not prompt.annotated_triplets:
        return RfsResult(None, 0, 0)
    generator = suite.require("scene_graph_generator", "relation fidelity")
    graph = generator.generate_scene_graph(output_image_ref)
    vocab_map.validate_against(generator.predicate_vocabulary)
    human = {h.lower() for h in human_synonyms}
    surviving = [
        t for t in graph.triplets
        if t.subject_label.strip().lower() in human
    ]
    mapped = map_relations(prompt.annotated_triplets, generator.predicate_vocabulary,
                           vocab_map, sentence_embedder=suite.sentence_embedder)
    total = 0.0
    matched = 0
    for triplet, predicate in mapped:
        if predicate is None:
            continue
        target_object = cfg.canonical(triplet.object)
        candidates = [
            t.relation_distribution.get(predicate, 0.0)
            for t in surviving
            if cfg.canonical(t.object_label) == target_object
        ]
        if candidates:
            matched += 1
            total += max(candidates)
    n = len(prompt.annotated_triplets)
    return RfsResult(total / n, n, matched)


def rfs(prompt: PromptRecord, output_image_ref: str, suite: BackendSuite,
        vocab_map: RelationVocabularyMap, cfg: ObjectMatchConfig,
        human_synonyms=DEFAULT_HUMAN_SYNONYMS) -> float | None:
    return rfs_detail(prompt, output_image_ref, suite, vocab_map, cfg,
                      human_synonyms).value
