"""Identity-centric metrics: face-identity preservation, attribute
preservation via linear probes, and identity stability across a subject's
input photos.

All three share the penalty gate from :mod:`subjecteval.penalty` and the face
admissibility rule (detector confidence strictly above ``alpha``).
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import rankdata
from sklearn.linear_model import LogisticRegression

from .backends.base import BackendSuite
from .errors import BackendError, DataError, UsageError
from .manifest import EvalSample, PromptRecord, SubjectRecord
from .penalty import PenaltyConfig, penalty_indicator

CLAMP_AT_ZERO = "clamp-at-zero"
AFFINE_TO_UNIT = "affine-to-unit"
FLOOR_MODES = (CLAMP_AT_ZERO, AFFINE_TO_UNIT)

BANK_FORMAT_VERSION = 1

# outcome statuses for one scored (input, output) pair
SCORED = "scored"
NO_INPUT_FACE = "no-input-face"
NO_OUTPUT_FACE = "no-output-face"
PENALIZED = "penalized"


@dataclass(frozen=True)
class IdentityScoreConfig:
    alpha: float = 0.8
    similarity_floor: str = CLAMP_AT_ZERO
    multi_face_input_rule: str = "highest-confidence"

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise UsageError(f"identity.alpha must be in [0, 1], got {self.alpha}")
        if self.similarity_floor not in FLOOR_MODES:
            raise UsageError(
                f"identity.similarity_floor must be one of {FLOOR_MODES}, "
                f"got {self.similarity_floor!r}"
            )
        if self.multi_face_input_rule != "highest-confidence":
            raise UsageError("only the highest-confidence input-face rule is supported")


@dataclass(frozen=True)
class PairOutcome:
    """Score plus the reason it is what it is (feeds coverage stats)."""

    score: float
    status: str


def _floor_cosine(value: float, mode: str) -> float:
    if mode == CLAMP_AT_ZERO:
        return max(0.0, value)
    return (value + 1.0) / 2.0


def _cosine(a, b) -> float:
    return float(sum(x * y for x, y in zip(a, b)))


def _admissible_output_faces(suite: BackendSuite, image_ref: str, alpha: float):
    faces = suite.require("face_detector", "identity metrics").detect_faces(image_ref)
    return [f for f in faces if f.confidence > alpha]


def _input_face_embedding(suite: BackendSuite, image_ref: str):
    """Embedding of the highest-confidence face in the input, or None."""
    faces = suite.require("face_detector", "identity metrics").detect_faces(image_ref)
    if not faces:
        return None
    top = max(faces, key=lambda f: f.confidence)
    if top.embedding is not None:
        return top.embedding
    return suite.require("face_embedder", "identity metrics").embed_face(image_ref, top.box)


def _face_embedding(suite: BackendSuite, image_ref: str, face):
    if face.embedding is not None:
        return face.embedding
    return suite.require("face_embedder", "identity metrics").embed_face(image_ref, face.box)


def ips_pair(input_image_ref: str, output_image_ref: str, prompt_text: str,
             suite: BackendSuite, cfg: IdentityScoreConfig,
             pen: PenaltyConfig) -> PairOutcome:
    """Identity preservation for one (input image, output image) pair.

    Zero when the input has no detectable face, when no output face clears
    alpha, or when the exploitation penalty fires; otherwise the floored
    cosine between the input identity embedding and the best-matching
    admissible output face.
    """
    input_embedding = _input_face_embedding(suite, input_image_ref)
    if input_embedding is None:
        return PairOutcome(0.0, NO_INPUT_FACE)
    output_faces = _admissible_output_faces(suite, output_image_ref, cfg.alpha)
    if not output_faces:
        return PairOutcome(0.0, NO_OUTPUT_FACE)

    scorer = suite.require("text_image_scorer", "penalty gate")
    gate = penalty_indicator(
        scorer.score_text_image(prompt_text, input_image_ref),
        scorer.score_text_image(prompt_text, output_image_ref),
        pen,
    )
    if gate == 0:
        return PairOutcome(0.0, PENALIZED)

    best = max(
        _floor_cosine(_cosine(input_embedding, _face_embedding(suite, output_image_ref, f)),
                      cfg.similarity_floor)
        for f in output_faces
    )
    return PairOutcome(best, SCORED)


def ips_outcome(sample: EvalSample, suite: BackendSuite, cfg: IdentityScoreConfig,
                pen: PenaltyConfig) -> PairOutcome:
    return ips_pair(
        sample.subject.image_refs[sample.input_image_index],
        sample.output_image_ref,
        sample.prompt.text,
        suite, cfg, pen,
    )


def ips(sample: EvalSample, suite: BackendSuite, cfg: IdentityScoreConfig,
        pen: PenaltyConfig) -> float:
    """Identity preservation score of one evaluation sample, in [0, 1]."""
    return ips_outcome(sample, suite, cfg, pen).score


def sis(subject: SubjectRecord, outputs, prompt: PromptRecord, suite: BackendSuite,
        cfg: IdentityScoreConfig, pen: PenaltyConfig) -> float:
    """Identity stability over a subject's S input images.

    ``outputs[m]`` must be the generation conditioned on ``image_refs[m]``,
    all with the same prompt. Each output is scored against the *other*
    input photos and the worst match is kept, so identity capture cannot
    lean on input-specific detail.
    """
    count = len(subject.image_refs)
    if count < 2:
        raise DataError(
            f"identity stability needs >= 2 subject images, got {count}"
        )
    outputs = list(outputs)
    if len(outputs) != count:
        raise DataError(
            f"expected {count} outputs aligned to subject images, got {len(outputs)}"
        )
    total = 0.0
    for m, output_ref in enumerate(outputs):
        inner = min(
            ips_pair(subject.image_refs[k], output_ref, prompt.text, suite, cfg, pen).score
            for k in range(count) if k != m
        )
        total += inner
    return total / count


def sis_fast(subject: SubjectRecord, m: int, output_image_ref: str,
             prompt: PromptRecord, suite: BackendSuite, cfg: IdentityScoreConfig,
             pen: PenaltyConfig) -> float:
    """Single-output approximation of identity stability (min over k != m)."""
    count = len(subject.image_refs)
    if count < 2:
        raise DataError(
            f"identity stability needs >= 2 subject images, got {count}"
        )
    if not 0 <= m < count:
        raise DataError(f"input index {m} out of bounds for {count} subject images")
    return min(
        ips_pair(subject.image_refs[k], output_image_ref, prompt.text, suite, cfg, pen).score
        for k in range(count) if k != m
    )


def roc_auc(scores, labels) -> float:
    """Probability a random positive outscores a random negative (ties = 1/2).

    Computed with the average-rank formula, which is exactly equivalent to
    counting positive-negative pairs.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise DataError("scores and labels must be equal-length 1-D sequences")
    positives = int(np.sum(labels == 1))
    negatives = int(np.sum(labels == 0))
    if positives + negatives != labels.size:
        raise DataError("labels must be 0/1")
    if positives == 0 or negatives == 0:
        raise DataError("ROC-AUC needs both classes present")
    ranks = rankdata(scores, method="average")
    positive_rank_sum = float(np.sum(ranks[labels == 1]))
    return (positive_rank_sum - positives * (positives + 1) / 2.0) / (positives * negatives)


@dataclass(frozen=True)
class AttributeClassifierBank:
    """M linear probes (weights + bias) over face-embedding space."""

    attribute_names: tuple[str, ...]
    weights: tuple[tuple[float, ...], ...]
    biases: tuple[float, ...]
    embedder_identity: str = "unknown@0"
    training_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (len(self.attribute_names) == len(self.weights) == len(self.biases)):
            raise DataError("bank attribute/weight/bias counts disagree")
        dims = {len(w) for w in self.weights}
        if len(dims) > 1:
            raise DataError(f"bank probes have mixed dimensionality {sorted(dims)}")

    @property
    def dimension(self) -> int:
        return len(self.weights[0]) if self.weights else 0

    def score(self, attribute: str, embedding) -> float:
        """Raw probe output for one attribute; higher = positive class."""
        try:
            idx = self.attribute_names.index(attribute)
        except ValueError:
            raise DataError(f"bank has no probe for attribute {attribute!r}") from None
        if len(embedding) != self.dimension:
            raise DataError(
                f"embedding dimension {len(embedding)} != probe dimension {self.dimension}"
            )
        return float(sum(w * e for w, e in zip(self.weights[idx], embedding))
                     + self.biases[idx])

    def score_all(self, embedding) -> dict[str, float]:
        return {name: self.score(name, embedding) for name in self.attribute_names}


def train_attribute_classifiers(embeddings, labels, attribute_names,
                                embedder_identity: str = "unknown@0",
                                seed: int = 0) -> AttributeClassifierBank:
    """Fit one linear probe per binary attribute on face embeddings.

    Attributes with a single class in the training labels are untrainable:
    they are excluded from the bank with a warning. Training is
    deterministic for fixed inputs and seed.
    """
    X = np.asarray(embeddings, dtype=float)
    Y = np.asarray(labels, dtype=int)
    if X.ndim != 2 or Y.ndim != 2:
        raise DataError("embeddings must be n x d, labels n x M")
    if X.shape[0] != Y.shape[0]:
        raise DataError(f"{X.shape[0]} embeddings vs {Y.shape[0]} label rows")
    if Y.shape[1] != len(attribute_names):
        raise DataError(f"{Y.shape[1]} label columns vs {len(attribute_names)} attributes")
    if X.shape[0] < 2:
        raise DataError("need at least 2 training rows")

    kept_names, kept_weights, kept_biases, aucs = [], [], [], {}
    untrainable = []
    for m, name in enumerate(attribute_names):
        column = Y[:, m]
        if len(np.unique(column)) < 2:
            untrainable.append(name)
            continue
        clf = LogisticRegression(max_iter=1000, random_state=seed)
        clf.fit(X, column)
        # store probes oriented so higher score = label 1
        weight = clf.coef_[0] if clf.classes_[1] == 1 else -clf.coef_[0]
        bias = clf.intercept_[0] if clf.classes_[1] == 1 else -clf.intercept_[0]
        kept_names.append(name)
        kept_weights.append(tuple(float(w) for w in weight))
        kept_biases.append(float(bias))
        train_scores = X @ weight + bias
        aucs[name] = roc_auc(train_scores, column)
    if untrainable:
        warnings.warn(
            f"attributes {untrainable} have a single class and were excluded",
            stacklevel=2,
        )
    return AttributeClassifierBank(
        attribute_names=tuple(kept_names),
        weights=tuple(kept_weights),
        biases=tuple(kept_biases),
        embedder_identity=embedder_identity,
        training_meta={
            "n_rows": int(X.shape[0]),
            "seed": seed,
            "training_auc": aucs,
            "untrainable": untrainable,
        },
    )


def save_bank(bank: AttributeClassifierBank, path: str | Path) -> None:
    payload = {
        "format_version": BANK_FORMAT_VERSION,
        "attribute_names": list(bank.attribute_names),
        "weights": [list(w) for w in bank.weights],
        "biases": list(bank.biases),
        "embedder_identity": bank.embedder_identity,
        "training_meta": bank.training_meta,
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")


def load_bank(path: str | Path) -> AttributeClassifierBank:
    path = Path(path)
    if not path.exists():
        raise DataError(f"classifier bank not found: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"cannot parse classifier bank {path}: {exc}") from exc
    version = payload.get("format_version")
    if version != BANK_FORMAT_VERSION:
        raise DataError(f"unsupported bank format_version {version!r}")
    return AttributeClassifierBank(
        attribute_names=tuple(payload["attribute_names"]),
        weights=tuple(tuple(float(v) for v in w) for w in payload["weights"]),
        biases=tuple(float(b) for b in payload["biases"]),
        embedder_identity=payload.get("embedder_identity", "unknown@0"),
        training_meta=payload.get("training_meta", {}),
    )


@dataclass(frozen=True)
class ApsResult:
    """Attribute preservation plus the pool bookkeeping behind it."""

    value: float | None            # None = not applicable (empty pool)
    coverage: float
    n_included: int
    n_total: int
    n_penalized: int
    n_faceless: int
    per_attribute_auc: dict[str, float]


def aps_detail(samples_of_method, bank: AttributeClassifierBank, suite: BackendSuite,
               cfg: IdentityScoreConfig, pen: PenaltyConfig) -> ApsResult:
    """Attribute preservation over one method's samples.

    Each sample contributes its top admissible output face, scored by every
    probe; penalized and face-less samples are excluded from the pools.
    The score is the mean AUC over attributes whose pool has both classes,
    scaled by coverage (included / total).
    """
    samples = list(samples_of_method)
    if not samples:
        raise DataError("attribute preservation needs at least one sample")
    for sample in samples:
        missing = [a for a in bank.attribute_names
                   if a not in sample.subject.attribute_labels]
        if missing:
            raise DataError(
                f"subject {sample.subject.subject_id!r} lacks labels for bank "
                f"attributes {missing}"
            )

    scorer = suite.require("text_image_scorer", "penalty gate")
    pools: dict[str, list[tuple[float, int]]] = {a: [] for a in bank.attribute_names}
    n_penalized = n_faceless = n_included = 0
    for sample in samples:
        faces = _admissible_output_faces(suite, sample.output_image_ref, cfg.alpha)
        if not faces:
            n_faceless += 1
            continue
        input_ref = sample.subject.image_refs[sample.input_image_index]
        gate = penalty_indicator(
            scorer.score_text_image(sample.prompt.text, input_ref),
            scorer.score_text_image(sample.prompt.text, sample.output_image_ref),
            pen,
        )
        if gate == 0:
            n_penalized += 1
            continue
        n_included += 1
        top = max(faces, key=lambda f: f.confidence)
        embedding = _face_embedding(suite, sample.output_image_ref, top)
        for attribute in bank.attribute_names:
            pools[attribute].append(
                (bank.score(attribute, embedding),
                 sample.subject.attribute_labels[attribute])
            )

    per_attribute = {}
    for attribute, pool in pools.items():
        labels = [label for _, label in pool]
        if 0 in labels and 1 in labels:
            per_attribute[attribute] = roc_auc([s for s, _ in pool], labels)
    coverage = n_included / len(samples)
    if not per_attribute:
        value = None
    else:
        value = (sum(per_attribute.values()) / len(per_attribute)) * coverage
    return ApsResult(
        value=value,
        coverage=coverage,
        n_included=n_included,
        n_total=len(samples),
        n_penalized=n_penalized,
        n_faceless=n_faceless,
        per_attribute_auc=per_attribute,
    )


def aps(samples_of_method, bank: AttributeClassifierBank, suite: BackendSuite,
        cfg: IdentityScoreConfig, pen: PenaltyConfig) -> float | None:
    """Attribute preservation score; None when no sample is admissible."""
    return aps_detail(samples_of_method, bank, suite, cfg, pen).value
