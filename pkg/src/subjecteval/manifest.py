"""Canonical data model: subjects, prompts, evaluation samples, manifests.

A manifest is UTF-8 line-delimited JSON. The first line is a typed header
declaring the schema version, the ordered attribute-name registry and the
closed theme registry; every following line is a tagged record
``{"kind": "subject" | "prompt" | "sample", ...}``. All values are immutable
after load and safe to share across workers.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from . import SCHEMA_VERSION
from .errors import DataError

HUMAN_MARKER = "human"


@dataclass(frozen=True)
class AnnotatedTriplet:
    """Ground-truth <human, predicate, object> relation from a prompt template."""

    predicate: str
    object: str
    subject_slot: str = HUMAN_MARKER

    def __post_init__(self):
        if self.subject_slot != HUMAN_MARKER:
            raise DataError(
                f"triplet subject must be {HUMAN_MARKER!r}, got {self.subject_slot!r}"
            )


@dataclass(frozen=True)
class SubjectRecord:
    subject_id: str
    image_refs: tuple[str, ...]
    attribute_labels: dict[str, int] = field(default_factory=dict)
    foreground_mask_refs: tuple[str, ...] | None = None
    demographic_tags: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.image_refs:
            raise DataError(f"subject {self.subject_id!r} has no images")
        if self.foreground_mask_refs is not None and (
            len(self.foreground_mask_refs) != len(self.image_refs)
        ):
            raise DataError(
                f"subject {self.subject_id!r}: {len(self.foreground_mask_refs)} masks "
                f"for {len(self.image_refs)} images"
            )
        for name, value in self.attribute_labels.items():
            if value not in (0, 1):
                raise DataError(
                    f"subject {self.subject_id!r}: attribute {name!r} must be 0/1, "
                    f"got {value!r}"
                )


@dataclass(frozen=True)
class PromptRecord:
    prompt_id: str
    text: str
    referenced_objects: tuple[str, ...] = ()
    annotated_triplets: tuple[AnnotatedTriplet, ...] = ()
    themes: tuple[str, ...] = ()
    template_trace: str | None = None

    def __post_init__(self):
        if len(set(self.referenced_objects)) != len(self.referenced_objects):
            raise DataError(f"prompt {self.prompt_id!r}: referenced_objects not deduplicated")
        for triplet in self.annotated_triplets:
            if triplet.object not in self.referenced_objects:
                raise DataError(
                    f"prompt {self.prompt_id!r}: triplet object {triplet.object!r} "
                    "not in referenced_objects"
                )


@dataclass(frozen=True)
class EvalSample:
    """One (subject image, prompt, output image) evaluation unit."""

    sample_id: str
    subject: SubjectRecord
    input_image_index: int
    prompt: PromptRecord
    output_image_ref: str
    method_id: str


@dataclass(frozen=True)
class ManifestHeader:
    schema_version: int
    attribute_names: tuple[str, ...]
    themes: tuple[str, ...]
    manifest_id: str | None = None


@dataclass(frozen=True)
class Manifest:
    header: ManifestHeader
    subjects: tuple[SubjectRecord, ...]
    prompts: tuple[PromptRecord, ...]
    samples: tuple[EvalSample, ...]
    content_hash: str | None = None

    def subject(self, subject_id: str) -> SubjectRecord:
        return self._subject_index[subject_id]

    def prompt(self, prompt_id: str) -> PromptRecord:
        return self._prompt_index[prompt_id]

    @property
    def method_ids(self) -> tuple[str, ...]:
        seen: list[str] = []
        for sample in self.samples:
            if sample.method_id not in seen:
                seen.append(sample.method_id)
        return tuple(seen)

    def __post_init__(self):
        object.__setattr__(self, "_subject_index", {s.subject_id: s for s in self.subjects})
        object.__setattr__(self, "_prompt_index", {p.prompt_id: p for p in self.prompts})


def _parse_header(obj: dict, where: str) -> ManifestHeader:
    try:
        return ManifestHeader(
            schema_version=int(obj["schema_version"]),
            attribute_names=tuple(str(a) for a in obj["attribute_names"]),
            themes=tuple(str(t) for t in obj.get("themes", ())),
            manifest_id=obj.get("manifest_id"),
        )
    except KeyError as exc:
        raise DataError(f"{where}: header missing field {exc}") from exc


def _parse_triplet(obj: dict, where: str) -> AnnotatedTriplet:
    try:
        return AnnotatedTriplet(
            predicate=str(obj["predicate"]),
            object=str(obj["object"]),
            subject_slot=str(obj.get("subject", HUMAN_MARKER)),
        )
    except KeyError as exc:
        raise DataError(f"{where}: triplet missing field {exc}") from exc


def load_manifest(path: str | Path) -> Manifest:
    """Load and fully validate a manifest file.

    All cross-references are resolved; any dangling id, attribute-schema
    mismatch or undeclared theme raises DataError naming the offender.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"manifest not found: {path}")
    raw = path.read_bytes()
    lines = raw.decode("utf-8").splitlines()
    content_hash = hashlib.sha256(raw).hexdigest()

    header: ManifestHeader | None = None
    subjects: dict[str, SubjectRecord] = {}
    prompts: dict[str, PromptRecord] = {}
    sample_rows: list[tuple[int, dict]] = []

    for lineno, line in enumerate(lines, start=1):
        where = f"{path.name}:{lineno}"
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"{where}: not valid JSON ({exc.msg})") from exc
        kind = obj.get("kind")
        if header is None:
            if kind != "header":
                raise DataError(f"{where}: first record must be the header")
            header = _parse_header(obj, where)
            if header.schema_version != SCHEMA_VERSION:
                raise DataError(
                    f"{where}: unsupported schema_version {header.schema_version}"
                )
            continue
        if kind == "subject":
            record = SubjectRecord(
                subject_id=str(obj.get("subject_id", "")),
                image_refs=tuple(str(r) for r in obj.get("image_refs", ())),
                attribute_labels={str(k): int(v)
                                  for k, v in (obj.get("attribute_labels") or {}).items()},
                foreground_mask_refs=(
                    tuple(str(r) for r in obj["foreground_mask_refs"])
                    if obj.get("foreground_mask_refs") is not None else None
                ),
                demographic_tags={str(k): str(v)
                                  for k, v in (obj.get("demographic_tags") or {}).items()},
            )
            if not record.subject_id:
                raise DataError(f"{where}: subject record without subject_id")
            if record.subject_id in subjects:
                raise DataError(f"{where}: duplicate subject_id {record.subject_id!r}")
            if set(record.attribute_labels) != set(header.attribute_names):
                raise DataError(
                    f"{where}: subject {record.subject_id!r} attribute labels do not "
                    f"match the declared registry {list(header.attribute_names)}"
                )
            subjects[record.subject_id] = record
        elif kind == "prompt":
            record = PromptRecord(
                prompt_id=str(obj.get("prompt_id", "")),
                text=str(obj.get("text", "")),
                referenced_objects=tuple(str(o) for o in obj.get("referenced_objects", ())),
                annotated_triplets=tuple(
                    _parse_triplet(t, where) for t in obj.get("annotated_triplets", ())
                ),
                themes=tuple(str(t) for t in obj.get("themes", ())),
                template_trace=obj.get("template_trace"),
            )
            if not record.prompt_id:
                raise DataError(f"{where}: prompt record without prompt_id")
            if record.prompt_id in prompts:
                raise DataError(f"{where}: duplicate prompt_id {record.prompt_id!r}")
            undeclared = [t for t in record.themes if t not in header.themes]
            if undeclared:
                raise DataError(
                    f"{where}: prompt {record.prompt_id!r} uses undeclared themes "
                    f"{undeclared}"
                )
            prompts[record.prompt_id] = record
        elif kind == "sample":
            sample_rows.append((lineno, obj))
        else:
            raise DataError(f"{where}: unknown record kind {kind!r}")

    if header is None:
        raise DataError(f"{path.name}: empty manifest (no header)")

    samples = []
    seen_keys: set[tuple[str, str]] = set()
    for lineno, obj in sample_rows:
        where = f"{path.name}:{lineno}"
        subject_id = str(obj.get("subject_id", ""))
        prompt_id = str(obj.get("prompt_id", ""))
        if subject_id not in subjects:
            raise DataError(f"{where}: sample references unknown subject_id {subject_id!r}")
        if prompt_id not in prompts:
            raise DataError(f"{where}: sample references unknown prompt_id {prompt_id!r}")
        try:
            sample = EvalSample(
                sample_id=str(obj["sample_id"]),
                subject=subjects[subject_id],
                input_image_index=int(obj["input_image_index"]),
                prompt=prompts[prompt_id],
                output_image_ref=str(obj["output_image_ref"]),
                method_id=str(obj["method_id"]),
            )
        except KeyError as exc:
            raise DataError(f"{where}: sample missing field {exc}") from exc
        key = (sample.method_id, sample.sample_id)
        if key in seen_keys:
            raise DataError(f"{where}: duplicate (method_id, sample_id) {key}")
        seen_keys.add(key)
        violations = validate_sample(sample)
        if violations:
            raise DataError(f"{where}: invalid sample {sample.sample_id!r}: "
                            + "; ".join(violations))
        samples.append(sample)

    return Manifest(
        header=header,
        subjects=tuple(subjects.values()),
        prompts=tuple(prompts.values()),
        samples=tuple(samples),
        content_hash=content_hash,
    )


def validate_sample(sample: EvalSample) -> list[str]:
    """Return every violated invariant (empty list means ok).

    Violations are data, not errors: callers decide whether to raise.
    """
    violations = []
    if not 0 <= sample.input_image_index < len(sample.subject.image_refs):
        violations.append(
            f"input_image_index {sample.input_image_index} out of bounds for "
            f"{len(sample.subject.image_refs)} subject images"
        )
    if not sample.output_image_ref:
        violations.append("output_image_ref is empty")
    for triplet in sample.prompt.annotated_triplets:
        if triplet.object not in sample.prompt.referenced_objects:
            violations.append(
                f"triplet <{triplet.subject_slot}, {triplet.predicate}, {triplet.object}> "
                "references an object missing from referenced_objects"
            )
    return violations


def subject_to_obj(record: SubjectRecord) -> dict:
    obj = {
        "kind": "subject",
        "subject_id": record.subject_id,
        "image_refs": list(record.image_refs),
        "attribute_labels": dict(record.attribute_labels),
    }
    if record.foreground_mask_refs is not None:
        obj["foreground_mask_refs"] = list(record.foreground_mask_refs)
    if record.demographic_tags:
        obj["demographic_tags"] = dict(record.demographic_tags)
    return obj


def prompt_to_obj(record: PromptRecord) -> dict:
    obj = {
        "kind": "prompt",
        "prompt_id": record.prompt_id,
        "text": record.text,
        "referenced_objects": list(record.referenced_objects),
        "annotated_triplets": [
            {"subject": t.subject_slot, "predicate": t.predicate, "object": t.object}
            for t in record.annotated_triplets
        ],
        "themes": list(record.themes),
    }
    if record.template_trace is not None:
        obj["template_trace"] = record.template_trace
    return obj


def sample_to_obj(sample: EvalSample) -> dict:
    return {
        "kind": "sample",
        "sample_id": sample.sample_id,
        "subject_id": sample.subject.subject_id,
        "input_image_index": sample.input_image_index,
        "prompt_id": sample.prompt.prompt_id,
        "output_image_ref": sample.output_image_ref,
        "method_id": sample.method_id,
    }


def save_manifest(manifest: Manifest, path: str | Path) -> None:
    """Serialize a manifest back to its line-delimited form (round-trips)."""
    path = Path(path)
    header = {
        "kind": "header",
        "schema_version": manifest.header.schema_version,
        "attribute_names": list(manifest.header.attribute_names),
        "themes": list(manifest.header.themes),
    }
    if manifest.header.manifest_id is not None:
        header["manifest_id"] = manifest.header.manifest_id
    rows = [header]
    rows.extend(subject_to_obj(s) for s in manifest.subjects)
    rows.extend(prompt_to_obj(p) for p in manifest.prompts)
    rows.extend(sample_to_obj(s) for s in manifest.samples)
    text = "\n".join(json.dumps(row, ensure_ascii=False, sort_keys=True) for row in rows)
    path.write_text(text + "\n", encoding="utf-8")
