"""Template grammars and their exhaustive expansion into annotated prompts.

Grammar file format (text, section-based):

    [rule ride-vehicle-space]
    pattern = riding a [vehicle] near [space loc.]
    predicate = riding
    objects = vehicle, space loc.
    triplet_objects = vehicle

    [vocab vehicle]
    skateboard
    rocket

    [theme vehicle]
    vehicle-related

``objects`` names the slots whose fillers become referenced objects;
``triplet_objects`` (default: the first object slot) names the slots whose
fillers form <human, predicate, filler> triplets. Articles belong in the
pattern literals so expansion stays byte-deterministic.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import DataError
from ..manifest import AnnotatedTriplet, PromptRecord

_SLOT_RE = re.compile(r"\[([^\[\]]+)\]")


@dataclass(frozen=True)
class ProductionRule:
    rule_id: str
    pattern: str
    predicate: str
    annotated_slots: tuple[str, ...]
    triplet_slots: tuple[str, ...] | None = None

    @property
    def slots(self) -> tuple[str, ...]:
        return tuple(_SLOT_RE.findall(self.pattern))

    def __post_init__(self):
        slots = self.slots
        if not slots:
            raise DataError(f"rule {self.rule_id!r}: pattern has no slots")
        if len(set(slots)) != len(slots):
            raise DataError(f"rule {self.rule_id!r}: pattern repeats a slot")
        if not self.predicate:
            raise DataError(f"rule {self.rule_id!r}: empty predicate")
        for slot in self.annotated_slots:
            if slot not in slots:
                raise DataError(
                    f"rule {self.rule_id!r}: annotated slot {slot!r} not in pattern"
                )
        if self.triplet_slots is not None:
            for slot in self.triplet_slots:
                if slot not in self.annotated_slots:
                    raise DataError(
                        f"rule {self.rule_id!r}: triplet slot {slot!r} is not an "
                        "annotated slot"
                    )

    def effective_triplet_slots(self) -> tuple[str, ...]:
        if self.triplet_slots is not None:
            return self.triplet_slots
        return self.annotated_slots[:1]


@dataclass(frozen=True)
class TemplateGrammar:
    rules: tuple[ProductionRule, ...]
    vocabularies: dict[str, tuple[str, ...]] = field(default_factory=dict)
    themes: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        for slot, fillers in self.vocabularies.items():
            if not fillers:
                raise DataError(f"vocabulary for slot {slot!r} is empty")
            if len(set(fillers)) != len(fillers):
                raise DataError(f"vocabulary for slot {slot!r} has duplicates")
        for rule in self.rules:
            for slot in rule.slots:
                if slot not in self.vocabularies:
                    raise DataError(
                        f"rule {rule.rule_id!r} uses slot {slot!r} without a vocabulary"
                    )

    def expansion_count(self) -> int:
        """Closed-form size of the exhaustive expansion."""
        total = 0
        for rule in self.rules:
            product = 1
            for slot in rule.slots:
                product *= len(self.vocabularies[slot])
            total += product
        return total


def load_grammar(path: str | Path) -> TemplateGrammar:
    path = Path(path)
    if not path.exists():
        raise DataError(f"grammar file not found: {path}")

    rules: list[ProductionRule] = []
    vocabularies: dict[str, list[str]] = {}
    themes: dict[str, str] = {}
    section: tuple[str, str] | None = None
    rule_fields: dict[str, str] = {}

    def flush_rule():
        nonlocal rule_fields
        if section is None or section[0] != "rule":
            return
        rule_id = section[1]
        missing = [k for k in ("pattern", "predicate") if k not in rule_fields]
        if missing:
            raise DataError(f"rule {rule_id!r}: missing {missing}")
        objects = tuple(
            s.strip() for s in rule_fields.get("objects", "").split(",") if s.strip()
        )
        triplet_raw = rule_fields.get("triplet_objects")
        triplet = None
        if triplet_raw is not None:
            triplet = tuple(s.strip() for s in triplet_raw.split(",") if s.strip())
        rules.append(ProductionRule(
            rule_id=rule_id,
            pattern=rule_fields["pattern"],
            predicate=rule_fields["predicate"],
            annotated_slots=objects,
            triplet_slots=triplet,
        ))
        rule_fields = {}

    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        header = re.fullmatch(r"\[(rule|vocab|theme)\s+(.+?)\]", line)
        if header:
            flush_rule()
            section = (header.group(1), header.group(2).strip())
            if section[0] == "vocab":
                vocabularies.setdefault(section[1], [])
            continue
        if section is None:
            raise DataError(f"{path.name}:{lineno}: content outside any section")
        kind, name = section
        if kind == "rule":
            if "=" not in line:
                raise DataError(f"{path.name}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            rule_fields[key] = value
        elif kind == "vocab":
            vocabularies[name].append(line)
        else:  # theme
            if name in themes:
                raise DataError(f"{path.name}:{lineno}: second theme for slot {name!r}")
            themes[name] = line
    flush_rule()

    return TemplateGrammar(
        rules=tuple(rules),
        vocabularies={k: tuple(v) for k, v in vocabularies.items()},
        themes=themes,
    )


@dataclass(frozen=True)
class ExpandedPrompt:
    text: str
    template_trace: str
    referenced_objects: tuple[str, ...]
    triplets: tuple[AnnotatedTriplet, ...]
    themes: tuple[str, ...]


def expand_grammar(grammar: TemplateGrammar) -> list[ExpandedPrompt]:
    """Exhaustively expand every production rule.

    Output size equals ``grammar.expansion_count()``: the sum over rules of
    the product of slot-vocabulary sizes.
    """
    out: list[ExpandedPrompt] = []
    for rule in grammar.rules:
        slots = rule.slots
        triplet_slots = rule.effective_triplet_slots()
        rule_themes = tuple(
            dict.fromkeys(grammar.themes[s] for s in slots if s in grammar.themes)
        )
        for fillers in itertools.product(*(grammar.vocabularies[s] for s in slots)):
            binding = dict(zip(slots, fillers))
            text = _SLOT_RE.sub(lambda m: binding[m.group(1)], rule.pattern)
            objects = tuple(dict.fromkeys(binding[s] for s in rule.annotated_slots))
            triplets = tuple(
                AnnotatedTriplet(predicate=rule.predicate, object=binding[s])
                for s in triplet_slots
            )
            trace = "{}({})".format(
                rule.rule_id,
                "; ".join(f"{s}={binding[s]}" for s in slots),
            )
            out.append(ExpandedPrompt(
                text=text,
                template_trace=trace,
                referenced_objects=objects,
                triplets=triplets,
                themes=rule_themes,
            ))
    return out


def to_prompt_records(expanded, id_prefix: str = "t") -> list[PromptRecord]:
    """Assign stable ids (by candidate index) and build manifest records."""
    width = max(6, len(str(max(len(expanded) - 1, 0))))
    return [
        PromptRecord(
            prompt_id=f"{id_prefix}{i:0{width}d}",
            text=p.text,
            referenced_objects=p.referenced_objects,
            annotated_triplets=p.triplets,
            themes=p.themes,
            template_trace=p.template_trace,
        )
        for i, p in enumerate(expanded)
    ]
