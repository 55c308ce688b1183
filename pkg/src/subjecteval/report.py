"""Evaluation reports: per-sample score sets, aggregates, and emission.

JSON output is canonical (sorted keys, compact separators, full float
precision) so reports are byte-comparable; CSV and markdown render at
3-decimal display precision. The markdown layout groups metric rows by
family (image-to-image, text-to-image, personalized) with one column per
method.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DataError, UsageError

SAMPLE_LEVEL = "sample"
METHOD_LEVEL = "method"

STATUS_SCORED = "scored"
STATUS_NOT_APPLICABLE = "not-applicable"
STATUS_FAILED = "failed"

METRIC_GROUPS = {
    "aesthetic": "Img-to-Img",
    "clip_i": "Img-to-Img",
    "dreamsim": "Img-to-Img",
    "clip_t": "Text-to-Img",
    "hpsv1": "Text-to-Img",
    "hpsv2": "Text-to-Img",
    "imagereward": "Text-to-Img",
    "pickscore": "Text-to-Img",
    "goa": "Personalized",
    "rfs": "Personalized",
    "aps": "Personalized",
    "sis": "Personalized",
    "sis_fast": "Personalized",
    "ips": "Personalized",
}
GROUP_ORDER = ("Img-to-Img", "Text-to-Img", "Personalized", "Other")
METRIC_ORDER = (
    "aesthetic", "clip_i", "dreamsim",
    "clip_t", "hpsv1", "hpsv2", "imagereward", "pickscore",
    "goa", "rfs", "aps", "sis", "sis_fast", "ips",
)
DISPLAY_NAMES = {
    "aesthetic": "Aesth.",
    "clip_i": "CLIP_I",
    "dreamsim": "DreamSim",
    "clip_t": "CLIP_T",
    "hpsv1": "HPSv1",
    "hpsv2": "HPSv2",
    "imagereward": "ImageReward",
    "pickscore": "PickScore",
    "goa": "GOA",
    "rfs": "RFS",
    "aps": "APS",
    "sis": "SIS",
    "sis_fast": "SIS_fast",
    "ips": "IPS",
}

FORMATS = ("json", "csv", "markdown-table")


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def metric_sort_key(metric: str):
    try:
        return (0, METRIC_ORDER.index(metric))
    except ValueError:
        return (1, metric)


def sorted_metrics(metrics) -> list[str]:
    return sorted(set(metrics), key=metric_sort_key)


@dataclass(frozen=True)
class ScoreEntry:
    value: float | None
    status: str = STATUS_SCORED
    reason: str | None = None

    def to_dict(self) -> dict:
        out: dict = {"status": self.status, "value": self.value}
        if self.reason is not None:
            out["reason"] = self.reason
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "ScoreEntry":
        return cls(value=obj.get("value"), status=obj.get("status", STATUS_SCORED),
                   reason=obj.get("reason"))


def not_applicable(reason: str) -> ScoreEntry:
    return ScoreEntry(value=None, status=STATUS_NOT_APPLICABLE, reason=reason)


def failed(reason: str) -> ScoreEntry:
    return ScoreEntry(value=None, status=STATUS_FAILED, reason=reason)


@dataclass(frozen=True)
class AggregateEntry:
    value: float | None
    n_applicable: int
    n_penalized: int = 0
    level: str = SAMPLE_LEVEL

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "n_applicable": self.n_applicable,
            "n_penalized": self.n_penalized,
            "level": self.level,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "AggregateEntry":
        return cls(
            value=obj.get("value"),
            n_applicable=int(obj.get("n_applicable", 0)),
            n_penalized=int(obj.get("n_penalized", 0)),
            level=obj.get("level", SAMPLE_LEVEL),
        )


@dataclass
class MetricReport:
    """Per-sample and aggregate scores plus the full provenance snapshot."""

    per_sample: dict[str, dict[str, dict[str, ScoreEntry]]] = field(default_factory=dict)
    aggregates: dict[str, dict[str, AggregateEntry]] = field(default_factory=dict)
    coverage_stats: dict = field(default_factory=dict)
    config_snapshot: dict = field(default_factory=dict)

    def sample_entry(self, method: str, sample_id: str, metric: str) -> ScoreEntry | None:
        return self.per_sample.get(method, {}).get(sample_id, {}).get(metric)

    def iter_sample_entries(self):
        for method in sorted(self.per_sample):
            samples = self.per_sample[method]
            for sample_id in sorted(samples):
                for metric, entry in samples[sample_id].items():
                    yield method, sample_id, metric, entry

    @property
    def per_sample_metrics(self) -> tuple[str, ...]:
        names = set()
        for samples in self.per_sample.values():
            for entries in samples.values():
                names.update(entries)
        return tuple(sorted_metrics(names))

    @property
    def method_ids(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.per_sample) | set(self.aggregates)))

    def to_dict(self) -> dict:
        return {
            "per_sample": {
                method: {
                    sample_id: {m: e.to_dict() for m, e in entries.items()}
                    for sample_id, entries in samples.items()
                }
                for method, samples in self.per_sample.items()
            },
            "aggregates": {
                method: {m: a.to_dict() for m, a in row.items()}
                for method, row in self.aggregates.items()
            },
            "coverage_stats": self.coverage_stats,
            "config_snapshot": self.config_snapshot,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "MetricReport":
        return cls(
            per_sample={
                method: {
                    sample_id: {m: ScoreEntry.from_dict(e) for m, e in entries.items()}
                    for sample_id, entries in samples.items()
                }
                for method, samples in obj.get("per_sample", {}).items()
            },
            aggregates={
                method: {m: AggregateEntry.from_dict(a) for m, a in row.items()}
                for method, row in obj.get("aggregates", {}).items()
            },
            coverage_stats=obj.get("coverage_stats", {}),
            config_snapshot=obj.get("config_snapshot", {}),
        )

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    def validate(self, tolerance: float = 1e-9) -> list[str]:
        """Check internal consistency; returns violation descriptions.

        Sample-level aggregates must equal the arithmetic mean of applicable
        per-sample values, and every sample must carry an entry for every
        metric that appears for its method.
        """
        problems = []
        for method, row in self.aggregates.items():
            samples = self.per_sample.get(method, {})
            metrics_seen = set()
            for entries in samples.values():
                metrics_seen.update(entries)
            for entries_id, entries in samples.items():
                missing = metrics_seen - set(entries)
                if missing:
                    problems.append(
                        f"{method}/{entries_id}: missing entries for {sorted(missing)}"
                    )
            for metric, aggregate in row.items():
                if aggregate.level != SAMPLE_LEVEL:
                    continue
                values = [
                    e.value for entries in samples.values()
                    for m, e in entries.items()
                    if m == metric and e.value is not None
                ]
                if not values:
                    if aggregate.value is not None:
                        problems.append(
                            f"{method}/{metric}: aggregate {aggregate.value} but no "
                            "applicable samples"
                        )
                    continue
                mean = sum(values) / len(values)
                if aggregate.value is None or abs(aggregate.value - mean) > tolerance:
                    problems.append(
                        f"{method}/{metric}: aggregate {aggregate.value} != mean {mean}"
                    )
        return problems


def load_report(path: str | Path) -> MetricReport:
    path = Path(path)
    if not path.exists():
        raise DataError(f"report not found: {path}")
    try:
        return MetricReport.from_dict(json.loads(path.read_text(encoding="utf-8")))
    except json.JSONDecodeError as exc:
        raise DataError(f"cannot parse report {path}: {exc}") from exc


def _display(metric: str) -> str:
    return DISPLAY_NAMES.get(metric, metric)


def _fmt(value) -> str:
    return "n/a" if value is None else f"{value:.3f}"


def _aggregate_values(report) -> dict[str, dict[str, float | None]]:
    """Normalize either a MetricReport or a plain {method: {metric: value}}."""
    if isinstance(report, MetricReport):
        return {
            method: {m: a.value for m, a in row.items()}
            for method, row in report.aggregates.items()
        }
    if isinstance(report, dict):
        return {str(m): dict(row) for m, row in report.items()}
    raise UsageError(f"cannot render a {type(report).__name__} as a report")


def render_markdown_table(report, method_order=None) -> str:
    """Method-per-column, metric-per-row table grouped by metric family."""
    aggregates = _aggregate_values(report)
    methods = list(method_order) if method_order else sorted(aggregates)
    metrics = sorted_metrics(m for row in aggregates.values() for m in row)
    by_group: dict[str, list[str]] = {}
    for metric in metrics:
        by_group.setdefault(METRIC_GROUPS.get(metric, "Other"), []).append(metric)

    lines = [
        "| Metrics | " + " | ".join(methods) + " | Type |",
        "|" + "---|" * (len(methods) + 2),
    ]
    for group in GROUP_ORDER:
        for i, metric in enumerate(by_group.get(group, ())):
            cells = [_fmt(aggregates.get(method, {}).get(metric)) for method in methods]
            group_cell = group if i == 0 else ""
            lines.append(
                f"| {_display(metric)} | " + " | ".join(cells) + f" | {group_cell} |"
            )
    return "\n".join(lines) + "\n"


def render_csv(report) -> str:
    """One row per (method, metric): aggregate, n_applicable, n_penalized."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["method", "metric", "aggregate", "n_applicable", "n_penalized"])
    if isinstance(report, MetricReport):
        for method in sorted(report.aggregates):
            row = report.aggregates[method]
            for metric in sorted_metrics(row):
                aggregate = row[metric]
                writer.writerow([
                    method, metric, _fmt(aggregate.value),
                    aggregate.n_applicable, aggregate.n_penalized,
                ])
    else:
        aggregates = _aggregate_values(report)
        for method in sorted(aggregates):
            for metric in sorted_metrics(aggregates[method]):
                writer.writerow([method, metric, _fmt(aggregates[method][metric]), "", ""])
    return buffer.getvalue()


def render_correlation_markdown(table) -> str:
    """Metric-per-row, study-per-column table of Kendall-tau values."""
    data = table.to_dict() if hasattr(table, "to_dict") else dict(table)
    studies = data.get("studies", ["obj", "rel", "overall"])
    lines = [
        "| Metric | " + " | ".join(s.capitalize() for s in studies) + " |",
        "|" + "---|" * (len(studies) + 1),
    ]
    for metric in data["metrics"]:
        row = data["values"][metric]
        lines.append(
            f"| {_display(metric)} | "
            + " | ".join(_fmt(row.get(s)) for s in studies) + " |"
        )
    return "\n".join(lines) + "\n"


def emit_report(report, fmt: str, dest: str | Path | None = None,
                method_order=None) -> str:
    """Render a report (or bare aggregates) and optionally write it out."""
    if fmt not in FORMATS:
        raise UsageError(f"format must be one of {FORMATS}, got {fmt!r}")
    if fmt == "json":
        if isinstance(report, MetricReport):
            content = report.to_json()
        else:
            content = canonical_json(_aggregate_values(report))
    elif fmt == "csv":
        content = render_csv(report)
    else:
        content = render_markdown_table(report, method_order=method_order)
    if dest is not None:
        dest = Path(dest)
        try:
            dest.parent.mkdir(parents=True, exist_ok=True)
            dest.write_text(content, encoding="utf-8")
        except OSError as exc:
            raise DataError(f"cannot write report to {dest}: {exc}") from exc
    return content
