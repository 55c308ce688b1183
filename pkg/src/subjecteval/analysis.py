"""Human-alignment analysis: vote filtering, rank correlation, and the
metric-vs-human correlation tables.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError
from .report import MetricReport

STUDIES = ("obj", "rel", "overall")

OVERALL_REDUCTION = "argmax-indicator"


@dataclass(frozen=True)
class HumanVoteRecord:
    trial_id: str
    study: str
    candidate_method_ids: tuple[str, ...]
    votes: tuple[str, ...]
    sample_ref: str

    def __post_init__(self):
        if self.study not in STUDIES:
            raise DataError(
                f"trial {self.trial_id!r}: study must be one of {STUDIES}, "
                f"got {self.study!r}"
            )
        if not self.votes:
            raise DataError(f"trial {self.trial_id!r}: no votes")
        if len(self.candidate_method_ids) < 2:
            raise DataError(f"trial {self.trial_id!r}: fewer than 2 candidates")
        rogue = [v for v in self.votes if v not in self.candidate_method_ids]
        if rogue:
            raise DataError(
                f"trial {self.trial_id!r}: votes {rogue} name non-candidates"
            )


def load_votes(path: str | Path) -> list[HumanVoteRecord]:
    """Read line-delimited vote records."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"votes file not found: {path}")
    records = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path.name}:{lineno}: not valid JSON ({exc.msg})") from exc
        try:
            records.append(HumanVoteRecord(
                trial_id=str(obj["trial_id"]),
                study=str(obj["study"]),
                candidate_method_ids=tuple(str(c) for c in obj["candidate_method_ids"]),
                votes=tuple(str(v) for v in obj["votes"]),
                sample_ref=str(obj["sample_ref"]),
            ))
        except KeyError as exc:
            raise DataError(f"{path.name}:{lineno}: vote record missing {exc}") from exc
    return records


def majority_filter(votes) -> tuple[list[tuple[HumanVoteRecord, str]], int]:
    """Keep records where one candidate holds a strict majority of votes.

    Returns (kept records with their winner attached, discard count).
    """
    kept = []
    discarded = 0
    for record in votes:
        counts = Counter(record.votes)
        winner, top = counts.most_common(1)[0]
        if top * 2 > len(record.votes):
            kept.append((record, winner))
        else:
            discarded += 1
    return kept, discarded


def kendall_tau(x, y) -> float | None:
    """Tie-corrected (tau-b) Kendall rank correlation.

    Equals pair counting over all i < j: concordant minus discordant,
    normalized by the geometric mean of non-tied pair counts per side.
    None when either side is constant (undefined).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DataError("kendall_tau needs two equal-length 1-D sequences")
    n = x.size
    if n < 2:
        raise DataError(f"kendall_tau needs at least 2 observations, got {n}")
    dx = np.sign(x[:, None] - x[None, :])
    dy = np.sign(y[:, None] - y[None, :])
    upper = np.triu_indices(n, k=1)
    product = dx[upper] * dy[upper]
    concordant = int(np.sum(product > 0))
    discordant = int(np.sum(product < 0))
    ties_x = int(np.sum(dx[upper] == 0))
    ties_y = int(np.sum(dy[upper] == 0))
    n0 = n * (n - 1) // 2
    if ties_x == n0 or ties_y == n0:
        return None
    return (concordant - discordant) / math.sqrt((n0 - ties_x) * (n0 - ties_y))


def pearson(x, y) -> float | None:
    """Product-moment correlation; None when either side has zero variance."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DataError("pearson needs two equal-length 1-D sequences")
    if x.size < 2:
        raise DataError(f"pearson needs at least 2 observations, got {x.size}")
    dx = x - x.mean()
    dy = y - y.mean()
    vx = float(np.sum(dx * dx))
    vy = float(np.sum(dy * dy))
    if vx == 0.0 or vy == 0.0:
        return None
    return float(np.sum(dx * dy)) / math.sqrt(vx * vy)


@dataclass(frozen=True)
class CorrelationTable:
    """Kendall-tau of each metric against human winners, per study."""

    metrics: tuple[str, ...]
    values: dict[str, dict[str, float | None]]  # metric -> study -> tau
    n_trials: dict[str, int] = field(default_factory=dict)
    kept_fraction: float = 1.0
    overall_reduction: str = OVERALL_REDUCTION

    def to_dict(self) -> dict:
        return {
            "metrics": list(self.metrics),
            "studies": list(STUDIES),
            "values": {m: dict(v) for m, v in self.values.items()},
            "n_trials": dict(self.n_trials),
            "kept_fraction": self.kept_fraction,
            "overall_reduction": self.overall_reduction,
        }


def _metric_score(report: MetricReport, method: str, sample_ref: str, metric: str):
    entry = report.sample_entry(method, sample_ref, metric)
    if entry is None or entry.value is None:
        return None
    return entry.value


def _pairwise_series(report, trials, metric):
    """Per-trial (sign of score difference, +-1 winner) pairs."""
    xs, ys = [], []
    for record, winner in trials:
        a, b = record.candidate_method_ids[:2]
        score_a = _metric_score(report, a, record.sample_ref, metric)
        score_b = _metric_score(report, b, record.sample_ref, metric)
        if score_a is None or score_b is None:
            continue
        xs.append(float(np.sign(score_a - score_b)))
        ys.append(1.0 if winner == a else -1.0)
    return xs, ys


def _overall_series(report, trials, metric):
    """(trial, candidate) rows: metric-argmax indicator vs winner indicator."""
    xs, ys = [], []
    for record, winner in trials:
        scores = []
        for method in record.candidate_method_ids:
            score = _metric_score(report, method, record.sample_ref, metric)
            if score is None:
                break
            scores.append(score)
        else:
            best = record.candidate_method_ids[int(np.argmax(scores))]
            for method in record.candidate_method_ids:
                xs.append(1.0 if method == best else 0.0)
                ys.append(1.0 if method == winner else 0.0)
    return xs, ys


def correlate(report: MetricReport, votes,
              metrics=None) -> tuple[CorrelationTable, dict]:
    """Correlate per-sample metric scores with majority human preferences.

    Pairwise studies (obj/rel) reduce each trial to the sign of the score
    difference vs the +-1 winner; the multi-candidate overall study expands
    each trial into per-candidate indicator rows. Also returns the
    intra/inter-metric Pearson matrix over per-sample values.
    """
    kept, discarded = majority_filter(votes)
    total = len(kept) + discarded
    if metrics is None:
        metrics = report.per_sample_metrics
    metrics = tuple(metrics)

    by_study: dict[str, list] = {s: [] for s in STUDIES}
    for record, winner in kept:
        by_study[record.study].append((record, winner))

    values: dict[str, dict[str, float | None]] = {}
    for metric in metrics:
        row: dict[str, float | None] = {}
        for study in STUDIES:
            trials = by_study[study]
            if study == "overall":
                xs, ys = _overall_series(report, trials, metric)
            else:
                xs, ys = _pairwise_series(report, trials, metric)
            row[study] = kendall_tau(xs, ys) if len(xs) >= 2 else None
        values[metric] = row

    table = CorrelationTable(
        metrics=metrics,
        values=values,
        n_trials={s: len(by_study[s]) for s in STUDIES},
        kept_fraction=(len(kept) / total) if total else 1.0,
    )
    return table, metric_pearson_matrix(report, metrics)


def metric_pearson_matrix(report: MetricReport, metrics) -> dict:
    """Pairwise Pearson over per-sample values where both metrics apply."""
    metrics = tuple(metrics)
    series: dict[str, dict[tuple[str, str], float]] = {m: {} for m in metrics}
    for method, sample_id, metric, entry in report.iter_sample_entries():
        if metric in series and entry.value is not None:
            series[metric][(method, sample_id)] = entry.value
    matrix: dict[str, dict[str, float | None]] = {}
    for a in metrics:
        matrix[a] = {}
        for b in metrics:
            shared = sorted(set(series[a]) & set(series[b]))
            if len(shared) < 2:
                matrix[a][b] = None
                continue
            matrix[a][b] = pearson([series[a][k] for k in shared],
                                   [series[b][k] for k in shared])
    return matrix
