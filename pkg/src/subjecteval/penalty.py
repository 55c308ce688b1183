"""Exploitation guard shared by the identity metrics.

An output that merely replicates the input image scores perfectly on any
image-to-image similarity, so identity scores are gated by a binary
indicator: the output must beat the input's prompt similarity by a margin
of two standard deviations of the prompt-similarity distribution.

Two margin modes exist. "additive" (default) requires
``score(P, O) > score(P, I) + 2 * sigma``; "literal-multiplicative" requires
``score(P, O) > score(P, I) * 2 * sigma``. The additive form matches the
stated intent (improve by at least two standard deviations); the
multiplicative form reproduces the indicator exactly as typeset and is kept
for fidelity runs. Ties penalize in both modes.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

from .errors import DataError, UsageError

ADDITIVE = "additive"
LITERAL_MULTIPLICATIVE = "literal-multiplicative"
MODES = (ADDITIVE, LITERAL_MULTIPLICATIVE)

ESTIMATE = "estimate"

_sigma_cache: dict[tuple[str, str], float] = {}
_sigma_cache_lock = threading.Lock()


@dataclass(frozen=True)
class PenaltyConfig:
    mode: str = ADDITIVE
    sigma: float | str = ESTIMATE
    sigma_estimation_scope: str | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise UsageError(f"penalty.mode must be one of {MODES}, got {self.mode!r}")
        if isinstance(self.sigma, str):
            if self.sigma != ESTIMATE:
                raise UsageError(
                    f'penalty.sigma must be a number or "{ESTIMATE}", got {self.sigma!r}'
                )
        elif self.sigma < 0:
            raise UsageError(f"penalty.sigma must be >= 0, got {self.sigma}")

    @property
    def resolved(self) -> bool:
        return not isinstance(self.sigma, str)

    def with_sigma(self, sigma: float) -> "PenaltyConfig":
        return PenaltyConfig(mode=self.mode, sigma=float(sigma),
                             sigma_estimation_scope=self.sigma_estimation_scope)


def estimate_sigma(samples, scorer, manifest_hash: str | None = None) -> float:
    """Population standard deviation of score(prompt, input image) over samples.

    Scores are taken on the input side so the estimate is independent of the
    generator under evaluation. Results are cached per (scorer identity,
    manifest hash) when a hash is supplied.
    """
    samples = list(samples)
    if len(samples) < 2:
        raise DataError(f"sigma estimation needs at least 2 samples, got {len(samples)}")
    if manifest_hash is not None:
        key = (scorer.identity, manifest_hash)
        cached = _sigma_cache.get(key)
        if cached is not None:
            return cached
    scores = [
        scorer.score_text_image(s.prompt.text,
                                s.subject.image_refs[s.input_image_index])
        for s in samples
    ]
    mean = sum(scores) / len(scores)
    sigma = math.sqrt(sum((v - mean) ** 2 for v in scores) / len(scores))
    if manifest_hash is not None:
        with _sigma_cache_lock:
            _sigma_cache.setdefault((scorer.identity, manifest_hash), sigma)
    return sigma


def penalty_indicator(score_pi: float, score_po: float, cfg: PenaltyConfig) -> int:
    """1 = output clears the margin (no penalty), 0 = penalized.

    The returned value multiplies downstream identity scores.
    """
    if not cfg.resolved:
        raise UsageError("penalty config not resolved: sigma is still 'estimate'")
    if cfg.mode == ADDITIVE:
        threshold = score_pi + 2.0 * cfg.sigma
    else:
        threshold = score_pi * 2.0 * cfg.sigma
    return 1 if threshold < score_po else 0
