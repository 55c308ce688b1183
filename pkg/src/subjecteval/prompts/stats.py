"""Corpus statistics: lexical counts and embedding-space spread."""

from __future__ import annotations

import re
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..errors import DataError

_WORD_RE = re.compile(r"[A-Za-z][A-Za-z'-]*")

EXACT_PAIR_LIMIT = 10_000       # corpora above this sample pairs instead
SAMPLED_PAIRS = 1_000_000


class LexiconTagger:
    """Minimal part-of-speech tagger backed by explicit word lists.

    Stands in for a learned tagger in tests and offline runs; anything not
    listed tags as "other".
    """

    identity = "lexicon-tagger@1"

    def __init__(self, verbs=(), nouns=()):
        self._verbs = {w.lower() for w in verbs}
        self._nouns = {w.lower() for w in nouns}

    def tag(self, token: str) -> str:
        token = token.lower()
        if token in self._verbs:
            return "verb"
        if token in self._nouns:
            return "noun"
        return "other"


def load_lexicon_tagger(path: str | Path) -> LexiconTagger:
    """Read a two-section lexicon file ([verbs] / [nouns], one word per line)."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"lexicon file not found: {path}")
    verbs, nouns = [], []
    bucket = None
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line == "[verbs]":
            bucket = verbs
        elif line == "[nouns]":
            bucket = nouns
        elif bucket is None:
            raise DataError(f"{path.name}: word {line!r} outside [verbs]/[nouns]")
        else:
            bucket.append(line)
    return LexiconTagger(verbs=verbs, nouns=nouns)


@dataclass(frozen=True)
class CorpusStats:
    n_prompts: int
    distinct_words: int
    mean_sentence_length_words: float
    n_verbs: int
    n_nouns: int
    mean_pairwise_cosine_distance: float | None
    pairwise_exact: bool
    n_pairs: int
    reference_mean_pairwise_cosine_distance: float | None = None
    reference_ratio: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _tokens(text: str) -> list[str]:
    return [m.group(0).lower() for m in _WORD_RE.finditer(text)]


def _mean_pairwise_distance(embeddings: np.ndarray, seed: int) -> tuple[float | None, bool, int]:
    n = embeddings.shape[0]
    if n < 2:
        return None, True, 0
    norms = np.linalg.norm(embeddings, axis=1)
    if np.any(norms == 0):
        raise DataError("corpus contains a zero-vector embedding")
    unit = embeddings / norms[:, None]
    if n <= EXACT_PAIR_LIMIT:
        gram = unit @ unit.T
        upper = np.triu_indices(n, k=1)
        distances = 1.0 - gram[upper]
        return float(distances.mean()), True, distances.size
    rng = np.random.default_rng(seed)
    i = rng.integers(0, n, size=SAMPLED_PAIRS)
    j = rng.integers(0, n - 1, size=SAMPLED_PAIRS)
    j = np.where(j >= i, j + 1, j)  # never pair a sentence with itself
    distances = 1.0 - np.einsum("ij,ij->i", unit[i], unit[j])
    return float(distances.mean()), False, SAMPLED_PAIRS


def corpus_stats(prompts, tagger, sentence_embedder, reference=None,
                 seed: int = 0) -> CorpusStats:
    """Compute lexical and embedding-spread statistics for a prompt corpus.

    The pairwise term is the mean cosine distance between length-normalized
    sentence embeddings, exact up to 10k prompts and over a seeded sample of
    one million pairs beyond that. ``reference`` (another corpus) adds a
    spread ratio (this corpus / reference).
    """
    prompts = list(prompts)
    if not prompts:
        raise DataError("corpus_stats needs a non-empty corpus")

    all_tokens: list[str] = []
    lengths = []
    for text in prompts:
        tokens = _tokens(text)
        all_tokens.extend(tokens)
        lengths.append(len(tokens))
    vocabulary = set(all_tokens)
    verbs = {t for t in vocabulary if tagger.tag(t) == "verb"}
    nouns = {t for t in vocabulary if tagger.tag(t) == "noun"}

    embeddings = np.asarray([sentence_embedder.embed_sentence(p) for p in prompts],
                            dtype=np.float64)
    mean_distance, exact, n_pairs = _mean_pairwise_distance(embeddings, seed)

    reference_mean = None
    ratio = None
    if reference is not None:
        reference = list(reference)
        if len(reference) < 2:
            raise DataError("reference corpus needs at least 2 prompts")
        ref_embeddings = np.asarray(
            [sentence_embedder.embed_sentence(p) for p in reference], dtype=np.float64
        )
        reference_mean, _, _ = _mean_pairwise_distance(ref_embeddings, seed)
        if mean_distance is not None and reference_mean not in (None, 0.0):
            ratio = mean_distance / reference_mean

    return CorpusStats(
        n_prompts=len(prompts),
        distinct_words=len(vocabulary),
        mean_sentence_length_words=sum(lengths) / len(lengths),
        n_verbs=len(verbs),
        n_nouns=len(nouns),
        mean_pairwise_cosine_distance=mean_distance,
        pairwise_exact=exact,
        n_pairs=n_pairs,
        reference_mean_pairwise_cosine_distance=reference_mean,
        reference_ratio=ratio,
    )
