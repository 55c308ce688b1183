"""Prompt-corpus construction: grammar expansion, diversity subsampling,
corpus statistics and subject-prompt pairing."""

from .grammar import (  # noqa: F401
    ExpandedPrompt,
    ProductionRule,
    TemplateGrammar,
    expand_grammar,
    load_grammar,
    to_prompt_records,
)
from .pairing import pair_subjects_prompts  # noqa: F401
from .sampling import farthest_point_sample  # noqa: F401
from .stats import CorpusStats, LexiconTagger, corpus_stats, load_lexicon_tagger  # noqa: F401
