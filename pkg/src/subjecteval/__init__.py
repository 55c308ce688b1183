"""Evaluation toolkit for personalized (subject-conditioned) text-to-image generation.

Scores (subject image, prompt, output image) triples with five specialized
metrics -- identity preservation, attribute preservation, identity stability,
grounded-object accuracy and relation fidelity -- builds template-based prompt
corpora, and runs human-alignment / inter-metric correlation analyses.
"""

__version__ = "0.1.0"

SCHEMA_VERSION = 1
