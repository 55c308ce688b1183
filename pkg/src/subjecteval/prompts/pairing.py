"""Random subject-prompt pairing that exactly partitions the prompt set."""

from __future__ import annotations

import numpy as np

from ..errors import DataError


def pair_subjects_prompts(subject_ids, prompt_ids, per_subject: int,
                          seed: int = 0) -> dict[str, list[str]]:
    """Assign each subject ``per_subject`` prompts, using every prompt once.

    Requires len(subjects) * per_subject == len(prompts). The assignment is
    a seeded shuffle followed by chunking, so it is uniform over prompts and
    deterministic under the seed.
    """
    subject_ids = list(subject_ids)
    prompt_ids = list(prompt_ids)
    if len(set(subject_ids)) != len(subject_ids):
        raise DataError("subject ids contain duplicates")
    if len(set(prompt_ids)) != len(prompt_ids):
        raise DataError("prompt ids contain duplicates")
    if per_subject <= 0:
        raise DataError(f"per_subject must be positive, got {per_subject}")
    expected = len(subject_ids) * per_subject
    if expected != len(prompt_ids):
        raise DataError(
            f"{len(subject_ids)} subjects x {per_subject} prompts each needs "
            f"{expected} prompts, got {len(prompt_ids)}"
        )
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(prompt_ids))
    shuffled = [prompt_ids[i] for i in order]
    return {
        subject: shuffled[i * per_subject:(i + 1) * per_subject]
        for i, subject in enumerate(subject_ids)
    }
