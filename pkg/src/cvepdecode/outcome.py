"""Decoding outcome shared by the CCA and UMM classifiers."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray


@dataclass(frozen=True)
class DecodeOutcome:
    """label: winning hypothesis index (0-based, ties to the lowest index);
    scores: one score per hypothesis; confidence: normalized top-2 margin
    in [0, 1]."""

    label: int
    scores: NDArray[np.floating]
    confidence: float


def top2_confidence(scores: NDArray, floor: float = 1e-12) -> float:
    """(s1 - s2) / s1 over the two best scores, clipped to [0, 1];
    zero when the best score is not positive."""
    s = np.sort(np.asarray(scores, dtype=float))[::-1]
    if len(s) < 2:
        return 1.0
    if s[0] <= 0:
        return 0.0
    return float(np.clip((s[0] - s[1]) / max(s[0], floor), 0.0, 1.0))
