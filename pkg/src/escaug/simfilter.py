"""Sample-wise similarity scoring and screening of generated clips.

The score for two clips is sum((a-b)^2 / max(|a*b|, guard)) after
zero-padding the shorter one.  Generated clips are scored against every
reference and keep the minimum.  The shipped decision rule is literal:
a clip is rejected when its score falls below the threshold (verbatim
copies score 0 and are always rejected); ``reject_above`` flips the
comparison for screening out the most dissimilar clips instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_GUARD = 1e-4
DEFAULT_THRESHOLD = 0.1


def similarity(a: np.ndarray, b: np.ndarray, guard: float = DEFAULT_GUARD) -> float:
    """Symmetric divergence; 0 iff the clips are identical."""
    if guard <= 0:
        raise ValueError("guard must be positive")
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    n = max(a.size, b.size)
    if a.size < n:
        a = np.pad(a, (0, n - a.size))
    if b.size < n:
        b = np.pad(b, (0, n - b.size))
    d = a - b
    return float((d * d / np.maximum(np.abs(a * b), guard)).sum())


@dataclass
class FilterDecision:
    clip_id: str
    best_reference: str
    score: float
    accepted: bool


def filter_generated(generated: list[tuple[str, np.ndarray]],
                     references: list[tuple[str, np.ndarray]],
                     threshold: float = DEFAULT_THRESHOLD,
                     guard: float = DEFAULT_GUARD,
                     reject_above: bool = False) -> list[FilterDecision]:
    """Score each generated clip against all references (min aggregation)
    and mark it accepted or rejected."""
    if not references:
        raise ValueError("at least one reference clip is required")
    out = []
    for clip_id, g in generated:
        best_score = np.inf
        best_ref = references[0][0]
        for ref_id, r in references:
            s = similarity(g, r, guard)
            if s < best_score:
                best_score, best_ref = s, ref_id
        rejected = best_score > threshold if reject_above else best_score < threshold
        out.append(FilterDecision(clip_id, best_ref, best_score, not rejected))
    return out
