"""Pure metric computations used by the measurement harness.

WER normalization is pinned for bit-exact tests: case-fold, strip leading
and trailing punctuation from each token, split on whitespace. The named
transcription benchmarks publish thresholds without a normalization
standard, so this choice is documented policy rather than derived.
"""

from __future__ import annotations

import string
from statistics import fmean

_PUNCT = string.punctuation


def normalize_tokens(text: str) -> list[str]:
    """Case-folded, punctuation-stripped word tokens."""
    tokens = []
    for raw in text.split():
        token = raw.strip(_PUNCT).casefold()
        if token:
            tokens.append(token)
    return tokens


def _as_tokens(value) -> list[str]:
    if isinstance(value, str):
        return normalize_tokens(value)
    return list(value)


def edit_distance(reference: list[str], hypothesis: list[str]) -> int:
    """Minimum substitutions + insertions + deletions aligning the sequences."""
    n, m = len(reference), len(hypothesis)
    previous = list(range(m + 1))
    for i in range(1, n + 1):
        current = [i] + [0] * m
        ref_token = reference[i - 1]
        for j in range(1, m + 1):
            sub = previous[j - 1] + (ref_token != hypothesis[j - 1])
            current[j] = min(previous[j] + 1, current[j - 1] + 1, sub)
        previous = current
    return previous[m]


def wer(reference, hypothesis) -> float:
    """Word error rate: (S + I + D) / |reference| over an optimal alignment.

    Accepts raw strings (normalized per module policy) or pre-tokenized
    sequences. The reference must be non-empty; an empty hypothesis scores
    1.0 (all deletions). Can exceed 1.0 when the hypothesis is much longer.
    """
    ref = _as_tokens(reference)
    hyp = _as_tokens(hypothesis)
    if not ref:
        raise ValueError("reference must be non-empty")
    return edit_distance(ref, hyp) / len(ref)


def stroop_effect(congruent_ms: list[float], incongruent_ms: list[float]) -> float:
    """Mean incongruent-trial latency minus mean congruent-trial latency."""
    if not congruent_ms or not incongruent_ms:
        raise ValueError("both trial lists must be non-empty")
    return fmean(incongruent_ms) - fmean(congruent_ms)


def hallucination_rate(gradings: list[str]) -> float:
    """Fraction of items graded "hallucinated".

    Each grading is one of correct / abstained / hallucinated. Abstentions
    count in the denominator but never in the numerator.
    """
    if not gradings:
        raise ValueError("no graded items")
    allowed = {"correct", "abstained", "hallucinated"}
    for grading in gradings:
        if grading not in allowed:
            raise ValueError(f"unknown grading {grading!r}")
    return sum(1 for g in gradings if g == "hallucinated") / len(gradings)


def matthews_correlation(pairs: list[tuple[bool, bool]]) -> float:
    """MCC over (expected, predicted) binary label pairs; 0.0 when degenerate."""
    if not pairs:
        raise ValueError("no label pairs")
    tp = sum(1 for e, p in pairs if e and p)
    tn = sum(1 for e, p in pairs if not e and not p)
    fp = sum(1 for e, p in pairs if not e and p)
    fn = sum(1 for e, p in pairs if e and not p)
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if denom == 0:
        return 0.0
    return (tp * tn - fp * fn) / denom ** 0.5


def exact_match(expected: str, response: str, accept: tuple[str, ...] = ()) -> bool:
    """Answer-key comparison on normalized tokens."""
    got = normalize_tokens(response)
    for candidate in (expected, *accept):
        if normalize_tokens(candidate) == got:
            return True
    return False
