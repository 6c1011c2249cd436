"""Sequence metrics: edit distance, error rates, and the two granularity
measures comparing representation counts with phoneme counts."""

from dataclasses import dataclass

import numpy as np

from . import backend
from .errors import UndefinedRateError


def _to_ids(seq) -> np.ndarray:
    arr = np.asarray(seq)
    if arr.size == 0:
        return np.zeros(0, dtype=np.int64)
    if arr.dtype.kind in "iu":
        return arr.astype(np.int64)
    raise TypeError("edit_distance expects integer id sequences")


def edit_distance(a, b) -> int:
    """Minimal insertions + deletions + substitutions at unit cost."""
    return backend.levenshtein(_to_ids(a), _to_ids(b))


def error_rate(hyp, ref) -> float:
    """Edit distance over reference length; may exceed 1."""
    ref = _to_ids(ref)
    if ref.size == 0:
        raise UndefinedRateError("empty reference")
    return edit_distance(hyp, ref) / ref.size


def corpus_error_rate(pairs) -> float:
    """Micro-average: total edits over total reference length."""
    edits, length = 0, 0
    for hyp, ref in pairs:
        ref = _to_ids(ref)
        edits += edit_distance(hyp, ref)
        length += ref.size
    if length == 0:
        raise UndefinedRateError("no reference symbols")
    return edits / length


@dataclass(frozen=True)
class LengthPair:
    l_spr: int
    l_ipa: int

    def __post_init__(self):
        if self.l_spr < 0 or self.l_ipa < 0:
            raise ValueError("counts must be nonnegative")


def length_difference(pairs) -> float:
    """Mean absolute difference between representation and phoneme counts."""
    pairs = list(pairs)
    if not pairs:
        raise UndefinedRateError("no utterances")
    return sum(abs(p.l_spr - p.l_ipa) for p in pairs) / len(pairs)


def length_mismatch_rate(pairs) -> float:
    """Mean relative count mismatch, in percent."""
    pairs = list(pairs)
    if not pairs:
        raise UndefinedRateError("no utterances")
    total = 0.0
    for p in pairs:
        if p.l_ipa == 0:
            raise UndefinedRateError("zero phoneme count in a pair")
        total += abs(p.l_spr - p.l_ipa) / p.l_ipa
    return 100.0 * total / len(pairs)


@dataclass
class MetricReport:
    metric: str
    per_utterance: list  # [(utt_id, value)]
    aggregate: float

    def csv_rows(self):
        rows = [
            {"utterance_id": utt_id, "metric": self.metric, "value": value}
            for utt_id, value in self.per_utterance
        ]
        rows.append(
            {"utterance_id": "ALL", "metric": self.metric, "value": self.aggregate}
        )
        return rows


def per_report(metric: str, triples) -> MetricReport:
    """Per-utterance error rates plus the micro-averaged aggregate.

    triples: iterable of (utt_id, hyp, ref).
    """
    per_utt = []
    edits, length = 0, 0
    for utt_id, hyp, ref in triples:
        per_utt.append((utt_id, error_rate(hyp, ref)))
        edits += edit_distance(hyp, ref)
        length += _to_ids(ref).size
    if length == 0:
        raise UndefinedRateError("no reference symbols")
    return MetricReport(metric, per_utt, edits / length)


def length_reports(prefix: str, entries) -> tuple[MetricReport, MetricReport]:
    """LD and LMR reports from (utt_id, l_rep, l_ipa) entries."""
    entries = list(entries)
    pairs = [LengthPair(l_rep, l_ipa) for _, l_rep, l_ipa in entries]
    ld = MetricReport(
        f"{prefix}_ld",
        [(utt_id, abs(l_rep - l_ipa)) for utt_id, l_rep, l_ipa in entries],
        length_difference(pairs),
    )
    lmr = MetricReport(
        f"{prefix}_lmr",
        [
            (utt_id, 100.0 * abs(l_rep - l_ipa) / l_ipa)
            for utt_id, l_rep, l_ipa in entries
        ],
        length_mismatch_rate(pairs),
    )
    return ld, lmr
