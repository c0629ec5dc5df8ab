"""Ranked-retrieval metrics.

Average precision over a 0/1 relevance list (precision-at-cutoff summed at
the relevant ranks, divided by the number of relevant items), its mean
over queries, IoU+label relevance judgment with one-claim ground-truth
matching, query-set construction, per-page proposal recall, and the
transcription-only AP variant for pages with unaligned transcriptions.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .embeddings import normalize_label
from .geometry import Box, iou

__all__ = [
    "RelevanceJudgment",
    "average_precision",
    "mean_average_precision",
    "judge_results",
    "build_query_sets",
    "proposal_recall",
    "tokenize_transcription",
    "transcription_ap",
]


@dataclass(frozen=True)
class RelevanceJudgment:
    """A retrieved region is relevant when it overlaps an unclaimed
    ground-truth box of the queried label at IoU >= overlap_threshold."""

    overlap_threshold: float = 0.5

    def __post_init__(self):
        if not 0 < self.overlap_threshold <= 1:
            raise ValueError("overlap threshold must be in (0, 1]")


def average_precision(ranked_relevance: Sequence[int], total_relevant: int) -> float:
    """AP of a ranked 0/1 relevance list given the total number of relevant
    items; 0 by convention when nothing is relevant."""
    if total_relevant < 0:
        raise ValueError("total_relevant must be >= 0")
    if total_relevant == 0:
        return 0.0
    rel = np.asarray(ranked_relevance, dtype=np.float64)
    if rel.size == 0:
        return 0.0
    precision_at = np.cumsum(rel) / np.arange(1, rel.size + 1)
    return float((precision_at * rel).sum() / total_relevant)


def mean_average_precision(aps: Sequence[float]) -> float:
    if len(aps) == 0:
        raise ValueError("MAP of an empty query set")
    return float(np.mean(aps))


def _page_and_box(item) -> tuple[str, Box]:
    if hasattr(item, "page_id") and hasattr(item, "box"):
        return item.page_id, item.box
    page_id, box = item[0], item[1]
    return page_id, box


def judge_results(
    results: Iterable,
    gt_by_page: Mapping[str, Sequence],
    query_label: str,
    overlap_threshold: float,
) -> list[int]:
    """Turn ranked results into a 0/1 relevance list.

    Each ground-truth box can be claimed once: the first result (in rank
    order) that overlaps it at IoU >= threshold with a matching label takes
    the credit; later hits on the same box are irrelevant. Results accept
    (page_id, box, ...) tuples or objects with those attributes, ground
    truth (box, label) tuples or GtWord-like objects.
    """
    judgment = RelevanceJudgment(overlap_threshold)
    claimed: dict[str, set[int]] = {}
    relevance = []
    for item in results:
        page_id, box = _page_and_box(item)
        entries = gt_by_page.get(page_id, ())
        taken = claimed.setdefault(page_id, set())
        best, best_iou = None, 0.0
        for g, entry in enumerate(entries):
            if g in taken:
                continue
            gbox, glabel = (entry.box, entry.label) if hasattr(entry, "box") else (entry[0], entry[1])
            if glabel != query_label:
                continue
            ov = iou(box, gbox)
            if ov >= judgment.overlap_threshold and ov > best_iou:
                best, best_iou = g, ov
        if best is None:
            relevance.append(0)
        else:
            taken.add(best)
            relevance.append(1)
    return relevance


def build_query_sets(pages: Iterable) -> tuple[list, list[str]]:
    """Query-by-example set (every ground-truth word instance, as
    (page_id, box, label) triples) and query-by-string set (sorted unique
    normalized labels)."""
    qbe = []
    labels = set()
    for page in pages:
        for gw in page.words:
            label = normalize_label(gw.label)
            if not label:
                continue
            qbe.append((page.page_id, gw.box, label))
            labels.add(label)
    return qbe, sorted(labels)


def proposal_recall(
    proposals_per_page: Mapping[str, Sequence[Box]],
    gt_by_page: Mapping[str, Sequence],
    overlap_threshold: float,
) -> float:
    """Fraction of ground-truth boxes covered by at least one proposal at
    the IoU threshold, computed per page and averaged over pages (pages
    without ground truth are skipped)."""
    per_page = []
    for page_id, entries in gt_by_page.items():
        boxes = [(e.box if hasattr(e, "box") else e[0]) for e in entries]
        if not boxes:
            continue
        props = proposals_per_page.get(page_id, ())
        covered = sum(
            1 for g in boxes if any(iou(p, g) >= overlap_threshold for p in props)
        )
        per_page.append(covered / len(boxes))
    if not per_page:
        return 0.0
    return float(np.mean(per_page))


def tokenize_transcription(text_or_tokens) -> list[str]:
    """Whitespace-split (if given raw text) and normalize each token,
    dropping tokens that normalize to nothing."""
    tokens = text_or_tokens.split() if isinstance(text_or_tokens, str) else text_or_tokens
    out = []
    for t in tokens:
        n = normalize_label(t)
        if n:
            out.append(n)
    return out


def transcription_ap(
    results: Iterable,
    transcriptions: Mapping[str, Sequence[str]],
    query: str,
) -> float:
    """AP against unaligned page transcriptions with per-page budgets.

    A page's budget is how often the query occurs in its transcription.
    Results from pages containing the query are relevant while the budget
    lasts; once a page's budget is exhausted its further results are
    dropped from the ranking entirely (duplicates neither score nor cost
    precision). Results from pages not containing the query count as
    irrelevant. Total relevant = summed budgets.
    """
    query = normalize_label(query)
    budgets = {
        page: Counter(tokenize_transcription(tokens))[query]
        for page, tokens in transcriptions.items()
    }
    total_relevant = sum(budgets.values())
    if total_relevant == 0:
        return 0.0
    remaining = dict(budgets)
    relevance = []
    for item in results:
        page_id, _ = _page_and_box(item)
        if budgets.get(page_id, 0) > 0:
            if remaining[page_id] > 0:
                remaining[page_id] -= 1
                relevance.append(1)
            # budget exhausted: skip, the hit is an uncounted duplicate
        else:
            relevance.append(0)
    return average_precision(relevance, total_relevant)
