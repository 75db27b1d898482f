"""Retrieval evaluation: MAP@All and hash-lookup curves.

A database item is relevant to a query when their multi-hot label rows
share at least one active label. MAP is the mean over queries of average
precision computed over the full ranked database. The lookup view is
covered by three curves: precision/recall under a Hamming-radius sweep,
and precision/recall at top-N cutoffs (N = 1, then 100, 200, ... up to
5000, clamped to the database size).

Queries with no relevant database item contribute AP = 0 by default (a
warning is emitted); they can be excluded instead. Recall-at-N always
averages over queries with at least one relevant item, so recall is well
defined and reaches 1 at the database-size cutoff.
"""

import json
import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, LabelError
from .fileio import write_atomic
from .retrieval import BinaryCodebook, RankedList, rank_all

TOP_N_LIMIT = 5000
TOP_N_STEP = 100


@dataclass
class DirectionReport:
    """Scores and curves for one retrieval direction."""

    direction: str
    map_score: float
    pr_curve: list[tuple[float, float]]
    p_at_n: list[tuple[int, float]]
    r_at_n: list[tuple[int, float]]
    num_queries: int
    num_zero_relevant: int


@dataclass
class EvalReport:
    """Cross-modal evaluation: both directions plus a config echo."""

    map_i2t: float
    map_t2i: float
    i2t: DirectionReport
    t2i: DirectionReport
    config: dict = field(default_factory=dict)


def relevant(q_labels: np.ndarray, d_labels: np.ndarray) -> bool:
    """True iff the two multi-hot rows share an active label."""
    q_labels = np.asarray(q_labels)
    d_labels = np.asarray(d_labels)
    if q_labels.shape != d_labels.shape:
        raise LabelError(
            f"label dimension mismatch: {q_labels.shape} vs {d_labels.shape}"
        )
    return bool(np.any((q_labels > 0) & (d_labels > 0)))


def average_precision(ranking: RankedList, relevance: np.ndarray) -> float:
    """AP over a full ranking; ``relevance`` is indexed by sample id.

    AP = (1/R) * sum over relevant ranks k of (relevant in top k) / k.
    A query with no relevant items scores 0 and triggers a warning.
    """
    relevance = np.asarray(relevance, dtype=bool)
    rel_seq = relevance[ranking.ids]
    total = int(rel_seq.sum())
    if total == 0:
        warnings.warn("query has no relevant database items; AP set to 0")
        return 0.0
    ranks = np.arange(1, rel_seq.size + 1)
    precision_at = np.cumsum(rel_seq) / ranks
    return float(precision_at[rel_seq].sum() / total)


def _top_n_grid(db_size: int) -> list[int]:
    grid = [1] + list(range(TOP_N_STEP, TOP_N_LIMIT + 1, TOP_N_STEP))
    clamped = sorted({min(n, db_size) for n in grid})
    return clamped


def evaluate(
    query_codes: BinaryCodebook,
    db_codes: BinaryCodebook,
    query_labels: np.ndarray,
    db_labels: np.ndarray,
    direction: str = "i2t",
    include_zero_relevant: bool = True,
) -> DirectionReport:
    """Rank every query against the database and score the retrieval.

    The ranking reuses the retrieval engine (deterministic tie-break by
    ascending id); relevance is the shared-label rule. Returns MAP plus
    the three lookup curves.
    """
    if query_codes.bits != db_codes.bits:
        raise ConfigError(
            f"code length mismatch: {query_codes.bits} vs {db_codes.bits}",
            module="evaluation",
        )
    query_labels = np.asarray(query_labels)
    db_labels = np.asarray(db_labels)
    if query_labels.ndim != 2 or db_labels.ndim != 2:
        raise LabelError("labels must be 2-d multi-hot matrices")
    if query_labels.shape[1] != db_labels.shape[1]:
        raise LabelError(
            f"label dimension mismatch: {query_labels.shape[1]} vs {db_labels.shape[1]}"
        )
    n_q = query_codes.num_samples
    n_db = db_codes.num_samples
    if n_q == 0:
        raise ConfigError("query set is empty", module="evaluation")
    if query_labels.shape[0] != n_q or db_labels.shape[0] != n_db:
        raise LabelError("label rows must match the codebook sizes")

    rows, dists = rank_all(query_codes.codes, db_codes)

    # Relevance aligned to database rows, then to ranked order.
    rel = (query_labels.astype(np.int64) @ db_labels.astype(np.int64).T) > 0
    rel_ranked = np.take_along_axis(rel, rows.astype(np.intp), axis=1)

    totals = rel_ranked.sum(axis=1)
    zero_mask = totals == 0
    num_zero = int(zero_mask.sum())
    if num_zero:
        warnings.warn(
            f"{num_zero} of {n_q} queries have no relevant database items; "
            + ("counted with AP=0" if include_zero_relevant else "excluded from MAP")
        )

    ranks = np.arange(1, n_db + 1, dtype=np.float64)
    cum = np.cumsum(rel_ranked, axis=1)
    precision_at = cum / ranks
    ap_sums = (precision_at * rel_ranked).sum(axis=1)
    safe_totals = np.where(zero_mask, 1, totals)
    ap = np.where(zero_mask, 0.0, ap_sums / safe_totals)
    if include_zero_relevant or not zero_mask.any():
        map_score = float(ap.mean())
    else:
        kept = ap[~zero_mask]
        map_score = float(kept.mean()) if kept.size else 0.0

    # Precision/recall at top-N cutoffs.
    grid = _top_n_grid(n_db)
    p_at_n = [(n, float((cum[:, n - 1] / n).mean())) for n in grid]
    has_rel = ~zero_mask
    r_at_n = [
        (n, float((cum[has_rel, n - 1] / totals[has_rel]).mean()) if has_rel.any() else 0.0)
        for n in grid
    ]

    # Hamming-radius sweep, pooled over queries (radius 0..bits). The
    # distance matrix is row-aligned, so it pairs with the row-aligned
    # relevance mask.
    k = query_codes.bits
    retrieved_hist = np.bincount(dists.ravel(), minlength=k + 1)[: k + 1]
    rel_hist = np.bincount(dists[rel].ravel(), minlength=k + 1)[: k + 1]
    retrieved_cum = np.cumsum(retrieved_hist)
    rel_cum = np.cumsum(rel_hist)
    total_rel = int(totals.sum())
    pr_curve = []
    for r in range(k + 1):
        if retrieved_cum[r] == 0:
            continue
        precision = float(rel_cum[r] / retrieved_cum[r])
        recall = float(rel_cum[r] / total_rel) if total_rel else 0.0
        pr_curve.append((recall, precision))

    return DirectionReport(
        direction=direction,
        map_score=map_score,
        pr_curve=pr_curve,
        p_at_n=p_at_n,
        r_at_n=r_at_n,
        num_queries=n_q,
        num_zero_relevant=num_zero,
    )


def evaluate_pair(
    query_image: BinaryCodebook,
    query_text: BinaryCodebook,
    db_image: BinaryCodebook,
    db_text: BinaryCodebook,
    query_labels: np.ndarray,
    db_labels: np.ndarray,
    config: dict | None = None,
    include_zero_relevant: bool = True,
) -> EvalReport:
    """Evaluate both cross-modal directions and assemble the full report.

    Image-to-text ranks image query codes against the text database;
    text-to-image ranks text query codes against the image database.
    """
    i2t = evaluate(
        query_image, db_text, query_labels, db_labels, "i2t", include_zero_relevant
    )
    t2i = evaluate(
        query_text, db_image, query_labels, db_labels, "t2i", include_zero_relevant
    )
    return EvalReport(
        map_i2t=i2t.map_score,
        map_t2i=t2i.map_score,
        i2t=i2t,
        t2i=t2i,
        config=dict(config or {}),
    )


def report_json(report: EvalReport) -> str:
    """Deterministic JSON rendering of the scores (curves live in CSVs)."""
    payload = {
        "map_i2t": report.map_i2t,
        "map_t2i": report.map_t2i,
        "num_queries": report.i2t.num_queries,
        "zero_relevant_queries": {
            "i2t": report.i2t.num_zero_relevant,
            "t2i": report.t2i.num_zero_relevant,
        },
        "config": report.config,
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def write_report(report: EvalReport, directory, bits: int) -> list[str]:
    """Write the JSON report plus three curve CSVs per direction.

    Returns the list of written paths.
    """
    paths = []
    json_path = os.path.join(directory, f"eval_{bits}bits.json")
    write_atomic(json_path, report_json(report).encode("utf-8"))
    paths.append(json_path)
    for direction_report in (report.i2t, report.t2i):
        tag = direction_report.direction
        curves = (
            (f"pr_curve_{bits}bits_{tag}.csv", "recall,precision", direction_report.pr_curve),
            (f"precision_top_n_{bits}bits_{tag}.csv", "n,precision", direction_report.p_at_n),
            (f"recall_top_n_{bits}bits_{tag}.csv", "n,recall", direction_report.r_at_n),
        )
        for name, header, rows in curves:
            path = os.path.join(directory, name)
            lines = [header] + [f"{a!r},{b!r}" for a, b in rows]
            write_atomic(path, ("\n".join(lines) + "\n").encode("utf-8"))
            paths.append(path)
    return paths
