"""Query-document scorers.

Four production scorers (tf-idf cosine, BM25, embedding-centroid cosine,
and the greedy semantic measure) plus an exact word-movers-distance
transportation oracle used for testing. All scorers are pure functions
over immutable inputs; :class:`SemanticScorer` adds a batched,
deterministically-parallel path over a candidate set.
"""

from __future__ import annotations

import math
import multiprocessing
from collections import Counter
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import linprog

from .corpus import CorpusIndex, Document, TermWeights, TokenConfig, _check_field, tokenize
from .embeddings import EmbeddingTable, centroid


@dataclass(frozen=True)
class Bm25Params:
    """Okapi BM25 saturation (k) and length-normalization (b) parameters."""

    k: float = 1.9
    b: float = 1.0

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError("k must be > 0")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError("b must be in [0, 1]")


class Match(NamedTuple):
    """One query term matched to its most similar document term."""

    query_term: str
    doc_term: str
    similarity: float


@dataclass(frozen=True)
class ScoredDoc:
    """A scored document; ``matches`` explains semantic scores only."""

    doc_id: str
    score: float
    matches: tuple = ()


@dataclass(frozen=True)
class FlowMatrix:
    """Sparse transport plan: (source term, target term) -> flow >= 0."""

    entries: dict

    def row_sums(self) -> dict:
        sums = {}
        for (src, _), flow in self.entries.items():
            sums[src] = sums.get(src, 0.0) + flow
        return sums

    def col_sums(self) -> dict:
        sums = {}
        for (_, dst), flow in self.entries.items():
            sums[dst] = sums.get(dst, 0.0) + flow
        return sums

    def cost(self, cost_fn) -> float:
        return sum(flow * cost_fn(src, dst) for (src, dst), flow in self.entries.items())


def _require_query(query_tokens) -> list[str]:
    tokens = list(query_tokens)
    if not tokens:
        raise ValueError("empty query after preprocessing")
    return tokens


def _doc_counts(doc: Document, index: CorpusIndex, field: str) -> Counter:
    _check_field(field)
    return Counter(tokenize(doc.field_text(field), index.config))


# ---------------------------------------------------------------------------
# Lexical scorers
# ---------------------------------------------------------------------------

def score_tfidf(query_tokens, doc: Document, index: CorpusIndex,
                clamp_negative_idf: bool = False) -> float:
    """Cosine similarity of tf*idf vectors over combined fields.

    Returns 0 when the query and document share no terms (or either
    vector has zero norm).
    """
    tokens = _require_query(query_tokens)
    q_counts = Counter(tokens)
    d_counts = _doc_counts(doc, index, "both")
    if not d_counts:
        return 0.0
    q_vec = {t: tf * index.idf(t, clamp_negative=clamp_negative_idf)
             for t, tf in q_counts.items()}
    d_vec = {t: tf * index.idf(t, clamp_negative=clamp_negative_idf)
             for t, tf in d_counts.items()}
    dot = sum(w * d_vec[t] for t, w in q_vec.items() if t in d_vec)
    if dot == 0.0:
        return 0.0
    q_norm = math.sqrt(sum(w * w for w in q_vec.values()))
    d_norm = math.sqrt(sum(w * w for w in d_vec.values()))
    if q_norm == 0.0 or d_norm == 0.0:
        return 0.0
    return dot / (q_norm * d_norm)


def bm25_term_score(tf: int, doc_len: int, avg_len: float, idf: float,
                    params: Bm25Params) -> float:
    """One term's BM25 contribution; 0 when the term is absent (tf = 0)."""
    if tf == 0:
        return 0.0
    denom = tf + params.k * (1.0 - params.b + params.b * doc_len / avg_len)
    return idf * tf * (params.k + 1.0) / denom


def score_bm25(query_tokens, doc: Document, index: CorpusIndex,
               params: Bm25Params = Bm25Params(), field: str = "both",
               clamp_negative_idf: bool = False) -> float:
    """Okapi BM25 over the selected field(s), idf from the collection.

    Query tokens contribute with multiplicity; terms absent from the
    document contribute 0.
    """
    tokens = _require_query(query_tokens)
    d_counts = _doc_counts(doc, index, field)
    doc_len = sum(d_counts.values())
    avg_len = index.avg_doc_length(field)
    if doc_len == 0 or avg_len == 0.0:
        return 0.0
    score = 0.0
    for t in tokens:
        tf = d_counts.get(t, 0)
        if tf:
            score += bm25_term_score(tf, doc_len, avg_len,
                                     index.idf(t, clamp_negative=clamp_negative_idf),
                                     params)
    return score


def score_centroid(query_tokens, doc: Document, table: EmbeddingTable,
                   field: str = "both", index: CorpusIndex = None) -> float:
    """Cosine between the query centroid and the document-field centroid.

    ``index`` supplies the tokenizer config for the document text (a bare
    default config is used when omitted). Raises when either side has no
    embeddable token.
    """
    from .corpus import TokenConfig

    tokens = _require_query(query_tokens)
    cfg = index.config if index is not None else TokenConfig()
    _check_field(field)
    doc_tokens = tokenize(doc.field_text(field), cfg)
    q_cen = centroid(table, tokens)
    d_cen = centroid(table, doc_tokens)
    q_norm = np.linalg.norm(q_cen)
    d_norm = np.linalg.norm(d_cen)
    if q_norm == 0.0 or d_norm == 0.0:
        return 0.0
    return float(np.dot(q_cen, d_cen) / (q_norm * d_norm))


# ---------------------------------------------------------------------------
# Greedy semantic measure
# ---------------------------------------------------------------------------

def _query_weights(tokens: list[str], index: CorpusIndex, idf_field: str):
    """Idf-weighted normalized term frequencies, in first-appearance order."""
    counts = Counter(tokens)
    total = len(tokens)
    order = list(dict.fromkeys(tokens))
    return order, {t: index.idf(t, idf_field) * counts[t] / total for t in order}


def score_sem(query_tokens, doc: Document, table: EmbeddingTable,
              index: CorpusIndex, field: str = "both",
              idf_field: str = "both") -> ScoredDoc:
    """Greedy one-sided semantic score of a document for a query.

    Each unique query term, weighted by idf times its normalized query
    frequency, matches the document-field term with the highest cosine
    similarity; the score is the weighted sum of those maxima. A query
    term with no vector scores its full weight if it appears verbatim in
    the field and 0 otherwise. Ties pick the lexicographically smallest
    document term. Runs in O(m*n) for m unique query and n unique
    document terms.
    """
    tokens = _require_query(query_tokens)
    order, weights = _query_weights(tokens, index, idf_field)
    d_counts = _doc_counts(doc, index, field)
    if not d_counts:
        return ScoredDoc(doc.doc_id, 0.0, ())

    # Sorted so np.argmax's first-maximum rule breaks ties lexicographically.
    doc_terms = sorted(t for t in d_counts if t in table)
    doc_rows = np.array([table.row(t) for t in doc_terms], dtype=np.intp)

    score = 0.0
    matches = []
    for term in order:
        weight = weights[term]
        q_row = table.get_row(term)
        if q_row is None:
            if term in d_counts:
                score += weight
            continue
        if len(doc_rows) == 0:
            continue
        sims = table.vectors[doc_rows] @ table.vectors[q_row]
        best = int(np.argmax(sims))
        best_sim = float(sims[best])
        score += weight * best_sim
        matches.append(Match(term, doc_terms[best], best_sim))
    return ScoredDoc(doc.doc_id, score, tuple(matches))


def sem_matches(query_tokens, doc_id: str, table: EmbeddingTable,
                index: CorpusIndex, field: str = "both",
                idf_field: str = "both") -> ScoredDoc:
    """score_sem for a document already in the index (no raw text needed)."""
    tokens = _require_query(query_tokens)
    order, weights = _query_weights(tokens, index, idf_field)
    d_counts = index.doc_terms(doc_id, field)
    if not d_counts:
        return ScoredDoc(doc_id, 0.0, ())
    doc_terms = sorted(t for t in d_counts if t in table)
    doc_rows = np.array([table.row(t) for t in doc_terms], dtype=np.intp)
    score = 0.0
    matches = []
    for term in order:
        weight = weights[term]
        q_row = table.get_row(term)
        if q_row is None:
            if term in d_counts:
                score += weight
            continue
        if len(doc_rows) == 0:
            continue
        sims = table.vectors[doc_rows] @ table.vectors[q_row]
        best = int(np.argmax(sims))
        best_sim = float(sims[best])
        score += weight * best_sim
        matches.append(Match(term, doc_terms[best], best_sim))
    return ScoredDoc(doc_id, score, tuple(matches))


# ---------------------------------------------------------------------------
# Batched semantic scoring over a candidate set
# ---------------------------------------------------------------------------

_CHUNK = 1024  # fixed chunk size: results never depend on worker count

_WORKER_SCORER = None


def _init_worker(scorer):
    global _WORKER_SCORER
    _WORKER_SCORER = scorer


def _score_chunk(args):
    query_tokens, start, stop = args
    return _WORKER_SCORER._chunk_scores(query_tokens, start, stop)


class SemanticScorer:
    """Batched greedy semantic scoring of index documents.

    Precomputes, per document, the embedding rows of its unique in-vocab
    field terms (a flat array plus offsets), so scoring a query is one
    matrix product against the vocabulary followed by segmented maxima.
    Document order is fixed at construction; chunked evaluation makes the
    output identical for any worker count.
    """

    def __init__(self, index: CorpusIndex, table: EmbeddingTable,
                 field: str = "both", doc_ids: list[str] = None,
                 idf_field: str = "both"):
        _check_field(field)
        self.index = index
        self.table = table
        self.field = field
        self.idf_field = idf_field
        self.doc_ids = sorted(doc_ids) if doc_ids is not None else index.doc_ids()
        self._positions = {d: i for i, d in enumerate(self.doc_ids)}

        rows_per_doc = []
        for doc_id in self.doc_ids:
            terms = index.doc_terms(doc_id, field)
            rows = sorted(r for r in (table.get_row(t) for t in terms) if r is not None)
            rows_per_doc.append(np.array(rows, dtype=np.intp))
        counts = np.array([len(r) for r in rows_per_doc], dtype=np.intp)
        self._nonempty = np.flatnonzero(counts)
        self._offsets = np.concatenate(([0], np.cumsum(counts[self._nonempty])))
        self._rows_concat = (np.concatenate([rows_per_doc[i] for i in self._nonempty])
                             if len(self._nonempty) else np.empty(0, dtype=np.intp))

    def score(self, query_tokens, workers: int = 1) -> list[ScoredDoc]:
        """Score every candidate; deterministic for any ``workers`` value.

        Workers are separate processes (fork); each evaluates fixed-size
        chunks of the candidate list, so the merged result is byte-for-byte
        identical to the single-process run.
        """
        tokens = _require_query(list(query_tokens))
        n = len(self.doc_ids)
        bounds = [(s, min(s + _CHUNK, n)) for s in range(0, n, _CHUNK)]
        if workers <= 1 or len(bounds) <= 1:
            parts = [self._chunk_scores(tokens, s, e) for s, e in bounds]
        else:
            ctx = multiprocessing.get_context("fork")
            with ctx.Pool(workers, initializer=_init_worker, initargs=(self,)) as pool:
                parts = pool.map(_score_chunk, [(tokens, s, e) for s, e in bounds])
        scores = np.concatenate(parts) if parts else np.empty(0)
        return [ScoredDoc(d, float(s)) for d, s in zip(self.doc_ids, scores)]

    def _chunk_scores(self, tokens: list[str], start: int, stop: int) -> np.ndarray:
        order, weights = _query_weights(tokens, self.index, self.idf_field)
        scores = np.zeros(stop - start, dtype=np.float64)

        in_vocab = [t for t in order if t in self.table]
        if in_vocab:
            q_rows = np.array([self.table.row(t) for t in in_vocab], dtype=np.intp)
            w = np.array([weights[t] for t in in_vocab], dtype=np.float64)
            # Similarity of each query term to the whole vocabulary, then a
            # segmented max over each document's term rows.
            q_sims = self.table.vectors[q_rows] @ self.table.vectors.T
            lo = np.searchsorted(self._nonempty, start)
            hi = np.searchsorted(self._nonempty, stop)
            if hi > lo:
                seg_start = self._offsets[lo]
                seg_end = self._offsets[hi]
                gathered = q_sims[:, self._rows_concat[seg_start:seg_end]]
                cuts = self._offsets[lo:hi] - seg_start
                best = np.maximum.reduceat(gathered, cuts, axis=1)
                scores[self._nonempty[lo:hi] - start] += w @ best

        for term in order:
            if term in self.table:
                continue
            # Out-of-vocabulary: full weight on verbatim field matches.
            weight = weights[term]
            for doc_id, tfs in self.index.postings(term).items():
                tf = tfs[0] + tfs[1] if self.field == "both" else tfs[0 if self.field == "title" else 1]
                if tf:
                    pos = self._positions.get(doc_id)
                    if pos is not None and start <= pos < stop:
                        scores[pos - start] += weight
        return scores


# ---------------------------------------------------------------------------
# Exact word movers distance (test oracle)
# ---------------------------------------------------------------------------

def wmd_exact(weights_a: TermWeights, weights_b: TermWeights,
              table: EmbeddingTable) -> tuple[float, FlowMatrix]:
    """Exact optimum of the balanced transportation problem between two
    uniform-weight term distributions, with Euclidean ground cost between
    embedding vectors.

    Solved as a linear program; intended for small instances (this is a
    test oracle, not a production scorer). The returned flow satisfies
    both marginals to 1e-9.
    """
    if weights_a.scheme != "uniform" or weights_b.scheme != "uniform":
        raise ValueError("wmd_exact requires uniform-scheme weights on both sides")
    if abs(weights_a.total() - weights_b.total()) > 1e-9:
        raise ValueError(
            f"unbalanced weights: {weights_a.total()!r} vs {weights_b.total()!r}")

    terms_a = sorted(weights_a.weights)
    terms_b = sorted(weights_b.weights)
    vecs_a = np.stack([table.vector(t) for t in terms_a])
    vecs_b = np.stack([table.vector(t) for t in terms_b])
    m, n = len(terms_a), len(terms_b)
    cost = np.linalg.norm(vecs_a[:, None, :] - vecs_b[None, :, :], axis=2)

    a = np.array([weights_a[t] for t in terms_a])
    b = np.array([weights_b[t] for t in terms_b])
    # Variables are the flattened m*n flow matrix; one redundant marginal
    # row is dropped to keep the equality system full-rank.
    a_eq = []
    b_eq = []
    for i in range(m):
        row = np.zeros(m * n)
        row[i * n:(i + 1) * n] = 1.0
        a_eq.append(row)
        b_eq.append(a[i])
    for j in range(n - 1):
        col = np.zeros(m * n)
        col[j::n] = 1.0
        a_eq.append(col)
        b_eq.append(b[j])
    res = linprog(cost.ravel(), A_eq=np.array(a_eq), b_eq=np.array(b_eq),
                  bounds=(0, None), method="highs")
    if not res.success:
        raise RuntimeError(f"transportation LP failed: {res.message}")

    flow = res.x.reshape(m, n)
    entries = {
        (terms_a[i], terms_b[j]): float(flow[i, j])
        for i in range(m) for j in range(n) if flow[i, j] != 0.0
    }
    return float(res.fun), FlowMatrix(entries)
