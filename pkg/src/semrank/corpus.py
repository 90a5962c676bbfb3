"""Corpus ingestion, tokenization, and collection statistics.

Documents carry two text fields (title, abstract). ``build_index`` turns a
document stream into an immutable :class:`CorpusIndex` holding per-field
term frequencies, document frequencies, field lengths, and the inverse
document frequency every scorer reads. The index round-trips through a
canonical JSON file bit-exactly.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field

from .stopwords import ENGLISH_STOPWORDS

FIELDS = ("title", "abstract")
FIELD_CHOICES = ("title", "abstract", "both")

_WORD_RE_LOWER = re.compile(r"[a-z0-9]+")
_WORD_RE_ANY = re.compile(r"[A-Za-z0-9]+")


@dataclass(frozen=True)
class Document:
    """A ranked unit of text: an id plus title and abstract fields.

    ``doc_id`` must be non-empty; at least one of the two text fields must
    be non-empty.
    """

    doc_id: str
    title: str = ""
    abstract: str = ""

    def __post_init__(self):
        if not self.doc_id:
            raise ValueError("document id must be non-empty")
        if not self.title and not self.abstract:
            raise ValueError(f"document {self.doc_id!r}: title and abstract both empty")

    def field_text(self, which: str) -> str:
        if which == "title":
            return self.title
        if which == "abstract":
            return self.abstract
        if which == "both":
            return f"{self.title} {self.abstract}"
        raise ValueError(f"unknown field {which!r}")


@dataclass(frozen=True)
class TokenConfig:
    """Tokenization settings, applied identically to queries and documents."""

    lowercase: bool = True
    stopwords: frozenset = ENGLISH_STOPWORDS
    min_token_length: int = 1

    def __post_init__(self):
        if self.min_token_length < 1:
            raise ValueError("min_token_length must be >= 1")
        object.__setattr__(self, "stopwords", frozenset(self.stopwords))


def tokenize(text: str, cfg: TokenConfig = TokenConfig()) -> list[str]:
    """Split text into tokens: alphanumeric runs, optionally lowercased,
    with stopwords and too-short tokens removed. Deterministic; empty
    input yields an empty list.
    """
    if cfg.lowercase:
        words = _WORD_RE_LOWER.findall(text.lower())
    else:
        words = _WORD_RE_ANY.findall(text)
    stop = cfg.stopwords
    n = cfg.min_token_length
    return [w for w in words if len(w) >= n and w not in stop]


@dataclass(frozen=True)
class TermWeights:
    """Per-term weights of a query or document.

    ``scheme`` is "uniform" (term frequency normalized to sum 1) or "idf"
    (the uniform weight multiplied by collection idf).
    """

    weights: dict = field(default_factory=dict)
    scheme: str = "uniform"

    def __getitem__(self, term: str) -> float:
        return self.weights[term]

    def __len__(self) -> int:
        return len(self.weights)

    def items(self):
        return self.weights.items()

    def total(self) -> float:
        return sum(self.weights.values())


class CorpusIndex:
    """Immutable collection statistics over a document set.

    Exposes document counts, per-field and combined document frequencies,
    per-document term frequencies and field lengths, average field
    lengths, and idf. Built once by :func:`build_index`; safe to share
    across concurrent readers.
    """

    def __init__(self, config: TokenConfig, doc_lengths: dict, postings: dict):
        # doc_lengths: doc_id -> (title_len, abstract_len)
        # postings: term -> {doc_id: (title_tf, abstract_tf)}
        self._config = config
        self._doc_lengths = doc_lengths
        self._postings = postings
        self._num_docs = len(doc_lengths)

        df_title = Counter()
        df_abstract = Counter()
        df_both = Counter()
        for term, docs in postings.items():
            for tf_t, tf_a in docs.values():
                if tf_t:
                    df_title[term] += 1
                if tf_a:
                    df_abstract[term] += 1
            df_both[term] = len(docs)
        self._df = {"title": df_title, "abstract": df_abstract, "both": df_both}

        n = self._num_docs
        total_t = sum(lt for lt, _ in doc_lengths.values())
        total_a = sum(la for _, la in doc_lengths.values())
        self._avg_len = {
            "title": total_t / n if n else 0.0,
            "abstract": total_a / n if n else 0.0,
            "both": (total_t + total_a) / n if n else 0.0,
        }
        self._doc_ids = sorted(doc_lengths)
        self._forward = None

    @property
    def config(self) -> TokenConfig:
        return self._config

    @property
    def num_docs(self) -> int:
        return self._num_docs

    def doc_ids(self) -> list[str]:
        return list(self._doc_ids)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._doc_lengths

    def terms(self):
        return self._postings.keys()

    def postings(self, term: str) -> dict:
        """term -> {doc_id: (title_tf, abstract_tf)}; empty for unseen terms."""
        return self._postings.get(term, {})

    def document_frequency(self, term: str, field: str = "both") -> int:
        _check_field(field)
        return self._df[field].get(term, 0)

    def doc_length(self, doc_id: str, field: str = "both") -> int:
        lt, la = self._doc_lengths[doc_id]
        if field == "title":
            return lt
        if field == "abstract":
            return la
        _check_field(field)
        return lt + la

    def avg_doc_length(self, field: str = "both") -> float:
        _check_field(field)
        return self._avg_len[field]

    def term_frequency(self, term: str, doc_id: str, field: str = "both") -> int:
        tfs = self._postings.get(term, {}).get(doc_id)
        if tfs is None:
            return 0
        if field == "title":
            return tfs[0]
        if field == "abstract":
            return tfs[1]
        _check_field(field)
        return tfs[0] + tfs[1]

    def idf(self, term: str, field: str = "both", clamp_negative: bool = False) -> float:
        """Inverse document frequency: ln((K - k + 0.5) / (k + 0.5)).

        K is the collection size and k the document frequency; unseen
        terms get k = 0. Negative values (terms in more than about half
        the collection) are kept by default; ``clamp_negative`` floors
        the result at 0.
        """
        if self._num_docs < 1:
            raise ValueError("idf undefined: index holds no documents")
        k = self.document_frequency(term, field)
        value = math.log((self._num_docs - k + 0.5) / (k + 0.5))
        if clamp_negative and value < 0.0:
            return 0.0
        return value

    def doc_terms(self, doc_id: str, field: str = "both") -> dict:
        """Term -> tf for one document field ("both" sums the fields)."""
        entry = self._forward_map()[doc_id]
        if field == "title":
            return {t: tf_t for t, (tf_t, _) in entry.items() if tf_t}
        if field == "abstract":
            return {t: tf_a for t, (_, tf_a) in entry.items() if tf_a}
        _check_field(field)
        return {t: tf_t + tf_a for t, (tf_t, tf_a) in entry.items()}

    def _forward_map(self) -> dict:
        # Built lazily from postings; read-only once created.
        if self._forward is None:
            forward = {doc_id: {} for doc_id in self._doc_ids}
            for term in sorted(self._postings):
                for doc_id, tfs in self._postings[term].items():
                    forward[doc_id][term] = tfs
            self._forward = forward
        return self._forward


def _check_field(field: str):
    if field not in FIELD_CHOICES:
        raise ValueError(f"unknown field {field!r}; expected one of {FIELD_CHOICES}")


def build_index(docs, cfg: TokenConfig = TokenConfig()) -> CorpusIndex:
    """Build a :class:`CorpusIndex` in one pass over a document stream.

    Raises ``ValueError`` naming the offending id when a doc_id repeats.
    """
    doc_lengths = {}
    postings = {}
    for doc in docs:
        if doc.doc_id in doc_lengths:
            raise ValueError(f"duplicate document id {doc.doc_id!r}")
        title_tokens = tokenize(doc.title, cfg)
        abstract_tokens = tokenize(doc.abstract, cfg)
        doc_lengths[doc.doc_id] = (len(title_tokens), len(abstract_tokens))
        counts_t = Counter(title_tokens)
        counts_a = Counter(abstract_tokens)
        for term in counts_t.keys() | counts_a.keys():
            postings.setdefault(term, {})[doc.doc_id] = (
                counts_t.get(term, 0),
                counts_a.get(term, 0),
            )
    return CorpusIndex(cfg, doc_lengths, postings)


def term_weights(tokens: list[str], index: CorpusIndex, scheme: str = "uniform",
                 idf_field: str = "both") -> TermWeights:
    """Weight the unique terms of a token list.

    "uniform" gives tf normalized by total token count (weights sum to 1);
    "idf" multiplies each uniform weight by the collection idf of the term.
    """
    if not tokens:
        raise ValueError("empty text after preprocessing")
    if scheme not in ("uniform", "idf"):
        raise ValueError(f"unknown weighting scheme {scheme!r}")
    counts = Counter(tokens)
    total = len(tokens)
    if scheme == "uniform":
        weights = {t: tf / total for t, tf in counts.items()}
    else:
        weights = {t: index.idf(t, idf_field) * tf / total for t, tf in counts.items()}
    return TermWeights(weights, scheme)


# ---------------------------------------------------------------------------
# Corpus and index files
# ---------------------------------------------------------------------------

def read_documents(path):
    """Yield Documents from a JSON-lines file with "id", "title", "abstract"."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if "id" not in record:
                raise ValueError(f"{path}:{lineno}: missing 'id' field")
            yield Document(
                doc_id=str(record["id"]),
                title=record.get("title", "") or "",
                abstract=record.get("abstract", "") or "",
            )


def save_index(index: CorpusIndex, path) -> None:
    """Write the index as canonical JSON (sorted keys, fixed separators).

    The encoding is canonical so save -> load -> save reproduces the file
    bytes exactly.
    """
    payload = {
        "format": "semrank-index",
        "version": 1,
        "config": {
            "lowercase": index.config.lowercase,
            "min_token_length": index.config.min_token_length,
            "stopwords": sorted(index.config.stopwords),
        },
        "doc_lengths": {d: list(v) for d, v in index._doc_lengths.items()},
        "postings": {
            t: {d: list(v) for d, v in docs.items()}
            for t, docs in index._postings.items()
        },
    }
    data = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(data)
        fh.write("\n")


def load_index(path) -> CorpusIndex:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != "semrank-index":
        raise ValueError(f"{path}: not a semrank index file")
    cfg = TokenConfig(
        lowercase=payload["config"]["lowercase"],
        stopwords=frozenset(payload["config"]["stopwords"]),
        min_token_length=payload["config"]["min_token_length"],
    )
    doc_lengths = {d: tuple(v) for d, v in payload["doc_lengths"].items()}
    postings = {
        t: {d: tuple(v) for d, v in docs.items()}
        for t, docs in payload["postings"].items()
    }
    return CorpusIndex(cfg, doc_lengths, postings)
