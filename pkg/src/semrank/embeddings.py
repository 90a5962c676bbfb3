"""Word embedding tables and the vector operations scorers consume.

Tables load from the two interchange formats word2vec made conventional:
a text format ("<vocab> <dim>" header, then one "<word> <v1> ... <vd>"
line per word) and a binary format (same header line, then per word the
word bytes, a space, and dim little-endian 32-bit floats, optionally
followed by a newline). Rows are unit-normalized once at load so cosine
similarity is a plain dot product everywhere downstream.
"""

from __future__ import annotations

import logging

import numpy as np

logger = logging.getLogger(__name__)


class EmbeddingParseError(ValueError):
    """Malformed embedding stream; carries the byte offset of the problem."""

    def __init__(self, byte_offset: int, message: str):
        super().__init__(f"byte {byte_offset}: {message}")
        self.byte_offset = byte_offset


class OutOfVocabularyError(KeyError):
    """A term has no vector in the table."""

    def __init__(self, term: str):
        super().__init__(term)
        self.term = term

    def __str__(self):
        return f"out-of-vocabulary term {self.term!r}"


class EmbeddingTable:
    """Immutable word -> unit vector lookup.

    Rows are normalized at construction; words whose input vector has zero
    norm are dropped and counted in ``dropped_zero_norm``. A missing term
    raises :class:`OutOfVocabularyError` rather than returning a default.
    """

    def __init__(self, words: list[str], matrix: np.ndarray):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or len(words) != matrix.shape[0]:
            raise ValueError("words and matrix rows must align")
        norms = np.linalg.norm(matrix, axis=1)
        zero_norm = 0
        duplicates = 0
        index = {}
        keep_rows = []
        for i, word in enumerate(words):
            if norms[i] == 0.0:
                zero_norm += 1
                continue
            if word in index:
                duplicates += 1  # first occurrence wins
                continue
            index[word] = len(keep_rows)
            keep_rows.append(i)
        if zero_norm:
            logger.warning("dropping %d zero-norm embedding vectors", zero_norm)
        if duplicates:
            logger.warning("ignoring %d duplicate embedding words", duplicates)
        self.dim = int(matrix.shape[1])
        self.vectors = matrix[keep_rows] / norms[keep_rows, None]
        self.vectors.setflags(write=False)
        self._index = index
        self.dropped_zero_norm = zero_norm
        self.duplicate_words = duplicates

    def __contains__(self, term: str) -> bool:
        return term in self._index

    def __len__(self) -> int:
        return len(self._index)

    def words(self) -> list[str]:
        return list(self._index)

    def row(self, term: str) -> int:
        """Row index of a term; raises OutOfVocabularyError when absent."""
        try:
            return self._index[term]
        except KeyError:
            raise OutOfVocabularyError(term) from None

    def get_row(self, term: str):
        """Row index or None; the distinguishable miss for hot loops."""
        return self._index.get(term)

    def vector(self, term: str) -> np.ndarray:
        return self.vectors[self.row(term)]


def cosine(table: EmbeddingTable, term_a: str, term_b: str) -> float:
    """Cosine similarity of two in-vocabulary terms (dot of unit rows)."""
    return float(np.dot(table.vector(term_a), table.vector(term_b)))


def centroid(table: EmbeddingTable, tokens: list[str], unique: bool = False) -> np.ndarray:
    """Arithmetic mean of the vectors of in-vocabulary tokens.

    Repeated tokens count with multiplicity unless ``unique``;
    out-of-vocabulary tokens are skipped. Not re-normalized.
    """
    if unique:
        tokens = sorted(set(tokens))
    rows = [r for r in (table.get_row(t) for t in tokens) if r is not None]
    if not rows:
        raise ValueError("no embeddable tokens")
    return table.vectors[rows].mean(axis=0)


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------

def load_embeddings(source, format: str = "text") -> EmbeddingTable:
    """Load a table from a path, binary file object, or bytes.

    ``format`` is "text" or "binary". Malformed input raises
    :class:`EmbeddingParseError` naming the byte offset.
    """
    if isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    elif hasattr(source, "read"):
        data = source.read()
    else:
        with open(source, "rb") as fh:
            data = fh.read()
    if format == "text":
        words, matrix = _parse_text(data)
    elif format == "binary":
        words, matrix = _parse_binary(data)
    else:
        raise ValueError(f"unknown embedding format {format!r}")
    return EmbeddingTable(words, matrix)


def _parse_header(data: bytes):
    end = data.find(b"\n")
    if end < 0:
        raise EmbeddingParseError(0, "missing header line")
    parts = data[:end].split()
    if len(parts) != 2:
        raise EmbeddingParseError(0, f"header must be '<vocab> <dim>', got {data[:end]!r}")
    try:
        vocab, dim = int(parts[0]), int(parts[1])
    except ValueError:
        raise EmbeddingParseError(0, f"non-integer header fields {data[:end]!r}") from None
    if vocab < 0 or dim < 1:
        raise EmbeddingParseError(0, f"bad header values vocab={vocab} dim={dim}")
    return vocab, dim, end + 1


def _parse_text(data: bytes):
    vocab, dim, pos = _parse_header(data)
    words = []
    matrix = np.empty((vocab, dim), dtype=np.float64)
    for i in range(vocab):
        if pos >= len(data):
            raise EmbeddingParseError(pos, f"truncated stream: expected {vocab} words, got {i}")
        line_start = pos
        end = data.find(b"\n", pos)
        if end < 0:
            end = len(data)
        parts = data[pos:end].split()
        pos = end + 1
        if len(parts) != dim + 1:
            raise EmbeddingParseError(
                line_start,
                f"word {i}: expected {dim} vector components, got {len(parts) - 1}")
        try:
            word = parts[0].decode("utf-8")
            matrix[i] = [float(p) for p in parts[1:]]
        except (UnicodeDecodeError, ValueError) as exc:
            raise EmbeddingParseError(line_start, f"word {i}: {exc}") from None
        words.append(word)
    if data[pos:].strip():
        raise EmbeddingParseError(pos, f"trailing data after {vocab} words")
    return words, matrix


def _parse_binary(data: bytes):
    vocab, dim, pos = _parse_header(data)
    words = []
    matrix = np.empty((vocab, dim), dtype=np.float64)
    vec_bytes = 4 * dim
    for i in range(vocab):
        # Tolerate a newline between vector blocks (the common convention).
        while pos < len(data) and data[pos : pos + 1] == b"\n":
            pos += 1
        sp = data.find(b" ", pos)
        if sp < 0:
            raise EmbeddingParseError(pos, f"truncated stream: no word terminator for word {i}")
        try:
            word = data[pos:sp].decode("utf-8")
        except UnicodeDecodeError as exc:
            raise EmbeddingParseError(pos, f"word {i}: {exc}") from None
        pos = sp + 1
        if pos + vec_bytes > len(data):
            raise EmbeddingParseError(pos, f"truncated stream: word {i} vector cut short")
        matrix[i] = np.frombuffer(data, dtype="<f4", count=dim, offset=pos)
        pos += vec_bytes
        words.append(word)
    if data[pos:].strip(b"\n"):
        raise EmbeddingParseError(pos, f"trailing data after {vocab} words")
    return words, matrix


# ---------------------------------------------------------------------------
# Writing (fixtures, format conversion)
# ---------------------------------------------------------------------------

def save_embeddings_text(path, words: list[str], matrix: np.ndarray) -> None:
    matrix = np.asarray(matrix)
    with open(path, "wb") as fh:
        fh.write(f"{len(words)} {matrix.shape[1]}\n".encode("utf-8"))
        for word, row in zip(words, matrix):
            line = word + " " + " ".join(repr(float(v)) for v in row) + "\n"
            fh.write(line.encode("utf-8"))


def save_embeddings_binary(path, words: list[str], matrix: np.ndarray) -> None:
    matrix = np.asarray(matrix, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(f"{len(words)} {matrix.shape[1]}\n".encode("utf-8"))
        for word, row in zip(words, matrix):
            fh.write(word.encode("utf-8"))
            fh.write(b" ")
            fh.write(row.tobytes())
            fh.write(b"\n")
