"""Retrieval grounding: chunked ingestion, BM25 scoring, bounded context fusion.

Tokenization is plain whitespace splitting; term matching is case-insensitive.
The curated corpus is visible to every scope; uploaded documents are visible
only within the support scope they were ingested under.
"""

from __future__ import annotations

import math
import threading
from collections import Counter
from dataclasses import dataclass
from enum import Enum

BM25_K1 = 1.2
BM25_B = 0.75

CHUNK_SIZE = 512
CHUNK_OVERLAP = 64
MIN_FINAL_CHUNK = 32


class SourceKind(str, Enum):
    CURATED = "Curated"
    USER_UPLOADED = "UserUploaded"


@dataclass(frozen=True)
class DocumentChunk:
    chunk_id: str
    doc_id: str
    source_kind: SourceKind
    ordinal: int
    text: str
    token_count: int
    term_frequencies: dict[str, int]


@dataclass(frozen=True)
class RetrievalResult:
    chunk_id: str
    score: float
    rank: int


class EmptyDocument(Exception):
    pass


def tokenize(text: str) -> list[str]:
    return text.split()


def chunk_tokens(
    tokens: list[str],
    chunk_size: int = CHUNK_SIZE,
    overlap: int = CHUNK_OVERLAP,
    min_final: int = MIN_FINAL_CHUNK,
) -> list[list[str]]:
    """Split tokens into overlapping windows.

    Windows are chunk_size long with the given overlap (stride = size -
    overlap). A final window shorter than min_final is merged into the
    previous one instead of standing alone; the first window is always kept
    whatever its length.
    """
    if chunk_size <= overlap:
        raise ValueError("chunk_size must exceed overlap")
    stride = chunk_size - overlap
    windows: list[list[str]] = []
    offset = 0
    n = len(tokens)
    while True:
        window = tokens[offset:offset + chunk_size]
        if windows and len(window) < min_final:
            windows[-1] = tokens[offset - stride:]
            break
        windows.append(window)
        if offset + chunk_size >= n:
            break
        offset += stride
    return windows


def _build_chunks(doc_id: str, raw_text: str, source_kind: SourceKind,
                  chunk_size: int, overlap: int, min_final: int) -> list[DocumentChunk]:
    tokens = tokenize(raw_text)
    if not tokens:
        raise EmptyDocument(doc_id)
    chunks = []
    for ordinal, window in enumerate(chunk_tokens(tokens, chunk_size, overlap, min_final)):
        chunks.append(DocumentChunk(
            chunk_id=f"{doc_id}#{ordinal}",
            doc_id=doc_id,
            source_kind=source_kind,
            ordinal=ordinal,
            text=" ".join(window),
            token_count=len(window),
            term_frequencies=dict(Counter(t.lower() for t in window)),
        ))
    return chunks


def bm25_scores(query: str, chunks: list[DocumentChunk],
                k1: float = BM25_K1, b: float = BM25_B) -> list[float]:
    """Score every chunk against the query.

    IDF uses the non-negative form ln(1 + (N - n + 0.5) / (n + 0.5)) so that
    scores never drop below zero. Duplicate query terms count once.
    """
    n_chunks = len(chunks)
    if n_chunks == 0:
        return []
    avgdl = sum(c.token_count for c in chunks) / n_chunks
    terms = sorted(set(t.lower() for t in tokenize(query)))
    doc_freq = {t: sum(1 for c in chunks if t in c.term_frequencies) for t in terms}
    scores = []
    for chunk in chunks:
        score = 0.0
        norm = k1 * (1.0 - b + b * chunk.token_count / avgdl)
        for term in terms:
            tf = chunk.term_frequencies.get(term, 0)
            if tf == 0:
                continue
            idf = math.log(1.0 + (n_chunks - doc_freq[term] + 0.5) / (doc_freq[term] + 0.5))
            score += idf * tf * (k1 + 1.0) / (tf + norm)
        scores.append(score)
    return scores


class RetrievalEngine:
    """In-memory index over the curated corpus plus per-scope uploads.

    Ingestion replaces a document's chunks wholesale (same doc_id never
    duplicates). Reads take a snapshot under the same lock, so a retrieval
    never observes a half-replaced document.
    """

    def __init__(self, chunk_size: int = CHUNK_SIZE, overlap: int = CHUNK_OVERLAP,
                 min_final: int = MIN_FINAL_CHUNK):
        self._chunk_size = chunk_size
        self._overlap = overlap
        self._min_final = min_final
        self._curated: dict[str, list[DocumentChunk]] = {}
        self._uploads: dict[str, dict[str, list[DocumentChunk]]] = {}
        self._by_id: dict[str, DocumentChunk] = {}
        self._lock = threading.Lock()

    def ingest_document(self, doc_id: str, raw_text: str, source_kind: SourceKind,
                        scope: str | None = None) -> list[DocumentChunk]:
        if source_kind is SourceKind.USER_UPLOADED and scope is None:
            raise ValueError("uploaded documents require a support scope")
        if source_kind is SourceKind.CURATED and scope is not None:
            raise ValueError("curated documents are global, not scoped")
        chunks = _build_chunks(doc_id, raw_text, source_kind,
                               self._chunk_size, self._overlap, self._min_final)
        with self._lock:
            if source_kind is SourceKind.CURATED:
                old = self._curated.get(doc_id, [])
                self._curated[doc_id] = chunks
            else:
                bucket = self._uploads.setdefault(scope, {})
                old = bucket.get(doc_id, [])
                bucket[doc_id] = chunks
            for c in old:
                self._by_id.pop(c.chunk_id, None)
            for c in chunks:
                self._by_id[c.chunk_id] = c
        return chunks

    def visible_chunks(self, scope: str | None) -> list[DocumentChunk]:
        with self._lock:
            out: list[DocumentChunk] = []
            for chunks in self._curated.values():
                out.extend(chunks)
            if scope is not None:
                for chunks in self._uploads.get(scope, {}).values():
                    out.extend(chunks)
            return out

    def chunk(self, chunk_id: str) -> DocumentChunk:
        with self._lock:
            return self._by_id[chunk_id]

    def retrieve(self, query: str, k: int, scope: str | None = None) -> list[RetrievalResult]:
        """Rank visible chunks by BM25; ties break by (doc_id, ordinal)."""
        if k < 1:
            raise ValueError("k must be >= 1")
        chunks = self.visible_chunks(scope)
        scores = bm25_scores(query, chunks)
        order = sorted(range(len(chunks)),
                       key=lambda i: (-scores[i], chunks[i].doc_id, chunks[i].ordinal))
        return [
            RetrievalResult(chunk_id=chunks[i].chunk_id, score=scores[i], rank=rank)
            for rank, i in enumerate(order[:k], start=1)
        ]

    def fuse_context(self, query: str, results: list[RetrievalResult],
                     budget_tokens: int) -> str:
        """Concatenate ranked chunks under a token budget.

        Each chunk is preceded by a "[source: doc#ordinal]" citation line; the
        citation's own tokens count against the budget. The first chunk that
        does not fully fit ends the fusion; chunks are never cut mid-way.
        """
        if budget_tokens <= 0:
            raise ValueError("budget_tokens must be > 0")
        parts: list[str] = []
        used = 0
        for res in sorted(results, key=lambda r: r.rank):
            chunk = self.chunk(res.chunk_id)
            citation = f"[source: {chunk.chunk_id}]"
            cost = len(tokenize(citation)) + chunk.token_count
            if used + cost > budget_tokens:
                break
            parts.append(f"{citation}\n{chunk.text}")
            used += cost
        return "\n\n".join(parts)
