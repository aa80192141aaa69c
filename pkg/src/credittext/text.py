"""Earnings-call text processing: credit-window extraction and the sparse
n-gram document-term matrix.

A call is reduced to its credit-relevant portion (every sentence within a
fixed radius of a sentence containing a credit word), tokens are negation
tagged and stemmed, digit runs are collapsed into magnitude markers, and the
retained sentences are counted into unigrams/bigrams/trigrams.
"""

from __future__ import annotations

import re
import warnings
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, TransformerMixin

from ._porter2 import stem
from .exceptions import ValidationError

__all__ = [
    "WordLists",
    "Transcript",
    "DocumentTermMatrix",
    "split_sentences",
    "normalize_tokens",
    "detect_credit_sentences",
    "extract_credit_window",
    "build_dtm",
    "CreditWindowVectorizer",
]

NEG_SUFFIX = "_NEG"
_SCOPE_PUNCT = ".,;:?!"
_NEG_CUES = ("not", "no", "never")

# sentence break: . ! or ? followed by whitespace or end of text; a period
# followed by a digit is a decimal point and never breaks
_SENT_BREAK = re.compile(r"(?<=[.!?])(?:\s+|$)")
_NUMBER = re.compile(r"\d+(?:\.\d+)?")
_NON_TOKEN_CHAR = re.compile(r"[^a-z0-9.]+")
_CUE_STRIP = re.compile(r"^[^a-z0-9']+|[^a-z0-9']+$")


def _load_phrase_file(name: str) -> tuple[str, ...]:
    text = resources.files("credittext.wordlists").joinpath(name).read_text()
    return tuple(line.strip().lower() for line in text.splitlines() if line.strip())


@dataclass(frozen=True)
class WordLists:
    """Credit words and excluded phrases, matched on stemmed text."""

    credit_words: tuple[str, ...] = field(default_factory=lambda: _load_phrase_file("credit_words.txt"))
    excluded_phrases: tuple[str, ...] = field(default_factory=lambda: _load_phrase_file("excluded_phrases.txt"))

    def __post_init__(self):
        if not self.credit_words or not self.excluded_phrases:
            raise ValidationError("word lists must be non-empty")
        for phrase in (*self.credit_words, *self.excluded_phrases):
            if phrase != phrase.lower():
                raise ValidationError(f"word-list phrases must be lowercase: {phrase!r}")
        object.__setattr__(self, "_credit_stems", tuple(_stem_phrase(p) for p in self.credit_words))
        object.__setattr__(self, "_excluded_stems", tuple(_stem_phrase(p) for p in self.excluded_phrases))

    @classmethod
    def from_files(cls, credit_path, excluded_path) -> "WordLists":
        def read(path):
            with open(path) as fh:
                return tuple(line.strip().lower() for line in fh if line.strip())

        return cls(credit_words=read(credit_path), excluded_phrases=read(excluded_path))

    @property
    def credit_stems(self) -> tuple[tuple[str, ...], ...]:
        return self._credit_stems

    @property
    def excluded_stems(self) -> tuple[tuple[str, ...], ...]:
        return self._excluded_stems


def _stem_phrase(phrase: str) -> tuple[str, ...]:
    return tuple(stem(w) for w in phrase.split())


@dataclass(frozen=True)
class Transcript:
    """One earnings call: identifiers, wall-clock timestamp, raw text."""

    call_id: str
    entity_id: str
    timestamp: str
    text: str
    sector: str = ""


def split_sentences(text: str) -> list[str]:
    """Split on terminator-plus-whitespace; decimal points do not break."""
    if not text or not text.strip():
        return []
    return [s.strip() for s in _SENT_BREAK.split(text) if s.strip()]


def _stem_words(sentence: str) -> list[str]:
    """Bare stemmed word tokens used for phrase matching (no negation tags)."""
    cleaned = re.sub(r"[^a-z0-9]+", " ", sentence.lower())
    return [stem(w) for w in cleaned.split()]


def _find_spans(tokens: list[str], phrase: tuple[str, ...]) -> list[tuple[int, int]]:
    n = len(phrase)
    return [
        (i, i + n)
        for i in range(len(tokens) - n + 1)
        if tuple(tokens[i : i + n]) == phrase
    ]


def detect_credit_sentences(sentences: list[str], lists: WordLists | None = None) -> list[bool]:
    """Flag sentences containing a credit word outside every excluded phrase.

    A credit-word occurrence inside an excluded-phrase occurrence does not
    count; the sentence is flagged only if at least one occurrence survives.
    """
    lists = lists if lists is not None else WordLists()
    flags = []
    for sentence in sentences:
        tokens = _stem_words(sentence)
        excluded_spans = [
            span for phrase in lists.excluded_stems for span in _find_spans(tokens, phrase)
        ]
        hit = False
        for phrase in lists.credit_stems:
            for lo, hi in _find_spans(tokens, phrase):
                if not any(elo <= lo and hi <= ehi for elo, ehi in excluded_spans):
                    hit = True
                    break
            if hit:
                break
        flags.append(hit)
    return flags


def extract_credit_window(sentences, flags, radius: int = 5) -> list[int]:
    """Union of [i-radius, i+radius] over flagged sentences, in order."""
    if len(flags) != len(sentences):
        raise ValidationError("flags must align with sentences")
    keep = set()
    n = len(sentences)
    for i, flagged in enumerate(flags):
        if flagged:
            keep.update(range(max(0, i - radius), min(n, i + radius + 1)))
    return sorted(keep)


def _magnitude_marker(match: re.Match) -> str:
    digits = len(match.group(0).split(".")[0])
    if digits >= 10:
        return "_bln_"
    if digits >= 7:
        return "_mln_"
    return "_num_"


def _clean_piece(piece: str) -> list[str]:
    """Strip non-token chars, collapse digit runs, split on leftover periods."""
    piece = _NON_TOKEN_CHAR.sub(" ", piece)
    # keep periods only when they sit between digits (decimal points)
    piece = re.sub(r"(?<!\d)\.|\.(?!\d)", " ", piece)
    piece = _NUMBER.sub(_magnitude_marker, piece)
    return piece.split()


def _is_cue(word: str) -> bool:
    core = _CUE_STRIP.sub("", word)
    return core in _NEG_CUES or core.endswith("n't")


def normalize_tokens(sentence: str) -> list[str]:
    """Lowercase, negation-tag, stem, and collapse digit runs in one sentence.

    Words between a negation cue (not/no/never/…n't) and the next clause
    punctuation get a _NEG suffix; stemming applies to the pre-suffix part.
    Digit runs become _bln_ (>=10 digits), _mln_ (>=7), or _num_, with
    decimals classified by their integer part.
    """
    out: list[str] = []
    negating = False
    for raw in sentence.lower().split():
        ends_scope = any(p in raw for p in _SCOPE_PUNCT)
        if _is_cue(raw):
            for piece in _clean_piece(raw):
                out.append(stem(piece))
            negating = not ends_scope
            continue
        for piece in _clean_piece(raw):
            token = stem(piece)
            out.append(token + NEG_SUFFIX if negating else token)
        if negating and ends_scope:
            negating = False
    return out


@dataclass
class DocumentTermMatrix:
    """Sparse n-gram counts: one row per call, one column per token."""

    row_ids: list[str]
    vocabulary: list[str]
    counts: sp.csr_matrix
    sector_of_row: list[str]

    def __post_init__(self):
        if self.counts.shape != (len(self.row_ids), len(self.vocabulary)):
            raise ValidationError(
                f"counts shape {self.counts.shape} does not match "
                f"{len(self.row_ids)} rows x {len(self.vocabulary)} tokens"
            )
        if len(self.sector_of_row) != len(self.row_ids):
            raise ValidationError("sector_of_row must align with rows")
        if len(set(self.vocabulary)) != len(self.vocabulary):
            raise ValidationError("vocabulary entries must be unique")
        if self.counts.nnz and self.counts.data.min() < 0:
            raise ValidationError("counts must be nonnegative")

    @property
    def shape(self) -> tuple[int, int]:
        return self.counts.shape

    def dense(self) -> np.ndarray:
        return np.asarray(self.counts.todense(), dtype=float)

    def column(self, token: str) -> np.ndarray:
        j = self.vocabulary.index(token)
        return np.asarray(self.counts[:, j].todense(), dtype=float).ravel()

    def restrict(self, tokens: list[str]) -> "DocumentTermMatrix":
        """Columns reindexed to `tokens`; tokens absent here count as zero."""
        index = {t: j for j, t in enumerate(self.vocabulary)}
        cols = []
        n = len(self.row_ids)
        for t in tokens:
            j = index.get(t)
            if j is None:
                cols.append(sp.csr_matrix((n, 1), dtype=self.counts.dtype))
            else:
                cols.append(self.counts[:, j])
        counts = sp.hstack(cols, format="csr") if cols else sp.csr_matrix((n, 0))
        return DocumentTermMatrix(
            row_ids=list(self.row_ids),
            vocabulary=list(tokens),
            counts=counts,
            sector_of_row=list(self.sector_of_row),
        )

    def subset_rows(self, mask) -> "DocumentTermMatrix":
        mask = np.asarray(mask)
        idx = np.flatnonzero(mask) if mask.dtype == bool else mask
        return DocumentTermMatrix(
            row_ids=[self.row_ids[i] for i in idx],
            vocabulary=list(self.vocabulary),
            counts=self.counts[idx],
            sector_of_row=[self.sector_of_row[i] for i in idx],
        )


def _doc_ngrams(sentences: list[list[str]], ngram_max: int, underscore: set) -> Counter:
    counts: Counter = Counter()
    for tokens in sentences:
        for n in range(1, ngram_max + 1):
            for i in range(len(tokens) - n + 1):
                gram = tuple(tokens[i : i + n])
                if n == 1:
                    counts[gram[0]] += 1
                elif gram in underscore:
                    counts["_".join(gram)] += 1
                else:
                    counts[".".join(gram)] += 1
    return counts


def build_dtm(
    corpus: list[list[list[str]]],
    call_ids: list[str] | None = None,
    sectors: list[str] | None = None,
    ngram_max: int = 3,
    top_n: int = 2000,
    vocabulary: list[str] | None = None,
    underscore_phrases: set[tuple[str, ...]] | None = None,
) -> DocumentTermMatrix:
    """Count n-grams (not crossing sentence boundaries) into a sparse DTM.

    With `vocabulary` given, counts are mapped onto it; otherwise the top_n
    tokens by total corpus frequency are kept, ties broken lexicographically.
    """
    call_ids = call_ids if call_ids is not None else [str(i) for i in range(len(corpus))]
    sectors = sectors if sectors is not None else [""] * len(corpus)
    underscore = underscore_phrases or set()

    per_doc = [_doc_ngrams(doc, ngram_max, underscore) for doc in corpus]

    if vocabulary is None:
        totals: Counter = Counter()
        for c in per_doc:
            totals.update(c)
        if top_n < len(totals):
            ranked = sorted(totals.items(), key=lambda kv: (-kv[1], kv[0]))[:top_n]
            vocabulary = [t for t, _ in ranked]
        else:
            if top_n > len(totals) and totals:
                warnings.warn(
                    f"top_n={top_n} exceeds the {len(totals)} distinct tokens; keeping all"
                )
            vocabulary = sorted(totals, key=lambda t: (-totals[t], t))

    index = {t: j for j, t in enumerate(vocabulary)}
    rows, cols, vals = [], [], []
    for i, c in enumerate(per_doc):
        for token, v in c.items():
            j = index.get(token)
            if j is not None:
                rows.append(i)
                cols.append(j)
                vals.append(v)
    counts = sp.csr_matrix(
        (vals, (rows, cols)), shape=(len(corpus), len(vocabulary)), dtype=np.int64
    )
    return DocumentTermMatrix(
        row_ids=list(call_ids), vocabulary=list(vocabulary), counts=counts,
        sector_of_row=list(sectors),
    )


class CreditWindowVectorizer(BaseEstimator, TransformerMixin):
    """Transcripts -> credit-window DTM with a learned top-N vocabulary.

    fit() learns the vocabulary on a corpus (e.g. a training window);
    transform() counts any corpus against that fixed vocabulary, so
    out-of-window calls are valued on the same token set.
    """

    def __init__(self, word_lists: WordLists | None = None, top_n: int = 2000,
                 ngram_max: int = 3, radius: int = 5):
        self.word_lists = word_lists
        self.top_n = top_n
        self.ngram_max = ngram_max
        self.radius = radius

    def _lists(self) -> WordLists:
        return self.word_lists if self.word_lists is not None else WordLists()

    def process_document(self, text: str) -> list[list[str]]:
        """Raw call text -> normalized token sequences of the credit window."""
        lists = self._lists()
        sentences = split_sentences(text)
        flags = detect_credit_sentences(sentences, lists)
        keep = extract_credit_window(sentences, flags, self.radius)
        return [normalize_tokens(sentences[i]) for i in keep]

    def fit(self, transcripts: list[Transcript], y=None):
        corpus = [self.process_document(t.text) for t in transcripts]
        dtm = build_dtm(
            corpus,
            call_ids=[t.call_id for t in transcripts],
            sectors=[t.sector for t in transcripts],
            ngram_max=self.ngram_max,
            top_n=self.top_n,
            underscore_phrases=set(self._lists().credit_stems),
        )
        self.vocabulary_ = dtm.vocabulary
        self._fit_dtm = dtm
        self._fit_ids = [t.call_id for t in transcripts]
        return self

    def transform(self, transcripts: list[Transcript]) -> DocumentTermMatrix:
        if not hasattr(self, "vocabulary_"):
            raise ValidationError("vectorizer must be fit before transform")
        ids = [t.call_id for t in transcripts]
        if ids == self._fit_ids:
            return self._fit_dtm
        corpus = [self.process_document(t.text) for t in transcripts]
        return build_dtm(
            corpus,
            call_ids=ids,
            sectors=[t.sector for t in transcripts],
            ngram_max=self.ngram_max,
            vocabulary=self.vocabulary_,
            underscore_phrases=set(self._lists().credit_stems),
        )
