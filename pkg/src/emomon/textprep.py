"""Spanish tweet text preparation.

Normalization, word splitting, WordPiece tokenization and lexicon term
matching. Everything here is a pure function over strings and word lists;
no I/O except :func:`load_vocab`.

The normalized alphabet is lowercase ascii letters, digits, the letter n
with tilde, the four exclamation/question marks and the space. Exclamation
and question marks (including the Spanish inverted forms) survive
normalization because they carry emotional signal; every other character
outside the alphabet is dropped.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

WordSequence = list[str]
Span = tuple[int, int]  # inclusive word-index range

PUNCT_WORDS = "!?¡¿"  # ! ? inverted-! inverted-?

_ALPHABET = frozenset("abcdefghijklmnopqrstuvwxyz0123456789ñ " + PUNCT_WORDS)

_URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
_MENTION_RE = re.compile(r"@\w+")
_WS_RE = re.compile(r"\s+")

# Spanish accented vowels fold to their plain form; enye is a distinct
# letter and is preserved. Folding goes straight to lowercase.
_ACCENT_FOLD = str.maketrans(
    "áéíóúüÁÉÍÓÚÜ",
    "aeiouuaeiouu",
)


def normalize(text: str) -> str:
    """Normalize raw tweet text into the restricted alphabet.

    Applies, in order: URL and @mention removal, '#' stripping (the tagged
    word is kept), folding of accented vowels, lowercasing, removal of every
    character outside the alphabet, whitespace collapse and trim. The result
    is a fixed point: ``normalize(normalize(x)) == normalize(x)``.
    """
    text = _URL_RE.sub(" ", text)
    text = _MENTION_RE.sub(" ", text)
    text = text.replace("#", "")
    text = text.translate(_ACCENT_FOLD)
    text = text.lower()
    text = "".join(ch for ch in text if ch in _ALPHABET)
    return _WS_RE.sub(" ", text).strip()


def split_words(text: str) -> WordSequence:
    """Split normalized text into words.

    Splits on spaces; each of ``! ? ¡ ¿`` becomes a standalone word, in
    the position it occupied. Input must already be normalized.
    """
    words: WordSequence = []
    for chunk in text.split():
        buf: list[str] = []
        for ch in chunk:
            if ch in PUNCT_WORDS:
                if buf:
                    words.append("".join(buf))
                    buf = []
                words.append(ch)
            else:
                buf.append(ch)
        if buf:
            words.append("".join(buf))
    return words


@dataclass
class TokenizerConfig:
    """WordPiece vocabulary plus limits.

    ``vocab`` is ordered; the line number of a token in the vocab file is its
    id. Continuation pieces carry the ``##`` prefix in the vocab itself.
    """

    vocab: tuple[str, ...]
    unk_token: str = "[UNK]"
    max_len: int = 65
    _vocab_set: frozenset = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if not self.vocab:
            raise ValueError("vocab must be non-empty")
        if len(set(self.vocab)) != len(self.vocab):
            raise ValueError("vocab contains duplicate tokens")
        if self.unk_token not in self.vocab:
            raise ValueError("unk_token must be part of the vocab")
        if self.max_len < 1:
            raise ValueError("max_len must be >= 1")
        self._vocab_set = frozenset(self.vocab)


def load_vocab(path: str | Path, unk_token: str = "[UNK]", max_len: int = 65) -> TokenizerConfig:
    """Read a vocab file (UTF-8, one token per line, line number = id)."""
    tokens = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            token = line.rstrip("\n")
            if token:
                tokens.append(token)
    return TokenizerConfig(vocab=tuple(tokens), unk_token=unk_token, max_len=max_len)


def _wordpiece_word(word: str, cfg: TokenizerConfig) -> list[str]:
    # Greedy longest-prefix match; a word that cannot be fully decomposed
    # collapses to the unknown token.
    pieces: list[str] = []
    start = 0
    while start < len(word):
        end = len(word)
        piece = None
        while start < end:
            candidate = word[start:end]
            if start > 0:
                candidate = "##" + candidate
            if candidate in cfg._vocab_set:
                piece = candidate
                break
            end -= 1
        if piece is None:
            return [cfg.unk_token]
        pieces.append(piece)
        start = end
    return pieces


def wordpiece_tokenize(words: Sequence[str], cfg: TokenizerConfig) -> list[str]:
    """Tokenize a word sequence, truncating to the first ``cfg.max_len`` tokens."""
    out: list[str] = []
    for word in words:
        out.extend(_wordpiece_word(word, cfg))
        if len(out) >= cfg.max_len:
            break
    return out[: cfg.max_len]


class LexiconMatcher:
    """Finds occurrences of word-level terms, grouped by label.

    Terms are sequences of normalized words (multi-word terms match as a
    contiguous subsequence). The matcher pre-indexes terms by first word so
    scanning a tweet is linear in its length for small lexicons.
    """

    def __init__(self, terms_by_group: Mapping[str, Iterable[Sequence[str]]]):
        self.groups: tuple[str, ...] = tuple(terms_by_group)
        self._by_first: dict[str, list[tuple[str, tuple[str, ...]]]] = {}
        for group, terms in terms_by_group.items():
            for term in terms:
                term_t = tuple(term)
                if not term_t or any((not w) or (" " in w) for w in term_t):
                    raise ValueError(f"invalid lexicon term for {group!r}: {term!r}")
                self._by_first.setdefault(term_t[0], []).append((group, term_t))

    def match(self, words: Sequence[str]) -> dict[str, list[Span]]:
        """Return, per group, sorted unique spans where a term occurs."""
        found: dict[str, set[Span]] = {g: set() for g in self.groups}
        n = len(words)
        for i, word in enumerate(words):
            for group, term in self._by_first.get(word, ()):
                j = i + len(term)
                if j <= n and tuple(words[i:j]) == term:
                    found[group].add((i, j - 1))
        return {g: sorted(spans) for g, spans in found.items()}


def match_lexicon(
    words: Sequence[str], terms_by_group: Mapping[str, Iterable[Sequence[str]]]
) -> dict[str, list[Span]]:
    """One-shot form of :meth:`LexiconMatcher.match`."""
    return LexiconMatcher(terms_by_group).match(words)


def remove_lexicon_terms(
    words: Sequence[str], spans_by_group: Mapping[str, Sequence[Span]]
) -> WordSequence:
    """Drop every word covered by any span; remaining order is preserved."""
    covered: set[int] = set()
    for spans in spans_by_group.values():
        for start, end in spans:
            covered.update(range(start, end + 1))
    return [w for i, w in enumerate(words) if i not in covered]


def strip_lexicon_terms(words: Sequence[str], matcher: LexiconMatcher) -> WordSequence:
    """Iterate match/remove until no term matches.

    A single removal pass can create a new match for a multi-word term by
    making previously separated words adjacent, so dataset construction and
    the lexicon-free experiments use this fixed-point form.
    """
    current = list(words)
    while True:
        spans = matcher.match(current)
        if not any(spans.values()):
            return current
        current = remove_lexicon_terms(current, spans)
