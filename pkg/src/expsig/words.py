"""Multi-index (word) algebra over the alphabet {1, ..., d}.

Words address individual coefficients of a truncated tensor series.  The
layout used everywhere in this package is level-major (words sorted by
length) and lexicographic within a level, so that each level occupies a
contiguous block of the flat coefficient vector.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb
from typing import Dict, Iterator, Tuple


class AlphabetMismatchError(ValueError):
    """Raised when combining words over different alphabet sizes."""


@dataclass(frozen=True)
class Word:
    """An ordered tuple of letters in [1, d] addressing one signature entry."""

    letters: Tuple[int, ...]
    d: int

    def __post_init__(self) -> None:
        letters = tuple(int(x) for x in self.letters)
        object.__setattr__(self, "letters", letters)
        if self.d < 1:
            raise ValueError(f"alphabet size must be >= 1, got {self.d}")
        for x in letters:
            if not 1 <= x <= self.d:
                raise ValueError(f"letter {x} outside alphabet [1, {self.d}]")

    def __len__(self) -> int:
        return len(self.letters)

    def __iter__(self) -> Iterator[int]:
        return iter(self.letters)

    def __str__(self) -> str:
        return format_word(self.letters)

    def concat(self, other: "Word") -> "Word":
        if self.d != other.d:
            raise AlphabetMismatchError(
                f"cannot concatenate words over alphabets {self.d} and {other.d}"
            )
        return Word(self.letters + other.letters, self.d)

    def drop_last(self, n: int = 1) -> "Word":
        """The word with its last n letters removed."""
        if n > len(self.letters):
            raise ValueError(f"cannot drop {n} letters from word of length {len(self)}")
        return Word(self.letters[: len(self.letters) - n], self.d)

    def relabel(self, d: int, offset: int = 0) -> "Word":
        """Same letter sequence shifted by `offset` into a d-letter alphabet."""
        return Word(tuple(x + offset for x in self.letters), d)


def format_word(letters: Tuple[int, ...]) -> str:
    """Dot-separated serialization, empty word rendered as the unicode slot."""
    if not letters:
        return "∅"
    return ".".join(str(x) for x in letters)


def parse_word(text: str, d: int) -> Word:
    text = text.strip()
    if text in ("∅", "", "e"):
        return Word((), d)
    try:
        letters = tuple(int(part) for part in text.split("."))
    except ValueError as exc:
        raise ValueError(f"cannot parse word {text!r}") from exc
    return Word(letters, d)


@dataclass
class WordPolynomial:
    """Integer-coefficient linear combination of words over one alphabet.

    Zero coefficients are never stored.
    """

    d: int
    terms: Dict[Tuple[int, ...], int] = field(default_factory=dict)

    def add_term(self, letters: Tuple[int, ...], coeff: int) -> None:
        if coeff == 0:
            return
        new = self.terms.get(letters, 0) + coeff
        if new == 0:
            self.terms.pop(letters, None)
        else:
            self.terms[letters] = new

    def __add__(self, other: "WordPolynomial") -> "WordPolynomial":
        if self.d != other.d:
            raise AlphabetMismatchError("mismatched alphabets in word polynomial sum")
        out = WordPolynomial(self.d, dict(self.terms))
        for letters, coeff in other.terms.items():
            out.add_term(letters, coeff)
        return out

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WordPolynomial):
            return NotImplemented
        return self.d == other.d and self.terms == other.terms

    def words(self) -> Iterator[Tuple[Word, int]]:
        for letters, coeff in self.terms.items():
            yield Word(letters, self.d), coeff

    def total_mass(self) -> int:
        return sum(self.terms.values())


@lru_cache(maxsize=None)
def _shuffle_letters(a: Tuple[int, ...], b: Tuple[int, ...]) -> Tuple[Tuple[Tuple[int, ...], int], ...]:
    """All interleavings of a and b with multiplicities, exact integers."""
    if not a:
        return ((b, 1),)
    if not b:
        return ((a, 1),)
    acc: Dict[Tuple[int, ...], int] = {}
    for letters, coeff in _shuffle_letters(a[:-1], b):
        key = letters + (a[-1],)
        acc[key] = acc.get(key, 0) + coeff
    for letters, coeff in _shuffle_letters(a, b[:-1]):
        key = letters + (b[-1],)
        acc[key] = acc.get(key, 0) + coeff
    return tuple(sorted(acc.items()))


def shuffle(a: Word, b: Word) -> WordPolynomial:
    """Shuffle product of two words.

    The result collects every interleaving of the letters of `a` and `b`
    with its multiplicity; the coefficients sum to C(|a|+|b|, |a|).
    """
    if a.d != b.d:
        raise AlphabetMismatchError(
            f"cannot shuffle words over alphabets {a.d} and {b.d}"
        )
    out = WordPolynomial(a.d)
    for letters, coeff in _shuffle_letters(a.letters, b.letters):
        out.add_term(letters, coeff)
    return out


def shuffle_poly(p: WordPolynomial, q: WordPolynomial) -> WordPolynomial:
    """Bilinear extension of the shuffle product to word polynomials."""
    if p.d != q.d:
        raise AlphabetMismatchError("mismatched alphabets in polynomial shuffle")
    out = WordPolynomial(p.d)
    for la, ca in p.terms.items():
        for lb, cb in q.terms.items():
            for letters, coeff in _shuffle_letters(la, lb):
                out.add_term(letters, ca * cb * coeff)
    return out


def shuffle_mass(a: Word, b: Word) -> int:
    """Expected total coefficient mass of a shuffle, for checking."""
    return comb(len(a) + len(b), len(a))


def concat(a: Word, b: Word) -> Word:
    return a.concat(b)


def num_words(d: int, K: int) -> int:
    """Number of words of length <= K over d letters (geometric sum)."""
    if d == 1:
        return K + 1
    return (d ** (K + 1) - 1) // (d - 1)


def level_offsets(d: int, K: int) -> Tuple[int, ...]:
    out = [0]
    for k in range(K + 1):
        out.append(out[-1] + d**k)
    return tuple(out)


class WordTable:
    """Deterministic enumeration of all words with length <= K over d letters.

    Order: by length ascending, then lexicographic on letters.  The level-k
    block is contiguous, which the dense tensor kernels rely on.
    """

    def __init__(self, d: int, K: int) -> None:
        if d < 1 or K < 0:
            raise ValueError(f"need d >= 1 and K >= 0, got d={d}, K={K}")
        total = num_words(d, K)
        if total > 10_000_000:
            raise OverflowError(f"word table for d={d}, K={K} has {total} entries")
        self.d = d
        self.K = K
        self.offsets = level_offsets(d, K)
        self._words = [Word((), d)]
        for k in range(1, K + 1):
            for letters in itertools.product(range(1, d + 1), repeat=k):
                self._words.append(Word(letters, d))

    def __len__(self) -> int:
        return len(self._words)

    def __iter__(self) -> Iterator[Word]:
        return iter(self._words)

    def word(self, index: int) -> Word:
        return self._words[index]

    def index(self, w: Word) -> int:
        """Flat index of a word: level offset plus base-d rank within the level."""
        if w.d != self.d:
            raise AlphabetMismatchError(f"word over alphabet {w.d}, table over {self.d}")
        k = len(w)
        if k > self.K:
            raise ValueError(f"word {w} exceeds truncation level {self.K}")
        rank = 0
        for x in w.letters:
            rank = rank * self.d + (x - 1)
        return self.offsets[k] + rank


def word_layout(d: int, K: int) -> WordTable:
    return WordTable(d, K)
