"""Back-off n-gram language models over token sequences.

Counting pads each sequence with N-1 begin sentinels and one end sentinel,
then records every window of every order 1..N except the pure-sentinel
prefixes (begin tokens are contexts, never predicted events). Estimation is
interpolated modified Kneser-Ney with three count-dependent discounts per
order, continuation counts for lower orders, and the interpolation folded
into back-off weights, so queries use the standard back-off recursion.

Conventions that make the model exactly normalizable over the event space
E = {0..vocab_size-1, EOS}:

  * lower-order counts are continuation counts (distinct left extensions),
    except n-grams starting with BOS, which keep their raw counts;
  * the unigram distribution interpolates with the uniform 1/|E| base, and
    every event in E gets a stored unigram probability, seen or not;
  * pure-BOS runs carry back-off weights but no probability.

Degenerate count-of-counts (any of n1..n4 zero, or a discount escaping its
valid range) fall back to a single absolute discount of 0.5 for that order
and are reported in the model's warning records. Probabilities are stored in
log10 (the ARPA convention); the scoring interface converts to natural log.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .corpus import TokenSequence
from .errors import ArgumentError, ValidationError

LN10 = math.log(10.0)
DEFAULT_ORDER = 5

Gram = tuple[int, ...]


def bos_id(vocab_size: int) -> int:
    return vocab_size


def eos_id(vocab_size: int) -> int:
    return vocab_size + 1


def _token_list(item) -> list[int]:
    if isinstance(item, TokenSequence):
        return [int(t) for t in item.tokens]
    return [int(t) for t in item]


@dataclass
class NgramCounts:
    """Raw window counts for every order up to ``order``.

    ``raw[n]`` maps an n-gram tuple to its occurrence count. Adjusted
    (continuation) counts and count-of-counts are derived views used by
    estimation.
    """

    order: int
    vocab_size: int
    raw: dict[int, dict[Gram, int]] = field(default_factory=dict)
    num_sequences: int = 0

    def __post_init__(self):
        for n in range(1, self.order + 1):
            self.raw.setdefault(n, {})

    @property
    def bos(self) -> int:
        return bos_id(self.vocab_size)

    @property
    def eos(self) -> int:
        return eos_id(self.vocab_size)

    def add_sequence(self, tokens) -> None:
        toks = _token_list(tokens)
        for t in toks:
            if not 0 <= t < self.vocab_size:
                raise ValidationError(f"token {t} outside [0, {self.vocab_size})")
        padded = [self.bos] * (self.order - 1) + toks + [self.eos]
        bos = self.bos
        for n in range(1, self.order + 1):
            table = self.raw[n]
            for i in range(len(padded) - n + 1):
                gram = tuple(padded[i : i + n])
                if gram[-1] == bos:
                    continue  # pure-BOS prefix: context only, never an event
                table[gram] = table.get(gram, 0) + 1
        self.num_sequences += 1

    def adjusted(self, n: int) -> dict[Gram, int]:
        """Counts used for estimation at order ``n``.

        The highest order keeps raw counts. Lower orders use continuation
        counts (number of distinct one-token left extensions), except
        n-grams starting with BOS, which can never be extended left and
        keep their raw counts.
        """
        if n == self.order:
            return self.raw[n]
        left: dict[Gram, int] = {}
        for gram in self.raw[n + 1]:
            suffix = gram[1:]
            left[suffix] = left.get(suffix, 0) + 1
        bos = self.bos
        out: dict[Gram, int] = {}
        for gram, c in self.raw[n].items():
            out[gram] = c if gram[0] == bos else left[gram]
        return out

    def count_of_counts(self, n: int) -> tuple[int, int, int, int]:
        """(n1, n2, n3, n4): how many n-grams have adjusted count 1, 2, 3, 4."""
        t = [0, 0, 0, 0]
        for c in self.adjusted(n).values():
            if 1 <= c <= 4:
                t[c - 1] += 1
        return tuple(t)


def count(sequences: Iterable, order: int, vocab_size: int) -> NgramCounts:
    """Accumulate n-gram counts over a stream of token sequences.

    Deterministic and order-independent over the stream: counts are plain
    integer sums.
    """
    if order < 1:
        raise ArgumentError("order must be >= 1")
    if vocab_size < 1:
        raise ArgumentError("vocab_size must be >= 1")
    counts = NgramCounts(order=order, vocab_size=vocab_size)
    for seq in sequences:
        counts.add_sequence(seq)
    return counts


def merge_counts(a: NgramCounts, b: NgramCounts) -> NgramCounts:
    """Combine shard-level counts; addition is commutative so merge order is free."""
    if a.order != b.order or a.vocab_size != b.vocab_size:
        raise ArgumentError("cannot merge counts with different order or vocab_size")
    merged = NgramCounts(order=a.order, vocab_size=a.vocab_size)
    merged.num_sequences = a.num_sequences + b.num_sequences
    for n in range(1, a.order + 1):
        table = dict(a.raw[n])
        for gram, c in b.raw[n].items():
            table[gram] = table.get(gram, 0) + c
        merged.raw[n] = table
    return merged


# ---------------------------------------------------------------------------
# modified Kneser-Ney estimation
# ---------------------------------------------------------------------------

_FALLBACK_DISCOUNT = (0.0, 0.5, 0.5, 0.5)


def _kn_discounts(coc: tuple[int, int, int, int]):
    """Three-discount closed form from count-of-counts; None when degenerate."""
    n1, n2, n3, n4 = coc
    if n1 == 0 or n2 == 0 or n3 == 0 or n4 == 0:
        return None
    y = n1 / (n1 + 2.0 * n2)
    d1 = 1.0 - 2.0 * y * n2 / n1
    d2 = 2.0 - 3.0 * y * n3 / n2
    d3 = 3.0 - 4.0 * y * n4 / n3
    for k, d in enumerate((d1, d2, d3), start=1):
        if not 0.0 < d <= k:
            return None
    return (0.0, d1, d2, d3)


@dataclass
class NgramModel:
    """Estimated back-off model: log10 probabilities and back-off weights.

    ``probs`` holds every predicted-event n-gram; ``bows`` holds every
    context that has stored extensions (pure-BOS runs included). Queries
    follow the standard recursion: use the stored probability when present,
    otherwise add the context's back-off weight and drop the oldest context
    token.
    """

    order: int
    vocab_size: int
    probs: dict[Gram, float]
    bows: dict[Gram, float]
    discounts: dict[int, tuple[float, float, float, float]] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    @property
    def bos(self) -> int:
        return bos_id(self.vocab_size)

    @property
    def eos(self) -> int:
        return eos_id(self.vocab_size)

    def events(self) -> list[int]:
        """All predictable events: the codebook ids plus EOS."""
        return list(range(self.vocab_size)) + [self.eos]

    def stored_contexts(self) -> list[Gram]:
        """The empty context plus every context carrying a back-off weight."""
        return [()] + list(self.bows.keys())

    def cond_logprob10(self, word: int, context: Sequence[int]) -> float:
        """log10 P(word | context) via the back-off recursion."""
        if not (0 <= word < self.vocab_size or word == self.eos):
            raise ValidationError(f"token {word} outside vocabulary")
        ctx = tuple(context)[-(self.order - 1) :] if self.order > 1 else ()
        acc = 0.0
        while True:
            gram = ctx + (word,)
            hit = self.probs.get(gram)
            if hit is not None:
                return acc + hit
            if not ctx:
                raise ValidationError(f"no unigram entry for token {word}")
            acc += self.bows.get(ctx, 0.0)
            ctx = ctx[1:]

    def cond_logprob(self, word: int, context: Sequence[int]) -> float:
        """Natural-log conditional probability."""
        return self.cond_logprob10(word, context) * LN10

    def logprob(self, tokens) -> float:
        """Natural-log probability of a token sequence.

        Positions are conditioned on BOS-padded history; the EOS event is
        excluded so the value pairs with length = token count downstream.
        """
        toks = _token_list(tokens)
        if not toks:
            raise ArgumentError("logprob of an empty sequence is undefined")
        for t in toks:
            if not 0 <= t < self.vocab_size:
                raise ValidationError(f"token {t} outside [0, {self.vocab_size})")
        padded = [self.bos] * (self.order - 1) + toks
        n_pad = self.order - 1
        terms = [
            self.cond_logprob10(toks[i], padded[i : i + n_pad]) * LN10
            for i in range(len(toks))
        ]
        return math.fsum(terms)

    def perplexity(self, sequences: Iterable) -> float:
        """Per-token perplexity over a corpus (EOS excluded, as in logprob)."""
        total = 0.0
        n_tokens = 0
        for seq in sequences:
            toks = _token_list(seq)
            total += self.logprob(toks)
            n_tokens += len(toks)
        if n_tokens == 0:
            raise ArgumentError("perplexity over an empty corpus is undefined")
        return math.exp(-total / n_tokens)


def estimate(counts: NgramCounts) -> NgramModel:
    """Estimate an interpolated modified Kneser-Ney model from counts."""
    if counts.num_sequences < 1 or not counts.raw[1]:
        raise ArgumentError("estimate requires at least one counted sequence")
    n_orders = counts.order
    vocab = counts.vocab_size
    eos = counts.eos

    warnings: list[str] = []
    discounts: dict[int, tuple[float, float, float, float]] = {}
    adjusted: dict[int, dict[Gram, int]] = {}
    for n in range(1, n_orders + 1):
        adjusted[n] = counts.adjusted(n)
        d = _kn_discounts(counts.count_of_counts(n))
        if d is None:
            d = _FALLBACK_DISCOUNT
            warnings.append(
                f"order {n}: degenerate count-of-counts {counts.count_of_counts(n)}; "
                "using absolute discount 0.5"
            )
        discounts[n] = d

    probs: dict[Gram, float] = {}
    bows: dict[Gram, float] = {}

    # unigrams: interpolate with the uniform base over E = vocab + EOS
    uni = adjusted[1]
    d_uni = discounts[1]
    denom = sum(uni.values())
    n1 = sum(1 for c in uni.values() if c == 1)
    n2 = sum(1 for c in uni.values() if c == 2)
    n3p = sum(1 for c in uni.values() if c >= 3)
    gamma1 = (d_uni[1] * n1 + d_uni[2] * n2 + d_uni[3] * n3p) / denom
    uniform = 1.0 / (vocab + 1)
    prev_real: dict[Gram, float] = {}
    for w in list(range(vocab)) + [eos]:
        a = uni.get((w,), 0)
        u = (a - d_uni[min(a, 3)]) / denom if a > 0 else 0.0
        p = u + gamma1 * uniform
        prev_real[(w,)] = p
        probs[(w,)] = math.log10(p)

    for n in range(2, n_orders + 1):
        table = adjusted[n]
        d = discounts[n]
        by_context: dict[Gram, list[tuple[Gram, int]]] = {}
        for gram, a in table.items():
            by_context.setdefault(gram[:-1], []).append((gram, a))
        cur_real: dict[Gram, float] = {}
        for context, extensions in by_context.items():
            denom = sum(a for _, a in extensions)
            n1 = sum(1 for _, a in extensions if a == 1)
            n2 = sum(1 for _, a in extensions if a == 2)
            n3p = sum(1 for _, a in extensions if a >= 3)
            gamma = (d[1] * n1 + d[2] * n2 + d[3] * n3p) / denom
            bows[context] = math.log10(gamma)
            for gram, a in extensions:
                u = (a - d[min(a, 3)]) / denom
                p = u + gamma * prev_real[gram[1:]]
                cur_real[gram] = p
                probs[gram] = math.log10(p)
        prev_real = cur_real

    return NgramModel(
        order=n_orders,
        vocab_size=vocab,
        probs=probs,
        bows=bows,
        discounts=discounts,
        warnings=warnings,
    )


def train(sequences: Iterable, order: int, vocab_size: int) -> NgramModel:
    """Count then estimate in one call."""
    return estimate(count(sequences, order, vocab_size))
