"""Synthetic two-domain benchmark with known ground truth.

Utterances are emitted by first-order Markov sources over a shared token
vocabulary, tagged with their true source, and pushed through the regular
LM / scoring / selection pipeline. Because the ground truth is known, the
benchmark reports selection precision and recall at the budget, plus the
rank correlation between two pipeline variants when asked.

Two emission paths ship: ``tokens`` feeds source states straight into the
LMs (isolating LM/selector behavior), while ``frames`` renders each state as
a noisy Gaussian feature vector and runs the codebook quantizer first,
exercising the full pipeline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import ngram, quantizer, selector
from .corpus import TokenSequence, Utterance, write_manifest, write_tokens
from .errors import ArgumentError, ConfigError

TOKENS_PER_SECOND = 100.0  # synthetic duration: one token per 10 ms frame
TARGET_TAG = "target"
GENERAL_TAG = "general"


@dataclass
class MarkovSource:
    """First-order Markov emitter over integer tokens."""

    vocab_size: int
    transition: np.ndarray  # (V, V), rows sum to 1
    initial: np.ndarray  # (V,)

    def __post_init__(self):
        self.transition = np.asarray(self.transition, dtype=np.float64)
        self.initial = np.asarray(self.initial, dtype=np.float64)
        if self.transition.shape != (self.vocab_size, self.vocab_size):
            raise ArgumentError("transition matrix shape must be (vocab, vocab)")
        if self.initial.shape != (self.vocab_size,):
            raise ArgumentError("initial distribution shape must be (vocab,)")
        if np.any(self.transition < 0) or np.any(self.initial < 0):
            raise ArgumentError("probabilities must be non-negative")
        if not np.allclose(self.transition.sum(axis=1), 1.0, atol=1e-9):
            raise ArgumentError("transition rows must sum to 1 within 1e-9")
        if not np.isclose(self.initial.sum(), 1.0, atol=1e-9):
            raise ArgumentError("initial distribution must sum to 1 within 1e-9")

    def sample(self, length: int, rng: np.random.Generator) -> np.ndarray:
        if length < 1:
            raise ArgumentError("sequence length must be >= 1")
        out = np.empty(length, dtype=np.int32)
        cum_init = np.cumsum(self.initial)
        cum_rows = np.cumsum(self.transition, axis=1)
        state = int(np.searchsorted(cum_init, rng.random(), side="right"))
        state = min(state, self.vocab_size - 1)
        out[0] = state
        draws = rng.random(length - 1)
        for i in range(1, length):
            state = int(np.searchsorted(cum_rows[state], draws[i - 1], side="right"))
            state = min(state, self.vocab_size - 1)
            out[i] = state
        return out


def peaked_source(vocab_size: int, rng: np.random.Generator, peak: float = 0.6) -> MarkovSource:
    """Source whose rows put ``peak`` mass on a random next state, rest uniform."""
    if not 0.0 < peak < 1.0:
        raise ArgumentError("peak must be in (0, 1)")
    nxt = rng.integers(vocab_size, size=vocab_size)
    trans = np.full((vocab_size, vocab_size), (1.0 - peak) / (vocab_size - 1))
    trans[np.arange(vocab_size), nxt] = peak
    # the random favorite may collide with itself; renormalize exactly
    trans = trans / trans.sum(axis=1, keepdims=True)
    initial = np.full(vocab_size, 1.0 / vocab_size)
    return MarkovSource(vocab_size, trans, initial)


def uniform_source(vocab_size: int) -> MarkovSource:
    trans = np.full((vocab_size, vocab_size), 1.0 / vocab_size)
    return MarkovSource(vocab_size, trans, np.full(vocab_size, 1.0 / vocab_size))


def half_vocab_source(vocab_size: int, upper_half: bool) -> MarkovSource:
    """Source emitting only one half of the vocabulary (disjoint support)."""
    half = vocab_size // 2
    lo = half if upper_half else 0
    trans = np.zeros((vocab_size, vocab_size))
    trans[:, lo : lo + half] = 1.0 / half
    initial = np.zeros(vocab_size)
    initial[lo : lo + half] = 1.0 / half
    return MarkovSource(vocab_size, trans, initial)


def make_sources(mode: str, vocab_size: int, peak: float, rng: np.random.Generator):
    """(target, general) source pair for a benchmark mode."""
    if mode == "contrastive":
        return peaked_source(vocab_size, rng, peak), peaked_source(vocab_size, rng, peak)
    if mode == "identical":
        src = peaked_source(vocab_size, rng, peak)
        return src, src
    if mode == "disjoint":
        return half_vocab_source(vocab_size, False), half_vocab_source(vocab_size, True)
    raise ConfigError(f"unknown source mode {mode!r}")


# ---------------------------------------------------------------------------
# corpus sampling
# ---------------------------------------------------------------------------


def sample_sequences(
    source: MarkovSource,
    n: int,
    len_range: tuple[int, int],
    rng: np.random.Generator,
    id_prefix: str,
) -> list[TokenSequence]:
    lo, hi = len_range
    if lo < 2:
        raise ArgumentError("sequence lengths must be >= 2")
    if hi < lo:
        raise ArgumentError("len_range must be (lo, hi) with hi >= lo")
    out = []
    for i in range(n):
        length = int(rng.integers(lo, hi + 1))
        out.append(TokenSequence(f"{id_prefix}{i:06d}", source.sample(length, rng)))
    return out


def sample_corpus(
    target: MarkovSource,
    general: MarkovSource,
    n_target: int,
    n_general: int,
    len_range: tuple[int, int],
    seed: int,
    manifest_path: str | Path | None = None,
    token_path: str | Path | None = None,
) -> tuple[list[Utterance], list[TokenSequence]]:
    """Sample a mixed, tagged corpus; optionally write manifest + token file.

    Utterances are tagged with their true source and shuffled into a single
    pool; the result is reproducible from the seed.
    """
    if target.vocab_size != general.vocab_size:
        raise ArgumentError(
            f"source vocab mismatch: {target.vocab_size} != {general.vocab_size}"
        )
    rng = np.random.default_rng(seed)
    seqs = sample_sequences(target, n_target, len_range, rng, "t")
    tags = [TARGET_TAG] * n_target
    seqs += sample_sequences(general, n_general, len_range, rng, "g")
    tags += [GENERAL_TAG] * n_general
    order = rng.permutation(len(seqs))
    seqs = [seqs[i] for i in order]
    tags = [tags[i] for i in order]

    token_ref = str(token_path) if token_path is not None else "pool.tokens"
    utts = [
        Utterance(
            id=seq.utterance_id,
            token_path=token_ref,
            duration_s=len(seq) / TOKENS_PER_SECOND,
            domain_tag=tag,
        )
        for seq, tag in zip(seqs, tags)
    ]
    if token_path is not None:
        write_tokens(seqs, target.vocab_size, token_path)
    if manifest_path is not None:
        write_manifest(utts, manifest_path)
    return utts, seqs


# ---------------------------------------------------------------------------
# benchmark
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BenchConfig:
    vocab_size: int = 64
    order: int = 5
    n_train_target: int = 500
    n_train_general: int = 500
    n_pool_target: int = 200
    n_pool_general: int = 1800
    len_range: tuple[int, int] = (180, 220)
    budget_fraction: float = 0.10
    source_mode: str = "contrastive"
    source_peak: float = 0.6
    emission: str = "tokens"  # or "frames"
    frame_dim: int = 8
    frame_sigma: float = 0.25
    codebook_vocab: int = 64
    kmeans_iters: int = 25
    max_codebook_frames: int = 100_000
    collapse_repeats: bool = False
    seed: int = 0

    def validate(self) -> None:
        if self.vocab_size < 2:
            raise ConfigError("vocab_size must be >= 2")
        if self.order < 1:
            raise ConfigError("order must be >= 1")
        if self.n_train_target < 1 or self.n_train_general < 1:
            raise ConfigError("each LM training split needs at least one sequence")
        if self.len_range[0] < max(2, self.order - 1):
            raise ConfigError(
                f"training sequences of length {self.len_range[0]} are too short for an order-{self.order} LM"
            )
        if self.n_pool_target + self.n_pool_general < 2:
            raise ConfigError("pool must contain at least two utterances")
        if not 0.0 < self.budget_fraction <= 1.0:
            raise ConfigError("budget_fraction must be in (0, 1]")
        if self.emission not in ("tokens", "frames"):
            raise ConfigError(f"unknown emission mode {self.emission!r}")

    def descriptor(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


def reference_config(seed: int = 20260808) -> BenchConfig:
    """The frozen reference configuration used by the acceptance suite."""
    return BenchConfig(seed=seed)


@dataclass
class BenchReport:
    config: dict
    seed: int
    precision_at_budget: float
    recall_at_budget: float
    n_pool: int
    n_selected: int
    selected_ids: list[str]
    per_utterance: list[dict] = field(default_factory=list)
    variant_config: dict | None = None
    variant_precision: float | None = None
    variant_recall: float | None = None
    tau_between_configs: float | None = None

    def to_json(self, include_per_utterance: bool = False) -> str:
        payload = {
            "config": self.config,
            "seed": self.seed,
            "precision_at_budget": self.precision_at_budget,
            "recall_at_budget": self.recall_at_budget,
            "n_pool": self.n_pool,
            "n_selected": self.n_selected,
            "variant_config": self.variant_config,
            "variant_precision": self.variant_precision,
            "variant_recall": self.variant_recall,
            "tau_between_configs": self.tau_between_configs,
        }
        if include_per_utterance:
            payload["per_utterance"] = self.per_utterance
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    def per_utterance_csv(self) -> str:
        lines = ["utterance_id,domain_tag,score,selected"]
        for rec in self.per_utterance:
            lines.append(
                f"{rec['utterance_id']},{rec['domain_tag']},{rec['score']:.9g},{int(rec['selected'])}"
            )
        return "\n".join(lines) + "\n"


def _frames_for(seq: np.ndarray, means: np.ndarray, sigma: float, rng: np.random.Generator):
    return means[seq] + sigma * rng.standard_normal((seq.shape[0], means.shape[1]))


def _collapse(seq: TokenSequence) -> TokenSequence:
    toks = seq.tokens
    keep = np.ones(toks.shape[0], dtype=bool)
    keep[1:] = toks[1:] != toks[:-1]
    return TokenSequence(seq.utterance_id, toks[keep])


def _pipeline_scores(cfg: BenchConfig, corpus) -> list[selector.DomainScore]:
    """Token (or frame+quantize) sequences -> trained LMs -> pool scores."""
    train_t, train_g, pool_seqs = corpus

    if cfg.emission == "frames":
        ss = np.random.SeedSequence(entropy=(cfg.seed, 2))
        rng_emit, rng_quant = [np.random.default_rng(s) for s in ss.spawn(2)]
        means = rng_emit.standard_normal((cfg.vocab_size, cfg.frame_dim))
        as_frames = lambda seqs: [
            _frames_for(s.tokens, means, cfg.frame_sigma, rng_emit) for s in seqs
        ]
        frames_t, frames_g, frames_pool = as_frames(train_t), as_frames(train_g), as_frames(pool_seqs)
        sample = quantizer.sample_frames(
            frames_g, cap=cfg.max_codebook_frames, seed=int(rng_quant.integers(2**32))
        )
        codebook = quantizer.train_codebook(
            sample,
            quantizer.QuantizerConfig(
                vocab_size=cfg.codebook_vocab,
                max_iters=cfg.kmeans_iters,
                seed=int(rng_quant.integers(2**32)),
            ),
        )
        requant = lambda frames, seqs: [
            quantizer.quantize(f, codebook, cfg.collapse_repeats, s.utterance_id)
            for f, s in zip(frames, seqs)
        ]
        train_t = requant(frames_t, train_t)
        train_g = requant(frames_g, train_g)
        pool_seqs = requant(frames_pool, pool_seqs)
        lm_vocab = cfg.codebook_vocab
    else:
        if cfg.collapse_repeats:
            train_t = [_collapse(s) for s in train_t]
            train_g = [_collapse(s) for s in train_g]
            pool_seqs = [_collapse(s) for s in pool_seqs]
        lm_vocab = cfg.vocab_size

    target_lm = ngram.train(train_t, cfg.order, lm_vocab)
    general_lm = ngram.train(train_g, cfg.order, lm_vocab)
    return selector.score_corpus(pool_seqs, target_lm, general_lm)


def _generate(cfg: BenchConfig):
    """Sources and corpus splits; depends only on corpus-level config fields."""
    ss = np.random.SeedSequence(entropy=(cfg.seed, 1))
    rng_sources, rng_train, rng_pool = [np.random.default_rng(s) for s in ss.spawn(3)]
    target_src, general_src = make_sources(cfg.source_mode, cfg.vocab_size, cfg.source_peak, rng_sources)
    train_t = sample_sequences(target_src, cfg.n_train_target, cfg.len_range, rng_train, "tt")
    train_g = sample_sequences(general_src, cfg.n_train_general, cfg.len_range, rng_train, "tg")
    pool_utts, pool_seqs = sample_corpus(
        target_src,
        general_src,
        cfg.n_pool_target,
        cfg.n_pool_general,
        cfg.len_range,
        seed=int(rng_pool.integers(2**32)),
    )
    return train_t, train_g, pool_utts, pool_seqs


def _evaluate(cfg: BenchConfig, pool_utts, scores):
    tags = {u.id: u.domain_tag for u in pool_utts}
    durations = {u.id: u.duration_s for u in pool_utts}
    manifest = selector.select(
        scores, durations, selector.BudgetSpec("fraction", cfg.budget_fraction)
    )
    selected = manifest.selected_ids
    n_target_selected = sum(1 for i in selected if tags[i] == TARGET_TAG)
    n_target_pool = sum(1 for t in tags.values() if t == TARGET_TAG)
    precision = n_target_selected / len(selected) if selected else 0.0
    recall = n_target_selected / n_target_pool if n_target_pool else 0.0
    score_by_id = {s.utterance_id: s.score for s in scores}
    selected_set = set(selected)
    per_utt = [
        {
            "utterance_id": u.id,
            "domain_tag": u.domain_tag,
            "score": score_by_id[u.id],
            "selected": u.id in selected_set,
        }
        for u in pool_utts
    ]
    return precision, recall, selected, per_utt


def run_benchmark(cfg: BenchConfig, variant: BenchConfig | None = None) -> BenchReport:
    """Train, score, and select on a synthetic corpus with known tags.

    With ``variant`` set, the same generated corpus is pushed through the
    variant pipeline as well, and the report carries the variant's
    precision/recall and the Kendall tau-b between the two rankings.
    """
    cfg.validate()
    train_t, train_g, pool_utts, pool_seqs = _generate(cfg)
    scores = _pipeline_scores(cfg, (train_t, train_g, pool_seqs))
    precision, recall, selected, per_utt = _evaluate(cfg, pool_utts, scores)
    report = BenchReport(
        config=cfg.descriptor(),
        seed=cfg.seed,
        precision_at_budget=precision,
        recall_at_budget=recall,
        n_pool=len(pool_utts),
        n_selected=len(selected),
        selected_ids=selected,
        per_utterance=per_utt,
    )

    if variant is not None:
        variant.validate()
        corpus_fields = (
            "vocab_size n_train_target n_train_general n_pool_target n_pool_general "
            "len_range source_mode source_peak seed"
        ).split()
        for name in corpus_fields:
            if getattr(cfg, name) != getattr(variant, name):
                raise ConfigError(
                    f"variant must share corpus-level config; {name} differs"
                )
        v_scores = _pipeline_scores(variant, (train_t, train_g, pool_seqs))
        v_precision, v_recall, _, _ = _evaluate(variant, pool_utts, v_scores)
        tau = selector.kendall_tau_by_id(scores, v_scores)
        report.variant_config = variant.descriptor()
        report.variant_precision = v_precision
        report.variant_recall = v_recall
        report.tau_between_configs = tau.value
    return report


def jaccard(a, b) -> float:
    """Set overlap |a & b| / |a | b|; 1.0 when both are empty."""
    a, b = set(a), set(b)
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)
