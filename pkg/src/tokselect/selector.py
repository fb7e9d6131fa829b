"""Contrastive domain scoring, budgeted selection, and rank comparison.

The domain relevance of an utterance with token sequence q is
(ln P_target(q) - ln P_general(q)) / len(q): positive means closer to the
target domain than to the general pool. Selection ranks by score descending
(ties broken by utterance id) and keeps a prefix under an hours / top-K /
score-threshold budget.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import TokenSequence
from .errors import ArgumentError, FormatError, ValidationError
from .ngram import NgramModel


@dataclass
class DomainScore:
    utterance_id: str
    score: float  # per-token natural-log ratio
    len: int
    logp_target: float
    logp_general: float


def score(q: TokenSequence, target: NgramModel, general: NgramModel) -> DomainScore:
    """Per-token contrastive log-likelihood ratio of one utterance."""
    if target.order != general.order:
        raise ArgumentError(f"model order mismatch: {target.order} != {general.order}")
    if target.vocab_size != general.vocab_size:
        raise ArgumentError(
            f"model vocab mismatch: {target.vocab_size} != {general.vocab_size}"
        )
    n = len(q)
    if n == 0:
        raise ArgumentError(f"utterance {q.utterance_id!r}: cannot score an empty sequence")
    logp_t = target.logprob(q)
    logp_g = general.logprob(q)
    return DomainScore(
        utterance_id=q.utterance_id,
        score=(logp_t - logp_g) / n,
        len=n,
        logp_target=logp_t,
        logp_general=logp_g,
    )


def score_corpus(
    sequences: list[TokenSequence], target: NgramModel, general: NgramModel
) -> list[DomainScore]:
    return [score(q, target, general) for q in sequences]


# ---------------------------------------------------------------------------
# budgeted selection
# ---------------------------------------------------------------------------

_BUDGET_KINDS = ("fraction", "hours", "top_k", "score_threshold")


@dataclass(frozen=True)
class BudgetSpec:
    """fraction of pool hours, absolute hours, top-K items, or a score cut."""

    kind: str
    value: float

    def validate(self) -> None:
        if self.kind not in _BUDGET_KINDS:
            raise ArgumentError(f"unknown budget kind {self.kind!r}")
        if self.kind != "score_threshold" and self.value <= 0:
            raise ArgumentError(f"budget value must be > 0, got {self.value}")
        if self.kind == "fraction" and self.value > 1.0:
            raise ArgumentError("fraction budget cannot exceed 1.0")


@dataclass
class SelectionEntry:
    utterance_id: str
    score: float
    duration_s: float
    selected: bool


@dataclass
class SelectionManifest:
    entries: list[SelectionEntry]
    budget: BudgetSpec
    threshold_score: float | None
    pool_hours: float
    selected_hours: float
    warnings: list[str] = field(default_factory=list)

    @property
    def selected_ids(self) -> list[str]:
        return [e.utterance_id for e in self.entries if e.selected]


def select(
    scores: list[DomainScore],
    durations: dict[str, float],
    budget: BudgetSpec,
    closest: bool = False,
) -> SelectionManifest:
    """Rank by score and keep the prefix allowed by the budget.

    Hour budgets stop before overshoot by default; ``closest`` instead stops
    at the prefix whose total is nearest the budget. A budget larger than
    the pool selects everything and records a warning.
    """
    budget.validate()
    if not scores:
        raise ArgumentError("cannot select from an empty score list")
    missing = [s.utterance_id for s in scores if s.utterance_id not in durations]
    if missing:
        raise ArgumentError(f"no duration for utterance(s): {missing[:5]}")

    ranked = sorted(scores, key=lambda s: (-s.score, s.utterance_id))
    durs = [float(durations[s.utterance_id]) for s in ranked]
    total_s = math.fsum(durs)
    warnings: list[str] = []

    if budget.kind == "top_k":
        k = int(budget.value)
        if k >= len(ranked):
            warnings.append(f"top_k {k} >= pool size {len(ranked)}; selecting all")
        n_selected = min(k, len(ranked))
    elif budget.kind == "score_threshold":
        n_selected = sum(1 for s in ranked if s.score >= budget.value)
    else:
        budget_s = (
            budget.value * total_s if budget.kind == "fraction" else budget.value * 3600.0
        )
        if budget_s >= total_s:
            if budget.kind == "hours":
                warnings.append(
                    f"budget {budget.value:.3f} h >= pool {total_s / 3600.0:.3f} h; selecting all"
                )
            n_selected = len(ranked)
        else:
            cum = 0.0
            n_selected = 0
            for d in durs:
                if cum + d > budget_s:
                    if closest and abs(cum + d - budget_s) < abs(cum - budget_s):
                        n_selected += 1
                    break
                cum += d
                n_selected += 1

    entries = [
        SelectionEntry(s.utterance_id, s.score, durs[i], i < n_selected)
        for i, s in enumerate(ranked)
    ]
    selected_s = math.fsum(durs[:n_selected])
    threshold = ranked[n_selected - 1].score if n_selected else None
    return SelectionManifest(
        entries=entries,
        budget=budget,
        threshold_score=threshold,
        pool_hours=total_s / 3600.0,
        selected_hours=selected_s / 3600.0,
        warnings=warnings,
    )


# ---------------------------------------------------------------------------
# Kendall tau-b
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TauResult:
    value: float | None  # None when tau-b is undefined (a side is all ties)

    @property
    def defined(self) -> bool:
        return self.value is not None


def kendall_tau(rank_a, rank_b) -> TauResult:
    """Tie-corrected Kendall tau-b between two aligned score lists.

    Computed by direct pair enumeration (vectorized, chunked), so the value
    is exact up to one division and square root. When either list is fully
    tied the coefficient is undefined and an explicit undefined result is
    returned instead of a number.
    """
    a = np.asarray(rank_a, dtype=np.float64)
    b = np.asarray(rank_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ArgumentError("rankings must be 1-D and the same length")
    n = a.shape[0]
    if n < 2:
        raise ArgumentError("need at least two items to correlate")

    concordant = 0
    discordant = 0
    ties_a_only = 0
    ties_b_only = 0
    cols = np.arange(n)
    chunk = max(1, 4_000_000 // n)
    for lo in range(0, n - 1, chunk):
        hi = min(lo + chunk, n - 1)
        da = np.sign(a[lo:hi, None] - a[None, :])
        db = np.sign(b[lo:hi, None] - b[None, :])
        mask = cols[None, :] > np.arange(lo, hi)[:, None]  # each pair once (j > i)
        prod = da * db
        concordant += int(np.sum((prod > 0) & mask))
        discordant += int(np.sum((prod < 0) & mask))
        ties_a_only += int(np.sum((da == 0) & (db != 0) & mask))
        ties_b_only += int(np.sum((db == 0) & (da != 0) & mask))

    denom_a = concordant + discordant + ties_a_only
    denom_b = concordant + discordant + ties_b_only
    if denom_a == 0 or denom_b == 0:
        return TauResult(None)
    value = (concordant - discordant) / math.sqrt(denom_a * denom_b)
    return TauResult(value)


def kendall_tau_by_id(
    scores_a: list[DomainScore], scores_b: list[DomainScore]
) -> TauResult:
    """Align two score lists by utterance id, then compute tau-b."""
    if len(scores_a) != len(scores_b):
        raise ArgumentError(
            f"rank length mismatch: {len(scores_a)} != {len(scores_b)}"
        )
    by_id = {s.utterance_id: s.score for s in scores_b}
    if len(by_id) != len(scores_b):
        raise ValidationError("duplicate utterance ids in second ranking")
    try:
        paired = [(s.score, by_id[s.utterance_id]) for s in scores_a]
    except KeyError as exc:
        raise ArgumentError(f"utterance {exc.args[0]!r} missing from second ranking") from None
    return kendall_tau([p[0] for p in paired], [p[1] for p in paired])


# ---------------------------------------------------------------------------
# score / selection files
# ---------------------------------------------------------------------------


def write_scores(scores: list[DomainScore], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in scores:
            fh.write(
                json.dumps(
                    {
                        "utterance_id": s.utterance_id,
                        "score": s.score,
                        "len": s.len,
                        "logp_target": s.logp_target,
                        "logp_general": s.logp_general,
                    }
                )
                + "\n"
            )


def read_scores(path: str | Path) -> list[DomainScore]:
    out: list[DomainScore] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                out.append(
                    DomainScore(
                        utterance_id=str(rec["utterance_id"]),
                        score=float(rec["score"]),
                        len=int(rec["len"]),
                        logp_target=float(rec["logp_target"]),
                        logp_general=float(rec["logp_general"]),
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise FormatError(f"bad score record ({exc})", line=lineno) from exc
    return out


def write_selection(
    manifest: SelectionManifest,
    path: str | Path,
    utterances: dict | None = None,
) -> None:
    """Write the ranked entries as a corpus manifest plus score/selected.

    When ``utterances`` (id -> Utterance) is given, audio/token paths and
    domain tags pass through, so filtering the file by ``selected`` yields a
    ready-to-use manifest for the chosen subset.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for e in manifest.entries:
            rec: dict = {"id": e.utterance_id}
            src = utterances.get(e.utterance_id) if utterances else None
            if src is not None:
                if src.audio_path is not None:
                    rec["audio_path"] = src.audio_path
                if src.token_path is not None:
                    rec["token_path"] = src.token_path
            rec["duration_s"] = e.duration_s
            if src is not None and src.domain_tag is not None:
                rec["domain_tag"] = src.domain_tag
            rec["score"] = e.score
            rec["selected"] = e.selected
            fh.write(json.dumps(rec) + "\n")


def selection_summary(manifest: SelectionManifest) -> str:
    lines = [
        f"pool_utterances\t{len(manifest.entries)}",
        f"pool_hours\t{manifest.pool_hours:.6f}",
        f"selected_utterances\t{len(manifest.selected_ids)}",
        f"selected_hours\t{manifest.selected_hours:.6f}",
        f"budget\t{manifest.budget.kind}={manifest.budget.value}",
        f"threshold_score\t{'' if manifest.threshold_score is None else format(manifest.threshold_score, '.9g')}",
    ]
    for w in manifest.warnings:
        lines.append(f"warning\t{w}")
    return "\n".join(lines) + "\n"


def score_histogram(scores: list[DomainScore], n_bins: int = 50) -> str:
    """CSV histogram of score values (bin_lo,bin_hi,count), for plotting."""
    if not scores:
        raise ArgumentError("cannot histogram an empty score list")
    values = np.array([s.score for s in scores])
    counts, edges = np.histogram(values, bins=n_bins)
    lines = ["bin_lo,bin_hi,count"]
    for i, c in enumerate(counts):
        lines.append(f"{edges[i]:.9g},{edges[i + 1]:.9g},{int(c)}")
    return "\n".join(lines) + "\n"
