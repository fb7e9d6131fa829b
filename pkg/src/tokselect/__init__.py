"""Corpus curation by contrastive scoring of discrete speech tokens.

The pipeline: segment audio, extract log-mel features, quantize frames with
a learned codebook, train back-off n-gram LMs on target and general token
corpora, score each pool utterance by the per-token log-likelihood ratio,
and select the top of the ranking under an hours or top-K budget.
"""

__version__ = "0.1.0"

from .corpus import TokenSequence, Utterance, read_manifest, read_tokens, write_manifest, write_tokens
from .frontend import FeatureFrameMatrix, FrontendConfig, logmel
from .ngram import NgramCounts, NgramModel, count, estimate, train
from .quantizer import Codebook, QuantizerConfig, quantize, train_codebook
from .selector import BudgetSpec, DomainScore, SelectionManifest, kendall_tau, score, select
from .synthbench import BenchConfig, BenchReport, MarkovSource, run_benchmark, sample_corpus

__all__ = [
    "__version__",
    "BenchConfig",
    "BenchReport",
    "BudgetSpec",
    "Codebook",
    "DomainScore",
    "FeatureFrameMatrix",
    "FrontendConfig",
    "MarkovSource",
    "NgramCounts",
    "NgramModel",
    "QuantizerConfig",
    "SelectionManifest",
    "TokenSequence",
    "Utterance",
    "count",
    "estimate",
    "kendall_tau",
    "logmel",
    "quantize",
    "read_manifest",
    "read_tokens",
    "run_benchmark",
    "sample_corpus",
    "score",
    "select",
    "train",
    "train_codebook",
    "write_manifest",
    "write_tokens",
]
