"""Command-line interface: one executable, one subcommand per pipeline stage.

Every run writes a provenance record (tool version, config hash, seed, input
digests, output names) beside its outputs, with no timestamps, so identical
configs and inputs produce byte-identical artifacts. The ``pipeline``
subcommand chains stages and skips any stage whose existing provenance
already matches.

Exit codes: 0 success, 2 usage/validation error, 1 runtime error. Failures
additionally print a single machine-readable JSON line to stderr.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import json
import multiprocessing
import os
import sys
from pathlib import Path

from . import __version__, arpa, frontend, ngram, quantizer, selector, synthbench
from .corpus import TokenSequence, read_manifest, read_tokens, read_wav, write_tokens
from .errors import (
    ArgumentError,
    ConfigError,
    FormatError,
    TokselectError,
    ValidationError,
)

CONFIG_ENV_VAR = "TOKSELECT_CONFIG"

USAGE_EXIT = 2
RUNTIME_EXIT = 1

_USAGE_ERRORS = (ArgumentError, ValidationError, FormatError, ConfigError, FileNotFoundError)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # make flag errors catchable and machine-readable
        raise _UsageError(message)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

_PATH_KEYS = ("target_manifest", "general_manifest", "pool_manifest", "workdir")

DEFAULT_CONFIG: dict = {
    "seed": 0,
    "frontend": {
        "n_mels": 80,
        "window_s": 0.025,
        "shift_s": 0.010,
        "n_fft": 512,
        "fmin_hz": 125.0,
        "fmax_hz": 7600.0,
        "preemphasis": 0.97,
        "energy_floor": 1e-10,
        "per_utt_norm": False,
    },
    "quantizer": {
        "vocab_size": 1024,
        "max_iters": 50,
        "tolerance": 1e-4,
        "collapse_repeats": False,
        "max_frames": 1_000_000,
    },
    "lm": {"order": 5},
    "selection": {"budget_fraction": 0.06, "closest": False},
    "segmentation": {"max_segment_s": 32.0},
    "paths": {key: "" for key in _PATH_KEYS},
}

_SCHEMA_TYPES = {
    ("seed",): int,
    ("frontend", "n_mels"): int,
    ("frontend", "window_s"): float,
    ("frontend", "shift_s"): float,
    ("frontend", "n_fft"): int,
    ("frontend", "fmin_hz"): float,
    ("frontend", "fmax_hz"): float,
    ("frontend", "preemphasis"): float,
    ("frontend", "energy_floor"): float,
    ("frontend", "per_utt_norm"): bool,
    ("quantizer", "vocab_size"): int,
    ("quantizer", "max_iters"): int,
    ("quantizer", "tolerance"): float,
    ("quantizer", "collapse_repeats"): bool,
    ("quantizer", "max_frames"): int,
    ("lm", "order"): int,
    ("selection", "budget_fraction"): float,
    ("selection", "closest"): bool,
    ("segmentation", "max_segment_s"): float,
}


def _merge(base: dict, override: dict, crumb: str = "") -> dict:
    out = dict(base)
    for key, value in override.items():
        where = f"{crumb}.{key}" if crumb else key
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {where!r} must be an object")
            out[key] = _merge(base[key], value, where)
        else:
            out[key] = value
    return out


def _check_types(cfg: dict) -> None:
    for crumbs, expected in _SCHEMA_TYPES.items():
        node = cfg
        for c in crumbs:
            node = node[c]
        name = ".".join(crumbs)
        if expected is float:
            if isinstance(node, bool) or not isinstance(node, (int, float)):
                raise ConfigError(f"config key {name!r} must be a number, got {node!r}")
        elif expected is int:
            if isinstance(node, bool) or not isinstance(node, int):
                raise ConfigError(f"config key {name!r} must be an integer, got {node!r}")
        elif not isinstance(node, expected):
            raise ConfigError(f"config key {name!r} must be {expected.__name__}, got {node!r}")
    for key, value in cfg["paths"].items():
        if key not in _PATH_KEYS:
            raise ConfigError(f"unknown config key paths.{key!r}")
        if not isinstance(value, str):
            raise ConfigError(f"config key paths.{key!r} must be a string")


def load_config(path: str | None, check_paths: bool = False) -> dict:
    """Defaults, overridden by a JSON config file when given (or via env var)."""
    if path is None:
        path = os.environ.get(CONFIG_ENV_VAR)
    cfg = DEFAULT_CONFIG
    if path:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                user = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path}: invalid JSON ({exc})") from None
        if not isinstance(user, dict):
            raise ConfigError(f"config file {path}: top level must be an object")
        cfg = _merge(DEFAULT_CONFIG, user)
    _check_types(cfg)
    if check_paths:
        for key in ("target_manifest", "general_manifest", "pool_manifest"):
            value = cfg["paths"].get(key)
            if value and not Path(value).exists():
                raise ConfigError(f"paths.{key} does not exist: {value}")
    return cfg


def _frontend_config(cfg: dict) -> frontend.FrontendConfig:
    f = cfg["frontend"]
    return frontend.FrontendConfig(
        n_mels=f["n_mels"],
        window_s=f["window_s"],
        shift_s=f["shift_s"],
        n_fft=f["n_fft"],
        fmin_hz=f["fmin_hz"],
        fmax_hz=f["fmax_hz"],
        preemphasis=f["preemphasis"],
        energy_floor=f["energy_floor"],
        per_utt_norm=f["per_utt_norm"],
    )


# ---------------------------------------------------------------------------
# provenance
# ---------------------------------------------------------------------------


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: dict, extra: dict | None = None) -> str:
    payload = {"config": cfg, "extra": extra or {}}
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


def _digest_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def digest_inputs(paths: list[str | Path]) -> dict[str, str]:
    out: dict[str, str] = {}
    for p in paths:
        p = Path(p)
        if p.is_dir():
            h = hashlib.sha256()
            for child in sorted(p.iterdir()):
                if child.name.endswith(".provenance.json") or child.name == "provenance.json":
                    continue
                h.update(child.name.encode("utf-8"))
                h.update(bytes.fromhex(_digest_file(child)))
            out[str(p)] = h.hexdigest()
        else:
            out[str(p)] = _digest_file(p)
    return out


def provenance_record(subcommand: str, cfg_hash: str, seed, inputs, outputs) -> dict:
    return {
        "tool": "tokselect",
        "version": __version__,
        "subcommand": subcommand,
        "config_hash": cfg_hash,
        "seed": seed,
        "inputs": inputs,
        "outputs": sorted(str(o) for o in outputs),
    }


def provenance_path(primary_output: Path) -> Path:
    if primary_output.is_dir():
        return primary_output / "provenance.json"
    return primary_output.parent / (primary_output.name + ".provenance.json")


def write_provenance(record: dict, primary_output: Path) -> Path:
    path = provenance_path(primary_output)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(record, indent=2, sort_keys=True) + "\n")
    return path


def provenance_matches(record: dict, primary_output: Path) -> bool:
    path = provenance_path(primary_output)
    if not path.exists():
        return False
    try:
        with open(path, "r", encoding="utf-8") as fh:
            existing = json.load(fh)
    except (OSError, json.JSONDecodeError):
        return False
    if existing != record:
        return False
    return all(Path(out).exists() for out in record["outputs"])


# ---------------------------------------------------------------------------
# parallel helpers
# ---------------------------------------------------------------------------


def _run_parallel(fn, items, jobs: int):
    """Map fn over items; results come back in input order regardless of jobs."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    ctx = multiprocessing.get_context("fork")
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs, mp_context=ctx) as ex:
        return list(ex.map(fn, items, chunksize=max(1, len(items) // (jobs * 4) or 1)))


_WORKER_MODELS: dict[str, ngram.NgramModel] = {}


def _load_model_cached(path: str) -> ngram.NgramModel:
    model = _WORKER_MODELS.get(path)
    if model is None:
        model = arpa.read_arpa(path)
        _WORKER_MODELS[path] = model
    return model


def _featurize_one(item) -> str:
    utt_id, audio_path, out_path, fcfg = item
    samples = read_wav(audio_path)
    mat = frontend.logmel(samples, fcfg, utterance_id=utt_id)
    frontend.write_features(mat, out_path)
    return utt_id


def _quantize_one(item) -> TokenSequence:
    utt_id, feat_path, codebook_path, collapse = item
    codebook = _load_codebook_cached(codebook_path)
    mat = frontend.read_features(feat_path)
    return quantizer.quantize(mat.frames, codebook, collapse, utterance_id=utt_id)


_WORKER_CODEBOOKS: dict[str, quantizer.Codebook] = {}


def _load_codebook_cached(path: str) -> quantizer.Codebook:
    cb = _WORKER_CODEBOOKS.get(path)
    if cb is None:
        cb = quantizer.read_codebook(path)
        _WORKER_CODEBOOKS[path] = cb
    return cb


def _score_one(item) -> selector.DomainScore:
    seq, target_path, general_path = item
    target = _load_model_cached(target_path)
    general = _load_model_cached(general_path)
    return selector.score(seq, target, general)


# ---------------------------------------------------------------------------
# stage implementations (shared by subcommands and `pipeline`)
# ---------------------------------------------------------------------------


def stage_featurize(manifest_path: str, out_dir: str, cfg: dict, jobs: int, force: bool = False) -> bool:
    utts = read_manifest(manifest_path)
    fcfg = _frontend_config(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    items = []
    for utt in utts:
        if utt.audio_path is None:
            raise ValidationError(f"utterance {utt.id!r} has no audio_path; cannot featurize")
        items.append((utt.id, utt.audio_path, str(out / f"{utt.id}.feat"), fcfg))
    cfg_hash = config_hash(cfg["frontend"])
    inputs = digest_inputs([manifest_path] + [utt.audio_path for utt in utts])
    record = provenance_record(
        "featurize", cfg_hash, None, inputs, [str(out / f"{u.id}.feat") for u in utts]
    )
    if not force and provenance_matches(record, out):
        return False
    _run_parallel(_featurize_one, items, jobs)
    write_provenance(record, out)
    return True


def stage_train_quantizer(
    manifest_path: str, features_dir: str, out_path: str, cfg: dict, force: bool = False
) -> bool:
    utts = read_manifest(manifest_path)
    qcfg = cfg["quantizer"]
    out = Path(out_path)
    feat_paths = [Path(features_dir) / f"{u.id}.feat" for u in utts]
    cfg_hash = config_hash(cfg["quantizer"], {"seed": cfg["seed"]})
    inputs = digest_inputs([manifest_path] + feat_paths)
    record = provenance_record("train-quantizer", cfg_hash, cfg["seed"], inputs, [str(out)])
    if not force and provenance_matches(record, out):
        return False
    frames = quantizer.sample_frames(
        (frontend.read_features(p).frames for p in feat_paths),
        cap=qcfg["max_frames"],
        seed=cfg["seed"],
    )
    codebook = quantizer.train_codebook(
        frames,
        quantizer.QuantizerConfig(
            vocab_size=qcfg["vocab_size"],
            max_iters=qcfg["max_iters"],
            tolerance=qcfg["tolerance"],
            seed=cfg["seed"],
        ),
    )
    quantizer.write_codebook(codebook, out)
    write_provenance(record, out)
    return True


def stage_quantize(
    manifest_path: str,
    features_dir: str,
    codebook_path: str,
    out_path: str,
    cfg: dict,
    jobs: int,
    force: bool = False,
) -> bool:
    utts = read_manifest(manifest_path)
    collapse = cfg["quantizer"]["collapse_repeats"]
    out = Path(out_path)
    feat_paths = [str(Path(features_dir) / f"{u.id}.feat") for u in utts]
    cfg_hash = config_hash({"collapse_repeats": collapse})
    inputs = digest_inputs([manifest_path, codebook_path] + feat_paths)
    record = provenance_record("quantize", cfg_hash, None, inputs, [str(out)])
    if not force and provenance_matches(record, out):
        return False
    items = [(u.id, fp, codebook_path, collapse) for u, fp in zip(utts, feat_paths)]
    sequences = _run_parallel(_quantize_one, items, jobs)
    codebook = _load_codebook_cached(codebook_path)
    write_tokens(sequences, codebook.vocab_size, out)
    write_provenance(record, out)
    return True


def stage_train_lm(tokens_path: str, out_path: str, order: int, force: bool = False) -> tuple[bool, list[str]]:
    out = Path(out_path)
    cfg_hash = config_hash({"order": order})
    inputs = digest_inputs([tokens_path])
    record = provenance_record("train-lm", cfg_hash, None, inputs, [str(out)])
    if not force and provenance_matches(record, out):
        return False, []
    sequences, vocab_size = read_tokens(tokens_path)
    model = ngram.train(sequences, order, vocab_size)
    arpa.write_arpa(model, out)
    write_provenance(record, out)
    return True, model.warnings


def stage_score(
    tokens_path: str,
    target_lm: str,
    general_lm: str,
    out_path: str,
    jobs: int,
    force: bool = False,
) -> bool:
    out = Path(out_path)
    cfg_hash = config_hash({})
    inputs = digest_inputs([tokens_path, target_lm, general_lm])
    record = provenance_record("score", cfg_hash, None, inputs, [str(out)])
    if not force and provenance_matches(record, out):
        return False
    sequences, _ = read_tokens(tokens_path)
    items = [(seq, target_lm, general_lm) for seq in sequences]
    scores = _run_parallel(_score_one, items, jobs)
    selector.write_scores(scores, out)
    write_provenance(record, out)
    return True


def stage_select(
    scores_path: str,
    manifest_path: str,
    out_path: str,
    budget: selector.BudgetSpec,
    closest: bool,
    histogram_path: str | None = None,
    force: bool = False,
) -> tuple[bool, str]:
    out = Path(out_path)
    cfg_hash = config_hash({"budget": [budget.kind, budget.value], "closest": closest})
    inputs = digest_inputs([scores_path, manifest_path])
    outputs = [str(out), str(out) + ".summary.txt"]
    if histogram_path:
        outputs.append(str(histogram_path))
    record = provenance_record("select", cfg_hash, None, inputs, outputs)
    summary_path = Path(str(out) + ".summary.txt")
    if not force and provenance_matches(record, out):
        return False, summary_path.read_text(encoding="utf-8")
    scores = selector.read_scores(scores_path)
    utts = read_manifest(manifest_path)
    durations = {u.id: u.duration_s for u in utts}
    manifest = selector.select(scores, durations, budget, closest=closest)
    selector.write_selection(manifest, out, utterances={u.id: u for u in utts})
    summary = selector.selection_summary(manifest)
    summary_path.write_text(summary, encoding="utf-8")
    if histogram_path:
        Path(histogram_path).write_text(selector.score_histogram(scores), encoding="utf-8")
    write_provenance(record, out)
    return True, summary


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------


def _cmd_validate_config(args) -> int:
    load_config(args.config, check_paths=True)
    print("ok")
    return 0


def _cmd_featurize(args) -> int:
    cfg = load_config(args.config)
    ran = stage_featurize(args.manifest, args.out_dir, cfg, args.jobs, force=args.force)
    print(f"featurize: {'done' if ran else 'skipped (provenance matches)'}")
    return 0


def _cmd_train_quantizer(args) -> int:
    cfg = load_config(args.config)
    if args.vocab_size is not None:
        cfg["quantizer"]["vocab_size"] = args.vocab_size
    if args.seed is not None:
        cfg["seed"] = args.seed
    ran = stage_train_quantizer(args.manifest, args.features, args.out, cfg, force=args.force)
    print(f"train-quantizer: {'done' if ran else 'skipped (provenance matches)'}")
    return 0


def _cmd_quantize(args) -> int:
    cfg = load_config(args.config)
    if args.collapse_repeats:
        cfg["quantizer"]["collapse_repeats"] = True
    ran = stage_quantize(
        args.manifest, args.features, args.codebook, args.out, cfg, args.jobs, force=args.force
    )
    print(f"quantize: {'done' if ran else 'skipped (provenance matches)'}")
    return 0


def _cmd_train_lm(args) -> int:
    cfg = load_config(args.config)
    order = args.order if args.order is not None else cfg["lm"]["order"]
    ran, warnings = stage_train_lm(args.tokens, args.out, order, force=args.force)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"train-lm: {'done' if ran else 'skipped (provenance matches)'}")
    return 0


def _cmd_score(args) -> int:
    ran = stage_score(
        args.tokens, args.target_lm, args.general_lm, args.out, args.jobs, force=args.force
    )
    print(f"score: {'done' if ran else 'skipped (provenance matches)'}")
    return 0


def _budget_from_args(args, cfg) -> selector.BudgetSpec:
    chosen = [
        name
        for name, value in (
            ("fraction", args.budget_fraction),
            ("hours", args.budget_hours),
            ("top_k", args.top_k),
            ("score_threshold", args.score_threshold),
        )
        if value is not None
    ]
    if len(chosen) > 1:
        raise ArgumentError(f"choose exactly one budget flag, got {chosen}")
    if not chosen:
        return selector.BudgetSpec("fraction", cfg["selection"]["budget_fraction"])
    kind = chosen[0]
    value = {
        "fraction": args.budget_fraction,
        "hours": args.budget_hours,
        "top_k": args.top_k,
        "score_threshold": args.score_threshold,
    }[kind]
    return selector.BudgetSpec(kind, float(value))


def _cmd_select(args) -> int:
    cfg = load_config(args.config)
    budget = _budget_from_args(args, cfg)
    closest = args.closest or cfg["selection"]["closest"]
    ran, summary = stage_select(
        args.scores, args.manifest, args.out, budget, closest, args.histogram, force=args.force
    )
    sys.stdout.write(summary)
    print(f"select: {'done' if ran else 'skipped (provenance matches)'}")
    return 0


def _cmd_tau(args) -> int:
    scores_a = selector.read_scores(args.scores_a)
    scores_b = selector.read_scores(args.scores_b)
    result = selector.kendall_tau_by_id(scores_a, scores_b)
    if result.defined:
        print(f"tau\t{result.value:.12f}")
    else:
        print("tau\tundefined")
    return 0


_BENCH_FIELDS = {f.name for f in synthbench.BenchConfig.__dataclass_fields__.values()}


def _bench_config_from_dict(raw: dict, crumb: str) -> synthbench.BenchConfig:
    unknown = set(raw) - _BENCH_FIELDS
    if unknown:
        raise ConfigError(f"unknown {crumb} key(s): {sorted(unknown)}")
    if "len_range" in raw:
        raw = dict(raw)
        raw["len_range"] = tuple(raw["len_range"])
    try:
        cfg = synthbench.BenchConfig(**raw)
    except TypeError as exc:
        raise ConfigError(f"bad {crumb}: {exc}") from None
    cfg.validate()
    return cfg


def _cmd_synth_bench(args) -> int:
    if args.config is None:
        raise ConfigError("synth-bench requires --config with a benchmark description")
    with open(args.config, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ConfigError("benchmark config must be a JSON object")
    variant_raw = raw.pop("variant", None)
    cfg = _bench_config_from_dict(raw, "benchmark config")
    variant = None
    if variant_raw is not None:
        merged = dict(raw)
        merged.update(variant_raw)
        variant = _bench_config_from_dict(merged, "variant config")
    report = synthbench.run_benchmark(cfg, variant)

    out = Path(args.out)
    out.write_text(report.to_json(), encoding="utf-8")
    outputs = [str(out)]
    if args.per_utterance_csv:
        Path(args.per_utterance_csv).write_text(report.per_utterance_csv(), encoding="utf-8")
        outputs.append(args.per_utterance_csv)
    record = provenance_record(
        "synth-bench",
        config_hash({"bench": raw, "variant": variant_raw}),
        cfg.seed,
        digest_inputs([args.config]),
        outputs,
    )
    write_provenance(record, out)
    print(
        f"precision_at_budget\t{report.precision_at_budget:.6f}\n"
        f"recall_at_budget\t{report.recall_at_budget:.6f}"
    )
    if report.tau_between_configs is not None:
        print(f"tau_between_configs\t{report.tau_between_configs:.6f}")
    return 0


def _cmd_pipeline(args) -> int:
    cfg = load_config(args.config, check_paths=True)
    paths = cfg["paths"]
    for key in _PATH_KEYS:
        if not paths.get(key):
            raise ConfigError(f"pipeline requires paths.{key} in the config")
    work = Path(paths["workdir"])
    work.mkdir(parents=True, exist_ok=True)
    jobs = args.jobs

    def announce(stage: str, ran: bool) -> None:
        print(f"{stage}: {'done' if ran else 'skipped (provenance matches)'}")

    feats = {}
    for name in ("target", "general", "pool"):
        feats[name] = work / f"feats_{name}"
        ran = stage_featurize(paths[f"{name}_manifest"], str(feats[name]), cfg, jobs)
        announce(f"featurize[{name}]", ran)

    codebook_path = work / "codebook.bin"
    ran = stage_train_quantizer(
        paths["general_manifest"], str(feats["general"]), str(codebook_path), cfg
    )
    announce("train-quantizer", ran)

    tokens = {}
    for name in ("target", "general", "pool"):
        tokens[name] = work / f"{name}.tokens"
        ran = stage_quantize(
            paths[f"{name}_manifest"], str(feats[name]), str(codebook_path), str(tokens[name]), cfg, jobs
        )
        announce(f"quantize[{name}]", ran)

    lms = {}
    for name in ("target", "general"):
        lms[name] = work / f"{name}.arpa"
        ran, warnings = stage_train_lm(str(tokens[name]), str(lms[name]), cfg["lm"]["order"])
        for w in warnings:
            print(f"warning: {w}", file=sys.stderr)
        announce(f"train-lm[{name}]", ran)

    scores_path = work / "scores.jsonl"
    ran = stage_score(str(tokens["pool"]), str(lms["target"]), str(lms["general"]), str(scores_path), jobs)
    announce("score", ran)

    selection_path = work / "selection.jsonl"
    budget = selector.BudgetSpec("fraction", cfg["selection"]["budget_fraction"])
    ran, summary = stage_select(
        str(scores_path), paths["pool_manifest"], str(selection_path), budget, cfg["selection"]["closest"]
    )
    announce("select", ran)
    sys.stdout.write(summary)
    return 0


# ---------------------------------------------------------------------------
# parser wiring
# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="tokselect", description=__doc__)
    parser.add_argument("--version", action="version", version=f"tokselect {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str, handler):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(handler=handler)
        p.add_argument("--config", default=None, help=f"JSON config file (default: ${CONFIG_ENV_VAR})")
        p.add_argument("--force", action="store_true", help="re-run even if provenance matches")
        return p

    p = add("validate-config", "check a config file against the schema", _cmd_validate_config)

    p = add("featurize", "compute log-mel features for a manifest", _cmd_featurize)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--jobs", type=int, default=1)

    p = add("train-quantizer", "learn a k-means codebook over features", _cmd_train_quantizer)
    p.add_argument("--manifest", required=True)
    p.add_argument("--features", required=True, help="directory written by featurize")
    p.add_argument("--out", required=True)
    p.add_argument("--vocab-size", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)

    p = add("quantize", "map features to token sequences", _cmd_quantize)
    p.add_argument("--manifest", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--codebook", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--collapse-repeats", action="store_true")
    p.add_argument("--jobs", type=int, default=1)

    p = add("train-lm", "count n-grams and estimate a Kneser-Ney model", _cmd_train_lm)
    p.add_argument("--tokens", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--order", type=int, default=None)

    p = add("score", "contrastive-score a token file with two LMs", _cmd_score)
    p.add_argument("--tokens", required=True)
    p.add_argument("--target-lm", required=True)
    p.add_argument("--general-lm", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)

    p = add("select", "rank scores and select a budgeted subset", _cmd_select)
    p.add_argument("--scores", required=True)
    p.add_argument("--manifest", required=True, help="manifest providing durations")
    p.add_argument("--out", required=True)
    p.add_argument("--budget-fraction", type=float, default=None)
    p.add_argument("--budget-hours", type=float, default=None)
    p.add_argument("--top-k", type=int, default=None)
    p.add_argument("--score-threshold", type=float, default=None)
    p.add_argument("--closest", action="store_true", help="allow one overshoot item if closer to budget")
    p.add_argument("--histogram", default=None, help="optional CSV score histogram path")

    p = add("tau", "Kendall tau-b between two score files", _cmd_tau)
    p.add_argument("--scores-a", required=True)
    p.add_argument("--scores-b", required=True)

    p = add("synth-bench", "run the synthetic two-domain benchmark", _cmd_synth_bench)
    p.add_argument("--out", required=True)
    p.add_argument("--per-utterance-csv", default=None)

    p = add("pipeline", "chain featurize -> ... -> select from one config", _cmd_pipeline)
    p.add_argument("--jobs", type=int, default=1)

    return parser


def _fail(kind: str, exc: BaseException) -> None:
    message = {"error": {"kind": kind, "type": type(exc).__name__, "message": str(exc)}}
    print(json.dumps(message), file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        _fail("usage", exc)
        return USAGE_EXIT
    try:
        return args.handler(args)
    except _USAGE_ERRORS as exc:
        _fail("usage", exc)
        return USAGE_EXIT
    except TokselectError as exc:
        _fail("runtime", exc)
        return RUNTIME_EXIT
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        _fail("runtime", exc)
        return RUNTIME_EXIT


if __name__ == "__main__":
    sys.exit(main())
