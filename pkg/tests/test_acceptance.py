"""Acceptance suite: one test per exit criterion, one printed line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
report. Tolerances are pinned here and nowhere else.
"""

import json
import math
import random
import subprocess
import sys
from dataclasses import replace

import numpy as np

from tokselect import arpa, frontend, ngram, quantizer, selector, synthbench
from tokselect.corpus import TokenSequence, Utterance, write_manifest, write_wav
from tokselect.selector import BudgetSpec, DomainScore

import oracles


def _report(criterion: str, detail: str) -> None:
    print(f"[PASS] {criterion}: {detail}")


class TestAcceptance:
    def test_c01_kneser_ney_oracle_equivalence(self):
        """100+ randomized corpora match the direct Chen-Goodman formulas at 1e-9."""
        rng = random.Random(20260808)
        checked = 0
        worst = 0.0
        for trial in range(100):
            vocab = rng.randint(2, 16)
            order = rng.randint(1, 3)
            corpus = [
                [rng.randrange(vocab) for _ in range(rng.randint(1, 12))]
                for _ in range(rng.randint(1, 50))
            ]
            model = ngram.train(corpus, order, vocab)
            ref_probs, ref_bows = oracles.kn_reference(corpus, vocab, order)
            assert set(model.probs) == set(ref_probs)
            assert set(model.bows) == set(ref_bows)
            for gram, logp in model.probs.items():
                diff = abs(logp - math.log10(ref_probs[gram]))
                worst = max(worst, diff)
                assert diff <= 1e-9, (trial, gram)
            for ctx, bow in model.bows.items():
                diff = abs(bow - math.log10(ref_bows[ctx]))
                worst = max(worst, diff)
                assert diff <= 1e-9, (trial, ctx)
            checked += len(model.probs) + len(model.bows)
        _report(
            "criterion 1 (KN oracle equivalence)",
            f"100 corpora, {checked} stored values, worst |Δlog10| = {worst:.2e} <= 1e-9",
        )

    def test_c02_normalization_vocab64_order5(self):
        """Back-off-completed probabilities sum to 1 +/- 1e-6 for every context."""
        rng = np.random.default_rng(123)
        src = synthbench.peaked_source(64, rng, peak=0.6)
        seqs = [src.sample(int(rng.integers(20, 41)), rng) for _ in range(1000)]
        model = ngram.train(seqs, 5, 64)
        events = model.events()
        worst = 0.0
        contexts = model.stored_contexts()
        for ctx in contexts:
            total = math.fsum(10 ** model.cond_logprob10(w, ctx) for w in events)
            worst = max(worst, abs(total - 1.0))
            assert abs(total - 1.0) <= 1e-6, ctx
        _report(
            "criterion 2 (LM normalization)",
            f"1000 utterances, vocab 64, order 5: {len(contexts)} contexts, "
            f"worst |sum-1| = {worst:.2e} <= 1e-6",
        )

    def test_c03_arpa_round_trip_queries(self, tmp_path):
        """write -> read -> query agrees within 1e-6 nat/token on 1000 queries."""
        rng = random.Random(7)
        corpus = [
            [rng.randrange(32) for _ in range(rng.randint(3, 40))] for _ in range(300)
        ]
        model = ngram.train(corpus, 4, 32)
        path = tmp_path / "model.arpa"
        arpa.write_arpa(model, path)
        back = arpa.read_arpa(path)
        worst = 0.0
        for _ in range(1000):
            query = [rng.randrange(32) for _ in range(rng.randint(1, 30))]
            a = model.logprob(query) / len(query)
            b = back.logprob(query) / len(query)
            worst = max(worst, abs(a - b))
            assert abs(a - b) <= 1e-6
        _report(
            "criterion 3 (ARPA round-trip)",
            f"1000 random queries, worst per-token drift = {worst:.2e} <= 1e-6",
        )

    def test_c04_score_formula(self):
        """Zero for identical models, exact negation on swap, analytic ln 2 case."""
        rng = random.Random(9)
        corpus_a = [[rng.randrange(8) for _ in range(12)] for _ in range(60)]
        corpus_b = [[rng.randrange(8) for _ in range(12)] for _ in range(60)]
        m_a = ngram.train(corpus_a, 3, 8)
        m_b = ngram.train(corpus_b, 3, 8)
        for i in range(50):
            toks = [rng.randrange(8) for _ in range(rng.randint(1, 40))]
            q = TokenSequence(f"u{i}", np.array(toks, dtype=np.int32))
            assert selector.score(q, m_a, m_a).score == 0.0
            assert selector.score(q, m_b, m_b).score == 0.0
            fwd = selector.score(q, m_a, m_b).score
            rev = selector.score(q, m_b, m_a).score
            assert rev == -fwd

        logp_half = math.log10(0.5)
        logp_quarter = math.log10(0.25)
        eos = ngram.eos_id(4)
        target = ngram.NgramModel(
            1, 4, {(w,): logp_half for w in [0, 1, 2, 3, eos]}, {}
        )
        general = ngram.NgramModel(
            1, 4, {(w,): logp_quarter for w in [0, 1, 2, 3, eos]}, {}
        )
        worst = 0.0
        for length in (1, 3, 10, 50):
            q = TokenSequence("u", np.array([rng.randrange(4) for _ in range(length)], dtype=np.int32))
            got = selector.score(q, target, general).score
            worst = max(worst, abs(got - math.log(2.0)))
            assert abs(got - math.log(2.0)) <= 1e-12
        _report(
            "criterion 4 (score formula)",
            f"identity zero + exact negation on 50 sequences; ln2 case off by {worst:.2e} <= 1e-12",
        )

    def test_c05_budget_selection_operating_point(self):
        """6% of a 1000 h pool: <= 60 h selected, >= 60 h minus longest utterance."""
        rng = np.random.default_rng(11)
        n = 2000
        hours = rng.uniform(0.1, 1.2, size=n)
        hours *= 1000.0 / hours.sum()
        scores = [
            DomainScore(f"u{i:05d}", float(rng.normal()), 100, -1.0, -2.0) for i in range(n)
        ]
        durations = {s.utterance_id: float(h * 3600.0) for s, h in zip(scores, hours)}
        manifest = selector.select(scores, durations, BudgetSpec("fraction", 0.06))
        budget_h = 60.0
        assert manifest.selected_hours <= budget_h + 1e-9
        assert manifest.selected_hours >= budget_h - float(hours.max()) - 1e-9
        _report(
            "criterion 5 (selection operating point)",
            f"pool 1000.0 h, budget 6%: selected {manifest.selected_hours:.3f} h "
            f"(longest utterance {hours.max():.3f} h)",
        )

    def test_c06_synthetic_separability_and_null(self):
        """Reference config: precision >= 0.9; identical sources within 3 sigma."""
        cfg = synthbench.reference_config()
        rep = synthbench.run_benchmark(cfg)
        assert rep.precision_at_budget >= 0.9

        null_cfg = replace(cfg, source_mode="identical")
        null_rep = synthbench.run_benchmark(null_cfg)
        base = cfg.n_pool_target / (cfg.n_pool_target + cfg.n_pool_general)
        sigma = math.sqrt(base * (1.0 - base) / null_rep.n_selected)
        assert abs(null_rep.precision_at_budget - base) <= 3.0 * sigma
        _report(
            "criterion 6 (synthetic separability)",
            f"precision {rep.precision_at_budget:.3f} >= 0.9; "
            f"null precision {null_rep.precision_at_budget:.3f} within "
            f"{base:.2f} +/- {3 * sigma:.3f}",
        )

    def test_c07_quantizer_insensitivity(self):
        """Codebooks 64 and 512 both reach precision >= 0.8; tau-b reported."""
        cfg = replace(synthbench.reference_config(), emission="frames", codebook_vocab=64)
        rep = synthbench.run_benchmark(cfg, variant=replace(cfg, codebook_vocab=512))
        assert rep.precision_at_budget >= 0.8
        assert rep.variant_precision is not None and rep.variant_precision >= 0.8
        assert rep.tau_between_configs is not None
        _report(
            "criterion 7 (quantizer insensitivity)",
            f"precision@64 = {rep.precision_at_budget:.3f}, "
            f"precision@512 = {rep.variant_precision:.3f} (both >= 0.8), "
            f"tau-b between rankings = {rep.tau_between_configs:.3f}",
        )

    def test_c08_lm_data_insensitivity(self):
        """Halving target-LM training data keeps top-10% Jaccard >= 0.8."""
        cfg = synthbench.reference_config()
        full = synthbench.run_benchmark(cfg)
        half = synthbench.run_benchmark(replace(cfg, n_train_target=cfg.n_train_target // 2))
        overlap = synthbench.jaccard(full.selected_ids, half.selected_ids)
        assert overlap >= 0.8
        _report(
            "criterion 8 (LM-data insensitivity)",
            f"top-10% Jaccard full-vs-half target training = {overlap:.3f} >= 0.8",
        )

    def test_c09_kendall_tau_exactness(self):
        """1000 random 100-element rankings agree with the O(n^2) oracle at 1e-12."""
        rng = np.random.default_rng(13)
        worst = 0.0
        for trial in range(1000):
            a = rng.normal(size=100)
            b = rng.normal(size=100)
            if trial % 4 == 0:  # tie-heavy variants
                a = np.round(a, 1)
            if trial % 4 == 1:
                b = np.round(b, 1)
            got = selector.kendall_tau(a, b).value
            want = oracles.kendall_tau_reference(a.tolist(), b.tolist())
            diff = abs(got - want)
            worst = max(worst, diff)
            assert diff <= 1e-12, trial
        _report(
            "criterion 9 (Kendall tau exactness)",
            f"1000 rankings of 100, worst |Δtau| = {worst:.2e} <= 1e-12",
        )

    def test_c10_frontend_fft_and_kmeans(self):
        """FFT vs naive DFT at 1e-6; 98x80 frame geometry; k-means monotone."""
        rng = np.random.default_rng(17)
        worst = 0.0
        for n in (4, 8, 16, 32, 64, 128, 256, 512, 1024):
            x = rng.normal(size=n)
            got = frontend.fft(x, n)
            want = oracles.naive_dft_matrix(x, n)
            rel = np.linalg.norm(got - want) / np.linalg.norm(want)
            worst = max(worst, rel)
            assert rel <= 1e-6, n

        mat = frontend.logmel(0.1 * rng.standard_normal(16000))
        assert mat.frames.shape == (98, 80)

        runs = 0
        for seed in range(6):
            frames = rng.normal(size=(400, 8))
            cb = quantizer.train_codebook(
                frames,
                quantizer.QuantizerConfig(vocab_size=32, seed=seed, tolerance=0.0, max_iters=30),
            )
            hist = cb.distortion_history
            assert all(hist[i + 1] <= hist[i] for i in range(len(hist) - 1)), seed
            runs += 1
        _report(
            "criterion 10 (frontend/FFT/k-means)",
            f"FFT worst rel err {worst:.2e} <= 1e-6 on sizes 4..1024; 1 s -> 98x80 frames; "
            f"distortion monotone over {runs} training runs",
        )

    def test_c11_cli_determinism(self, tmp_path):
        """Same seed, same fixtures: the CLI produces byte-identical outputs."""
        bench_cfg = {
            "vocab_size": 16,
            "order": 2,
            "n_train_target": 40,
            "n_train_general": 40,
            "n_pool_target": 20,
            "n_pool_general": 80,
            "len_range": [30, 40],
            "seed": 20260808,
        }
        cfg_path = tmp_path / "bench.json"
        cfg_path.write_text(json.dumps(bench_cfg))

        def run_cli(*argv):
            proc = subprocess.run(
                [sys.executable, "-m", "tokselect", *argv],
                capture_output=True,
                text=True,
                cwd=tmp_path,
            )
            assert proc.returncode == 0, proc.stderr
            return proc

        snapshots = []
        for _ in range(2):
            out = tmp_path / "report.json"
            csv = tmp_path / "per_utt.csv"
            run_cli("synth-bench", "--config", str(cfg_path), "--out", str(out),
                    "--per-utterance-csv", str(csv), "--force")
            snapshots.append(out.read_bytes() + csv.read_bytes())
        assert snapshots[0] == snapshots[1]

        # stage pipeline on tiny WAV fixtures, rerun from scratch at the same paths
        audio = tmp_path / "audio"
        audio.mkdir()
        rng = np.random.default_rng(3)

        def make_manifest(name, freqs):
            utts = []
            for i, freq in enumerate(freqs):
                t = np.arange(8000) / 16000.0
                wav = 0.4 * np.sin(2 * np.pi * freq * t) + 0.01 * rng.standard_normal(8000)
                path = audio / f"{name}{i}.wav"
                write_wav(wav, path)
                utts.append(Utterance(f"{name}{i}", audio_path=str(path), duration_s=0.5))
            manifest = tmp_path / f"{name}.jsonl"
            write_manifest(utts, manifest)
            return manifest

        target_m = make_manifest("tgt", [300, 320, 340])
        general_m = make_manifest("gen", [1000, 1200, 1400])
        pool_m = make_manifest("pool", [310, 1100, 330, 1300])
        pipe_cfg = {
            "seed": 5,
            "quantizer": {"vocab_size": 8, "max_iters": 10},
            "lm": {"order": 2},
            "selection": {"budget_fraction": 0.5},
            "paths": {
                "target_manifest": str(target_m),
                "general_manifest": str(general_m),
                "pool_manifest": str(pool_m),
                "workdir": str(tmp_path / "work"),
            },
        }
        pipe_path = tmp_path / "pipe.json"
        pipe_path.write_text(json.dumps(pipe_cfg))

        import shutil

        snapshots = []
        for _ in range(2):
            shutil.rmtree(tmp_path / "work", ignore_errors=True)
            run_cli("pipeline", "--config", str(pipe_path))
            blob = b""
            for path in sorted((tmp_path / "work").rglob("*")):
                if path.is_file():
                    blob += path.name.encode() + path.read_bytes()
            snapshots.append(blob)
        assert snapshots[0] == snapshots[1]
        _report(
            "criterion 11 (CLI determinism)",
            "synth-bench and full pipeline byte-identical across same-seed reruns",
        )
