"""Acceptance suite: one test per criterion, each printing a PASS line and
holding its stated tolerance and time budget. Run with `pytest -v` (or -s
for the PASS lines inline)."""

import json
import time
from pathlib import Path

import numpy as np
import pytest

import stemcurate as sc
from stemcurate.audio import SEGMENT_FRAMES, SEGMENT_RATE_HZ, AudioBuffer
from stemcurate.cleaner import clean_track
from stemcurate.cli import main
from stemcurate.crawler import CrawlManifest, LocalDirectoryFetcher, execute_crawl, plan_crawl
from stemcurate.embedding import SpectralBackend
from stemcurate.head import HeadParams, TrainConfig, f1_score, grad_check, train_head
from stemcurate.taxonomy import QueryRecord

from conftest import make_tone
from test_loudness import oracle_lufs_48k


class _Budget:
    def __init__(self, name, seconds):
        self.name = name
        self.seconds = seconds

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, *_):
        elapsed = time.perf_counter() - self.start
        if exc_type is None:
            assert elapsed < self.seconds, f"{self.name} exceeded {self.seconds}s budget"
            print(f"ACCEPTANCE {self.name}: PASS ({elapsed:.2f}s)", flush=True)
        return False


def test_safe_normalization_suite():
    with _Budget("safe-normalization", 1.0):
        rng = np.random.default_rng(0)
        for _ in range(25):
            x = AudioBuffer(rng.normal(0, rng.uniform(0.01, 8.0), (1, 400)), 16000)
            once = sc.safe_normalize(x)
            twice = sc.safe_normalize(once)
            np.testing.assert_allclose(twice.samples, once.samples, rtol=1e-7)
            assert np.abs(once.samples).max() <= 1.0
        zeros = AudioBuffer(np.zeros((1, 64)), 16000)
        np.testing.assert_array_equal(sc.safe_normalize(zeros).samples, 0.0)
        oracle = sc.safe_normalize(AudioBuffer(np.array([[2.0, -4.0]]), 16000))
        np.testing.assert_allclose(oracle.samples, [[0.5, -1.0]], rtol=1e-8)


def test_segment_splice_round_trip():
    with _Budget("segment-splice-round-trip", 5.0):
        rng = np.random.default_rng(1)
        for _ in range(100):
            frames = int(rng.integers(1000, 4 * SEGMENT_FRAMES))
            x = AudioBuffer(rng.normal(0, 0.3, (1, frames)), SEGMENT_RATE_HZ)
            segments = sc.segment(x, "t")
            expected_n = frames // SEGMENT_FRAMES
            assert len(segments) == expected_n
            out = sc.splice(segments, crossfade_ms=0.0)
            assert out.frames == expected_n * SEGMENT_FRAMES
            np.testing.assert_array_equal(
                out.samples, x.samples[:, : expected_n * SEGMENT_FRAMES]
            )


def test_lufs_calibration():
    with _Budget("lufs-calibration", 10.0):
        t = np.arange(5 * 48000) / 48000
        left = np.sin(2 * np.pi * 997.0 * t)
        x = AudioBuffer(np.stack([left, np.zeros_like(left)]), 48000)
        measured = sc.measure_lufs(x)
        assert measured == pytest.approx(-3.01, abs=0.1)
        assert measured == pytest.approx(oracle_lufs_48k(x.samples), abs=0.01)

        tone = make_tone(440, 3.0, 48000, amplitude=0.9)
        base = sc.measure_lufs(tone)
        for g in (0.1, 0.2, 0.5, 1.0):
            scaled = AudioBuffer(g * tone.samples, 48000)
            assert sc.measure_lufs(scaled) - base == pytest.approx(
                20 * np.log10(g), abs=0.1
            )

        normalized = sc.normalize_lufs(make_tone(620, 2.0, 48000, amplitude=0.2), -23.0)
        assert sc.measure_lufs(normalized) == pytest.approx(-23.0, abs=0.1)


def test_augmentation_physics():
    with _Budget("augmentation-physics", 30.0):
        for rt60 in (0.3, 0.6, 1.4):
            ir_in = np.zeros((1, int((2 * rt60 + 1) * SEGMENT_RATE_HZ)))
            ir_in[0, 0] = 1.0
            response = sc.reverb(AudioBuffer(ir_in, SEGMENT_RATE_HZ), rt60, seed=13)
            assert sc.estimate_rt60(response) == pytest.approx(rt60, rel=0.2)

        steady_in = AudioBuffer(np.full((1, SEGMENT_RATE_HZ), 0.9), SEGMENT_RATE_HZ)
        out = sc.compress(steady_in, threshold=0.3, ratio=4.0)
        steady = np.abs(out.samples[0, -1000:]).mean()
        assert steady == pytest.approx(0.3 * 3.0**0.25, rel=0.05)

        tone = make_tone(777, 1.0, SEGMENT_RATE_HZ)
        flat = sc.eq(
            tone,
            [
                sc.effects.EqBand(100.0, 0.0, "low-shelf"),
                sc.effects.EqBand(1000.0, 0.0, "peak"),
                sc.effects.EqBand(6000.0, 0.0, "high-shelf"),
            ],
        )
        assert np.abs(flat.samples - tone.samples).max() < 1e-6


def test_classifier_gradient_check():
    with _Budget("gradient-check", 10.0):
        rng = np.random.default_rng(2)
        for _ in range(20):
            dim = int(rng.choice([8, 16, 32, 64]))
            params = HeadParams.initialize(dim, rng)
            e = rng.normal(size=dim)
            label = int(rng.integers(2))
            assert grad_check(params, e, label) < 1e-4


def test_trainability():
    with _Budget("trainability", 60.0):
        rng = np.random.default_rng(3)
        pos = rng.normal(+1.5, 1.0, size=(200, 16))
        neg = rng.normal(-1.5, 1.0, size=(200, 16))
        dataset = [(v, 1) for v in pos] + [(v, 0) for v in neg]
        order = rng.permutation(len(dataset))
        dataset = [dataset[i] for i in order]

        _, log = train_head(dataset, TrainConfig(seed=3, max_epochs=200))
        assert len(log) <= 200
        assert max(rec["val_accuracy"] for rec in log) >= 0.99

        shuffled = [(v, int(rng.integers(2))) for v, _ in dataset]
        _, log = train_head(shuffled, TrainConfig(seed=4, max_epochs=60))
        assert log[-1]["val_accuracy"] == pytest.approx(0.5, abs=0.1)


def test_metric_formula_matches_reported_cell():
    with _Budget("metric-formula-cross-check", 1.0):
        assert f1_score(0.9750, 0.9832) == pytest.approx(0.9791, abs=0.0001)


class _ScriptedHead:
    def __init__(self, probs):
        self.probs = np.asarray(probs, dtype=np.float64)

    def predict_proba(self, x):
        return self.probs[: len(x)]


def test_threshold_monotonicity(tmp_path):
    with _Budget("threshold-monotonicity", 10.0):
        backend = SpectralBackend()
        path = tmp_path / "track.wav"
        make_tone(440, 30.0, SEGMENT_RATE_HZ, amplitude=0.7).to_wav(path)
        rng = np.random.default_rng(5)
        probs = rng.uniform(0, 1, size=10)
        previous = None
        for threshold in np.linspace(0.02, 0.98, 20):
            _, report = clean_track(
                path, "piano", _ScriptedHead(probs), backend, threshold=float(threshold)
            )
            if previous is not None:
                assert report.output_duration_s <= previous
            previous = report.output_duration_s

        _, report = clean_track(
            path,
            "piano",
            _ScriptedHead([0.9949, 0.995] + [0.0] * 8),
            backend,
            threshold=0.995,
        )
        assert report.kept_indices == [1]  # 0.9949 dropped, 0.995 kept


def test_query_expansion_count():
    with _Budget("query-expansion-count", 1.0):
        for n_languages in (1, 4, 9):
            records = sc.expand_queries(
                sc.STEMS, sc.default_templates(n_languages)
            )
            assert len(records) == 22 * n_languages
        assert len(sc.expand_queries(sc.STEMS, sc.default_templates(9))) == 198


def test_crawl_idempotence_and_dedup(tmp_path):
    with _Budget("crawl-idempotence", 10.0):
        media = tmp_path / "media"
        media.mkdir()
        tone = make_tone(440, 4.0, 48000, amplitude=0.5)
        tone.to_wav(media / "piano_a.wav")
        tone.to_wav(media / "piano_b.wav")  # identical PCM under another name
        make_tone(250, 4.0, 44100).to_wav(media / "piano_c.wav")

        fetcher = LocalDirectoryFetcher(media)
        manifest = plan_crawl([QueryRecord("piano", "en", "piano solo")], fetcher, 10)
        out = tmp_path / "out"
        manifest_path = tmp_path / "manifest.jsonl"

        execute_crawl(manifest, fetcher, out)
        manifest.save(manifest_path)
        counts = manifest.status_counts()
        assert counts["fetched"] == 2
        assert counts["duplicate"] == 1

        first_bytes = manifest_path.read_bytes()
        downloads = fetcher.download_count
        reloaded = CrawlManifest.load(manifest_path)
        execute_crawl(reloaded, fetcher, out)
        reloaded.save(manifest_path)
        assert fetcher.download_count == downloads  # zero new downloads
        assert manifest_path.read_bytes() == first_bytes


def test_sdr_oracle():
    with _Budget("sdr-oracle", 1.0):
        rng = np.random.default_rng(6)
        ref = AudioBuffer(rng.standard_normal((1, 16000)), 16000)
        noise = rng.standard_normal((1, 16000))
        noise *= np.sqrt(np.sum(ref.samples**2) / 100.0 / np.sum(noise**2))
        est = AudioBuffer(ref.samples + noise, 16000)
        assert sc.sdr(ref, est) == pytest.approx(20.0, abs=0.01)
        assert sc.sdr(ref, ref) == 100.0


def test_end_to_end_smoke(toy_pool_dir, tmp_path, capsys):
    with _Budget("end-to-end-smoke", 180.0):
        pool_dir, pool_manifest = toy_pool_dir
        heads_dir = tmp_path / "heads"
        cfg_path = tmp_path / "pipeline.json"
        cfg_path.write_text(json.dumps({"training": {"batch_size": 32}}), encoding="utf-8")

        rc = main(
            ["train-head", "--stem", "piano", "--pool", str(pool_manifest),
             "--out", str(heads_dir), "--n-per-class", "64", "--seed", "0",
             "--config", str(cfg_path)]
        )
        assert rc == 0
        assert (heads_dir / "piano.head.npz").exists()
        eval_report = json.loads((heads_dir / "piano.eval.json").read_text())
        assert eval_report["eval"]["accuracy"] >= 0.95

        # toy corpus: pure target, pure non-target, half-and-half
        corpus = tmp_path / "corpus"
        corpus.mkdir()
        make_tone(440, 9.0, SEGMENT_RATE_HZ, amplitude=0.7).to_wav(corpus / "pure.wav")
        make_tone(2500, 9.0, SEGMENT_RATE_HZ, amplitude=0.7).to_wav(corpus / "other.wav")
        half = np.concatenate(
            [
                make_tone(440, 6.0, SEGMENT_RATE_HZ, amplitude=0.7).samples,
                make_tone(2500, 6.0, SEGMENT_RATE_HZ, amplitude=0.7).samples,
            ],
            axis=1,
        )
        AudioBuffer(half, SEGMENT_RATE_HZ).to_wav(corpus / "mixed.wav")

        track_list = tmp_path / "tracks.jsonl"
        track_list.write_text(
            "\n".join(
                json.dumps({"path": str(corpus / name), "stem": "piano"})
                for name in ("pure.wav", "other.wav", "mixed.wav")
            )
            + "\n",
            encoding="utf-8",
        )

        out_dir = tmp_path / "cleaned"
        rc = main(
            ["clean", "--manifest", str(track_list), "--heads", str(heads_dir),
             "--threshold", "0.995", "--out", str(out_dir), "--seed", "0"]
        )
        assert rc == 0

        report = json.loads((out_dir / "cleaning_report.json").read_text())
        tracks = {t["source_id"]: t for t in report["tracks"]}
        assert tracks["pure"]["n_kept"] >= 2
        assert tracks["other"]["n_kept"] == 0
        assert tracks["mixed"]["n_kept"] <= 3

        # conservation invariants
        for t in report["tracks"]:
            assert t["output_duration_s"] == pytest.approx(3.0 * t["n_kept"])
            assert t["n_kept"] <= t["n_segments"]
        assert report["totals"]["hours_out"] * 3600 == pytest.approx(
            sum(t["output_duration_s"] for t in report["tracks"])
        )
        assert report["per_stem"]["piano"]["out_s"] == pytest.approx(
            sum(t["output_duration_s"] for t in report["tracks"])
        )
        kept_total = sum(t["n_kept"] for t in report["tracks"])
        assert report["totals"]["kept"] == kept_total

        # clean output for the pure track exists and decodes at 48 kHz stereo
        clean_wav = out_dir / "pure.piano.clean.wav"
        assert clean_wav.exists()
        buf = AudioBuffer.from_wav(clean_wav)
        assert buf.sample_rate_hz == 48000
        assert buf.channels == 2


FIXTURES_DIR = Path(__file__).resolve().parents[1] / "encoder_export" / "fixtures"


def test_export_parity_on_committed_fixtures():
    """[SECONDARY] exported encoder probes match embed() within 1e-3 rel L2."""
    if not FIXTURES_DIR.exists():
        pytest.skip("secondary component not built; fixtures absent")
    torch = pytest.importorskip("torch")
    from stemcurate.embedding import ExternalModelBackend, embed as embed_fn
    from stemcurate.audio import Segment

    model_path = FIXTURES_DIR / "encoder.pt2"
    backend = ExternalModelBackend(model_path)
    probes = sorted(FIXTURES_DIR.glob("probe_*.npz"))
    assert len(probes) == 5
    for probe in probes:
        with np.load(probe) as data:
            waveform = data["waveform"]
            expected = data["embedding"]
        seg = Segment(AudioBuffer(waveform[None, :], SEGMENT_RATE_HZ), probe.stem, 0)
        got = embed_fn(seg, backend).values
        rel = np.linalg.norm(got - expected) / np.linalg.norm(expected)
        assert rel < 1e-3
    print("ACCEPTANCE export-parity: PASS", flush=True)
