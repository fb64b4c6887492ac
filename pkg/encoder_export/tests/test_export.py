import json

import numpy as np
import pytest
import torch

from encoder_export.adapter import ContractError, adapt, probe_waveform, validate_contract
from encoder_export.cli import main
from encoder_export.demo_encoder import DEMO_DIM, demo_encoder, write_demo_checkpoint
from encoder_export.export import ExportError, ExportSpec, export_model

FACTORY = "encoder_export.demo_encoder:default_factory"


@pytest.fixture
def checkpoint(tmp_path):
    return write_demo_checkpoint(tmp_path / "encoder.ckpt.pt")


class TestAdapter:
    def test_batched_encoder_adapted(self):
        adapted = adapt(demo_encoder())
        frames, dim = validate_contract(adapted)
        assert dim == DEMO_DIM
        assert frames == 1 + (48000 - 400) // 160

    def test_unbatched_encoder_accepted(self):
        class Bare(torch.nn.Module):
            def forward(self, waveform):
                return waveform.reshape(300, 160)

        frames, dim = validate_contract(adapt(Bare()))
        assert (frames, dim) == (300, 160)

    def test_contract_violation_names_shapes(self):
        class Wrong(torch.nn.Module):
            def forward(self, waveform):
                return waveform.sum()

        with pytest.raises(ContractError):
            adapt(Wrong())


class TestExport:
    def test_checkpoint_to_model_and_metadata(self, checkpoint, tmp_path):
        out = tmp_path / "out" / "encoder.pt2"
        spec = ExportSpec(str(checkpoint), str(out), probe_count=5, factory=FACTORY)
        model_path, metadata = export_model(spec)
        assert model_path.exists()
        assert metadata["dim_d"] == DEMO_DIM
        assert metadata["input_samples"] == 48000
        assert metadata["format"] == "pt2"

        meta_doc = json.loads((out.parent / "encoder.pt2.json").read_text())
        assert meta_doc["dim_d"] == DEMO_DIM

        reloaded = torch.export.load(str(model_path)).module()
        probe = reloaded(probe_waveform())
        assert tuple(probe.shape) == (metadata["frames_per_segment"], DEMO_DIM)

    def test_probe_fixtures_written(self, checkpoint, tmp_path):
        out = tmp_path / "encoder.pt2"
        export_model(ExportSpec(str(checkpoint), str(out), probe_count=5, factory=FACTORY))
        fixtures = sorted(tmp_path.glob("probe_*.npz"))
        assert len(fixtures) == 5
        with np.load(fixtures[0]) as data:
            assert data["waveform"].shape == (48000,)
            assert data["embedding"].shape == (DEMO_DIM,)

    @pytest.mark.filterwarnings("ignore::DeprecationWarning")
    def test_torchscript_format_still_available(self, checkpoint, tmp_path):
        out = tmp_path / "encoder.ts.pt"
        _, metadata = export_model(
            ExportSpec(str(checkpoint), str(out), probe_count=0, factory=FACTORY,
                       format="torchscript")
        )
        assert metadata["format"] == "torchscript"
        reloaded = torch.jit.load(str(out))
        assert tuple(reloaded(probe_waveform()).shape)[1] == DEMO_DIM

    def test_unknown_format_rejected(self, checkpoint, tmp_path):
        with pytest.raises(ExportError, match="format"):
            ExportSpec(str(checkpoint), str(tmp_path / "m.onnx"), format="onnx")

    def test_corrupted_checkpoint_leaves_no_output(self, tmp_path):
        bad = tmp_path / "corrupt.pt"
        bad.write_bytes(b"definitely not a checkpoint")
        out = tmp_path / "model.ts.pt"
        with pytest.raises(ExportError):
            export_model(ExportSpec(str(bad), str(out), factory=FACTORY))
        assert not out.exists()

    def test_state_dict_needs_factory(self, checkpoint, tmp_path):
        with pytest.raises(ExportError, match="factory"):
            export_model(ExportSpec(str(checkpoint), str(tmp_path / "m.pt")))

    def test_expected_dim_mismatch(self, checkpoint, tmp_path):
        spec = ExportSpec(
            str(checkpoint), str(tmp_path / "m.pt"), factory=FACTORY, expected_dim=128
        )
        with pytest.raises(ContractError, match="D=64"):
            export_model(spec)

    def test_exported_program_reexported(self, checkpoint, tmp_path):
        first = tmp_path / "first.pt2"
        export_model(ExportSpec(str(checkpoint), str(first), probe_count=0, factory=FACTORY))
        second = tmp_path / "second.pt2"
        _, metadata = export_model(ExportSpec(str(first), str(second), probe_count=0))
        assert metadata["dim_d"] == DEMO_DIM

    def test_cli_round_trip(self, checkpoint, tmp_path, capsys):
        out = tmp_path / "cli" / "encoder.pt2"
        rc = main(
            ["export", "--checkpoint", str(checkpoint), "--out", str(out),
             "--probes", "2", "--factory", FACTORY]
        )
        assert rc == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["dim_d"] == DEMO_DIM
        assert len(list(out.parent.glob("probe_*.npz"))) == 2

    def test_cli_reports_errors(self, tmp_path, capsys):
        rc = main(
            ["export", "--checkpoint", str(tmp_path / "missing.pt"),
             "--out", str(tmp_path / "m.pt")]
        )
        assert rc == 1
        assert "error:" in capsys.readouterr().err


class TestParityWithPrimary:
    """Golden-fixture parity: the primary package's embedding path must
    reproduce this tool's reference embeddings through the exported model."""

    def test_probe_embeddings_match_primary_embed(self, checkpoint, tmp_path):
        stemcurate = pytest.importorskip("stemcurate")
        from stemcurate.audio import AudioBuffer, Segment
        from stemcurate.embedding import ExternalModelBackend, embed

        out = tmp_path / "encoder.pt2"
        export_model(ExportSpec(str(checkpoint), str(out), probe_count=5, factory=FACTORY))
        backend = ExternalModelBackend(out, expected_dim=DEMO_DIM)

        for fixture in sorted(tmp_path.glob("probe_*.npz")):
            with np.load(fixture) as data:
                waveform = data["waveform"]
                expected = data["embedding"]
            seg = Segment(AudioBuffer(waveform[None, :], 16000), fixture.stem, 0)
            got = embed(seg, backend).values
            rel = np.linalg.norm(got - expected) / np.linalg.norm(expected)
            assert rel < 1e-3
