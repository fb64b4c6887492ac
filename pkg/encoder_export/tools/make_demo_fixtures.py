"""Regenerates the committed parity fixtures from the seeded demo encoder.

Usage: python tools/make_demo_fixtures.py [fixtures_dir]

The primary test suite checks its embeddings against these fixtures without
needing this package installed; rerun after changing the demo encoder or
the export contract.
"""

import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from encoder_export.demo_encoder import write_demo_checkpoint
from encoder_export.export import ExportSpec, export_model


def main():
    fixtures_dir = Path(
        sys.argv[1] if len(sys.argv) > 1
        else Path(__file__).resolve().parents[1] / "fixtures"
    )
    with tempfile.TemporaryDirectory() as tmp:
        checkpoint = write_demo_checkpoint(Path(tmp) / "demo_encoder.ckpt.pt")
        model_path, metadata = export_model(
            ExportSpec(
                checkpoint_path=str(checkpoint),
                output_path=str(fixtures_dir / "encoder.pt2"),
                probe_count=5,
                factory="encoder_export.demo_encoder:default_factory",
            )
        )
    print(f"wrote {model_path} (D={metadata['dim_d']}) and 5 probes to {fixtures_dir}")


if __name__ == "__main__":
    main()
