"""Train the desk-scale configuration and render its sample grids as documentation.

Writes ``samples_{0,100,300}.pgm`` and ``progress.md`` (grids drawn as text
shades) into the output directory, ``docs/`` by default.

    python3 scripts/render_progress.py --data-dir data/digits
"""

import argparse
import tempfile
from pathlib import Path

from qcgan.cli import prepare_dataset
from qcgan.metrics import read_pgm
from qcgan.train import TrainConfig, train

SHADES = " .:-=+*#%@"
SNAPSHOTS = (0, 100, 300)


def as_text(canvas) -> str:
    scale = (len(SHADES) - 1) / 255
    return "\n".join("".join(SHADES[round(v * scale)] * 2 for v in row) for row in canvas)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--data-dir", required=True)
    parser.add_argument("--out", default="docs")
    args = parser.parse_args()

    config = TrainConfig(digit_class=0, image_size=8, iterations=300, seed=42, max_samples=200)
    dataset = prepare_dataset(args.data_dir, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        _, rows = train(config, dataset, tmp)
        fids = {row[0]: row[3] for row in rows}
        lines = [
            "# Sample progress, digit 0 at 8x8",
            "",
            f"Seed 42, {len(dataset)} real images, batch 16, default learning rates.",
            "Each panel is a 4x4 grid of generated samples on the fixed evaluation noise.",
            "",
        ]
        for it in SNAPSHOTS:
            src = Path(tmp) / f"samples_{it}.pgm"
            (out / src.name).write_bytes(src.read_bytes())
            lines += [f"## iteration {it} (pixel-FID {fids[it]:.3f})", "", "```", as_text(read_pgm(src)), "```", ""]
    (out / "progress.md").write_text("\n".join(lines))
    print(out / "progress.md")


if __name__ == "__main__":
    main()
