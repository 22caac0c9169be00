#!/usr/bin/env python3
"""
🎨 Renders an attn-dump directory as heatmaps

    python scripts/plot_attention.py attention/ -o attention.png

One panel per local head (and the global head with --global), axes in band
index within the head's scale. Needs matplotlib.
"""

import argparse
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from src.ui.report import read_matrix  # noqa: E402


def draw_head(ax, matrix, title: str) -> None:
    """Row i of a head matrix is query band i, column j is key band j"""
    im = ax.imshow(matrix, cmap="viridis", aspect="auto")
    ax.set_title(title)
    ax.set_xlabel("key band")
    ax.set_ylabel("query band")
    ax.figure.colorbar(im, ax=ax, fraction=0.046)


def plot_dump(dump_dir: Path, out: Path, include_global: bool = False) -> Path:
    """
    🖼️ Draws every local head matrix of `dump_dir` side by side

    Returns:
        Path: The image written
    """
    files = sorted(dump_dir.glob("local_*_L*.csv"), key=lambda p: int(p.stem.split("_")[1]))
    if include_global:
        files = [dump_dir / "global.csv"] + files
    if not files:
        raise FileNotFoundError(f"no attention CSVs in {dump_dir}")

    fig, axes = plt.subplots(1, len(files), figsize=(4 * len(files), 4), squeeze=False)
    for ax, path in zip(axes[0], files):
        draw_head(ax, read_matrix(path), path.stem)
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def main() -> None:
    parser = argparse.ArgumentParser(description="Plot attention weight CSVs as heatmaps")
    parser.add_argument("dump_dir", type=Path, help="Directory written by `main.py attn-dump`")
    parser.add_argument("-o", "--out", type=Path, default=Path("attention.png"), help="Image to write")
    parser.add_argument("--global", dest="include_global", action="store_true", help="Also plot the global head")
    args = parser.parse_args()
    print(f"🎨 Wrote {plot_dump(args.dump_dir, args.out, args.include_global)}")


if __name__ == "__main__":
    main()
