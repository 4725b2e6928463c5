"""Generate a seeded smoothed-noise PGM corpus for pipeline runs.

Usage: python3 scripts/make_corpus.py OUT_DIR [--n 100] [--size 128]
       [--seed 20260810] [--radius 3]
"""

import argparse
from pathlib import Path

from scenestat.grid import save_pgm
from scenestat.simulate import make_corpus


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out_dir", type=Path)
    parser.add_argument("--n", type=int, default=100)
    parser.add_argument("--size", type=int, default=128)
    parser.add_argument("--seed", type=int, default=20260810)
    parser.add_argument("--radius", type=int, default=3)
    args = parser.parse_args()

    args.out_dir.mkdir(parents=True, exist_ok=True)
    images = make_corpus(args.n, args.size, args.size, seed=args.seed, radius=args.radius)
    for i, img in enumerate(images):
        (args.out_dir / f"img{i:03d}.pgm").write_bytes(save_pgm(img))
    print(f"wrote {len(images)} {args.size}x{args.size} images to {args.out_dir}")


if __name__ == "__main__":
    main()
