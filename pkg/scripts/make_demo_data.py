"""Write a small seeded two-class image dataset in IDX format.

Class 1 images carry a bright centered disc, class 0 a dim noisy field,
so a human annotator can label them at a glance in the web UI:

    python3 scripts/make_demo_data.py --out demo_data
    python3 -m alpool serve --data-dir al_data --ui frontend/dist
    curl -F images=@demo_data/images.idx -F labels=@demo_data/labels.idx \
         -F class_names=dark,bright http://127.0.0.1:8000/api/datasets
"""

import argparse
import struct
from pathlib import Path

import numpy as np


def render(rng, n, side):
    labels = (np.arange(n) % 2).astype(np.uint8)
    rng.shuffle(labels)
    images = np.zeros((n, side, side), dtype=np.uint8)
    yy, xx = np.mgrid[0:side, 0:side]
    for i, label in enumerate(labels):
        noise = rng.integers(0, 60, size=(side, side))
        if label == 1:
            cy, cx = rng.uniform(side * 0.3, side * 0.7, size=2)
            radius = rng.uniform(side * 0.2, side * 0.35)
            disc = (yy - cy) ** 2 + (xx - cx) ** 2 <= radius**2
            noise = np.where(disc, rng.integers(180, 255, size=(side, side)), noise)
        images[i] = noise
    return images, labels


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="demo_data", help="output directory")
    parser.add_argument("--count", type=int, default=100, help="number of images")
    parser.add_argument("--side", type=int, default=8, help="image side length")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    images, labels = render(rng, args.count, args.side)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "images.idx", "wb") as fh:
        fh.write(struct.pack(">IIII", 0x00000803, args.count, args.side, args.side))
        fh.write(images.tobytes())
    with open(out / "labels.idx", "wb") as fh:
        fh.write(struct.pack(">II", 0x00000801, args.count))
        fh.write(labels.tobytes())
    print(f"wrote {args.count} {args.side}x{args.side} images to {out}/ "
          f"({int(labels.sum())} bright, {int((1 - labels).sum())} dark)")


if __name__ == "__main__":
    main()
