#!/usr/bin/env python3
"""Rebuild IDX files from the digits bundled with the `mnist` npm package.

The package (https://github.com/cazala/mnist) ships 10,000 MNIST digits as
per-class JSON arrays of pixel intensities rounded to three decimals. Every
value is byte/255 rounded, so round(v * 255) recovers the original byte.

Usage:
    npm pack mnist && tar xzf mnist-1.1.0.tgz
    python3 scripts/mnist_from_npm.py package/src/digits data/mnist
"""
import gzip
import json
import struct
import sys
from pathlib import Path

ROWS = COLS = 28


def main(src: Path, dst: Path) -> None:
    per_class = []
    for digit in range(10):
        flat = json.loads((src / f"{digit}.json").read_text())["data"]
        assert len(flat) % (ROWS * COLS) == 0
        images = []
        for k in range(len(flat) // (ROWS * COLS)):
            chunk = flat[k * ROWS * COLS:(k + 1) * ROWS * COLS]
            pixels = bytes(int(round(v * 255)) for v in chunk)
            images.append(pixels)
        per_class.append(images)

    # round-robin interleave so any prefix is roughly class balanced
    images, labels = [], []
    cursor = [0] * 10
    while any(cursor[d] < len(per_class[d]) for d in range(10)):
        for d in range(10):
            if cursor[d] < len(per_class[d]):
                images.append(per_class[d][cursor[d]])
                labels.append(d)
                cursor[d] += 1

    dst.mkdir(parents=True, exist_ok=True)
    with gzip.GzipFile(dst / "train-images-idx3-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x803, len(images), ROWS, COLS))
        for img in images:
            f.write(img)
    with gzip.GzipFile(dst / "train-labels-idx1-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x801, len(labels)))
        f.write(bytes(labels))
    print(f"wrote {len(images)} digits to {dst}")


if __name__ == "__main__":
    main(Path(sys.argv[1]), Path(sys.argv[2]))
