#!/usr/bin/env python3
"""Fetch 10,000 MNIST digits and write them as IDX files.

The digits come from the `mnist` npm package (1,000-ish samples per class,
stored as JSON arrays of 784 intensities in [0, 1]). They are written in
round-robin class order to data/mnist/images.idx3-ubyte and
data/mnist/labels.idx1-ubyte.
"""

import argparse
import json
import pathlib
import struct
import subprocess
import tarfile
import tempfile

PACKAGE = "mnist@1.1.0"


def fetch_digits(workdir: pathlib.Path) -> list[list[list[float]]]:
    out = subprocess.run(["npm", "pack", PACKAGE, "--silent"], cwd=workdir, check=True,
                         capture_output=True, text=True)
    tarball = workdir / out.stdout.strip().splitlines()[-1]
    with tarfile.open(tarball) as tar:
        tar.extractall(workdir, filter="data")
    digits = []
    for d in range(10):
        flat = json.loads((workdir / "package" / "src" / "digits" / f"{d}.json").read_text())["data"]
        if len(flat) % 784:
            raise SystemExit(f"digit {d}: {len(flat)} values is not a multiple of 784")
        digits.append([flat[i:i + 784] for i in range(0, len(flat), 784)])
    return digits


def interleave(digits):
    images, labels = [], []
    cursors = [0] * 10
    while any(cursors[d] < len(digits[d]) for d in range(10)):
        for d in range(10):
            if cursors[d] < len(digits[d]):
                images.append(digits[d][cursors[d]])
                labels.append(d)
                cursors[d] += 1
    return images, labels


def write_idx(images, labels, out_dir: pathlib.Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "images.idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 2051, len(images), 28, 28))
        for img in images:
            f.write(bytes(min(255, max(0, round(v * 255))) for v in img))
    with open(out_dir / "labels.idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 2049, len(labels)))
        f.write(bytes(labels))


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent / "data" / "mnist"))
    args = parser.parse_args()
    with tempfile.TemporaryDirectory() as tmp:
        images, labels = interleave(fetch_digits(pathlib.Path(tmp)))
    write_idx(images, labels, pathlib.Path(args.out))
    print(f"wrote {len(images)} digits to {args.out}")


if __name__ == "__main__":
    main()
