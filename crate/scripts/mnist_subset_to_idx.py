#!/usr/bin/env python3
"""Write MNIST IDX files from the 5000-image MNIST subset bundled with mlxtend.

The full MNIST archive is not always reachable; mlxtend ships 500 real
images per digit as a gzipped CSV (784 pixel columns, label last). This
script converts that subset into the standard IDX containers:

    <out>/train-images-idx3-ubyte   (magic 0x00000803)
    <out>/train-labels-idx1-ubyte   (magic 0x00000801)

Usage: python3 scripts/mnist_subset_to_idx.py [--out data/mnist] [--wheel PATH]
"""
import argparse
import glob
import gzip
import struct
import subprocess
import sys
import tempfile
import zipfile
from pathlib import Path

CSV_MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def fetch_wheel(tmp: str) -> str:
    subprocess.run(
        [sys.executable, "-m", "pip", "download", "--no-deps", "-q", "-d", tmp, "mlxtend"],
        check=True,
    )
    wheels = glob.glob(f"{tmp}/mlxtend-*.whl")
    if not wheels:
        sys.exit("mlxtend wheel not found after download")
    return wheels[0]


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="data/mnist")
    ap.add_argument("--wheel", default=None)
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        wheel = args.wheel or fetch_wheel(tmp)
        raw = gzip.decompress(zipfile.ZipFile(wheel).read(CSV_MEMBER)).decode()

    pixels = bytearray()
    labels = bytearray()
    for line in raw.strip().splitlines():
        fields = [int(float(v)) for v in line.split(",")]
        assert len(fields) == 785
        pixels.extend(fields[:784])
        labels.append(fields[784])
    count = len(labels)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "train-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, count, 28, 28))
        f.write(pixels)
    with open(out / "train-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x00000801, count))
        f.write(labels)
    print(f"wrote {count} images to {out}")


if __name__ == "__main__":
    main()
