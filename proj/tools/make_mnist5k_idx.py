#!/usr/bin/env python3
"""Write the 5000-image MNIST subset bundled with mlxtend as gzip IDX files.

Usage: make_mnist5k_idx.py <mlxtend wheel or mnist_5k.csv.gz> <out_dir>

The subset has 500 images per digit. The first 400 of each class (in file
order) go to the train pair, the remaining 100 to the test pair.
"""
import gzip
import struct
import sys
import zipfile
from pathlib import Path

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def read_rows(src: Path):
    if src.suffix == ".whl":
        raw = zipfile.ZipFile(src).read(MEMBER)
    else:
        raw = src.read_bytes()
    for line in gzip.decompress(raw).decode().splitlines():
        cells = line.split(",")
        yield [int(float(c)) for c in cells[:784]], int(cells[784])


def write_idx(path: Path, images, labels):
    with gzip.GzipFile(path.with_name(path.name + "-images-idx3-ubyte.gz"), "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        for img in images:
            f.write(bytes(img))
    with gzip.GzipFile(path.with_name(path.name + "-labels-idx1-ubyte.gz"), "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def main():
    src, out = Path(sys.argv[1]), Path(sys.argv[2])
    out.mkdir(parents=True, exist_ok=True)
    seen = [0] * 10
    train, test = ([], []), ([], [])
    for pixels, label in read_rows(src):
        bucket = train if seen[label] < 400 else test
        seen[label] += 1
        bucket[0].append(pixels)
        bucket[1].append(label)
    write_idx(out / "mnist5k-train", *train)
    write_idx(out / "mnist5k-test", *test)
    print(f"train={len(train[1])} test={len(test[1])}")


if __name__ == "__main__":
    main()
