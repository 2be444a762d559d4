#!/usr/bin/env python3
"""Write an image dataset bundled as per-class JSON in an npm package as gzip IDX files.

Usage: make_npm_idx.py <package .tgz> <out_prefix> --train N --test M

Handles the `mnist` package (src/digits/<c>.json, one flat list scaled to
[0, 1] with 3 decimals; round(v * 255) recovers the bytes) and the
`fashion-mnist` package (src/clothes/<c>.json, a list of 784-byte images).
The first N images of each class go to the train pair, the next M to the test pair.
"""
import argparse
import gzip
import json
import re
import struct
import tarfile
from pathlib import Path

CLASS_FILE = re.compile(r"package/src/\w+/(\d)\.json$")


def class_images(tar):
    found = {}
    for member in tar.getmembers():
        m = CLASS_FILE.match(member.name)
        if m:
            data = json.loads(tar.extractfile(member).read())["data"]
            if data and isinstance(data[0], list):
                images = [bytes(img) for img in data]
            else:
                images = [bytes(round(v * 255) for v in data[k : k + 784])
                          for k in range(0, len(data), 784)]
            found[int(m.group(1))] = images
    if sorted(found) != list(range(10)):
        raise SystemExit(f"expected class files 0..9, found {sorted(found)}")
    return found


def write_idx(prefix: str, images, labels):
    with gzip.GzipFile(prefix + "-images-idx3-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        for img in images:
            f.write(img)
    with gzip.GzipFile(prefix + "-labels-idx1-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def main():
    p = argparse.ArgumentParser()
    p.add_argument("package")
    p.add_argument("out_prefix")
    p.add_argument("--train", type=int, required=True)
    p.add_argument("--test", type=int, required=True)
    a = p.parse_args()
    with tarfile.open(a.package) as tar:
        classes = class_images(tar)
    train, test = ([], []), ([], [])
    for label, images in sorted(classes.items()):
        if len(images) < a.train + a.test:
            raise SystemExit(f"class {label} has only {len(images)} images")
        for k, img in enumerate(images[: a.train + a.test]):
            bucket = train if k < a.train else test
            bucket[0].append(img)
            bucket[1].append(label)
    Path(a.out_prefix).parent.mkdir(parents=True, exist_ok=True)
    write_idx(a.out_prefix + "-train", *train)
    write_idx(a.out_prefix + "-test", *test)
    print(f"train={len(train[1])} test={len(test[1])}")


if __name__ == "__main__":
    main()
