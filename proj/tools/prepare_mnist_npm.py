#!/usr/bin/env python3
# Copyright 2026 The dgcspn Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#    http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Converts the digits shipped in the npm `mnist` package into IDX files.

The package stores 10,000 MNIST digits as per-class JSON arrays of floats
rounded to three decimals (value / 255). Rounding back to bytes is exact
because the quantization step (0.255) is below half a grey level.

Usage:
    npm pack mnist && tar xzf mnist-*.tgz
    tools/prepare_mnist_npm.py package/src/digits data/mnist --test 2000
"""

import argparse
import gzip
import json
import pathlib
import random
import struct


def read_digits(digits_dir):
    samples = []
    for label in range(10):
        path = pathlib.Path(digits_dir) / f"{label}.json"
        data = json.loads(path.read_text())["data"]
        if len(data) % 784:
            raise ValueError(f"{path}: length {len(data)} is not a multiple of 784")
        for start in range(0, len(data), 784):
            pixels = bytes(int(round(v * 255.0)) for v in data[start:start + 784])
            samples.append((pixels, label))
    return samples


def write_idx(path, images, labels):
    with gzip.open(str(path) + "-images-idx3-ubyte.gz", "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        for img in images:
            f.write(img)
    with gzip.open(str(path) + "-labels-idx1-ubyte.gz", "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def main():
    parser = argparse.ArgumentParser(description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("digits_dir")
    parser.add_argument("out_dir")
    parser.add_argument("--test", type=int, default=2000, help="images moved to the t10k files")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    samples = read_digits(args.digits_dir)
    random.Random(args.seed).shuffle(samples)
    out = pathlib.Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    split = len(samples) - args.test
    train, test = samples[:split], samples[split:]
    write_idx(out / "train", [s[0] for s in train], [s[1] for s in train])
    write_idx(out / "t10k", [s[0] for s in test], [s[1] for s in test])
    print(f"train={len(train)} test={len(test)} -> {out}")


if __name__ == "__main__":
    main()
