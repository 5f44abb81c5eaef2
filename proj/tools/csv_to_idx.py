#!/usr/bin/env python3
"""Convert a CSV of MNIST rows (784 pixel bytes, then the label) into IDX files.

The bundled data/mnist files were produced from the 5000-sample MNIST subset
shipped in the mlxtend wheel (mlxtend/data/data/mnist_5k.csv.gz):

    python3 tools/csv_to_idx.py mnist_5k.csv.gz data/mnist/mnist5k
"""
import gzip
import struct
import sys


def main() -> int:
    if len(sys.argv) != 3:
        print(f"usage: {sys.argv[0]} <rows.csv[.gz]> <out-prefix>", file=sys.stderr)
        return 2
    src, prefix = sys.argv[1], sys.argv[2]
    opener = gzip.open if src.endswith(".gz") else open
    images, labels = bytearray(), bytearray()
    count = 0
    with opener(src, "rt") as fh:
        for line in fh:
            fields = line.strip().split(",")
            if len(fields) != 785:
                continue
            pixels = [int(float(v)) for v in fields[:784]]
            images.extend(bytes(pixels))
            labels.append(int(float(fields[784])))
            count += 1
    with open(prefix + "-images-idx3-ubyte", "wb") as out:
        out.write(struct.pack(">IIII", 0x00000803, count, 28, 28))
        out.write(images)
    with open(prefix + "-labels-idx1-ubyte", "wb") as out:
        out.write(struct.pack(">II", 0x00000801, count))
        out.write(labels)
    print(f"wrote {count} samples")
    return 0


if __name__ == "__main__":
    sys.exit(main())
