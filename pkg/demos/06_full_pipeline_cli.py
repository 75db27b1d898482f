"""Driving the whole pipeline through the command line interface.

Every stage writes its artifact atomically plus a manifest with the
resolved configuration and content hashes of its inputs, so a run can be
reproduced byte-for-byte from the manifests alone.
"""

import json
import os
import tempfile

from crosshash.cli import main

with tempfile.TemporaryDirectory() as tmp:
    def path(name):
        return os.path.join(tmp, name)

    stages = [
        ["synth", "--out", path("db.bin"), "--query-out", path("query.bin"),
         "--query-split", "40", "--clusters", "4", "--samples", "440",
         "--views", "3", "--dim-image", "32", "--dim-text", "24", "--seed", "11"],
        ["mine", "--store", path("db.bin"), "--out", path("structure.bin")],
        ["train", "--store", path("db.bin"), "--structure", path("structure.bin"),
         "--out", path("net.bin"), "--trace", path("trace.csv"),
         "--bits", "16", "--hidden", "64", "--epochs", "30", "--batch", "64",
         "--seed", "11"],
        ["encode", "--store", path("db.bin"), "--checkpoint", path("net.bin"),
         "--out-image", path("db_image.bin"), "--out-text", path("db_text.bin")],
        ["encode", "--store", path("query.bin"), "--checkpoint", path("net.bin"),
         "--out-image", path("q_image.bin"), "--out-text", path("q_text.bin")],
        ["eval", "--query-image", path("q_image.bin"), "--query-text", path("q_text.bin"),
         "--db-image", path("db_image.bin"), "--db-text", path("db_text.bin"),
         "--query-store", path("query.bin"), "--db-store", path("db.bin"),
         "--out-dir", path("report")],
    ]
    for argv in stages:
        print(f"$ crosshash {' '.join(argv)}"[:100])
        status = main(argv)
        assert status == 0, f"stage failed: {argv[0]}"

    with open(path("report/eval_16bits.json")) as fh:
        report = json.load(fh)
    print(f"\nMAP image-to-text: {report['map_i2t']:.4f}")
    print(f"MAP text-to-image: {report['map_t2i']:.4f}")

    print("\nmanifest of the mining stage:")
    with open(path("structure.bin.manifest")) as fh:
        for line in fh.read().splitlines()[:8]:
            print(f"  {line}")
