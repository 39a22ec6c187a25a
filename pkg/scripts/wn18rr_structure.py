"""Khs and shortest-path statistics per WN18RR relation.

Reads $KGE_DATA_DIR/WN18RR/{train,valid,test}.txt (tab-separated triples)
and prints a table of Khs, max and mean shortest path per relation.
Expected landmarks: has_part Khs 1.00, verb_group 0.00, hypernym 0.99
with a longest shortest path of 18.

    KGE_DATA_DIR=/data python3 scripts/wn18rr_structure.py [--splits train]
"""

import argparse
import json
import os
import sys
import time
from pathlib import Path

from kgembed.analysis import khs_table
from kgembed.data import build_store, load_triples


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--root", default=os.environ.get("KGE_DATA_DIR"))
    ap.add_argument("--dataset", default="WN18RR")
    ap.add_argument("--splits", default="train", help="comma list of splits forming the graphs")
    ap.add_argument("--json", help="also write the table here")
    args = ap.parse_args()
    if not args.root:
        sys.exit("set KGE_DATA_DIR or pass --root")
    folder = Path(args.root) / args.dataset
    start = time.perf_counter()
    store = build_store(*(load_triples(folder / f"{n}.txt") for n in ("train", "valid", "test")))
    table = khs_table(store, tuple(args.splits.split(",")))
    elapsed = time.perf_counter() - start
    print(f"entities: {store.n_e}, relations: {store.n_r}")
    print(f"{'relation':<36} {'Khs':>6} {'max':>4} {'avg':>7}")
    for name, row in sorted(table.items(), key=lambda kv: -kv[1]["khs"]):
        print(f"{name:<36} {row['khs']:6.2f} {row['max_path']:4d} {row['avg_path']:7.2f}")
    print(f"({elapsed:.1f}s)")
    if args.json:
        Path(args.json).write_text(json.dumps(table, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
