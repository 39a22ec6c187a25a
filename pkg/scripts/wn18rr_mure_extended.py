"""Extended run: MuRE on WN18RR at d = 40 (lr 50, k 50, batch 128).

Not part of the test suite; expect several hours on a CPU.  The target is
a filtered test MRR within 0.03 of 0.459.  Ranking ties use the average
rule and entity vectors start at U(-0.05, 0.05) with relation diagonals at
U(-1, 1); neither choice is pinned down by the original description, so a
small gap may come from them.

    KGE_DATA_DIR=/data python3 scripts/wn18rr_mure_extended.py --out runs/wn18rr
"""

import argparse
import json
import os
import sys
import time
from pathlib import Path

from kgembed.cli import main as kgembed

TARGET_MRR, TOLERANCE = 0.459, 0.03


def run(argv):
    code = kgembed(argv)
    if code:
        sys.exit(f"kgembed {argv[0]} exited with {code}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/wn18rr_mure")
    ap.add_argument("--epochs", type=int, default=500)
    ap.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    ap.add_argument("--eval-every", type=int, default=25)
    args = ap.parse_args()
    if not os.environ.get("KGE_DATA_DIR"):
        sys.exit("set KGE_DATA_DIR to the folder containing WN18RR/")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    store = out / "wn18rr.kge"
    run(["prepare", "--dataset", "WN18RR", "--out", str(store)])
    start = time.perf_counter()
    run(["train", "--data", str(store), "--model", "mure", "--dim", "40", "--lr", "50", "--k", "50",
         "--batch-size", "128", "--epochs", str(args.epochs), "--eval-every", str(args.eval_every),
         "--threads", str(args.threads), "--out", str(out / "mure.ckpt"), "--log", str(out / "train.jsonl")])
    hours = (time.perf_counter() - start) / 3600
    best = out / "mure.best.ckpt"
    report = out / "test.json"
    run(["eval", "--data", str(store), "--ckpt", str(best if best.exists() else out / "mure.ckpt"),
         "--threads", str(args.threads), "--out", str(report)])
    mrr = json.loads(report.read_text())["ranking"]["overall"]["mrr"]
    verdict = "PASS" if abs(mrr - TARGET_MRR) <= TOLERANCE else "FAIL"
    print(f"[{verdict}] filtered test MRR {mrr:.4f} vs {TARGET_MRR} +/- {TOLERANCE} ({hours:.2f} h training)")


if __name__ == "__main__":
    main()
