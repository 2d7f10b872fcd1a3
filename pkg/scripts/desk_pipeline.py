"""Full desk-scale pipeline: corpus, training and evaluation, written to one directory.

Runs through the CLI entry points, so every output carries provenance:

    python3 scripts/desk_pipeline.py -o runs/desk --workers 1
"""

import argparse
import json
import time
from pathlib import Path

from hasopt.cli import main as cli
from hasopt.experiments import DeskScale, write_manifest


def step(name, argv):
    t = time.perf_counter()
    code = cli([str(a) for a in argv])
    print(f"{name}: exit {code} in {time.perf_counter() - t:.0f} s")
    if code != 0:
        raise SystemExit(code)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("-o", "--output", default="runs/desk")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    desk = DeskScale()
    out = Path(args.output)
    train_dir = out / "train"
    train_dir.mkdir(parents=True, exist_ok=True)
    for k, video in enumerate(desk.training_videos()):
        video.save(train_dir / f"video_{k:02d}.json")
    trace = desk.trace()
    trace.save(out / "trace.csv")
    s = desk.session
    step("extract", ["extract", "--videos", train_dir, "--trace", out / "trace.csv",
                     "--starts", desk.starts, "--t0", s.startup_delay_s, "--epsilon", s.epsilon,
                     "--workers", args.workers, "-o", out / "corpus.csv"])
    t = desk.train
    step("train", ["train", "--corpus", out / "corpus.csv", "--levels", 5, "--epochs", t.epochs,
                   "--lr", t.learning_rate, "--batch", t.batch_size, "--hidden", t.hidden_size,
                   "--seed", t.seed, "-o", out / "model.json"])

    eval_dir = out / "eval"
    manifest = write_manifest(eval_dir, desk.evaluation_videos(), trace, desk.starts,
                              ["model:../model.json", "rate", "aggressive"], desk.session)
    step("evaluate", ["evaluate", "--manifest", manifest, "--workers", args.workers, "-o", out / "results"])

    summary = json.loads((out / "results" / "summary.json").read_text())
    report = json.loads((out / "model.report.json").read_text())
    print(f"validation accuracy {report['val_accuracy'][report['best_epoch']]:.4f}")
    for algo, table in summary["differential"].items():
        cells = "  ".join(f"{m}={v['median']:+.3f}" for m, v in table.items())
        print(f"{algo:>10}  median differentials: {cells}")
    print(f"model runs with switching differential <= 0: "
          f"{summary['differential']['model']['switching_frequency']['fraction_le_zero']:.1%}")


if __name__ == "__main__":
    main()
