"""Command-line pipeline: gen-trace, gen-video, solve, extract, train, simulate, evaluate.

Exit codes: 0 ok, 2 usage error, 3 infeasible instance, 4 partial failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .domain import MBPS, AdaptationPath, InfeasibleError, SessionConfig, ThroughputTrace, Video
from .evaluation import (
    Manifest,
    UsageError,
    build_logic,
    evaluate,
    parse_algo,
    parse_starts,
    provenance,
    rows_to_csv,
)
from .features import Corpus, CorpusError, ScalingContext, build_corpus
from .mlp import TrainConfig, train
from .optimizer import InstanceTooLarge, brute_force, check_feasibility, solve
from .simulator import ProtocolViolation, simulate
from .workload import TraceSpec, VideoSpec, generate_trace, generate_video

log = logging.getLogger("hasopt")

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_PARTIAL = 0, 2, 3, 4


def _write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=1) + "\n")


def _sidecar(path) -> Path:
    return Path(str(path) + ".provenance.json")


def _flags(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "workers")}


def _session(args, start: int = 0) -> SessionConfig:
    return SessionConfig(startup_delay_s=args.t0, rebuffer_target_s=getattr(args, "rebuffer", 10.0),
                         trace_start_s=start, epsilon=getattr(args, "epsilon", 0.05))


def cmd_gen_trace(args) -> int:
    spec = TraceSpec(args.mean_mbps * MBPS, args.cv, args.ac1, args.duration, args.seed)
    generate_trace(spec).save(args.output)
    _write_json(_sidecar(args.output), provenance({}, _flags(args)))
    return EXIT_OK


def cmd_gen_video(args) -> int:
    try:
        rates = tuple(float(x) * MBPS for x in args.rates_mbps.split(","))
    except ValueError:
        raise UsageError(f"--rates-mbps must be a comma list of numbers, got {args.rates_mbps!r}") from None
    spec = VideoSpec(args.segments, rates, args.burstiness, args.seed, args.segment_duration)
    video = generate_video(spec)
    obj = video.to_json()
    obj["provenance"] = provenance({}, _flags(args))
    _write_json(args.output, obj)
    return EXIT_OK


def cmd_solve(args) -> int:
    video, trace = Video.load(args.video), ThroughputTrace.load(args.trace)
    cfg = _session(args, args.start)
    cfg.check(video, trace)
    result = solve(video, trace, cfg)
    out = result.to_json()
    report = check_feasibility(result.path, video, trace, cfg)
    out["feasible"] = report.feasible
    if args.brute_force:
        reference = brute_force(video, trace, cfg)
        out["brute_force_agrees"] = reference == result
        if reference != result:
            log.error("solver and brute force disagree: %s vs %s", result, reference)
    out["provenance"] = provenance({"video": args.video, "trace": args.trace}, _flags(args))
    _write_json(args.output, out)
    print(f"w_opt={result.w_opt:.4f} mean_quality={result.step2_mean_quality:.4f} "
          f"switches={result.switches}")
    return EXIT_OK if out.get("brute_force_agrees", True) else 1


def cmd_extract(args) -> int:
    video_dir = Path(args.videos)
    paths = sorted(video_dir.glob("*.json")) if video_dir.is_dir() else [video_dir]
    if not paths:
        raise UsageError(f"no video JSON files under {video_dir}")
    videos = [Video.load(p) for p in paths]
    trace = ThroughputTrace.load(args.trace)
    starts = parse_starts(args.starts)
    for s in starts:
        _session(args, s).check(videos[0], trace)
    ctx = ScalingContext.load(args.scaling) if args.scaling else None
    corpus, ctx = build_corpus(videos, trace, starts, _session(args), ctx, workers=args.workers)
    r = videos[0].r
    corpus.save_csv(args.output, ctx, r)
    scaling_path = Path(args.output).with_suffix(".scaling.json")
    ctx.save(scaling_path)
    inputs = {f"video:{p.name}": p for p in paths}
    inputs["trace"] = args.trace
    _write_json(_sidecar(args.output), provenance(inputs, _flags(args)))
    print(f"{len(corpus)} samples from {len(videos)} videos x {len(starts)} starts; nu={ctx.nu:g}")
    return EXIT_OK


def cmd_train(args) -> int:
    corpus = Corpus.load_csv(args.corpus)
    scaling_path = args.scaling or Path(args.corpus).with_suffix(".scaling.json")
    ctx = ScalingContext.load(scaling_path)
    n_classes = args.levels or int(corpus.labels.max()) + 1
    cfg = TrainConfig(args.lr, args.batch, args.epochs, args.seed, args.val_fraction, args.hidden)
    model, report = train(corpus.features, corpus.labels, cfg, n_classes=n_classes, scaling=ctx)
    model.save(args.output)
    rep = report.to_json()
    rep["config"] = asdict(cfg)
    rep["provenance"] = provenance({"corpus": args.corpus, "scaling": scaling_path}, _flags(args))
    _write_json(Path(args.output).with_suffix(".report.json"), rep)
    print(f"final validation accuracy: {report.final_val_accuracy:.4f}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec = parse_algo(args.algo)
    video, trace = Video.load(args.video), ThroughputTrace.load(args.trace)
    cfg = _session(args, args.start)
    cfg.check(video, trace)
    session = simulate(video, trace, cfg, build_logic(spec, video))
    out = session.to_json()
    inputs = {"video": args.video, "trace": args.trace}
    if "path" in spec:
        inputs["algo"] = spec["path"]
    out["provenance"] = provenance(inputs, _flags(args))
    _write_json(args.output, out)
    print(f"stalls={len(session.stall_events)} playout_end={session.playout_end_s:.3f}s")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    manifest = Manifest.load(args.manifest)
    result = evaluate(manifest, workers=args.workers)
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    inputs = {"manifest": args.manifest, "trace": manifest.trace}
    inputs.update({f"video:{v}": p for v, p in zip(manifest.raw["videos"], manifest.videos)})
    inputs.update({f"algo:{a['name']}": a["path"] for a in manifest.algorithms if "path" in a})
    prov = provenance(inputs, _flags(args) | {"manifest_content": manifest.raw,
                                              "output": None})
    (outdir / "runs.csv").write_text(rows_to_csv(result.rows, json.dumps(prov, sort_keys=True)))
    _write_json(outdir / "summary.json", {"provenance": prov, **result.summary})
    print(f"{result.summary['runs']} runs evaluated, {len(result.failures)} failed")
    for f in result.failures:
        print(f"failed: video {f['video']} start {f['start']}: {f['error']}", file=sys.stderr)
    return EXIT_PARTIAL if result.failures else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hasopt", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def session_flags(sp, epsilon=False, rebuffer=False):
        sp.add_argument("--t0", type=float, default=5.0, help="startup delay in seconds")
        if epsilon:
            sp.add_argument("--epsilon", type=float, default=0.05, help="quality gap for switch minimisation")
        if rebuffer:
            sp.add_argument("--rebuffer", type=float, default=10.0, help="seconds buffered before resuming")

    sp = sub.add_parser("gen-trace", help="synthetic goodput trace (CSV)")
    sp.add_argument("--mean-mbps", type=float, default=0.67)
    sp.add_argument("--cv", type=float, default=0.38)
    sp.add_argument("--ac1", type=float, default=0.80)
    sp.add_argument("--duration", type=int, default=720)
    sp.add_argument("--seed", type=int, default=1)
    sp.add_argument("-o", "--output", required=True)
    sp.set_defaults(func=cmd_gen_trace)

    sp = sub.add_parser("gen-video", help="synthetic video manifest (JSON)")
    sp.add_argument("--segments", type=int, default=300)
    sp.add_argument("--rates-mbps", default="0.1,0.23,0.36,0.68,1.33")
    sp.add_argument("--burstiness", type=float, default=0.5)
    sp.add_argument("--segment-duration", type=float, default=1.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("-o", "--output", required=True)
    sp.set_defaults(func=cmd_gen_video)

    sp = sub.add_parser("solve", help="optimal adaptation path")
    sp.add_argument("--video", required=True)
    sp.add_argument("--trace", required=True)
    sp.add_argument("--start", type=int, default=0)
    session_flags(sp, epsilon=True)
    sp.add_argument("--brute-force", action="store_true", help="also verify against exhaustive search")
    sp.add_argument("-o", "--output", required=True)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("extract", help="training corpus from optimal paths")
    sp.add_argument("--videos", required=True, help="directory of video JSON files (or one file)")
    sp.add_argument("--trace", required=True)
    sp.add_argument("--starts", default="0:700:7")
    sp.add_argument("--scaling", help="reuse an existing scaling JSON instead of computing nu")
    session_flags(sp, epsilon=True, rebuffer=True)
    sp.add_argument("-o", "--output", required=True)
    sp.set_defaults(func=cmd_extract)

    sp = sub.add_parser("train", help="train the MLP policy")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--scaling")
    sp.add_argument("--levels", type=int, help="number of quality levels (default: from labels)")
    sp.add_argument("--hidden", type=int, default=110)
    sp.add_argument("--epochs", type=int, default=30)
    sp.add_argument("--lr", type=float, default=0.05)
    sp.add_argument("--batch", type=int, default=64)
    sp.add_argument("--val-fraction", type=float, default=1 / 9)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("-o", "--output", required=True)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("simulate", help="one playback session")
    sp.add_argument("--algo", required=True, help="model:PATH | rate | aggressive | script:PATH")
    sp.add_argument("--video", required=True)
    sp.add_argument("--trace", required=True)
    sp.add_argument("--start", type=int, default=0)
    session_flags(sp, rebuffer=True)
    sp.add_argument("-o", "--output", required=True)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("evaluate", help="full evaluation over a run manifest")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("-o", "--output", required=True, help="output directory")
    sp.set_defaults(func=cmd_evaluate)

    for name in ("extract", "evaluate"):
        sub.choices[name].add_argument(
            "--workers", type=int, default=int(os.environ.get("HASOPT_WORKERS", "1")))
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except CorpusError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (UsageError, ProtocolViolation, InstanceTooLarge, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
