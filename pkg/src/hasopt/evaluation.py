"""Evaluation harness: optimal path plus every algorithm on each (video, start) pair."""

from __future__ import annotations

import csv
import hashlib
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path

from . import __version__
from .baselines import RateBasedConfig, aggressive_logic, rate_based_logic
from .domain import AdaptationPath, InfeasibleError, SessionConfig, ThroughputTrace, Video
from .metrics import METRIC_NAMES, SessionMetrics, aggregate, compute, differential, optimal_metrics
from .mlp import MlpModel, as_logic
from .optimizer import solve
from .simulator import ProtocolViolation, script_logic, simulate


class UsageError(ValueError):
    """Bad command-line input or manifest content."""


def parse_starts(spec) -> list[int]:
    """'0:700:7' (inclusive end), '0,7,14', a single int, or a list of ints."""
    if isinstance(spec, int):
        return [spec]
    if isinstance(spec, (list, tuple)):
        return [int(x) for x in spec]
    text = str(spec).strip()
    try:
        if ":" in text:
            parts = [int(p) for p in text.split(":")]
            if len(parts) != 3 or parts[2] <= 0:
                raise ValueError
            begin, end, step = parts
            return list(range(begin, end + 1, step))
        return [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise UsageError(f"bad start spec {spec!r}; use begin:end:step or a comma list") from None


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def provenance(inputs: dict[str, str | Path], flags: dict) -> dict:
    return {
        "tool": "hasopt",
        "version": __version__,
        "inputs": {k: sha256_file(v) for k, v in sorted(inputs.items())},
        "flags": flags,
    }


@lru_cache(maxsize=8)
def _load_model(path: str) -> MlpModel:
    return MlpModel.load(path)


@lru_cache(maxsize=32)
def _load_video(path: str) -> Video:
    return Video.load(path)


@lru_cache(maxsize=4)
def _load_trace(path: str) -> ThroughputTrace:
    return ThroughputTrace.load(path)


@lru_cache(maxsize=8)
def _load_script(path: str) -> AdaptationPath:
    return AdaptationPath(json.loads(Path(path).read_text())["levels"])


def parse_algo(token) -> dict:
    """Normalise an algorithm token: model:PATH, script:PATH, rate, aggressive."""
    if isinstance(token, dict):
        spec = dict(token)
        kind = spec.get("algo")
    else:
        kind, _, arg = str(token).partition(":")
        spec = {"algo": kind}
        if kind in ("model", "script"):
            spec["path"] = arg
        elif arg:
            raise UsageError(f"algorithm {kind!r} takes no argument")
    if kind not in ("model", "script", "rate", "aggressive"):
        raise UsageError(f"unknown algorithm {token!r}; use model:PATH, script:PATH, rate or aggressive")
    if kind in ("model", "script") and not spec.get("path"):
        raise UsageError(f"algorithm {kind!r} needs a file path, e.g. {kind}:file.json")
    if kind == "rate":
        try:
            RateBasedConfig(**spec.get("config", {}))
        except TypeError as exc:
            raise UsageError(f"bad rate-based config: {exc}") from None
    spec.setdefault("name", kind)
    return spec


def build_logic(spec: dict, video: Video):
    kind = spec["algo"]
    if kind == "model":
        return as_logic(_load_model(str(spec["path"])), video)
    if kind == "script":
        return script_logic(_load_script(str(spec["path"])), video)
    if kind == "rate":
        return rate_based_logic(RateBasedConfig(**spec.get("config", {})), video)
    return aggressive_logic(video)


@dataclass
class Manifest:
    videos: list[Path]
    trace: Path
    starts: list[int]
    algorithms: list[dict]
    session: SessionConfig
    raw: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path) -> "Manifest":
        path = Path(path)
        try:
            obj = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read manifest {path}: {exc}") from None
        base = path.parent
        try:
            videos = [base / v for v in obj["videos"]]
            trace = base / obj["trace"]
            starts = parse_starts(obj.get("starts", "0:700:7"))
            algos = [parse_algo(a) for a in obj.get("algorithms", ["rate", "aggressive"])]
            session = SessionConfig(**obj.get("session", {}))
        except KeyError as exc:
            raise UsageError(f"manifest is missing {exc}") from None
        except TypeError as exc:
            raise UsageError(f"bad manifest session block: {exc}") from None
        for a in algos:
            if "path" in a:
                a["path"] = str(base / a["path"])
        names = [a["name"] for a in algos]
        if len(set(names)) != len(names) or "optimal" in names:
            raise UsageError("algorithm names must be unique and must not be 'optimal'")
        for f in videos + [trace] + [Path(a["path"]) for a in algos if "path" in a]:
            if not f.is_file():
                raise UsageError(f"manifest references missing file {f}")
        return cls(videos, trace, starts, algos, session, obj)


def evaluate_pair(video: Video, trace: ThroughputTrace, cfg: SessionConfig,
                  algos: list[dict]) -> dict[str, tuple[SessionMetrics, SessionMetrics]]:
    """Raw and differential metrics per algorithm, plus the optimal path itself."""
    opt = solve(video, trace, cfg)
    opt_metrics = optimal_metrics(opt, video, trace, cfg)
    out = {"optimal": (opt_metrics, differential(opt_metrics, opt_metrics))}
    for spec in algos:
        m = compute(simulate(video, trace, cfg, build_logic(spec, video)), video, cfg)
        out[spec["name"]] = (m, differential(m, opt_metrics))
    return out


def _pair_job(args):
    vid, video_path, trace_path, cfg, algos = args
    try:
        video, trace = _load_video(video_path), _load_trace(trace_path)
        return vid, cfg.trace_start_s, evaluate_pair(video, trace, cfg, algos), None
    except (InfeasibleError, ProtocolViolation, ValueError) as exc:
        return vid, cfg.trace_start_s, None, f"{type(exc).__name__}: {exc}"


@dataclass
class EvaluationResult:
    rows: list[dict]
    summary: dict
    failures: list[dict]


def evaluate(manifest: Manifest, workers: int = 1) -> EvaluationResult:
    duration = ThroughputTrace.load(manifest.trace).duration_s
    bad = [s for s in manifest.starts if not 0 <= s < duration]
    if bad:
        raise UsageError(f"start offsets {bad} fall outside the {duration} s trace")
    jobs = [(vid, str(vp), str(manifest.trace), replace(manifest.session, trace_start_s=s),
             manifest.algorithms)
            for vid, vp in enumerate(manifest.videos) for s in manifest.starts]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_pair_job, jobs))
    else:
        results = [_pair_job(j) for j in jobs]
    results.sort(key=lambda r: (r[0], r[1]))
    names = ["optimal"] + [a["name"] for a in manifest.algorithms]
    rows, failures = [], []
    per_algo_raw = {n: [] for n in names}
    per_algo_diff = {n: [] for n in names}
    for vid, start, res, err in results:
        if err is not None:
            failures.append({"video": manifest.raw["videos"][vid], "start": start, "error": err})
            continue
        for name in names:
            raw, diff = res[name]
            per_algo_raw[name].append(raw)
            per_algo_diff[name].append(diff)
            row = {"video": manifest.raw["videos"][vid], "start": start, "algorithm": name}
            row.update({m: getattr(raw, m) for m in METRIC_NAMES})
            row.update({f"diff_{m}": getattr(diff, m) for m in METRIC_NAMES})
            rows.append(row)
    summary = {
        "normalization": "per-minute rates use video duration n*tau; session duration starts at t=0",
        "runs": len(results) - len(failures),
        "failures": failures,
        "differential": {n: {k: v.to_json() for k, v in aggregate(per_algo_diff[n]).items()}
                         for n in names if per_algo_diff[n]},
        "raw": {n: {k: v.to_json() for k, v in aggregate(per_algo_raw[n]).items()}
                for n in names if per_algo_raw[n]},
    }
    return EvaluationResult(rows, summary, failures)


def rows_to_csv(rows: list[dict], header_comment: str | None = None) -> str:
    buf = io.StringIO()
    if header_comment:
        buf.write(f"# {header_comment}\n")
    cols = ["video", "start", "algorithm"] + list(METRIC_NAMES) + [f"diff_{m}" for m in METRIC_NAMES]
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()
