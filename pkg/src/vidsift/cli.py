"""Operator command line: harvest -> featurize -> train -> eval/sweep ->
classify -> serve, plus a `run` command that executes the whole pipeline with
per-stage manifests and content-hash idempotence.

Exit codes: 0 success, 1 stage failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from . import eval as evalmod
from . import featurize, forest, store
from .core import ValidationError, format_utc, utcnow
from .embed import EMBED_ENDPOINT_ENV, HashingEmbedder, RemoteEmbedder
from .harvest import DEFAULT_CAP, HarvestError, harvest_all
from .source import MissingApiKeyError, SourceConfig, SourceError, make_source

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.6
DEFAULT_PORT = 8787

STAGE_ORDER = ("harvest", "featurize", "train", "sweep", "classify")


class ConfigError(Exception):
    pass


class StageError(Exception):
    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage
        self.message = message


def parse_config_text(text: str, origin: str = "<config>") -> dict:
    """Parse a flat key = value config file (comments with #, quoted or bare
    scalars). Returns raw values; typing happens in RunConfig."""
    values: dict = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{line_no}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"{origin}:{line_no}: empty key")
        values[key] = _parse_scalar(value)
    return values


def _parse_scalar(value: str):
    if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
        return value[1:-1]
    lowered = value.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    if lowered in ("none", "null", ""):
        return None
    try:
        return int(value)
    except ValueError:
        pass
    try:
        return float(value)
    except ValueError:
        pass
    return value


def _parse_list(value, convert) -> tuple:
    if value is None:
        return ()
    if isinstance(value, (int, float)):
        return (convert(str(value)),)
    parts = [part.strip() for part in str(value).split(",") if part.strip() != ""]
    return tuple(convert(part) for part in parts)


def _depth_value(text: str):
    return None if text.lower() in ("none", "null", "unlimited") else int(text)


@dataclass(frozen=True)
class RunConfig:
    workdir: str = "."
    seed: int = 0
    schema: str = featurize.SET2
    strict: bool = True
    cap: int = DEFAULT_CAP
    concurrency: int = 4
    ratio: float = 0.8
    threshold: float = DEFAULT_THRESHOLD
    fpr_target: float = evalmod.DEFAULT_FPR_TARGET
    cv_k: int = 5
    grid_n_trees: tuple = (100, 300)
    grid_max_depth: tuple = (8, 16, None)
    grid_min_leaf: tuple = (1, 5)
    embed_provider: str = "local"
    port: int = DEFAULT_PORT
    static_dir: Optional[str] = None
    source: SourceConfig = field(default_factory=SourceConfig)

    def __post_init__(self):
        if self.schema not in (featurize.SET1, featurize.SET2):
            raise ConfigError(f"schema must be set1 or set2, got {self.schema!r}")
        if self.embed_provider not in ("local", "remote"):
            raise ConfigError(f"embed.provider must be local or remote, got {self.embed_provider!r}")
        if not 0.0 < self.ratio < 1.0:
            raise ConfigError("ratio must be strictly between 0 and 1")
        if not 0.0 <= self.threshold <= 1.0:
            raise ConfigError("threshold must be within [0, 1]")
        if not self.grid_n_trees or not self.grid_max_depth or not self.grid_min_leaf:
            raise ConfigError("forest grid axes must be non-empty")

    @classmethod
    def from_mapping(cls, mapping: dict) -> "RunConfig":
        known = dict(mapping)

        def take(key, default):
            return known.pop(key, default)

        try:
            source = SourceConfig(
                kind=take("source.kind", "fixture"),
                api_key_env=take("source.api_key_env", SourceConfig.api_key_env),
                education_category_id=str(take("source.education_category_id", "27")),
                language=take("source.language", "en"),
                page_size=int(take("source.page_size", 25)),
                max_pages_per_query=int(take("source.max_pages_per_query", 3)),
                qps_limit=float(take("source.qps_limit", 4.0)),
                fixture_dir=take("source.fixture_dir", None),
                api_base_url=take("source.api_base_url", SourceConfig.api_base_url),
            )
            config = cls(
                workdir=str(take("workdir", ".")),
                seed=int(take("seed", 0)),
                schema=take("schema", featurize.SET2),
                strict=bool(take("strict", True)),
                cap=int(take("cap", DEFAULT_CAP)),
                concurrency=int(take("concurrency", 4)),
                ratio=float(take("ratio", 0.8)),
                threshold=float(take("threshold", DEFAULT_THRESHOLD)),
                fpr_target=float(take("fpr_target", evalmod.DEFAULT_FPR_TARGET)),
                cv_k=int(take("cv.k", 5)),
                grid_n_trees=_parse_list(take("grid.n_trees", "100,300"), int),
                grid_max_depth=_parse_list(take("grid.max_depth", "8,16,none"), _depth_value),
                grid_min_leaf=_parse_list(take("grid.min_leaf", "1,5"), int),
                embed_provider=take("embed.provider", "local"),
                port=int(take("port", DEFAULT_PORT)),
                static_dir=take("serve.static_dir", None),
                source=source,
            )
        except (TypeError, ValueError, ValidationError) as exc:
            raise ConfigError(str(exc)) from exc
        if known:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(known))}")
        return config

    def to_json(self) -> dict:
        return {
            "workdir": self.workdir,
            "seed": self.seed,
            "schema": self.schema,
            "strict": self.strict,
            "cap": self.cap,
            "concurrency": self.concurrency,
            "ratio": self.ratio,
            "threshold": self.threshold,
            "fpr_target": self.fpr_target,
            "cv.k": self.cv_k,
            "grid.n_trees": list(self.grid_n_trees),
            "grid.max_depth": list(self.grid_max_depth),
            "grid.min_leaf": list(self.grid_min_leaf),
            "embed.provider": self.embed_provider,
            "port": self.port,
            "serve.static_dir": self.static_dir,
            "source": {
                "kind": self.source.kind,
                "api_key_env": self.source.api_key_env,
                "education_category_id": self.source.education_category_id,
                "language": self.source.language,
                "page_size": self.source.page_size,
                "max_pages_per_query": self.source.max_pages_per_query,
                "qps_limit": self.source.qps_limit,
                "fixture_dir": self.source.fixture_dir,
                "api_base_url": self.source.api_base_url,
            },
        }

    def config_hash(self) -> str:
        payload = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    # Workdir layout -------------------------------------------------------
    def path(self, name: str) -> str:
        return os.path.join(self.workdir, name)

    @property
    def pairs_path(self) -> str:
        return self.path("pairs.csv")

    @property
    def candidates_path(self) -> str:
        return self.path("candidates.jsonl")

    @property
    def videos_path(self) -> str:
        return self.path("videos.jsonl")

    @property
    def features_path(self) -> str:
        return self.path("features.jsonl")

    @property
    def labels_path(self) -> str:
        return self.path("labels.jsonl")

    @property
    def model_path(self) -> str:
        return self.path("model.json")

    @property
    def decisions_path(self) -> str:
        return self.path("decisions.jsonl")

    @property
    def eval_dir(self) -> str:
        return self.path("eval")

    @property
    def manifests_dir(self) -> str:
        return self.path("manifests")


def load_config(config_path: Optional[str], overrides: list[str],
                workdir: Optional[str]) -> RunConfig:
    mapping: dict = {}
    if config_path:
        try:
            text = Path(config_path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        mapping.update(parse_config_text(text, origin=config_path))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        key, _, value = item.partition("=")
        mapping[key.strip()] = _parse_scalar(value.strip())
    if workdir is not None:
        mapping["workdir"] = workdir
    return RunConfig.from_mapping(mapping)


def make_embedder(config: RunConfig):
    if config.embed_provider == "remote":
        return RemoteEmbedder()
    return HashingEmbedder()


def build_grid(config: RunConfig) -> list[forest.ForestParams]:
    grid = []
    for n_trees in config.grid_n_trees:
        for max_depth in config.grid_max_depth:
            for min_leaf in config.grid_min_leaf:
                grid.append(forest.ForestParams(
                    n_trees=n_trees, max_depth=max_depth,
                    min_leaf=min_leaf, seed=config.seed,
                ))
    return grid


# --- stages ---------------------------------------------------------------


def stage_harvest(config: RunConfig) -> None:
    pairs = store.read_pairs_csv(config.pairs_path)
    source = make_source(config.source)
    results, failures = harvest_all(
        pairs, source, concurrency=config.concurrency, cap=config.cap
    )
    candidates = [candidate for result in results for candidate in result.candidates]
    videos_by_id = {}
    for result in results:
        for video in result.videos:
            videos_by_id.setdefault(video.video_id, video)
    store.write_candidates(config.candidates_path, candidates)
    store.write_videos(config.videos_path, videos_by_id.values())
    if failures:
        with open(config.path("harvest_failures.json"), "w", encoding="utf-8") as fh:
            json.dump([{"pair_id": p, "error": e} for p, e in failures], fh, indent=2)
            fh.write("\n")
    store.write_manifest(
        config.workdir,
        counts={
            "pairs": len(pairs),
            "candidates": len(candidates),
            "videos": len(videos_by_id),
        },
        schema_versions={"features": config.schema},
        provider_id=config.source.kind,
    )


def stage_featurize(config: RunConfig) -> None:
    pairs = store.read_pairs_csv(config.pairs_path)
    pairs_by_id = {pair.pair_id: pair for pair in pairs}
    candidates, _ = store.read_candidates(config.candidates_path, strict=config.strict)
    videos, _ = store.read_videos(config.videos_path, strict=config.strict)
    videos_by_id = {video.video_id: video for video in videos}
    embedder = make_embedder(config) if config.schema == featurize.SET2 else None

    rows = []
    for candidate in candidates:
        pair = pairs_by_id.get(candidate.pair_id)
        video = videos_by_id.get(candidate.video_id)
        if pair is None or video is None:
            message = f"candidate ({candidate.pair_id}, {candidate.video_id}) lacks pair or video data"
            if config.strict:
                raise StageError("featurize", message)
            log.warning("%s; skipping", message)
            continue
        rows.append(featurize.build_row(pair, video, config.schema, embedder=embedder))
    store.write_features(config.features_path, rows)


def _load_split(config: RunConfig):
    rows, report = store.export_training_set(config.labels_path, config.features_path)
    if not rows:
        raise evalmod.EvalError("no labeled feature rows after the label join")
    train_rows, test_rows = evalmod.split_train_test(rows, ratio=config.ratio, seed=config.seed)
    return train_rows, test_rows, report


def stage_train(config: RunConfig) -> None:
    train_rows, _, report = _load_split(config)
    grid = build_grid(config)
    best, table = forest.cross_validate(train_rows, grid, k=config.cv_k, seed=config.seed)
    model = forest.train_forest(train_rows, replace(best, seed=config.seed))
    forest.save_model(model, config.model_path)
    with open(config.path("cv_table.json"), "w", encoding="utf-8") as fh:
        json.dump({
            "selected": best.to_json(),
            "table": table,
            "join_report": report,
            "n_train_rows": len(train_rows),
        }, fh, indent=2, sort_keys=True)
        fh.write("\n")


def stage_sweep(config: RunConfig) -> None:
    _, test_rows, _ = _load_split(config)
    model = forest.load_model(config.model_path)
    report = evalmod.sweep(model, test_rows, fpr_target=config.fpr_target)
    evalmod.emit_report(report, config.eval_dir)


def classify(model_path, features_path, out_path, threshold: float = DEFAULT_THRESHOLD) -> int:
    """Write per-row decisions; relevant iff proba >= threshold, else discarded."""
    model = forest.load_model(model_path)
    rows, _ = store.read_features(features_path, strict=True)
    if not rows:
        log.warning("no feature rows in %s; writing empty decisions", features_path)
    decisions = []
    for row in rows:
        proba = forest.predict_proba(model, row)
        decisions.append({
            "pair_id": row.pair_id,
            "video_id": row.video_id,
            "proba": proba,
            "decision": "relevant" if proba >= threshold else "discarded",
        })
    store.write_jsonl(out_path, decisions)
    return len(decisions)


def stage_classify(config: RunConfig) -> None:
    classify(config.model_path, config.features_path, config.decisions_path,
             threshold=config.threshold)


STAGE_FUNCTIONS = {
    "harvest": stage_harvest,
    "featurize": stage_featurize,
    "train": stage_train,
    "sweep": stage_sweep,
    "classify": stage_classify,
}


def _fixture_inputs(config: RunConfig) -> list[str]:
    if config.source.kind == "fixture" and config.source.fixture_dir:
        return sorted(str(p) for p in Path(config.source.fixture_dir).glob("*.json"))
    return []


def stage_inputs(config: RunConfig, stage: str) -> list[str]:
    if stage == "harvest":
        return [config.pairs_path] + _fixture_inputs(config)
    if stage == "featurize":
        return [config.pairs_path, config.candidates_path, config.videos_path]
    if stage == "train":
        return [config.features_path, config.labels_path]
    if stage == "sweep":
        return [config.features_path, config.labels_path, config.model_path]
    if stage == "classify":
        return [config.model_path, config.features_path]
    raise ValueError(f"unknown stage {stage!r}")


def stage_outputs(config: RunConfig, stage: str) -> list[str]:
    if stage == "harvest":
        return [config.candidates_path, config.videos_path]
    if stage == "featurize":
        return [config.features_path]
    if stage == "train":
        return [config.model_path, config.path("cv_table.json")]
    if stage == "sweep":
        return [os.path.join(config.eval_dir, name)
                for name in ("sweep.csv", "sweep.svg", "metrics.json")]
    if stage == "classify":
        return [config.decisions_path]
    raise ValueError(f"unknown stage {stage!r}")


def _file_hash(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _hash_files(paths: list[str]) -> dict[str, str]:
    return {path: _file_hash(path) for path in paths}


def _manifest_path(config: RunConfig, stage: str) -> str:
    return os.path.join(config.manifests_dir, f"{stage}.json")


def stage_is_current(config: RunConfig, stage: str) -> bool:
    path = _manifest_path(config, stage)
    if not os.path.exists(path):
        return False
    try:
        with open(path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError):
        return False
    if manifest.get("config_hash") != config.config_hash():
        return False
    if manifest.get("seed") != config.seed:
        return False
    for group in ("input_hashes", "output_hashes"):
        for file_path, digest in manifest.get(group, {}).items():
            if not os.path.exists(file_path) or _file_hash(file_path) != digest:
                return False
    return True


def record_stage(config: RunConfig, stage: str, inputs: list[str], outputs: list[str]) -> None:
    os.makedirs(config.manifests_dir, exist_ok=True)
    manifest = {
        "stage": stage,
        "seed": config.seed,
        "config_hash": config.config_hash(),
        "input_hashes": _hash_files(inputs),
        "output_hashes": _hash_files([p for p in outputs if os.path.exists(p)]),
        "completed_at": format_utc(utcnow()),
    }
    with open(_manifest_path(config, stage), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_stage(config: RunConfig, stage: str, out=None) -> None:
    out = out if out is not None else sys.stdout
    if stage_is_current(config, stage):
        print(f"{stage}: up-to-date", file=out)
        return
    inputs = stage_inputs(config, stage)
    for path in inputs:
        if not os.path.exists(path):
            raise StageError(stage, f"missing input {path}")
    try:
        STAGE_FUNCTIONS[stage](config)
    except StageError:
        raise
    except MissingApiKeyError:
        raise  # a configuration problem, not a stage failure
    except (SourceError, HarvestError, store.StoreError, featurize.FeatureError,
            forest.ForestError, evalmod.EvalError, ValidationError, OSError) as exc:
        raise StageError(stage, str(exc)) from exc
    record_stage(config, stage, inputs, stage_outputs(config, stage))
    print(f"{stage}: done", file=out)


def run_pipeline(config: RunConfig, out=None) -> None:
    os.makedirs(config.workdir, exist_ok=True)
    for stage in STAGE_ORDER:
        run_stage(config, stage, out=out)


# --- argument parsing -----------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--workdir", help="dataset/artifact directory")
    common.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override one config key")

    parser = argparse.ArgumentParser(
        prog="vidsift",
        description="Find and classify training videos for job-title/skill pairs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("harvest", parents=[common], help="retrieve candidate videos per pair")
    sub.add_parser("featurize", parents=[common], help="build feature rows for candidates")
    sub.add_parser("train", parents=[common], help="tune and train the relevance model")
    sub.add_parser("eval", parents=[common], help="report held-out metrics at threshold 0.5")
    sub.add_parser("sweep", parents=[common], help="threshold sweep; writes csv/svg/json")

    p_classify = sub.add_parser("classify", parents=[common],
                                help="decide relevant/discarded per candidate")
    p_classify.add_argument("--threshold", type=float, default=None)

    p_serve = sub.add_parser("serve", parents=[common], help="run the labeling HTTP service")
    p_serve.add_argument("--port", type=int, default=None)
    p_serve.add_argument("--static-dir", default=None)

    sub.add_parser("export", parents=[common],
                   help="join labels onto features; print reconciliation counts")
    sub.add_parser("run", parents=[common], help="run the full pipeline with manifests")
    return parser


def _command_overrides(args) -> list[str]:
    overrides = list(args.overrides)
    if getattr(args, "threshold", None) is not None:
        overrides.append(f"threshold={args.threshold}")
    if getattr(args, "port", None) is not None:
        overrides.append(f"port={args.port}")
    if getattr(args, "static_dir", None) is not None:
        overrides.append(f"serve.static_dir={args.static_dir}")
    return overrides


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config, _command_overrides(args), args.workdir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        if args.command == "run":
            run_pipeline(config)
        elif args.command in STAGE_FUNCTIONS:
            run_stage(config, args.command)
        elif args.command == "eval":
            _, test_rows, _ = _load_split(config)
            model = forest.load_model(config.model_path)
            report = evalmod.sweep(model, test_rows, fpr_target=config.fpr_target)
            evalmod.emit_report(report, config.eval_dir)
            precision, recall, f1 = report.at_half
            print(f"precision={precision:.3f} recall={recall:.3f} f1={f1:.3f} "
                  f"n_test_rows={report.n_test_rows} n_test_pairs={report.n_test_pairs}")
        elif args.command == "export":
            rows, report = store.export_training_set(config.labels_path, config.features_path)
            out_path = config.path("training.jsonl")
            store.write_features(out_path, rows)
            print(f"wrote {len(rows)} labeled rows to {out_path} "
                  f"(unlabeled={report['unlabeled']}, orphan_labels={report['orphan_labels']})")
        elif args.command == "serve":
            from . import labelapi
            import uvicorn
            app = labelapi.create_app(labelapi.ServiceState.from_workdir(
                config.workdir, static_dir=config.static_dir))
            uvicorn.run(app, host="127.0.0.1", port=config.port, log_level="info")
        else:  # pragma: no cover - argparse enforces the choices
            parser.error(f"unknown command {args.command}")
    except (MissingApiKeyError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(json.dumps({"stage": exc.stage, "error": exc.message}), file=sys.stderr)
        return 1
    except (SourceError, HarvestError, store.StoreError, featurize.FeatureError,
            forest.ForestError, evalmod.EvalError, ValidationError, OSError) as exc:
        print(json.dumps({"stage": args.command, "error": str(exc)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
