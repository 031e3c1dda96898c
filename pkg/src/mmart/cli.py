"""Pipeline command-line interface.

One executable with one subcommand per stage; every stage takes the shared
flat-key config (file + ``--set`` overrides), acquires a lock on the output
directory, writes its artifacts plus a JSON run manifest, and prints any
report JSON on stdout with logs on stderr.

Exit codes: 0 ok, 2 usage error, 3 data error, 4 numeric failure.  The
``MMA_SEED`` environment variable overrides the config seed (CLI ``--set
seed=...`` still wins).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import attributes, contextnet, corpus, feature_store, knowledge_graph
from . import node2vec, projection, retrieval, text_encoder
from .config import PipelineConfig, config_sha256, load_config
from .errors import ConfigError, DataError, MmartError, NumericError

log = logging.getLogger("mmart")

LOCK_NAME = ".mma.lock"

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class StageRunner:
    """Lock, time, and manifest bookkeeping around one pipeline stage."""

    def __init__(self, stage: str, cfg: PipelineConfig):
        self.stage = stage
        self.cfg = cfg
        self.inputs: list[str] = []
        self.outputs: list[str] = []
        self.out_dir = Path(cfg.out_dir)

    def __enter__(self) -> "StageRunner":
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.lock = self.out_dir / LOCK_NAME
        try:
            fd = os.open(self.lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise ConfigError(
                f"output dir is locked by another stage ({self.lock}); "
                "remove the lock file if that run crashed"
            ) from None
        with os.fdopen(fd, "w") as f:
            f.write(f"{self.stage} pid={os.getpid()}\n")
        self.started = time.monotonic()
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        self.lock.unlink(missing_ok=True)
        if exc_type is None:
            self._write_manifest()

    def need(self, *paths: str) -> None:
        for p in paths:
            if not Path(p).exists():
                raise DataError(f"{self.stage}: missing input {p}")
            self.inputs.append(p)

    def made(self, *paths: str) -> None:
        self.outputs.extend(paths)

    def _write_manifest(self) -> None:
        manifest = {
            "stage": self.stage,
            "seed": self.cfg.seed,
            "config_sha256": config_sha256(self.cfg),
            "inputs": {p: _sha256_file(p) for p in self.inputs},
            "outputs": {p: _sha256_file(p) for p in self.outputs},
            "wall_time_s": round(time.monotonic() - self.started, 3),
        }
        path = self.out_dir / f"{self.stage}_manifest.json"
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", "utf-8")
        log.info("%s done in %.2fs", self.stage, manifest["wall_time_s"])


def _load_corpus(cfg: PipelineConfig, runner: StageRunner) -> corpus.Corpus:
    paths = cfg.corpus_paths()
    runner.need(*paths.values())
    loaded, diagnostics = corpus.load_corpus(paths, cfg.field_delimiter())
    for diag in diagnostics:
        log.warning("%s", diag)
    return loaded


def _load_encoders(cfg: PipelineConfig, runner: StageRunner) -> projection.Encoders:
    runner.need(cfg.title_vocab_path, cfg.comment_vocab_path, cfg.labels_path)
    return projection.Encoders(
        title_vocab=text_encoder.Vocabulary.load(cfg.title_vocab_path),
        comment_vocab=text_encoder.Vocabulary.load(cfg.comment_vocab_path),
        attribute_encoder=attributes.AttributeEncoder.load(cfg.labels_path, cfg.attribute),
    )


def _load_pair_encoder(cfg: PipelineConfig, runner: StageRunner) -> projection.PairEncoder:
    encoders = _load_encoders(cfg, runner)
    runner.need(cfg.features_path)
    features = feature_store.read_features(cfg.features_path)
    ctx_model = None
    ctx_features = None
    if cfg.mode != "vis_lang":
        runner.need(cfg.contextnet_path)
        ctx_model = contextnet.load_model(cfg.contextnet_path)
        if cfg.ctx_features_path != cfg.features_path:
            runner.need(cfg.ctx_features_path)
            ctx_features = feature_store.read_features(cfg.ctx_features_path)
    return projection.PairEncoder(encoders, features, cfg.mode, ctx_model, ctx_features)


# --------------------------------------------------------------------------
# stages


def cmd_synth_features(cfg: PipelineConfig) -> int:
    with StageRunner("synth-features", cfg) as runner:
        data = _load_corpus(cfg, runner)
        file = feature_store.synthesize_features(
            data, cfg.synth_dim, cfg.synth_attribute, cfg.synth_noise_sigma, cfg.seed
        )
        feature_store.write_features(file, cfg.features_path)
        runner.made(cfg.features_path)
    return EXIT_OK


def cmd_build_vocab(cfg: PipelineConfig) -> int:
    with StageRunner("build-vocab", cfg) as runner:
        data = _load_corpus(cfg, runner)
        text_encoder.build_title_vocab(data).save(cfg.title_vocab_path)
        text_encoder.build_comment_vocab(
            data, cfg.vocab_min_count, cfg.vocab_count_mode
        ).save(cfg.comment_vocab_path)
        attributes.AttributeEncoder.from_corpus(data, cfg.attribute).save(cfg.labels_path)
        runner.made(cfg.title_vocab_path, cfg.comment_vocab_path, cfg.labels_path)
    return EXIT_OK


def cmd_build_graph(cfg: PipelineConfig) -> int:
    with StageRunner("build-graph", cfg) as runner:
        data = _load_corpus(cfg, runner)
        graph = knowledge_graph.build_graph(data, cfg.graph_attribute_list())
        knowledge_graph.save_edge_list(graph, cfg.graph_path)
        runner.made(cfg.graph_path)
    return EXIT_OK


def cmd_train_node2vec(cfg: PipelineConfig) -> int:
    with StageRunner("train-node2vec", cfg) as runner:
        runner.need(cfg.graph_path)
        graph = knowledge_graph.load_edge_list(cfg.graph_path)
        n2v_config = node2vec.Node2vecConfig(
            p=cfg.n2v_p,
            q=cfg.n2v_q,
            walks_per_node=cfg.n2v_walks_per_node,
            walk_length=cfg.n2v_walk_length,
            window=cfg.n2v_window,
            negatives_per_positive=cfg.n2v_negatives,
            epochs=cfg.n2v_epochs,
            learning_rate=cfg.n2v_lr,
            lr_floor=cfg.n2v_lr_floor,
            dim=cfg.n2v_dim,
            seed=cfg.seed,
        )
        walks = node2vec.sample_walks(graph, n2v_config)
        table = node2vec.train_node2vec(walks, graph, n2v_config)
        feature_store.write_features(table.to_feature_file(), cfg.embeddings_path)
        runner.made(cfg.embeddings_path)
    return EXIT_OK


def cmd_train_contextnet(cfg: PipelineConfig) -> int:
    if cfg.mode == "vis_lang":
        raise ConfigError("mode vis_lang uses no ContextNet; nothing to train")
    with StageRunner("train-contextnet", cfg) as runner:
        data = _load_corpus(cfg, runner)
        runner.need(cfg.ctx_features_path)
        features = feature_store.read_features(cfg.ctx_features_path)
        lambda_e = cfg.ctx_lambda_e if cfg.mode == "att_contextnet" else 0.0
        embeddings = None
        if cfg.mode == "att_contextnet":
            runner.need(cfg.embeddings_path)
            embeddings = node2vec.EmbeddingTable.from_feature_file(
                feature_store.read_features(cfg.embeddings_path)
            )
        model, trace = contextnet.train_contextnet(
            data,
            features,
            embeddings,
            contextnet.ContextNetConfig(
                lambda_c=cfg.ctx_lambda_c,
                lambda_e=lambda_e,
                epochs=cfg.ctx_epochs,
                batch=cfg.ctx_batch,
                lr=cfg.ctx_lr,
                seed=cfg.seed,
            ),
            attribute=cfg.attribute,
        )
        contextnet.save_model(model, cfg.contextnet_path)
        contextnet.write_trace(trace, cfg.contextnet_trace_path)
        runner.made(cfg.contextnet_path, cfg.contextnet_trace_path)
    return EXIT_OK


def cmd_train_projection(cfg: PipelineConfig) -> int:
    with StageRunner("train-projection", cfg) as runner:
        data = _load_corpus(cfg, runner)
        encoders = _load_encoders(cfg, runner)
        runner.need(cfg.features_path)
        features = feature_store.read_features(cfg.features_path)
        ctx_model = None
        ctx_features = None
        if cfg.mode != "vis_lang":
            runner.need(cfg.contextnet_path)
            ctx_model = contextnet.load_model(cfg.contextnet_path)
            if cfg.ctx_features_path != cfg.features_path:
                runner.need(cfg.ctx_features_path)
                ctx_features = feature_store.read_features(cfg.ctx_features_path)
        model, trace = projection.train_projection(
            data,
            encoders,
            features,
            ctx_model,
            projection.ProjectionConfig(
                mode=cfg.mode,
                batch=cfg.proj_batch,
                lr=cfg.proj_lr,
                epochs=cfg.proj_epochs,
                margin=cfg.proj_margin,
                seed=cfg.seed,
                select_best=cfg.proj_select_best,
                negatives=cfg.proj_negatives,
            ),
            ctx_features=ctx_features,
        )
        projection.save_model(model, cfg.projection_path)
        projection.write_trace(trace, cfg.projection_trace_path)
        runner.made(cfg.projection_path, cfg.projection_trace_path)
    return EXIT_OK


def _require_model(cfg: PipelineConfig) -> None:
    if not Path(cfg.projection_path).exists():
        raise DataError(f"missing model {cfg.projection_path}")


def cmd_evaluate(cfg: PipelineConfig) -> int:
    _require_model(cfg)
    with StageRunner("evaluate", cfg) as runner:
        data = _load_corpus(cfg, runner)
        pair_encoder = _load_pair_encoder(cfg, runner)
        runner.need(cfg.projection_path)
        model = projection.load_model(cfg.projection_path)
        paintings = data.split(cfg.eval_split)
        if not paintings:
            raise DataError(f"eval split {cfg.eval_split!r} is empty")
        reports = retrieval.evaluate_both_directions(model, pair_encoder, paintings)
        payload = [r.to_json_dict() for r in reports]
        Path(cfg.report_path).write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", "utf-8"
        )
        runner.made(cfg.report_path)
        if cfg.scores_tsv_path:
            matrix = retrieval.score_all(
                model, pair_encoder, paintings, paintings, retrieval.TEXT_TO_IMAGE
            )
            retrieval.export_scores_tsv(matrix, cfg.scores_tsv_path)
            runner.made(cfg.scores_tsv_path)
        print(json.dumps(payload, sort_keys=True))
    return EXIT_OK


def cmd_ten_choice(cfg: PipelineConfig) -> int:
    _require_model(cfg)
    with StageRunner("ten-choice", cfg) as runner:
        data = _load_corpus(cfg, runner)
        pair_encoder = _load_pair_encoder(cfg, runner)
        runner.need(cfg.projection_path)
        model = projection.load_model(cfg.projection_path)
        paintings = data.split(cfg.eval_split)
        accuracy = retrieval.ten_choice_eval(
            retrieval.projection_scorer(model, pair_encoder),
            paintings,
            mode=cfg.ten_choice_mode,
            trials=cfg.ten_choice_trials,
            seed=cfg.seed,
        )
        payload = {
            "mode": cfg.ten_choice_mode,
            "trials": cfg.ten_choice_trials,
            "accuracy": accuracy,
        }
        Path(cfg.ten_choice_path).write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", "utf-8"
        )
        runner.made(cfg.ten_choice_path)
        print(json.dumps(payload, sort_keys=True))
    return EXIT_OK


def cmd_query(cfg: PipelineConfig, text: str, attribute_value: str | None) -> int:
    _require_model(cfg)
    with StageRunner("query", cfg) as runner:
        data = _load_corpus(cfg, runner)
        pair_encoder = _load_pair_encoder(cfg, runner)
        runner.need(cfg.projection_path)
        model = projection.load_model(cfg.projection_path)
        paintings = data.split(cfg.query_split)
        if not paintings:
            raise DataError(f"query split {cfg.query_split!r} is empty")
        q_vec = pair_encoder.encode_free_text(text, attribute_value)
        g_vec = projection.project_g(model, q_vec)
        scores = np.array(
            [
                float(projection.project_f(model, pair_encoder.encode_image(p)) @ g_vec)
                for p in paintings
            ]
        )
        order = np.argsort(-scores, kind="stable")[: cfg.query_topk]
        payload = {
            "query": text,
            "attribute_value": attribute_value,
            "split": cfg.query_split,
            "topk": [
                {"id": paintings[int(i)].id, "score": float(scores[int(i)])}
                for i in order
            ],
        }
        print(json.dumps(payload, sort_keys=True))
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmart", description="painting/comment retrieval pipeline"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    stages = [
        ("synth-features", "generate deterministic synthetic visual features"),
        ("build-vocab", "build title/comment vocabularies and attribute labels"),
        ("build-graph", "build the painting-attribute knowledge graph"),
        ("train-node2vec", "learn 128-d graph node embeddings"),
        ("train-contextnet", "train the attribute classifier + graph encoder"),
        ("train-projection", "train the f/g heads with the cosine margin loss"),
        ("evaluate", "report R@K and median rank in both directions"),
        ("ten-choice", "run the ten-choice easy/difficult protocol"),
        ("query", "rank paintings for a free-text query"),
    ]
    for name, help_text in stages:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override one config key (repeatable)",
        )
        if name == "query":
            p.add_argument("text", help="free-text query")
            p.add_argument("--attribute-value", help="optional attribute value hint")
    return parser


def _overrides_from_args(pairs: list[str]) -> dict[str, str]:
    overrides = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {pair!r}")
        overrides[key.strip()] = value.strip()
    return overrides


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(name)s: %(message)s"
    )
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        overrides = _overrides_from_args(args.set)
        if "MMA_SEED" in os.environ and "seed" not in overrides:
            overrides["seed"] = os.environ["MMA_SEED"]
        cfg = load_config(args.config, overrides)
        if args.command == "query":
            return cmd_query(cfg, args.text, args.attribute_value)
        handler = {
            "synth-features": cmd_synth_features,
            "build-vocab": cmd_build_vocab,
            "build-graph": cmd_build_graph,
            "train-node2vec": cmd_train_node2vec,
            "train-contextnet": cmd_train_contextnet,
            "train-projection": cmd_train_projection,
            "evaluate": cmd_evaluate,
            "ten-choice": cmd_ten_choice,
        }[args.command]
        return handler(cfg)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except (DataError, FileNotFoundError) as exc:
        log.error("%s", exc)
        return EXIT_DATA
    except NumericError as exc:
        log.error("%s", exc)
        return EXIT_NUMERIC
    except MmartError as exc:
        log.error("%s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
