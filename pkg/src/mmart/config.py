"""Flat key=value pipeline configuration with CLI overrides.

Precedence is CLI > config file > built-in defaults.  Path fields left
empty are derived from ``out_dir`` with standard artifact names.  The
config hash recorded in run manifests is the SHA-256 of the canonical
sorted key=value rendering after path resolution.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError

_DERIVED_PATHS = {
    "features_path": "features.mmaf",
    "ctx_features_path": None,  # falls back to features_path
    "title_vocab_path": "vocab_title.tsv",
    "comment_vocab_path": "vocab_comment.tsv",
    "labels_path": None,  # labels_<attribute>.txt
    "graph_path": "graph_edges.tsv",
    "embeddings_path": "graph_embeddings.mmaf",
    "contextnet_path": "contextnet.mmck",
    "contextnet_trace_path": "contextnet_trace.csv",
    "projection_path": "projection.mmck",
    "projection_trace_path": "projection_trace.csv",
    "report_path": "report.json",
    "ten_choice_path": "ten_choice.json",
}


@dataclass
class PipelineConfig:
    # corpus inputs
    train_tsv: str = ""
    val_tsv: str = ""
    test_tsv: str = ""
    delimiter: str = "tab"
    out_dir: str = "out"
    # derived-if-empty artifact paths
    features_path: str = ""
    ctx_features_path: str = ""
    title_vocab_path: str = ""
    comment_vocab_path: str = ""
    labels_path: str = ""
    graph_path: str = ""
    embeddings_path: str = ""
    contextnet_path: str = ""
    contextnet_trace_path: str = ""
    projection_path: str = ""
    projection_trace_path: str = ""
    report_path: str = ""
    ten_choice_path: str = ""
    scores_tsv_path: str = ""  # optional text->image score matrix dump
    # pipeline
    mode: str = "att_contextnet"
    attribute: str = "author"
    seed: int = 0
    # vocabularies
    vocab_min_count: int = 10
    vocab_count_mode: str = "total"
    # synthetic features
    synth_dim: int = 64
    synth_attribute: str = "id"
    synth_noise_sigma: float = 0.0
    # knowledge graph / node2vec
    graph_attributes: str = "type,school,timeframe,author"
    n2v_dim: int = 128
    n2v_p: float = 1.0
    n2v_q: float = 1.0
    n2v_walks_per_node: int = 10
    n2v_walk_length: int = 40
    n2v_window: int = 5
    n2v_negatives: int = 5
    n2v_epochs: int = 5
    n2v_lr: float = 0.025
    n2v_lr_floor: float = 0.0001
    # contextnet
    ctx_lambda_c: float = 1.0
    ctx_lambda_e: float = 1.0
    ctx_epochs: int = 50
    ctx_batch: int = 32
    ctx_lr: float = 0.001
    # projection
    proj_batch: int = 32
    proj_lr: float = 0.0001
    proj_epochs: int = 50
    proj_margin: float = 0.1
    proj_select_best: bool = True
    proj_negatives: int = 0  # 0 = all in-batch pairs, k > 0 = k sampled per match
    # evaluation
    eval_split: str = "test"
    ten_choice_mode: str = "easy"
    ten_choice_trials: int = 1000
    query_split: str = "test"
    query_topk: int = 5

    def field_delimiter(self) -> str:
        return "\t" if self.delimiter == "tab" else self.delimiter

    def corpus_paths(self) -> dict[str, str]:
        paths = {}
        for split, value in (
            ("train", self.train_tsv),
            ("val", self.val_tsv),
            ("test", self.test_tsv),
        ):
            if value:
                paths[split] = value
        if not paths:
            raise ConfigError("no corpus files configured (train_tsv/val_tsv/test_tsv)")
        return paths

    def graph_attribute_list(self) -> tuple[str, ...]:
        return tuple(a.strip() for a in self.graph_attributes.split(",") if a.strip())


_FIELDS = {f.name: f for f in dataclasses.fields(PipelineConfig)}


def _coerce(key: str, raw: str):
    kind = _FIELDS[key].type
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, value = stripped.partition("=")
        if not sep:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        values[key.strip()] = value.strip()
    return values


def load_config(
    path: str | Path | None, overrides: dict[str, str] | None = None
) -> PipelineConfig:
    cfg = PipelineConfig()
    merged: dict[str, str] = {}
    if path is not None:
        file_path = Path(path)
        if not file_path.exists():
            raise ConfigError(f"config file not found: {file_path}")
        merged.update(parse_config_text(file_path.read_text(encoding="utf-8"), str(file_path)))
    merged.update(overrides or {})
    for key, raw in merged.items():
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        setattr(cfg, key, _coerce(key, raw))
    _resolve_paths(cfg)
    return cfg


def _resolve_paths(cfg: PipelineConfig) -> None:
    out = Path(cfg.out_dir)
    for key, default_name in _DERIVED_PATHS.items():
        if getattr(cfg, key):
            continue
        if key == "ctx_features_path":
            setattr(cfg, key, cfg.features_path or str(out / "features.mmaf"))
        elif key == "labels_path":
            setattr(cfg, key, str(out / f"labels_{cfg.attribute}.txt"))
        else:
            setattr(cfg, key, str(out / default_name))


def config_sha256(cfg: PipelineConfig) -> str:
    lines = sorted(
        f"{f.name}={getattr(cfg, f.name)}" for f in dataclasses.fields(PipelineConfig)
    )
    return hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()
