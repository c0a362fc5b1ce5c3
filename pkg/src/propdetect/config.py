"""Experiment configuration: one JSON document with per-subtask sections.

Example (all keys optional; missing keys take the defaults below)::

    {
      "embeddings": {"word_vectors": "vectors.txt", "sentence_dim": 768,
                     "service": {"host": "localhost", "port": 8125, "timeout": 30}},
      "si": {"source": "glove", "hidden_units": 150, "dense_units": 8, ...},
      "tc": {"representation": "recurrent_last_hidden", "hidden_units": 50, ...}
    }

Relative ``word_vectors`` paths resolve against the config file's directory.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .embeddings import DEFAULT_SENTENCE_DIM, DEFAULT_WORD_DIM
from .si_tagger import TaggerConfig
from .tc_classifier import ClassifierConfig

__all__ = ["ConfigError", "EmbeddingSettings", "ExperimentConfig", "load_config"]

SI_SOURCES = ("glove", "provider")


class ConfigError(ValueError):
    """The configuration document violates the schema."""


@dataclass
class EmbeddingSettings:
    word_vectors: str | None = None
    word_dim: int = DEFAULT_WORD_DIM
    sentence_dim: int = DEFAULT_SENTENCE_DIM
    host: str = "localhost"
    port: int = 8125
    timeout: float = 30.0


@dataclass
class ExperimentConfig:
    embeddings: EmbeddingSettings = field(default_factory=EmbeddingSettings)
    si_source: str = "glove"
    si: TaggerConfig = field(default_factory=TaggerConfig)
    # Recurrent over provider token vectors: the selected TC model.
    tc: ClassifierConfig = field(default_factory=lambda: ClassifierConfig(
        representation="recurrent_last_hidden", word_source="provider"))
    base_dir: Path = field(default_factory=Path.cwd)

    def word_vectors_path(self) -> Path | None:
        if self.embeddings.word_vectors is None:
            return None
        return (self.base_dir / self.embeddings.word_vectors).resolve()

    def to_dict(self) -> dict:
        emb = self.embeddings
        return {
            "embeddings": {
                "word_vectors": emb.word_vectors,
                "word_dim": emb.word_dim,
                "sentence_dim": emb.sentence_dim,
                "service": {"host": emb.host, "port": emb.port, "timeout": emb.timeout},
            },
            "si": {"source": self.si_source, **asdict(self.si)},
            "tc": asdict(self.tc),
        }

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def _strict(cls, data: dict, section: str):
    if not isinstance(data, dict):
        raise ConfigError(f"section {section!r} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys in {section!r}: {sorted(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {section!r} section: {exc}") from exc


def parse_config(doc: dict, base_dir: Path | None = None) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - {"embeddings", "si", "tc"}
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")

    emb_doc = dict(doc.get("embeddings", {}))
    service = emb_doc.pop("service", {})
    if not isinstance(service, dict):
        raise ConfigError("embeddings.service must be an object")
    embeddings = _strict(EmbeddingSettings, {**emb_doc, **service}, "embeddings")

    si_doc = dict(doc.get("si", {}))
    source = si_doc.pop("source", "glove")
    if source not in SI_SOURCES:
        raise ConfigError(f"si.source must be one of {SI_SOURCES}, got {source!r}")
    si_doc.setdefault("embedding_dim", embeddings.word_dim if source == "glove"
                      else embeddings.sentence_dim)
    si = _strict(TaggerConfig, si_doc, "si")

    tc_doc = dict(doc.get("tc", {}))
    tc_doc.setdefault("representation", "recurrent_last_hidden")
    tc_doc.setdefault("word_source", "provider")
    uses_table = (tc_doc["representation"] == "recurrent_last_hidden"
                  and tc_doc["word_source"] == "table")
    tc_doc.setdefault("input_dim", embeddings.word_dim if uses_table
                      else embeddings.sentence_dim)
    tc = _strict(ClassifierConfig, tc_doc, "tc")

    return ExperimentConfig(embeddings, source, si, tc, base_dir or Path.cwd())


def load_config(path: str | Path | None) -> ExperimentConfig:
    """Read a config file; ``None`` gives the built-in defaults."""
    if path is None:
        return ExperimentConfig()
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return parse_config(doc, path.parent.resolve())
