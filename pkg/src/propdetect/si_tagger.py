"""Span identification: a recurrent per-token propaganda tagger.

Architecture: word vectors -> LSTM -> position-wise dense layer (ReLU,
dropout) -> one sigmoid unit per token. Word vectors are fixed inputs;
any object with ``dim`` and ``token_vectors(tokens, lowercase)`` works
(a :class:`~propdetect.embeddings.WordVectorTable` or a provider that
supplies per-token vectors).
"""

from __future__ import annotations

import copy
import csv
import json
import logging
from collections.abc import Sequence
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np
import torch
from torch import nn

from . import _torch
from .corpus import Article, PropagandaSpan
from .embeddings import DEFAULT_WORD_DIM
from .metrics import ConfusionCounts, prf, score_si
from .tokenization import TaggedSequence, Token, decode_spans, split_sequences, tokenize

__all__ = [
    "TaggerConfig",
    "TaggerModel",
    "predict_probabilities",
    "predict_spans",
    "spans_from_probabilities",
    "token_scores",
    "train_tagger",
]

log = logging.getLogger(__name__)

BUNDLE_VERSION = 1


@dataclass
class TaggerConfig:
    embedding_dim: int = DEFAULT_WORD_DIM
    hidden_units: int = 150
    dense_units: int = 8
    dropout_rate: float = 0.2
    bidirectional: bool = False
    learning_rate: float = 0.01
    optimizer: str = "adam"
    epochs: int = 50
    batch_size: int = 16
    max_sequence_length: int = 128
    decision_threshold: float = 0.5
    pos_weight: float = 1.0
    lowercase: bool = True
    select_best_on_dev: bool = False
    seed: int = 7

    def __post_init__(self):
        if self.embedding_dim < 1:
            raise ValueError("embedding_dim must be >= 1")
        if self.hidden_units < 1 or self.dense_units < 1:
            raise ValueError("hidden_units and dense_units must be >= 1")
        if not 0 <= self.dropout_rate < 1:
            raise ValueError("dropout_rate must be in [0, 1)")
        if not 0 < self.decision_threshold < 1:
            raise ValueError("decision_threshold must be in (0, 1)")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.optimizer != "adam":
            raise ValueError(f"unsupported optimizer {self.optimizer!r}")
        if self.epochs < 0 or self.batch_size < 1 or self.max_sequence_length < 1:
            raise ValueError("epochs >= 0, batch_size >= 1, max_sequence_length >= 1 required")
        if self.pos_weight <= 0:
            raise ValueError("pos_weight must be positive")

    @classmethod
    def from_dict(cls, data: dict) -> TaggerConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown tagger config keys: {sorted(unknown)}")
        return cls(**data)


class _TaggerNet(nn.Module):
    def __init__(self, cfg: TaggerConfig):
        super().__init__()
        self.lstm = nn.LSTM(cfg.embedding_dim, cfg.hidden_units, batch_first=True,
                            bidirectional=cfg.bidirectional)
        width = cfg.hidden_units * (2 if cfg.bidirectional else 1)
        self.dense = nn.Linear(width, cfg.dense_units)
        self.dropout = nn.Dropout(cfg.dropout_rate)
        self.out = nn.Linear(cfg.dense_units, 1)

    def forward(self, x, lengths):
        h, _ = _torch.run_lstm(self.lstm, x, lengths)
        h = self.dropout(torch.relu(self.dense(h)))
        return self.out(h).squeeze(-1)


class TaggerModel:
    def __init__(self, config: TaggerConfig, net: _TaggerNet | None = None,
                 history: list[dict] | None = None):
        self.config = config
        if net is None:
            with _torch.seeded(config.seed):
                net = _TaggerNet(config)
        self.net = net.eval()
        self.history = history if history is not None else []

    def save(self, directory: str | Path, extra: dict | None = None) -> Path:
        """Write weights, config, history and a manifest into ``directory``."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        torch.save(self.net.state_dict(), directory / "weights.pt")
        (directory / "config.json").write_text(
            json.dumps(asdict(self.config), indent=2) + "\n")
        _write_history(directory / "history.csv", self.history)
        manifest = {"format_version": BUNDLE_VERSION, "kind": "si-tagger",
                    **(extra or {})}
        (directory / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
        return directory

    @classmethod
    def load(cls, directory: str | Path) -> TaggerModel:
        directory = Path(directory)
        manifest = json.loads((directory / "manifest.json").read_text())
        if manifest.get("kind") != "si-tagger":
            raise ValueError(f"{directory} is not an SI tagger bundle")
        if manifest.get("format_version") != BUNDLE_VERSION:
            raise ValueError(f"unsupported bundle version {manifest.get('format_version')}")
        config = TaggerConfig.from_dict(json.loads((directory / "config.json").read_text()))
        net = _TaggerNet(config)
        net.load_state_dict(torch.load(directory / "weights.pt", weights_only=True))
        return cls(config, net, _read_history(directory / "history.csv"))


def _write_history(path: Path, history: list[dict]) -> None:
    cols = ["epoch", "loss", "dev_f1"]
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=cols, extrasaction="ignore")
        w.writeheader()
        for row in history:
            w.writerow({k: ("" if row.get(k) is None else row[k]) for k in cols})


def _read_history(path: Path) -> list[dict]:
    if not path.exists():
        return []
    with open(path, newline="") as f:
        return [{"epoch": int(r["epoch"]), "loss": float(r["loss"]),
                 "dev_f1": float(r["dev_f1"]) if r["dev_f1"] else None}
                for r in csv.DictReader(f)]


def _features(vectors, tokens: Sequence[Token], cfg: TaggerConfig) -> torch.Tensor:
    return _torch.to_tensor(vectors.token_vectors(tokens[:cfg.max_sequence_length],
                                                  cfg.lowercase))


def _probabilities_batch(net, cfg, vectors, token_lists) -> list[np.ndarray]:
    """Inference over several token lists at once; truncated tail scores 0."""
    out = [np.zeros(len(t)) for t in token_lists]
    idx = [i for i, t in enumerate(token_lists) if t]
    for chunk in _torch.batches(len(idx), 64, None):
        sel = [idx[i] for i in chunk]
        x, lengths = _torch.pad([_features(vectors, token_lists[i], cfg) for i in sel])
        with torch.no_grad():
            probs = torch.sigmoid(net(x, lengths)).double().numpy()
        for row, i in enumerate(sel):
            n = int(lengths[row])
            out[i][:n] = probs[row, :n]
    return out


def train_tagger(sequences: Sequence[TaggedSequence], vectors, config: TaggerConfig,
                 dev: Sequence[TaggedSequence] | None = None) -> TaggerModel:
    """Fit the tagger with Adam and per-token binary cross-entropy.

    ``history`` gets one row per epoch with the mean training token loss
    and, when ``dev`` is given, the character-level span F1 on it.
    """
    if vectors.dim != config.embedding_dim:
        raise ValueError(f"dimension mismatch: config.embedding_dim="
                         f"{config.embedding_dim}, vectors.dim={vectors.dim}")
    if not sequences:
        raise ValueError("empty training set")
    if any(not s.tokens for s in sequences):
        raise ValueError("training sequences must be non-empty")

    cfg = config
    xs = [_features(vectors, s.tokens, cfg) for s in sequences]
    ys = [torch.tensor(s.labels[:cfg.max_sequence_length], dtype=torch.float32)
          for s in sequences]
    rng = np.random.default_rng(cfg.seed)
    history = []
    best = (-1.0, None)

    with _torch.seeded(cfg.seed):
        net = _TaggerNet(cfg)
        opt = torch.optim.Adam(net.parameters(), lr=cfg.learning_rate)
        loss_fn = nn.BCEWithLogitsLoss(reduction="none",
                                       pos_weight=torch.tensor(cfg.pos_weight))
        for epoch in range(1, cfg.epochs + 1):
            net.train()
            total, count = 0.0, 0
            for batch in _torch.batches(len(xs), cfg.batch_size, rng):
                x, lengths = _torch.pad([xs[i] for i in batch])
                y, _ = _torch.pad([ys[i] for i in batch])
                mask = (torch.arange(x.shape[1])[None, :] < lengths[:, None]).float()
                logits = net(x, lengths)
                loss = (loss_fn(logits, y) * mask).sum() / mask.sum()
                opt.zero_grad()
                loss.backward()
                opt.step()
                total += loss.item() * float(mask.sum())
                count += int(mask.sum())
            net.eval()
            row = {"epoch": epoch, "loss": total / count, "dev_f1": None}
            if dev:
                row["dev_f1"] = _dev_f1(net, cfg, vectors, dev)
                if cfg.select_best_on_dev and row["dev_f1"] > best[0]:
                    best = (row["dev_f1"], copy.deepcopy(net.state_dict()))
            log.debug("epoch %d loss %.4f dev_f1 %s", epoch, row["loss"], row["dev_f1"])
            history.append(row)

    if cfg.select_best_on_dev and best[1] is not None:
        net.load_state_dict(best[1])
    return TaggerModel(cfg, net, history)


def _dev_f1(net, cfg, vectors, dev) -> float:
    probs = _probabilities_batch(net, cfg, vectors, [s.tokens for s in dev])
    gold, pred = [], []
    for seq, p in zip(dev, probs):
        gold += decode_spans(seq.tokens, seq.labels, seq.article_id)
        pred += spans_from_probabilities(seq.tokens, p, cfg.decision_threshold,
                                         seq.article_id)
    return score_si(gold, pred).f1


def predict_probabilities(model: TaggerModel, tokens: Sequence[Token],
                          vectors) -> list[float]:
    if not tokens:
        return []
    return _probabilities_batch(model.net, model.config, vectors, [list(tokens)])[0].tolist()


def spans_from_probabilities(tokens: Sequence[Token], probs: Sequence[float],
                             threshold: float, article_id: str = "0"
                             ) -> list[PropagandaSpan]:
    labels = [int(p >= threshold) for p in probs]
    return decode_spans(tokens, labels, article_id)


def predict_spans(model: TaggerModel, article: Article, vectors) -> list[PropagandaSpan]:
    """Tag every line of ``article`` and return the propaganda spans."""
    lines = [tokenize(line, start) for line, start in split_sequences(article)]
    probs = _probabilities_batch(model.net, model.config, vectors, lines)
    spans = []
    for tokens, p in zip(lines, probs):
        spans += spans_from_probabilities(tokens, p, model.config.decision_threshold,
                                          article.id)
    return sorted(spans, key=lambda s: (s.begin, s.end))


def token_scores(model: TaggerModel, sequences: Sequence[TaggedSequence], vectors):
    """Token-level precision/recall/F1 of thresholded predictions."""
    probs = _probabilities_batch(model.net, model.config, vectors,
                                 [s.tokens for s in sequences])
    tp = fp = fn = tn = 0
    thr = model.config.decision_threshold
    for seq, p in zip(sequences, probs):
        for gold, prob in zip(seq.labels, p):
            hit = prob >= thr
            tp += hit and gold
            fp += hit and not gold
            fn += (not hit) and gold
            tn += (not hit) and not gold
    return prf(ConfusionCounts(int(tp), int(fp), int(fn), int(tn)))
