"""Deterministic synthetic corpus in the shared-task file layout.

Sentences are built from a neutral vocabulary; propaganda fragments are
short runs of technique keywords, so span membership and technique are
both determined by the words themselves. Layout written by
:func:`generate_fixture`::

    out/
      train/article{ID}.txt  train/labels-SI.tsv  train/labels-TC.tsv
      dev/article{ID}.txt    dev/labels-SI.tsv    dev/labels-TC.tsv
      vectors.txt          # word vectors, one "word v1 .. vd" per line
      config.json          # default experiment config pointing at vectors.txt
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Article, PropagandaSpan, TechniqueLabel, TechniqueSpan, write_predictions

__all__ = ["FixtureSplit", "NEUTRAL_WORDS", "TECHNIQUE_KEYWORDS", "build_split",
           "generate_fixture", "write_vectors"]

NEUTRAL_WORDS = (
    "the city council met on tuesday to discuss budget plans for new roads "
    "and local schools while residents asked about water rates during an "
    "evening session at town hall where members reviewed reports from staff "
    "before voting on several proposals").split()

TECHNIQUE_KEYWORDS: dict[TechniqueLabel, tuple[str, ...]] = {
    TechniqueLabel.LOADED_LANGUAGE: ("shocking", "disgraceful", "outrageous", "horrific", "vile"),
    TechniqueLabel.NAME_CALLING_LABELING: ("traitors", "clowns", "thugs", "puppets", "crooks"),
    TechniqueLabel.DOUBT: ("allegedly", "supposedly", "dubious", "questionable", "suspicious"),
    TechniqueLabel.FLAG_WAVING: ("patriots", "homeland", "motherland", "heroes", "glorious"),
}

PUNCTUATION = (",", ".")
SI_LABELS = "labels-SI.tsv"
TC_LABELS = "labels-TC.tsv"


@dataclass
class FixtureSplit:
    articles: dict[str, Article]
    si: list[PropagandaSpan]
    tc: list[TechniqueSpan]


def _sentence(rng: random.Random, techniques):
    """Return (text, [(begin, end, technique)]) for one line."""
    n_phrases = rng.choices([0, 1, 2], weights=[2, 6, 2])[0]
    words = [rng.choice(NEUTRAL_WORDS) for _ in range(rng.randint(5, 9))]
    # Phrase slots sit 3 neutral words apart.
    slots = sorted(rng.sample(range(0, len(words) + 1, 3), n_phrases))
    pieces: list[tuple[str, TechniqueLabel | None]] = []
    phrase_at = {}
    for s in slots:
        tech = rng.choice(techniques)
        phrase_at[s] = (tuple(rng.choice(TECHNIQUE_KEYWORDS[tech])
                              for _ in range(rng.randint(1, 3))), tech)
    for i in range(len(words) + 1):
        if i in phrase_at:
            words_, tech = phrase_at[i]
            pieces.append((" ".join(words_), tech))
        if i < len(words):
            w = words[i]
            if rng.random() < 0.1:
                w += ","
            pieces.append((w, None))

    text, spans = "", []
    for k, (piece, tech) in enumerate(pieces):
        if k == 0:
            piece = piece[0].upper() + piece[1:]
        else:
            text += " "
        if tech is not None:
            spans.append((len(text), len(text) + len(piece), tech))
        text += piece
    if text.endswith(","):
        text = text[:-1]
    return text + ".", spans


def build_split(n_articles: int, sentences_per_article: int, seed: int,
                first_id: int = 700000001,
                techniques=tuple(TECHNIQUE_KEYWORDS)) -> FixtureSplit:
    rng = random.Random(seed)
    articles, si, tc = {}, [], []
    for a in range(n_articles):
        art_id = str(first_id + a)
        lines, offset = [], 0
        for _ in range(sentences_per_article):
            line, spans = _sentence(rng, list(techniques))
            for b, e, tech in spans:
                span = PropagandaSpan(art_id, offset + b, offset + e)
                si.append(span)
                tc.append(TechniqueSpan(span, tech))
            lines.append(line)
            offset += len(line) + 1
        articles[art_id] = Article(art_id, "\n".join(lines) + "\n")
    return FixtureSplit(articles, si, tc)


def fixture_vocabulary() -> list[str]:
    words = list(dict.fromkeys(NEUTRAL_WORDS))
    for kws in TECHNIQUE_KEYWORDS.values():
        words += kws
    return words + list(PUNCTUATION)


def write_vectors(path: str | Path, words, dim: int, seed: int) -> None:
    rng = np.random.default_rng(seed)
    with open(path, "w", encoding="utf-8") as f:
        for w in words:
            vec = rng.standard_normal(dim)
            f.write(w + " " + " ".join(f"{v:.6f}" for v in vec) + "\n")


def _write_split(out: Path, name: str, split: FixtureSplit) -> None:
    split_dir = out / name
    split_dir.mkdir(parents=True, exist_ok=True)
    for art in split.articles.values():
        # newline="" keeps the text byte-identical to the offsets.
        with open(split_dir / f"article{art.id}.txt", "w", encoding="utf-8", newline="") as f:
            f.write(art.text)
    (split_dir / SI_LABELS).write_text(write_predictions(split.si, "SI"), encoding="utf-8")
    (split_dir / TC_LABELS).write_text(write_predictions(split.tc, "TC"), encoding="utf-8")


def generate_fixture(out_dir: str | Path, *, seed: int = 13, train_articles: int = 6,
                     dev_articles: int = 3, sentences_per_article: int = 5,
                     dim: int = 100) -> dict[str, FixtureSplit]:
    """Write a train/dev fixture corpus plus a matching word-vector file.

    The defaults give a 30-sentence training split.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    splits = {
        "train": build_split(train_articles, sentences_per_article, seed),
        "dev": build_split(dev_articles, sentences_per_article, seed + 1,
                           first_id=800000001),
    }
    for name, split in splits.items():
        _write_split(out, name, split)
    write_vectors(out / "vectors.txt", fixture_vocabulary(), dim, seed)
    from .config import parse_config

    parse_config({"embeddings": {"word_vectors": "vectors.txt", "word_dim": dim}}
                 ).dump(out / "config.json")
    return splits
