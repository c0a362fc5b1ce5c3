"""Articles, span annotations and the technique taxonomy.

Offsets are code-point offsets into the decoded article text. A span
``[begin, end)`` covers characters ``begin .. end - 1``.

Label files are tab separated:

* SI: ``id  begin  end``
* TC: ``id  technique  begin  end``

Trailing columns (e.g. a quoted text column) are ignored on read.
"""

from __future__ import annotations

import enum
import re
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

__all__ = [
    "Article",
    "LabelDistribution",
    "LabelFormatError",
    "PropagandaSpan",
    "REFERENCE_TRAIN_COUNTS",
    "TechniqueLabel",
    "TechniqueSpan",
    "label_distribution",
    "load_article",
    "load_articles",
    "parse_si_labels",
    "parse_tc_labels",
    "read_si_file",
    "read_tc_file",
    "write_predictions",
]

_ARTICLE_NAME = re.compile(r"^article([0-9]+)\.txt$")


def _is_id(s: str) -> bool:
    return bool(s) and s.isascii() and s.isdigit()


class LabelFormatError(ValueError):
    """A label file line could not be parsed or failed validation."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"{message} at line {line}"
        super().__init__(message)


class TechniqueLabel(str, enum.Enum):
    APPEAL_TO_AUTHORITY = "Appeal_to_Authority"
    APPEAL_TO_FEAR_PREJUDICE = "Appeal_to_fear-prejudice"
    BANDWAGON_REDUCTIO_AD_HITLERUM = "Bandwagon,Reductio_ad_hitlerum"
    BLACK_AND_WHITE_FALLACY = "Black-and-White_Fallacy"
    CAUSAL_OVERSIMPLIFICATION = "Causal_Oversimplification"
    DOUBT = "Doubt"
    EXAGGERATION_MINIMISATION = "Exaggeration,Minimisation"
    FLAG_WAVING = "Flag-Waving"
    LOADED_LANGUAGE = "Loaded_Language"
    NAME_CALLING_LABELING = "Name_Calling,Labeling"
    REPETITION = "Repetition"
    SLOGANS = "Slogans"
    THOUGHT_TERMINATING_CLICHES = "Thought-terminating_Cliches"
    WHATABOUTISM_STRAW_MEN_RED_HERRING = "Whataboutism,Straw_Men,Red_Herring"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, name: str) -> TechniqueLabel:
        """Resolve a technique name case-insensitively."""
        try:
            return _LABEL_LOOKUP[name.strip().lower()]
        except KeyError:
            raise ValueError(f"unknown technique {name!r}") from None

    @property
    def index(self) -> int:
        return _LABEL_INDEX[self]

    @classmethod
    def from_index(cls, i: int) -> TechniqueLabel:
        return _LABELS[i]


_LABELS: tuple[TechniqueLabel, ...] = tuple(TechniqueLabel)
_LABEL_INDEX = {label: i for i, label in enumerate(_LABELS)}
_LABEL_LOOKUP = {label.value.lower(): label for label in _LABELS}

# Per-technique span counts in the shared-task training set.
REFERENCE_TRAIN_COUNTS: dict[TechniqueLabel, int] = {
    TechniqueLabel.APPEAL_TO_AUTHORITY: 155,
    TechniqueLabel.APPEAL_TO_FEAR_PREJUDICE: 321,
    TechniqueLabel.BANDWAGON_REDUCTIO_AD_HITLERUM: 77,
    TechniqueLabel.BLACK_AND_WHITE_FALLACY: 112,
    TechniqueLabel.CAUSAL_OVERSIMPLIFICATION: 212,
    TechniqueLabel.DOUBT: 517,
    TechniqueLabel.EXAGGERATION_MINIMISATION: 493,
    TechniqueLabel.FLAG_WAVING: 250,
    TechniqueLabel.LOADED_LANGUAGE: 2200,
    TechniqueLabel.NAME_CALLING_LABELING: 1105,
    TechniqueLabel.REPETITION: 621,
    TechniqueLabel.SLOGANS: 138,
    TechniqueLabel.THOUGHT_TERMINATING_CLICHES: 80,
    TechniqueLabel.WHATABOUTISM_STRAW_MEN_RED_HERRING: 109,
}


@dataclass(frozen=True)
class Article:
    id: str
    text: str

    def __post_init__(self):
        if not _is_id(self.id):
            raise ValueError(f"article id must be decimal digits, got {self.id!r}")


@dataclass(frozen=True, order=True)
class PropagandaSpan:
    article_id: str
    begin: int
    end: int

    def __post_init__(self):
        if self.begin < 0:
            raise ValueError(f"negative begin offset {self.begin}")
        if self.begin >= self.end:
            raise ValueError(f"begin >= end ({self.begin} >= {self.end})")

    def __len__(self) -> int:
        return self.end - self.begin

    def text(self, article: Article) -> str:
        return article.text[self.begin:self.end]


@dataclass(frozen=True)
class TechniqueSpan:
    span: PropagandaSpan
    technique: TechniqueLabel

    @property
    def article_id(self) -> str:
        return self.span.article_id

    @property
    def begin(self) -> int:
        return self.span.begin

    @property
    def end(self) -> int:
        return self.span.end


@dataclass(frozen=True)
class LabelDistribution:
    counts: Mapping[TechniqueLabel, int]

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def __getitem__(self, label: TechniqueLabel) -> int:
        return self.counts[label]


def load_article(path: str | Path) -> Article:
    """Read ``article{ID}.txt`` verbatim (UTF-8, no newline translation)."""
    path = Path(path)
    m = _ARTICLE_NAME.match(path.name)
    if m is None:
        raise ValueError(f"file name {path.name!r} does not match article{{ID}}.txt")
    raw = path.read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ValueError(f"{path} is not valid UTF-8: {exc}") from exc
    return Article(m.group(1), text)


def load_articles(directory: str | Path) -> dict[str, Article]:
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"article directory not found: {directory}")
    articles = {}
    for path in sorted(directory.iterdir()):
        if _ARTICLE_NAME.match(path.name):
            art = load_article(path)
            articles[art.id] = art
    return articles


def _parse_offsets(begin: str, end: str, lineno: int) -> tuple[int, int]:
    try:
        b, e = int(begin, 10), int(end, 10)
    except ValueError:
        raise LabelFormatError(
            f"non-integer offsets {begin!r}, {end!r}", lineno) from None
    if b < 0:
        raise LabelFormatError(f"negative begin offset {b}", lineno)
    if b >= e:
        raise LabelFormatError("begin >= end", lineno)
    return b, e


def _check_range(span: PropagandaSpan, articles, lineno: int) -> None:
    if articles is None:
        return
    art = articles.get(span.article_id)
    if art is None:
        raise LabelFormatError(f"unknown article {span.article_id}", lineno)
    if span.end > len(art.text):
        raise LabelFormatError(
            f"span [{span.begin}, {span.end}) exceeds length {len(art.text)} "
            f"of article {span.article_id}", lineno)


def _lines(stream: Iterable[str] | str) -> Iterable[str]:
    if isinstance(stream, str):
        return stream.split("\n")
    return stream


def parse_si_labels(stream: Iterable[str] | str,
                    articles: Mapping[str, Article] | None = None,
                    ) -> list[PropagandaSpan]:
    """Parse SI label lines into spans, in input order.

    Blank lines are skipped. When ``articles`` is given every span is
    also checked to lie inside its article.
    """
    spans = []
    for lineno, line in enumerate(_lines(stream), start=1):
        line = line.rstrip("\r\n")
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) < 3:
            raise LabelFormatError(
                f"expected >= 3 tab-separated fields, got {len(fields)}", lineno)
        article_id = fields[0].strip()
        if not _is_id(article_id):
            raise LabelFormatError(f"bad article id {article_id!r}", lineno)
        b, e = _parse_offsets(fields[1].strip(), fields[2].strip(), lineno)
        span = PropagandaSpan(article_id, b, e)
        _check_range(span, articles, lineno)
        spans.append(span)
    return spans


def parse_tc_labels(stream: Iterable[str] | str,
                    articles: Mapping[str, Article] | None = None,
                    ) -> list[TechniqueSpan]:
    """Parse TC label lines (``id technique begin end``) in input order."""
    spans = []
    for lineno, line in enumerate(_lines(stream), start=1):
        line = line.rstrip("\r\n")
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) < 4:
            raise LabelFormatError(
                f"expected >= 4 tab-separated fields, got {len(fields)}", lineno)
        article_id = fields[0].strip()
        if not _is_id(article_id):
            raise LabelFormatError(f"bad article id {article_id!r}", lineno)
        try:
            technique = TechniqueLabel.parse(fields[1])
        except ValueError:
            raise LabelFormatError(
                f"unknown technique {fields[1]!r}", lineno) from None
        b, e = _parse_offsets(fields[2].strip(), fields[3].strip(), lineno)
        span = PropagandaSpan(article_id, b, e)
        _check_range(span, articles, lineno)
        spans.append(TechniqueSpan(span, technique))
    return spans


def read_si_file(path, articles=None) -> list[PropagandaSpan]:
    with open(path, encoding="utf-8") as f:
        return parse_si_labels(f, articles)


def read_tc_file(path, articles=None) -> list[TechniqueSpan]:
    with open(path, encoding="utf-8") as f:
        return parse_tc_labels(f, articles)


def write_predictions(spans: Sequence[PropagandaSpan | TechniqueSpan],
                      kind: str) -> str:
    """Render spans in the SI or TC label format, one newline-terminated row each."""
    kind = kind.upper()
    out = []
    if kind == "SI":
        for s in spans:
            if isinstance(s, TechniqueSpan):
                s = s.span
            out.append(f"{s.article_id}\t{s.begin}\t{s.end}\n")
    elif kind == "TC":
        for s in spans:
            if not isinstance(s, TechniqueSpan):
                raise TypeError("TC output needs TechniqueSpan records")
            out.append(f"{s.article_id}\t{s.technique}\t{s.begin}\t{s.end}\n")
    else:
        raise ValueError(f"kind must be SI or TC, got {kind!r}")
    return "".join(out)


def label_distribution(spans: Iterable[TechniqueSpan]) -> LabelDistribution:
    counts = dict.fromkeys(TechniqueLabel, 0)
    for s in spans:
        counts[s.technique] += 1
    return LabelDistribution(counts)
