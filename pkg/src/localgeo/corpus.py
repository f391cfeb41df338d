"""Article model, JSON-lines corpus loading and geocoder query construction."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Iterable, TypeVar

from localgeo.errors import CorpusFormatError, ValidationError

log = logging.getLogger(__name__)

TRIM_WORDS = 10

T = TypeVar("T")


def parse_timestamp(value: str | datetime) -> datetime:
    if isinstance(value, datetime):
        dt = value
    else:
        if not isinstance(value, str) or not value:
            raise ValidationError(f"timestamp must be an ISO-8601 string, got {value!r}")
        try:
            dt = datetime.fromisoformat(value.replace("Z", "+00:00"))
        except ValueError as exc:
            raise ValidationError(f"unparseable timestamp {value!r}") from exc
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def format_timestamp(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class Article:
    id: str
    title: str
    snippet: str
    body: str
    url: str
    publisher: str
    published_at: datetime

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise ValidationError("article id must be a non-empty string")
        if not isinstance(self.publisher, str) or not self.publisher:
            raise ValidationError(f"article {self.id}: publisher must be non-empty")
        for name in ("title", "snippet", "body", "url"):
            if not isinstance(getattr(self, name), str):
                raise ValidationError(f"article {self.id}: {name} must be text")
        object.__setattr__(self, "published_at", parse_timestamp(self.published_at))

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Article:
        if not isinstance(d, dict):
            raise ValidationError("article record must be an object")
        missing = [k for k in ("id", "publisher", "published_at") if k not in d]
        if missing:
            raise ValidationError(f"article record missing {missing}")
        return cls(
            id=d["id"],
            title=d.get("title") or "",
            snippet=d.get("snippet") or "",
            body=d.get("body") or "",
            url=d.get("url") or "",
            publisher=d["publisher"],
            published_at=d["published_at"],
        )

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["published_at"] = format_timestamp(self.published_at)
        return d

    @property
    def text(self) -> str:
        """Title, snippet and body joined; the URL is deliberately left out."""
        return " ".join(p for p in (self.title, self.snippet, self.body) if p)


def trim(field: str, n: int = TRIM_WORDS) -> list[str]:
    """First ``n`` and last ``n`` whitespace-delimited words of a field."""
    words = field.split()
    if len(words) <= 2 * n:
        return words
    return words[:n] + words[-n:]


def build_geocode_query(article: Article, n: int = TRIM_WORDS) -> str:
    words: list[str] = []
    for part in (article.title, article.snippet, article.body):
        words.extend(trim(part, n))
    return " ".join(words)


@dataclass
class LoadReport:
    total: int = 0
    skipped: int = 0
    errors: list[tuple[int, str]] = field(default_factory=list)


def load_jsonl(
    path: str | Path,
    parse: Callable[[dict[str, Any]], T],
    max_invalid_fraction: float = 0.5,
) -> tuple[list[T], LoadReport]:
    """Parse a JSON-lines file record by record, skipping bad lines.

    Blank lines are ignored. Raises CorpusFormatError when more than
    ``max_invalid_fraction`` of the non-blank lines fail.
    """
    items: list[T] = []
    report = LoadReport()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            report.total += 1
            try:
                items.append(parse(json.loads(line)))
            except (ValueError, TypeError, KeyError) as exc:
                report.skipped += 1
                report.errors.append((lineno, str(exc)))
                log.warning("%s:%d: skipped (%s)", path, lineno, exc)
    if report.total and report.skipped / report.total > max_invalid_fraction:
        raise CorpusFormatError(
            f"{path}: {report.skipped} of {report.total} lines invalid"
        )
    return items, report


def load_corpus(path: str | Path) -> tuple[list[Article], LoadReport]:
    seen: set[str] = set()

    def parse(d: dict[str, Any]) -> Article:
        article = Article.from_dict(d)
        if article.id in seen:
            raise ValidationError(f"duplicate article id {article.id}")
        seen.add(article.id)
        return article

    return load_jsonl(path, parse)


def write_jsonl(path: str | Path, records: Iterable[dict[str, Any]]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True, ensure_ascii=False))
            fh.write("\n")
            n += 1
    return n
