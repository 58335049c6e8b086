"""Reading raw log files and homogenizing timestamps."""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from datetime import datetime
from pathlib import Path
from typing import Iterable

from .errors import ConfigError, DataError

__all__ = [
    "LogRecord",
    "HomogenizeConfig",
    "TimestampRule",
    "read_corpus",
    "homogenize",
    "parse_rule",
]


@dataclass(frozen=True)
class LogRecord:
    """One log line. ``index`` is the 0-based line number in the source file."""

    index: int
    raw: bytes
    text: bytes


# strptime directive -> regex fragment; anything else is rejected at load time
_DIRECTIVES = {
    "d": r"\d{2}",
    "e": r"[ \d]\d",
    "m": r"\d{2}",
    "b": r"[A-Z][a-z]{2}",
    "Y": r"\d{4}",
    "y": r"\d{2}",
    "H": r"\d{2}",
    "M": r"\d{2}",
    "S": r"\d{2}",
    "f": r"\d{1,6}",
    "z": r"[+-]\d{4}",
    "j": r"\d{3}",
    "%": "%",
}


def _format_to_regex(fmt: str) -> str:
    out = []
    i = 0
    while i < len(fmt):
        ch = fmt[i]
        if ch == "%":
            if i + 1 >= len(fmt):
                raise ConfigError(f"dangling '%' in timestamp format {fmt!r}")
            d = fmt[i + 1]
            if d not in _DIRECTIVES:
                raise ConfigError(f"unsupported directive %{d} in timestamp format {fmt!r}")
            out.append(_DIRECTIVES[d])
            i += 2
        else:
            out.append(re.escape(ch))
            i += 1
    return "".join(out)


@dataclass(frozen=True)
class TimestampRule:
    """Rewrite timestamps matching ``source`` (strptime format) into ``target`` (strftime)."""

    source: str
    target: str
    pattern: re.Pattern = field(compare=False, repr=False)

    @classmethod
    def compile(cls, source: str, target: str) -> "TimestampRule":
        if not source or not target:
            raise ConfigError("timestamp rule needs both a source and a target format")
        regex = _format_to_regex(source)
        _format_to_regex(target)
        return cls(source, target, re.compile(regex))

    def apply(self, text: str) -> str | None:
        for match in self.pattern.finditer(text):
            try:
                stamp = datetime.strptime(match.group(0), self.source)
            except ValueError:
                continue
            return text[: match.start()] + stamp.strftime(self.target) + text[match.end():]
        return None


def parse_rule(spec: str) -> TimestampRule:
    """Parse ``"<strptime format> -> <strftime format>"``."""
    if "->" not in spec:
        raise ConfigError(f"malformed timestamp rule {spec!r}: expected 'SOURCE -> TARGET'")
    source, target = (part.strip() for part in spec.split("->", 1))
    return TimestampRule.compile(source, target)


@dataclass(frozen=True)
class HomogenizeConfig:
    timestamp_rules: tuple[TimestampRule, ...] = ()
    drop_empty: bool = True

    @classmethod
    def from_specs(cls, specs: Iterable[str], drop_empty: bool = True) -> "HomogenizeConfig":
        return cls(tuple(parse_rule(s) for s in specs), drop_empty)


def homogenize(record: LogRecord, config: HomogenizeConfig) -> LogRecord:
    """Apply the first matching timestamp rule to ``record.raw``."""
    if not config.timestamp_rules:
        return replace(record, text=record.raw)
    # latin-1 maps bytes 1:1 onto code points, so non-UTF-8 input survives
    text = record.raw.decode("latin-1")
    for rule in config.timestamp_rules:
        rewritten = rule.apply(text)
        if rewritten is not None:
            return replace(record, text=rewritten.encode("latin-1"))
    return replace(record, text=record.raw)


def _split_lines(data: bytes) -> list[bytes]:
    lines = data.split(b"\n")
    if lines and lines[-1] == b"":
        lines.pop()
    return [ln[:-1] if ln.endswith(b"\r") else ln for ln in lines]


def read_corpus(path, config: HomogenizeConfig | None = None, stats: dict | None = None) -> list[LogRecord]:
    """Read ``path`` into records, one per non-empty line.

    ``stats``, when given, receives ``lines`` and ``dropped`` counts.
    """
    config = config or HomogenizeConfig()
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read corpus {path}: {exc.strerror or exc}") from exc
    lines = _split_lines(data)
    records = []
    dropped = 0
    for index, raw in enumerate(lines):
        if not raw and config.drop_empty:
            dropped += 1
            continue
        records.append(homogenize(LogRecord(index, raw, raw), config))
    if stats is not None:
        stats["lines"] = len(lines)
        stats["dropped"] = dropped
    if not records:
        raise DataError(f"empty corpus: {path}")
    return records
