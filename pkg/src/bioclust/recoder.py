"""Re-coding log lines into the 20-letter amino-acid alphabet, and FASTA I/O.

Every byte ``a`` (0-255) yields a leading symbol ``a // 20`` and a trailing
symbol ``a % 20``.  FULL mode keeps both and is invertible; COMPRESSED mode
keeps only the trailing symbol.
"""

from __future__ import annotations

import enum
import os
import re
import tempfile
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, FastaParseError
from .ingest import LogRecord

__all__ = [
    "ALPHABET",
    "EncodingMode",
    "BioSequence",
    "recode",
    "recode_bytes",
    "decode_full",
    "write_fasta",
    "read_fasta",
    "retranslate",
]

ALPHABET = "ACDEFGHIKLMNPQRSTVWY"

_SYMBOLS = np.frombuffer(ALPHABET.encode("ascii"), dtype=np.uint8)
_INDEX = np.full(256, 255, dtype=np.uint8)
_INDEX[_SYMBOLS] = np.arange(20, dtype=np.uint8)
_LEAD = _SYMBOLS[np.arange(256) // 20]
_TRAIL = _SYMBOLS[np.arange(256) % 20]
_COMPRESS_TABLE = bytes(_TRAIL)


class EncodingMode(str, enum.Enum):
    FULL = "full"
    COMPRESSED = "compressed"

    @classmethod
    def parse(cls, value) -> "EncodingMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown encoding mode {value!r} (expected 'full' or 'compressed')") from None


@dataclass(frozen=True)
class BioSequence:
    source_index: int
    mode: EncodingMode
    symbols: str

    def __len__(self):
        return len(self.symbols)

    @cached_property
    def codes(self) -> np.ndarray:
        """Symbols as alphabet indices (``uint8``), as consumed by the aligner."""
        return _to_codes(self.symbols)


def _to_codes(symbols: str) -> np.ndarray:
    raw = np.frombuffer(symbols.encode("ascii", errors="replace"), dtype=np.uint8)
    codes = _INDEX[raw]
    if codes.size and codes.max() == 255:
        bad = symbols[int(np.argmax(codes == 255))]
        raise ValueError(f"symbol {bad!r} is not in the alphabet")
    return codes


def recode_bytes(data: bytes, mode: EncodingMode) -> str:
    if mode is EncodingMode.COMPRESSED:
        return data.translate(_COMPRESS_TABLE).decode("ascii")
    arr = np.frombuffer(data, dtype=np.uint8)
    out = np.empty(2 * arr.size, dtype=np.uint8)
    out[0::2] = _LEAD[arr]
    out[1::2] = _TRAIL[arr]
    return out.tobytes().decode("ascii")


def recode(record: LogRecord, mode: EncodingMode = EncodingMode.COMPRESSED) -> BioSequence:
    if not record.text:
        raise DataError(f"empty line (record {record.index})")
    mode = EncodingMode.parse(mode)
    return BioSequence(record.index, mode, recode_bytes(record.text, mode))


def decode_full(sequence: BioSequence | str) -> bytes:
    """Invert FULL-mode re-coding back to the original bytes."""
    if isinstance(sequence, BioSequence):
        if sequence.mode is not EncodingMode.FULL:
            raise DataError("lossy mode is not invertible")
        symbols = sequence.symbols
    else:
        symbols = sequence
    if len(symbols) % 2:
        raise DataError("corrupt full-mode sequence: odd length")
    try:
        codes = _to_codes(symbols).astype(np.int32)
    except ValueError as exc:
        raise DataError(f"corrupt full-mode sequence: {exc}") from None
    values = codes[0::2] * 20 + codes[1::2]
    if values.size and values.max() > 255:
        pos = int(np.argmax(values > 255))
        raise DataError(f"corrupt full-mode sequence: pair {symbols[2 * pos:2 * pos + 2]!r} exceeds 255")
    return values.astype(np.uint8).tobytes()


def _atomic_write(path, data: bytes):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_fasta(sequences: Iterable[BioSequence], path) -> None:
    """Write ``> {index}x`` headers, each followed by one unwrapped body line."""
    seen = set()
    chunks = []
    for seq in sequences:
        if seq.source_index in seen:
            raise DataError(f"duplicate source index {seq.source_index}")
        seen.add(seq.source_index)
        chunks.append(f"> {seq.source_index}x\n{seq.symbols}\n")
    try:
        _atomic_write(path, "".join(chunks).encode("ascii"))
    except OSError as exc:
        raise DataError(f"cannot write FASTA {path}: {exc.strerror or exc}") from exc


_HEADER = re.compile(r">\s?(\d+)x\s*$")
_BODY = re.compile(f"[{ALPHABET}]*")


def read_fasta(path, mode: EncodingMode = EncodingMode.COMPRESSED) -> list[BioSequence]:
    """Parse a FASTA file written by :func:`write_fasta` (wrapped bodies allowed).

    FASTA carries no mode information, so the caller states it.
    """
    mode = EncodingMode.parse(mode)
    try:
        text = Path(path).read_text(encoding="ascii")
    except UnicodeDecodeError as exc:
        raise FastaParseError(f"non-ASCII byte at offset {exc.start}") from None
    except OSError as exc:
        raise DataError(f"cannot read FASTA {path}: {exc.strerror or exc}") from exc

    out = []
    index = None
    body: list[str] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if line.startswith(">"):
            if index is not None:
                out.append(BioSequence(index, mode, "".join(body)))
            m = _HEADER.fullmatch(line)
            if m is None:
                raise FastaParseError(f"malformed header {line!r}", lineno)
            index = int(m.group(1))
            body = []
        elif line:
            if index is None:
                raise FastaParseError("sequence data before first header", lineno)
            if not _BODY.fullmatch(line):
                bad = next(c for c in line if c not in ALPHABET)
                raise FastaParseError(f"symbol {bad!r} outside the alphabet", lineno)
            body.append(line)
    if index is not None:
        out.append(BioSequence(index, mode, "".join(body)))
    return out


def retranslate(members: Sequence[int], corpus: Sequence[LogRecord]) -> list[LogRecord]:
    """Look up original records by source index, in member order."""
    by_index = None
    out = []
    for idx in members:
        rec = corpus[idx] if 0 <= idx < len(corpus) else None
        if rec is None or rec.index != idx:
            if by_index is None:
                by_index = {r.index: r for r in corpus}
            rec = by_index.get(idx)
        if rec is None:
            raise DataError(f"unknown source index {idx}")
        out.append(rec)
    return out
