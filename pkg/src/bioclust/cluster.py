"""Greedy incremental clustering of re-coded log lines.

Sequences are processed longest first; each one joins the cluster whose
representative it resembles most (or, without best-match, the first one it
resembles enough), otherwise it founds a new cluster.  Candidate
representatives are pre-screened by length, by a shared k-mer count and by a
symbol-composition bound; all screens are admissible, so they only skip
alignments whose outcome could not change the assignment.
"""

from __future__ import annotations

import bisect
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from numba import typed, types

from . import _kernels
from .align import EVAL, SLACK, ScoringScheme, required_shared_kmers
from .errors import ConfigError, DataError
from .recoder import ALPHABET, BioSequence, EncodingMode, _atomic_write

__all__ = [
    "ClusterParams",
    "Cluster",
    "ClusterModel",
    "Classification",
    "PairCache",
    "cluster_greedy",
    "classify",
    "adopt_outlier",
]

log = logging.getLogger(__name__)

MODEL_MAGIC = "# bioclust cluster model"
MODEL_VERSION = 1


@dataclass(frozen=True)
class ClusterParams:
    threshold: float
    scheme: ScoringScheme = EVAL
    k: int = 5
    best_match: bool = True

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError(f"threshold must lie in (0, 1), got {self.threshold}")
        if not 2 <= self.k <= 8:
            raise ConfigError(f"word length k must lie in 2..8, got {self.k}")


@dataclass
class Cluster:
    id: int
    representative: BioSequence
    members: list[int] = field(default_factory=list)

    @property
    def size(self) -> int:
        return len(self.members)


class PairCache:
    """Alignment results ``(identical, length)`` keyed by ``(query, representative)``
    source indices.

    Alignments do not depend on the threshold, so one cache can be shared by
    every clustering of the same corpus, mode and scheme.
    """

    def __init__(self):
        self.table = _new_table()

    def __len__(self):
        return len(self.table)

    def get(self, query: int, rep: int) -> tuple[int, int] | None:
        packed = self.table.get(_pair_key(query, rep), -1)
        return None if packed < 0 else (packed >> 32, packed & 0xFFFFFFFF)


def _new_table():
    return typed.Dict.empty(key_type=types.int64, value_type=types.int64)


def _pair_key(query: int, rep: int) -> int:
    return (query << 32) | rep


# windows with fewer representatives are screened without the inverted index
INDEX_MIN = 32


class _RepIndex:
    """Representative sequences laid out for batched screening."""

    def __init__(self, k: int):
        self.k = k
        self.codes: list[np.ndarray] = []
        self.source: list[int] = []
        self.lengths: list[int] = []
        self._neg_lengths: list[int] = []
        self._flat = np.empty(1024, dtype=np.int64)
        self._used = 0
        self.flat_codes = np.empty(4096, dtype=np.uint8)
        self.code_starts = np.empty(64, dtype=np.int64)
        self.lengths_arr = np.empty(64, dtype=np.int64)
        self.sources_arr = np.empty(64, dtype=np.int64)
        self._code_used = 0
        self._hist = np.zeros((16, 20), dtype=np.int64)
        self.word_starts = np.empty(64, dtype=np.int64)
        self.word_ends = np.empty(64, dtype=np.int64)
        # inverted index: word -> representatives containing it
        self._keys = np.full(1024, -1, dtype=np.int64)
        self._heads = np.empty(1024, dtype=np.int64)
        self._plens = np.zeros(1024, dtype=np.int64)
        self._nkeys = 0
        self._ent_rep = np.empty(4096, dtype=np.int64)
        self._ent_next = np.empty(4096, dtype=np.int64)
        self._nent = 0
        self._acc = np.zeros(64, dtype=np.int64)

    def __len__(self):
        return len(self.codes)

    def add(self, seq: BioSequence):
        codes = seq.codes
        words = _kernels.kmer_codes(codes, self.k)
        need = self._used + words.shape[0]
        if need > self._flat.shape[0]:
            grown = np.empty(max(need, 2 * self._flat.shape[0]), dtype=np.int64)
            grown[: self._used] = self._flat[: self._used]
            self._flat = grown
        self._flat[self._used:need] = words
        r = len(self.codes)
        self._store_offsets(r, seq.source_index, codes.shape[0], self._used, need)
        self._used = need
        if r >= self._hist.shape[0]:
            grown = np.zeros((2 * self._hist.shape[0], 20), dtype=np.int64)
            grown[:r] = self._hist[:r]
            self._hist = grown
        self._hist[r] = np.bincount(codes, minlength=20)
        self._store_codes(codes, r)
        self.codes.append(codes)
        self.source.append(seq.source_index)
        self.lengths.append(len(codes))
        self._neg_lengths.append(-len(codes))
        self._post(np.unique(words), r)

    def _store_offsets(self, r: int, source: int, length: int, word_start: int, word_end: int):
        if r >= self.code_starts.shape[0]:
            size = 2 * self.code_starts.shape[0]
            for name in ("code_starts", "lengths_arr", "sources_arr", "word_starts", "word_ends"):
                setattr(self, name, np.resize(getattr(self, name), size))
        self.lengths_arr[r] = length
        self.sources_arr[r] = source
        self.word_starts[r] = word_start
        self.word_ends[r] = word_end

    def _store_codes(self, codes: np.ndarray, r: int):
        end = self._code_used + codes.shape[0]
        if end > self.flat_codes.shape[0]:
            self.flat_codes = np.resize(self.flat_codes, max(end, 2 * self.flat_codes.shape[0]))
        self.flat_codes[self._code_used:end] = codes
        self.code_starts[r] = self._code_used
        self._code_used = end

    def _post(self, distinct: np.ndarray, r: int):
        d = distinct.shape[0]
        if 2 * (self._nkeys + d) > self._keys.shape[0]:
            size = self._keys.shape[0]
            while 2 * (self._nkeys + d) > size:
                size *= 2
            self._keys, self._heads, self._plens = _kernels.postings_rehash(
                self._keys, self._heads, self._plens, size)
        if self._nent + d > self._ent_rep.shape[0]:
            size = max(self._nent + d, 2 * self._ent_rep.shape[0])
            self._ent_rep = np.resize(self._ent_rep, size)
            self._ent_next = np.resize(self._ent_next, size)
        if r >= self._acc.shape[0]:
            self._acc = np.zeros(2 * self._acc.shape[0], dtype=np.int64)
        added, self._nent = _kernels.postings_insert(
            self._keys, self._heads, self._plens, self._ent_rep, self._ent_next, self._nent, distinct, r)
        self._nkeys += added

    def candidates(self, words: np.ndarray, need: int, ids: range) -> np.ndarray | None:
        """Ids in ``ids`` that may share ``need`` words with the query, or None
        when scanning ``ids`` directly is cheaper."""
        distinct, counts = _kernels.distinct_counts(words)
        out = np.empty(len(ids), dtype=np.int64)
        max_work = len(ids) * max(8, words.shape[0] // 2)
        n = _kernels.postings_candidates(
            self._keys, self._heads, self._plens, self._ent_rep, self._ent_next, distinct, counts,
            need, ids.start, ids.stop, max_work, self._acc, out)
        return None if n < 0 else out[:n]

    def window(self, n: int, threshold: float) -> range | None:
        """Representatives, all at least ``n`` long, that ``n`` can pair with."""
        # representative lengths never increase with id during greedy clustering
        longest = int(n / (threshold - SLACK))
        lo = bisect.bisect_left(self._neg_lengths, -longest)
        hi = bisect.bisect_right(self._neg_lengths, -n)
        return range(lo, hi)

    def screen(self, words: np.ndarray, hist: np.ndarray, ids: np.ndarray):
        starts, ends = self.word_starts, self.word_ends
        shared = np.empty(ids.shape[0], dtype=np.int64)
        overlap = np.empty(ids.shape[0], dtype=np.int64)
        _kernels.shared_counts_flat(words, self._flat, starts[ids], ends[ids], shared)
        _kernels.overlaps_flat(hist, self._hist[ids], overlap)
        return shared, overlap


class _Matcher:
    """Evaluates one query against a set of representatives."""

    def __init__(self, params: ClusterParams, reps: _RepIndex, prefilter: bool, banded: bool,
                 cache: PairCache | None):
        self.params = params
        self.reps = reps
        self.prefilter = prefilter
        self.banded = banded
        self.table = cache.table if cache is not None else _new_table()
        self.scheme = np.asarray(params.scheme.as_tuple(), dtype=np.int64)
        self._ops = np.empty(1024, dtype=np.uint8)
        self._best = np.empty(3, dtype=np.int64)
        # alignments run, alignments skipped by the common-subsequence bound
        self.counters = np.zeros(2, dtype=np.int64)
        self._empty = np.empty(0, dtype=np.int64)

    @property
    def alignments(self) -> int:
        return int(self.counters[0])

    def best(self, q: BioSequence, ids, best=None):
        """Return ``(rep, identical, length)`` of the winning representative, or ``best``.

        ``ids`` are representative ids ascending; ``best`` is a prior winner
        among smaller ids, reused when an identical query was seen before.
        """
        x = self.params.threshold
        k = self.params.k
        n = len(q)
        if len(ids) == 0:
            return best
        qwords = None
        if self.prefilter and isinstance(ids, range) and len(ids) >= INDEX_MIN and n >= k:
            need = required_shared_kmers(n, x, k)
            if need > 0:
                qwords = _kernels.kmer_codes(q.codes, k)
                found = self.reps.candidates(qwords, need, ids)
                if found is not None:
                    ids = found
                    if ids.size == 0:
                        return best
        ids = np.asarray(ids, dtype=np.int64)
        if not self.prefilter:
            order = ids
            shared = overlap = self._empty
        else:
            if qwords is None:
                qwords = _kernels.kmer_codes(q.codes, k)
            qhist = np.bincount(q.codes, minlength=20).astype(np.int64)
            shared, overlap = self.reps.screen(qwords, qhist, ids)
            if self.params.best_match:
                # most promising first, so that later candidates face a tighter bar
                perm = np.lexsort((ids, -shared))
                order, shared, overlap = ids[perm], shared[perm], overlap[perm]
            else:
                order = ids
        need_ops = n + int(self.reps.lengths_arr[order].max())
        if self._ops.shape[0] < need_ops:
            self._ops = np.empty(2 * need_ops, dtype=np.uint8)
        state = self._best
        if best is None:
            state[:] = (-1, 0, 1)
        else:
            state[:] = best
        _kernels.scan_representatives(
            q.codes, q.source_index, order, shared, overlap, self.reps.flat_codes, self.reps.code_starts,
            self.reps.lengths_arr, self.reps.sources_arr, x, SLACK, k, self.prefilter,
            self.params.best_match, self.banded, self.scheme, self.table, state, self._ops, self.counters)
        if state[0] < 0:
            return None
        return (int(state[0]), int(state[1]), int(state[2]))


@dataclass
class ClusterModel:
    clusters: list[Cluster]
    params: ClusterParams
    mode: EncodingMode
    corpus_size: int
    _index: _RepIndex | None = field(default=None, init=False, repr=False, compare=False)

    def __len__(self):
        return len(self.clusters)

    def sizes(self) -> list[int]:
        return [c.size for c in self.clusters]

    def rep_index(self) -> _RepIndex:
        if self._index is None or len(self._index) != len(self.clusters):
            idx = _RepIndex(self.params.k)
            for c in self.clusters:
                idx.add(c.representative)
            self._index = idx
        return self._index

    # persistence -----------------------------------------------------------

    def dumps(self) -> str:
        p = self.params
        lines = [
            MODEL_MAGIC,
            f"version\t{MODEL_VERSION}",
            f"mode\t{self.mode.value}",
            f"threshold\t{p.threshold!r}",
            f"scheme\t{','.join(str(v) for v in p.scheme.as_tuple())}",
            f"k\t{p.k}",
            f"best_match\t{int(p.best_match)}",
            f"corpus_size\t{self.corpus_size}",
            f"clusters\t{len(self.clusters)}",
        ]
        for c in self.clusters:
            lines.append(f"cluster\t{c.id}\t{c.representative.symbols}\t{','.join(map(str, c.members))}")
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        _atomic_write(path, self.dumps().encode("ascii"))

    @classmethod
    def loads(cls, text: str) -> "ClusterModel":
        lines = text.splitlines()
        if not lines or lines[0] != MODEL_MAGIC:
            raise DataError("not a cluster model file")
        header: dict[str, str] = {}
        clusters = []
        for lineno, line in enumerate(lines[1:], start=2):
            if not line:
                continue
            parts = line.split("\t")
            if parts[0] == "cluster":
                if len(parts) != 4:
                    raise DataError(f"model line {lineno}: malformed cluster record")
                clusters.append(parts[1:])
            elif len(parts) == 2:
                header[parts[0]] = parts[1]
            else:
                raise DataError(f"model line {lineno}: unrecognised record")
        try:
            if int(header["version"]) != MODEL_VERSION:
                raise DataError(f"unsupported model version {header['version']}")
            mode = EncodingMode.parse(header["mode"])
            params = ClusterParams(
                threshold=float(header["threshold"]),
                scheme=ScoringScheme.parse(header["scheme"]),
                k=int(header["k"]),
                best_match=header["best_match"] == "1",
            )
            corpus_size = int(header["corpus_size"])
            expected = int(header["clusters"])
        except KeyError as exc:
            raise DataError(f"model header lacks {exc.args[0]!r}") from None
        except (ValueError, ConfigError) as exc:
            raise DataError(f"bad model header: {exc}") from None
        if expected != len(clusters):
            raise DataError(f"model declares {expected} clusters but holds {len(clusters)}")
        out = []
        for cid, symbols, members in clusters:
            if symbols.strip(ALPHABET):
                raise DataError(f"cluster {cid}: representative has symbols outside the alphabet")
            member_list = [int(m) for m in members.split(",")] if members else []
            if not member_list:
                raise DataError(f"cluster {cid}: no members")
            out.append(Cluster(int(cid), BioSequence(member_list[0], mode, symbols), member_list))
        return cls(out, params, mode, corpus_size)

    @classmethod
    def load(cls, path) -> "ClusterModel":
        try:
            text = Path(path).read_text(encoding="ascii")
        except (OSError, UnicodeDecodeError) as exc:
            raise DataError(f"cannot read model {path}: {exc}") from exc
        return cls.loads(text)

    def to_tsv(self) -> str:
        """Cluster report, largest clusters first."""
        rows = ["cluster_id\tsize\trepresentative_index\tmember_indices"]
        for c in sorted(self.clusters, key=lambda c: (-c.size, c.id)):
            rows.append(f"{c.id}\t{c.size}\t{c.members[0]}\t{','.join(map(str, c.members))}")
        return "\n".join(rows) + "\n"


def _check_modes(sequences: Sequence[BioSequence]) -> EncodingMode:
    modes = {s.mode for s in sequences}
    if len(modes) != 1:
        raise DataError("mixed encoding modes in one clustering run")
    return modes.pop()


def cluster_greedy(
    sequences: Sequence[BioSequence],
    params: ClusterParams,
    *,
    prefilter: bool = True,
    banded: bool = True,
    cache: PairCache | None = None,
) -> ClusterModel:
    """Cluster ``sequences`` greedily, longest first.

    ``prefilter=False`` aligns against every length-compatible representative;
    the resulting model is the same, only slower.
    """
    if not sequences:
        raise DataError("nothing to cluster")
    mode = _check_modes(sequences)
    order = sorted(sequences, key=lambda s: (-len(s), s.source_index))
    reps = _RepIndex(params.k)
    matcher = _Matcher(params, reps, prefilter, banded, cache)
    clusters: list[Cluster] = []
    # identical sequences see the same representatives, plus any created since
    seen: dict[str, tuple] = {}
    for seq in order:
        n = len(seq)
        if n == 0:
            raise DataError(f"empty sequence (source index {seq.source_index})")
        prior = seen.get(seq.symbols)
        if prior is not None:
            checked, best = prior
            if best is not None and not params.best_match:
                winner = best
            else:
                winner = matcher.best(seq, range(checked, len(reps)), best)
        else:
            winner = matcher.best(seq, reps.window(n, params.threshold))
        seen[seq.symbols] = (len(reps), winner)
        if winner is None:
            clusters.append(Cluster(len(clusters), seq, [seq.source_index]))
            reps.add(seq)
        else:
            clusters[winner[0]].members.append(seq.source_index)
    log.debug("clustered %d sequences into %d clusters with %d alignments",
              len(order), len(clusters), matcher.alignments)
    model = ClusterModel(clusters, params, mode, len(order))
    model._index = reps
    return model


@dataclass(frozen=True)
class Classification:
    cluster_id: int | None
    similarity: float | None = None

    @property
    def is_outlier(self) -> bool:
        return self.cluster_id is None

    def __str__(self):
        return "outlier" if self.is_outlier else str(self.cluster_id)


def classify(sequence: BioSequence, model: ClusterModel, *, prefilter: bool = True,
             banded: bool = True) -> Classification:
    """Assign ``sequence`` to an existing cluster without changing ``model``."""
    if sequence.mode != model.mode:
        raise DataError("incomparable encodings")
    if len(sequence) == 0:
        raise DataError("cannot classify an empty sequence")
    reps = model.rep_index()
    x = model.params.threshold
    n = len(sequence)
    lengths = np.asarray(reps.lengths, dtype=np.int64)
    short = np.minimum(lengths, n)
    long_ = np.maximum(lengths, n)
    ids = np.flatnonzero(short >= (x - SLACK) * long_)
    winner = _Matcher(model.params, reps, prefilter, banded, None).best(sequence, ids)
    if winner is None:
        return Classification(None)
    r, identical, length = winner
    return Classification(model.clusters[r].id, identical / length)


def adopt_outlier(model: ClusterModel, sequence: BioSequence) -> ClusterModel:
    """Append ``sequence`` as the representative of a new singleton cluster."""
    if sequence.mode != model.mode:
        raise DataError("incomparable encodings")
    next_id = max((c.id for c in model.clusters), default=-1) + 1
    model.rep_index()
    model.clusters.append(Cluster(next_id, sequence, [sequence.source_index]))
    model._index.add(sequence)
    model.corpus_size += 1
    return model
