"""Outlier extraction, false-positive accounting, threshold sweeps and timing.

An outlier is a cluster with at most ``min_size`` members (one, by default).
Evaluation against a known set of injected target lines counts every outlier
member that is not a target as a false positive; the false-positive rate is
that count over the corpus size, kept as an exact fraction.
"""

from __future__ import annotations

import json
import logging
import tempfile
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .cluster import Cluster, ClusterModel, ClusterParams, PairCache, cluster_greedy
from .corpusgen import ScenarioSpec, generate
from .errors import ConfigError, DataError
from .ingest import HomogenizeConfig, read_corpus
from .recoder import EncodingMode, recode, retranslate

__all__ = [
    "OutlierReport",
    "SweepResult",
    "BenchConfig",
    "BenchRow",
    "BenchResult",
    "detect_outliers",
    "evaluate",
    "thresholds",
    "sweep",
    "bench",
    "format_fpr",
]

log = logging.getLogger(__name__)

REQUIRE_CHOICES = ("all", "any")


def format_fpr(fpr: Fraction) -> str:
    """Scientific notation with three significant digits, e.g. ``2.89e-05``."""
    return f"{float(fpr):.2e}"


def _threshold_text(t: float) -> str:
    return format(t, ".10g")


def detect_outliers(model: ClusterModel, min_size: int = 1) -> list[Cluster]:
    """Clusters with at most ``min_size`` members, smallest first, ties by id."""
    if not model.clusters:
        raise DataError("empty cluster model")
    if min_size < 1:
        raise ConfigError(f"min_size must be >= 1, got {min_size}")
    return sorted((c for c in model.clusters if c.size <= min_size), key=lambda c: (c.size, c.id))


@dataclass(frozen=True)
class OutlierReport:
    threshold: float
    clusters: int
    corpus_size: int
    outlier_indices: tuple[int, ...]
    targets: frozenset[int] = frozenset()
    detected_targets: frozenset[int] = frozenset()

    @property
    def outlier_count(self) -> int:
        return len(self.outlier_indices)

    @property
    def fp(self) -> int:
        return self.outlier_count - len(self.detected_targets)

    @property
    def fpr(self) -> Fraction:
        return Fraction(self.fp, self.corpus_size)

    def detected(self, require: str = "all") -> bool:
        """Whether the targets count as found: every one, or at least one."""
        if not self.targets:
            return False
        if require == "all":
            return self.detected_targets == self.targets
        return bool(self.detected_targets)

    def row(self, require: str = "all") -> dict:
        return {
            "threshold": _threshold_text(self.threshold),
            "clusters": self.clusters,
            "outliers": self.outlier_count,
            "fp": self.fp,
            "fpr": format_fpr(self.fpr),
            "detected": int(self.detected(require)),
        }


def evaluate(model: ClusterModel, targets: Iterable[int] = (), min_size: int = 1) -> OutlierReport:
    """Split the outliers of ``model`` into detected targets and false positives."""
    targets = frozenset(int(t) for t in targets)
    if targets:
        known = {m for c in model.clusters for m in c.members}
        bad = sorted(targets - known)
        if bad:
            raise DataError(f"target index {bad[0]} is not a line of the clustered corpus")
    members = sorted(m for c in detect_outliers(model, min_size) for m in c.members)
    return OutlierReport(
        threshold=model.params.threshold,
        clusters=len(model.clusters),
        corpus_size=model.corpus_size,
        outlier_indices=tuple(members),
        targets=targets,
        detected_targets=targets.intersection(members),
    )


def thresholds(start: float = 0.85, stop: float = 0.99, step: float = 0.01) -> list[float]:
    """``start, start+step, ...`` up to ``stop`` inclusive, free of float drift."""
    if not step > 0:
        raise ConfigError(f"step must be positive, got {step}")
    if not start < stop:
        raise ConfigError(f"sweep start {start} must lie below stop {stop}")
    count = int(np.floor((stop - start) / step + 1e-9))
    return [round(start + i * step, 10) for i in range(count + 1)]


SWEEP_COLUMNS = ("threshold", "clusters", "outliers", "fp", "fpr", "detected")


@dataclass(frozen=True)
class SweepResult:
    reports: tuple[OutlierReport, ...]
    start: float
    stop: float
    step: float
    require: str = "all"
    mode: EncodingMode | None = None

    @property
    def min_detect_threshold(self) -> float | None:
        for r in self.reports:
            if r.detected(self.require):
                return r.threshold
        return None

    def rows(self) -> list[dict]:
        return [r.row(self.require) for r in self.reports]

    def to_tsv(self) -> str:
        lines = ["\t".join(SWEEP_COLUMNS)]
        lines += ["\t".join(str(row[c]) for c in SWEEP_COLUMNS) for row in self.rows()]
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        found = self.min_detect_threshold
        doc = {
            "mode": self.mode.value if self.mode else None,
            "start": self.start,
            "stop": self.stop,
            "step": self.step,
            "require": self.require,
            "min_detect_threshold": None if found is None else _threshold_text(found),
            "rows": self.rows(),
        }
        return json.dumps(doc, indent=2) + "\n"


def sweep(
    corpus: Sequence,
    targets: Iterable[int] = (),
    start: float = 0.85,
    stop: float = 0.99,
    step: float = 0.01,
    base: ClusterParams | None = None,
    *,
    require: str = "all",
    min_size: int = 1,
    prefilter: bool = True,
    progress: Callable[[OutlierReport], None] | None = None,
) -> SweepResult:
    """Cluster ``corpus`` at each threshold of the range and evaluate the outliers.

    Alignment results are shared between thresholds, which changes nothing
    but the running time.
    """
    if require not in REQUIRE_CHOICES:
        raise ConfigError(f"require must be one of {REQUIRE_CHOICES}, got {require!r}")
    grid = thresholds(start, stop, step)
    base = base or ClusterParams(grid[0])
    targets = frozenset(targets)
    cache = PairCache()
    reports = []
    for t in grid:
        model = cluster_greedy(corpus, replace(base, threshold=t), prefilter=prefilter, cache=cache)
        report = evaluate(model, targets, min_size)
        reports.append(report)
        log.info("threshold %s: %d clusters, %d outliers", _threshold_text(t), report.clusters,
                 report.outlier_count)
        if progress is not None:
            progress(report)
    mode = corpus[0].mode if len(corpus) else None
    return SweepResult(tuple(reports), start, stop, step, require, mode)


# ---------------------------------------------------------------------------
# scalability measurement

BENCH_COLUMNS = ("lines", "mode", "recode_s", "cluster_s", "retranslate_s", "total_s", "lines_per_s")


@dataclass(frozen=True)
class BenchConfig:
    """Pipeline settings for :func:`bench`.

    Corpora are prefixes of ``corpus`` when given, otherwise generated from
    ``scenario`` with the requested length.
    """

    params: ClusterParams = field(default_factory=lambda: ClusterParams(0.9))
    modes: tuple[EncodingMode, ...] = (EncodingMode.COMPRESSED,)
    scenario: ScenarioSpec = field(default_factory=lambda: ScenarioSpec(users=4))
    corpus: Path | None = None
    homogenize: HomogenizeConfig | None = None


@dataclass(frozen=True)
class BenchRow:
    lines: int
    mode: EncodingMode
    recode_s: float
    cluster_s: float
    retranslate_s: float
    total_s: float

    @property
    def lines_per_s(self) -> float:
        return self.lines / self.total_s if self.total_s > 0 else float("inf")

    def as_dict(self) -> dict:
        return {
            "lines": self.lines,
            "mode": self.mode.value,
            "recode_s": round(self.recode_s, 4),
            "cluster_s": round(self.cluster_s, 4),
            "retranslate_s": round(self.retranslate_s, 4),
            "total_s": round(self.total_s, 4),
            "lines_per_s": round(self.lines_per_s, 1),
        }


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    r2: float | None


def linear_fit(x: Sequence[float], y: Sequence[float]) -> LinearFit:
    """Least-squares line through ``(x, y)`` with its coefficient of determination."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2 or np.ptp(x) == 0:
        return LinearFit(0.0, float(y.mean()) if y.size else 0.0, None)
    slope, intercept = np.polyfit(x, y, 1)
    ss_res = float(np.sum((y - (slope * x + intercept)) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return LinearFit(float(slope), float(intercept), r2)


@dataclass(frozen=True)
class BenchResult:
    rows: tuple[BenchRow, ...]

    def fit(self, mode: EncodingMode) -> LinearFit:
        rows = [r for r in self.rows if r.mode is mode]
        return linear_fit([r.lines for r in rows], [r.total_s for r in rows])

    def modes(self) -> list[EncodingMode]:
        return list(dict.fromkeys(r.mode for r in self.rows))

    def to_tsv(self) -> str:
        out = ["\t".join(BENCH_COLUMNS)]
        for r in self.rows:
            d = r.as_dict()
            out.append("\t".join(str(d[c]) for c in BENCH_COLUMNS))
        for mode in self.modes():
            f = self.fit(mode)
            r2 = "nan" if f.r2 is None else f"{f.r2:.4f}"
            out.append(f"# fit {mode.value}: total_s = {f.slope:.3e} * lines + {f.intercept:.3f}, R^2 = {r2}")
        return "\n".join(out) + "\n"

    def to_json(self) -> str:
        fits = {}
        for mode in self.modes():
            f = self.fit(mode)
            fits[mode.value] = {"slope": f.slope, "intercept": f.intercept, "r2": f.r2}
        return json.dumps({"rows": [r.as_dict() for r in self.rows], "fits": fits}, indent=2) + "\n"


def _prefix(path: Path, lines: int, dest: Path) -> Path:
    with open(path, "rb") as src:
        head = []
        for raw in src:
            head.append(raw)
            if len(head) == lines:
                break
    if len(head) < lines:
        raise DataError(f"{path} has only {len(head)} lines, {lines} requested")
    dest.write_bytes(b"".join(head))
    return dest


def bench(sizes: Sequence[int], config: BenchConfig | None = None) -> BenchResult:
    """Time recode, cluster and retranslate for each corpus size and mode.

    Stages run one after another; corpus preparation is not timed.
    """
    config = config or BenchConfig()
    if not sizes or any(s < 1 for s in sizes):
        raise ConfigError("bench sizes must be positive")
    rows = []
    with tempfile.TemporaryDirectory(prefix="bioclust-bench-") as tmp:
        for size in sizes:
            path = Path(tmp) / f"corpus-{size}.log"
            if config.corpus is not None:
                _prefix(Path(config.corpus), size, path)
            else:
                generate(replace(config.scenario, duration=size), path)
            for mode in config.modes:
                t0 = time.perf_counter()
                records = read_corpus(path, config.homogenize)
                seqs = [recode(r, mode) for r in records]
                t1 = time.perf_counter()
                model = cluster_greedy(seqs, config.params)
                t2 = time.perf_counter()
                for c in model.clusters:
                    retranslate(c.members, records)
                t3 = time.perf_counter()
                row = BenchRow(len(records), mode, t1 - t0, t2 - t1, t3 - t2, t3 - t0)
                log.info("bench %d lines %s: %.2fs", row.lines, mode.value, row.total_s)
                rows.append(row)
    return BenchResult(tuple(rows))
