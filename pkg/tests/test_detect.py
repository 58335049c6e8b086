import json
from fractions import Fraction

import pytest

from bioclust import (Cluster, ClusterModel, ClusterParams, Complexity, EncodingMode, LogRecord, ScenarioSpec,
                      cluster_greedy, detect_outliers, evaluate, generate_lines, recode, sweep)
from bioclust.detect import BenchConfig, SweepResult, bench, format_fpr, linear_fit, thresholds
from bioclust.errors import ConfigError, DataError
from bioclust.recoder import BioSequence


def model_with(sizes, corpus_size=None):
    clusters = []
    nxt = 0
    for cid, size in enumerate(sizes):
        ids = list(range(nxt, nxt + size))
        nxt += size
        clusters.append(Cluster(cid, BioSequence(ids[0], EncodingMode.COMPRESSED, "AC"), ids))
    return ClusterModel(clusters, ClusterParams(0.9), EncodingMode.COMPRESSED, corpus_size or nxt)


def test_fpr_formatting():
    assert format_fpr(Fraction(14, 484239)) == "2.89e-05"
    assert format_fpr(Fraction(0, 10)) == "0.00e+00"


def test_outliers_are_small_clusters_smallest_first():
    model = model_with([3, 1, 2, 1])
    assert [c.id for c in detect_outliers(model)] == [1, 3]
    assert [c.id for c in detect_outliers(model, min_size=2)] == [1, 3, 2]
    with pytest.raises(ConfigError):
        detect_outliers(model, 0)
    with pytest.raises(DataError):
        detect_outliers(model_with([]))


def test_evaluate_counts_false_positives():
    model = model_with([3, 1, 2, 1, 1])  # singletons hold lines 3, 6, 7
    report = evaluate(model, {6})
    assert report.outlier_indices == (3, 6, 7)
    assert report.fp == 2 and report.fpr == Fraction(2, 8)
    assert report.detected("all") and report.detected("any")
    both = evaluate(model, {6, 0})
    assert not both.detected("all") and both.detected("any")
    assert not evaluate(model).detected()
    with pytest.raises(DataError, match="target index 99"):
        evaluate(model, {99})


def test_report_row():
    row = evaluate(model_with([2, 1]), {2}).row()
    assert row == {"threshold": "0.9", "clusters": 2, "outliers": 1, "fp": 0, "fpr": "0.00e+00", "detected": 1}


def test_threshold_grid_has_no_float_drift():
    grid = thresholds(0.85, 0.99, 0.01)
    assert len(grid) == 15 and grid[1] == 0.86 and grid[-1] == 0.99
    assert thresholds(0.5, 0.6, 0.05) == [0.5, 0.55, 0.6]
    for bad in ((0.9, 0.8, 0.01), (0.8, 0.9, 0), (0.8, 0.9, -0.1)):
        with pytest.raises(ConfigError):
            thresholds(*bad)


@pytest.fixture(scope="module")
def seqs():
    lines = generate_lines(ScenarioSpec(users=2, duration=600, complexity=Complexity.HIGH, seed=4))
    return [recode(LogRecord(i, t.encode(), t.encode())) for i, t in enumerate(lines)]


def test_sweep_agrees_with_independent_runs(seqs):
    result = sweep(seqs, {seqs[0].source_index}, 0.86, 0.9, 0.02)
    assert [r.threshold for r in result.reports] == [0.86, 0.88, 0.9]
    for r in result.reports:
        alone = evaluate(cluster_greedy(seqs, ClusterParams(r.threshold)), {seqs[0].source_index})
        assert alone == r
    tsv = result.to_tsv().splitlines()
    assert tsv[0] == "threshold\tclusters\toutliers\tfp\tfpr\tdetected"
    doc = json.loads(result.to_json())
    assert doc["mode"] == "compressed" and len(doc["rows"]) == 3
    with pytest.raises(ConfigError):
        sweep(seqs, (), require="most")


def test_min_detect_threshold_is_the_first_detecting_row():
    m = model_with([2, 1])
    reports = (evaluate(m, {0}), evaluate(m, {2}))
    assert SweepResult(reports, 0.85, 0.86, 0.01).min_detect_threshold == 0.9
    assert SweepResult(reports[:1], 0.85, 0.85, 0.01).min_detect_threshold is None


def test_linear_fit():
    fit = linear_fit([1, 2, 3, 4], [3, 5, 7, 9])
    assert fit.slope == pytest.approx(2) and fit.intercept == pytest.approx(1) and fit.r2 == pytest.approx(1)
    assert linear_fit([5], [1]).r2 is None


def test_bench_reports_each_size_and_mode():
    config = BenchConfig(modes=(EncodingMode.COMPRESSED, EncodingMode.FULL),
                         scenario=ScenarioSpec(users=2, seed=1))
    result = bench([200, 400], config)
    assert [(r.lines, r.mode) for r in result.rows] == [
        (200, EncodingMode.COMPRESSED), (200, EncodingMode.FULL),
        (400, EncodingMode.COMPRESSED), (400, EncodingMode.FULL)]
    for r in result.rows:
        assert r.total_s >= r.cluster_s > 0 and r.lines_per_s > 0
    text = result.to_tsv()
    assert "# fit compressed" in text and "# fit full" in text
    assert set(json.loads(result.to_json())["fits"]) == {"compressed", "full"}
    with pytest.raises(ConfigError):
        bench([0])
