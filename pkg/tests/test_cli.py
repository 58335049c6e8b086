import json

import pytest

from bioclust import ClusterModel
from bioclust.cli import load_config, main
from bioclust.errors import ConfigError


@pytest.fixture
def corpus(tmp_path):
    log = tmp_path / "c.log"
    assert main(["gen", str(log), "--lines", "800", "--users", "2", "--seed", "5"]) == 0
    assert main(["inject", str(log), "--seed", "2"]) == 0
    return tmp_path / "c.log.injected", tmp_path / "c.log.injected.targets"


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_cluster_then_detect(corpus, tmp_path, capsys):
    log, targets = corpus
    code, out, _ = run(["cluster", log, "--threshold", "0.95"], capsys)
    assert code == 0 and "clusters" in out
    model = tmp_path / "c.log.injected.model"
    table = (tmp_path / "c.log.injected.clusters.tsv").read_text().splitlines()
    assert table[0] == "cluster_id\tsize\trepresentative_index\tmember_indices"
    code, out, _ = run(["detect", model, log, "--targets", targets], capsys)
    target = int(targets.read_text())
    assert code == 0
    rows = [ln.split("\t") for ln in out.splitlines() if ln and not ln.startswith(("#", "cluster_id"))]
    assert target in {int(r[2]) for r in rows}
    assert any(ln.startswith("# fp ") for ln in out.splitlines())

    code, out, _ = run(["detect", model, log, "--targets", targets, "--format", "json"], capsys)
    doc = json.loads(out)
    assert doc["evaluation"]["detected"] == [target]
    assert doc["summary"]["detected"] == 1


def test_detect_exit_code_when_target_missed(corpus, tmp_path, capsys):
    log, targets = corpus
    run(["cluster", log, "--threshold", "0.5"], capsys)
    code, _, _ = run(["detect", tmp_path / "c.log.injected.model", log, "--targets", targets], capsys)
    assert code == 3


def test_fasta_and_log_inputs_give_the_same_model(corpus, tmp_path, capsys):
    log, _ = corpus
    fasta = tmp_path / "c.fa"
    assert run(["recode", log, "-o", fasta, "--mode", "full"], capsys)[0] == 0
    run(["cluster", log, "--mode", "full", "--model", tmp_path / "a.model", "--tsv", tmp_path / "a.tsv"], capsys)
    run(["cluster", fasta, "--mode", "full", "--model", tmp_path / "b.model", "--tsv", tmp_path / "b.tsv"], capsys)
    assert (tmp_path / "a.model").read_text() == (tmp_path / "b.model").read_text()


def test_config_file_and_flag_precedence(corpus, tmp_path, capsys):
    log, _ = corpus
    cfg = tmp_path / "run.conf"
    cfg.write_text("# defaults\nthreshold = 0.8\nmode = full\nno-filter = true\n")
    run(["cluster", log, "--config", cfg, "--model", tmp_path / "m1"], capsys)
    m1 = ClusterModel.load(tmp_path / "m1")
    assert m1.params.threshold == 0.8 and m1.mode.value == "full"
    run(["cluster", log, "--config", cfg, "--threshold", "0.95", "--model", tmp_path / "m2"], capsys)
    assert ClusterModel.load(tmp_path / "m2").params.threshold == 0.95


def test_config_parser_rejects_bad_files(tmp_path):
    cfg = tmp_path / "x.conf"
    cfg.write_text("homogenize = %d/%b/%Y -> %Y-%m-%d\nhomogenize = %y%m%d -> %Y-%m-%d\n")
    assert len(load_config(cfg)["homogenize"]) == 2
    for text in ("threshold = 0.9\nthreshold = 0.8\n", "colour = red\n", "just words\n"):
        cfg.write_text(text)
        with pytest.raises(ConfigError):
            load_config(cfg)


def test_classify_known_line_and_adopt_outlier(corpus, tmp_path, capsys):
    log, _ = corpus
    model = tmp_path / "m.model"
    run(["cluster", log, "--model", model], capsys)
    known = log.read_text().splitlines()[3]
    code, out, _ = run(["classify", model, known], capsys)
    assert code == 0 and float(out.split("\t")[1]) >= 0.9
    before = len(ClusterModel.load(model))
    code, out, _ = run(["classify", model, "@@@ nothing like the corpus @@@", "--adopt"], capsys)
    assert code == 4 and out.startswith("outlier")
    assert len(ClusterModel.load(model)) == before + 1
    code, _, _ = run(["classify", model, "@@@ nothing like the corpus @@@"], capsys)
    assert code == 0


def test_sweep_output(corpus, tmp_path, capsys):
    log, targets = corpus
    code, out, _ = run(["sweep", log, "--targets", targets, "--from", "0.9", "--to", "0.92", "--format", "json"],
                       capsys)
    doc = json.loads(out)
    assert [r["threshold"] for r in doc["rows"]] == ["0.9", "0.91", "0.92"]
    assert code == (0 if doc["min_detect_threshold"] else 3)


def test_diff_prints_text_and_symbol_blocks(capsys):
    code, out, _ = run(["diff", "SRC=10.0.0.1 DPT=80", "SRC=10.0.0.7 DPT=80"], capsys)
    assert code == 0
    assert "Diff:" in out and out.rstrip().splitlines()[-1].startswith("similarity")
    code, out, _ = run(["diff", "abc", "abd", "--mode", "compressed"], capsys)
    assert code == 0 and "Diff:" not in out


def test_bench_tsv(tmp_path, capsys):
    out_path = tmp_path / "b.tsv"
    assert run(["bench", "--sizes", "150,300", "--seed", "1", "-o", out_path], capsys)[0] == 0
    text = out_path.read_text()
    assert text.startswith("lines\tmode") and "# fit compressed" in text


@pytest.mark.parametrize("argv, code", [
    (["cluster"], 1),
    (["cluster", "missing.log"], 2),
    (["cluster", "{log}", "--threshold", "1.5"], 1),
    (["cluster", "{log}", "--scheme", "bogus"], 1),
    (["detect", "{log}", "{log}"], 2),
    (["diff", "only-one"], 1),
    (["nonsense"], 1),
])
def test_exit_codes(corpus, capsys, argv, code):
    log, _ = corpus
    argv = [a.replace("{log}", str(log)) for a in argv]
    got, _, err = run(argv, capsys)
    assert got == code
    assert err
