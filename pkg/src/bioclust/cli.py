"""Command-line interface: ``bioclust <command> ...``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 targets supplied but not detected, 4 ``classify`` verdict is "outlier".
"""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from pathlib import Path

from . import __version__
from .align import ScoringScheme, align, render_diff
from .cluster import ClusterModel, ClusterParams, adopt_outlier, classify, cluster_greedy
from .corpusgen import FAMILIES, Complexity, ScenarioSpec, generate, inject_attack
from .detect import BenchConfig, bench, detect_outliers, evaluate, format_fpr, sweep
from .errors import BioclustError, ConfigError, DataError
from .ingest import HomogenizeConfig, LogRecord, homogenize, read_corpus
from .recoder import EncodingMode, _atomic_write, read_fasta, recode, retranslate, write_fasta

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NOT_DETECTED = 3
EXIT_OUTLIER = 4

DEFAULTS = {
    "mode": "compressed",
    "threshold": 0.9,
    "scheme": "eval",
    "k": 5,
    "seed": 0,
    "min_size": 1,
    "require": "all",
    "format": "tsv",
    "no_filter": False,
    "first_match": False,
    "homogenize": [],
}

_FASTA_HEADER = re.compile(rb">\s?\d+x")
_BOOLEAN = {"1": True, "true": True, "yes": True, "on": True, "0": False, "false": False, "no": False, "off": False}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def load_config(path) -> dict:
    """Parse a ``key = value`` file; ``#`` starts a comment, keys may use '-' or '_'.

    ``homogenize`` may be given several times; every other key at most once.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    out: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in DEFAULTS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        if key == "homogenize":
            out.setdefault(key, []).append(value)
        elif key in out:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        else:
            out[key] = value
    return out


def _convert(key: str, value):
    if not isinstance(value, str):
        return value
    try:
        if key in ("threshold",):
            return float(value)
        if key in ("k", "seed", "min_size"):
            return int(value)
        if key in ("no_filter", "first_match"):
            return _BOOLEAN[value.lower()]
    except (ValueError, KeyError):
        raise ConfigError(f"invalid value {value!r} for {key}") from None
    return value


def _settings(args) -> dict:
    """Flags, then config file, then defaults."""
    cfg = load_config(args.config) if getattr(args, "config", None) else {}
    merged = {}
    for key, default in DEFAULTS.items():
        flag = getattr(args, key, None)
        if key == "homogenize":
            value = cfg.get(key, []) + list(flag or [])
        elif flag is not None and flag is not False:
            value = flag
        else:
            value = cfg.get(key, default)
        merged[key] = _convert(key, value)
    if merged["require"] not in ("all", "any"):
        raise ConfigError(f"require must be 'all' or 'any', got {merged['require']!r}")
    if merged["format"] not in ("tsv", "json"):
        raise ConfigError(f"format must be 'tsv' or 'json', got {merged['format']!r}")
    return merged


def _mode(s) -> EncodingMode:
    try:
        return EncodingMode.parse(s["mode"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _params(s) -> ClusterParams:
    return ClusterParams(
        threshold=s["threshold"],
        scheme=ScoringScheme.parse(s["scheme"]),
        k=s["k"],
        best_match=not s["first_match"],
    )


def _homogenizer(s) -> HomogenizeConfig:
    return HomogenizeConfig.from_specs(s["homogenize"])


def _read_targets(path) -> set[int]:
    if path is None:
        return set()
    try:
        text = Path(path).read_text(encoding="ascii")
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot read targets {path}: {exc}") from exc
    try:
        return {int(tok) for tok in text.split()}
    except ValueError:
        raise DataError(f"targets file {path} must hold whitespace-separated line indices") from None


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        try:
            _atomic_write(out, text.encode("utf-8"))
        except OSError as exc:
            raise DataError(f"cannot write {out}: {exc.strerror or exc}") from exc


def _is_fasta(path: Path) -> bool:
    try:
        with open(path, "rb") as fh:
            for raw in fh:
                if raw.strip():
                    return _FASTA_HEADER.fullmatch(raw.strip()) is not None
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from exc
    return False


def _load_sequences(path, s):
    path = Path(path)
    mode = _mode(s)
    if _is_fasta(path):
        return read_fasta(path, mode)
    return [recode(r, mode) for r in read_corpus(path, _homogenizer(s))]


# commands ------------------------------------------------------------------


def cmd_gen(args) -> int:
    templates = tuple(t.strip() for t in args.templates.split(",") if t.strip())
    try:
        spec = ScenarioSpec(templates=templates, users=args.users, duration=args.lines,
                            complexity=Complexity(args.complexity), seed=args.seed or 0)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    generate(spec, args.output)
    print(f"wrote {args.lines} lines to {args.output}")
    return EXIT_OK


def cmd_inject(args) -> int:
    s = _settings(args)
    out, targets, indices = inject_attack(args.corpus, s["seed"], args.output, args.targets_out, args.copies)
    print(f"injected line at {','.join(map(str, indices))}; corpus {out}; targets {targets}")
    return EXIT_OK


def cmd_recode(args) -> int:
    s = _settings(args)
    stats: dict = {}
    records = read_corpus(args.input, _homogenizer(s), stats)
    seqs = [recode(r, _mode(s)) for r in records]
    write_fasta(seqs, args.output)
    nbytes = sum(len(r.text) for r in records)
    print(f"recoded {len(records)} lines ({nbytes} bytes, {stats['dropped']} empty skipped) "
          f"into {sum(len(q) for q in seqs)} symbols: {args.output}")
    return EXIT_OK


def cmd_cluster(args) -> int:
    s = _settings(args)
    seqs = _load_sequences(args.input, s)
    model = cluster_greedy(seqs, _params(s), prefilter=not s["no_filter"])
    stem = Path(args.input)
    model_path = Path(args.model) if args.model else stem.with_name(stem.name + ".model")
    tsv_path = Path(args.tsv) if args.tsv else stem.with_name(stem.name + ".clusters.tsv")
    model.save(model_path)
    _emit(model.to_tsv(), tsv_path)
    singles = sum(1 for c in model.clusters if c.size == 1)
    print(f"{len(seqs)} lines -> {len(model)} clusters ({singles} singletons); "
          f"model {model_path}; table {tsv_path}")
    return EXIT_OK


def cmd_detect(args) -> int:
    s = _settings(args)
    model = ClusterModel.load(args.model)
    records = read_corpus(args.corpus, _homogenizer(s))
    targets = _read_targets(args.targets)
    outliers = detect_outliers(model, s["min_size"])
    report = evaluate(model, targets, s["min_size"])
    rows = []
    for c in outliers:
        for rec in retranslate(c.members, records):
            rows.append((c.id, c.size, rec.index, rec.raw.decode("latin-1")))
    summary = report.row(s["require"])
    summary["corpus_size"] = report.corpus_size
    if s["format"] == "json":
        doc = {
            "outliers": [{"cluster_id": c, "size": n, "source_index": i, "line": t} for c, n, i, t in rows],
            "summary": summary,
        }
        if targets:
            doc["evaluation"] = {"targets": sorted(targets), "detected": sorted(report.detected_targets)}
        text = json.dumps(doc, indent=2) + "\n"
    else:
        lines = ["cluster_id\tsize\tsource_index\tline"]
        lines += [f"{c}\t{n}\t{i}\t{t}" for c, n, i, t in rows]
        lines.append(f"# threshold {summary['threshold']}, {summary['clusters']} clusters, "
                     f"{summary['outliers']} outliers of {report.corpus_size} lines")
        if targets:
            lines.append(f"# targets {','.join(map(str, sorted(targets)))}; detected "
                         f"{','.join(map(str, sorted(report.detected_targets))) or 'none'}")
            lines.append(f"# fp {report.fp}, fpr {format_fpr(report.fpr)}")
        text = "\n".join(lines) + "\n"
    _emit(text, args.output)
    if targets and not report.detected(s["require"]):
        return EXIT_NOT_DETECTED
    return EXIT_OK


def cmd_classify(args) -> int:
    s = _settings(args)
    model = ClusterModel.load(args.model)
    if args.line_file:
        try:
            raw = Path(args.line_file).read_bytes().split(b"\n")[0].rstrip(b"\r")
        except OSError as exc:
            raise DataError(f"cannot read {args.line_file}: {exc.strerror or exc}") from exc
    elif args.line is not None:
        raw = args.line.encode("utf-8")
    else:
        raise UsageError("classify needs a LINE argument or --line-file")
    record = homogenize(LogRecord(model.corpus_size, raw, raw), _homogenizer(s))
    seq = recode(record, model.mode)
    verdict = classify(seq, model, prefilter=not s["no_filter"])
    if verdict.is_outlier:
        print("outlier")
        if args.adopt:
            adopt_outlier(model, seq)
            target = args.output or args.model
            model.save(target)
            print(f"adopted as cluster {model.clusters[-1].id}; model {target}")
        return EXIT_OUTLIER
    print(f"{verdict.cluster_id}\t{verdict.similarity:.4f}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    s = _settings(args)
    seqs = _load_sequences(args.corpus, s)
    targets = _read_targets(args.targets)
    result = sweep(seqs, targets, args.start, args.stop, args.step, _params(s), require=s["require"],
                   min_size=s["min_size"], prefilter=not s["no_filter"])
    _emit(result.to_json() if s["format"] == "json" else result.to_tsv(), args.output)
    if targets and result.min_detect_threshold is None:
        return EXIT_NOT_DETECTED
    return EXIT_OK


def cmd_bench(args) -> int:
    s = _settings(args)
    try:
        sizes = [int(v) for v in args.sizes.split(",") if v.strip()]
        modes = tuple(EncodingMode.parse(v.strip()) for v in args.modes.split(",") if v.strip())
        spec = ScenarioSpec(users=args.users, complexity=Complexity(args.complexity), seed=s["seed"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    config = BenchConfig(params=_params(s), modes=modes, scenario=spec,
                         corpus=Path(args.corpus) if args.corpus else None, homogenize=_homogenizer(s))
    result = bench(sizes, config)
    _emit(result.to_json() if s["format"] == "json" else result.to_tsv(), args.output)
    return EXIT_OK


def cmd_diff(args) -> int:
    s = _settings(args)
    mode = _mode(s) if args.mode else EncodingMode.FULL
    if args.corpus:
        if len(args.lines) != 2:
            raise UsageError("with --corpus, give two line indices")
        try:
            wanted = [int(v) for v in args.lines]
        except ValueError:
            raise UsageError("line indices must be integers") from None
        records = retranslate(wanted, read_corpus(args.corpus))
        texts = [r.raw for r in records]
    else:
        if len(args.lines) != 2:
            raise UsageError("diff needs two lines")
        texts = [t.encode("utf-8") for t in args.lines]
    a, b = (recode(LogRecord(i, t, t), mode) for i, t in enumerate(texts))
    aln = align(a, b, ScoringScheme.parse(s["scheme"]))
    sym = "".join(x if x == y else " " for x, y in zip(aln.aligned_a, aln.aligned_b))
    blocks = [
        [f"A:     {texts[0].decode('latin-1')}", f"B:     {texts[1].decode('latin-1')}"],
        [f"A:     {a.symbols}", f"B:     {b.symbols}"],
        [f"Query: {aln.aligned_a}", f"Algn:  {sym}", f"Sbjct: {aln.aligned_b}"],
    ]
    if mode is EncodingMode.FULL:
        rows = render_diff(aln, texts[0], texts[1])
        blocks.append([f"Query: {rows.query}", f"Algn:  {rows.aligned}", f"Sbjct: {rows.subject}"])
        blocks.append([f"Diff:  {rows.diff}"])
    blocks.append([f"similarity {aln.similarity:.4f} ({aln.identical}/{aln.length}), score {aln.score}"])
    print("\n\n".join("\n".join(b) for b in blocks))
    return EXIT_OK


# parser --------------------------------------------------------------------


def _common(p, *, clustering=True):
    p.add_argument("--config", help="key = value file with defaults for these flags")
    p.add_argument("--homogenize", action="append", metavar="RULE",
                   help="timestamp rewrite 'SRC -> TGT' in strftime syntax; repeatable")
    if clustering:
        p.add_argument("--mode", choices=("full", "compressed"), help="encoding (default compressed)")
        p.add_argument("--threshold", type=float, help="similarity threshold in (0, 1) (default 0.9)")
        p.add_argument("--scheme", help="'unit', 'eval' or match,mismatch,open,extend (default eval)")
        p.add_argument("--k", type=int, help="word length of the k-mer filter (default 5)")
        p.add_argument("--no-filter", dest="no_filter", action="store_true", default=None,
                       help="align against every length-compatible representative")
        p.add_argument("--first-match", dest="first_match", action="store_true", default=None,
                       help="join the first qualifying cluster instead of the most similar")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bioclust", description="Log outlier detection by sequence clustering.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate a synthetic corpus")
    p.add_argument("output")
    p.add_argument("--lines", type=int, default=10000)
    p.add_argument("--users", type=int, default=1)
    p.add_argument("--complexity", choices=("low", "high"), default="low")
    p.add_argument("--templates", default=",".join(FAMILIES))
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("inject", help="insert a firewall line with a novel MAC and IP")
    p.add_argument("corpus")
    p.add_argument("-o", "--output", help="output corpus (default CORPUS.injected)")
    p.add_argument("--targets-out", help="where to write the target indices")
    p.add_argument("--copies", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.add_argument("--config")
    p.set_defaults(func=cmd_inject)

    p = sub.add_parser("recode", help="re-code a log file into FASTA")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--mode", choices=("full", "compressed"))
    p.add_argument("--config")
    p.add_argument("--homogenize", action="append", metavar="RULE")
    p.set_defaults(func=cmd_recode)

    p = sub.add_parser("cluster", help="cluster a log or FASTA file")
    p.add_argument("input")
    p.add_argument("--model", help="model output (default INPUT.model)")
    p.add_argument("--tsv", help="cluster table output (default INPUT.clusters.tsv)")
    _common(p)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("detect", help="list outliers of a model with their original lines")
    p.add_argument("model")
    p.add_argument("corpus")
    p.add_argument("--targets", help="file of target line indices")
    p.add_argument("--min-size", dest="min_size", type=int)
    p.add_argument("--require", choices=("all", "any"))
    p.add_argument("--format", choices=("tsv", "json"))
    p.add_argument("-o", "--output")
    _common(p, clustering=False)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("classify", help="assign one new line to a model's clusters")
    p.add_argument("model")
    p.add_argument("line", nargs="?")
    p.add_argument("--line-file", help="read the line from the first line of this file")
    p.add_argument("--adopt", action="store_true", help="add an outlier to the model as a new cluster")
    p.add_argument("-o", "--output", help="where to save the adopted model (default: in place)")
    p.add_argument("--no-filter", dest="no_filter", action="store_true", default=None)
    _common(p, clustering=False)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("sweep", help="cluster and evaluate over a threshold range")
    p.add_argument("corpus")
    p.add_argument("--targets")
    p.add_argument("--from", dest="start", type=float, default=0.85)
    p.add_argument("--to", dest="stop", type=float, default=0.99)
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--min-size", dest="min_size", type=int)
    p.add_argument("--require", choices=("all", "any"))
    p.add_argument("--format", choices=("tsv", "json"))
    p.add_argument("-o", "--output")
    _common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench", help="time the pipeline stages over corpus sizes")
    p.add_argument("--sizes", default="25000,50000,100000,200000")
    p.add_argument("--modes", default="compressed")
    p.add_argument("--corpus", help="use prefixes of this log instead of generated corpora")
    p.add_argument("--users", type=int, default=4)
    p.add_argument("--complexity", choices=("low", "high"), default="low")
    p.add_argument("--seed", type=int)
    p.add_argument("--format", choices=("tsv", "json"))
    p.add_argument("-o", "--output")
    _common(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("diff", help="align two lines and mark their differences")
    p.add_argument("lines", nargs="+", help="two log lines, or two indices with --corpus")
    p.add_argument("--corpus")
    p.add_argument("--mode", choices=("full", "compressed"), help="encoding (default full)")
    p.add_argument("--scheme")
    p.add_argument("--config")
    p.set_defaults(func=cmd_diff)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"bioclust {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"bioclust {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, BioclustError) as exc:
        print(f"bioclust {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"bioclust {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
