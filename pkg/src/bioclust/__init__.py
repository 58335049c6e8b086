"""Log-line outlier detection through biological sequence clustering.

Log lines are re-coded into the 20-letter amino-acid alphabet, compared by
affine-gap global alignment and clustered greedily; clusters with a single
line are reported as outliers.
"""

__version__ = "0.1.0"

from .align import EVAL, UNIT, Alignment, ScoringScheme, align, kmer_filter, render_diff, similarity
from .cluster import (
    Classification,
    Cluster,
    ClusterModel,
    ClusterParams,
    PairCache,
    adopt_outlier,
    classify,
    cluster_greedy,
)
from .corpusgen import Complexity, ScenarioSpec, generate, generate_lines, inject_attack
from .detect import OutlierReport, SweepResult, bench, detect_outliers, evaluate, sweep
from .errors import BioclustError, ConfigError, DataError, FastaParseError
from .ingest import HomogenizeConfig, LogRecord, homogenize, read_corpus
from .recoder import BioSequence, EncodingMode, decode_full, read_fasta, recode, retranslate, write_fasta

__all__ = [
    "Alignment", "BioSequence", "BioclustError", "Classification", "Cluster", "ClusterModel",
    "ClusterParams", "Complexity", "ConfigError", "DataError", "EVAL", "EncodingMode",
    "FastaParseError", "HomogenizeConfig", "LogRecord", "OutlierReport", "PairCache", "ScenarioSpec",
    "ScoringScheme", "SweepResult", "UNIT", "adopt_outlier", "align", "bench", "classify",
    "cluster_greedy", "decode_full", "detect_outliers", "evaluate", "generate", "generate_lines",
    "homogenize", "inject_attack", "kmer_filter", "read_corpus", "read_fasta", "recode",
    "render_diff", "retranslate", "similarity", "sweep", "write_fasta",
]
