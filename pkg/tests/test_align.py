import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bioclust import EVAL, UNIT, BioSequence, EncodingMode, LogRecord, ScoringScheme, align, kmer_filter, recode
from bioclust import render_diff, similarity
from bioclust._kernels import lcs_length
from bioclust.align import exact_similarity, required_shared_kmers
from bioclust.errors import ConfigError, DataError
from bioclust.recoder import ALPHABET

from oracles import brute_force_best, sequences_up_to

C = EncodingMode.COMPRESSED


def seq(symbols: str, index: int = 0) -> BioSequence:
    return BioSequence(index, C, symbols)


def rescore(row_a: str, row_b: str, scheme: ScoringScheme) -> int:
    total = 0
    prev = None
    for x, y in zip(row_a, row_b):
        kind = "a" if x == "-" else "b" if y == "-" else "d"
        if kind == "d":
            total += scheme.match if x == y else scheme.mismatch
        else:
            total += scheme.gap_extend if kind == prev else scheme.gap_open
        prev = kind
    return total


def mutate(rng: random.Random, s: str, edits: int, alphabet: str = ALPHABET) -> str:
    out = list(s)
    for _ in range(edits):
        op = rng.random()
        pos = rng.randrange(len(out) + 1)
        if op < 0.5 and pos < len(out):
            out[pos] = rng.choice(alphabet)
        elif op < 0.75:
            out.insert(pos, rng.choice(alphabet))
        elif pos < len(out) and len(out) > 1:
            del out[pos]
    return "".join(out)


def test_worked_example_unit_scheme():
    aln = align(seq("GAC"), seq("GC"), UNIT)
    assert aln.score == 1
    assert (aln.aligned_a, aln.aligned_b) == ("GAC", "G-C")
    assert abs(similarity(aln) - 2 / 3) < 1e-9


@pytest.mark.parametrize("scheme", [UNIT, EVAL], ids=["unit", "eval"])
def test_small_pairs_match_brute_force_exactly(scheme):
    words = list(sequences_up_to("GAC", 3))
    rng = random.Random(11)
    pairs = [(a, b) for a in words for b in words]
    pairs += [("".join(rng.choice("GAC") for _ in range(rng.randint(1, 5))),
               "".join(rng.choice("GAC") for _ in range(rng.randint(1, 5)))) for _ in range(150)]
    for a, b in pairs:
        score, row_a, row_b, identical, length = brute_force_best(a, b, scheme.as_tuple())
        for banded in (True, False):
            aln = align(seq(a), seq(b), scheme, banded=banded)
            assert (aln.score, aln.aligned_a, aln.aligned_b) == (score, row_a, row_b), (a, b, banded)
            assert (aln.identical, aln.length) == (identical, length)


@pytest.mark.parametrize("scheme", [UNIT, EVAL, ScoringScheme(2, -3, -5, -2)], ids=["unit", "eval", "other"])
def test_reported_score_matches_rows(scheme):
    rng = random.Random(3)
    for _ in range(200):
        a = "".join(rng.choice("ACDE") for _ in range(rng.randint(1, 60)))
        b = mutate(rng, a, rng.randint(0, 20), "ACDE") or "A"
        aln = align(seq(a), seq(b), scheme)
        assert aln.aligned_a.replace("-", "") == a
        assert aln.aligned_b.replace("-", "") == b
        assert rescore(aln.aligned_a, aln.aligned_b, scheme) == aln.score
        assert aln.identical == sum(x == y != "-" for x, y in zip(aln.aligned_a, aln.aligned_b))
        assert aln.gaps == aln.aligned_a.count("-") + aln.aligned_b.count("-")


@pytest.mark.parametrize("scheme", [UNIT, EVAL], ids=["unit", "eval"])
def test_band_gives_the_full_matrix_answer(scheme):
    rng = random.Random(17)
    for trial in range(300):
        n = rng.randint(1, 400)
        a = "".join(rng.choice(ALPHABET[: rng.randint(2, 20)]) for _ in range(n))
        b = mutate(rng, a, rng.randint(0, max(1, n // 3))) or "Y"
        banded = align(seq(a), seq(b), scheme, banded=True)
        full = align(seq(a), seq(b), scheme, banded=False)
        assert banded == full, trial


@settings(max_examples=200, deadline=None)
@given(st.text("ACG", min_size=1, max_size=12), st.text("ACG", min_size=1, max_size=12))
def test_optimal_score_is_symmetric(a, b):
    assert align(seq(a), seq(b), EVAL).score == align(seq(b), seq(a), EVAL).score


def test_identical_sequences_align_perfectly():
    aln = align(seq("ACDEFGHIK"), seq("ACDEFGHIK"))
    assert aln.identical == aln.length == 9 and aln.gaps == 0 and aln.mismatches == 0
    assert exact_similarity(aln) == 1


def test_align_rejects_bad_input():
    with pytest.raises(DataError):
        align(seq(""), seq("A"))
    with pytest.raises(DataError, match="incomparable"):
        align(seq("A"), BioSequence(1, EncodingMode.FULL, "AA"))


@pytest.mark.parametrize("value", ["nope", "1,2,3", "1,-1,-1,-2", "0,-1,-1,-1", "1,1,-1,-1"])
def test_scheme_validation(value):
    with pytest.raises(ConfigError):
        ScoringScheme.parse(value)


def test_scheme_parse_and_name():
    assert ScoringScheme.parse("eval") is EVAL
    assert ScoringScheme.parse("6,-5,-11,-1") == EVAL
    assert EVAL.name() == "eval"
    assert ScoringScheme(2, -1, -3, -1).name() == "2,-1,-3,-1"


def _lcs_reference(a: str, b: str) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def test_bit_parallel_lcs_matches_dynamic_programming():
    rng = random.Random(23)
    for _ in range(400):
        a = "".join(rng.choice(ALPHABET[:6]) for _ in range(rng.randint(1, 200)))
        b = mutate(rng, a, rng.randint(0, 40), ALPHABET[:6]) or "A"
        assert lcs_length(seq(a).codes, seq(b).codes) == _lcs_reference(a, b)


def _shared_kmers(a: str, b: str, k: int) -> int:
    ca = Counter(a[i:i + k] for i in range(len(a) - k + 1))
    cb = Counter(b[i:i + k] for i in range(len(b) - k + 1))
    return sum((ca & cb).values())


def test_required_kmers_never_exceed_what_similar_pairs_share():
    rng = random.Random(29)
    checked = 0
    for _ in range(4000):
        k = rng.randint(2, 8)
        x = rng.choice([0.8, 0.85, 0.9, 0.93, 0.95, 0.99])
        a = "".join(rng.choice(ALPHABET) for _ in range(rng.randint(5, 150)))
        b = mutate(rng, a, rng.randint(0, max(1, len(a) // 8))) or "A"
        aln = align(seq(a), seq(b), EVAL)
        if aln.identical < x * aln.length:
            continue
        checked += 1
        assert kmer_filter(seq(a), seq(b), k, x), (a, b, k, x)
        shared = _shared_kmers(a, b, k)
        for n in (len(a), len(b)):
            assert shared >= required_shared_kmers(n, x, k)
    assert checked > 1000


def test_kmer_filter_rejects_unrelated_sequences():
    a = seq("ACDEFGHIKLMNPQRSTVWY" * 3)
    b = seq("YWVTSRQPNMLKIHGFEDCA" * 3)
    assert not kmer_filter(a, b, 5, 0.9)
    with pytest.raises(ConfigError):
        kmer_filter(a, b, 0, 0.9)


def full(text: bytes, index: int = 0) -> BioSequence:
    return recode(LogRecord(index, text, text), EncodingMode.FULL)


def test_diff_marks_substitutions_and_gaps():
    a, b = b"SRC=10.0.0.1 DPT=80", b"SRC=10.0.0.17 DPT=81"
    rows = render_diff(align(full(a), full(b), EVAL), a, b)
    assert rows.query.replace("-", "") == a.decode()
    assert rows.subject.replace("-", "") == b.decode()
    assert rows.diff.count("X") == 1 and rows.diff.count("-") == 1
    assert rows.diff.rstrip().endswith("X")


def test_diff_needs_full_mode():
    aln = align(seq("AC"), seq("AC"))
    with pytest.raises(DataError):
        render_diff(aln, b"xx", b"xx")
