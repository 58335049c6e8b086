import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bioclust import BioSequence, EncodingMode, LogRecord, decode_full, read_fasta, recode, retranslate, write_fasta
from bioclust.errors import DataError, FastaParseError
from bioclust.recoder import recode_bytes

from oracles import recode_reference


def rec(text: bytes, index: int = 0) -> LogRecord:
    return LogRecord(index, text, text)


@pytest.mark.parametrize("mode", list(EncodingMode))
def test_recode_matches_reference_for_every_byte(mode):
    data = bytes(range(256))
    assert recode_bytes(data, mode) == recode_reference(data, mode is EncodingMode.FULL)


def test_digit_one_recodes_to_dl_and_l():
    assert recode(rec(b"1"), EncodingMode.FULL).symbols == "DL"
    assert recode(rec(b"1"), EncodingMode.COMPRESSED).symbols == "L"


def test_ip_prefix_compressed():
    assert recode(rec(b"192.168."), "compressed").symbols == "LVMHLRTH"


def test_lengths_per_mode():
    line = b"Sep 30 00:00:01 host kernel: x"
    assert len(recode(rec(line), "full")) == 2 * len(line)
    assert len(recode(rec(line), "compressed")) == len(line)


@settings(max_examples=300, deadline=None)
@given(st.binary(min_size=1, max_size=300))
def test_full_mode_round_trips(data):
    seq = recode(rec(data), EncodingMode.FULL)
    assert decode_full(seq) == data


def test_decode_rejects_compressed_and_corrupt_input():
    with pytest.raises(DataError):
        decode_full(recode(rec(b"abc"), "compressed"))
    with pytest.raises(DataError, match="odd length"):
        decode_full("DLA")
    # leading symbol index 12 (P) with trailing 19 (Y) encodes 259
    with pytest.raises(DataError, match="exceeds 255"):
        decode_full("PY")
    with pytest.raises(DataError):
        decode_full("BB")


def test_empty_line_is_rejected():
    with pytest.raises(DataError):
        recode(rec(b"", 7))


def test_fasta_round_trip(tmp_path):
    rng = random.Random(5)
    seqs = [recode(rec(bytes(rng.randrange(256) for _ in range(rng.randrange(1, 90))), i * 3), "full")
            for i in range(25)]
    path = tmp_path / "x.fa"
    write_fasta(seqs, path)
    text = path.read_text()
    assert text.startswith("> 0x\n")
    assert read_fasta(path, "full") == seqs


def test_fasta_reader_accepts_wrapped_bodies_and_compact_headers(tmp_path):
    path = tmp_path / "w.fa"
    path.write_text(">3x\nACD\nEFG\n\n> 9x\nYY\n")
    got = read_fasta(path)
    assert [(s.source_index, s.symbols) for s in got] == [(3, "ACDEFG"), (9, "YY")]


@pytest.mark.parametrize("body, message", [
    ("> 1\nAC\n", "malformed header"),
    ("AC\n> 1x\n", "before first header"),
    ("> 1x\nACB\n", "outside the alphabet"),
])
def test_fasta_parse_errors_name_the_line(tmp_path, body, message):
    path = tmp_path / "bad.fa"
    path.write_text(body)
    with pytest.raises(FastaParseError, match=message) as info:
        read_fasta(path)
    assert info.value.line_number is not None


def test_write_fasta_rejects_duplicate_indices(tmp_path):
    s = BioSequence(1, EncodingMode.COMPRESSED, "AC")
    with pytest.raises(DataError, match="duplicate"):
        write_fasta([s, s], tmp_path / "d.fa")


def test_retranslate_handles_index_gaps():
    corpus = [rec(b"a", 0), rec(b"b", 2), rec(b"c", 5)]
    assert [r.text for r in retranslate([5, 0, 2], corpus)] == [b"c", b"a", b"b"]
    with pytest.raises(DataError, match="unknown source index 4"):
        retranslate([4], corpus)
