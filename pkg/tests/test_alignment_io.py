import json

import numpy as np
import pytest

from covarnet import (Alphabet, AlignmentMatrix, AlphabetOverflowError,
                      EmptyInputError, InvalidAlignmentError, RaggedRowsError,
                      from_rows, parse_alignment, validate)


def test_alphabet_orders_symbols_then_gap():
    a = Alphabet.from_text("ACGT")
    assert a.categories == ("A", "C", "G", "T", "-")
    assert a.size == 5
    assert a.gap_code == 4
    assert a.code("G") == 2
    assert a.code("-") == 4


def test_from_rows_infers_sorted_alphabet():
    m = from_rows(["TGA", "AG-"])
    assert m.alphabet.symbols == ("A", "G", "T")
    assert m.codes.tolist() == [[2, 1, 0], [0, 1, 3]]


def test_from_rows_uppercases():
    m = from_rows(["acg", "acg"])
    assert m.rows() == ["ACG", "ACG"]


def test_ragged_rows_rejected():
    with pytest.raises(RaggedRowsError):
        from_rows(["AC", "ACG"])


def test_empty_input_rejected():
    with pytest.raises(EmptyInputError):
        from_rows([])
    with pytest.raises(EmptyInputError):
        parse_alignment("   \n  ")


def test_single_row_or_column_rejected():
    with pytest.raises(InvalidAlignmentError):
        from_rows(["ACGT"])
    with pytest.raises(InvalidAlignmentError):
        from_rows(["A", "C"])


def test_symbol_outside_alphabet_rejected():
    with pytest.raises(InvalidAlignmentError):
        from_rows(["AC", "A!"])
    with pytest.raises(InvalidAlignmentError):
        from_rows(["AZ", "AC"], alphabet=Alphabet.from_text("AC"))


def test_alphabet_overflow():
    import string
    # 27 distinct symbols: the 26 letters plus a digit.
    row = string.ascii_uppercase + "0"
    with pytest.raises(AlphabetOverflowError):
        from_rows([row, row])


def test_all_gap_input_rejected():
    with pytest.raises(InvalidAlignmentError):
        from_rows(["--", "--"])


def test_parse_plain_and_auto():
    text = "ACGT\nTGCA\n"
    m = parse_alignment(text)
    assert m.n == 2 and m.L == 4
    assert m.row_ids is None


def test_parse_fasta_with_ids_and_wrapping():
    text = ">first seq\nACG\nT\n>second\nTGCA\n"
    m = parse_alignment(text)
    assert m.row_ids == ("first seq", "second")
    assert m.rows() == ["ACGT", "TGCA"]


def test_parse_fasta_data_before_header():
    with pytest.raises(InvalidAlignmentError):
        parse_alignment("ACGT\n>late\nTGCA", fmt="fasta")


def test_codes_are_read_only():
    m = from_rows(["AC", "CA"])
    with pytest.raises(ValueError):
        m.codes[0, 0] = 1


def test_document_round_trip():
    m = parse_alignment(">a\nAC-G\n>b\nACTG\n")
    doc = json.loads(m.to_json())
    m2 = AlignmentMatrix.from_json(json.dumps(doc))
    assert m2.rows() == m.rows()
    assert m2.row_ids == m.row_ids
    assert np.array_equal(m2.codes, m.codes)


def test_validate_flags_constant_and_gap_columns():
    m = from_rows(["A-C", "A-G"])
    rep = validate(m)
    assert rep.n == 2 and rep.L == 3
    assert rep.constant_columns == [0, 1]
    assert rep.all_gap_columns == [1]
    assert rep.columns[2].counts == {"C": 1, "G": 1}
