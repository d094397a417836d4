import numpy as np
import pytest

from src.errors import CountsParseError, EmptyInputError, HeaderMismatchError, StructuralError
from src.ingestion import load_counts, read_numeric, write_counts, write_matrix
from src.model import ReadCountData

N_CSV = "locus,s1,s2\nchr1:100,10,12\nchr2:200,8,9\nchr3:300,11,7\n"
n_CSV = "locus,s1,s2\nchr1:100,5,6\nchr2:200,0,1\nchr3:300,3,2\n"


@pytest.fixture
def write(tmp_path):
    def _write(name, text):
        path = tmp_path / name
        path.write_text(text)
        return str(path)
    return _write


def test_load_well_formed_counts(write):
    data = load_counts(write("N.csv", N_CSV), write("n.csv", n_CSV))
    assert data.locus_ids == ["chr1:100", "chr2:200", "chr3:300"]
    assert data.sample_ids == ["s1", "s2"]
    assert data.N.tolist() == [[10, 12], [8, 9], [11, 7]]
    assert data.n[0].tolist() == [5, 6]


def test_variant_excess_names_row_and_column(write):
    bad = n_CSV.replace("chr3:300,3,2", "chr3:300,3,8")
    with pytest.raises(CountsParseError) as err:
        load_counts(write("N.csv", N_CSV), write("n.csv", bad))
    assert err.value.row == 3 and err.value.column == 2
    assert "locus row 3" in str(err.value) and "sample column 2" in str(err.value)


def test_empty_file(write):
    with pytest.raises(EmptyInputError):
        load_counts(write("N.csv", ""), write("n.csv", n_CSV))
    with pytest.raises(EmptyInputError):
        load_counts(write("N.csv", "locus,s1,s2\n"), write("n.csv", n_CSV))


def test_missing_file(tmp_path, write):
    with pytest.raises(CountsParseError):
        load_counts(str(tmp_path / "absent.csv"), write("n.csv", n_CSV))


def test_header_mismatch(write):
    other = n_CSV.replace("locus,s1,s2", "locus,s1,s3")
    with pytest.raises(HeaderMismatchError):
        load_counts(write("N.csv", N_CSV), write("n.csv", other))
    relabelled = n_CSV.replace("chr2:200", "chr9:900")
    with pytest.raises(HeaderMismatchError):
        load_counts(write("N.csv", N_CSV), write("n.csv", relabelled))


def test_ragged_rows(write):
    too_long = N_CSV.replace("chr2:200,8,9", "chr2:200,8,9,4")
    with pytest.raises(CountsParseError) as err:
        load_counts(write("N.csv", too_long), write("n.csv", n_CSV))
    assert err.value.row == 2
    too_short = N_CSV.replace("chr2:200,8,9", "chr2:200,8")
    with pytest.raises(CountsParseError) as err:
        load_counts(write("N.csv", too_short), write("n.csv", n_CSV))
    assert (err.value.row, err.value.column) == (2, 2)


@pytest.mark.parametrize("cell", ["x", "-1", "2.5"])
def test_invalid_cells(write, cell):
    broken = N_CSV.replace("chr1:100,10,12", f"chr1:100,{cell},12")
    with pytest.raises(CountsParseError) as err:
        load_counts(write("N.csv", broken), write("n.csv", n_CSV))
    assert (err.value.row, err.value.column) == (1, 1)


def test_parse_errors_are_structural(write):
    with pytest.raises(StructuralError):
        load_counts(write("N.csv", ""), write("n.csv", ""))


def test_written_counts_load_back(tmp_path):
    data = ReadCountData(N=np.array([[4.0, 0.0], [7.0, 3.0]]), n=np.array([[1.0, 0.0], [7.0, 2.0]]),
                         locus_ids=["a", "b"], sample_ids=["t1", "t2"])
    path_N, path_n = write_counts(data, str(tmp_path / "counts"))
    loaded = load_counts(path_N, path_n)
    assert np.array_equal(loaded.N, data.N) and np.array_equal(loaded.n, data.n)
    assert loaded.locus_ids == ["a", "b"] and loaded.sample_ids == ["t1", "t2"]


def test_write_matrix_float_format(tmp_path):
    path = str(tmp_path / "m.csv")
    write_matrix(path, np.array([[1 / 3, 2.0]]), ["r"], ["c1", "c2"], index_label="row")
    assert open(path).read().splitlines() == ["row,c1,c2", "r,0.333333333333,2"]
    assert read_numeric(path).loc["r", "c1"] == pytest.approx(1 / 3, abs=1e-12)
