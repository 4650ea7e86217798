import io

import numpy as np
import pytest
import scipy.io
import scipy.sparse as sp

from rrex.errors import ParseError, UnsupportedField
from rrex.mmio import load_problem, read_matrix_market, write_matrix_market


def test_minimal_file():
    M = read_matrix_market(b"%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 2.5\n")
    assert M.shape == (1, 1) and M.toarray()[0, 0] == 2.5


def test_symmetric_expansion():
    text = (b"%%MatrixMarket matrix coordinate real symmetric\n% comment\n"
            b"3 3 4\n1 1 4.0\n2 1 -1.5\n3 2 0.25\n3 3 7\n")
    M = read_matrix_market(text).toarray()
    assert np.array_equal(M, M.T)
    assert M[0, 1] == -1.5 and M[1, 2] == 0.25


def test_skew_symmetric_and_integer():
    text = b"%%MatrixMarket matrix coordinate integer skew-symmetric\n2 2 1\n2 1 3\n"
    M = read_matrix_market(text).toarray()
    np.testing.assert_array_equal(M, [[0, -3], [3, 0]])


def test_array_format():
    text = b"%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n"
    np.testing.assert_array_equal(read_matrix_market(text), [[1, 3], [2, 4]])


def test_sparse_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    M = sp.random(40, 30, density=0.1, random_state=1, format="csr")
    M.data = rng.standard_normal(M.nnz) * 10.0 ** rng.integers(-20, 20, M.nnz)
    path = tmp_path / "m.mtx"
    write_matrix_market(path, M)
    back = read_matrix_market(path)
    assert (back != M).nnz == 0
    assert set(zip(*back.nonzero())) == set(zip(*M.nonzero()))


def test_dense_and_symmetric_round_trip():
    rng = np.random.default_rng(1)
    S = rng.standard_normal((5, 5))
    S = S + S.T
    buf = io.StringIO()
    write_matrix_market(buf, S, symmetric=True, comment="test")
    assert np.array_equal(read_matrix_market(buf.getvalue().encode()), S)


def test_agrees_with_scipy(tmp_path):
    M = sp.random(20, 20, density=0.2, random_state=2, format="csr")
    path = tmp_path / "s.mtx"
    scipy.io.mmwrite(str(path), M, symmetry="general")
    np.testing.assert_array_equal(read_matrix_market(path).toarray(), M.toarray())


@pytest.mark.parametrize("text,lineno", [
    (b"%%MatrixMarket matrix coordinate real general\n2 2 1\n1 3 1.0\n", 3),
    (b"%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n", 2),
    (b"%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 x\n", 3),
    (b"%%MatrixMarket matrix coordinate real general\n2 x 1\n", 2),
    (b"%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 1.0\n2 2 1.0\n", 4),
    (b"%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 2 1.0\n", 3),
    (b"%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 1\n", 1),
    (b"%%MatrixMarket vector coordinate real general\n1 1 1\n1 1 1\n", 1),
])
def test_parse_errors_carry_line_numbers(text, lineno):
    with pytest.raises(ParseError) as info:
        read_matrix_market(text)
    assert info.value.lineno == lineno


@pytest.mark.parametrize("field", [b"complex", b"pattern"])
def test_unsupported_fields(field):
    with pytest.raises(UnsupportedField):
        read_matrix_market(b"%%MatrixMarket matrix coordinate " + field + b" general\n1 1 0\n")


def test_error_message_names_file(tmp_path):
    path = tmp_path / "bad.mtx"
    path.write_text("%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 nope\n")
    with pytest.raises(ParseError, match="bad.mtx:3"):
        read_matrix_market(path)


def _write_problem(tmp_path, d=12):
    A = sp.diags([np.full(d - 1, 1.0), np.full(d, -4.0), np.full(d - 1, 1.0)], [-1, 0, 1])
    rng = np.random.default_rng(3)
    paths = {"A": tmp_path / "A.mtx", "B": tmp_path / "B.mtx", "C": tmp_path / "C.mtx"}
    write_matrix_market(paths["A"], sp.csr_matrix(A))
    write_matrix_market(paths["B"], rng.standard_normal((d, 2)))
    write_matrix_market(paths["C"], rng.standard_normal((d, 3)))  # stored transposed
    return paths


def test_load_problem(tmp_path):
    paths = _write_problem(tmp_path)
    prob = load_problem(paths, lam=0.5)
    assert (prob.d, prob.p, prob.q) == (12, 2, 3)
    obs = load_problem(paths, gramian="observability")
    assert obs.is_lyapunov
    assert load_problem(paths, lyapunov=True).is_lyapunov


def test_load_problem_missing_file(tmp_path):
    paths = _write_problem(tmp_path)
    paths["E"] = tmp_path / "E.mtx"
    with pytest.raises(FileNotFoundError, match="E.mtx"):
        load_problem(paths)


def test_load_problem_needs_b_and_c(tmp_path):
    paths = _write_problem(tmp_path)
    del paths["B"]
    with pytest.raises(ParseError):
        load_problem(paths)
