"""Matrix Market reader and writer for real matrices.

Supports the ``coordinate`` (sparse) and ``array`` (dense) formats with the
``real`` or ``integer`` field and ``general``, ``symmetric`` or
``skew-symmetric`` storage.  ``complex`` and ``pattern`` files are rejected
with :class:`UnsupportedField`; any malformed line raises :class:`ParseError`
carrying its 1-based line number.
"""

import io
import os

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch, ParseError, UnsupportedField

BANNER = "%%matrixmarket"
FORMATS = ("coordinate", "array")
FIELDS = ("real", "integer", "double")
SYMMETRIES = ("general", "symmetric", "skew-symmetric")


def _open_text(source):
    if isinstance(source, (str, os.PathLike)):
        return open(source, "r", encoding="ascii", errors="strict"), str(source)
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(source.decode("ascii")), None
    return source, getattr(source, "name", None)


def _parse_header(line, lineno, path):
    tokens = line.strip().split()
    if not tokens or tokens[0].lower() != BANNER:
        raise ParseError("missing %%MatrixMarket banner", lineno, path)
    if len(tokens) != 5:
        raise ParseError(f"banner needs 5 tokens, got {len(tokens)}", lineno, path)
    obj, fmt, field, sym = (t.lower() for t in tokens[1:])
    if obj != "matrix":
        raise ParseError(f"unsupported object {obj!r}", lineno, path)
    if fmt not in FORMATS:
        raise ParseError(f"unknown format {fmt!r}", lineno, path)
    if field in ("complex", "pattern"):
        raise UnsupportedField(f"field {field!r} is not supported", lineno, path)
    if field not in FIELDS:
        raise ParseError(f"unknown field {field!r}", lineno, path)
    if sym == "hermitian":
        raise UnsupportedField("hermitian symmetry needs a complex field", lineno, path)
    if sym not in SYMMETRIES:
        raise ParseError(f"unknown symmetry {sym!r}", lineno, path)
    return fmt, field, sym


def _ints(tokens, count, lineno, path, what):
    if len(tokens) != count:
        raise ParseError(f"{what} needs {count} values, got {len(tokens)}", lineno, path)
    try:
        return [int(t) for t in tokens]
    except ValueError:
        raise ParseError(f"non-integer {what}: {' '.join(tokens)}", lineno, path) from None


def _value(token, field, lineno, path):
    try:
        return float(int(token)) if field == "integer" else float(token)
    except ValueError:
        raise ParseError(f"bad {field} value {token!r}", lineno, path) from None


def read_matrix_market(source):
    """Read a Matrix Market file, path or byte string.

    Returns
    -------
    scipy.sparse.csr_matrix or numpy.ndarray
        Sparse for ``coordinate`` files and dense for ``array`` files, with
        symmetric storage expanded.

    Raises
    ------
    ParseError
        On malformed content, with the offending line number.
    UnsupportedField
        For ``complex`` and ``pattern`` files.
    """
    fh, path = _open_text(source)
    try:
        lines = fh.read().splitlines()
    except UnicodeDecodeError as exc:
        raise ParseError(f"non-ASCII content: {exc}", None, path) from None
    finally:
        if isinstance(source, (str, os.PathLike)):
            fh.close()
    if not lines:
        raise ParseError("empty file", 1, path)
    fmt, field, sym = _parse_header(lines[0], 1, path)

    # skip comments and blank lines up to the size line
    body = ((i + 1, ln) for i, ln in enumerate(lines[1:], start=1))
    body = ((no, ln) for no, ln in body if ln.strip() and not ln.lstrip().startswith("%"))
    try:
        lineno, size_line = next(body)
    except StopIteration:
        raise ParseError("missing size line", len(lines), path) from None
    size_tokens = size_line.split()
    if fmt == "coordinate":
        nrows, ncols, nnz = _ints(size_tokens, 3, lineno, path, "size line")
    else:
        nrows, ncols = _ints(size_tokens, 2, lineno, path, "size line")
    if nrows < 0 or ncols < 0:
        raise ParseError("negative dimensions", lineno, path)
    if sym != "general" and nrows != ncols:
        raise ParseError(f"{sym} matrix must be square", lineno, path)

    if fmt == "coordinate":
        return _read_coordinate(body, nrows, ncols, nnz, field, sym, path, lineno)
    return _read_array(body, nrows, ncols, field, sym, path, lineno)


def _read_coordinate(body, nrows, ncols, nnz, field, sym, path, size_lineno):
    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz)
    k = 0
    for lineno, line in body:
        if k == nnz:
            raise ParseError(f"more than the declared {nnz} entries", lineno, path)
        tokens = line.split()
        if len(tokens) != 3:
            raise ParseError(f"entry needs 'row col value', got {line.strip()!r}", lineno, path)
        i, j = _ints(tokens[:2], 2, lineno, path, "index")
        if not (1 <= i <= nrows and 1 <= j <= ncols):
            raise ParseError(f"index ({i}, {j}) outside {nrows} x {ncols}", lineno, path)
        if sym != "general" and i < j:
            raise ParseError(f"{sym} storage expects the lower triangle, got ({i}, {j})",
                             lineno, path)
        if sym == "skew-symmetric" and i == j:
            raise ParseError("skew-symmetric storage has no diagonal", lineno, path)
        rows[k], cols[k] = i - 1, j - 1
        vals[k] = _value(tokens[2], field, lineno, path)
        k += 1
    if k != nnz:
        raise ParseError(f"expected {nnz} entries, found {k}", size_lineno, path)
    if sym != "general":
        off = rows != cols
        sign = -1.0 if sym == "skew-symmetric" else 1.0
        rows, cols, vals = (np.concatenate([rows, cols[off]]),
                            np.concatenate([cols, rows[off]]),
                            np.concatenate([vals, sign * vals[off]]))
    M = sp.coo_matrix((vals, (rows, cols)), shape=(nrows, ncols)).tocsr()
    M.sum_duplicates()
    return M


def _read_array(body, nrows, ncols, field, sym, path, size_lineno):
    if sym == "general":
        positions = [(i, j) for j in range(ncols) for i in range(nrows)]
    elif sym == "symmetric":
        positions = [(i, j) for j in range(ncols) for i in range(j, nrows)]
    else:
        positions = [(i, j) for j in range(ncols) for i in range(j + 1, nrows)]
    M = np.zeros((nrows, ncols))
    k = 0
    for lineno, line in body:
        tokens = line.split()
        if len(tokens) != 1:
            raise ParseError(f"array entry needs one value, got {line.strip()!r}", lineno, path)
        if k == len(positions):
            raise ParseError(f"more than the expected {len(positions)} values", lineno, path)
        i, j = positions[k]
        v = _value(tokens[0], field, lineno, path)
        M[i, j] = v
        if sym == "symmetric":
            M[j, i] = v
        elif sym == "skew-symmetric":
            M[j, i] = -v
        k += 1
    if k != len(positions):
        raise ParseError(f"expected {len(positions)} values, found {k}", size_lineno, path)
    return M


def write_matrix_market(target, M, symmetric=False, comment=None):
    """Write ``M`` in coordinate format (sparse input) or array format (dense input).

    With ``symmetric`` only the lower triangle is stored; ``M`` must then
    equal its transpose exactly.  Values are written with ``repr`` so they
    read back bit-identically.
    """
    sparse = sp.issparse(M)
    M = sp.coo_matrix(M) if sparse else np.atleast_2d(np.asarray(M, dtype=float))
    nrows, ncols = M.shape
    if symmetric:
        diff = (M - M.T) if sparse else M - M.T
        if nrows != ncols or (abs(diff).max() if diff.size else 0) != 0:
            raise DimensionMismatch("symmetric storage requested for a non-symmetric matrix")
    sym = "symmetric" if symmetric else "general"
    out = [f"%%MatrixMarket matrix {'coordinate' if sparse else 'array'} real {sym}"]
    if comment:
        out.extend("%" + ln for ln in str(comment).splitlines())
    if sparse:
        M.sum_duplicates()
        keep = (M.row >= M.col) if symmetric else np.ones(M.nnz, bool)
        r, c, v = M.row[keep], M.col[keep], M.data[keep]
        order = np.lexsort((r, c))
        out.append(f"{nrows} {ncols} {len(v)}")
        out.extend(f"{r[k] + 1} {c[k] + 1} {float(v[k])!r}" for k in order)
    else:
        out.append(f"{nrows} {ncols}")
        for j in range(ncols):
            start = j if symmetric else 0
            out.extend(repr(float(M[i, j])) for i in range(start, nrows))
    text = "\n".join(out) + "\n"
    if isinstance(target, (str, os.PathLike)):
        with open(target, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
    else:
        target.write(text)


PROBLEM_KEYS = ("A", "E", "B", "C")


def load_problem(paths, lam=1e-4, gramian=None, lyapunov=False):
    """Build an :class:`AreProblem` from Matrix Market files.

    ``paths`` maps ``A``, ``B``, ``C`` (and optionally ``E``) to files.  With
    ``gramian`` set to ``controllability`` or ``observability`` the matching
    Lyapunov problem is returned instead; ``lyapunov`` zeroes ``B``.
    """
    from .problems import gramian_problem
    from .radi import AreProblem

    if not paths or "A" not in paths:
        raise ParseError("the A matrix file is required")
    mats = {}
    for key in PROBLEM_KEYS:
        if paths.get(key) is None:
            continue
        if not os.path.isfile(paths[key]):
            raise FileNotFoundError(f"{key} matrix file not found: {paths[key]}")
        mats[key] = read_matrix_market(paths[key])
    A = mats["A"]
    E = mats.get("E")
    d = A.shape[0]

    def dense(key, default):
        if key not in mats:
            return default
        M = mats[key]
        return M.toarray() if sp.issparse(M) else M

    B = dense("B", None)
    C = dense("C", None)
    if B is not None and B.shape[0] != d and B.shape[1] == d:
        B = B.T  # tolerate B stored transposed
    if C is not None and C.shape[1] != d and C.shape[0] == d:
        C = C.T
    if gramian is not None:
        if gramian == "controllability" and B is None:
            raise ParseError("controllability Gramian needs a B file")
        if gramian == "observability" and C is None:
            raise ParseError("observability Gramian needs a C file")
        return gramian_problem(E, A, B, C, gramian)
    if B is None or C is None:
        raise ParseError("Riccati problems need both B and C files")
    if lyapunov:
        B = np.zeros_like(B)
    name = os.path.basename(str(paths["A"]))
    return AreProblem(A, B, C, E, lam, name=name)
