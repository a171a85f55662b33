"""Rational transfer-function entries and matrices.

Polynomials are stored as coefficient arrays in ascending powers of s.
Denominators are normalized to a leading coefficient of one.  Arithmetic
is plain coefficient convolution with a hard degree cap; common factors
are only cancelled by stripping shared powers of s exactly and by a
conservative root-matching pass.
"""

from __future__ import annotations

import numpy as np

from .errors import DegreeCapExceeded, ImproperEntry, SingularAtS
from .graphs import Partition

DEGREE_CAP = 128
ZERO_REL_TOL = 1e-10
ROOT_MATCH_TOL = 1e-8


def _as_coeffs(c):
    arr = np.atleast_1d(np.asarray(c))
    if arr.ndim != 1:
        raise ValueError("polynomial coefficients must be one-dimensional")
    if np.iscomplexobj(arr):
        return arr.astype(complex)
    return arr.astype(float)


def ptrim(c, rel_tol=ZERO_REL_TOL):
    """Drop leading (highest-order) coefficients that are relatively tiny."""
    c = _as_coeffs(c)
    scale = np.max(np.abs(c)) if c.size else 0.0
    if scale == 0.0:
        return c[:1] if c.size else np.zeros(1)
    keep = c.size
    while keep > 1 and abs(c[keep - 1]) <= rel_tol * scale:
        keep -= 1
    return c[:keep]


def pis_zero(c, rel_tol=ZERO_REL_TOL):
    c = _as_coeffs(c)
    scale = np.max(np.abs(c))
    return bool(scale == 0.0 or np.all(np.abs(c) <= rel_tol * max(scale, 1.0)))


def padd(a, b):
    a, b = _as_coeffs(a), _as_coeffs(b)
    n = max(a.size, b.size)
    dtype = complex if (np.iscomplexobj(a) or np.iscomplexobj(b)) else float
    out = np.zeros(n, dtype=dtype)
    out[: a.size] += a
    out[: b.size] += b
    return ptrim(out)


def pmul(a, b):
    a, b = _as_coeffs(a), _as_coeffs(b)
    if pis_zero(a) or pis_zero(b):
        return np.zeros(1)
    out = np.convolve(a, b)
    if out.size - 1 > DEGREE_CAP:
        raise DegreeCapExceeded(
            f"product degree {out.size - 1} exceeds the cap {DEGREE_CAP}"
        )
    return ptrim(out)


def pscale(a, alpha):
    return ptrim(_as_coeffs(a) * alpha)


def pval(c, s):
    """Evaluate at a (possibly complex) point, ascending coefficients."""
    c = _as_coeffs(c)
    result = 0.0 + 0.0j
    for coeff in c[::-1]:
        result = result * s + coeff
    return result


def pdeg(c):
    return ptrim(c).size - 1


def pdiv(num, den):
    """Polynomial long division; returns (quotient, remainder)."""
    num, den = ptrim(num), ptrim(den)
    if pis_zero(den):
        raise ZeroDivisionError("polynomial division by zero")
    q, r = np.polydiv(num[::-1], den[::-1])
    return ptrim(np.atleast_1d(q)[::-1]), ptrim(np.atleast_1d(r)[::-1])


def try_exact_divide(num, factor, rel_tol=1e-8):
    """Quotient of num / factor when the remainder is relatively tiny, else None."""
    num, factor = ptrim(num), ptrim(factor)
    if pdeg(factor) > pdeg(num):
        return None
    q, r = pdiv(num, factor)
    scale = max(np.max(np.abs(num)), 1e-300)
    if np.max(np.abs(r)) <= rel_tol * scale:
        return q
    return None


def _strip_shared_monomial(num, den):
    """Remove the exact common power of s from both polynomials."""
    num, den = ptrim(num), ptrim(den)
    n_scale = max(np.max(np.abs(num)), 1e-300)
    d_scale = max(np.max(np.abs(den)), 1e-300)
    k = 0
    limit = min(num.size, den.size) - 1
    while (
        k < limit
        and abs(num[k]) <= 1e-12 * n_scale
        and abs(den[k]) <= 1e-12 * d_scale
    ):
        k += 1
    if k:
        return num[k:], den[k:]
    return num, den


def _deflate(poly, root, rel_tol=ROOT_MATCH_TOL):
    """Synthetic division of poly by (s - root); None if the remainder is large."""
    poly = ptrim(poly)
    if poly.size < 2:
        return None
    desc = poly[::-1]
    out = np.zeros(desc.size - 1, dtype=complex)
    acc = desc[0]
    for i in range(1, desc.size):
        out[i - 1] = acc
        acc = desc[i] + acc * root
    scale = max(np.max(np.abs(poly)), 1e-300)
    if abs(acc) > rel_tol * scale * max(1.0, abs(root)):
        return None
    res = out[::-1]
    if not np.iscomplexobj(poly) and np.max(np.abs(res.imag)) <= 1e-9 * max(
        np.max(np.abs(res.real)), 1e-300
    ):
        res = res.real
    return ptrim(res)


def cancel_common_factors(num, den):
    """Best-effort cancellation of shared roots.

    Shared powers of s are stripped exactly.  Remaining denominator roots
    are matched against the numerator and removed pairwise, but only
    while every division leaves a relatively small remainder; otherwise
    the pair is left in place.  Complex roots of real polynomials are
    removed through their real quadratic factor so real data stays real.
    """
    num, den = _strip_shared_monomial(num, den)
    if pis_zero(num):
        return np.zeros(1), np.ones(1)
    both_real = not (np.iscomplexobj(num) or np.iscomplexobj(den))
    guard = 0
    while pdeg(den) >= 1 and pdeg(num) >= 1 and guard < DEGREE_CAP:
        guard += 1
        den_roots = np.roots(ptrim(den)[::-1])
        num_scale = max(np.max(np.abs(num)), 1e-300)
        cancelled = False
        for root in den_roots:
            tol = ROOT_MATCH_TOL * max(1.0, abs(root)) ** pdeg(num)
            if abs(pval(num, root)) > tol * num_scale:
                continue
            if both_real and abs(root.imag) > 1e-9 * max(1.0, abs(root)):
                quad = np.array([abs(root) ** 2, -2.0 * root.real, 1.0])
                new_num = try_exact_divide(num, quad, rel_tol=ROOT_MATCH_TOL)
                new_den = try_exact_divide(den, quad, rel_tol=ROOT_MATCH_TOL)
            else:
                root_use = root.real if both_real else root
                new_num = _deflate(num, root_use)
                new_den = _deflate(den, root_use)
            if new_num is None or new_den is None:
                continue
            num, den = new_num, new_den
            cancelled = True
            break
        if not cancelled:
            break
    return ptrim(num), ptrim(den)


class RationalEntry:
    """Scalar proper rational function num(s) / den(s).

    Parameters
    ----------
    num, den : array_like
        Ascending coefficient arrays.  The denominator must be nonzero and
        is normalized so that its leading coefficient equals one.
    """

    __slots__ = ("num", "den")

    def __init__(self, num, den=(1.0,), simplify=False):
        num = ptrim(num)
        den = ptrim(den)
        if pis_zero(den):
            raise ZeroDivisionError("denominator polynomial is zero")
        if simplify:
            num, den = cancel_common_factors(num, den)
        if pis_zero(num):
            num = np.zeros(1)
            den = np.ones(1)
        lead = den[-1]
        num = num / lead
        den = den / lead
        if num.size - 1 > DEGREE_CAP or den.size - 1 > DEGREE_CAP:
            raise DegreeCapExceeded("rational entry exceeds the degree cap")
        self.num = num
        self.den = den

    @staticmethod
    def zero():
        return RationalEntry([0.0])

    @staticmethod
    def one():
        return RationalEntry([1.0])

    @staticmethod
    def constant(c):
        return RationalEntry([c])

    @staticmethod
    def monomial():
        """The entry s (improper on purpose; used as a building block)."""
        return RationalEntry([0.0, 1.0])

    def is_zero(self):
        return pis_zero(self.num)

    def is_proper(self):
        return pdeg(self.num) <= pdeg(self.den)

    def is_strictly_proper(self):
        return self.is_zero() or pdeg(self.num) < pdeg(self.den)

    def require_proper(self, what="rational entry"):
        if not self.is_proper():
            raise ImproperEntry(
                f"{what} has numerator degree {pdeg(self.num)} > "
                f"denominator degree {pdeg(self.den)}"
            )

    def evaluate(self, s):
        dval = pval(self.den, s)
        scale = max(np.max(np.abs(self.den)), 1.0) * max(1.0, abs(s)) ** pdeg(self.den)
        if abs(dval) <= 1e-12 * scale:
            raise SingularAtS(f"rational entry has a pole at s = {s}")
        return pval(self.num, s) / dval

    def simplified(self):
        return RationalEntry(self.num, self.den, simplify=True)

    def __add__(self, other):
        other = _coerce_entry(other)
        if self.den.size == other.den.size and np.allclose(
            self.den, other.den, rtol=1e-12, atol=0.0
        ):
            return RationalEntry(padd(self.num, other.num), self.den)
        num = padd(pmul(self.num, other.den), pmul(other.num, self.den))
        return RationalEntry(num, pmul(self.den, other.den))

    def __sub__(self, other):
        other = _coerce_entry(other)
        return self + (-other)

    def __neg__(self):
        return RationalEntry(-self.num, self.den)

    def __mul__(self, other):
        if isinstance(other, (int, float, complex)):
            return RationalEntry(pscale(self.num, other), self.den)
        other = _coerce_entry(other)
        return RationalEntry(pmul(self.num, other.num), pmul(self.den, other.den))

    __rmul__ = __mul__

    def reciprocal(self):
        if self.is_zero():
            raise ZeroDivisionError("cannot invert the zero entry")
        return RationalEntry(self.den, self.num)

    def times_s(self):
        """Multiply by s (shared factors are cancelled exactly)."""
        return RationalEntry(np.concatenate(([0.0], self.num)), self.den, simplify=True)

    def equals(self, other, tol=1e-9):
        diff = self - _coerce_entry(other)
        scale = max(np.max(np.abs(self.num)), np.max(np.abs(_coerce_entry(other).num)), 1.0)
        return bool(np.max(np.abs(diff.num)) <= tol * scale)

    def to_json(self):
        return {"num": [float(c) for c in self.num], "den": [float(c) for c in self.den]}

    @staticmethod
    def from_json(data):
        return RationalEntry(data["num"], data["den"])

    def __repr__(self):
        return f"RationalEntry(num={list(self.num)}, den={list(self.den)})"


def _coerce_entry(value):
    if isinstance(value, RationalEntry):
        return value
    if isinstance(value, (int, float)):
        return RationalEntry.constant(float(value))
    if isinstance(value, complex):
        return RationalEntry([value])
    raise TypeError(f"cannot interpret {value!r} as a rational entry")


class RationalMatrix:
    """Dense grid of rational entries with row/column block partitions."""

    def __init__(self, entries, row_partition=None, col_partition=None):
        grid = [[_coerce_entry(e) for e in row] for row in entries]
        p = len(grid)
        if p == 0:
            raise ValueError("rational matrix needs at least one row")
        m = len(grid[0])
        if any(len(row) != m for row in grid):
            raise ValueError("ragged rational matrix")
        self.entries = grid
        self.shape = (p, m)
        self.row_partition = row_partition or Partition.scalar(p)
        self.col_partition = col_partition or Partition.scalar(m)
        if self.row_partition.total != p:
            raise ValueError("row partition does not sum to the row count")
        if self.col_partition.total != m:
            raise ValueError("column partition does not sum to the column count")

    @staticmethod
    def from_real(matrix, row_partition=None, col_partition=None):
        matrix = np.asarray(matrix, dtype=float)
        grid = [[RationalEntry.constant(v) for v in row] for row in matrix]
        return RationalMatrix(grid, row_partition, col_partition)

    @staticmethod
    def identity(n, partition=None):
        grid = [
            [RationalEntry.one() if i == j else RationalEntry.zero() for j in range(n)]
            for i in range(n)
        ]
        return RationalMatrix(grid, partition, partition)

    def __getitem__(self, key):
        i, j = key
        return self.entries[i][j]

    def evaluate(self, s):
        p, m = self.shape
        out = np.zeros((p, m), dtype=complex)
        for i in range(p):
            for j in range(m):
                out[i, j] = self.entries[i][j].evaluate(s)
        return out

    def is_strictly_proper(self):
        return all(e.is_strictly_proper() for row in self.entries for e in row)

    def is_proper(self):
        return all(e.is_proper() for row in self.entries for e in row)

    def map(self, fn):
        return RationalMatrix(
            [[fn(e) for e in row] for row in self.entries],
            self.row_partition,
            self.col_partition,
        )

    def __neg__(self):
        return self.map(lambda e: -e)

    def __add__(self, other):
        if self.shape != other.shape:
            raise ValueError("shape mismatch in rational matrix addition")
        grid = [
            [self.entries[i][j] + other.entries[i][j] for j in range(self.shape[1])]
            for i in range(self.shape[0])
        ]
        return RationalMatrix(grid, self.row_partition, self.col_partition)

    def __sub__(self, other):
        return self + (-other)

    def matmul(self, other, simplify=True):
        if self.shape[1] != other.shape[0]:
            raise ValueError("inner dimension mismatch in rational matmul")
        p, k = self.shape
        m = other.shape[1]
        grid = []
        for i in range(p):
            row = []
            for j in range(m):
                acc = RationalEntry.zero()
                for l in range(k):
                    a = self.entries[i][l]
                    b = other.entries[l][j]
                    if a.is_zero() or b.is_zero():
                        continue
                    acc = acc + a * b
                    # keep accumulated degrees in check on long sums
                    if simplify and pdeg(acc.den) > 24:
                        acc = acc.simplified()
                row.append(acc.simplified() if simplify else acc)
            grid.append(row)
        return RationalMatrix(grid, self.row_partition, other.col_partition)

    def times_s(self):
        return self.map(lambda e: e.times_s())

    def common_denominator(self):
        """Return (q, N) with q a single polynomial and N a polynomial grid.

        q divides out denominators that are exact factors of the running
        product before multiplying new ones in, so entries sharing (or
        dividing) a common characteristic polynomial do not inflate q.
        Every entry equals N[i][j] / q with N obtained by polynomial
        division.
        """
        distinct = []
        for row in self.entries:
            for e in row:
                d = e.den
                if not any(
                    d.size == f.size and np.allclose(d, f, rtol=1e-9, atol=1e-12)
                    for f in distinct
                ):
                    distinct.append(d)
        distinct.sort(key=pdeg, reverse=True)
        q = np.ones(1)
        for f in distinct:
            if try_exact_divide(q, f, rel_tol=1e-9) is None:
                q = pmul(q, f)
        grid = []
        for row in self.entries:
            grid_row = []
            for e in row:
                factor = try_exact_divide(q, e.den, rel_tol=1e-9)
                if factor is None:
                    # den not an exact factor of q (close duplicates); fall back
                    factor, _ = pdiv(q, e.den)
                grid_row.append(pmul(e.num, factor) if not e.is_zero() else np.zeros(1))
            grid.append(grid_row)
        return q, grid

    def inverse(self, simplify=True):
        """Exact rational inverse via adjugate over determinant.

        With ``simplify=False`` entries keep the raw adjugate-over-
        determinant form, which callers can reduce exactly by known
        factors instead of relying on root matching.
        """
        p, m = self.shape
        if p != m:
            raise ValueError("only square rational matrices can be inverted")
        q, n_grid = self.common_denominator()
        det = _poly_det(n_grid)
        if pis_zero(det):
            raise ZeroDivisionError("rational matrix is identically singular")
        adj = _poly_adjugate(n_grid)
        entries = []
        for i in range(m):
            row = []
            for j in range(m):
                num = pmul(adj[i][j], q)
                row.append(RationalEntry(num, det, simplify=simplify))
            entries.append(row)
        return RationalMatrix(entries, self.col_partition, self.row_partition)

    def to_json(self):
        return {
            "entries": [[e.to_json() for e in row] for row in self.entries],
            "rowPartition": list(self.row_partition.block_sizes),
            "colPartition": list(self.col_partition.block_sizes),
        }

    @staticmethod
    def from_json(data):
        grid = [[RationalEntry.from_json(e) for e in row] for row in data["entries"]]
        rp = Partition(tuple(data["rowPartition"])) if "rowPartition" in data else None
        cp = Partition(tuple(data["colPartition"])) if "colPartition" in data else None
        return RationalMatrix(grid, rp, cp)


def _poly_det(grid):
    """Determinant of a polynomial matrix by minor expansion with memoization."""
    n = len(grid)
    if n == 1:
        return ptrim(grid[0][0])
    cache = {}

    def minor(rows, cols):
        key = (rows, cols)
        if key in cache:
            return cache[key]
        if len(rows) == 1:
            result = ptrim(grid[rows[0]][cols[0]])
        else:
            i = rows[0]
            rest = rows[1:]
            result = np.zeros(1)
            for pos, j in enumerate(cols):
                a = grid[i][j]
                if pis_zero(a):
                    continue
                sub = minor(rest, cols[:pos] + cols[pos + 1 :])
                term = pmul(a, sub)
                result = padd(result, term if pos % 2 == 0 else -term)
        cache[key] = result
        return result

    return minor(tuple(range(n)), tuple(range(n)))


def _poly_adjugate(grid):
    """Adjugate of a polynomial matrix: adj[i][j] = (-1)^(i+j) M_ji."""
    n = len(grid)
    if n == 1:
        return [[np.ones(1)]]
    adj = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            rows = tuple(r for r in range(n) if r != j)
            cols = tuple(c for c in range(n) if c != i)
            sub = [[grid[r][c] for c in cols] for r in rows]
            m = _poly_det(sub)
            adj[i][j] = m if (i + j) % 2 == 0 else -_as_coeffs(m)
    return adj
