"""Relative feedback gains and their pairwise-difference decompositions.

A gain is relative when each output depends only on differences of its
inputs, which is the same as every row summing to zero.  A relative row
k supported on a connected graph can always be rewritten as a sum of
edge terms sum_{i<j} M_ij (y_i - y_j) with M skew-symmetric and zero off
the graph's edges; the minimum-Frobenius-norm choice of M comes from the
graph Laplacian pseudoinverse.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotRelative
from .graphs import Graph, laplacian, require_connected
from .rational import (
    RationalEntry,
    RationalMatrix,
    pis_zero,
    pmul,
    ptrim,
)

PINV_CUTOFF_REL = 1e-10


def _row_over_common_denominator(K, r):
    """Common denominator and adjusted numerators for row r of K."""
    m = K.shape[1]
    dens = [K[r, j].den for j in range(m)]
    distinct = []
    common = np.ones(1)
    for d in dens:
        if not any(
            d.size == f.size and np.allclose(d, f, rtol=1e-9, atol=1e-12)
            for f in distinct
        ):
            distinct.append(d)
            common = pmul(common, d)
    nums = []
    for j in range(m):
        if K[r, j].is_zero():
            nums.append(np.zeros(1))
            continue
        extra = np.ones(1)
        for f in distinct:
            if not (
                f.size == dens[j].size
                and np.allclose(f, dens[j], rtol=1e-9, atol=1e-12)
            ):
                extra = pmul(extra, f)
        nums.append(pmul(K[r, j].num, extra))
    return common, nums


def is_relative(K, tol=1e-10):
    """True when every row of the gain sums to zero.

    Accepts a real matrix or a RationalMatrix; for the latter the row
    sums must be the zero rational function.
    """
    if isinstance(K, RationalMatrix):
        p, _ = K.shape
        for r in range(p):
            _, nums = _row_over_common_denominator(K, r)
            deg = max(n.size for n in nums)
            total = np.zeros(deg, dtype=complex)
            term_scale = 0.0
            for n_ in nums:
                total[: n_.size] += n_
                if n_.size:
                    term_scale = max(term_scale, float(np.max(np.abs(n_))))
            if np.max(np.abs(total)) > tol * max(term_scale, 1.0):
                return False
        return True
    K = np.atleast_2d(np.asarray(K, dtype=float))
    scale = max(np.max(np.abs(K)), 1.0)
    return bool(np.max(np.abs(K.sum(axis=1))) <= tol * scale)


def _laplacian_pinv(graph):
    """Pseudoinverse of the graph Laplacian via eigendecomposition.

    Eigenvalues below a relative cutoff are treated as zero; for a
    connected graph exactly one such eigenvalue exists.
    """
    L = laplacian(graph)
    w, V = np.linalg.eigh(L)
    cutoff = PINV_CUTOFF_REL * max(w[-1], 1.0)
    inv = np.where(w > cutoff, 1.0 / np.where(w > cutoff, w, 1.0), 0.0)
    return (V * inv) @ V.T


def edge_sum_operator(M):
    """Row sums M @ 1: expresses sum_{i<j} M_ij (y_i - y_j) as a row gain."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return M.sum(axis=1)


def edge_sum_adjoint(graph, v):
    """Skew edge matrix (1/2) A o (v 1' - 1 v') supported off the diagonal."""
    v = np.asarray(v, dtype=float).reshape(-1)
    off = graph.adjacency.copy()
    np.fill_diagonal(off, False)
    outer = np.outer(v, np.ones(graph.n)) - np.outer(np.ones(graph.n), v)
    return 0.5 * off * outer


def verify_adjoint_identity(graph):
    """Max deviation of (row-sum o adjoint) from half the Laplacian.

    Applying the row-sum map after its adjoint acts as L/2; this returns
    the largest absolute deviation over all coordinate directions.
    """
    L = laplacian(graph)
    worst = 0.0
    for i in range(graph.n):
        e = np.zeros(graph.n)
        e[i] = 1.0
        lhs = edge_sum_operator(edge_sum_adjoint(graph, e))
        worst = max(worst, float(np.max(np.abs(lhs - 0.5 * L @ e))))
    return worst


def relative_decompose(k, graph):
    """Minimum-norm skew edge matrix M with M @ 1 = k.

    Parameters
    ----------
    k : array_like, shape (n,)
        A relative row gain (entries summing to zero).
    graph : Graph
        Connected interaction graph carrying the allowed edges.

    Returns
    -------
    ndarray, shape (n, n)
        Skew-symmetric, zero outside graph edges, with row sums equal
        to k; the representation u = sum_{i<j} M_ij (y_i - y_j).
    """
    k = np.asarray(k, dtype=float).reshape(-1)
    if k.size != graph.n:
        raise ValueError("gain length must match the node count")
    require_connected(graph)
    scale = max(np.max(np.abs(k)), 1.0)
    if abs(k.sum()) > 1e-10 * scale:
        raise NotRelative(f"row sums to {k.sum():.3e}, not zero")
    w = 2.0 * (_laplacian_pinv(graph) @ k)
    return edge_sum_adjoint(graph, w)


@dataclass
class PairwiseDifferenceForm:
    """Edge-kernel representation of a relative rational gain.

    ``kernels[r]`` is an n x n grid of rational entries, skew-symmetric
    and supported on graph edges, so that output r equals
    sum_{i<j} kernels[r][i][j](s) (y_i - y_j).
    """

    graph: Graph
    kernels: list

    def reconstruct_row(self, r, s, y):
        """Evaluate output r of the represented gain at frequency s."""
        n = self.graph.n
        total = 0.0 + 0.0j
        grid = self.kernels[r]
        for i in range(n):
            for j in range(i + 1, n):
                entry = grid[i][j]
                if entry.is_zero():
                    continue
                total += entry.evaluate(s) * (y[i] - y[j])
        return total

    def row_gain(self, r, s):
        """Row vector of the represented gain at frequency s."""
        n = self.graph.n
        grid = self.kernels[r]
        M = np.zeros((n, n), dtype=complex)
        for i in range(n):
            for j in range(n):
                if not grid[i][j].is_zero():
                    M[i, j] = grid[i][j].evaluate(s)
        return M.sum(axis=1)

    def to_json(self):
        items = []
        for r, grid in enumerate(self.kernels):
            for i in range(self.graph.n):
                for j in range(i + 1, self.graph.n):
                    if not grid[i][j].is_zero():
                        items.append(
                            {
                                "n": r,
                                "i": i,
                                "j": j,
                                "kernel": grid[i][j].to_json(),
                            }
                        )
        return {"nodes": self.graph.n, "terms": items}


def relative_decompose_rational(K, graph):
    """Pairwise-difference form of a relative rational gain matrix.

    Each row is brought over a common denominator; every numerator
    coefficient vector is decomposed through the static minimum-norm map
    and the coefficients are reassembled into edge kernels.
    """
    require_connected(graph)
    p, m = K.shape
    if m != graph.n:
        raise ValueError("gain column count must match the node count")
    if not is_relative(K):
        raise NotRelative("rational gain rows must sum to the zero function")
    Lp = _laplacian_pinv(graph)
    kernels = []
    for r in range(p):
        common, nums = _row_over_common_denominator(K, r)
        deg = max(n.size for n in nums)
        coeff_rows = np.zeros((deg, m))
        for j, n_ in enumerate(nums):
            coeff_rows[: n_.size, j] = np.real(n_)
        grid = [[RationalEntry.zero() for _ in range(m)] for _ in range(m)]
        num_grid = np.zeros((m, m, deg))
        for pwr in range(deg):
            c = coeff_rows[pwr]
            if np.max(np.abs(c)) == 0.0:
                continue
            w = 2.0 * (Lp @ c)
            M = edge_sum_adjoint(graph, w)
            num_grid[:, :, pwr] = M
        for i in range(m):
            for j in range(m):
                coeffs = ptrim(num_grid[i, j])
                if pis_zero(coeffs):
                    continue
                grid[i][j] = RationalEntry(coeffs, common, simplify=True)
        kernels.append(grid)
    return PairwiseDifferenceForm(graph, kernels)
