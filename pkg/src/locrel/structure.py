"""Sparsity structure of matrices, transfer matrices and realizations.

A matrix conforms to a pattern when every block sitting on a non-edge of
the pattern graph vanishes.  A realization (A, B, C, D) is structured
when all four matrices conform; it is additionally network-realizable
when the input side (B, D) or the output side (C, D) is block diagonal,
so each node only touches its own inputs or outputs directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotTFStructured
from .graphs import Partition, StructurePattern, path_graph
from .statespace import StateSpace, realize_rational, tf_of

ZERO_BLOCK_TOL = 1e-12


def _blocks_conform(matrix, row_part, col_part, allowed, tol=ZERO_BLOCK_TOL):
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    ro = row_part.offsets()
    co = col_part.offsets()
    scale = max(np.max(np.abs(matrix)) if matrix.size else 0.0, 1.0)
    for i in range(row_part.n_blocks):
        for j in range(col_part.n_blocks):
            if allowed[i, j]:
                continue
            block = matrix[ro[i] : ro[i + 1], co[j] : co[j + 1]]
            if block.size and np.max(np.abs(block)) > tol * scale:
                return False
    return True


def is_graph_structured(matrix, pattern, tol=ZERO_BLOCK_TOL):
    """True when every non-edge block of the matrix is (numerically) zero."""
    return _blocks_conform(
        matrix,
        pattern.row_partition,
        pattern.col_partition,
        pattern.graph.adjacency,
        tol,
    )


def is_block_diagonal(matrix, row_part, col_part, tol=ZERO_BLOCK_TOL):
    n = min(row_part.n_blocks, col_part.n_blocks)
    if row_part.n_blocks != col_part.n_blocks:
        raise ValueError("block-diagonal check needs matching block counts")
    allowed = np.eye(n, dtype=bool)
    return _blocks_conform(matrix, row_part, col_part, allowed, tol)


def is_tf_structured(H, pattern):
    """True when every non-edge block of a rational matrix is the zero entry."""
    if (
        H.row_partition.block_sizes != pattern.row_partition.block_sizes
        or H.col_partition.block_sizes != pattern.col_partition.block_sizes
    ):
        raise ValueError("rational matrix partitions do not match the pattern")
    ro = pattern.row_partition.offsets()
    co = pattern.col_partition.offsets()
    adj = pattern.graph.adjacency
    for bi in range(pattern.graph.n):
        for bj in range(pattern.graph.n):
            if adj[bi, bj]:
                continue
            for i in range(ro[bi], ro[bi + 1]):
                for j in range(co[bj], co[bj + 1]):
                    if not H[i, j].is_zero():
                        return False
    return True


@dataclass(frozen=True)
class RealizationStructure:
    """Outcome of a realization structure check."""

    structured: bool
    network: bool
    input_side_diagonal: bool
    output_side_diagonal: bool


def check_realization_structure(sys, pattern):
    """Classify a realization against a pattern.

    The state partition of the system must have one block per node (the
    per-node state grouping); zero-size state blocks are fine.
    """
    sp = sys.state_partition
    if sp is None or sp.n_blocks != pattern.graph.n:
        raise ValueError("system state partition must have one block per node")
    if sp.total != sys.n_states:
        raise ValueError("state partition does not sum to the state dimension")
    ip = sys.in_partition or pattern.col_partition
    op = sys.out_partition or pattern.row_partition
    adj = pattern.graph.adjacency
    ok_A = _blocks_conform(sys.A, sp, sp, adj)
    ok_B = _blocks_conform(sys.B, sp, ip, adj)
    ok_C = _blocks_conform(sys.C, op, sp, adj)
    ok_D = _blocks_conform(sys.D, op, ip, adj)
    structured = ok_A and ok_B and ok_C and ok_D
    in_diag = is_block_diagonal(sys.B, sp, ip) and is_block_diagonal(sys.D, op, ip)
    out_diag = is_block_diagonal(sys.C, op, sp) and is_block_diagonal(sys.D, op, ip)
    network = structured and (in_diag or out_diag)
    return RealizationStructure(structured, network, in_diag, out_diag)


def build_structured_realization(H, pattern, orientation="rows"):
    """Realize a structured transfer matrix without breaking its sparsity.

    Every entry is realized in controllable canonical form; the states of
    a row (or column) are grouped on that row's (column's) node.  With
    ``rows`` the resulting A and C are block diagonal and B, D inherit
    the pattern sparsity; ``columns`` swaps the roles of B and C.

    Raises
    ------
    NotTFStructured
        If some non-edge entry of H is nonzero.
    ImproperEntry
        If an entry has more zeros than poles.
    """
    if not is_tf_structured(H, pattern):
        raise NotTFStructured(
            "transfer matrix has a nonzero entry outside the pattern edges"
        )
    sys = realize_rational(H, orientation)
    return sys


@dataclass(frozen=True)
class TridiagCounterexample:
    """A sparse chain realization together with its dense-transfer verdict."""

    system: StateSpace
    pattern: StructurePattern
    tf_structured: bool


def tridiag_counterexample(n=3):
    """Chain system whose transfer matrix is dense despite a sparse realization.

    The realization A = tridiag(1, -2, 1), B = C = I, D = 0 conforms to
    the chain pattern (and is network-realizable), but the resolvent
    (sI - A)^-1 fills in: information propagates through the chain, so
    ``tf_structured`` comes back False.
    """
    if n < 3:
        raise ValueError("the counterexample needs at least 3 nodes")
    A = np.zeros((n, n))
    np.fill_diagonal(A, -2.0)
    idx = np.arange(n - 1)
    A[idx, idx + 1] = 1.0
    A[idx + 1, idx] = 1.0
    graph = path_graph(n)
    part = Partition.scalar(n)
    sys = StateSpace(
        A,
        np.eye(n),
        np.eye(n),
        np.zeros((n, n)),
        state_partition=part,
        in_partition=part,
        out_partition=part,
    )
    pattern = StructurePattern(graph, part, part)
    flag = is_tf_structured(tf_of(sys), pattern)
    return TridiagCounterexample(sys, pattern, flag)
