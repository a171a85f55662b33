"""State-space systems, interconnections, and norms.

Systems are kept alongside block partitions of their state, input and
output dimensions so that sparsity checks can be made per node.
Interconnections never reduce their realizations: non-minimal modes are
harmless for the evaluation-based checks used throughout and keeping
them makes the realizations predictable.  The one exception is rational
conversion, which compresses each entry to the invariant subspace it
actually reaches, because characteristic polynomials of large composite
state matrices are numerically useless.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import (
    IllPosedFeedback,
    NonzeroFeedthrough,
    NotHurwitz,
    RationalConversionFailed,
    SingularAtS,
)
from .graphs import Partition
from .rational import RationalEntry, RationalMatrix, padd, pdeg, pscale, ptrim


class StateSpace:
    """LTI system (A, B, C, D) with optional node partitions."""

    def __init__(
        self,
        A,
        B,
        C,
        D,
        state_partition=None,
        in_partition=None,
        out_partition=None,
    ):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.atleast_2d(np.asarray(B, dtype=float))
        C = np.atleast_2d(np.asarray(C, dtype=float))
        D = np.atleast_2d(np.asarray(D, dtype=float))
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError("A must be square")
        if B.shape[0] != n:
            raise ValueError(f"B has {B.shape[0]} rows, expected {n}")
        if C.shape[1] != n:
            raise ValueError(f"C has {C.shape[1]} columns, expected {n}")
        if D.shape != (C.shape[0], B.shape[1]):
            raise ValueError(
                f"D has shape {D.shape}, expected {(C.shape[0], B.shape[1])}"
            )
        self.A, self.B, self.C, self.D = A, B, C, D
        self.n_states = n
        self.n_inputs = B.shape[1]
        self.n_outputs = C.shape[0]
        self.state_partition = state_partition
        self.in_partition = in_partition
        self.out_partition = out_partition

    @property
    def shape(self):
        return (self.n_outputs, self.n_inputs)

    @staticmethod
    def static(D, in_partition=None, out_partition=None):
        D = np.atleast_2d(np.asarray(D, dtype=float))
        p, m = D.shape
        return StateSpace(
            np.zeros((0, 0)),
            np.zeros((0, m)),
            np.zeros((p, 0)),
            D,
            state_partition=Partition((0,)),
            in_partition=in_partition,
            out_partition=out_partition,
        )

    def evaluate(self, s):
        """Transfer matrix value C (sI - A)^-1 B + D."""
        if self.n_states == 0:
            return self.D.astype(complex)
        M = s * np.eye(self.n_states) - self.A
        try:
            X = np.linalg.solve(M, self.B.astype(complex))
        except np.linalg.LinAlgError as exc:
            raise SingularAtS(f"state matrix resolvent is singular at s = {s}") from exc
        resid = np.max(np.abs(M @ X - self.B)) if self.B.size else 0.0
        scale = max(np.max(np.abs(self.B)), 1.0) if self.B.size else 1.0
        if resid > 1e-6 * scale:
            raise SingularAtS(f"resolvent solve did not converge at s = {s}")
        return self.C @ X + self.D

    def to_json(self):
        data = {
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "C": self.C.tolist(),
            "D": self.D.tolist(),
        }
        parts = {}
        if self.state_partition is not None:
            parts["state"] = list(self.state_partition.block_sizes)
        if self.in_partition is not None:
            parts["in"] = list(self.in_partition.block_sizes)
        if self.out_partition is not None:
            parts["out"] = list(self.out_partition.block_sizes)
        if parts:
            data["partitions"] = parts
        return data

    @staticmethod
    def from_json(data):
        parts = data.get("partitions", {})

        def get(name):
            return Partition(tuple(parts[name])) if name in parts else None

        return StateSpace(
            data["A"],
            data["B"],
            data["C"],
            data["D"],
            state_partition=get("state"),
            in_partition=get("in"),
            out_partition=get("out"),
        )

    def __repr__(self):
        return (
            f"StateSpace(states={self.n_states}, inputs={self.n_inputs}, "
            f"outputs={self.n_outputs})"
        )


def _concat_partitions(p1, p2):
    if p1 is None or p2 is None:
        return None
    return Partition(p1.block_sizes + p2.block_sizes)


def series(g, h):
    """Cascade u -> g -> h (the output of g drives h)."""
    if h.n_inputs != g.n_outputs:
        raise ValueError("series: h must accept the outputs of g")
    A = np.block(
        [
            [g.A, np.zeros((g.n_states, h.n_states))],
            [h.B @ g.C, h.A],
        ]
    )
    B = np.vstack([g.B, h.B @ g.D])
    C = np.hstack([h.D @ g.C, h.C])
    D = h.D @ g.D
    return StateSpace(
        A,
        B,
        C,
        D,
        state_partition=_concat_partitions(g.state_partition, h.state_partition),
        in_partition=g.in_partition,
        out_partition=h.out_partition,
    )


def parallel(g, h):
    """Sum of two systems sharing inputs and outputs."""
    if g.shape != h.shape:
        raise ValueError("parallel: systems must share input/output dimensions")
    A = scipy.linalg.block_diag(g.A, h.A)
    B = np.vstack([g.B, h.B])
    C = np.hstack([g.C, h.C])
    D = g.D + h.D
    return StateSpace(
        A,
        B,
        C,
        D,
        state_partition=_concat_partitions(g.state_partition, h.state_partition),
        in_partition=g.in_partition,
        out_partition=g.out_partition,
    )


def feedback(g, h):
    """Positive feedback y = g(u + h(y)); needs I - Dg Dh invertible."""
    if h.n_inputs != g.n_outputs or h.n_outputs != g.n_inputs:
        raise ValueError("feedback: h must map outputs of g back to its inputs")
    E = np.eye(g.n_outputs) - g.D @ h.D
    if g.n_outputs and np.linalg.cond(E) > 1e12:
        raise IllPosedFeedback("algebraic loop: I - Dg*Dh is singular")
    Einv = np.linalg.inv(E)
    # y = Einv (Cg xg + Dg Ch xh + Dg u)
    Cy = Einv @ np.hstack([g.C, g.D @ h.C])
    Dy = Einv @ g.D
    inject = np.vstack([g.B @ h.D, h.B])  # drives states from y
    A = np.block(
        [
            [g.A, g.B @ h.C],
            [np.zeros((h.n_states, g.n_states)), h.A],
        ]
    )
    A = A + inject @ Cy
    B = np.vstack([g.B, np.zeros((h.n_states, g.n_inputs))]) + inject @ Dy
    return StateSpace(
        A,
        B,
        Cy,
        Dy,
        state_partition=_concat_partitions(g.state_partition, h.state_partition),
        in_partition=g.in_partition,
        out_partition=g.out_partition,
    )


def inverse(g):
    """Inverse system; requires square invertible feedthrough D."""
    if g.n_outputs != g.n_inputs:
        raise ValueError("only square systems can be inverted")
    if g.n_inputs == 0:
        return g
    if np.linalg.cond(g.D) > 1e12:
        raise IllPosedFeedback("system feedthrough is singular; inverse is improper")
    Dinv = np.linalg.inv(g.D)
    return StateSpace(
        g.A - g.B @ Dinv @ g.C,
        g.B @ Dinv,
        -Dinv @ g.C,
        Dinv,
        state_partition=g.state_partition,
        in_partition=g.out_partition,
        out_partition=g.in_partition,
    )


def is_hurwitz(ss_or_matrix, tol=1e-9):
    """True when every eigenvalue has real part below -tol."""
    A = ss_or_matrix.A if isinstance(ss_or_matrix, StateSpace) else ss_or_matrix
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] == 0:
        return True
    return bool(np.max(np.linalg.eigvals(A).real) < -tol)


def h2_norm_squared(sys):
    """Squared H2 norm via the observability Gramian.

    Solves A' Q + Q A + C' C = 0 and returns trace(B' Q B).  The state
    matrix must be Hurwitz and the feedthrough zero, otherwise the norm
    is infinite.
    """
    if not is_hurwitz(sys):
        raise NotHurwitz("H2 norm requires a Hurwitz state matrix")
    if np.max(np.abs(sys.D)) > 0:
        raise NonzeroFeedthrough("H2 norm requires zero feedthrough")
    if sys.n_states == 0:
        return 0.0
    Q = scipy.linalg.solve_continuous_lyapunov(sys.A.T, -sys.C.T @ sys.C)
    return float(np.trace(sys.B.T @ Q @ sys.B))


def h2_norm(sys):
    return float(np.sqrt(max(h2_norm_squared(sys), 0.0)))


def scalar_h2_squared(entry):
    """Squared H2 norm of one rational entry; complex coefficients allowed.

    Builds the (possibly complex) companion realization directly and
    solves the conjugate-transposed Lyapunov equation.
    """
    if entry.is_zero():
        return 0.0
    if not entry.is_strictly_proper():
        raise NonzeroFeedthrough("H2 norm of a non-strictly-proper entry is infinite")
    den = ptrim(entry.den)
    k = pdeg(den)
    roots = np.roots(den[::-1])
    if np.max(roots.real) >= -1e-9:
        raise NotHurwitz("entry denominator has a root with nonnegative real part")
    A = np.zeros((k, k), dtype=complex)
    if k > 1:
        A[:-1, 1:] = np.eye(k - 1)
    A[-1, :] = -den[:k]
    B = np.zeros((k, 1), dtype=complex)
    B[-1, 0] = 1.0
    C = np.zeros((1, k), dtype=complex)
    nn = ptrim(entry.num)
    C[0, : nn.size] = nn
    Q = scipy.linalg.solve_continuous_lyapunov(A.conj().T, -C.conj().T @ C)
    return float(np.real(np.trace(B.conj().T @ Q @ B)))


def char_poly(A):
    """Characteristic polynomial and resolvent adjugate coefficients.

    Uses the Faddeev-LeVerrier recursion.  Returns (q, mats) where q is
    the ascending coefficient array of det(sI - A) and mats[k] is the
    coefficient of s^(n-1-k) in adj(sI - A).
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    coeffs_desc = [1.0]
    mats = []
    N = np.eye(n)
    for k in range(1, n + 1):
        mats.append(N)
        AN = A @ N
        a = -np.trace(AN) / k
        coeffs_desc.append(a)
        N = AN + a * np.eye(n)
    q = np.array(coeffs_desc[::-1], dtype=float)
    return q, mats


def _invariant_subspace(A, V, rtol=1e-10):
    """Orthonormal basis of the smallest A-invariant subspace holding range(V).

    Grows the basis one Krylov block at a time; directions whose residual
    after reorthogonalization falls below rtol of the block norm are
    treated as already captured.
    """
    n = A.shape[0]
    Q = np.zeros((n, 0))
    W = np.atleast_2d(V)
    while W.shape[1] and Q.shape[1] < n:
        # threshold against the block before orthogonalization, so that a
        # block already inside span(Q) up to rounding terminates the loop
        scale = np.linalg.norm(W)
        if scale <= 1e-300:
            break
        W = W - Q @ (Q.T @ W)
        W = W - Q @ (Q.T @ W)
        qw, rw = np.linalg.qr(W)
        keep = np.abs(np.diag(rw)) > rtol * scale
        if not np.any(keep):
            break
        fresh = qw[:, keep]
        Q = np.hstack([Q, fresh])
        W = A @ fresh
    return Q


def _reachable_siso(A, b, c, rtol=1e-10):
    """Restriction of (A, b, c) to its controllable-and-observable part."""
    Qc = _invariant_subspace(A, b.reshape(-1, 1), rtol)
    A1 = Qc.T @ A @ Qc
    b1 = Qc.T @ b.reshape(-1)
    c1 = c.reshape(-1) @ Qc
    Qo = _invariant_subspace(A1.T, c1.reshape(-1, 1), rtol)
    return Qo.T @ A1 @ Qo, Qo.T @ b1, c1 @ Qo


def _siso_entry(A, b, c, d):
    """Rational entry c (sI - A)^-1 b + d for a small state matrix."""
    k = A.shape[0]
    if k == 0:
        return RationalEntry([float(d)]) if d != 0.0 else RationalEntry([])
    q, mats = char_poly(A)
    num = np.zeros(k)
    for idx, Nk in enumerate(mats):
        num[k - 1 - idx] = c @ Nk @ b
    num = ptrim(num)
    if d != 0.0:
        num = padd(num, pscale(q, d))
    return RationalEntry(num, q, simplify=True)


# Faddeev-LeVerrier loses all precision well before this many states, so
# larger systems are converted entry by entry on their reachable parts.
DIRECT_TF_LIMIT = 12

_TF_CHECK_POINTS = (0.83 + 1.37j, 2.21 - 0.59j, 1.49 + 2.73j)


def tf_of(sys):
    """Rational transfer matrix of a state-space system.

    Small systems share the characteristic polynomial denominator with
    common factors cancelled conservatively per entry.  Larger systems
    are compressed per entry first, and the result is checked against
    the original frequency response.
    """
    if sys.n_states == 0:
        return RationalMatrix.from_real(sys.D, sys.out_partition, sys.in_partition)
    n = sys.n_states
    p, m = sys.n_outputs, sys.n_inputs
    entries = []
    if n <= DIRECT_TF_LIMIT:
        q, mats = char_poly(sys.A)
        # numerators: sum_k (C mats[k] B) s^(n-1-k) + D q(s)
        coeff_mats = [sys.C @ Nk @ sys.B for Nk in mats]
        for i in range(p):
            row = []
            for j in range(m):
                num = np.zeros(n)
                for k, M in enumerate(coeff_mats):
                    num[n - 1 - k] = M[i, j]
                num = ptrim(num)
                if sys.D[i, j] != 0.0:
                    num = padd(num, pscale(q, sys.D[i, j]))
                row.append(RationalEntry(num, q, simplify=True))
            entries.append(row)
        return RationalMatrix(entries, sys.out_partition, sys.in_partition)
    for i in range(p):
        row = []
        for j in range(m):
            Ar, br, cr = _reachable_siso(sys.A, sys.B[:, j], sys.C[i, :])
            row.append(_siso_entry(Ar, br, cr, sys.D[i, j]))
        entries.append(row)
    result = RationalMatrix(entries, sys.out_partition, sys.in_partition)
    for s in _TF_CHECK_POINTS:
        try:
            want = sys.evaluate(s)
        except SingularAtS:
            continue
        got = result.evaluate(s)
        scale = max(float(np.max(np.abs(want))), 1.0)
        if np.max(np.abs(got - want)) > 1e-6 * scale:
            raise RationalConversionFailed(
                f"{n}-state system lost accuracy during rational conversion"
            )
    return result


def realize_entry(entry):
    """Controllable canonical realization of one proper rational entry.

    Returns (A, B, C, D) with state dimension equal to the denominator
    degree of the entry.
    """
    entry.require_proper()
    if np.iscomplexobj(entry.num) and np.max(np.abs(np.imag(entry.num))) > 1e-9 * max(
        np.max(np.abs(entry.num)), 1.0
    ):
        raise ValueError("cannot realize an entry with complex coefficients")
    den = ptrim(entry.den)
    k = pdeg(den)
    if k == 0:
        d = entry.num[0] / den[0] if not entry.is_zero() else 0.0
        return (
            np.zeros((0, 0)),
            np.zeros((0, 1)),
            np.zeros((1, 0)),
            np.array([[float(np.real(d))]]),
        )
    num = np.zeros(k + 1)
    nn = ptrim(entry.num)
    num[: nn.size] = np.real(nn)
    d = num[k]  # denominator is monic, so the feedthrough is the top ratio
    strictly = num[:k] - d * np.real(den[:k])
    A = np.zeros((k, k))
    A[:-1, 1:] = np.eye(k - 1)
    A[-1, :] = -np.real(den[:k])
    B = np.zeros((k, 1))
    B[-1, 0] = 1.0
    C = strictly.reshape(1, k)
    D = np.array([[d]])
    return A, B, C, D


def realize_rational(H, orientation="rows"):
    """Entry-wise canonical realization of a proper rational matrix.

    ``rows`` groups the states of all entries belonging to a row block of
    the matrix on that block's node, making A and C block diagonal with
    respect to the node grouping while B and D inherit any entry-level
    sparsity; ``columns`` groups by column block instead, making A and B
    block diagonal.
    """
    if orientation not in ("rows", "columns"):
        raise ValueError("orientation must be 'rows' or 'columns'")
    p, m = H.shape
    pieces = [[realize_entry(H[i, j]) for j in range(m)] for i in range(p)]
    dims = [[pieces[i][j][0].shape[0] for j in range(m)] for i in range(p)]
    if orientation == "rows":
        part = H.row_partition
        row_offsets = part.offsets()
        group_sizes = [
            sum(dims[i][j] for i in range(row_offsets[b], row_offsets[b + 1]) for j in range(m))
            for b in range(part.n_blocks)
        ]
        order = [
            (i, j)
            for b in range(part.n_blocks)
            for i in range(row_offsets[b], row_offsets[b + 1])
            for j in range(m)
        ]
    else:
        part = H.col_partition
        col_offsets = part.offsets()
        group_sizes = [
            sum(dims[i][j] for j in range(col_offsets[b], col_offsets[b + 1]) for i in range(p))
            for b in range(part.n_blocks)
        ]
        order = [
            (i, j)
            for b in range(part.n_blocks)
            for j in range(col_offsets[b], col_offsets[b + 1])
            for i in range(p)
        ]
    total = sum(group_sizes)
    A = np.zeros((total, total))
    B = np.zeros((total, m))
    C = np.zeros((p, total))
    D = np.zeros((p, m))
    pos = 0
    for i, j in order:
        Aij, Bij, Cij, Dij = pieces[i][j]
        k = dims[i][j]
        A[pos : pos + k, pos : pos + k] = Aij
        B[pos : pos + k, j : j + 1] = Bij
        C[i : i + 1, pos : pos + k] = Cij
        D[i, j] = Dij[0, 0]
        pos += k
    return StateSpace(
        A,
        B,
        C,
        D,
        state_partition=Partition(tuple(group_sizes)),
        in_partition=H.col_partition,
        out_partition=H.row_partition,
    )


def permute_states(sys, perm):
    """Reorder states by the given index permutation."""
    perm = np.asarray(perm, dtype=int)
    P = np.eye(sys.n_states)[perm]
    return StateSpace(
        P @ sys.A @ P.T,
        P @ sys.B,
        sys.C @ P.T,
        sys.D,
        state_partition=sys.state_partition,
        in_partition=sys.in_partition,
        out_partition=sys.out_partition,
    )


def interleave_node_states(sys, groups):
    """Regroup a stacked state vector by node.

    ``groups`` is a list of per-subsystem partitions, each with one block
    per node (same node count).  The stacked states (subsystem-major) are
    permuted to node-major order and the state partition becomes the
    per-node totals.
    """
    counts = [list(g.block_sizes) for g in groups]
    n_nodes = len(counts[0])
    if any(len(c) != n_nodes for c in counts):
        raise ValueError("all groups must partition over the same node count")
    sub_offsets = np.concatenate([[0], np.cumsum([sum(c) for c in counts])]).astype(int)
    perm = []
    for node in range(n_nodes):
        for k, c in enumerate(counts):
            start = sub_offsets[k] + sum(c[:node])
            perm.extend(range(start, start + c[node]))
    node_sizes = tuple(sum(c[node] for c in counts) for node in range(n_nodes))
    out = permute_states(sys, perm)
    out.state_partition = Partition(node_sizes)
    return out


class FrequencyResponse:
    """Transfer matrix given only through point evaluation."""

    def __init__(self, shape, fn, description=""):
        self.shape = tuple(shape)
        self._fn = fn
        self.description = description

    def evaluate(self, s):
        out = np.asarray(self._fn(s), dtype=complex)
        if out.shape != self.shape:
            raise ValueError(
                f"frequency response returned shape {out.shape}, expected {self.shape}"
            )
        return out

    def __repr__(self):
        tag = f" {self.description}" if self.description else ""
        return f"FrequencyResponse(shape={self.shape}{tag})"
