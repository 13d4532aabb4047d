"""Elementary symmetric functions of symmetric matrices and their derivatives.

For a real symmetric N x N matrix A with eigenvalues lam_1 .. lam_N,
``elem_sym(A, i)`` is the i-th elementary symmetric function of the
eigenvalues (1 for i=0, trace for i=1, det for i=N).  Derivatives with
respect to the matrix entries give the cofactor matrix ``S_i^{jk}`` and the
four-index tensor ``S_i^{jk,rs}``.

Derivative convention: mirror entries a_jk and a_kj are treated as one
variable whose perturbation sets both, i.e. for symmetric E

    elem_sym(A + tE, i) = elem_sym(A, i) + t * sum_{j,k} cofactor(A,i)_jk E_jk + O(t^2),

with the double sum running over the full index square.  The production
paths run through a single eigendecomposition; a literal index-expansion
evaluator and polarized mixed discriminants are kept as independent routes
for cross-checks.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError

# Dense symmetric matrices only; everything here is O(N^3) or worse and the
# geometric callers never exceed N = n-1 = 5.
MAX_DIM = 16


def check_symmetric(A, tol=1e-10):
    """Validate and return a (copy of a) dense symmetric matrix."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {A.shape}")
    N = A.shape[0]
    if N == 0 or N > MAX_DIM:
        raise DomainError(f"matrix dimension {N} outside supported range 1..{MAX_DIM}")
    scale = max(1.0, float(np.abs(A).max()))
    if not np.all(np.abs(A - A.T) <= tol * scale):
        raise DomainError("matrix is not symmetric")
    return 0.5 * (A + A.T)


def elem_sym_from_eigs(lams, i):
    """Elementary symmetric function e_i of the last-axis entries (batched).

    Stable Horner-style recursion; ``lams`` may be any (..., N) array.
    """
    lams = np.asarray(lams, dtype=float)
    N = lams.shape[-1]
    if not 0 <= i <= N:
        raise DomainError(f"order i={i} outside 0..{N}")
    e = np.zeros(lams.shape[:-1] + (i + 1,))
    e[..., 0] = 1.0
    for j in range(N):
        top = min(j + 1, i)
        for k in range(top, 0, -1):
            e[..., k] += lams[..., j] * e[..., k - 1]
    return e[..., i]


def elem_sym(A, i):
    """S_i(A): i-th elementary symmetric function of the eigenvalues of A."""
    A = check_symmetric(A)
    N = A.shape[0]
    if not 0 <= i <= N:
        raise DomainError(f"order i={i} outside 0..{N}")
    if i == 0:
        return 1.0
    lam = np.linalg.eigvalsh(A)
    return float(elem_sym_from_eigs(lam, i))


def elem_sym_batch(As, i):
    """S_i for a stack of symmetric matrices, shape (..., N, N) -> (...,)."""
    As = np.asarray(As, dtype=float)
    N = As.shape[-1]
    if not 0 <= i <= N:
        raise DomainError(f"order i={i} outside 0..{N}")
    if i == 0:
        return np.ones(As.shape[:-2])
    lam = np.linalg.eigvalsh(As)
    return elem_sym_from_eigs(lam, i)


@lru_cache(maxsize=None)
def _signed_permutations(size):
    """All permutations of range(size) with their signs."""
    out = []
    for perm in itertools.permutations(range(size)):
        inv = 0
        for a in range(size):
            for b in range(a + 1, size):
                if perm[a] > perm[b]:
                    inv += 1
        out.append((perm, -1.0 if inv % 2 else 1.0))
    return tuple(out)


def elem_sym_kronecker(A, i):
    """Reference evaluator for S_i via the generalized Kronecker-delta expansion.

    The raw expansion sums sign-weighted products a_{j_1 k_1} .. a_{j_i k_i}
    over all ordered index tuples, with the delta symbol killing every term
    whose row indices repeat or whose column indices are not a permutation of
    the rows, and a 1/i! in front.  Fixing the row order absorbs the 1/i!, so
    the sum below runs over i-subsets and signed permutations of each subset.
    Exponential cost; only intended as an independent cross-check for N <= 6.
    """
    A = check_symmetric(A)
    N = A.shape[0]
    if N > 6:
        raise DomainError("index-expansion evaluator limited to N <= 6")
    if not 0 <= i <= N:
        raise DomainError(f"order i={i} outside 0..{N}")
    if i == 0:
        return 1.0
    total = 0.0
    perms = _signed_permutations(i)
    for rows in itertools.combinations(range(N), i):
        rows = np.asarray(rows)
        minor = A[np.ix_(rows, rows)]
        for perm, sign in perms:
            prod = 1.0
            for a in range(i):
                prod *= minor[a, perm[a]]
            total += sign * prod
    return float(total)


def deleted_elem_sym(lams, k):
    """e_k of each deleted spectrum: out[..., l] = e_k(lams with entry l removed)."""
    lams = np.asarray(lams, dtype=float)
    N = lams.shape[-1]
    if k < 0:
        return np.zeros(lams.shape)
    if k > N - 1:
        raise DomainError(f"deleted order k={k} outside 0..{N - 1}")
    out = np.empty(lams.shape)
    idx = np.arange(N)
    for l in range(N):
        rest = lams[..., idx != l]
        out[..., l] = elem_sym_from_eigs(rest, k)
    return out


def pair_deleted_elem_sym(lams, k):
    """e_k of each pair-deleted spectrum: out[..., j, l] = e_k(lams minus entries j, l).

    Only the off-diagonal entries are meaningful; the diagonal is left at zero.
    """
    lams = np.asarray(lams, dtype=float)
    N = lams.shape[-1]
    out = np.zeros(lams.shape + (N,))
    if k < 0 or N < 2:
        return out
    if k > N - 2:
        raise DomainError(f"pair-deleted order k={k} outside 0..{N - 2}")
    idx = np.arange(N)
    for j in range(N):
        for l in range(j + 1, N):
            rest = lams[..., (idx != j) & (idx != l)]
            val = elem_sym_from_eigs(rest, k)
            out[..., j, l] = val
            out[..., l, j] = val
    return out


def cofactor(A, i):
    """First derivative matrix (d S_i / d a_jk) in the both-entries convention.

    Shares eigenvectors with A; the eigenvalue attached to the l-th
    eigenvector is e_{i-1} of the spectrum with lam_l removed.
    """
    A = check_symmetric(A)
    N = A.shape[0]
    if not 1 <= i <= N:
        raise DomainError(f"order i={i} outside 1..{N}")
    lam, V = np.linalg.eigh(A)
    d = deleted_elem_sym(lam, i - 1)
    return (V * d) @ V.T


def cofactor_batch(As, i):
    """cofactor() over a stack of matrices, (..., N, N) -> (..., N, N)."""
    As = np.asarray(As, dtype=float)
    N = As.shape[-1]
    if not 1 <= i <= N:
        raise DomainError(f"order i={i} outside 1..{N}")
    lam, V = np.linalg.eigh(As)
    d = deleted_elem_sym(lam, i - 1)
    return np.einsum("...jl,...l,...kl->...jk", V, d, V)


def trace_pair(A, M, i):
    """Full contraction sum_{jk} cofactor(A,i)_jk M_jk for symmetric M."""
    M = check_symmetric(M)
    C = cofactor(A, i)
    if C.shape != M.shape:
        raise DomainError("trace_pair: dimension mismatch")
    return float(np.sum(C * M))


@dataclass(frozen=True)
class CofactorTensor2:
    """Second derivative tensor T[j,k,r,s] = d^2 S_i / (d a_jk d a_rs).

    Symmetric under j<->k, r<->s and under swapping the pairs (jk)<->(rs).
    For i=1 the tensor is identically zero (S_1 is linear), which is returned
    rather than raised so vanishing second variations come out as exact zeros.
    """

    dim: int
    order: int
    values: np.ndarray

    def contract(self, W):
        """sum_{rs} T[j,k,r,s] W_rs for symmetric W -> (N, N) matrix."""
        W = check_symmetric(W)
        if W.shape[0] != self.dim:
            raise DomainError("contract: dimension mismatch")
        return np.einsum("jkrs,rs->jk", self.values, W)

    def symmetry_residual(self):
        T = self.values
        r1 = np.abs(T - T.transpose(1, 0, 2, 3)).max()
        r2 = np.abs(T - T.transpose(0, 1, 3, 2)).max()
        r3 = np.abs(T - T.transpose(2, 3, 0, 1)).max()
        return max(r1, r2, r3)


def _eigenbasis_tensor2(lam, i):
    """Second-derivative tensor of S_i at a diagonal matrix diag(lam)."""
    N = lam.shape[-1]
    T = np.zeros((N, N, N, N))
    if i < 2:
        return T
    pair = pair_deleted_elem_sym(lam, i - 2)
    for j in range(N):
        for l in range(N):
            if j == l:
                continue
            s = pair[j, l]
            T[j, j, l, l] = s
            # one half per ordered occurrence keeps the full-square
            # contraction convention consistent
            T[j, l, j, l] = -0.5 * s
            T[j, l, l, j] = -0.5 * s
    return T


def cofactor2(A, i):
    """Second derivative tensor of S_i at A in the both-entries convention."""
    A = check_symmetric(A)
    N = A.shape[0]
    if i < 1 or i > N:
        raise DomainError(f"order i={i} outside 1..{N}")
    if i == 1:
        return CofactorTensor2(N, i, np.zeros((N, N, N, N)))
    lam, V = np.linalg.eigh(A)
    Tbar = _eigenbasis_tensor2(lam, i)
    T = np.einsum("aj,bk,cr,ds,jkrs->abcd", V, V, V, V, Tbar, optimize=True)
    return CofactorTensor2(N, i, T)


def contract2(A, i, W):
    """sum_{rs} (d^2 S_i / d a_jk d a_rs)(A) W_rs without building the tensor."""
    A = check_symmetric(A)
    W = check_symmetric(W)
    N = A.shape[0]
    if W.shape[0] != N:
        raise DomainError("contract2: dimension mismatch")
    if i < 1 or i > N:
        raise DomainError(f"order i={i} outside 1..{N}")
    if i == 1:
        return np.zeros((N, N))
    lam, V = np.linalg.eigh(A)
    Wb = V.T @ W @ V
    pair = pair_deleted_elem_sym(lam, i - 2)
    Mb = -pair * Wb
    np.fill_diagonal(Mb, np.sum(pair * np.diagonal(Wb), axis=-1))
    return V @ Mb @ V.T


def contract2_batch(As, i, Ws):
    """contract2 over stacks: (..., N, N) x (..., N, N) -> (..., N, N)."""
    As = np.asarray(As, dtype=float)
    Ws = np.asarray(Ws, dtype=float)
    N = As.shape[-1]
    if i < 1 or i > N:
        raise DomainError(f"order i={i} outside 1..{N}")
    if i == 1:
        return np.zeros(np.broadcast_shapes(As.shape, Ws.shape))
    lam, V = np.linalg.eigh(As)
    Wb = np.einsum("...ji,...jk,...kl->...il", V, Ws, V)
    pair = pair_deleted_elem_sym(lam, i - 2)
    Mb = -pair * Wb
    diag = np.einsum("...jl,...ll->...j", pair, Wb)
    idx = np.arange(N)
    Mb[..., idx, idx] = diag
    return np.einsum("...ij,...jk,...lk->...il", V, Mb, V)


def mixed_discriminant(mats):
    """Mixed discriminant D(A_1, .., A_N) normalized so D(A, .., A) = det(A).

    Evaluated by inclusion-exclusion polarization of the determinant:
    D = (1/N!) sum_{S nonempty} (-1)^(N-|S|) det(sum_{i in S} A_i).
    """
    mats = [check_symmetric(M) for M in mats]
    N = mats[0].shape[0]
    if any(M.shape[0] != N for M in mats):
        raise DomainError("mixed_discriminant: matrices must share one dimension")
    if len(mats) != N:
        raise DomainError(
            f"mixed_discriminant: need exactly N={N} matrices, got {len(mats)}"
        )
    total = 0.0
    for size in range(1, N + 1):
        sign = (-1.0) ** (N - size)
        for subset in itertools.combinations(range(N), size):
            S = mats[subset[0]].copy()
            for idx in subset[1:]:
                S += mats[idx]
            total += sign * np.linalg.det(S)
    return total / math.factorial(N)


def mixed_discriminant_batch(stacks):
    """Mixed discriminant for N stacks of matrices, each (..., N, N) -> (...,)."""
    stacks = [np.asarray(M, dtype=float) for M in stacks]
    N = stacks[0].shape[-1]
    if len(stacks) != N:
        raise DomainError(
            f"mixed_discriminant: need exactly N={N} stacks, got {len(stacks)}"
        )
    total = 0.0
    for size in range(1, N + 1):
        sign = (-1.0) ** (N - size)
        for subset in itertools.combinations(range(N), size):
            S = stacks[subset[0]].copy()
            for idx in subset[1:]:
                S = S + stacks[idx]
            total = total + sign * np.linalg.det(S)
    return total / math.factorial(N)
