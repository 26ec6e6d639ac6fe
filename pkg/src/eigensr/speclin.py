"""Spectral decomposition of a band-major matrix and the eigenimage domain.

The thin SVD is taken through the ``L x L`` Gram matrix ``Y Y^T`` because
``L`` (bands) is small while ``N`` (pixels) is large.  Only the spectral
basis ``U`` and the singular values are kept; eigenimages are recovered by
projection, ``E = U^T Y``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ZERO_RANK_RTOL = 1e-12
JACOBI_TOL = 1e-12


@dataclass(frozen=True)
class SpectralDecomposition:
    """Spectral basis (orthonormal columns) and descending singular values."""

    basis: np.ndarray
    singular_values: np.ndarray

    @property
    def bands(self) -> int:
        return self.basis.shape[0]

    def columns(self, rank: int) -> np.ndarray:
        return self.basis[:, :rank]


@dataclass(frozen=True)
class EigenimageStack:
    """``channels x height x width`` eigenimages; signed and unbounded."""

    data: np.ndarray

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    def channel(self, i: int) -> np.ndarray:
        return self.data[i]

    def matrix(self) -> np.ndarray:
        return self.data.reshape(self.channels, -1)


def _round_robin_pairs(n):
    """Disjoint index pairs for each round of a round-robin tournament on ``n`` players."""
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        pairs = [(players[k], players[m - 1 - k]) for k in range(m // 2)]
        pairs = [(min(a, b), max(a, b)) for a, b in pairs if a < n and b < n]
        rounds.append((np.array([a for a, _ in pairs], dtype=np.intp), np.array([b for _, b in pairs], dtype=np.intp)))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def jacobi_eigh(A, tol=JACOBI_TOL, max_sweeps=100):
    """Eigendecomposition of a real symmetric matrix by cyclic Jacobi rotations.

    Each sweep visits every off-diagonal pair once, in round-robin order so
    that the rotations within a round touch disjoint rows and can be applied
    together.  Iteration stops when ``max |A_pq| <= tol * trace(|A|)``.

    Returns ``(eigenvalues, eigenvectors)`` in the order they end up on the
    diagonal (unsorted).
    """
    A = np.array(A, dtype=np.float64, copy=True)
    n = A.shape[0]
    if A.ndim != 2 or A.shape[1] != n:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    V = np.eye(n)
    if n == 1:
        return A.diagonal().copy(), V
    rounds = _round_robin_pairs(n)
    scale = np.abs(A.diagonal()).sum()
    off = np.abs(A - np.diag(A.diagonal()))
    for _ in range(max_sweeps):
        if off.max() <= tol * scale:
            break
        for p, q in rounds:
            apq = A[p, q]
            active = np.abs(apq) > 0.0
            if not active.any():
                continue
            p, q, apq = p[active], q[active], apq[active]
            with np.errstate(over="ignore", divide="ignore"):
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (np.abs(theta) + np.hypot(theta, 1.0))
            t[theta == 0.0] = 1.0
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            # A <- J^T A J, rows then columns
            Ap, Aq = A[p, :].copy(), A[q, :]
            A[p, :] = c[:, None] * Ap - s[:, None] * Aq
            A[q, :] = s[:, None] * Ap + c[:, None] * Aq
            Ap, Aq = A[:, p].copy(), A[:, q]
            A[:, p] = Ap * c - Aq * s
            A[:, q] = Ap * s + Aq * c
            A[p, q] = 0.0
            A[q, p] = 0.0
            Vp, Vq = V[:, p].copy(), V[:, q]
            V[:, p] = Vp * c - Vq * s
            V[:, q] = Vp * s + Vq * c
        off = np.abs(A - np.diag(A.diagonal()))
    else:
        raise RuntimeError(f"Jacobi iteration did not converge in {max_sweeps} sweeps")
    return A.diagonal().copy(), V


def fix_signs(U):
    """Flip columns so the largest-magnitude entry of each is nonnegative (first on ties)."""
    U = np.array(U, dtype=np.float64, copy=True)
    lead = np.argmax(np.abs(U), axis=0)
    signs = np.where(U[lead, np.arange(U.shape[1])] < 0, -1.0, 1.0)
    return U * signs


def _complete_basis(U, start):
    """Replace columns ``start:`` by an orthonormal completion via Gram-Schmidt."""
    L = U.shape[0]
    # When no unit vector e_j lies in the span built so far, Gram-Schmidt
    # over e_1.. accepts exactly e_1..e_{L-start}, so the completion is the
    # Q factor of [U_k, e_1..e_{L-start}] with R's signs divided out.
    A = np.concatenate([U[:, :start], np.eye(L)[:, : L - start]], axis=1)
    Q, R = np.linalg.qr(A)
    d = np.diagonal(R)
    if np.all(np.abs(d[start:]) > 1e-8):
        out = Q * np.where(d < 0, -1.0, 1.0)
        out[:, :start] = U[:, :start]
        return out
    out = np.empty((L, L))
    out[:, :start] = U[:, :start]
    n = start
    for e in np.eye(L):
        if n == L:
            break
        v = e
        for _ in range(2):
            v = v - out[:, :n] @ (out[:, :n].T @ v)
        norm = np.linalg.norm(v)
        if norm > 1e-8:
            out[:, n] = v / norm
            n += 1
    return out


def spectral_svd(Y, method: str = "eigh") -> SpectralDecomposition:
    """Spectral basis and singular values of an ``L x N`` matrix.

    ``method`` selects the symmetric eigensolver applied to ``Y Y^T``:
    ``"eigh"`` (LAPACK) or ``"jacobi"`` (:func:`jacobi_eigh`).  When
    ``L > N`` the trailing singular values are zero.
    """
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim != 2 or Y.size == 0:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {Y.shape}")
    if not np.all(np.isfinite(Y)):
        raise ValueError("matrix contains non-finite values")
    G = Y @ Y.T
    # a zero trace can also come from underflow, so confirm on Y itself
    if G.trace() == 0.0 and not np.any(Y):
        raise ValueError("matrix is all zeros; spectral basis is undefined")
    G = 0.5 * (G + G.T)
    if method == "eigh":
        evals, evecs = np.linalg.eigh(G)
    elif method == "jacobi":
        evals, evecs = jacobi_eigh(G)
    else:
        raise ValueError(f"unknown method {method!r}")
    order = np.argsort(-evals, kind="stable")
    U = evecs[:, order]
    # sqrt of a Gram eigenvalue is only good to ~1e-8 sigma_1, so take each
    # sigma as the norm of its eigenimage instead; the running minimum
    # removes rounding-level inversions of the descending order
    E = U.T @ Y
    sigma = np.minimum.accumulate(np.sqrt(np.einsum("ij,ij->i", E, E)))
    rank = int(np.count_nonzero(sigma > ZERO_RANK_RTOL * sigma[0]))
    sigma[rank:] = 0.0
    if rank < U.shape[1]:
        U = _complete_basis(U, rank)
    return SpectralDecomposition(basis=fix_signs(U), singular_values=sigma)


def _check_rank(rank, L):
    if not 1 <= rank <= L:
        raise ValueError(f"rank must be in [1, {L}], got {rank}")


def project(Y, dec: SpectralDecomposition, rank: int, height: int | None = None, width: int | None = None) -> EigenimageStack:
    """Eigenimages ``U[:, :rank]^T Y``.

    ``Y`` is either an ``L x N`` matrix (then ``height``/``width`` give the
    geometry, defaulting to a single row) or an ``L x H x W`` array.
    """
    Y = np.asarray(Y, dtype=np.float64)
    _check_rank(rank, dec.bands)
    if Y.ndim == 3:
        height, width = Y.shape[1:]
        Y = Y.reshape(Y.shape[0], -1)
    elif height is None and width is None:
        height, width = 1, Y.shape[1]
    if Y.shape[0] != dec.bands:
        raise ValueError(f"matrix has {Y.shape[0]} bands, basis has {dec.bands}")
    if height * width != Y.shape[1]:
        raise ValueError(f"geometry {height}x{width} does not match {Y.shape[1]} pixels")
    E = dec.columns(rank).T @ Y
    return EigenimageStack(E.reshape(rank, height, width))


def reconstruct(E: EigenimageStack, dec: SpectralDecomposition) -> np.ndarray:
    """``U[:, :R] E`` as an ``L x N`` matrix, ``R = E.channels``."""
    if E.data.ndim != 3:
        raise ValueError(f"eigenimage stack must be 3-D, got shape {E.data.shape}")
    if E.channels > dec.bands:
        raise ValueError(f"{E.channels} eigenimage channels exceed {dec.bands} bands")
    return dec.columns(E.channels) @ E.matrix()


def channel_cutoff(sigma, tau: float) -> int:
    """Largest ``j`` with cumulative normalized energy ``<= tau``, floored at 1."""
    sigma = np.asarray(sigma, dtype=np.float64)
    if not 0.0 < tau <= 1.0:
        raise ValueError(f"tau must be in (0, 1], got {tau}")
    if sigma.ndim != 1 or sigma.size == 0:
        raise ValueError("sigma must be a non-empty vector")
    if np.any(sigma < 0) or np.any(np.diff(sigma) > 0):
        raise ValueError("sigma must be nonnegative and descending")
    total = sigma.sum()
    if total <= 0:
        raise ValueError("sigma is all zeros")
    q = np.cumsum(sigma / total)
    # the final entry is 1 up to rounding; make tau=1 select every channel
    q[-1] = 1.0
    below = np.flatnonzero(q <= tau)
    return max(int(below[-1]) + 1 if below.size else 0, 1)


def sample_channel(p: int, rng) -> int:
    """Uniform channel index in ``{1, ..., p}`` (one-based).

    ``rng`` is a ``numpy.random.Generator`` or a seed accepted by
    ``numpy.random.default_rng``.
    """
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    return int(rng.integers(1, p + 1))


def default_rank(L: int) -> int:
    return math.ceil(L / 2)
