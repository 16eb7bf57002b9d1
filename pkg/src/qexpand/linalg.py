"""Dense complex linear algebra used by the channel and sampling code.

Haar sampling uses Ginibre + QR with the phase correction of the R diagonal.
General eigenvalues come from LAPACK by default; a compact Hessenberg +
shifted-QR routine (eigenvalues only) is kept as an independent route for
small matrices.  ``top_singulars`` is a matrix-free block power iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

EIG_CAP = 2500
POWER_MAX_ITER = 10_000

Operator = Callable[[np.ndarray], np.ndarray]


class LinalgError(ValueError):
    """Bad input (shape, cap, non-Hermitian, inconsistent adjoint)."""


class ConvergenceError(RuntimeError):
    """An iterative method hit its iteration cap."""

    def __init__(self, msg: str, partial=None):
        super().__init__(msg)
        self.partial = partial


# --------------------------------------------------------------------------
# random streams


@dataclass(frozen=True)
class RngStream:
    """Counter-based stream identified by ``(seed, index)``.

    Streams with the same pair produce the same numbers no matter in which
    order or process they are consumed.
    """

    seed: int
    index: tuple[int, ...] = ()

    def child(self, *index: int) -> "RngStream":
        return RngStream(self.seed, self.index + tuple(index))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=self.index)
        return np.random.Generator(np.random.Philox(ss))


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    return RngStream(int(rng)).generator()


def sample_haar(N: int, rng) -> np.ndarray:
    """Haar-distributed N x N unitary: QR of a Ginibre matrix with R's diagonal phases removed."""
    if N < 1:
        raise LinalgError("N must be >= 1")
    g = _as_generator(rng)
    z = (g.standard_normal((N, N)) + 1j * g.standard_normal((N, N))) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r)
    ph = diag / np.abs(diag)
    return q * ph[np.newaxis, :]


def sample_haar_batch(N: int, count: int, rng) -> np.ndarray:
    """``count`` independent Haar unitaries as an array of shape (count, N, N)."""
    if N < 1 or count < 0:
        raise LinalgError("need N >= 1 and count >= 0")
    g = _as_generator(rng)
    z = (g.standard_normal((count, N, N)) + 1j * g.standard_normal((count, N, N))) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    return q * (diag / np.abs(diag))[:, np.newaxis, :]


# --------------------------------------------------------------------------
# Hermitian basis


def theta_basis(N: int) -> list[np.ndarray]:
    """Hilbert-Schmidt orthonormal basis of N x N Hermitian matrices (N^2 elements)."""
    if N < 1:
        raise LinalgError("N must be >= 1")
    out = []
    s = 1.0 / math.sqrt(2.0)
    for l in range(N):
        e = np.zeros((N, N), dtype=complex)
        e[l, l] = 1.0
        out.append(e)
    for l in range(N):
        for k in range(l + 1, N):
            a = np.zeros((N, N), dtype=complex)
            a[l, k] = a[k, l] = s
            out.append(a)
            b = np.zeros((N, N), dtype=complex)
            b[l, k] = 1j * s
            b[k, l] = -1j * s
            out.append(b)
    return out


# --------------------------------------------------------------------------
# eigenvalues


@dataclass
class SpectrumResult:
    eigenvalues: np.ndarray  # sorted by decreasing modulus
    diagnostics: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return bool(self.diagnostics.get("trace_ok", True) and self.diagnostics.get("trace2_ok", True))


def _sort_by_modulus(vals: np.ndarray) -> np.ndarray:
    # modulus descending, ties broken by angle for determinism
    order = np.lexsort((np.angle(vals), -np.abs(vals)))
    return vals[order]


def _trace_diagnostics(A: np.ndarray, vals: np.ndarray) -> dict:
    n = A.shape[0]
    norm = max(np.linalg.norm(A, 2), 1e-300)
    e1 = abs(vals.sum() - np.trace(A))
    e2 = abs((vals**2).sum() - np.trace(A @ A))
    return {
        "trace_error": float(e1),
        "trace2_error": float(e2),
        "trace_ok": bool(e1 <= 1e-8 * norm * n),
        "trace2_ok": bool(e2 <= 1e-6 * norm**2 * n),
    }


def hessenberg(A: np.ndarray) -> np.ndarray:
    """Upper Hessenberg form by Householder reflections (similarity transform)."""
    H = np.array(A, dtype=complex)
    n = H.shape[0]
    for k in range(n - 2):
        x = H[k + 1 :, k].copy()
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        v = x
        v[0] += phase * alpha
        v /= np.linalg.norm(v)
        H[k + 1 :, k:] -= 2.0 * np.outer(v, v.conj() @ H[k + 1 :, k:])
        H[:, k + 1 :] -= 2.0 * np.outer(H[:, k + 1 :] @ v, v.conj())
        H[k + 2 :, k] = 0.0
    return H


def _wilkinson(a, b, c, d):
    """Eigenvalue of [[a, b], [c, d]] closest to d."""
    tr = a + d
    det = a * d - b * c
    disc = np.sqrt(tr * tr / 4 - det)
    l1, l2 = tr / 2 + disc, tr / 2 - disc
    return l1 if abs(l1 - d) < abs(l2 - d) else l2


def qr_eigenvalues(A: np.ndarray, max_sweeps_per_eig: int = 60) -> np.ndarray:
    """Eigenvalues by Hessenberg reduction and single-shift complex QR with deflation."""
    H = hessenberg(A)
    n = H.shape[0]
    vals = np.zeros(n, dtype=complex)
    hi = n - 1
    sweeps = 0
    eps = np.finfo(float).eps
    while hi >= 0:
        if hi == 0:
            vals[0] = H[0, 0]
            break
        # find active block [lo, hi]
        lo = hi
        while lo > 0:
            scale = abs(H[lo, lo]) + abs(H[lo - 1, lo - 1])
            if abs(H[lo, lo - 1]) <= eps * (scale if scale else 1.0):
                H[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            vals[hi] = H[hi, hi]
            hi -= 1
            sweeps = 0
            continue
        sweeps += 1
        if sweeps > max_sweeps_per_eig:
            raise ConvergenceError("shifted QR did not converge", partial=vals[hi + 1 :].copy())
        if sweeps % 11 == 0:
            mu = H[hi, hi] + abs(H[hi, hi - 1])  # exceptional shift
        else:
            mu = _wilkinson(H[hi - 1, hi - 1], H[hi - 1, hi], H[hi, hi - 1], H[hi, hi])
        idx = np.arange(lo, hi + 1)
        for k in range(lo, hi + 1):
            H[k, k] -= mu
        rots = []
        for k in range(lo, hi):
            a, b = H[k, k], H[k + 1, k]
            r = math.hypot(abs(a), abs(b))
            if r == 0.0:
                c, s = 1.0, 0.0
            else:
                c, s = a / r, b / r
            G = np.array([[c.conjugate() if isinstance(c, complex) else c, np.conj(s)], [-s, c]])
            H[k : k + 2, k : hi + 1] = G @ H[k : k + 2, k : hi + 1]
            rots.append((k, G))
        for k, G in rots:
            H[lo : min(k + 3, hi + 1), k : k + 2] = H[lo : min(k + 3, hi + 1), k : k + 2] @ G.conj().T
        for k in idx:
            H[k, k] += mu
    return vals


def eigenvalues_general(A: np.ndarray, *, cap: int = EIG_CAP, method: str = "lapack") -> SpectrumResult:
    """All eigenvalues of a square complex matrix, sorted by decreasing modulus."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise LinalgError(f"square matrix required, got shape {A.shape}")
    if A.shape[0] > cap:
        raise LinalgError(f"dimension {A.shape[0]} exceeds eigenvalue cap {cap}")
    if method == "lapack":
        vals = scipy.linalg.eigvals(A.astype(complex), overwrite_a=False, check_finite=True)
    elif method == "qr":
        vals = qr_eigenvalues(A)
    else:
        raise LinalgError(f"unknown method {method!r}")
    vals = _sort_by_modulus(np.asarray(vals, dtype=complex))
    return SpectrumResult(vals, _trace_diagnostics(A.astype(complex), vals))


def hermitian_eigen(A: np.ndarray, vectors: bool = False):
    """Ascending real spectrum of a Hermitian matrix (and eigenvectors if asked)."""
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise LinalgError(f"square matrix required, got shape {A.shape}")
    norm = np.linalg.norm(A)
    if np.linalg.norm(A - A.conj().T) > 1e-8 * max(norm, 1e-300):
        raise LinalgError("matrix is not Hermitian")
    H = (A + A.conj().T) / 2
    if vectors:
        w, v = np.linalg.eigh(H)
        return w, v
    return np.linalg.eigvalsh(H)


# --------------------------------------------------------------------------
# matrix-free singular values


def adjoint_test(apply: Operator, apply_adjoint: Operator, dim: int, rng=0, probes: int = 3, tol: float = 1e-10) -> float:
    """Largest relative mismatch of <Ax, y> and <x, A*y> over random probes."""
    g = _as_generator(rng)
    worst = 0.0
    for _ in range(probes):
        x = g.standard_normal(dim) + 1j * g.standard_normal(dim)
        y = g.standard_normal(dim) + 1j * g.standard_normal(dim)
        ax, aty = apply(x), apply_adjoint(y)
        lhs, rhs = np.vdot(y, ax), np.vdot(aty, x)
        scale = max(np.linalg.norm(ax) * np.linalg.norm(y), np.linalg.norm(aty) * np.linalg.norm(x), 1e-300)
        worst = max(worst, abs(lhs - rhs) / scale)
    if worst > tol:
        raise LinalgError(f"adjoint test failed: relative mismatch {worst:.3e}")
    return worst


def _project_out(X: np.ndarray, Q: np.ndarray | None) -> np.ndarray:
    if Q is None:
        return X
    return X - Q @ (Q.conj().T @ X)


def top_singulars(
    apply: Operator,
    apply_adjoint: Operator,
    dim: int,
    deflate: Sequence[np.ndarray] = (),
    k: int = 1,
    tol: float = 1e-10,
    *,
    block: int | None = None,
    max_iter: int = POWER_MAX_ITER,
    rng=0,
    check_adjoint: bool = True,
) -> np.ndarray:
    """The ``k`` largest singular values of ``A`` on the complement of ``deflate``.

    Block power iteration on ``A*A`` restricted to the orthogonal complement of
    the deflation vectors, with a Rayleigh-Ritz step each sweep.  Stops when
    the top ``k`` Ritz values change by less than ``tol`` (relative).
    """
    if k < 1 or dim < 1:
        raise LinalgError("need k >= 1 and dim >= 1")
    if check_adjoint:
        adjoint_test(apply, apply_adjoint, dim, rng=rng)
    Q = None
    if len(deflate):
        D = np.column_stack([np.asarray(v, dtype=complex).ravel() for v in deflate])
        Q, _ = np.linalg.qr(D)
    avail = dim - (0 if Q is None else Q.shape[1])
    if k > avail:
        raise LinalgError(f"asked for {k} values on a {avail}-dimensional space")
    b = min(avail, block if block is not None else max(2 * k, k + 6))
    g = _as_generator(rng)
    X = g.standard_normal((dim, b)) + 1j * g.standard_normal((dim, b))
    X, _ = np.linalg.qr(_project_out(X, Q))

    def gram(V):
        AV = np.column_stack([apply(V[:, i]) for i in range(V.shape[1])])
        return AV, np.column_stack([apply_adjoint(AV[:, i]) for i in range(V.shape[1])])

    prev = None
    for it in range(1, max_iter + 1):
        AV, Y = gram(X)
        # Ritz values of A*A on span(X): squared singular values of AV
        s = np.linalg.svd(AV, compute_uv=False)
        cur = s[:k]
        Y = _project_out(Y, Q)
        X, _ = np.linalg.qr(Y)
        X = _project_out(X, Q)
        X, _ = np.linalg.qr(X)
        if prev is not None and np.all(np.abs(cur - prev) <= tol * np.maximum(np.abs(cur), 1e-300)):
            return cur
        prev = cur
    raise ConvergenceError(f"power iteration did not converge in {max_iter} iterations", partial=prev)
