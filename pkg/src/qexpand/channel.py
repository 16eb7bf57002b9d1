"""The random unitary channel E(M) = (1/d) sum_s U(s)* M U(s) and its spectra.

Vectorization is column-stacking, ``vec(A M B) = (B^T kron A) vec(M)``, so the
superoperator of ``M -> U* M U`` is ``U^T kron U*`` (``U*`` the adjoint).  Singular and
eigenvalue spectra do not depend on this choice.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .linalg import (
    EIG_CAP,
    LinalgError,
    RngStream,
    SpectrumResult,
    eigenvalues_general,
    hermitian_eigen,
    sample_haar,
    top_singulars,
)


def sigma_d(d: int) -> float:
    """Optimal asymptotic second singular value 2 sqrt(d-1) / d."""
    return 2.0 * math.sqrt(d - 1) / d


def rho_d(d: int) -> float:
    """Optimal asymptotic second eigenvalue modulus 1 / sqrt(d)."""
    return 1.0 / math.sqrt(d)


def hermitized_edge(d: int) -> float:
    """Spectral edge of the Hermitized channel, 2 sqrt(2d-1) / (2d)."""
    return 2.0 * math.sqrt(2 * d - 1) / (2 * d)


@dataclass(frozen=True)
class ChannelEnsemble:
    N: int
    d: int
    seed: int
    unitaries: tuple[np.ndarray, ...]

    @property
    def dim(self) -> int:
        return self.N * self.N


def build_ensemble(N: int, d: int, seed: int) -> ChannelEnsemble:
    """``d`` iid Haar unitaries; unitary ``s`` is drawn from stream ``(seed, s)``."""
    if N < 1 or d < 1:
        raise LinalgError("need N >= 1 and d >= 1")
    base = RngStream(int(seed))
    us = tuple(sample_haar(N, base.child(s)) for s in range(d))
    return ChannelEnsemble(N, d, int(seed), us)


def from_unitaries(unitaries, seed: int = -1) -> ChannelEnsemble:
    us = tuple(np.asarray(u, dtype=complex) for u in unitaries)
    if not us:
        raise LinalgError("need at least one unitary")
    N = us[0].shape[0]
    if any(u.shape != (N, N) for u in us):
        raise LinalgError("unitaries must share one square shape")
    return ChannelEnsemble(N, len(us), seed, us)


def _check_shape(E: ChannelEnsemble, M: np.ndarray) -> np.ndarray:
    M = np.asarray(M)
    if M.shape != (E.N, E.N):
        raise LinalgError(f"expected a {E.N}x{E.N} matrix, got shape {M.shape}")
    return M


def apply(E: ChannelEnsemble, M: np.ndarray) -> np.ndarray:
    M = _check_shape(E, M)
    out = np.zeros((E.N, E.N), dtype=complex)
    for u in E.unitaries:
        out += u.conj().T @ M @ u
    return out / E.d


def apply_adjoint(E: ChannelEnsemble, M: np.ndarray) -> np.ndarray:
    M = _check_shape(E, M)
    out = np.zeros((E.N, E.N), dtype=complex)
    for u in E.unitaries:
        out += u @ M @ u.conj().T
    return out / E.d


def vec(M: np.ndarray) -> np.ndarray:
    return np.asarray(M).reshape(-1, order="F")


def unvec(v: np.ndarray, N: int) -> np.ndarray:
    return np.asarray(v).reshape((N, N), order="F")


def superoperator(E: ChannelEnsemble, cap: int = EIG_CAP) -> np.ndarray:
    if E.dim > cap:
        raise LinalgError(f"superoperator dimension {E.dim} exceeds cap {cap}")
    S = np.zeros((E.dim, E.dim), dtype=complex)
    for u in E.unitaries:
        S += np.kron(u.T, u.conj().T)
    return S / E.d


def hermitized(E: ChannelEnsemble, cap: int = EIG_CAP) -> np.ndarray:
    """Superoperator of (E + E*)/2 in the same convention; Hermitian."""
    if E.dim > cap:
        raise LinalgError(f"superoperator dimension {E.dim} exceeds cap {cap}")
    S = np.zeros((E.dim, E.dim), dtype=complex)
    for u in E.unitaries:
        S += np.kron(u.T, u.conj().T) + np.kron(u.conj(), u)
    return S / (2 * E.d)


def _identity_direction(N: int) -> np.ndarray:
    return vec(np.eye(N, dtype=complex)) / math.sqrt(N)


def _power_ops(E: ChannelEnsemble, m: int):
    N = E.N

    def fwd(v):
        M = unvec(v, N)
        for _ in range(m):
            M = apply(E, M)
        return vec(M)

    def adj(v):
        M = unvec(v, N)
        for _ in range(m):
            M = apply_adjoint(E, M)
        return vec(M)

    return fwd, adj


def s2_of_power(E: ChannelEnsemble, m: int, tol: float = 1e-10, **kw) -> float:
    """``s2(E^m)^(1/m)``: top singular value of E^m on trace-zero matrices, m-th root."""
    if m < 1:
        raise LinalgError("m must be >= 1")
    if E.N == 1:
        return 0.0  # the trace-zero space is {0}
    fwd, adj = _power_ops(E, m)
    s = top_singulars(fwd, adj, E.dim, deflate=[_identity_direction(E.N)], k=1, tol=tol, rng=RngStream(E.seed, (10**6, m)), **kw)
    return float(s[0]) ** (1.0 / m)


def second_singular(E: ChannelEnsemble, tol: float = 1e-10, **kw) -> float:
    """Largest singular value of E restricted to ``{M : Tr M = 0}``."""
    if E.d == 1 and E.N > 1:
        return 1.0  # unitary conjugation is an isometry
    return s2_of_power(E, 1, tol=tol, **kw)


def eigen_power(N: int, d: int) -> int | None:
    """The power ``floor(2 ln N / ln d)`` used for second-eigenvalue estimates; None for d = 1."""
    if d < 2:
        return None
    return max(1, int(math.floor(2 * math.log(N) / math.log(d))))


@dataclass
class SpectralReport:
    N: int
    d: int
    seed: int
    s2: float
    m: int | None
    s2_power: float | None
    lambda2_estimate: float | None
    runtime_ms: float
    flags: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "N": self.N,
            "d": self.d,
            "seed": self.seed,
            "s2": self.s2,
            "m": self.m,
            "s2_power": self.s2_power,
            "lambda2_estimate": self.lambda2_estimate,
            "runtime_ms": self.runtime_ms,
            "flags": list(self.flags),
        }


def spectral_report(E: ChannelEnsemble, tol: float = 1e-10, with_power: bool = True) -> SpectralReport:
    t0 = time.perf_counter()
    s2 = second_singular(E, tol=tol)
    flags = []
    m = eigen_power(E.N, E.d)
    sp = None
    if m is None:
        flags.append("d=1: power m undefined")
    elif with_power:
        sp = s2_of_power(E, m, tol=tol)
    if E.d == 2:
        flags.append("d=2: sigma_2 = 1, expander comparison skipped")
    ms = (time.perf_counter() - t0) * 1000.0
    return SpectralReport(E.N, E.d, E.seed, s2, m, sp, sp, ms, flags)


def eigen_cloud(E: ChannelEnsemble, cap: int = EIG_CAP, hermitian: bool = False) -> SpectrumResult:
    """Eigenvalues of the superoperator of E (or of its Hermitized version)."""
    if hermitian:
        vals = hermitian_eigen(hermitized(E, cap))[::-1].astype(complex)
        return SpectrumResult(vals, {"hermitian": True})
    return eigenvalues_general(superoperator(E, cap), cap=cap)


@dataclass
class ESD:
    values: np.ndarray  # sorted, trivial eigenvalue removed
    edges: np.ndarray
    mass: np.ndarray  # per-bin probability, sums to 1


def remove_trivial(vals: np.ndarray) -> np.ndarray:
    """Drop the single eigenvalue closest to 1."""
    vals = np.asarray(vals)
    if vals.size == 0:
        return vals
    i = int(np.argmin(np.abs(vals - 1.0)))
    return np.delete(vals, i)


def esd(spectrum, bins: int | np.ndarray = 50) -> ESD:
    """Empirical distribution of a real spectrum on the complement of the fixed point."""
    vals = spectrum.eigenvalues if isinstance(spectrum, SpectrumResult) else np.asarray(spectrum)
    rest = np.sort(np.real(remove_trivial(vals)))
    if rest.size == 0:
        return ESD(rest, np.array([0.0, 1.0]), np.array([0.0]))
    counts, edges = np.histogram(rest, bins=bins)
    return ESD(rest, edges, counts / rest.size)


def kolmogorov_distance(sorted_values: np.ndarray, cdf) -> float:
    """sup |F_n - F| for a sorted sample and a vectorized CDF."""
    x = np.asarray(sorted_values, dtype=float)
    n = x.size
    F = cdf(x)
    hi = np.arange(1, n + 1) / n
    lo = np.arange(0, n) / n
    return float(max(np.max(np.abs(hi - F)), np.max(np.abs(F - lo))))
