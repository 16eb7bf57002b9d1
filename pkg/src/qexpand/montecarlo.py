"""Monte Carlo estimates of Haar trace moments and of Gram traces of the channel.

Trials are grouped in blocks of ``BLOCK`` consecutive indices; block ``b`` is
drawn from stream ``(seed, b)``, so the estimate for given inputs and seed
never depends on how the work is scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .channel import build_ensemble, superoperator
from .linalg import RngStream, hermitian_eigen, sample_haar_batch
from .sd_engine import SDError, SDNumericalError, sd_value
from .word_core import KWord, minimal_writing, parse_kword

BLOCK = 1000


@dataclass(frozen=True)
class MCEstimate:
    mean: complex
    stderr: float
    trials: int
    seed: int

    def contains(self, value: float, slack: float = 0.0, k: float = 4.0) -> bool:
        return abs(self.mean - value) <= slack + k * self.stderr


def _estimate(samples: np.ndarray, seed: int) -> MCEstimate:
    n = samples.size
    mean = complex(np.mean(samples))
    if n < 2:
        return MCEstimate(mean, float("inf"), n, seed)
    dev = samples - mean
    var = float(np.sum(np.abs(dev) ** 2)) / (n - 1)
    return MCEstimate(mean, math.sqrt(var / n), n, seed)


def _batch_product(word, us: np.ndarray, N: int) -> np.ndarray:
    """Stack of products U(s1)^e1 ... U(sk)^ek; ``us`` has shape (d, B, N, N)."""
    B = us.shape[1]
    out = np.broadcast_to(np.eye(N, dtype=complex), (B, N, N)).copy()
    for c in word:
        u = us[abs(c) - 1]
        out = out @ (u if c > 0 else np.conj(np.swapaxes(u, -1, -2)))
    return out


def mc_moment(kw: KWord | str, N: int, trials: int, seed: int, d: int | None = None) -> MCEstimate:
    """Sample mean of prod_l Tr U(S(l)) over fresh Haar tuples.

    Traces whose word is trivial contribute exactly N, so a fully trivial
    k-word gives N^k with zero spread.
    """
    if isinstance(kw, str):
        kw = parse_kword(kw, d if d is not None else 10**9)
    if trials < 2:
        raise SDError("need at least 2 trials")
    if N < 1:
        raise SDError("N must be >= 1")
    reduced = [minimal_writing(t) for t in kw]
    const = N ** sum(1 for t in reduced if not t)
    live = [t for t in reduced if t]
    if not live:
        return MCEstimate(complex(const), 0.0, trials, seed)
    n_sym = max(abs(c) for t in live for c in t)
    samples = np.empty(trials, dtype=complex)
    for b0 in range(0, trials, BLOCK):
        B = min(BLOCK, trials - b0)
        g = RngStream(seed, (b0 // BLOCK,)).generator()
        us = np.stack([sample_haar_batch(N, BLOCK, g)[:B] for _ in range(n_sym)])
        val = np.full(B, const, dtype=complex)
        for t in live:
            val *= np.trace(_batch_product(t, us, N), axis1=-2, axis2=-1)
        samples[b0 : b0 + B] = val
    return _estimate(samples, seed)


# --------------------------------------------------------------------------
# Gram traces


def gram_trace(E, m: int, p: int) -> float:
    """tau(((E*)^m E^m)^p) for one ensemble: sum of p-th powers of the Gram eigenvalues."""
    S = superoperator(E)
    Sm = np.linalg.matrix_power(S, m)
    G = Sm.conj().T @ Sm
    lam = hermitian_eigen(G)
    return float(np.sum(np.clip(lam, 0.0, None) ** p))


def mc_gram_trace(N: int, d: int, m: int, p: int, trials: int, seed: int) -> MCEstimate:
    """Monte Carlo estimate of E tau(((E*)^m E^m)^p); trial t uses ensemble seed stream (seed, t)."""
    if trials < 2:
        raise SDError("need at least 2 trials")
    vals = np.empty(trials)
    for t in range(trials):
        E = build_ensemble(N, d, _trial_seed(seed, t))
        vals[t] = gram_trace(E, m, p)
    return _estimate(vals.astype(complex), seed)


def _trial_seed(seed: int, t: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(t,)).generate_state(1, dtype=np.uint64)[0])


def gram_words(d: int, m: int, p: int):
    """Words W with tau(((E*)^m E^m)^p) = d^(-2mp) sum_W |Tr U(W)|^2.

    Each of the p blocks reads U(a_1)...U(a_m) U(b_1)*...U(b_m)*.
    """
    import itertools

    for tup in itertools.product(range(1, d + 1), repeat=2 * m * p):
        w = []
        for blk in range(p):
            seg = tup[2 * m * blk : 2 * m * (blk + 1)]
            w.extend(seg[:m])
            w.extend(-s for s in seg[m:])
        yield tuple(w)


def gram_expectation(N: int, d: int, m: int, p: int) -> Fraction:
    """Exact E tau(((E*)^m E^m)^p) from the moment engine, summed over all words."""
    total = Fraction(0)
    for w in gram_words(d, m, p):
        mw = minimal_writing(w)
        if not mw:
            total += N * N
            continue
        total += sd_value((mw, tuple(-c for c in reversed(mw))), N, "exact").value
    return total / d ** (2 * m * p)


# --------------------------------------------------------------------------
# harness

DEFAULT_CORPUS = (
    "1 | -1",
    "1 1 | -1 -1",
    "1 2 | -2 -1",
    "1 -2 | 2 -1",
    "1 2 -1 -2",
    "1 2 -1 -2 | 2 1 -2 -1",
    "1 1 1 | -1 -1 -1",
    "1 2 3 | -3 -2 -1",
    "1 -2 3 | -3 2 -1",
    "1 | 1 | -1 -1",
    "1 | -1 | 2 | -2",
    "1 2 | -1 -2",
    "1 1 -2 | 2 -1 -1",
    "1 -2 1 -2",
    "1 1 | -1 | -1",
    "1 2 | -1 | -2",
    "1 2 -1 | 1 -2 -1",
    "2 3 | -3 -2",
    "1 -1",
    "1 -2 -1 2 | 1 -1",
)


@dataclass
class HarnessRow:
    word: str
    N: int
    sd_value: float
    certified_error: float
    mc_mean: float
    mc_imag: float
    mc_stderr: float
    passed: bool

    def to_json(self) -> dict:
        return {
            "word": self.word,
            "N": self.N,
            "sd_value": self.sd_value,
            "certified_error": self.certified_error,
            "mc_mean": self.mc_mean,
            "mc_imag": self.mc_imag,
            "mc_stderr": self.mc_stderr,
            "pass": self.passed,
        }


def sd_vs_mc_harness(corpus=DEFAULT_CORPUS, N: int = 8, trials: int = 10_000, seed: int = 0, k: float = 4.0) -> list[HarnessRow]:
    """Bracket test |sd_value - mc_mean| <= certified_error + k * stderr for every word."""
    rows = []
    for i, text in enumerate(corpus):
        kw = parse_kword(text, 10**9) if isinstance(text, str) else text
        try:
            res = sd_value(kw, N, "exact")
        except SDNumericalError:
            res = sd_value(kw, N, "series", tol=1e-6)
        val = float(res.value)
        est = mc_moment(kw, N, trials, _trial_seed(seed, i))
        ok = abs(est.mean - val) <= res.certified_error + k * est.stderr
        label = text if isinstance(text, str) else repr(text)
        rows.append(HarnessRow(label, N, val, res.certified_error, est.mean.real, est.mean.imag, est.stderr, bool(ok)))
    return rows
