"""Free-group walk counts, Alon-Boppana type lower bounds and closed-form upper bounds.

``N(p, q, d)`` counts tuples ``(s_1, ..., s_2p)`` in ``[d]^(2p)`` for which
``U(s_1) U(s_2)* ... U(s_2p-1) U(s_2p)*`` freely reduces to a word of length
``2q``.  Every two letters the reduced length moves by -2, 0 or +2, which
gives a small exact dynamic program.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import integrate

P_MAX = 64
BRUTE_BUDGET = 10_000_000


class BoundsError(ValueError):
    pass


# --------------------------------------------------------------------------
# walk counts


@dataclass(frozen=True)
class WalkCountTable:
    d: int
    p_max: int
    counts: tuple[tuple[int, ...], ...]  # counts[p][q], q = 0..p

    def N(self, p: int, q: int) -> int:
        if q < 0 or q > p:
            return 0
        return self.counts[p][q]

    def rows(self):
        for p, row in enumerate(self.counts):
            for q, c in enumerate(row):
                yield p, q, c


def walk_counts(p_max: int, d: int) -> WalkCountTable:
    if d < 2:
        raise BoundsError("walk counts need d >= 2")
    if not 0 <= p_max <= P_MAX:
        raise BoundsError(f"p_max must lie in [0, {P_MAX}]")
    rows = [(1,)]
    cur = [1]
    for p in range(1, p_max + 1):
        nxt = [0] * (p + 1)
        for q, c in enumerate(cur):
            if not c:
                continue
            if q == 0:
                nxt[0] += d * c
                nxt[1] += d * (d - 1) * c
            else:
                nxt[q - 1] += c
                nxt[q] += 2 * (d - 1) * c
                nxt[q + 1] += (d - 1) ** 2 * c
        cur = nxt
        rows.append(tuple(nxt))
    return WalkCountTable(d, p_max, tuple(rows))


def free_reduce(letters) -> list[int]:
    """Free (non-cyclic) reduction with a stack."""
    out: list[int] = []
    for c in letters:
        if out and out[-1] == -c:
            out.pop()
        else:
            out.append(c)
    return out


def brute_force_counts(p: int, d: int) -> tuple[int, ...]:
    """Tally reduced lengths over all of ``[d]^(2p)``; index q holds the count for length 2q."""
    if d < 1 or p < 0:
        raise BoundsError("need p >= 0 and d >= 1")
    if d ** (2 * p) > BRUTE_BUDGET:
        raise BoundsError(f"brute force refused: {d ** (2 * p)} tuples exceeds {BRUTE_BUDGET}")
    tally = [0] * (p + 1)
    for tup in itertools.product(range(1, d + 1), repeat=2 * p):
        w = [s if i % 2 == 0 else -s for i, s in enumerate(tup)]
        tally[len(free_reduce(w)) // 2] += 1
    return tuple(tally)


def reduced_word_count(p_prime: int, d: int) -> int:
    """Number of reduced alternating words of length 2p': d (d-1)^(2p'-1)."""
    if p_prime < 1:
        raise BoundsError("p' must be >= 1")
    return d * (d - 1) ** (2 * p_prime - 1)


def walk_upper_bound_check(p: int, p_prime: int, d: int, table: WalkCountTable | None = None) -> bool:
    """Whether N(p, p', d) <= 2^(2p) (d-1)^(p+p')."""
    if table is None or table.d != d or table.p_max < p:
        table = walk_counts(p, d)
    return table.N(p, p_prime) <= 2 ** (2 * p) * (d - 1) ** (p + p_prime)


# --------------------------------------------------------------------------
# reports


@dataclass
class BoundReport:
    name: str
    inputs: dict
    value: float
    formula: str
    flags: list[str] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "inputs": dict(self.inputs),
            "value": self.value,
            "formula": self.formula,
            "flags": list(self.flags),
            **self.extra,
        }


def sigma_d(d: int) -> float:
    return 2.0 * math.sqrt(d - 1) / d


def rho_d(d: int) -> float:
    return 1.0 / math.sqrt(d)


# --------------------------------------------------------------------------
# lower bounds


def ab_lower_s2(N: int, d: int, p_max: int = 32) -> BoundReport:
    """Lower bound on s2(E) valid for every tuple of unitaries.

    From ``1 + N^2 s2^(2p) >= tau((E*E)^p) >= N(p,0,d) N^2 / d^(2p)`` one gets
    ``s2 >= (N(p,0,d)/d^(2p) - 1/N^2)^(1/(2p))`` for every p; the best p is kept.
    """
    if d < 2:
        raise BoundsError("need d >= 2")
    if N < 1 or p_max < 1:
        raise BoundsError("need N >= 1 and p_max >= 1")
    table = walk_counts(p_max, d)
    best, best_p = 0.0, 0
    inv_n2 = Fraction(1, N * N)
    for p in range(1, p_max + 1):
        base = Fraction(table.N(p, 0), d ** (2 * p)) - inv_n2
        if base <= 0:
            continue
        val = math.exp(math.log(base.numerator) / (2 * p) - math.log(base.denominator) / (2 * p))
        if val > best:
            best, best_p = val, p
    return BoundReport(
        "ab_lower_s2",
        {"N": N, "d": d, "p_max": p_max},
        best,
        "max_p (N(p,0,d)/d^(2p) - 1/N^2)^(1/(2p)) <= s2(E)",
        extra={"p": best_p},
    )


def alonbop_power(N: int, d: int) -> int:
    """Largest m with d^(4m) <= N, i.e. floor(ln N / (4 ln d)) in exact arithmetic."""
    m = 0
    while d ** (4 * (m + 1)) <= N:
        m += 1
    return m


def ab_lower_power(N: int, d: int) -> BoundReport:
    """``rho_d exp(-1/(2N))`` as a lower bound on ``s2(E^m)^(1/m)``, m = floor(ln N/(4 ln d))."""
    flags = []
    if N < 2:
        flags.append("N < 2: outside the range of the bound")
    if d < 2 or d**4 > N:
        flags.append("d outside [2, N^(1/4)]: bound not certified")
    m = alonbop_power(N, d) if d >= 2 else 0
    if m < 1:
        flags.append("m = 0")
    return BoundReport(
        "ab_lower_power",
        {"N": N, "d": d},
        rho_d(d) * math.exp(-1.0 / (2 * N)) if d >= 1 else 0.0,
        "rho_d exp(-1/(2N)) <= s2(E^m)^(1/m), m = floor(ln N / (4 ln d))",
        flags,
        {"m": m},
    )


# --------------------------------------------------------------------------
# upper-bound formulas


def markov_p(N: int) -> int:
    """floor(N^(1/12) / (4 sqrt 2)), computed exactly: largest p with 2^30 p^12 <= N."""
    p = 0
    while 2**30 * (p + 1) ** 12 <= N:
        p += 1
    return p


DEFAULT_C = 1.0  # not given numerically by the theory; an explicit modelling choice


def markov_upper(kind: str, N: int, d: int, eps: float | None = None, c: float | None = None, m: int | None = None) -> BoundReport:
    """Closed-form tail and expectation bounds at finite N.

    ``s2_tail``: 4 p N^2 / (1+eps)^(2p) with p = floor(N^(1/12)/(4 sqrt 2)).
    ``lambda2_tail``: exp(-ln(1+eps) N^(1/12) / (8 sqrt 2)).
    ``power_tail``: sqrt(2)(m+1)/m N^(25/12) exp([2 ln(m+1)/m - ln(1+eps)] N^(1/12)/(4 sqrt 2)).
    ``expectation_s2``: sigma_d (1 + c ln N / N^(1/12)).
    ``expectation_lambda2``: rho_d (1 + c ln N / N^(1/12)).
    """
    inputs = {"N": N, "d": d}
    flags = []
    n12 = N ** (1.0 / 12.0)
    if kind in ("s2_tail", "lambda2_tail", "power_tail"):
        if eps is None or eps <= 0:
            raise BoundsError(f"{kind} needs eps > 0")
        inputs["eps"] = eps
    if kind == "s2_tail":
        p = markov_p(N)
        inputs["p"] = p
        if p == 0:
            flags.append("p = 0: N below 2^30, bound degenerate")
        value = 4 * p * float(N) ** 2 / (1 + eps) ** (2 * p)
        formula = "4 p N^2 / (1+eps)^(2p), p = floor(N^(1/12)/(4 sqrt 2))"
    elif kind == "lambda2_tail":
        value = math.exp(-math.log1p(eps) * n12 / (8 * math.sqrt(2)))
        formula = "exp(-ln(1+eps) N^(1/12) / (8 sqrt 2))"
    elif kind == "power_tail":
        if m is None or m < 1:
            raise BoundsError("power_tail needs m >= 1")
        inputs["m"] = m
        if m > markov_p(N) // 2:
            flags.append("m above floor(N^(1/12)/(4 sqrt 2))/2")
        expo = (2 * math.log(m + 1) / m - math.log1p(eps)) * n12 / (4 * math.sqrt(2))
        value = math.sqrt(2) * (m + 1) / m * float(N) ** (25.0 / 12.0) * math.exp(expo)
        formula = "sqrt(2)(m+1)/m N^(25/12) exp([2 ln(m+1)/m - ln(1+eps)] N^(1/12)/(4 sqrt 2))"
    elif kind in ("expectation_s2", "expectation_lambda2"):
        if c is None:
            c = DEFAULT_C
            flags.append(f"c = {DEFAULT_C} is a default, not a derived constant")
        inputs["c"] = c
        base = sigma_d(d) if kind == "expectation_s2" else rho_d(d)
        value = base * (1 + c * math.log(N) / n12)
        formula = ("sigma_d" if kind == "expectation_s2" else "rho_d") + " (1 + c ln N / N^(1/12))"
        if kind == "expectation_s2" and d == 2:
            flags.append("d=2: sigma_2 = 1")
    else:
        raise BoundsError(f"unknown bound kind {kind!r}")
    return BoundReport(kind, inputs, value, formula, flags)


# --------------------------------------------------------------------------
# Kesten-McKay law


def km_density(x, q: float):
    """Kesten-McKay density of the q-regular tree, (q/2pi) sqrt(4(q-1)-x^2) / (q^2-x^2)."""
    if q < 2:
        raise BoundsError("q must be >= 2")
    x = np.asarray(x, dtype=float)
    r2 = 4.0 * (q - 1)
    inside = x * x <= r2
    val = np.where(inside, q / (2 * math.pi) * np.sqrt(np.clip(r2 - x * x, 0.0, None)) / (q * q - x * x), 0.0)
    return float(val) if val.ndim == 0 else val


def km_channel_density(x, d: int):
    """Limit density for the Hermitized channel spectrum: 2d * km_density(2d x, 2d)."""
    return 2 * d * km_density(2 * d * np.asarray(x, dtype=float), 2 * d) if np.ndim(x) else 2 * d * km_density(2 * d * float(x), 2 * d)


def _km_theta_integrand(theta: float, q: float) -> float:
    # x = 2 sqrt(q-1) sin(theta) removes the square-root endpoint singularity
    r = 2.0 * math.sqrt(q - 1)
    x = r * math.sin(theta)
    c = r * math.cos(theta)
    return q / (2 * math.pi) * c * c / (q * q - x * x)


def km_cdf(x, q: float):
    """Cumulative distribution of the Kesten-McKay law by adaptive quadrature."""
    r = 2.0 * math.sqrt(q - 1)

    def one(t: float) -> float:
        if t <= -r:
            return 0.0
        if t >= r:
            return 1.0
        hi = math.asin(t / r)
        val, _ = integrate.quad(_km_theta_integrand, -math.pi / 2, hi, args=(q,), epsabs=1e-12, epsrel=1e-12)
        return val

    if np.ndim(x) == 0:
        return one(float(x))
    return np.array([one(float(t)) for t in np.asarray(x, dtype=float)])


def km_channel_cdf(x, d: int):
    return km_cdf(2 * d * np.asarray(x, dtype=float), 2 * d)


def km_mass(q: float) -> float:
    r = 2.0 * math.sqrt(q - 1)
    val, _ = integrate.quad(lambda t: km_density(t, q), -r, r, epsabs=1e-12, epsrel=1e-12, limit=200)
    return val
