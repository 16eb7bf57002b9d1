"""Free-group words: letters, trace words, k-words and their reductions.

A letter is stored as a nonzero signed integer: ``+s`` stands for ``U(s)`` and
``-s`` for ``U(s)*``.  A trace word is a tuple of such integers and a k-word is
a tuple of trace words.  The :class:`Letter` named tuple is only a convenience
for building and inspecting words.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Sequence

TraceWord = tuple[int, ...]
KWord = tuple[TraceWord, ...]

ENUMERATION_BUDGET = 10_000_000


class WordError(ValueError):
    """Raised for malformed words or grammar errors."""


class Letter(NamedTuple):
    symbol: int
    sign: int  # +1 or -1

    @property
    def code(self) -> int:
        return self.symbol * self.sign

    @classmethod
    def from_code(cls, code: int) -> "Letter":
        return cls(abs(code), 1 if code > 0 else -1)


def word(pairs: Sequence[tuple[int, int | str]]) -> TraceWord:
    """Build a trace word from ``(symbol, sign)`` pairs; sign may be ±1 or '+'/'-'."""
    out = []
    for symbol, sign in pairs:
        if symbol < 1:
            raise WordError(f"symbol must be >= 1, got {symbol}")
        if sign in ("+", 1):
            out.append(symbol)
        elif sign in ("-", "−", -1):
            out.append(-symbol)
        else:
            raise WordError(f"bad sign {sign!r}")
    return tuple(out)


def as_pairs(w: TraceWord) -> list[tuple[int, str]]:
    return [(abs(c), "+" if c > 0 else "-") for c in w]


# --------------------------------------------------------------------------
# grammar


def parse_kword(text: str, d: int) -> KWord:
    """Parse ``TRACE ('|' TRACE)*`` where a trace is whitespace-separated ±integers."""
    if d < 1:
        raise WordError("alphabet size d must be >= 1")
    traces: list[TraceWord] = []
    current: list[int] = []
    tokens = text.replace("|", " | ").split()
    if not tokens:
        raise WordError("empty word text")
    for pos, tok in enumerate(tokens, start=1):
        if tok == "|":
            if not current:
                raise WordError(f"empty trace before token {pos} ('|')")
            traces.append(tuple(current))
            current = []
            continue
        try:
            value = int(tok)
        except ValueError:
            raise WordError(f"malformed token {tok!r} at position {pos}") from None
        if value == 0:
            raise WordError(f"integer 0 at position {pos} is not a letter")
        if abs(value) > d:
            raise WordError(f"symbol {abs(value)} at position {pos} exceeds d={d}")
        current.append(value)
    if not current:
        raise WordError(f"empty trace at end of input (after token {len(tokens)})")
    traces.append(tuple(current))
    return tuple(traces)


def format_kword(kw: KWord) -> str:
    return " | ".join(" ".join(str(c) for c in t) for t in kw)


# --------------------------------------------------------------------------
# reduction


def cyclic_reduction(
    w: Sequence[int], tags: Sequence[int] | None = None
) -> tuple[list[int], list[tuple[int, int]]]:
    """Cyclically reduce ``w``, returning surviving indices and cancelled index pairs.

    The cancellation order is fixed: the wraparound pair (last, first) is
    cancelled whenever possible, otherwise the leftmost adjacent pair.  With
    ``tags``, cancellable pairs carrying the same nonzero tag are taken first
    (same order among them).  Survivors keep their original order, so the
    result is a sub-sequence of ``w``.
    """
    alive = list(range(len(w)))
    pairs: list[tuple[int, int]] = []
    while len(alive) >= 2:
        n = len(alive)
        cands = [n - 1] if w[alive[-1]] == -w[alive[0]] else []
        cands += [t for t in range(n - 1) if w[alive[t]] == -w[alive[t + 1]]]
        if not cands:
            break
        pick = cands[0]
        if tags is not None:
            for t in cands:
                a, b = alive[t], alive[(t + 1) % n]
                if tags[a] and tags[a] == tags[b]:
                    pick = t
                    break
        if pick == n - 1:
            pairs.append((alive[-1], alive[0]))
            alive = alive[1:-1]
        else:
            pairs.append((alive[pick], alive[pick + 1]))
            del alive[pick : pick + 2]
    return alive, pairs


def minimal_writing(w: Sequence[int]) -> TraceWord:
    """The minimal writing of ``w``: the cyclically reduced sub-sequence."""
    alive, _ = cyclic_reduction(w)
    return tuple(w[i] for i in alive)


def is_minimal(w: Sequence[int]) -> bool:
    n = len(w)
    return all(w[i] != -w[(i + 1) % n] for i in range(n)) if n > 1 else True


def is_trivial(w: Sequence[int]) -> bool:
    return len(minimal_writing(w)) == 0


def _letter_key(c: int) -> tuple[int, int]:
    return (abs(c), 0 if c > 0 else 1)


def canonical_rotation(w: Sequence[int]) -> TraceWord:
    """Lexicographically smallest rotation (symbol first, then + before -)."""
    w = tuple(w)
    if not w:
        return w
    rots = [w[i:] + w[:i] for i in range(len(w))]
    return min(rots, key=lambda r: [_letter_key(c) for c in r])


def equivalent(w1: Sequence[int], w2: Sequence[int]) -> bool:
    a, b = minimal_writing(w1), minimal_writing(w2)
    if len(a) != len(b):
        return False
    if not a:
        return True
    doubled = a + a
    return any(doubled[i : i + len(b)] == b for i in range(len(a)))


def inverse(w: Sequence[int]) -> TraceWord:
    return tuple(-c for c in reversed(w))


def conjugate_pair(w: Sequence[int]) -> KWord:
    """The 2-word (S, S^-1) whose expectation is E|Tr U(S)|^2."""
    return (tuple(w), inverse(w))


def is_minimal_kword(kw: KWord) -> bool:
    return all(len(t) > 0 and is_minimal(t) for t in kw)


def total_length(kw: KWord) -> int:
    return sum(len(t) for t in kw)


def symbols(kw: KWord) -> set[int]:
    return {abs(c) for t in kw for c in t}


# --------------------------------------------------------------------------
# canonical forms


def normalize_labels(kw: KWord) -> tuple[KWord, dict[int, int]]:
    """Relabel symbols by first appearance and flip each so it first appears as +.

    Trace order and rotations are kept, so this is the symmetry that the path
    algorithm respects.  Returns the new word and the map old symbol -> signed
    new symbol (negative when the symbol was adjointed).
    """
    mapping: dict[int, int] = {}
    out = []
    for t in kw:
        nt = []
        for c in t:
            s = abs(c)
            if s not in mapping:
                mapping[s] = (len(mapping) + 1) * (1 if c > 0 else -1)
            m = mapping[s]
            nt.append(m if c > 0 else -m)
        out.append(tuple(nt))
    return tuple(out), mapping


@dataclass(frozen=True)
class CanonicalForm:
    kword: KWord
    relabel_map: dict[int, int]
    adjointed: dict[int, bool]


def _encode(t: TraceWord, mapping: dict[int, int]) -> tuple[tuple[int, ...], dict[int, int]]:
    mapping = dict(mapping)
    codes = []
    for c in t:
        s = abs(c)
        if s not in mapping:
            mapping[s] = (len(mapping) + 1) * (1 if c > 0 else -1)
        m = mapping[s]
        v = m if c > 0 else -m
        codes.append(2 * (abs(v) - 1) + (0 if v > 0 else 1))
    return tuple(codes), mapping


def canonicalize(kw: KWord) -> CanonicalForm:
    """Canonical representative under relabeling, adjoints, trace order and rotations.

    Traces are chosen greedily, shortest first, each time keeping every
    (trace, rotation) choice that yields the smallest encoding so far; ties are
    carried forward so the result does not depend on the input presentation.
    """
    beam: list[tuple[tuple[int, ...], dict[int, int], tuple[tuple[int, ...], ...]]] = [
        (tuple(range(len(kw))), {}, ())
    ]
    for _ in range(len(kw)):
        best_key = None
        nxt: dict[tuple, tuple] = {}
        for remaining, mapping, enc in beam:
            for pos, ti in enumerate(remaining):
                t = kw[ti]
                rest = remaining[:pos] + remaining[pos + 1 :]
                for r in range(len(t)):
                    codes, new_map = _encode(t[r:] + t[:r], mapping)
                    key = (len(codes), codes)
                    if best_key is None or key < best_key:
                        best_key = key
                        nxt = {}
                    if key == best_key:
                        ident = (rest, tuple(sorted(new_map.items())))
                        nxt.setdefault(ident, (rest, new_map, enc + (codes,)))
        beam = list(nxt.values())
    _, mapping, enc = beam[0]
    out = tuple(tuple((c // 2 + 1) * (1 if c % 2 == 0 else -1) for c in codes) for codes in enc)
    relabel = {s: abs(v) for s, v in mapping.items()}
    adjointed = {s: v < 0 for s, v in mapping.items()}
    return CanonicalForm(out, relabel, adjointed)


def canonical_key(kw: KWord) -> KWord:
    return canonicalize(kw).kword


# --------------------------------------------------------------------------
# enumeration


def _check_budget(estimate: int) -> None:
    if estimate > ENUMERATION_BUDGET:
        raise WordError(f"enumeration refused: about {estimate} candidates exceeds budget {ENUMERATION_BUDGET}")


def enumerate_minimal(m: int, d: int, shape: str = "all") -> Iterator[TraceWord]:
    """Yield the minimal (cyclically reduced) words of a given shape.

    ``all``: every 1-word of length ``m``.  ``alternating``: words
    ``((s1,+),(s2,-),...,(s_2m,-))`` of length ``2m``.  ``symmetric``: words
    ``((s_2m,+),...,(s_{m+1},+),(s_m,-),...,(s_1,-))`` of length ``2m``.
    """
    if m < 0 or d < 1:
        raise WordError("need m >= 0 and d >= 1")
    if shape == "all":
        _check_budget((2 * d) ** m)
        for combo in itertools.product(range(1, d + 1), repeat=m):
            for signs in itertools.product((1, -1), repeat=m):
                w = tuple(s * e for s, e in zip(combo, signs))
                if is_minimal(w):
                    yield w
    elif shape == "alternating":
        _check_budget(d ** (2 * m))
        for combo in itertools.product(range(1, d + 1), repeat=2 * m):
            w = tuple(s if i % 2 == 0 else -s for i, s in enumerate(combo))
            if is_minimal(w):
                yield w
    elif shape == "symmetric":
        _check_budget(d ** (2 * m))
        for combo in itertools.product(range(1, d + 1), repeat=2 * m):
            # combo = (s_1, ..., s_2m)
            w = tuple(combo[j - 1] for j in range(2 * m, m, -1)) + tuple(-combo[j - 1] for j in range(m, 0, -1))
            if is_minimal(w):
                yield w
    else:
        raise WordError(f"unknown shape {shape!r}")


def count_estimate(m: int, d: int, shape: str = "all") -> int:
    return (2 * d) ** m if shape == "all" else d ** (2 * m)


def word_product(w: Sequence[int], unitaries) -> "object":
    """Matrix product U(s1)^e1 ... U(sk)^ek for a stack of unitaries (index s-1)."""
    import numpy as np

    n = unitaries[0].shape[0]
    out = np.eye(n, dtype=complex)
    for c in w:
        u = unitaries[abs(c) - 1]
        out = out @ (u if c > 0 else u.conj().T)
    return out

