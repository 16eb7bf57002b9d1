"""Schwinger–Dyson recursion for Haar moments of products of traces.

For a minimal k-word ``S = (S(1), ..., S(k))`` write ``E'(S)`` for the
expectation of ``Tr U(S(1)) ... Tr U(S(k))`` with iid Haar unitaries.  Taking
the first letter of the first trace as pivot, the Schwinger–Dyson identity
expresses ``E'(S)`` as a signed combination of ``E'`` of "children", each
carrying a factor ``N^(t-1)`` where ``t`` counts traces that became trivial.

Two evaluation routes are offered:

* ``exact``: close the recursion over canonical states and solve the resulting
  linear system in exact rationals, level by level in the number of letters.
* ``series``: sum the contributions of all finishing paths up to a depth and
  attach the certified remainder bound ``(m-1)^n N^(m-n)``.

Paths can also be expanded explicitly, with tracking maps that follow every
original letter; this is what the rung-cancellation classification reads.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Hashable, Iterable, Sequence

from .word_core import (
    KWord,
    TraceWord,
    canonical_key,
    conjugate_pair,
    cyclic_reduction,
    is_minimal_kword,
    minimal_writing,
    total_length,
)

PATH_BUDGET = 10_000_000
STATE_BUDGET = 100_000
MAX_SERIES_DEPTH = 2000

Pos = tuple[int, int]


class SDError(ValueError):
    """Invalid input to the engine (bad word, violated precondition)."""


class SDNumericalError(RuntimeError):
    """Budget exhausted, singular system or uncertifiable series."""


@dataclass(frozen=True)
class Move:
    ell: int  # 1-based trace index
    j: int  # 1-based position inside that trace
    eps: int  # +1: same letter as the pivot, -1: inverse letter

    @property
    def kind(self) -> str:
        if self.ell == 1:
            return "SD1" if self.eps > 0 else "SD2"
        return "SD3" if self.eps > 0 else "SD4"


Pattern = tuple[Move, ...]


# --------------------------------------------------------------------------
# one step


def _moves(traces: Sequence[Sequence[int]]) -> list[Move]:
    a = traces[0][0]
    out = []
    for ell, t in enumerate(traces, start=1):
        for j, c in enumerate(t, start=1):
            if ell == 1 and j == 1:
                continue
            if c == a:
                out.append(Move(ell, j, 1))
            elif c == -a:
                out.append(Move(ell, j, -1))
    return out


def _split(traces, ids, mv: Move):
    """Pre-reduction pieces of the child for move ``mv``: (letters, ids) lists and sign."""
    t1, i1 = traces[0], ids[0]
    j = mv.j
    if mv.ell == 1:
        cut = j - 1 if mv.eps > 0 else j
        pieces = [(t1[:cut], i1[:cut]), (t1[cut:], i1[cut:])]
        pieces += list(zip(traces[1:], ids[1:]))
    else:
        tl, il = traces[mv.ell - 1], ids[mv.ell - 1]
        cut = j - 1 if mv.eps > 0 else j
        merged = (t1 + tl[cut:] + tl[:cut], i1 + il[cut:] + il[:cut])
        others = [(traces[q], ids[q]) for q in range(1, len(traces)) if q != mv.ell - 1]
        pieces = [merged] + others
    return pieces, (-1 if mv.eps > 0 else 1)


def _reduce_pieces(pieces, tag_of=None):
    """Reduce each piece; return surviving (letters, ids) traces, trivial count, cancelled id pairs.

    ``tag_of`` maps an id to its mirror tag (0 when none); tagged mirror pairs
    are cancelled first.
    """
    out_t, out_i, pairs = [], [], []
    trivial = 0
    for letters, pid in pieces:
        tags = None if tag_of is None else [tag_of(x) for x in pid]
        alive, cp = cyclic_reduction(letters, tags)
        pairs.extend((pid[a], pid[b]) for a, b in cp)
        if alive:
            out_t.append(tuple(letters[a] for a in alive))
            out_i.append(tuple(pid[a] for a in alive))
        else:
            trivial += 1
    return tuple(out_t), tuple(out_i), trivial, pairs


@dataclass(frozen=True)
class Child:
    kword: KWord
    sign: int
    trivial_count: int
    move: Move
    f: dict[Pos, Pos]
    f_rs: dict[Pos, Pos]


def sd_children(kw: KWord) -> list[Child]:
    """All nonzero terms of the SD identity with pivot the first letter of ``kw``.

    ``f`` maps each parent position to its position in the un-reduced child and
    ``f_rs`` to its position after reduction, or ``(0, 0)`` if it cancelled.
    """
    if not kw:
        raise SDError("empty k-word has no SD children")
    if not is_minimal_kword(kw):
        raise SDError("sd_children requires a minimal k-word")
    ids = tuple(tuple((l, j) for j in range(1, len(t) + 1)) for l, t in enumerate(kw, start=1))
    out = []
    for mv in _moves(kw):
        pieces, sign = _split(kw, ids, mv)
        f = {pid: (l, j) for l, (_, pi) in enumerate(pieces, start=1) for j, pid in enumerate(pi, start=1)}
        traces, tids, trivial, _ = _reduce_pieces(pieces)
        f_rs = {p: (0, 0) for p in f}
        for l, ti in enumerate(tids, start=1):
            for j, pid in enumerate(ti, start=1):
                f_rs[pid] = (l, j)
        out.append(Child(traces, sign, trivial, mv, f, f_rs))
    return out


def _children_plain(kw: KWord) -> list[tuple[KWord, int, int]]:
    """Fast variant of :func:`sd_children` without tracking: (child, sign, trivial)."""
    out = []
    ids = tuple(tuple(range(len(t))) for t in kw)
    for mv in _moves(kw):
        pieces, sign = _split(kw, ids, mv)
        traces = []
        trivial = 0
        for letters, _ in pieces:
            m = minimal_writing(letters)
            if m:
                traces.append(m)
            else:
                trivial += 1
        out.append((tuple(traces), sign, trivial))
    return out


# --------------------------------------------------------------------------
# explicit paths


@dataclass(frozen=True)
class Step:
    move: Move
    sign: int
    trivial_count: int
    pivot: Hashable
    partner: Hashable
    f: dict[Hashable, Pos]  # original letter -> position before reduction
    f_rs: dict[Hashable, Pos]  # original letter -> position after reduction, (0,0) if cancelled
    cancelled: tuple[tuple[Hashable, Hashable], ...]


@dataclass(frozen=True)
class PathState:
    kword: KWord
    sign: int
    power: int
    depth: int
    tracking: dict[Hashable, Pos]
    history: tuple[Step, ...]
    mirror_length: int | None = None  # L when the root is a conjugate pair (S, S^-1)

    @property
    def pattern(self) -> Pattern:
        return tuple(s.move for s in self.history)

    @property
    def moved(self) -> frozenset:
        """Original letters that have been a pivot or a partner."""
        return frozenset(x for s in self.history for x in (s.pivot, s.partner))

    def mean(self, N: int) -> Fraction:
        if self.kword:
            raise SDError("mean of an unfinished path needs E'(kword)")
        return self.sign * Fraction(N) ** (self.power - self.depth)


def initial_state(kw: KWord) -> PathState:
    if not kw or not is_minimal_kword(kw):
        raise SDError("path expansion needs a nonempty minimal k-word")
    tracking = {(l, j): (l, j) for l, t in enumerate(kw, start=1) for j in range(1, len(t) + 1)}
    return PathState(kw, 1, 0, 0, tracking, (), conjugate_length(kw))


def _ids_of(state: PathState) -> tuple[tuple[Hashable, ...], ...]:
    inv: dict[Pos, Hashable] = {p: o for o, p in state.tracking.items() if p != (0, 0)}
    return tuple(tuple(inv[(l, j)] for j in range(1, len(t) + 1)) for l, t in enumerate(state.kword, start=1))


def advance(state: PathState, mv: Move) -> PathState:
    """Apply one move to a path state."""
    kw = state.kword
    ids = _ids_of(state)
    pivot = ids[0][0]
    partner = ids[mv.ell - 1][mv.j - 1]
    pieces, sign = _split(kw, ids, mv)
    f = {pid: (l, j) for l, (_, pi) in enumerate(pieces, start=1) for j, pid in enumerate(pi, start=1)}
    L = state.mirror_length
    tag_of = None
    if L is not None:
        touched = {_matrix_of(x, L) for st in state.history for x in (st.pivot, st.partner)}
        touched |= {_matrix_of(pivot, L), _matrix_of(partner, L)}

        def tag_of(x):
            i = _matrix_of(x, L)
            return 0 if i in touched else i

    traces, tids, trivial, pairs = _reduce_pieces(pieces, tag_of)
    f_rs = {o: (0, 0) for o in state.tracking}
    for l, ti in enumerate(tids, start=1):
        for j, pid in enumerate(ti, start=1):
            f_rs[pid] = (l, j)
    full_f = {o: f.get(o, (0, 0)) for o in state.tracking}
    step = Step(mv, sign, trivial, pivot, partner, full_f, f_rs, tuple(pairs))
    return PathState(
        traces, state.sign * sign, state.power + trivial, state.depth + 1, f_rs, state.history + (step,), L
    )


@dataclass
class FinishingPath:
    pattern: Pattern
    sign: int
    power: int
    depth: int
    rung: frozenset[int] | None
    state: PathState

    def mean(self, N: int) -> Fraction:
        return self.sign * Fraction(N) ** (self.power - self.depth)


@dataclass
class PathLedger:
    root: KWord
    max_depth: int
    finishing: dict[int, list[FinishingPath]] = field(default_factory=dict)
    unterminated: dict[int, int] = field(default_factory=dict)
    continuing: dict[int, int] = field(default_factory=dict)

    @property
    def m(self) -> int:
        return total_length(self.root)

    def finishing_counts(self) -> list[int]:
        return [len(self.finishing.get(n, [])) for n in range(1, self.max_depth + 1)]

    def partial_sum(self, N: int, *, exclude_rung: bool = False) -> Fraction:
        total = Fraction(0)
        for paths in self.finishing.values():
            for p in paths:
                if exclude_rung and p.rung:
                    continue
                total += p.mean(N)
        return total

    def tail(self, N: int) -> float:
        return tail_bound(self.m, len(self.root), self.max_depth, N)


def conjugate_length(kw: KWord) -> int | None:
    """Length L if ``kw`` is a conjugate pair (S, S^-1), else None."""
    if len(kw) == 2 and kw[1] == tuple(-c for c in reversed(kw[0])):
        return len(kw[0])
    return None


def expand_paths(kw: KWord, max_depth: int) -> PathLedger:
    """Enumerate every path up to ``max_depth`` and record the finishing ones."""
    m = total_length(kw)
    if m < 1:
        raise SDError("need at least one letter")
    if max_depth < 0:
        raise SDError("max_depth must be >= 0")
    est = max(m - 1, 1) ** max_depth
    if est > PATH_BUDGET:
        raise SDNumericalError(f"path expansion refused: up to {est} paths exceeds budget {PATH_BUDGET}")
    L = conjugate_length(kw)
    ledger = PathLedger(kw, max_depth)
    stack = [initial_state(kw)]
    while stack:
        st = stack.pop()
        for mv in _moves(st.kword):
            nxt = advance(st, mv)
            n = nxt.depth
            if not nxt.kword:
                rung = rung_set(nxt, L) if L is not None else None
                ledger.finishing.setdefault(n, []).append(FinishingPath(nxt.pattern, nxt.sign, nxt.power, n, rung, nxt))
            elif n < max_depth:
                ledger.continuing[n] = ledger.continuing.get(n, 0) + 1
                stack.append(nxt)
            else:
                ledger.continuing[n] = ledger.continuing.get(n, 0) + 1
                ledger.unterminated[n] = ledger.unterminated.get(n, 0) + 1
    for paths in ledger.finishing.values():
        paths.sort(key=lambda p: [(mv.ell, mv.j, -mv.eps) for mv in p.pattern])
    return ledger


# --------------------------------------------------------------------------
# rung cancellations


def _matrix_of(pos: Hashable, L: int) -> int:
    ell, j = pos
    return j if ell == 1 else L + 1 - j


def rung_set(path: PathState, L: int) -> frozenset[int]:
    """Indices i whose two copies cancelled against each other before either moved.

    The root must be a conjugate pair ``(S, S^-1)`` with ``len(S) == L``; matrix
    ``i`` is the letter at ``(1, i)`` together with its mirror ``(2, L+1-i)``.
    The cancellation may happen in the reduction after a move, or as the
    pivot/partner pair of the move itself.
    """
    touched: set[int] = set()
    found: set[int] = set()
    for step in path.history:
        pm, qm = _matrix_of(step.pivot, L), _matrix_of(step.partner, L)
        if pm == qm and pm not in touched:
            found.add(pm)
        touched.update((pm, qm))
        for a, b in step.cancelled:
            i, i2 = _matrix_of(a, L), _matrix_of(b, L)
            if i == i2 and i not in touched:
                found.add(i)
    return frozenset(found)


def classify_rung(path: PathState | FinishingPath, L: int, indices: Iterable[int] | None = None):
    """Rung cancellation test for a finishing path of a conjugate-pair word.

    With ``indices`` given returns whether every listed matrix had a rung
    cancellation; otherwise returns the full set.
    """
    state = path.state if isinstance(path, FinishingPath) else path
    if state.kword:
        raise SDError("rung classification needs a finishing path")
    rs = rung_set(state, L)
    if indices is None:
        return rs
    return set(indices) <= rs


def marked_word(s: TraceWord, indices: Sequence[int], d: int | None = None) -> KWord:
    """The conjugate pair of ``s`` with matrix ``i_t`` replaced by a fresh symbol ``d+t``."""
    idx = list(indices)
    if len(set(idx)) != len(idx):
        raise SDError("index collision in marked word")
    L = len(s)
    if any(i < 1 or i > L for i in idx):
        raise SDError("marked index outside the word")
    if d is None:
        d = max((abs(c) for c in s), default=0)
    t1, t2 = list(s), [-c for c in reversed(s)]
    for t, i in enumerate(sorted(idx), start=1):
        t1[i - 1] = d + t
        t2[L - i] = -(d + t)
    return (tuple(t1), tuple(t2))


# --------------------------------------------------------------------------
# aggregated series


def _normalize_tagged(traces, tags) -> tuple:
    """Relabel symbols and tags by first appearance; the path algorithm is equivariant under this."""
    smap: dict[int, int] = {}
    tmap: dict[int, int] = {0: 0}
    out = []
    for t, g in zip(traces, tags):
        row = []
        for c, tag in zip(t, g):
            s = abs(c)
            if s not in smap:
                smap[s] = (len(smap) + 1) * (1 if c > 0 else -1)
            v = smap[s] if c > 0 else -smap[s]
            if tag not in tmap:
                tmap[tag] = len(tmap)
            row.append((v, tmap[tag]))
        out.append(tuple(row))
    return tuple(out)


def _identity_tag(x):
    return x


def _unpack(state):
    return tuple(tuple(c for c, _ in t) for t in state), tuple(tuple(g for _, g in t) for t in state)


@dataclass
class SeriesResult:
    counts: list[int]  # |F_n| for n = 1..depth
    sums: list  # sum of finishing means per depth (Fraction or float)
    states_visited: int


_TRANSITIONS: dict[tuple, tuple] = {}


def _transitions(state: tuple) -> tuple:
    """Outgoing moves of a normalized tagged state: ``(child or None, sign, trivial, rung)``.

    ``rung`` marks moves where an untouched matrix meets its own mirror, either
    as pivot and partner or inside the reduction.  Cached, since the reachable
    state space is finite and revisited at every depth.
    """
    hit = _TRANSITIONS.get(state)
    if hit is not None:
        return hit
    traces, tg = _unpack(state)
    out = []
    for mv in _moves(traces):
        pt, qt = tg[0][0], tg[mv.ell - 1][mv.j - 1]
        rung = bool(pt) and pt == qt
        dead = {pt, qt} - {0}
        t_tags = tg
        if dead:
            t_tags = tuple(tuple(0 if g in dead else g for g in row) for row in tg)
        pieces, sign = _split(traces, t_tags, mv)
        out_t, out_g, trivial, pairs = _reduce_pieces(pieces, _identity_tag)
        rung = rung or any(a == b and a != 0 for a, b in pairs)
        child = _normalize_tagged(out_t, out_g) if out_t else None
        out.append((child, sign, trivial, rung))
    hit = tuple(out)
    if len(_TRANSITIONS) < STATE_BUDGET * 10:
        _TRANSITIONS[state] = hit
    return hit


def _root_state(kw: KWord) -> tuple:
    L = conjugate_length(kw)
    if L is not None:
        tags = (tuple(range(1, L + 1)), tuple(range(L, 0, -1)))
    else:
        tags = tuple(tuple(0 for _ in t) for t in kw)
    return _normalize_tagged(kw, tags)


def finishing_series(kw: KWord, depth: int, N: int, *, exact: bool = True, exclude_rung: bool = False) -> SeriesResult:
    """Per-depth number and total mean of finishing paths, aggregated over equal states.

    With ``exclude_rung`` the root must be a conjugate pair, and paths in which
    some matrix cancels against its mirror before being moved are dropped.
    """
    if not kw or not is_minimal_kword(kw):
        raise SDError("series needs a nonempty minimal k-word")
    if depth > MAX_SERIES_DEPTH:
        raise SDNumericalError(f"depth {depth} exceeds {MAX_SERIES_DEPTH}")
    if exclude_rung and conjugate_length(kw) is None:
        raise SDError("rung exclusion needs a conjugate-pair word")
    one = Fraction(1) if exact else 1.0
    inv_n = Fraction(1, N) if exact else 1.0 / N
    scale = {}
    layer = {_root_state(kw): [1, one]}
    counts, sums = [], []
    visited = 0
    for _ in range(depth):
        nxt: dict = {}
        fin_count, fin_sum = 0, 0 * one
        for state, (cnt, wt) in layer.items():
            visited += 1
            if visited > PATH_BUDGET:
                raise SDNumericalError(f"series refused: more than {PATH_BUDGET} state visits")
            for child, sign, trivial, rung in _transitions(state):
                if exclude_rung and rung:
                    continue
                f = scale.get(trivial)
                if f is None:
                    f = scale[trivial] = inv_n * (N**trivial)
                w = wt * f if sign > 0 else -(wt * f)
                if child is None:
                    fin_count += cnt
                    fin_sum += w
                    continue
                slot = nxt.get(child)
                if slot is None:
                    nxt[child] = [cnt, w]
                else:
                    slot[0] += cnt
                    slot[1] += w
        counts.append(fin_count)
        sums.append(fin_sum)
        layer = nxt
        if not layer:
            counts.extend([0] * (depth - len(counts)))
            sums.extend([0 * one] * (depth - len(sums)))
            break
    return SeriesResult(counts, sums, visited)


# --------------------------------------------------------------------------
# bounds


def tail_bound(m: int, k: int, depth: int, N: int) -> float:
    """Certified remainder ``(m-1)^n N^(m-n)`` after summing finishing paths to depth n.

    Requires ``m - 1 < N`` so that the bound decays with n.
    """
    if m < 1 or N < 1 or depth < 0:
        raise SDError("tail_bound needs m >= 1, N >= 1, depth >= 0")
    if not m - 1 < N:
        raise SDError("series not certified convergent: need m - 1 < N")
    if m == 1:
        return 0.0 if depth >= 1 else float(N)
    return math.exp(depth * math.log(m - 1) + (m - depth) * math.log(N))


def default_depth(m: int, N: int, tol: float) -> int:
    if m <= 1:
        return 1
    if not m - 1 < N:
        raise SDError("series not certified convergent: need m - 1 < N")
    n = max(0, math.ceil((math.log(tol) - m * math.log(N)) / (math.log(m - 1) - math.log(N))))
    while tail_bound(m, 1, n, N) >= tol:
        n += 1
    while n > 0 and tail_bound(m, 1, n - 1, N) < tol:
        n -= 1
    if n > MAX_SERIES_DEPTH:
        raise SDNumericalError(f"tolerance {tol} needs depth {n} > {MAX_SERIES_DEPTH}")
    return n


# --------------------------------------------------------------------------
# exact mode


def _solve_sparse(rows: list[tuple[dict, Fraction, object]], unknowns: Sequence) -> dict:
    """Exact Gaussian elimination on a consistent sparse system (rows may exceed unknowns).

    Each row names a preferred pivot variable, used when still present.
    """
    pivots: list[tuple[object, dict, Fraction]] = []
    for coeffs, rhs, prefer in rows:
        row = dict(coeffs)
        b = rhs
        for var, prow, prhs in pivots:
            c = row.get(var)
            if not c:
                continue
            for v2, c2 in prow.items():
                nv = row.get(v2, 0) - c * c2
                if nv:
                    row[v2] = nv
                else:
                    row.pop(v2, None)
            b -= c * prhs
        if not row:
            if b != 0:
                raise SDNumericalError("inconsistent Schwinger–Dyson system")
            continue
        var = prefer if prefer in row else next(iter(row))
        c = row[var]
        prow = {v: x / c for v, x in row.items()}
        pivots.append((var, prow, b / c))
    solved = {p[0] for p in pivots}
    missing = [u for u in unknowns if u not in solved]
    if missing:
        raise SDNumericalError(f"singular Schwinger–Dyson system ({len(missing)} undetermined states)")
    values: dict = {}
    for var, prow, b in reversed(pivots):
        val = b
        for v2, c2 in prow.items():
            if v2 != var:
                val -= c2 * values[v2]
        values[var] = val
    return values


def _pivot_variants(kw: KWord) -> list[KWord]:
    """Presentations of the same state with every letter used once as pivot."""
    out = []
    for l, t in enumerate(kw):
        others = kw[:l] + kw[l + 1 :]
        for r in range(len(t)):
            out.append((t[r:] + t[:r],) + others)
    return out


@dataclass
class ExactSystem:
    values: dict[KWord, Fraction]
    states: int
    all_pivots: bool


def _exact_system(root: KWord, N: int, all_pivots: bool) -> ExactSystem:
    key0 = canonical_key(root)
    eqs: dict[KWord, list[tuple[dict, Fraction]]] = {}
    todo = [key0]
    seen = {key0}
    nN = Fraction(N)
    while todo:
        st = todo.pop()
        rows = []
        for pres in _pivot_variants(st) if all_pivots else [st]:
            row: dict = {st: Fraction(1)}
            rhs = Fraction(0)
            for child, sign, trivial in _children_plain(pres):
                coef = sign * nN ** (trivial - 1)
                if not child:
                    rhs += coef
                    continue
                ck = canonical_key(child)
                row[ck] = row.get(ck, 0) - coef
                if not row[ck]:
                    del row[ck]
                if ck not in seen:
                    seen.add(ck)
                    todo.append(ck)
                    if len(seen) > STATE_BUDGET:
                        raise SDNumericalError(f"exact mode refused: more than {STATE_BUDGET} reachable states")
            rows.append((row, rhs))
        eqs[st] = rows
    levels: dict[int, list[KWord]] = defaultdict(list)
    for st in eqs:
        levels[total_length(st)].append(st)
    values: dict[KWord, Fraction] = {}
    for m in sorted(levels):
        states = sorted(levels[m], key=lambda s: (len(s), s))
        level_rows = []
        for st in states:
            for row, rhs in eqs[st]:
                r: dict = {}
                b = rhs
                for v, c in row.items():
                    if v in values:
                        b -= c * values[v]
                    else:
                        r[v] = c
                level_rows.append((r, b, st))
        values.update(_solve_sparse(level_rows, states))
    return ExactSystem(values, len(eqs), all_pivots)


_EXACT_CACHE: dict[tuple[KWord, int], Fraction] = {}


def exact_value(kw: KWord, N: int) -> Fraction:
    """E'(kw) as an exact rational for a nonempty minimal k-word."""
    if N == 1:
        # scalar Haar unitaries: the product is a pure phase
        net: dict[int, int] = defaultdict(int)
        for t in kw:
            for c in t:
                net[abs(c)] += 1 if c > 0 else -1
        return Fraction(int(not any(net.values())))
    key = canonical_key(kw)
    hit = _EXACT_CACHE.get((key, N))
    if hit is not None:
        return hit
    try:
        system = _exact_system(kw, N, all_pivots=False)
    except SDNumericalError as exc:
        if "singular" not in str(exc):
            raise
        try:
            system = _exact_system(kw, N, all_pivots=True)
        except SDNumericalError as exc2:
            raise SDNumericalError(
                f"{exc2}; the pivot equations need not determine E' when N <= m - 1 "
                f"(here N={N}, m={total_length(kw)})"
            ) from None
    for st, val in system.values.items():
        _EXACT_CACHE[(st, N)] = val
    return system.values[key]


# --------------------------------------------------------------------------
# public value


@dataclass
class SDValue:
    value: Fraction | float
    certified_error: float
    depth_used: int
    mode: str
    finishing_counts: list[int] = field(default_factory=list)
    rung_counts: list[int] | None = None

    @property
    def as_float(self) -> float:
        return float(self.value)


def _prepare(kw: KWord) -> tuple[KWord, int]:
    """Minimal writings of every trace; trivial traces are dropped and counted."""
    traces = []
    trivial = 0
    for t in kw:
        m = minimal_writing(t)
        if m:
            traces.append(m)
        else:
            trivial += 1
    return tuple(traces), trivial


def sd_value(kw: KWord, N: int, mode: str = "exact", tol: float = 1e-6, depth: int | None = None) -> SDValue:
    """Evaluate E'(kw) for integer N ≥ 1 in ``exact`` or ``series`` mode."""
    if N < 1:
        raise SDError("N must be >= 1")
    core, t0 = _prepare(kw)
    scale = N**t0
    if not core:
        return SDValue(Fraction(scale), 0.0, 0, mode)
    m = total_length(core)
    if mode == "exact":
        val = exact_value(core, N) * scale
        return SDValue(val, 0.0, 0, mode)
    if mode != "series":
        raise SDError(f"unknown mode {mode!r}")
    n = default_depth(m, N, tol) if depth is None else depth
    res = finishing_series(core, n, N, exact=True)
    val = sum(res.sums, Fraction(0)) * scale
    err = tail_bound(m, len(core), n, N) * scale
    rung_counts = None
    if conjugate_length(core) is not None:
        free = finishing_series(core, n, N, exact=False, exclude_rung=True)
        rung_counts = [a - b for a, b in zip(res.counts, free.counts)]
    return SDValue(val, err, n, mode, res.counts, rung_counts)


@dataclass
class RungReport:
    word: TraceWord
    N: int
    depth: int
    e0: float
    rung_free_sum: float
    residual: float
    tail: float
    tracking_residual: float

    @property
    def ok(self) -> bool:
        return self.residual <= self.tail


_PARTIAL_CACHE: dict[tuple, float] = {}


def _partial(kw: KWord, depth: int, N: int) -> float:
    key = (_root_state(kw), depth, N)
    hit = _PARTIAL_CACHE.get(key)
    if hit is None:
        hit = _PARTIAL_CACHE[key] = math.fsum(finishing_series(kw, depth, N, exact=False).sums)
    return hit


def rung_free_sum(s: TraceWord, N: int, depth: int) -> float:
    """Sum of finishing means up to ``depth`` over paths with no rung cancellation.

    The rung paths for matrix set ``I`` are the finishing paths of the marked
    word ``S^I``, so the rung-free part is the inclusion-exclusion
    ``sum_I (-1)^|I| P(S^I)`` with ``S^{}`` the plain conjugate pair.
    """
    s = tuple(s)
    total = []
    for r in range(len(s) + 1):
        for idx in itertools.combinations(range(1, len(s) + 1), r):
            kw = marked_word(s, idx) if idx else conjugate_pair(s)
            total.append((-1) ** r * _partial(kw, depth, N))
    return math.fsum(total)


def rung_identity_residual(s: TraceWord, N: int, depth: int) -> RungReport:
    """Check ``E0(S) = 1 + sum of rung-free finishing means`` truncated at ``depth``.

    ``E0(S) = E|Tr U(S)|^2`` comes from exact mode.  ``tracking_residual`` is
    the same check with rung paths read off the tracking maps instead; it
    can differ when a reduction in ``S`` cancels a copy against a letter other
    than its mirror.
    """
    s = tuple(s)
    if not s or minimal_writing(s) != s:
        raise SDError("rung identity needs a nonempty minimal 1-word")
    kw = conjugate_pair(s)
    m = total_length(kw)
    tail = tail_bound(m, 2, depth, N)
    e0 = float(exact_value(kw, N))
    free = rung_free_sum(s, N, depth)
    tracked = math.fsum(finishing_series(kw, depth, N, exact=False, exclude_rung=True).sums)
    return RungReport(s, N, depth, e0, free, abs(e0 - 1.0 - free), tail, abs(e0 - 1.0 - tracked))


# --------------------------------------------------------------------------
# pattern equivalence classes


def _relabel(w: TraceWord, flip: bool) -> TraceWord:
    """First-appearance relabeling; with ``flip`` each symbol also first appears as +."""
    mp: dict[int, int] = {}
    out = []
    for c in w:
        s = abs(c)
        if s not in mp:
            mp[s] = (len(mp) + 1) * (1 if (c > 0 or not flip) else -1)
        out.append(mp[s] if c > 0 else -mp[s])
    return tuple(out)


def word_orbits(m: int, d: int, shape: str = "all", adjoint: bool = True) -> list[tuple[TraceWord, int]]:
    """Orbit representatives of minimal words with their orbit sizes.

    The path algorithm only looks at which letters are equal or inverse, so
    it commutes with renaming symbols and, for ``shape="all"``, with
    adjointing a symbol everywhere (disable with ``adjoint=False``).
    Alternating words are closed under renaming only.
    """
    from .word_core import enumerate_minimal

    flip = shape == "all" and adjoint
    if shape == "all":
        size = m
    elif shape == "alternating":
        if m % 2:
            raise SDError("alternating words have even length")
        size = m // 2
    else:
        raise SDError(f"unsupported shape {shape!r}")
    out = []
    for w in enumerate_minimal(size, min(d, m), shape):
        if _relabel(w, flip) != w:
            continue
        k = len({abs(c) for c in w})
        if k > d:
            continue
        weight = math.perm(d, k) * (2**k if flip else 1)
        out.append((w, weight))
    return out


def _history_key(state: PathState) -> tuple:
    return tuple((tuple(sorted(st.f.items())), tuple(sorted(st.f_rs.items()))) for st in state.history)


@dataclass
class ClassCensus:
    """Rung-free finishing paths of conjugate pairs, grouped by pattern and tracking history.

    ``classes[(n, pattern)][history]`` is the number of words in that class;
    ``finishing[n]`` the largest |F_n| seen and ``worst_exponent`` the largest
    ``3 (power - n) - (3k - 2n)`` over all finishing paths (must be <= 0).
    """

    m: int
    d: int
    depth: int
    shape: str
    classes: dict = field(default_factory=dict)
    max_finishing: dict = field(default_factory=dict)
    worst_exponent: int | None = None
    words: int = 0

    def class_sizes(self):
        for key, hist in self.classes.items():
            for h, size in hist.items():
                yield key, h, size

    def max_class_size(self) -> int:
        return max((s for _, _, s in self.class_sizes()), default=0)

    def max_class_count(self) -> int:
        return max((len(h) for h in self.classes.values()), default=0)


def pattern_classes(
    m: int, d: int, depth: int, shape: str = "all", *, orbits: bool = True, fix_signs: bool = False
) -> ClassCensus:
    """Census of the classes ``[S]_P`` over minimal words ``S`` of length ``m``.

    Two words share a class when the same pattern finishes on both without
    rung cancellation and all tracking maps agree.  ``fix_signs`` further
    requires equal sign sequences; without it a class is closed under
    adjointing a symbol everywhere.  With ``orbits`` each symmetry orbit is
    expanded once and weighted by its size; otherwise every word is expanded.
    """
    from .word_core import enumerate_minimal

    census = ClassCensus(m, d, depth, shape)
    if orbits:
        corpus = word_orbits(m, d, shape, adjoint=not fix_signs)
    else:
        size = m if shape == "all" else m // 2
        corpus = [(w, 1) for w in enumerate_minimal(size, d, shape)]
    for w, weight in corpus:
        census.words += weight
        kw = conjugate_pair(w)
        ledger = expand_paths(kw, depth)
        signs = tuple(c > 0 for c in w) if fix_signs else None
        for n, paths in ledger.finishing.items():
            census.max_finishing[n] = max(census.max_finishing.get(n, 0), len(paths))
            for p in paths:
                ex = 3 * (p.power - n) - (3 * len(kw) - 2 * n)
                if census.worst_exponent is None or ex > census.worst_exponent:
                    census.worst_exponent = ex
                if p.rung:
                    continue
                bucket = census.classes.setdefault((n, p.pattern), {})
                h = (_history_key(p.state), signs)
                bucket[h] = bucket.get(h, 0) + weight
    return census
