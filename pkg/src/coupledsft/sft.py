"""Subshifts of finite type: transition matrices, admissibility, cylinders
and higher-block recoding.

A subshift is stored as an ordered tuple of opaque symbol labels together
with a square 0/1 transition matrix, ``transitions[i, j] == 1`` meaning that
symbol ``i`` may be followed by symbol ``j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

__all__ = [
    "SubshiftSpec",
    "SFTDiagnostics",
    "WordMetricParams",
    "ResourceError",
    "validate_sft",
    "strong_classes",
    "live_states",
    "class_period",
    "cylinders",
    "count_cylinders",
    "is_admissible",
    "higher_block",
    "parse_spec",
    "emit_spec",
    "word_distance",
]

# largest number of k-block states higher_block will materialise
MAX_BLOCK_STATES = 200_000


class ResourceError(MemoryError):
    """Raised when a recoding would exceed the state budget."""


@dataclass(frozen=True, eq=False)
class SubshiftSpec:
    """Alphabet plus 0/1 transition matrix.

    Parameters
    ----------
    symbols : sequence of hashable
        Ordered symbol labels.
    transitions : array_like
        Square 0/1 matrix indexed like ``symbols``.
    """

    symbols: tuple
    transitions: np.ndarray = field(repr=False)

    def __init__(self, symbols: Sequence[Hashable], transitions) -> None:
        symbols = tuple(symbols)
        mat = np.asarray(transitions)
        if len(symbols) == 0:
            raise ValueError("empty alphabet")
        if len(set(symbols)) != len(symbols):
            raise ValueError("duplicate symbol labels")
        if mat.ndim != 2 or mat.shape != (len(symbols), len(symbols)):
            raise ValueError(
                f"transition matrix must be {len(symbols)}x{len(symbols)}, got {mat.shape}"
            )
        if not np.isin(mat, (0, 1)).all():
            raise ValueError("transition entries must be 0 or 1")
        mat = mat.astype(np.int8)
        mat.setflags(write=False)
        object.__setattr__(self, "symbols", symbols)
        object.__setattr__(self, "transitions", mat)
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(symbols)})

    def __len__(self) -> int:
        return len(self.symbols)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SubshiftSpec):
            return NotImplemented
        return self.symbols == other.symbols and np.array_equal(
            self.transitions, other.transitions
        )

    def __hash__(self) -> int:
        return hash((self.symbols, self.transitions.tobytes()))

    def index(self, symbol) -> int:
        return self._index[symbol]

    def allowed(self, a, b) -> bool:
        return bool(self.transitions[self._index[a], self._index[b]])

    def successors(self, symbol) -> list:
        row = self.transitions[self._index[symbol]]
        return [self.symbols[j] for j in np.flatnonzero(row)]

    def restrict(self, keep: Iterable) -> "SubshiftSpec":
        """Sub-alphabet spec, keeping the order of ``self.symbols``."""
        keep = set(keep)
        idx = [i for i, s in enumerate(self.symbols) if s in keep]
        return SubshiftSpec(
            [self.symbols[i] for i in idx], self.transitions[np.ix_(idx, idx)]
        )

    @property
    def validity(self) -> bool:
        """True iff an irreducible aperiodic core exists."""
        d = validate_sft(self)
        return bool(d.recurrent_core) and d.irreducible and d.period == 1


@dataclass(frozen=True)
class SFTDiagnostics:
    irreducible: bool
    period: int
    recurrent_core: tuple
    successor_free: tuple
    classes: tuple


@dataclass(frozen=True)
class WordMetricParams:
    """Cylinder metric ``d(x, y) = base ** (-n(x, y))``."""

    base: float = 2.0

    def __post_init__(self):
        if not self.base > 1:
            raise ValueError("metric base must be > 1")


def strong_classes(mat) -> list[np.ndarray]:
    """Nontrivial strongly connected classes of a 0/1 (or weighted) matrix.

    A class is nontrivial when it carries at least one cycle.
    """
    adj = csr_matrix(np.asarray(mat) != 0) if not hasattr(mat, "tocsr") else (mat != 0).tocsr()
    ncomp, labels = connected_components(adj, directed=True, connection="strong")
    out = []
    diag = adj.diagonal()
    for c in range(ncomp):
        members = np.flatnonzero(labels == c)
        if len(members) > 1 or diag[members[0]]:
            out.append(members)
    return out


def class_period(mat, members: np.ndarray) -> int:
    """Period (gcd of cycle lengths) of one strongly connected class."""
    adj = csr_matrix(np.asarray(mat) != 0) if not hasattr(mat, "tocsr") else (mat != 0).tocsr()
    inside = np.zeros(adj.shape[0], dtype=bool)
    inside[members] = True
    level = {int(members[0]): 0}
    frontier = [int(members[0])]
    g = 0
    while frontier:
        nxt = []
        for u in frontier:
            lo, hi = adj.indptr[u], adj.indptr[u + 1]
            for v in adj.indices[lo:hi]:
                v = int(v)
                if not inside[v]:
                    continue
                if v in level:
                    g = math.gcd(g, level[u] + 1 - level[v])
                else:
                    level[v] = level[u] + 1
                    nxt.append(v)
        frontier = nxt
    return abs(g) if g else 0


def live_states(mat) -> np.ndarray:
    """Mask of states that start at least one infinite path."""
    mat = np.asarray(mat) != 0
    live = np.ones(mat.shape[0], dtype=bool)
    while True:
        nxt = live & (mat[:, live].any(axis=1))
        if np.array_equal(nxt, live):
            return live
        live = nxt


def validate_sft(spec: SubshiftSpec) -> SFTDiagnostics:
    """Recurrent core, irreducibility and period of a subshift.

    The recurrent core is the union of the essential (closed) nontrivial
    classes.  Successor-free symbols are reported, never fatal.
    """
    mat = spec.transitions.astype(bool)
    n = len(spec)
    live = live_states(mat)
    pruned = mat & live[:, None] & live[None, :]
    classes = strong_classes(pruned)
    adj = csr_matrix(pruned)
    _, labels = connected_components(adj, directed=True, connection="strong")
    essential = []
    for members in classes:
        lab = labels[members[0]]
        targets = adj[members].indices
        # closed among states with an infinite future
        if np.all(labels[targets] == lab):
            essential.append(members)
    core_idx = sorted(int(i) for m in essential for i in m)
    core = tuple(spec.symbols[i] for i in core_idx)
    succ_free = tuple(spec.symbols[i] for i in range(n) if not mat[i].any())
    if essential:
        irreducible = len(essential) == 1
        period = class_period(mat, essential[0]) if irreducible else 0
    else:
        irreducible, period = False, 0
    return SFTDiagnostics(
        irreducible=irreducible,
        period=period,
        recurrent_core=core,
        successor_free=succ_free,
        classes=tuple(tuple(spec.symbols[i] for i in m) for m in classes),
    )


def is_admissible(spec: SubshiftSpec, word: Sequence) -> bool:
    try:
        idx = [spec.index(s) for s in word]
    except KeyError:
        return False
    return all(spec.transitions[a, b] for a, b in zip(idx, idx[1:]))


def cylinders(spec: SubshiftSpec, depth: int) -> list[tuple]:
    """All admissible words of length ``depth``, in lexicographic index order."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    mat = spec.transitions
    words = [(i,) for i in range(len(spec))]
    for _ in range(depth - 1):
        words = [w + (int(j),) for w in words for j in np.flatnonzero(mat[w[-1]])]
    return [tuple(spec.symbols[i] for i in w) for w in words]


def count_cylinders(spec: SubshiftSpec, depth: int) -> int:
    if depth < 1:
        raise ValueError("depth must be >= 1")
    m = np.linalg.matrix_power(spec.transitions.astype(object), depth - 1)
    return int(np.sum(m))


def higher_block(spec: SubshiftSpec, k: int) -> SubshiftSpec:
    """k-block recoding; symbols are the admissible k-words (as tuples)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if k == 1:
        return spec
    # cheap upper bound on the state count before enumerating
    if count_cylinders(spec, k) > MAX_BLOCK_STATES:
        raise ResourceError(f"{k}-block recoding exceeds {MAX_BLOCK_STATES} states")
    blocks = cylinders(spec, k)
    by_prefix: dict[tuple, list[int]] = {}
    for j, b in enumerate(blocks):
        by_prefix.setdefault(b[:-1], []).append(j)
    mat = np.zeros((len(blocks), len(blocks)), dtype=np.int8)
    for i, b in enumerate(blocks):
        for j in by_prefix.get(b[1:], ()):
            mat[i, j] = 1
    return SubshiftSpec(blocks, mat)


def word_distance(x: Sequence, y: Sequence, params: WordMetricParams = WordMetricParams()) -> float:
    """``base ** -n`` with ``n`` the first disagreement index (0 if equal prefixes
    run out: finite words are compared on their common length)."""
    for n, (a, b) in enumerate(zip(x, y)):
        if a != b:
            return params.base ** (-n)
    return 0.0 if len(x) == len(y) else params.base ** (-min(len(x), len(y)))


# Plain-text grammar:
#
#   symbols: s1 s2 s3
#   1 1 0
#   0 0 1
#   1 0 1
#
# Symbols are whitespace separated tokens; rows are whitespace separated 0/1
# digits.  Lines starting with '#' and blank lines are ignored on input.
# ``emit_spec`` writes the canonical form: no comments, single spaces, a
# trailing newline.  parse(emit(x)) == x and emit(parse(emit(x))) == emit(x).


def parse_spec(text: str) -> SubshiftSpec:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines or not lines[0].startswith("symbols:"):
        raise ValueError("subshift block must start with 'symbols:'")
    symbols = lines[0][len("symbols:"):].split()
    rows = [[int(tok) for tok in ln.split()] for ln in lines[1:]]
    return SubshiftSpec(symbols, np.array(rows, dtype=np.int8).reshape(len(rows), -1))


def emit_spec(spec: SubshiftSpec) -> str:
    out = ["symbols: " + " ".join(str(s) for s in spec.symbols)]
    out += [" ".join(str(int(v)) for v in row) for row in spec.transitions]
    return "\n".join(out) + "\n"

