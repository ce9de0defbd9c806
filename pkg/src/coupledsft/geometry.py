"""Piecewise affine interval maps realizing the six-symbol coupled system.

Cells (left half is well A, right half is well D)::

    R1 = [0, a]     increasing onto [0, 1/2], fixed point 0        a1
    R2 = [a, a']    cusp: 1/2 at both ends, peak 1/2 + eps' at 1/4  a2
    R3 = [a', 1/2]  decreasing onto [0, 1/2]                        a3
    R4 = [1/2, c]   increasing onto [1/2, 1], fixed point 1/2       d4
    R5 = [c, c']    cusp: 1/2 at both ends, dip 1/2 - eps at 3/4    d5
    R6 = [c', 1]    decreasing onto [1/2, 1]                        d6

with ``a' = 1/2 - a`` and ``c' = 3/2 - c``.  The cusp heights are tuned so
that the entry interval of a well reaches the full half after exactly the
constrained number of steps: ``lam_R**n' * eps' = 1/2`` and
``lam_L**n * eps = 1/2`` (one step fewer under the literal prefix rule).
All parameters are exact fractions, so orbit coding is exact.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .sft import SubshiftSpec, cylinders

__all__ = [
    "GeometryError",
    "GeometryParams",
    "IntervalMapSpec",
    "build_family_map",
    "transition_matrix",
    "image_checks",
    "CodedPoint",
    "code_point",
    "cylinder_interval",
    "lyapunov_bound",
    "empirical_lyapunov",
    "mme_mass",
    "mme_measure",
    "breakpoint_csv",
    "SYMBOLS",
]

SYMBOLS = ("a1", "a2", "a3", "d4", "d5", "d6")
HALF = Fraction(1, 2)
QUARTER = Fraction(1, 4)


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class GeometryParams:
    """Marked points of the base map; ``c`` defaults to ``1/2 + a``."""

    a: Fraction = Fraction(3, 16)
    c: Fraction | None = None

    def __post_init__(self):
        object.__setattr__(self, "a", Fraction(self.a))
        c = HALF + self.a if self.c is None else Fraction(self.c)
        object.__setattr__(self, "c", c)
        if not 0 < self.a < QUARTER:
            raise GeometryError("need 0 < a < 1/4")
        if not HALF < c < Fraction(3, 4):
            raise GeometryError("need 1/2 < c < 3/4")
        # expansion of the non-cusp branches must be at least 2
        if 1 / (2 * self.a) < 2 or 1 / (2 * (c - HALF)) < 2:
            raise GeometryError("non-cusp branches must have slope >= 2")


@dataclass(frozen=True, eq=False)
class IntervalMapSpec:
    """Map T~ at one parameter value; ``pieces`` are (lo, hi, slope, intercept)."""

    params: GeometryParams
    n: int
    nprime: int
    linked_prefix: bool
    eps: Fraction
    eps_prime: Fraction
    pieces: tuple = field(repr=False)

    @property
    def a(self) -> Fraction:
        return self.params.a

    @property
    def a_prime(self) -> Fraction:
        return HALF - self.params.a

    @property
    def b(self) -> Fraction:
        """Pre-image of 1/4 under the first branch."""
        return self.params.a / 2

    @property
    def c(self) -> Fraction:
        return self.params.c

    @property
    def c_prime(self) -> Fraction:
        return Fraction(3, 2) - self.params.c

    @property
    def lam_left(self) -> Fraction:
        return 1 / (2 * self.a)

    @property
    def lam_right(self) -> Fraction:
        return 1 / (2 * (self.c - HALF))

    @property
    def cells(self) -> tuple:
        a, ap, c, cp = self.a, self.a_prime, self.c, self.c_prime
        return ((0, a), (a, ap), (ap, HALF), (HALF, c), (c, cp), (cp, Fraction(1)))

    @property
    def breakpoints(self) -> tuple:
        return tuple(sorted({p for lo, hi, _, _ in self.pieces for p in (lo, hi)}))

    def cell(self, x) -> int | None:
        """Index of the cell containing ``x`` in its interior, else None."""
        for i, (lo, hi) in enumerate(self.cells):
            if lo < x < hi:
                return i
        return None

    def _piece(self, x):
        for p in self.pieces:
            if p[0] <= x <= p[1]:
                return p
        raise GeometryError(f"{x} outside [0, 1]")

    def __call__(self, x):
        _, _, s, t = self._piece(x)
        return s * x + t

    def derivative(self, x):
        return self._piece(x)[2]

    def image(self, lo, hi) -> tuple:
        """Image of ``[lo, hi]`` contained in one cell (min, max)."""
        vals = []
        for plo, phi, s, t in self.pieces:
            x0, x1 = max(lo, plo), min(hi, phi)
            if x0 < x1 or (x0 == x1 and lo == hi):
                vals += [s * x0 + t, s * x1 + t]
        if not vals:
            raise GeometryError(f"[{lo}, {hi}] outside [0, 1]")
        return min(vals), max(vals)

    def slopes(self) -> list:
        return [p[2] for p in self.pieces]


def _affine(x0, y0, x1, y1):
    s = (y1 - y0) / (x1 - x0)
    return (x0, x1, s, y0 - s * x0)


def build_family_map(params: GeometryParams, n: int, nprime: int, linked_prefix: bool = True) -> IntervalMapSpec:
    """The map whose coding is the coupled subshift with block lengths (n, n')."""
    if n < 2 or nprime < 2:
        raise GeometryError("block lengths must be >= 2")
    a, c = params.a, params.c
    ap, cp = HALF - a, Fraction(3, 2) - c
    lam_l = 1 / (2 * a)
    lam_r = 1 / (2 * (c - HALF))
    steps_a = n if linked_prefix else n - 1
    steps_d = nprime if linked_prefix else nprime - 1
    eps = HALF / lam_l**steps_a
    eps_p = HALF / lam_r**steps_d
    if eps >= HALF - ap:
        raise GeometryError("the right cusp dips below its host cell R3")
    if eps_p >= c - HALF:
        raise GeometryError("the left cusp peaks above its host cell R4")
    pieces = (
        _affine(0, 0, a, HALF),
        _affine(a, HALF, QUARTER, HALF + eps_p),
        _affine(QUARTER, HALF + eps_p, ap, HALF),
        _affine(ap, HALF, HALF, 0),
        _affine(HALF, HALF, c, 1),
        _affine(c, HALF, Fraction(3, 4), HALF - eps),
        _affine(Fraction(3, 4), HALF - eps, cp, HALF),
        _affine(cp, 1, 1, HALF),
    )
    return IntervalMapSpec(params, n, nprime, linked_prefix, eps, eps_p, pieces)


def transition_matrix(T: IntervalMapSpec) -> SubshiftSpec:
    """Cell i -> j allowed iff T(R_i) meets the interior of R_j."""
    cells = T.cells
    mat = np.zeros((6, 6), dtype=np.int8)
    for i, (lo, hi) in enumerate(cells):
        ilo, ihi = T.image(lo, hi)
        for j, (jlo, jhi) in enumerate(cells):
            if max(ilo, jlo) < min(ihi, jhi):
                mat[i, j] = 1
    return SubshiftSpec(SYMBOLS, mat)


def _iterate_interval(T: IntervalMapSpec, lo, hi, steps: int):
    for _ in range(steps):
        lo, hi = T.image(lo, hi)
    return lo, hi


def image_checks(T: IntervalMapSpec) -> dict[str, bool]:
    """Exact image relations making the partition Markov for the coupled system."""
    R = T.cells
    steps_a = T.n if T.linked_prefix else T.n - 1
    steps_d = T.nprime if T.linked_prefix else T.nprime - 1
    left_entry = (HALF, HALF + T.eps_prime)
    right_entry = (HALF - T.eps, HALF)
    full_left = (Fraction(0), HALF)
    full_right = (HALF, Fraction(1))
    checks = {
        "T(R1) = R1 u R2 u R3": T.image(*R[0]) == full_left,
        "T(R2) = [1/2, 1/2 + eps'] inside R4": T.image(*R[1]) == left_entry and left_entry[1] < R[3][1],
        "T(R3) = R1 u R2 u R3": T.image(*R[2]) == full_left,
        "T(R4) = R4 u R5 u R6": T.image(*R[3]) == full_right,
        "T(R5) = [1/2 - eps, 1/2] inside R3": T.image(*R[4]) == right_entry and right_entry[0] > R[2][0],
        "T(R6) = R4 u R5 u R6": T.image(*R[5]) == full_right,
        "delta entry stays in R4 for the prefix": all(
            _iterate_interval(T, *left_entry, k)[1] <= R[3][1] for k in range(steps_d)
        ),
        "T^n'([1/2, 1/2 + eps']) = R4 u R5 u R6": _iterate_interval(T, *left_entry, steps_d) == full_right,
        "alpha entry stays in R1 after the first step": all(
            _iterate_interval(T, *right_entry, k)[1] <= R[0][1] for k in range(1, steps_a)
        ),
        "T^n([1/2 - eps, 1/2]) = R1 u R2 u R3": _iterate_interval(T, *right_entry, steps_a) == full_left,
    }
    return checks


@dataclass(frozen=True)
class CodedPoint:
    word: tuple
    boundary: bool
    admissible: bool


def code_point(T: IntervalMapSpec, x, depth: int) -> CodedPoint:
    """Cell labels along the orbit of ``x``; stops early on a cell boundary."""
    from .coupling.family import in_core_language, six_symbol_family

    x = Fraction(x)
    word = []
    boundary = False
    for _ in range(depth):
        i = T.cell(x)
        if i is None:
            boundary = True
            break
        word.append(SYMBOLS[i])
        x = T(x)
    fam = six_symbol_family(linked_prefix=T.linked_prefix)
    ok = in_core_language(fam, word, T.n, T.nprime) if word else False
    return CodedPoint(tuple(word), boundary, ok)


def _branch_inverse(T: IntervalMapSpec, i: int, lo, hi):
    """Pre-image of [lo, hi] inside cell i (None if empty)."""
    out = []
    clo, chi = T.cells[i]
    for plo, phi, s, t in T.pieces:
        if plo < clo or phi > chi:
            continue
        ylo, yhi = sorted((s * plo + t, s * phi + t))
        jlo, jhi = max(lo, ylo), min(hi, yhi)
        if jlo > jhi or s == 0:
            continue
        x0, x1 = sorted(((jlo - t) / s, (jhi - t) / s))
        out.append((x0, x1))
    if not out:
        return None
    return min(p[0] for p in out), max(p[1] for p in out)


def cylinder_interval(T: IntervalMapSpec, word: Sequence):
    """Hull of the points coded by ``word`` (None if empty).

    Cusp cells have two monotone pieces, so the set may be two intervals
    symmetric about the cusp; the hull is returned.
    """
    idx = [SYMBOLS.index(s) for s in word]
    lo, hi = T.cells[idx[-1]]
    for i in reversed(idx[:-1]):
        res = _branch_inverse(T, i, lo, hi)
        if res is None:
            return None
        lo, hi = res
    return lo, hi


def lyapunov_bound(T: IntervalMapSpec) -> float:
    """``min(log gamma, log lambda) / (n + n' + 2)``.

    ``gamma`` is the expansion accumulated over one cusp passage plus the
    forced prefix; with the entry reaching a full half this is
    ``1 / (2 (1/4 - a))`` on the left and ``1 / (2 (3/4 - c))`` on the right.
    """
    g = min(HALF / (QUARTER - T.a), HALF / (Fraction(3, 4) - T.c))
    if g <= 1:
        raise GeometryError("gamma <= 1: construction parameters are invalid")
    lam = min(T.lam_left, T.lam_right)
    return min(math.log(g), math.log(lam)) / (T.n + T.nprime + 2)


def empirical_lyapunov(T: IntervalMapSpec, n_orbits: int = 100, length: int = 20000, seed: int = 0) -> np.ndarray:
    """Orbit averages of log|T'| from uniformly sampled starting points."""
    rng = np.random.default_rng(seed)
    pieces = [(float(lo), float(hi), float(s), float(t)) for lo, hi, s, t in T.pieces]
    los = np.array([p[0] for p in pieces])
    slope = np.array([p[2] for p in pieces])
    inter = np.array([p[3] for p in pieces])
    logs = np.log(np.abs(slope))
    x = rng.random(n_orbits)
    acc = np.zeros(n_orbits)
    for _ in range(length):
        k = np.clip(np.searchsorted(los, x, side="right") - 1, 0, len(pieces) - 1)
        acc += logs[k]
        x = np.clip(slope[k] * x + inter[k], 0.0, 1.0)
    return acc / length


def _depth_for(T: IntervalMapSpec, points, max_depth: int):
    from .coupling.family import six_symbol_family

    base = six_symbol_family().base
    for k in range(1, max_depth + 1):
        ends = set()
        fam_words = cylinders(base, k)
        for w in fam_words:
            iv = cylinder_interval(T, w)
            if iv is not None:
                ends.update(iv)
        if all(p in ends or p in (0, 1) for p in points):
            return k, fam_words
    return None, None


def mme_mass(T: IntervalMapSpec, lo, hi, max_depth: int = 6, measure=None) -> float:
    """Mass of ``[lo, hi]`` under the coded measure of maximal entropy.

    The interval must be a union of cylinder intervals of some depth
    ``<= max_depth``; cylinder masses come from the automaton of the coupled
    system (or from ``measure``, a word -> mass callable).
    """
    lo, hi = Fraction(lo), Fraction(hi)
    k, words = _depth_for(T, (lo, hi), max_depth)
    if k is None:
        raise GeometryError(
            f"[{lo}, {hi}] is not a union of cylinder intervals up to depth {max_depth}"
        )
    if measure is None:
        measure = mme_measure(T)
    total = 0.0
    for w in words:
        iv = cylinder_interval(T, w)
        if iv is not None and lo <= iv[0] and iv[1] <= hi:
            total += measure(w)
    return total


def mme_measure(T: IntervalMapSpec):
    """Measure of maximal entropy of the coded subshift, as word -> mass."""
    from .coupling.automaton import automaton_operator, build_sigma_m
    from .coupling.family import SequenceRule, six_symbol_family
    from .transfer import gibbs_cylinder, gibbs_measure, perron

    fam = six_symbol_family(
        n_rule=SequenceRule("affine", 0, T.n),
        nprime_rule=SequenceRule("affine", 0, T.nprime),
        linked_prefix=T.linked_prefix,
    )
    g = gibbs_measure(perron(automaton_operator(build_sigma_m(fam, 0))))
    return lambda w: gibbs_cylinder(g, w).mass


def breakpoint_csv(T: IntervalMapSpec) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["lo", "hi", "slope", "intercept"])
    for row in T.pieces:
        wr.writerow([str(v) for v in row])
    return buf.getvalue()
