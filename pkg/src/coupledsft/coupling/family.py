"""Coupled two-well families and the forbidden-word scanner.

The global alphabet splits into alpha symbols (well A) and delta symbols
(well D).  A maximal run of one well's symbols that is entered from and left
to the other well is a *block*.  At parameter ``m`` a delta block must have
length at least ``n'_m`` and its first ``n'_m - 1`` symbols must be
D'-eligible; alpha blocks likewise with ``n_m`` and A'.  Under the linked
prefix rule (the default) the transition leaving that prefix must be
D'-eligible as well, i.e. the first ``n'_m`` symbols of the block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..sft import SubshiftSpec, is_admissible, validate_sft
from ..transfer import Potential, build_transfer_matrix, perron

__all__ = [
    "ConstraintViolation",
    "SequenceRule",
    "CoupledFamily",
    "six_symbol_family",
    "toy_family",
    "split_runs",
    "passes_scan",
    "in_core_language",
]

PRESSURE_MATCH_TOL = 1e-10


class ConstraintViolation(ValueError):
    pass


@dataclass(frozen=True)
class SequenceRule:
    """Integer sequence generator.

    kinds
    -----
    ``affine``  : ``round(a * m + b)``
    ``theta``   : ``ceil(a * other)``  (used for n_m given n'_m)
    ``log``     : ``max(2, floor(log(other)))``
    ``square``  : ``other ** 2``
    ``same``    : ``other``
    """

    kind: str = "affine"
    a: float = 1.0
    b: float = 0.0

    def __post_init__(self):
        if self.kind not in ("affine", "theta", "log", "square", "same"):
            raise ValueError(f"unknown sequence kind {self.kind!r}")

    def __call__(self, m: int, other: int | None = None) -> int:
        if self.kind == "affine":
            return int(round(self.a * m + self.b))
        if other is None:
            raise ValueError(f"sequence kind {self.kind!r} needs the companion sequence")
        if self.kind == "theta":
            # guard against 2.0000000001 style rounding of exact products
            return int(math.ceil(round(self.a * other, 9)))
        if self.kind == "log":
            return max(2, int(math.floor(math.log(other))))
        if self.kind == "square":
            return other * other
        return other

    @property
    def theta(self) -> float | None:
        """lim n_m / n'_m implied by this rule when it generates n_m."""
        return {"theta": self.a, "log": 0.0, "square": math.inf, "same": 1.0}.get(self.kind)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "a": self.a, "b": self.b}


def _bool_power(mat, p: int) -> np.ndarray:
    """Support of ``mat**p`` by repeated squaring (no integer overflow)."""
    base = (np.asarray(mat) != 0).astype(np.int64)
    out = np.eye(len(base), dtype=np.int64)
    while p:
        if p & 1:
            out = np.minimum(out @ base, 1)
        base = np.minimum(base @ base, 1)
        p >>= 1
    return out > 0


def _as_matrix(mat) -> np.ndarray:
    return np.asarray(mat, dtype=np.int8)


@dataclass(frozen=True, eq=False)
class CoupledFamily:
    """Two wells glued by green transitions, with tightening block constraints.

    Parameters
    ----------
    base : SubshiftSpec
        M0 on the full alphabet.
    alpha, delta : tuple
        Partition of ``base.symbols``.
    a_prime, d_prime : array_like
        Sub-matrices of A and D constraining block prefixes.
    potential : Potential
        Potential on the base subshift.
    mode : {"thm1.2", "thm2.1"}
    nprime_rule, n_rule : SequenceRule
        ``n'_m = nprime_rule(m)`` and ``n_m = n_rule(m, n'_m)``.
    linked_prefix : bool
        Also constrain the transition out of the eligible prefix.  This is
        the rule under which the closed-form limit constants hold.
    """

    base: SubshiftSpec
    alpha: tuple
    delta: tuple
    a_prime: np.ndarray = field(repr=False)
    d_prime: np.ndarray = field(repr=False)
    potential: Potential = field(repr=False)
    mode: str = "thm1.2"
    nprime_rule: SequenceRule = SequenceRule()
    n_rule: SequenceRule = SequenceRule("same")
    linked_prefix: bool = True

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(self.alpha))
        object.__setattr__(self, "delta", tuple(self.delta))
        object.__setattr__(self, "a_prime", _as_matrix(self.a_prime))
        object.__setattr__(self, "d_prime", _as_matrix(self.d_prime))
        if self.mode not in ("thm1.2", "thm2.1"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if set(self.alpha) & set(self.delta):
            raise ConstraintViolation("alpha and delta symbols overlap")
        if set(self.alpha) | set(self.delta) != set(self.base.symbols):
            raise ConstraintViolation("alpha and delta symbols must partition the alphabet")

    # -- component subshifts -------------------------------------------------
    @property
    def A(self) -> SubshiftSpec:
        return self.base.restrict(self.alpha)

    @property
    def D(self) -> SubshiftSpec:
        return self.base.restrict(self.delta)

    @property
    def Aprime(self) -> SubshiftSpec:
        return SubshiftSpec(self.A.symbols, self.a_prime)

    @property
    def Dprime(self) -> SubshiftSpec:
        return SubshiftSpec(self.D.symbols, self.d_prime)

    def well_of(self, symbol) -> str:
        return "A" if symbol in self._alpha_set else "D"

    @property
    def _alpha_set(self) -> frozenset:
        return frozenset(self.alpha)

    @property
    def green_edges(self) -> list[tuple]:
        """Transitions of M0 that switch wells, as (from, to) symbol pairs."""
        out = []
        for a in self.base.symbols:
            for b in self.base.successors(a):
                if self.well_of(a) != self.well_of(b):
                    out.append((a, b))
        return out

    def entry_symbols(self, well: str) -> list:
        return sorted({b for a, b in self.green_edges if self.well_of(b) == well}, key=self.base.index)

    def exit_symbols(self, well: str) -> list:
        return sorted({a for a, b in self.green_edges if self.well_of(a) == well}, key=self.base.index)

    def sequence(self, m: int) -> tuple[int, int]:
        """(n_m, n'_m)."""
        nprime = self.nprime_rule(m)
        return self.n_rule(m, nprime), nprime

    @property
    def theta(self) -> float | None:
        return self.n_rule.theta

    # -- validation -----------------------------------------------------------
    def validate(self, ms: Sequence[int] = ()) -> None:
        """Check the structural hypotheses; raise ConstraintViolation."""
        A, D = self.A.transitions, self.D.transitions
        if self.a_prime.shape != A.shape or self.d_prime.shape != D.shape:
            raise ConstraintViolation("A' and D' must have the shapes of A and D")
        if np.any(self.a_prime > A) or np.any(self.d_prime > D):
            raise ConstraintViolation("A' <= A and D' <= D must hold entrywise")
        for well in ("A", "D"):
            if not self.exit_symbols(well) or not self.entry_symbols(well):
                raise ConstraintViolation(f"well {well} has no green transition in or out")
        if self.mode == "thm1.2":
            if self.a_prime.sum() >= A.sum() or self.d_prime.sum() >= D.sum():
                raise ConstraintViolation("A' and D' need strictly fewer transitions than A and D")
            for well, sub in (("A", self.Aprime), ("D", self.Dprime)):
                for s in self.entry_symbols(well):
                    if not sub.transitions[sub.index(s)].any():
                        raise ConstraintViolation(
                            f"entry symbol {s} has an all-zero row in {well}'"
                        )
        else:
            if not (np.array_equal(self.a_prime, A) and np.array_equal(self.d_prime, D)):
                raise ConstraintViolation("mode thm2.1 requires A' = A and D' = D")
            if ms:
                n1, np1 = self.sequence(min(ms))
                for mat, p, name in ((A, n1, "A"), (D, np1, "D")):
                    if not _bool_power(mat, p).all():
                        raise ConstraintViolation(f"{name}^{p} is not strictly positive")
        for well, spec in (("A", self.A), ("D", self.D)):
            diag = validate_sft(spec)
            if not diag.recurrent_core:
                raise ConstraintViolation(f"well {well} has an empty recurrent core")
            if not diag.irreducible or diag.period != 1:
                raise ConstraintViolation(f"well {well} is not irreducible and aperiodic")
        pa = self.component_pressure("A")
        pd = self.component_pressure("D")
        if abs(pa - pd) > PRESSURE_MATCH_TOL:
            raise ConstraintViolation(f"well pressures differ: {pa} vs {pd}")
        if ms:
            seq = [self.sequence(m) for m in sorted(ms)]
            if any(min(p) < 2 for p in seq):
                raise ConstraintViolation("block lengths n_m, n'_m must be >= 2")
            for (n0, p0), (n1, p1) in zip(seq, seq[1:]):
                if not (n1 > n0 and p1 > p0):
                    # the log rule may stall for small m; that only affects
                    # theta = 0 sweeps, which are report-only
                    if self.n_rule.kind != "log" or not p1 > p0:
                        raise ConstraintViolation("sequences must be strictly increasing")

    def component_pressure(self, well: str, prime: bool = False) -> float:
        spec = {
            ("A", False): self.A,
            ("D", False): self.D,
            ("A", True): self.Aprime,
            ("D", True): self.Dprime,
        }[(well, prime)]
        from ..sft import live_states

        live = live_states(spec.transitions)
        spec = spec.restrict([s for s, ok in zip(spec.symbols, live) if ok])
        op = build_transfer_matrix(spec, self.potential.restricted(spec.symbols))
        return perron(op).pressure


# ---------------------------------------------------------------------------
# standard families


def six_symbol_family(
    n_rule: SequenceRule = SequenceRule("same"),
    nprime_rule: SequenceRule = SequenceRule(),
    potential: Potential | None = None,
    linked_prefix: bool = True,
) -> CoupledFamily:
    """Six-symbol example: A = D = [[1,1,1],[0,0,0],[1,1,1]] with the single
    green transitions a2->d4 and d5->a3, and A' = D' = [[1,0,0],[0,0,0],[1,0,0]].
    """
    symbols = ["a1", "a2", "a3", "d4", "d5", "d6"]
    m0 = np.array(
        [
            [1, 1, 1, 0, 0, 0],
            [0, 0, 0, 1, 0, 0],
            [1, 1, 1, 0, 0, 0],
            [0, 0, 0, 1, 1, 1],
            [0, 0, 1, 0, 0, 0],
            [0, 0, 0, 1, 1, 1],
        ]
    )
    base = SubshiftSpec(symbols, m0)
    prime = [[1, 0, 0], [0, 0, 0], [1, 0, 0]]
    pot = potential if potential is not None else Potential.zero(base)
    return CoupledFamily(
        base, symbols[:3], symbols[3:], prime, prime, pot, "thm1.2", nprime_rule, n_rule, linked_prefix
    )


def toy_family(
    mode: str = "thm2.1",
    n_rule: SequenceRule = SequenceRule("same"),
    nprime_rule: SequenceRule = SequenceRule(),
    potential: Potential | None = None,
    linked_prefix: bool = True,
    gluing: str = "sparse",
) -> CoupledFamily:
    """Two full 2-shifts {a1, a2} and {d1, d2}.

    ``gluing="sparse"`` allows only a2->d1 and d2->a1 between the wells;
    ``gluing="full"`` allows every transition (M0 is the full 4-shift).
    In ``thm1.2`` mode A' = D' = [[1,0],[1,0]] (zero entropy); in ``thm2.1``
    mode A' = A and D' = D.
    """
    symbols = ["a1", "a2", "d1", "d2"]
    if gluing == "sparse":
        m0 = np.array([[1, 1, 0, 0], [1, 1, 1, 0], [0, 0, 1, 1], [1, 0, 1, 1]])
    elif gluing == "full":
        m0 = np.ones((4, 4), dtype=np.int8)
    else:
        raise ValueError(f"unknown gluing {gluing!r}")
    base = SubshiftSpec(symbols, m0)
    full = np.ones((2, 2), dtype=np.int8)
    prime = full if mode == "thm2.1" else np.array([[1, 0], [1, 0]])
    pot = potential if potential is not None else Potential.zero(base)
    return CoupledFamily(
        base, symbols[:2], symbols[2:], prime, prime, pot, mode, nprime_rule, n_rule, linked_prefix
    )


# ---------------------------------------------------------------------------
# forbidden-word scanner (independent of the automaton)


def split_runs(family: CoupledFamily, word: Sequence) -> list[tuple[str, tuple]]:
    """Maximal single-well runs of ``word`` as (well, symbols) pairs."""
    runs: list[tuple[str, list]] = []
    for s in word:
        w = family.well_of(s)
        if runs and runs[-1][0] == w:
            runs[-1][1].append(s)
        else:
            runs.append((w, [s]))
    return [(w, tuple(r)) for w, r in runs]


def _block_ok(family: CoupledFamily, well: str, run: tuple, n: int, nprime: int, closed: bool) -> bool:
    cap = n if well == "A" else nprime
    sub = family.Aprime if well == "A" else family.Dprime
    if closed and len(run) < cap:
        return False
    return is_admissible(sub, run[: cap if family.linked_prefix else cap - 1])


def passes_scan(family: CoupledFamily, word: Sequence, n: int, nprime: int) -> bool:
    """True iff ``word`` is M0-admissible and every closed block obeys the
    length and prefix-eligibility constraints for ``(n_m, n'_m) = (n, nprime)``.

    Runs touching either end of the word are not closed and are unconstrained.
    """
    if not is_admissible(family.base, word):
        return False
    runs = split_runs(family, word)
    return all(
        _block_ok(family, well, run, n, nprime, closed=True)
        for well, run in runs[1:-1]
    )


def in_core_language(family: CoupledFamily, word: Sequence, n: int, nprime: int) -> bool:
    """Language of the recurrent core: the scanner plus the constraint that a
    final run entered inside the word already respects its eligible prefix."""
    if not passes_scan(family, word, n, nprime):
        return False
    runs = split_runs(family, word)
    if len(runs) >= 2:
        well, run = runs[-1]
        return _block_ok(family, well, run, n, nprime, closed=False)
    return True
