"""First-return operator on the green cylinders.

With ``X = e^{-s} W`` the weighted block graph of the automaton, ``G`` the
block states sitting on a green transition and ``R`` the rest, a return
excursion is ``G -> R* -> G``.  Summing over all return times gives

    Q   = X_GG + X_GR (I - X_RR)^{-1} X_RG
    Q_1 = X_GG + X_GR ((I - X_RR)^{-1} + (I - X_RR)^{-2}) X_RG

where ``Q_1`` weights each excursion by its length.  The induced transfer
operator is ``Q.T`` in the convention of :mod:`coupledsft.transfer`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg
from scipy.optimize import brentq
from scipy.sparse import csr_matrix, identity
from scipy.sparse.linalg import splu

from ..sft import strong_classes
from ..transfer import (
    CylinderMass,
    Potential,
    TransferOperatorMatrix,
    _class_radius,
    _propagate,
    perron,
)
from .automaton import AutomatonSFT, automaton_operator

__all__ = [
    "DivergenceError",
    "InconsistencyError",
    "InducedBuilder",
    "InducedOperator",
    "InducedSpectral",
    "induced_operator",
    "induced_spectral",
    "return_split",
    "pressure_by_induction",
    "global_cylinder_mass",
    "truncated_series",
    "reconstruct",
    "GlobalReconstruction",
    "mean_return_time",
    "green_cylinder_groups",
    "distortion_ratios",
]


class DivergenceError(ArithmeticError):
    pass


class InconsistencyError(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class InducedOperator:
    builder: "InducedBuilder" = field(repr=False)
    s: float
    Q: np.ndarray = field(repr=False)
    Q1: np.ndarray = field(repr=False)
    Y: np.ndarray = field(repr=False)  # (I - X_RR)^{-1} X_RG
    Yt: np.ndarray = field(repr=False)  # X_GR (I - X_RR)^{-1}, as |G| x |R|

    @property
    def green(self) -> np.ndarray:
        return self.builder.green

    @property
    def sides(self) -> np.ndarray:
        """'A' for green states in the alpha well ([alpha_j delta_l]), else 'D'."""
        return self.builder.sides

    @property
    def labels(self) -> list:
        op = self.builder.op
        return [op.states[i] for i in self.green]

    @property
    def words(self) -> list:
        op = self.builder.op
        return [op.words[i] for i in self.green]

    @property
    def transfer(self) -> np.ndarray:
        """Matrix of the induced transfer operator: (L f)(x) = sum_y Q[y, x] f(y)."""
        return self.Q.T


class InducedBuilder:
    """Partition and within-well data of one automaton, reusable across ``s``."""

    def __init__(self, aut: AutomatonSFT, potential: Potential | None = None):
        pot = potential if potential is not None else aut.family.potential
        self.aut = aut
        self.potential = pot
        self.op: TransferOperatorMatrix = automaton_operator(aut, pot, depth=max(pot.depth, 2))
        fam = aut.family
        words = self.op.words
        is_green = np.array([fam.well_of(w[0]) != fam.well_of(w[1]) for w in words])
        self.green = np.flatnonzero(is_green)
        self.rest = np.flatnonzero(~is_green)
        self.sides = np.array([fam.well_of(words[i][0]) for i in self.green])
        W = self.op.matrix.tocsr()
        self.W_GG = W[self.green][:, self.green].toarray()
        self.W_GR = W[self.green][:, self.rest].tocsr()
        self.W_RG = W[self.rest][:, self.green].tocsr()
        self.W_RR = W[self.rest][:, self.rest].tocsc()
        self._rest_classes = strong_classes(self.W_RR.tocsr())
        radii = [_class_radius(self.W_RR.tocsr(), c, 1e-14, 500) for c in self._rest_classes]
        self.rest_radii = radii
        self.log_rest_radius = math.log(max(radii)) if radii and max(radii) > 0 else -math.inf

    def _check_convergent(self, s: float) -> None:
        for c, r in zip(self._rest_classes, self.rest_radii):
            if r > 0 and math.log(r) >= s:
                wells = {self.aut.family.well_of(self.op.words[self.rest[i]][0]) for i in c}
                raise DivergenceError(
                    f"return series diverges at s={s!r}: well {'/'.join(sorted(wells))} "
                    f"has pressure {math.log(r)!r} >= s"
                )

    def at(self, s: float, moments: bool = True) -> InducedOperator:
        self._check_convergent(s)
        scale = math.exp(-s)
        n_r = len(self.rest)
        lu = splu((identity(n_r, format="csc") - scale * self.W_RR).tocsc())
        x_rg = scale * self.W_RG.toarray()
        x_gr = scale * self.W_GR.toarray()
        Y = lu.solve(x_rg) if n_r else np.zeros((0, len(self.green)))
        Q = scale * self.W_GG + x_gr @ Y
        if moments:
            Z = lu.solve(Y) if n_r else Y
            Q1 = scale * self.W_GG + x_gr @ (Y + Z)
            Yt = lu.solve(x_gr.T, trans="T").T if n_r else x_gr
        else:
            Q1 = Yt = None
        return InducedOperator(self, s, Q, Q1, Y, Yt)


def induced_operator(aut: AutomatonSFT, P_m: float, potential: Potential | None = None) -> InducedOperator:
    return InducedBuilder(aut, potential).at(P_m)


def truncated_series(ind: InducedOperator, terms: int = 200) -> np.ndarray:
    """Q summed term by term over return times up to ``terms`` steps."""
    b = ind.builder
    scale = math.exp(-ind.s)
    x_rr = (scale * b.W_RR).tocsr()
    v = scale * b.W_RG.toarray()
    acc = np.zeros_like(v)
    for _ in range(terms):
        acc += v
        v = x_rr @ v
    return scale * b.W_GG + (scale * b.W_GR.toarray()) @ acc


def _radius(Q: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(Q))))


@dataclass(frozen=True, eq=False)
class InducedSpectral:
    """Local equilibrium data: ``nu`` (sum 1), ``H`` (nu . H = 1), ``mu = H nu``."""

    ind: InducedOperator = field(repr=False)
    eigenvalue: float
    nu: np.ndarray
    H: np.ndarray
    mu: np.ndarray


def _perron_dense(Q: np.ndarray, left: bool) -> tuple[float, np.ndarray]:
    mat = Q.T if left else Q
    vals, vecs = scipy.linalg.eig(mat)
    i = int(np.argmax(vals.real))
    v = np.real(vecs[:, i])
    v = v / v.sum()
    return float(vals[i].real), v


def induced_spectral(ind: InducedOperator, tol: float = 1e-6) -> InducedSpectral:
    lam, nu = _perron_dense(ind.Q, left=False)
    lam_l, h = _perron_dense(ind.Q, left=True)
    if abs(lam - 1.0) > tol:
        raise InconsistencyError(
            f"induced operator has leading eigenvalue {lam!r}, not 1: "
            "the pressure and the induced scheme disagree"
        )
    nu = np.clip(nu, 0.0, None)
    h = np.clip(h, 0.0, None)
    h = h / float(h @ nu)
    return InducedSpectral(ind, lam, nu, h, h * nu)


def return_split(spec: InducedSpectral) -> tuple[float, float, float, float]:
    """(E_DA, E_AD, mass_A, mass_D).

    ``E_DA`` integrates the return time over green states in the delta well
    (their excursion runs through the alpha well); it is exactly the alpha-time
    per return cycle, hence the mass split.
    """
    ind = spec.ind
    per_state = spec.H * (ind.Q1 @ spec.nu)
    e_da = float(per_state[ind.sides == "D"].sum())
    e_ad = float(per_state[ind.sides == "A"].sum())
    total = e_da + e_ad
    assert total > 0 and e_da > 0 and e_ad > 0, "a well is unreachable"
    mass_a = e_da / total
    return e_da, e_ad, mass_a, 1.0 - mass_a


def mean_return_time(spec: InducedSpectral) -> float:
    return float(spec.H @ (spec.ind.Q1 @ spec.nu))


def pressure_by_induction(builder: InducedBuilder, upper: float | None = None) -> float:
    """The ``s`` at which the induced operator has spectral radius 1.

    ``log rho(Q(s))`` decreases from +inf at the within-well pressure to
    -inf, and may underflow far above the root, so the bracket is found by
    halving towards the within-well pressure.
    """

    def f(s):
        r = _radius(builder.at(s, moments=False).Q)
        return math.log(r) if r > 0 else -math.inf

    top = upper if upper is not None else _base_pressure(builder) + 1e-9
    floor = builder.log_rest_radius
    if not math.isfinite(floor):
        floor = top - 1.0
    while f(top) > 0:
        top += 1.0
    hi, f_hi = top, f(top)
    gap = top - floor
    while True:
        gap /= 2
        if gap < 1e-300:
            raise DivergenceError("could not bracket the induced pressure")
        s = floor + gap
        val = f(s)
        if val > 0:
            lo = s
            break
        hi, f_hi = s, val
    while not math.isfinite(f_hi):
        mid = 0.5 * (lo + hi)
        val = f(mid)
        if val > 0:
            lo = mid
        else:
            hi, f_hi = mid, val
    return brentq(f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


def _base_pressure(builder: InducedBuilder) -> float:
    from ..transfer import build_transfer_matrix

    fam = builder.aut.family
    return perron(build_transfer_matrix(fam.base, builder.potential)).pressure


@dataclass(frozen=True, eq=False)
class GlobalReconstruction:
    """Global equilibrium state rebuilt from the local one.

    ``H_ext`` and ``nu_ext`` extend H_m and nu_m to every block state by
    unrolling return excursions; ``scale`` is ``mu_hat(G) = 1 / int r dmu``.
    """

    spec: InducedSpectral = field(repr=False)
    H_ext: np.ndarray = field(repr=False)
    nu_ext: np.ndarray = field(repr=False)
    scale: float

    @property
    def stationary(self) -> np.ndarray:
        return self.scale * self.H_ext * self.nu_ext


def reconstruct(spec: InducedSpectral) -> GlobalReconstruction:
    ind = spec.ind
    b = ind.builder
    n = b.op.size
    h = np.zeros(n)
    nu = np.zeros(n)
    h[b.green] = spec.H
    nu[b.green] = spec.nu
    nu[b.rest] = ind.Y @ spec.nu
    h[b.rest] = spec.H @ ind.Yt
    return GlobalReconstruction(spec, h, nu, 1.0 / mean_return_time(spec))


def global_cylinder_mass(rec: GlobalReconstruction, word: Sequence) -> CylinderMass:
    """mu_hat_m([word]) from the local equilibrium; empty word gives 1."""
    if len(word) == 0:
        return CylinderMass(float(rec.stationary.sum()), True)
    op = rec.spec.ind.builder.op
    ones = np.ones(op.size)
    pattern = (op.matrix != 0).astype(float)
    if _propagate(op, ones, pattern, ones, word) == 0.0:
        return CylinderMass(0.0, False)
    step = math.exp(-rec.spec.ind.s) * op.matrix
    mass = _propagate(op, rec.scale * rec.H_ext, step, rec.nu_ext, word)
    return CylinderMass(mass, True)


def distortion_ratios(ind: InducedOperator, kmax: int = 4) -> list[float]:
    """max/min of L^k 1 over states of one green 2-cylinder, k = 1..kmax."""
    words = ind.words
    groups: dict[tuple, list[int]] = {}
    for i, w in enumerate(words):
        groups.setdefault(w[:2], []).append(i)
    L = ind.transfer
    f = np.ones(len(words))
    out = []
    for _ in range(kmax):
        f = L @ f
        worst = 1.0
        for idx in groups.values():
            vals = f[idx]
            worst = max(worst, float(vals.max() / vals.min()))
        out.append(worst)
    return out


def green_cylinder_groups(ind: InducedOperator) -> dict[tuple, list[int]]:
    groups: dict[tuple, list[int]] = {}
    for i, w in enumerate(ind.words):
        groups.setdefault(w[:2], []).append(i)
    return groups
