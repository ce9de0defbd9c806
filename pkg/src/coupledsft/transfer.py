"""Transfer operators of locally constant potentials and their Perron data.

States are k-block words.  For a potential of depth k the weighted matrix is

    W[u, v] = exp(phi(u)) * M_k[u, v]

and the transfer operator acts on functions of the state by
``(L g)(v) = sum_u W[u, v] g(u)``, i.e. ``L = W.T``.  With this convention
the eigenfunction ``H`` (``L H = e^P H``) is a *left* eigenvector of ``W``
and the conformal measure ``nu`` (``L* nu = e^P nu``, masses of k-cylinders)
is a *right* eigenvector of ``W``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, NamedTuple, Sequence

import numpy as np
import scipy.linalg
from scipy.sparse import csr_matrix, identity, issparse
from scipy.sparse.linalg import splu
from scipy.sparse.csgraph import breadth_first_order

from .sft import (
    SubshiftSpec,
    WordMetricParams,
    class_period,
    higher_block,
    is_admissible,
    strong_classes,
)

__all__ = [
    "Potential",
    "TransferOperatorMatrix",
    "SpectralData",
    "GibbsMeasure",
    "CylinderMass",
    "ConvergenceError",
    "PeriodicityError",
    "DegenerateSpectrumError",
    "build_transfer_matrix",
    "perron",
    "spectral_radius",
    "gibbs_measure",
    "gibbs_cylinder",
    "conformal_cylinder",
    "conformality_residual",
    "spectral_diagnostics",
    "ExtendedOperator",
    "extend_operator",
    "parse_potential",
    "spectral_csv",
]

DENSE_LIMIT = 1500
NO_GAP_TOL = 1e-9


class ConvergenceError(RuntimeError):
    """Perron iteration did not converge; carries the best iterate."""

    def __init__(self, msg, iterate=None, residual=None):
        super().__init__(msg)
        self.iterate = iterate
        self.residual = residual


class PeriodicityError(ValueError):
    pass


class DegenerateSpectrumError(ValueError):
    pass


@dataclass(frozen=True)
class Potential:
    """Locally constant potential: value on every admissible k-word.

    ``truncation_error`` bounds ``|phi - phi_k|`` when this is the depth-k
    truncation of a Lipschitz potential (``C_phi * base ** -k``); it is 0 for
    exactly locally constant data and is carried into pressure error bars.
    """

    depth: int
    weights: Mapping[tuple, float]
    lipschitz_constant: float = 0.0
    truncation_error: float = 0.0

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("potential depth must be >= 1")
        w = {}
        for key, val in self.weights.items():
            key = tuple(key) if isinstance(key, tuple) else (key,)
            if len(key) != self.depth:
                raise ValueError(f"word {key} does not have length {self.depth}")
            if not math.isfinite(val):
                raise ValueError(f"non-finite potential value on {key}")
            w[key] = float(val)
        object.__setattr__(self, "weights", w)

    def __call__(self, word: Sequence) -> float:
        return self.weights[tuple(word[: self.depth])]

    @classmethod
    def zero(cls, spec: SubshiftSpec, depth: int = 1) -> "Potential":
        from .sft import cylinders

        return cls(depth, {w: 0.0 for w in cylinders(spec, depth)})

    @classmethod
    def from_function(
        cls,
        spec: SubshiftSpec,
        depth: int,
        func: Callable[[tuple], float],
        lipschitz_constant: float = 0.0,
        truncated: bool = False,
        metric: WordMetricParams = WordMetricParams(),
    ) -> "Potential":
        from .sft import cylinders

        err = lipschitz_constant * metric.base ** (-depth) if truncated else 0.0
        return cls(
            depth,
            {w: func(w) for w in cylinders(spec, depth)},
            lipschitz_constant,
            err,
        )

    def restricted(self, symbols) -> "Potential":
        keep = set(symbols)
        return Potential(
            self.depth,
            {w: v for w, v in self.weights.items() if set(w) <= keep},
            self.lipschitz_constant,
            self.truncation_error,
        )

    def check_covers(self, spec: SubshiftSpec) -> None:
        from .sft import cylinders

        missing = [w for w in cylinders(spec, self.depth) if w not in self.weights]
        if missing:
            raise ValueError(f"potential has no value on {missing[:5]}")


@dataclass(frozen=True, eq=False)
class TransferOperatorMatrix:
    """Weighted state graph realizing a transfer operator.

    ``words[i]`` is the tuple of base symbols read from state ``i`` (its
    k-block; for an automaton state, its projected block).  ``symbol[i]`` is
    ``words[i][0]``.
    """

    states: tuple
    words: tuple
    matrix: csr_matrix = field(repr=False)
    depth: int = 1

    @property
    def size(self) -> int:
        return len(self.states)

    def apply(self, g: np.ndarray) -> np.ndarray:
        """(L g)(v) = sum_u W[u, v] g(u)."""
        return self.matrix.T @ g

    def dual(self, nu: np.ndarray) -> np.ndarray:
        return self.matrix @ nu

    def symbols(self) -> list:
        return [w[0] for w in self.words]

    def pattern(self) -> SubshiftSpec:
        return SubshiftSpec(self.states, (self.matrix.toarray() != 0).astype(np.int8))


def build_transfer_matrix(spec: SubshiftSpec, potential: Potential) -> TransferOperatorMatrix:
    k = potential.depth
    block = higher_block(spec, k)
    words = tuple(w if k > 1 else (w,) for w in block.symbols)
    potential.check_covers(spec)
    weights = np.array([math.exp(potential(w)) for w in words])
    mat = csr_matrix(block.transitions.astype(float) * weights[:, None])
    return TransferOperatorMatrix(tuple(block.symbols), words, mat, k)


@dataclass(frozen=True, eq=False)
class SpectralData:
    """Perron data of one transfer operator.

    ``conformal`` is a probability vector on states, ``eigenfunction`` is
    scaled so that ``sum(conformal * eigenfunction) == 1``.  ``gap`` is
    ``log(rho / |lambda_2|)`` or ``None`` when no reliable gap exists.
    """

    op: TransferOperatorMatrix = field(repr=False)
    pressure: float
    conformal: np.ndarray = field(repr=False)
    eigenfunction: np.ndarray = field(repr=False)
    gap: float | None
    residual: float
    core: np.ndarray = field(repr=False)

    @property
    def radius(self) -> float:
        return math.exp(self.pressure)

    def integrate(self, g: np.ndarray) -> float:
        return float(np.dot(g, self.conformal))


def _as_csr(mat) -> csr_matrix:
    return mat.tocsr() if issparse(mat) else csr_matrix(np.asarray(mat, dtype=float))


def _shift_solve(mat: csr_matrix, sigma: float, rhs: np.ndarray, transpose=False) -> np.ndarray:
    n = mat.shape[0]
    if n <= DENSE_LIMIT:
        a = sigma * np.eye(n) - mat.toarray()
        return scipy.linalg.solve(a.T if transpose else a, rhs)
    a = (sigma * identity(n, format="csc") - mat.tocsc())
    if transpose:
        a = a.T.tocsc()
    return splu(a).solve(rhs)


def _cw_perron(block: csr_matrix, tol: float, max_iter: int, transpose=False):
    """Perron root and positive vector of an irreducible nonnegative block.

    Inverse iteration whose shift always sits above the Collatz-Wielandt
    upper bound, so every solve is against a nonsingular M-matrix and the
    iterate stays positive.  Returns (rho, vector, lo, hi).
    """
    mat = block.T.tocsr() if transpose else block
    x = np.ones(mat.shape[0])
    lo = hi = 0.0
    for _ in range(max_iter):
        y = mat @ x
        r = y / x
        lo, hi = float(r.min()), float(r.max())
        if hi - lo <= tol * hi:
            break
        sigma = hi + max(hi - lo, 4 * np.finfo(float).eps * hi)
        z = _shift_solve(mat, sigma, x)
        if not np.all(z > 0):
            z = np.abs(z)
        x = z / z.max()
    else:
        raise ConvergenceError(
            "Perron iteration did not converge", iterate=x, residual=hi - lo
        )
    return 0.5 * (lo + hi), x, lo, hi


def _class_radius(mat: csr_matrix, members: np.ndarray, tol: float, max_iter: int) -> float:
    block = mat[members][:, members]
    if len(members) <= 400:
        return float(np.max(np.abs(np.linalg.eigvals(block.toarray()))))
    return _cw_perron(block, tol, max_iter)[0]


def _reach(mat: csr_matrix, sources: np.ndarray) -> np.ndarray:
    seen = np.zeros(mat.shape[0], dtype=bool)
    for s in sources:
        if not seen[s]:
            seen[breadth_first_order(mat, int(s), directed=True, return_predecessors=False)] = True
    return seen


def spectral_radius(mat, tol: float = 1e-13, max_iter: int = 200) -> float:
    """Largest class radius of a nonnegative matrix (0 if nilpotent)."""
    mat = _as_csr(mat)
    radii = [_class_radius(mat, c, tol, max_iter) for c in strong_classes(mat)]
    return max(radii, default=0.0)


def _second_modulus(mat: csr_matrix, rho: float) -> float | None:
    if mat.shape[0] > DENSE_LIMIT:
        return None
    ev = np.sort(np.abs(np.linalg.eigvals(mat.toarray())))[::-1]
    if len(ev) < 2:
        return 0.0
    # drop the Perron root itself
    idx = int(np.argmin(np.abs(ev - rho)))
    rest = np.delete(ev, idx)
    return float(rest[0])


def perron(op: TransferOperatorMatrix, tol: float = 1e-12, max_iter: int = 10**6) -> SpectralData:
    """Pressure, conformal measure, eigenfunction and gap of ``op``.

    The dominant class must be unique and aperiodic.  Vectors on states
    upstream (for ``nu``) or downstream (for ``H``) of that class are filled
    in by solving the eigen-equations there, so transient symbols such as
    successor-free letters get their extended values.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    mat = _as_csr(op.matrix)
    classes = strong_classes(mat)
    if not classes:
        raise ValueError("recurrent core is empty")
    inner_tol = min(tol, 1e-13)
    iters = min(max_iter, 500)
    radii = np.array([_class_radius(mat, c, inner_tol, iters) for c in classes])
    order = np.argsort(radii)[::-1]
    core = classes[order[0]]
    if len(classes) > 1 and radii[order[1]] >= radii[order[0]] * (1 - 1e-9):
        raise DegenerateSpectrumError("two classes share the maximal spectral radius")
    period = class_period(mat, core)
    if period > 1:
        raise PeriodicityError(
            f"dominant class has period {period}; recode to an aperiodic presentation"
        )
    block = mat[core][:, core]
    rho_r, right, _, _ = _cw_perron(block, inner_tol, iters)
    rho_l, left, _, _ = _cw_perron(block, inner_tol, iters, transpose=True)
    rho = float(left @ (block @ right)) / float(left @ right)

    n = mat.shape[0]
    nu = np.zeros(n)
    h = np.zeros(n)
    nu[core] = right
    h[core] = left
    in_core = np.zeros(n, dtype=bool)
    in_core[core] = True
    upstream = _reach(mat.T.tocsr(), core) & ~in_core
    downstream = _reach(mat, core) & ~in_core
    if upstream.any():
        up = np.flatnonzero(upstream)
        sub = mat[up][:, up]
        rhs = mat[up][:, core] @ right
        nu[up] = _shift_solve(sub, rho, rhs)
    if downstream.any():
        dn = np.flatnonzero(downstream)
        sub = mat[dn][:, dn]
        rhs = mat[core][:, dn].T @ left
        h[dn] = _shift_solve(sub, rho, rhs, transpose=True)
    nu = np.clip(nu, 0.0, None)
    h = np.clip(h, 0.0, None)
    nu /= nu.sum()
    h /= float(nu @ h)

    resid = float(np.max(np.abs(mat.T @ h - rho * h)) / np.max(np.abs(h)))
    if resid > max(100 * tol, 1e-10):
        raise ConvergenceError("eigenfunction residual too large", iterate=h, residual=resid)
    second = _second_modulus(mat, rho)
    if second is None or second >= rho * (1 - NO_GAP_TOL):
        gap = None
    elif second == 0.0:
        gap = math.inf
    else:
        gap = math.log(rho / second)
    return SpectralData(op, math.log(rho), nu, h, gap, resid, core)


@dataclass(frozen=True, eq=False)
class GibbsMeasure:
    """Equilibrium state as a stationary Markov chain on states.

    ``kernel[u, v] = W[u, v] nu_v / (e^P nu_u)`` and ``stationary = nu * H``.
    """

    spectral: SpectralData = field(repr=False)
    kernel: csr_matrix = field(repr=False)
    stationary: np.ndarray = field(repr=False)


def gibbs_measure(s: SpectralData) -> GibbsMeasure:
    mat = _as_csr(s.op.matrix)
    nu = s.conformal
    rho = s.radius
    inv = np.where(nu > 0, 1.0 / np.where(nu > 0, nu, 1.0), 0.0)
    from scipy.sparse import diags

    kernel = (diags(inv / rho) @ mat @ diags(nu)).tocsr()
    return GibbsMeasure(s, kernel, nu * s.eigenfunction)


class CylinderMass(NamedTuple):
    mass: float
    admissible: bool


def _propagate(op: TransferOperatorMatrix, start: np.ndarray, step: csr_matrix, end: np.ndarray, word) -> float:
    """Sum over state paths reading ``word`` of start * prod(step) * end."""
    k = op.depth
    words = op.words
    word = tuple(word)
    n = len(word)
    if n <= k:
        mask = np.array([w[:n] == word for w in words])
        return float(np.dot(start * mask, end))
    masks = [np.array([w == word[i : i + k] for w in words]) for i in range(n - k + 1)]
    v = start * masks[0]
    step_t = step.T.tocsr()
    for m in masks[1:]:
        v = (step_t @ v) * m
    return float(np.dot(v, end))


def gibbs_cylinder(g: GibbsMeasure, word: Sequence) -> CylinderMass:
    """Equilibrium mass of ``[word]``; inadmissible words give ``(0.0, False)``."""
    op = g.spectral.op
    if not word:
        return CylinderMass(0.0, False)
    ones = np.ones(op.size)
    pattern = (_as_csr(op.matrix) != 0).astype(float)
    if _propagate(op, ones, pattern, ones, word) == 0.0:
        return CylinderMass(0.0, False)
    return CylinderMass(_propagate(op, g.stationary, g.kernel, ones, word), True)


def conformal_cylinder(s: SpectralData, word: Sequence) -> float:
    """nu([word]) from the eigenmeasure on states and the kernel chain."""
    g = gibbs_measure(s)
    return _propagate(s.op, s.conformal, g.kernel, np.ones(s.op.size), word)


def conformality_residual(s: SpectralData, word: Sequence) -> float:
    """``|nu[C] - e^{-P} int_{T[C]} e^{phi(T^{-1} .)} dnu|`` for one cylinder.

    ``T[C]`` is the set of points ``x`` beginning with ``word[1:]`` such that
    ``word[0] x`` is admissible; the potential is read on the block
    ``word[:k]`` which fixes ``phi(T^{-1} x)``.
    """
    op = s.op
    k = op.depth
    word = tuple(word)
    if len(word) < k:
        raise ValueError("cylinder must be at least as long as the potential depth")
    try:
        u0 = op.words.index(word[:k])
    except ValueError:
        raise ValueError(f"{word} is not admissible") from None
    lhs = conformal_cylinder(s, word)
    row = _as_csr(op.matrix)[u0]
    if row.nnz == 0:
        return lhs
    weight = float(row.data[0])  # e^{phi(u0)}, constant along the row
    tail = word[1:]
    if len(tail) >= k:
        # T[C] is empty unless the operator links word[:k] to word[1:k+1]
        linked = any(op.words[j] == tail[:k] for j in row.indices)
        total = conformal_cylinder(s, tail) if linked else 0.0
    else:
        # T[C] is the union of the successor states of u0
        total = float(s.conformal[row.indices].sum())
    rhs = math.exp(-s.pressure) * weight * total
    return abs(lhs - rhs)


def spectral_diagnostics(op: TransferOperatorMatrix, s: SpectralData, g: np.ndarray, n: int):
    """Cesaro error of the eigenfunction limit and remainder norms.

    Returns ``(cesaro_error, remainder_norms)`` with
    ``remainder_norms[k] = ||e^{-kP} L^k g - (int g dnu) H||_inf``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rho = s.radius
    h = s.eigenfunction
    g = np.asarray(g, dtype=float)
    coef = s.integrate(g)
    one = np.ones(op.size)
    acc = np.zeros(op.size)
    x = one.copy()
    y = g.copy()
    rem = []
    for _ in range(n):
        acc += x
        rem.append(float(np.max(np.abs(y - coef * h))))
        x = op.apply(x) / rho
        y = op.apply(y) / rho
    # Cesaro limit only makes sense on states reachable from the core
    support = h > 0
    cesaro = float(np.max(np.abs(acc[support] / n - h[support])))
    return cesaro, rem


@dataclass(frozen=True, eq=False)
class ExtendedOperator:
    """Transfer operator of a sub-shift E' acting on the ambient E states.

    ``eigenfunction`` is H~ on all ambient states; ``restricted`` is the
    Perron data computed on the E'-live states alone.
    """

    op: TransferOperatorMatrix
    spectral: SpectralData
    restricted: SpectralData
    live_states: tuple

    @property
    def eigenfunction(self) -> np.ndarray:
        return self.spectral.eigenfunction

    @property
    def conformal(self) -> np.ndarray:
        return self.spectral.conformal

    @property
    def pressure(self) -> float:
        return self.spectral.pressure

    def restriction_error(self) -> float:
        idx = [self.op.states.index(s) for s in self.live_states]
        return float(np.max(np.abs(self.eigenfunction[idx] - self.restricted.eigenfunction)))


def extend_operator(sub: SubshiftSpec, ambient: SubshiftSpec, potential: Potential, tol: float = 1e-12) -> ExtendedOperator:
    """Extend the transfer operator of ``sub`` to the ambient state space.

    Pre-images are E'-eligible into the current first symbol while the
    evaluation point is any ambient block.  H~ is the left Perron vector of
    that extended matrix; its restriction to E'-states is H_{E'}.
    """
    if sub.symbols != ambient.symbols:
        raise ValueError("sub and ambient subshifts must share the alphabet")
    if np.any(sub.transitions > ambient.transitions):
        raise ValueError("sub-shift is not dominated entrywise by the ambient one")
    k = potential.depth
    amb = build_transfer_matrix(ambient, potential)
    words = amb.words
    index = {w: i for i, w in enumerate(words)}
    rows, cols, vals = [], [], []
    for i, u in enumerate(words):
        for j in amb.matrix[i].indices:
            v = words[j]
            if sub.allowed(u[0], v[0]) if k == 1 else sub.allowed(u[0], u[1]):
                rows.append(i)
                cols.append(j)
                vals.append(math.exp(potential(u)))
    mat = csr_matrix((vals, (rows, cols)), shape=amb.matrix.shape)
    ext = TransferOperatorMatrix(amb.states, words, mat, k)
    ext_s = perron(ext, tol)

    from .sft import live_states

    live = live_states(sub.transitions)
    sub_live = sub.restrict([s for s, ok in zip(sub.symbols, live) if ok])
    sub_op = build_transfer_matrix(sub_live, potential.restricted(sub_live.symbols))
    sub_s = perron(sub_op, tol)
    live_states_ = tuple(s for s in sub_op.states if s in index or (k == 1 and s in amb.states))
    return ExtendedOperator(ext, ext_s, sub_s, live_states_)


def parse_potential(cfg: Mapping, spec: SubshiftSpec) -> Potential:
    """Potential from a config mapping.

    ``{"depth": k, "values": [[word, value], ...], "lipschitz": C,
    "default_zero": bool}``; words are lists of symbols (or a single symbol
    for depth 1).  Missing words are an error unless ``default_zero``.
    """
    from .sft import cylinders

    depth = int(cfg.get("depth", 1))
    vals = {}
    for word, value in cfg.get("values", []):
        key = tuple(word) if isinstance(word, (list, tuple)) else (word,)
        vals[key] = float(value)
    if cfg.get("default_zero", False):
        for w in cylinders(spec, depth):
            vals.setdefault(w, 0.0)
    pot = Potential(depth, vals, float(cfg.get("lipschitz", 0.0)))
    pot.check_covers(spec)
    return pot


def spectral_csv(s: SpectralData) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["state", "nu", "H"])
    for w, nu, h in zip(s.op.words, s.conformal, s.eigenfunction):
        wr.writerow(["".join(map(str, w)) if all(len(str(c)) == 1 for c in w) else "|".join(map(str, w)), repr(float(nu)), repr(float(h))])
    return buf.getvalue()
