"""Piecewise linear conjugacy that moves a fat Cantor set onto a null set.

On ``[0, 1/2]`` the two full branches of the interval map (slope ``1/(2a)``)
leave the hole ``B = [a, a']``.  The pre-images ``B_n`` of ``B`` inside
``[0, a]`` (``2**(n-1)`` intervals of length ``(1/2 - 2a)(2a)**n``) fill
``[0, a]`` up to a null set.  In ``[0, 1/4 - delta]`` we remove middle gaps
``C_n`` of length ``(1/4 - delta) beta**n``, leaving a Cantor set of
positive length.  Stage ``n`` of the conjugacy sends each ``C_j`` (j <= n)
affinely onto the order-matched ``B_j``; ``[0, 1/4 - delta]`` is mirrored onto
``[1/4 + delta, 1/2]`` and the gap ``[1/4 - delta, 1/4 + delta]`` goes to
``B`` fixing ``1/4``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "FatCantorError",
    "FatCantorParams",
    "removed_length",
    "remaining_length",
    "cantor_gaps",
    "hole_preimages",
    "Conjugacy",
    "conjugacy_stage",
    "cauchy_increments",
    "conjugated_slope",
    "c1_slope_formula",
    "check_c1_expanding",
    "cusp_image",
]


class FatCantorError(ValueError):
    pass


@dataclass(frozen=True)
class FatCantorParams:
    beta: float = 0.25
    delta: float = 0.05
    a: float = 3 / 16

    def __post_init__(self):
        # removed length beta / (1 - 2 beta) must stay below 1
        if not 0 < self.beta < 1 / 3:
            raise FatCantorError("need 0 < beta < 1/3")
        if not 0 < self.delta < 0.25:
            raise FatCantorError("need 0 < delta < 1/4")
        if not 0 < self.a < 0.25:
            raise FatCantorError("need 0 < a < 1/4")

    @property
    def scale(self) -> float:
        return 0.25 - self.delta


def removed_length(beta: float) -> float:
    """Total length removed from [0, 1]: ``sum 2**(n-1) beta**n``."""
    return beta / (1.0 - 2.0 * beta)


def remaining_length(beta: float, n: int) -> float:
    """Length of one of the ``2**n`` stage-n intervals, by recursion."""
    e = 1.0
    for k in range(1, n + 1):
        e = (e - beta**k) / 2.0
    return e


def cantor_gaps(beta: float, n: int, lo: float = 0.0, hi: float = 1.0) -> list[np.ndarray]:
    """Gaps removed at stages 1..n in [lo, hi]; entry k-1 is a (2**(k-1), 2) array."""
    scale = hi - lo
    pieces = np.array([[lo, hi]])
    out = []
    for k in range(1, n + 1):
        mid = pieces.mean(axis=1)
        half = 0.5 * scale * beta**k
        gaps = np.column_stack([mid - half, mid + half])
        out.append(gaps)
        pieces = np.column_stack([pieces[:, 0], gaps[:, 0], gaps[:, 1], pieces[:, 1]]).reshape(-1, 2)
    return out


def hole_preimages(a: float, n: int) -> list[np.ndarray]:
    """Pre-images ``B_1..B_n`` of the hole inside ``[0, a]``, sorted."""
    allb = np.array([[a, 0.5 - a]])  # all pre-images in [0, 1/2] at the current depth
    out = []
    for _ in range(n):
        left = 2 * a * allb
        right = (0.5 - 2 * a * allb)[:, ::-1]
        out.append(left[np.argsort(left[:, 0])])
        allb = np.vstack([left, right])
    return out


@dataclass(frozen=True, eq=False)
class Conjugacy:
    """Stage-n map as increasing nodes (x, h(x)) on [0, 1/2]."""

    params: FatCantorParams
    stage: int
    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)

    def __call__(self, t):
        return np.interp(t, self.x, self.y)

    def inverse(self, s):
        return np.interp(s, self.y, self.x)

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.x) > 0) and np.all(np.diff(self.y) > 0))


def conjugacy_stage(params: FatCantorParams, n: int) -> Conjugacy:
    p = params
    s, d, a = p.scale, p.delta, p.a
    xs = [0.0, s, 0.25, 0.25 + d, 0.5]
    ys = [0.0, a, 0.25, 0.5 - a, 0.5]
    gaps = cantor_gaps(p.beta, n, 0.0, s)
    holes = hole_preimages(a, n)
    for c, b in zip(gaps, holes):
        if len(c) != len(b):
            raise FatCantorError("gap and hole counts differ")
        for (c0, c1), (b0, b1) in zip(c, b):
            xs += [c0, c1, 0.5 - c1, 0.5 - c0]
            ys += [b0, b1, 0.5 - b1, 0.5 - b0]
    order = np.argsort(xs, kind="stable")
    x = np.asarray(xs)[order]
    y = np.asarray(ys)[order]
    h = Conjugacy(p, n, x, y)
    if not h.monotone:
        raise FatCantorError("stage map is not increasing: gap and hole orders disagree")
    return h


def cauchy_increments(params: FatCantorParams, n_max: int) -> list[tuple[float, float]]:
    """(sup |h_{n+1} - h_n|, |B_{n+1}| + |C_{n+1}|) for n = 0..n_max-1."""
    p = params
    out = []
    prev = conjugacy_stage(p, 0)
    for n in range(n_max):
        cur = conjugacy_stage(p, n + 1)
        grid = np.union1d(prev.x, cur.x)
        sup = float(np.max(np.abs(cur(grid) - prev(grid))))
        bound = (0.5 - 2 * p.a) * (2 * p.a) ** (n + 1) + p.scale * p.beta ** (n + 1)
        out.append((sup, bound))
        prev = cur
    return out


def conjugated_slope(params: FatCantorParams, n: int, stage: int | None = None) -> float:
    """Slope of ``h^-1 o T o h`` on the leftmost stage-n gap (n >= 1)."""
    p = params
    h = conjugacy_stage(p, max(n, stage or 0))
    c0, c1 = cantor_gaps(p.beta, n, 0.0, p.scale)[-1][0]
    t = np.array([c0 + 0.25 * (c1 - c0), c0 + 0.75 * (c1 - c0)])
    y = h(t) / (2 * p.a)  # increasing branch on [0, a]
    back = h.inverse(y)
    return float((back[1] - back[0]) / (t[1] - t[0]))


def c1_slope_formula(params: FatCantorParams) -> float:
    """Closed form for the slope on the first gap: ``2 delta / ((1/4 - delta) beta)``.

    The chain is ``C_1 -> B_1`` (ratio ``|B_1|/|C_1|``), the branch slope
    ``1/(2a)``, then ``B -> [1/4 - delta, 1/4 + delta]`` (ratio
    ``2 delta / (1/2 - 2a)``); the ``a``-dependence cancels.
    """
    p = params
    return 2 * p.delta / (p.scale * p.beta)


def check_c1_expanding(params: FatCantorParams) -> float:
    """Slope on ``C_1``; raises unless it exceeds 1."""
    slope = c1_slope_formula(params)
    if not slope > 1.0:
        raise FatCantorError(
            f"conjugated slope {slope:.6g} on the first gap is not expanding; "
            "increase delta or decrease beta"
        )
    return slope


def cusp_image(params: FatCantorParams, eps_prime: float, n: int = 12) -> tuple[float, float]:
    """``h_R^-1(T(h([1/4 - delta, 1/4 + delta])))`` with ``h_R = 1/2 + h(. - 1/2)``.

    ``h`` sends the gap onto ``B``, and ``T`` maps ``B`` onto
    ``[1/2, 1/2 + eps']``; the result must sit inside the first Cantor
    block ``[1/2, 3/4 - delta]`` of the right half.
    """
    h = conjugacy_stage(params, n)
    lo = 0.5 + float(h.inverse(0.0))
    hi = 0.5 + float(h.inverse(eps_prime))
    if not (0.5 <= lo <= hi <= 0.75 - params.delta):
        raise FatCantorError("cusp image leaves the right Cantor block")
    return lo, hi
