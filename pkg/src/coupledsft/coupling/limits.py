"""Limit constants of the coupled family and a cylinder distance.

Everything here is built from the Perron data of the four component
subshifts A, D, A', D' (the primed ones extended to the ambient well), and
is restricted to potentials of depth 1 so that integrals against the
pulled-back measures are finite sums over green transitions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..sft import cylinders
from ..transfer import (
    ExtendedOperator,
    Potential,
    SpectralData,
    build_transfer_matrix,
    extend_operator,
    gibbs_cylinder,
    gibbs_measure,
    perron,
)
from .family import CoupledFamily

__all__ = [
    "ComponentData",
    "component_data",
    "lambda_factors",
    "LimitConstants",
    "limit_constants",
    "bounded_regime_constants",
    "weakstar_distance",
    "component_measure",
    "limit_measure",
]


@dataclass(frozen=True, eq=False)
class ComponentData:
    """Perron data of A, D and of A', D' extended to their wells."""

    family: CoupledFamily = field(repr=False)
    A: ExtendedOperator = field(repr=False)
    D: ExtendedOperator = field(repr=False)
    Aprime: ExtendedOperator = field(repr=False)
    Dprime: ExtendedOperator = field(repr=False)

    @property
    def P(self) -> float:
        return self.A.pressure

    @property
    def P_Aprime(self) -> float:
        return self.Aprime.pressure

    @property
    def P_Dprime(self) -> float:
        return self.Dprime.pressure

    def H(self, name: str, symbol) -> float:
        ext = getattr(self, name)
        return float(ext.eigenfunction[ext.op.states.index(symbol)])

    def nu(self, name: str, symbol) -> float:
        ext = getattr(self, name)
        return float(ext.conformal[ext.op.states.index(symbol)])

    def integral(self, fn: str, measure: str) -> float:
        """int H~_fn d nu_measure over a well (both names refer to one well)."""
        f = getattr(self, fn)
        m = getattr(self, measure)
        return float(f.eigenfunction @ m.conformal)

    def pullback(self, well: str, weight: Callable[[object], float]) -> float:
        """int weight(x_0) e^phi d(pullback), over green cylinders leaving ``well``.

        For ``well == "A"`` this is the measure alpha* nu_{D'} on the cylinders
        [alpha_j delta_l]; for ``"D"`` it is delta* nu_{A'}.
        """
        fam = self.family
        target = "Dprime" if well == "A" else "Aprime"
        pot = fam.potential
        total = 0.0
        for a, b in fam.green_edges:
            if fam.well_of(a) != well:
                continue
            total += weight(a) * math.exp(pot((a,))) * self.nu(target, b)
        return total


def _well_extension(sub, ambient, potential: Potential) -> ExtendedOperator:
    return extend_operator(sub, ambient, potential.restricted(ambient.symbols))


def component_data(family: CoupledFamily) -> ComponentData:
    if family.potential.depth != 1:
        raise NotImplementedError("limit constants are implemented for depth-1 potentials")
    pot = family.potential
    return ComponentData(
        family,
        _well_extension(family.A, family.A, pot),
        _well_extension(family.D, family.D, pot),
        _well_extension(family.Aprime, family.A, pot),
        _well_extension(family.Dprime, family.D, pot),
    )


def lambda_factors(P: float, P_Aprime: float, P_Dprime: float, n: int, nprime: int, P_m: float) -> tuple[float, float, float]:
    """(lambda_m, lambda'_m, Lambda_m) evaluated verbatim."""
    if not P_m > P:
        raise ValueError(f"P_m = {P_m!r} does not exceed P = {P!r}: the coupled system is mis-built")
    denom = -math.expm1(-(P_m - P))
    lam = math.exp((n - 1) * (P_Aprime - P_m)) / denom
    lamp = math.exp((nprime - 1) * (P_Dprime - P_m)) / denom
    return lam, lamp, lam * lamp


@dataclass(frozen=True)
class LimitConstants:
    Lambda: float
    K: float
    K_A: float
    K_D: float
    pieces: dict

    def to_dict(self) -> dict:
        return {"Lambda": self.Lambda, "K": self.K, "K_A": self.K_A, "K_D": self.K_D, **self.pieces}


def limit_constants(cd: ComponentData) -> LimitConstants:
    """Lambda, K and the unbounded-regime K_A, K_D."""
    P = cd.P
    ha_alpha = cd.pullback("A", lambda s: cd.H("A", s))  # int H~_A e^phi d alpha* nu_D'
    hd_delta = cd.pullback("D", lambda s: cd.H("D", s))  # int H~_D e^phi d delta* nu_A'
    e_alpha = cd.pullback("A", lambda s: 1.0)
    e_delta = cd.pullback("D", lambda s: 1.0)
    hdp_d = cd.integral("Dprime", "D")  # int H~_D' d nu_D
    hap_a = cd.integral("Aprime", "A")  # int H~_A' d nu_A
    pieces = {
        "int_HA_dalpha": ha_alpha,
        "int_HD_ddelta": hd_delta,
        "int_dalpha": e_alpha,
        "int_ddelta": e_delta,
        "int_HDp_dnuD": hdp_d,
        "int_HAp_dnuA": hap_a,
    }
    for name, val in pieces.items():
        assert val > 0, f"{name} vanishes"
    Lambda = math.exp(2 * P) / (ha_alpha * hdp_d * hd_delta * hap_a)
    K = math.exp(-P) * (e_alpha / e_delta) * hdp_d * hd_delta
    K_A = e_delta * hap_a / (2 * math.exp(P))
    K_D = e_delta / (2 * hd_delta)
    return LimitConstants(Lambda, K, K_A, K_D, pieces)


def bounded_regime_constants(lc: LimitConstants, lam: float, lamp: float, P: float) -> tuple[float, float]:
    """(K_A, K_D) when lambda_m -> lam and lambda'_m -> lamp are finite.

    Every integral is taken against the primed conformal measures, as in the
    unbounded formulas they must reduce to.
    """
    p = lc.pieces
    K_D = (p["int_ddelta"] + math.exp(-P) * lamp * p["int_dalpha"] * p["int_HDp_dnuD"] * p["int_HD_ddelta"]) / (
        2 * p["int_HD_ddelta"]
    )
    K_A = K_D * math.exp(-P) * lam * p["int_HD_ddelta"] * p["int_HAp_dnuA"]
    return K_A, K_D


# ---------------------------------------------------------------------------
# measures on Sigma_0 cylinders


def component_measure(family: CoupledFamily, well: str) -> Callable[[Sequence], float]:
    """Equilibrium state of one well, as a cylinder function on Sigma_0."""
    spec = family.A if well == "A" else family.D
    pot = family.potential.restricted(spec.symbols)
    g = gibbs_measure(perron(build_transfer_matrix(spec, pot)))
    keep = set(spec.symbols)

    def mass(word):
        if any(s not in keep for s in word):
            return 0.0
        return gibbs_cylinder(g, word).mass

    return mass


def limit_measure(family: CoupledFamily, theta: float) -> Callable[[Sequence], float]:
    """(theta mu_A + mu_D) / (1 + theta), with theta = inf meaning mu_A."""
    mu_a = component_measure(family, "A")
    mu_d = component_measure(family, "D")
    if math.isinf(theta):
        return mu_a
    w = theta / (1.0 + theta)
    return lambda word: w * mu_a(word) + (1.0 - w) * mu_d(word)


def weakstar_distance(mu1, mu2, spec, k_max: int) -> float:
    """sum_{k <= k_max} 2^-k sum_{|C| = k} |mu1[C] - mu2[C]| over admissible C."""
    total = 0.0
    for k in range(1, k_max + 1):
        total += 2.0 ** (-k) * sum(abs(mu1(w) - mu2(w)) for w in cylinders(spec, k))
    return total
