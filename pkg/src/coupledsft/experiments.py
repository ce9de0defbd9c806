"""Sweep configuration, per-m computation and report emission."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .coupling.automaton import automaton_operator, build_sigma_m
from .coupling.family import ConstraintViolation, CoupledFamily, SequenceRule, six_symbol_family, toy_family
from .coupling.induced import (
    DivergenceError,
    InconsistencyError,
    InducedBuilder,
    induced_spectral,
    pressure_by_induction,
    return_split,
)
from .coupling.limits import (
    bounded_regime_constants,
    component_data,
    lambda_factors,
    limit_constants,
    limit_measure,
    weakstar_distance,
)
from .sft import MAX_BLOCK_STATES, ResourceError
from .transfer import (
    ConvergenceError,
    DegenerateSpectrumError,
    PeriodicityError,
    gibbs_cylinder,
    gibbs_measure,
    parse_potential,
    perron,
)

__all__ = [
    "ConfigError",
    "ReportWriteError",
    "NUMERICAL_ERRORS",
    "SweepConfig",
    "load_config",
    "build_family",
    "SweepRow",
    "ConvergenceReport",
    "compute_row",
    "run_sweep",
    "geom_row",
    "emit_report",
    "report_csv",
    "report_json",
    "report_from_json",
    "check_writable",
    "projected_measure",
    "COLUMNS",
    "GEOM_COLUMNS",
    "PRESSURE_FLOOR",
    "MAX_AUTOMATON_STATES",
]

COLUMNS = ("m", "n_m", "nprime_m", "P_m", "lambda_m", "lambdaprime_m", "Lambda_m",
           "mass_A", "mass_D", "E_DA", "E_AD", "d_weakstar")
GEOM_COLUMNS = ("m", "n_m", "nprime_m", "eps", "eps_prime", "mme_mass_left",
                "stationary_mass_A", "lyapunov_bound", "lyapunov_empirical_min")
PRESSURE_FLOOR = 1e-12
MAX_AUTOMATON_STATES = MAX_BLOCK_STATES
MODES = ("thm1.2", "thm2.1", "thm1.3", "verify")

NUMERICAL_ERRORS = (
    ConvergenceError,
    DivergenceError,
    InconsistencyError,
    PeriodicityError,
    DegenerateSpectrumError,
    ResourceError,
    ArithmeticError,
    np.linalg.LinAlgError,
)


class ConfigError(ValueError):
    pass


class ReportWriteError(OSError):
    pass


@dataclass(frozen=True)
class SweepConfig:
    """Everything a sweep needs; ``family`` is a plain dict (see :func:`build_family`)."""

    mode: str = "thm1.2"
    family: dict = field(default_factory=lambda: {"name": "six_symbol"})
    ms: tuple = tuple(range(4, 21, 2))
    theta: float | None = None
    tol: float = 0.02
    seed: int = 0
    out: str | None = None
    workers: int = 1
    weakstar_depth: int = 4
    geometry: dict = field(default_factory=lambda: {"a": "3/16"})
    lyapunov_orbits: int = 50
    lyapunov_length: int = 5000

    def __post_init__(self):
        object.__setattr__(self, "ms", tuple(int(m) for m in self.ms))
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.tol > 0:
            raise ConfigError("tolerances must be positive")
        if self.mode != "verify" and not self.ms:
            raise ConfigError("m range is empty")
        if list(self.ms) != sorted(set(self.ms)):
            raise ConfigError("m values must be strictly increasing")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.theta is not None and not self.theta >= 0:
            raise ConfigError("theta must be >= 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ms"] = list(self.ms)
        return d

    @classmethod
    def from_dict(cls, raw: dict) -> "SweepConfig":
        raw = dict(raw)
        if "m_range" in raw:
            r = raw.pop("m_range")
            if isinstance(r, dict):
                raw["ms"] = list(range(int(r["start"]), int(r["stop"]) + 1, int(r.get("step", 1))))
            else:
                raw["ms"] = list(r)
        unknown = set(raw) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**raw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def load_config(path: str) -> SweepConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    return SweepConfig.from_dict(raw)


def _rule(raw: dict | None, default: SequenceRule) -> SequenceRule:
    if raw is None:
        return default
    try:
        return SequenceRule(raw.get("kind", "affine"), float(raw.get("a", 1.0)), float(raw.get("b", 0.0)))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_family(cfg: SweepConfig) -> CoupledFamily:
    """Family from the config's ``family`` block.

    Keys: ``name`` (six_symbol | toy), ``gluing`` (toy only), ``linked_prefix``,
    ``n_rule`` / ``nprime_rule`` as SequenceRule dicts, ``potential``.
    ``cfg.theta`` (if set) overrides ``n_rule`` with ``n_m = ceil(theta n'_m)``.
    """
    fb = dict(cfg.family)
    name = fb.get("name", "six_symbol")
    nprime_rule = _rule(fb.get("nprime_rule"), SequenceRule())
    n_rule = _rule(fb.get("n_rule"), SequenceRule("same"))
    if cfg.theta is not None:
        n_rule = SequenceRule("theta", float(cfg.theta))
    linked = bool(fb.get("linked_prefix", True))
    try:
        if name == "six_symbol":
            fam = six_symbol_family(n_rule, nprime_rule, linked_prefix=linked)
        elif name == "toy":
            mode = "thm2.1" if cfg.mode == "thm2.1" else fb.get("mode", "thm1.2")
            fam = toy_family(mode, n_rule, nprime_rule, linked_prefix=linked, gluing=fb.get("gluing", "sparse"))
        else:
            raise ConfigError(f"unknown family {name!r}")
        if "potential" in fb:
            pot = parse_potential(fb["potential"], fam.base)
            fam = CoupledFamily(
                fam.base, fam.alpha, fam.delta, fam.a_prime, fam.d_prime, pot,
                fam.mode, fam.nprime_rule, fam.n_rule, fam.linked_prefix,
            )
        if cfg.mode == "thm2.1" and fam.mode != "thm2.1":
            raise ConfigError("thm2.1 sweeps need a thm2.1 family")
    except (ConstraintViolation, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    return fam


# ---------------------------------------------------------------------------
# rows


@dataclass(frozen=True)
class SweepRow:
    m: int
    n_m: int
    nprime_m: int
    P_m: float
    lambda_m: float
    lambdaprime_m: float
    Lambda_m: float
    mass_A: float
    mass_D: float
    E_DA: float
    E_AD: float
    d_weakstar: float
    P_m_perron: float = math.nan
    states: int = 0

    def csv_values(self) -> list:
        return [getattr(self, c) for c in COLUMNS]


def _target_theta(fam: CoupledFamily) -> float:
    if fam.mode == "thm1.2":
        return 1.0
    th = fam.theta
    if th is None:
        raise ConfigError("cannot infer theta from the family's n_rule")
    return th


def projected_measure(op_spec):
    g = gibbs_measure(op_spec)
    return lambda w: gibbs_cylinder(g, w).mass


def compute_row(fam: CoupledFamily, m: int, weakstar_depth: int = 4, P: float | None = None,
                components=None) -> SweepRow:
    """One sweep row; raises with the stage name attached on failure."""
    stage = "automaton"
    try:
        aut = build_sigma_m(fam, m)
        if aut.size > MAX_AUTOMATON_STATES:
            raise ResourceError(f"automaton has {aut.size} states (cap {MAX_AUTOMATON_STATES})")
        stage = "perron"
        s = perron(automaton_operator(aut))
        stage = "induced pressure"
        builder = InducedBuilder(aut)
        P_m = pressure_by_induction(builder)
        stage = "induced spectrum"
        e_da, e_ad, mass_a, mass_d = return_split(induced_spectral(builder.at(P_m)))
        stage = "lambda factors"
        if components is None and fam.potential.depth == 1:
            components = component_data(fam)
        if P is None:
            P = components.P if components is not None else fam.component_pressure("A")
        if components is not None and P_m - P >= PRESSURE_FLOOR:
            lam, lamp, Lam = lambda_factors(P, components.P_Aprime, components.P_Dprime, aut.n, aut.nprime, P_m)
        else:
            lam = lamp = Lam = math.nan
        stage = "weak-star distance"
        mu_m = projected_measure(s)
        mu_lim = limit_measure(fam, _target_theta(fam))
        dist = weakstar_distance(mu_m, mu_lim, fam.base, weakstar_depth)
    except Exception as exc:  # surfaced with context by the caller
        exc.args = (f"m={m}, stage={stage}: {exc}",) + exc.args[1:]
        raise
    return SweepRow(m, aut.n, aut.nprime, P_m, lam, lamp, Lam, mass_a, mass_d, e_da, e_ad, dist,
                    s.pressure, aut.size)


def _row_job(cfg_dict: dict, m: int) -> SweepRow:
    cfg = SweepConfig.from_dict(cfg_dict)
    return compute_row(build_family(cfg), m, cfg.weakstar_depth)


def geom_row(cfg: SweepConfig, m: int, seed: int) -> dict:
    from .coupling.family import six_symbol_family
    from .geometry import (
        GeometryParams,
        build_family_map,
        empirical_lyapunov,
        image_checks,
        lyapunov_bound,
        mme_mass,
        mme_measure,
    )

    fam = build_family(SweepConfig.from_dict({**cfg.to_dict(), "mode": "thm1.2"}))
    n, nprime = fam.sequence(m)
    params = GeometryParams(**{k: Fraction(v) for k, v in cfg.geometry.items()})
    T = build_family_map(params, n, nprime, fam.linked_prefix)
    failed = [k for k, ok in image_checks(T).items() if not ok]
    if failed:
        raise ArithmeticError(f"m={m}, stage=geometry: image checks failed: {failed}")
    mu = mme_measure(T)
    left = mme_mass(T, 0, Fraction(1, 2), measure=mu)
    aut = build_sigma_m(six_symbol_family(SequenceRule("affine", 0, n), SequenceRule("affine", 0, nprime),
                                        linked_prefix=fam.linked_prefix), 0)
    g = gibbs_measure(perron(automaton_operator(aut)))
    stat_a = float(g.stationary[aut.well_mask("A")].sum())
    emp = empirical_lyapunov(T, cfg.lyapunov_orbits, cfg.lyapunov_length, seed)
    return {
        "m": m, "n_m": n, "nprime_m": nprime, "eps": float(T.eps), "eps_prime": float(T.eps_prime),
        "mme_mass_left": left, "stationary_mass_A": stat_a,
        "lyapunov_bound": lyapunov_bound(T), "lyapunov_empirical_min": float(emp.min()),
    }


# ---------------------------------------------------------------------------
# sweep


@dataclass
class ConvergenceReport:
    config: SweepConfig
    rows: list = field(default_factory=list)
    target: float | None = None
    constants: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    failure: dict | None = None
    floor_reached_at: int | None = None

    @property
    def columns(self) -> tuple:
        return GEOM_COLUMNS if self.config.mode == "thm1.3" else COLUMNS

    @property
    def complete(self) -> bool:
        return self.failure is None

    @property
    def final_mass(self) -> float | None:
        if not self.rows:
            return None
        last = self.rows[-1]
        return last["mme_mass_left"] if isinstance(last, dict) else last.mass_A

    @property
    def passed(self) -> bool:
        return self.complete and bool(self.checks) and all(self.checks.values())

    def row_dicts(self) -> list[dict]:
        out = []
        for r in self.rows:
            out.append(dict(r) if isinstance(r, dict) else asdict(r))
        return out

    def summary(self) -> dict:
        return {
            "mode": self.config.mode,
            "seed": self.config.seed,
            "config": self.config.to_dict(),
            "target_mass_A": self.target,
            "final_mass_A": self.final_mass,
            "final_m": (self.row_dicts()[-1]["m"] if self.rows else None),
            "limit_constants": self.constants,
            "checks": self.checks,
            "passed": self.passed,
            "failure": self.failure,
            "pressure_floor_reached_at": self.floor_reached_at,
            "empty": not self.rows,
            "rows": self.row_dicts(),
        }


def _nonincreasing(vals: Sequence[float], slack: float = 1e-12) -> bool:
    return all(b <= a + slack for a, b in zip(vals, vals[1:]))


def _coupled_checks(rep: ConvergenceReport, fam: CoupledFamily, P: float) -> None:
    rows = rep.rows
    tol = rep.config.tol
    errs = [abs(r.mass_A - rep.target) for r in rows]
    rep.checks["final_mass_within_tol"] = errs[-1] <= tol
    if not math.isinf(rep.target) and rep.target != 0.0:
        rep.checks["error_nonincreasing_last5"] = _nonincreasing(errs[-5:])
    rep.checks["pressure_routes_agree"] = all(abs(r.P_m - r.P_m_perron) <= 1e-9 for r in rows)
    ps = [r.P_m for r in rows]
    rep.checks["pressure_decreasing_to_P"] = all(b < a for a, b in zip(ps, ps[1:])) and ps[-1] > P
    if fam.mode == "thm1.2" and rep.constants:
        gaps = [abs(r.Lambda_m - rep.constants["Lambda"]) for r in rows if math.isfinite(r.Lambda_m)]
        rep.checks["Lambda_converging_last5"] = len(gaps) >= 2 and _nonincreasing(gaps[-5:], 0.0)
        r = rows[-1]
        g = r.P_m - P
        ratio = (r.E_DA / r.E_AD) * (r.nprime_m + 1 / g) / (r.n_m + 1 / g)
        rep.checks["return_ratio_within_5pct"] = abs(ratio - 1.0) <= 0.05


def run_sweep(cfg: SweepConfig) -> ConvergenceReport:
    """Compute every row of the sweep; failures are recorded, not raised."""
    rep = ConvergenceReport(cfg)
    if cfg.mode == "thm1.3":
        rep.target = 0.5
        for m in cfg.ms:
            try:
                rep.rows.append(geom_row(cfg, m, cfg.seed))
            except Exception as exc:
                rep.failure = {"m": m, "error": f"{type(exc).__name__}: {exc}"}
                break
        if rep.rows:
            last = rep.rows[-1]
            rep.checks["final_mass_within_tol"] = abs(last["mme_mass_left"] - 0.5) <= cfg.tol
            rep.checks["geometric_matches_symbolic"] = all(
                abs(r["mme_mass_left"] - r["stationary_mass_A"]) <= 1e-8 for r in rep.rows
            )
            rep.checks["lyapunov_bound_holds"] = all(
                r["lyapunov_empirical_min"] >= r["lyapunov_bound"] - 1e-3 for r in rep.rows
            )
        return rep
    if cfg.mode == "verify":
        raise ConfigError("verify mode is run through coupledsft.acceptance")

    fam = build_family(cfg)
    fam.validate(cfg.ms)
    theta = _target_theta(fam)
    rep.target = 1.0 if math.isinf(theta) else theta / (1.0 + theta)
    cd = component_data(fam) if fam.potential.depth == 1 else None
    P = cd.P if cd is not None else fam.component_pressure("A")
    if fam.mode == "thm1.2" and cd is not None:
        rep.constants = limit_constants(cd).to_dict()

    results: dict[int, SweepRow] = {}
    errors: dict[int, Exception] = {}
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            futs = {m: pool.submit(_row_job, cfg.to_dict(), m) for m in cfg.ms}
            for m, fut in futs.items():
                try:
                    results[m] = fut.result()
                except Exception as exc:
                    errors[m] = exc
    for m in cfg.ms:  # merged in m order; serial path computes lazily so the floor can stop it
        if cfg.workers == 1 and m not in results:
            try:
                results[m] = compute_row(fam, m, cfg.weakstar_depth, P, cd)
            except Exception as exc:
                errors[m] = exc
        if m in errors:
            exc = errors[m]
            rep.failure = {"m": m, "error": f"{type(exc).__name__}: {exc}",
                           "numerical": isinstance(exc, NUMERICAL_ERRORS)}
            break
        row = results[m]
        rep.rows.append(row)
        if row.P_m - P < PRESSURE_FLOOR:
            rep.floor_reached_at = m
            break
    if rep.rows:
        _coupled_checks(rep, fam, P)
        last = rep.rows[-1]
        if rep.constants and math.isfinite(last.lambda_m):
            # finite lambda_m: report the bounded-regime constants at the last m
            k_a, k_d = bounded_regime_constants(limit_constants(cd), last.lambda_m, last.lambdaprime_m, P)
            rep.constants.update({"K_A_bounded": k_a, "K_D_bounded": k_d, "lambda_last": last.lambda_m,
                                  "lambdaprime_last": last.lambdaprime_m})
    return rep


# ---------------------------------------------------------------------------
# output


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def report_csv(rep: ConvergenceReport) -> str:
    buf = io.StringIO()
    buf.write(f"# mode={rep.config.mode} seed={rep.config.seed}\n")
    wr = csv.writer(buf, lineterminator="\n")
    cols = rep.columns
    wr.writerow(cols)
    for r in rep.row_dicts():
        wr.writerow([_fmt(r[c]) for c in cols])
    if not rep.rows:
        buf.write("# empty: no rows\n")
    if rep.failure is not None:
        buf.write(f"# failed: m={rep.failure['m']} {rep.failure['error']}\n")
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return _jsonable(obj.item())
    return obj


def report_json(rep: ConvergenceReport) -> str:
    return json.dumps(_jsonable(rep.summary()), indent=2, sort_keys=True) + "\n"


def check_writable(out_dir: str) -> None:
    """Fail early when ``out_dir`` cannot hold the report."""
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise ReportWriteError(f"cannot create {out_dir}: {exc}") from exc
    if not os.access(out_dir, os.W_OK):
        raise ReportWriteError(f"{out_dir} is not writable")


def emit_report(rep: ConvergenceReport, out_dir: str, stem: str | None = None) -> tuple[str, str]:
    """Write ``<stem>.csv`` and ``<stem>.json``; the report stays valid on failure."""
    stem = stem or rep.config.mode.replace(".", "_")
    check_writable(out_dir)
    paths = (os.path.join(out_dir, stem + ".csv"), os.path.join(out_dir, stem + ".json"))
    try:
        for path, text in zip(paths, (report_csv(rep), report_json(rep))):
            with open(path, "w") as fh:
                fh.write(text)
    except OSError as exc:
        raise ReportWriteError(str(exc)) from exc
    return paths


def report_from_json(text: str) -> ConvergenceReport:
    """Rebuild a report from its JSON summary (used by the ``emit`` command)."""
    raw = json.loads(text)
    cfg = SweepConfig.from_dict(raw["config"])
    rep = ConvergenceReport(cfg, target=raw.get("target_mass_A"), constants=raw.get("limit_constants") or {},
                            checks=raw.get("checks") or {}, failure=raw.get("failure"),
                            floor_reached_at=raw.get("pressure_floor_reached_at"))
    for r in raw.get("rows", []):
        r = {k: (math.nan if v is None else v) for k, v in r.items()}
        rep.rows.append(r if cfg.mode == "thm1.3" else SweepRow(**r))
    return rep
