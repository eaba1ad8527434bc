"""Large-deviation sample-complexity bounds and their Monte-Carlo checks.

Implements the finite-set and covering-number failure bounds for the
empirical pseudo-gradient and feasible-set approximations, the shrinking
deviation schedule eps_n = eps_valid * n^(-alpha), minimum-sample inversion,
and an empirical frequency study that compares observed deviation rates
against the theoretical bounds.

Everything is evaluated in log space so astronomically large covering
counts stay finite and comparable.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .basis import BasisSet, evaluate_basis
from .feasible import FeasibleSetSpec, sandwich_test
from .games import (
    CoefficientProfile,
    GameDefinition,
    ProfileLayout,
    empirical_pseudo_gradient,
    pseudo_gradient_scenario,
)
from .seeding import derive_rng, derive_seed

__all__ = [
    "LDParams",
    "BoundReport",
    "ScheduleEntry",
    "covering_count",
    "log_covering_count",
    "gradient_deviation_bound",
    "feasible_set_bound",
    "combined_bound",
    "epsilon_schedule",
    "min_samples",
    "estimate_ld_params",
    "wilson_interval",
    "monte_carlo_deviation_study",
    "DeviationStudy",
    "StudyRow",
]


@dataclass(frozen=True)
class LDParams:
    """Constants entering the deviation bounds.

    sup_f / sup_h bound the per-coordinate magnitude of the lifted
    pseudo-gradient and of the constraint function; lip_f / lip_h are
    Lipschitz constants of the lifted maps in the coefficients. eps_valid is
    the largest deviation scale at which the quadratic rate lower bound is
    applied and must not exceed the declared strict-feasibility margin.
    """

    n_players: int
    d: int
    radius: float
    sup_f: float
    sup_h: float
    lip_f: float
    lip_h: float
    eps_valid: float
    slater_margin: float

    def __post_init__(self) -> None:
        for name in ("radius", "sup_f", "sup_h", "lip_f", "lip_h", "eps_valid", "slater_margin"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.n_players < 1 or self.d < 1:
            raise ValueError("n_players and d must be >= 1")
        if self.eps_valid > self.slater_margin:
            raise ValueError("eps_valid must not exceed the slater margin")

    @property
    def dim(self) -> int:
        return self.n_players * self.d


@dataclass(frozen=True)
class BoundReport:
    """Evaluated bound quantities for one (eps, n) pair.

    raw_bound may be far below zero for hopeless sample sizes; `bound` clips
    it to [0, 1] for reporting. log_failure stays finite and exact even when
    the covering count overflows a double.
    """

    kind: str                 # "gradient" | "feasible-set" | "combined"
    eps: float
    n: int
    nu: float
    log_covering_count: float
    log_failure: float
    raw_bound: float
    bound: float
    finite_set_size: Optional[int] = None
    log_failure_finite: Optional[float] = None
    min_n: Optional[int] = None

    @property
    def covering_count(self) -> float:
        return math.exp(self.log_covering_count) if self.log_covering_count < 709 else math.inf


def log_covering_count(params: LDParams, nu: float) -> float:
    """log of (R sqrt(Nd) / nu)^(Nd), the box-grid cover of the product ball."""
    if nu <= 0:
        raise ValueError("covering radius must be positive")
    dim = params.dim
    return dim * (math.log(params.radius) + 0.5 * math.log(dim) - math.log(nu))


def covering_count(params: LDParams, nu: float) -> float:
    """Covering count in linear scale; may return inf for tiny nu."""
    lc = log_covering_count(params, nu)
    return math.exp(lc) if lc < 709 else math.inf


def _one_minus_exp(log_term: float) -> float:
    """1 - exp(log_term), exact near 1, -inf when the term overflows."""
    if log_term >= 709:
        return -math.inf
    return -math.expm1(log_term)


def _report(kind: str, eps: float, n: int, nu: float, log_nnu: float,
            log_failure: float, finite_set_size: Optional[int],
            log_failure_finite: Optional[float]) -> BoundReport:
    raw = _one_minus_exp(log_failure)
    return BoundReport(
        kind=kind, eps=eps, n=int(n), nu=nu,
        log_covering_count=log_nnu,
        log_failure=log_failure,
        raw_bound=raw,
        bound=min(max(raw, 0.0), 1.0),
        finite_set_size=finite_set_size,
        log_failure_finite=log_failure_finite,
    )


def _check_eps(params: LDParams, eps: float) -> None:
    if not 0 < eps <= params.eps_valid:
        raise ValueError(
            f"eps={eps} outside (0, {params.eps_valid}]: the quadratic rate "
            "lower bound only applies below eps_valid")


def gradient_deviation_bound(params: LDParams, eps: float, n: int,
                             probe_count: Optional[int] = None) -> BoundReport:
    """Lower bound on P{sup-norm pseudo-gradient deviation < eps over the ball}.

    Covering failure term: 2 N d nnu exp(-eps^2 n / (12 N d sup_f^2)) with
    nu = eps / (4 lip_f). With probe_count also evaluates the finite-set
    variant 2 N d |A| exp(-eps^2 n / (3 N d sup_f^2)).
    """
    _check_eps(params, eps)
    dim = params.dim
    nu = eps / (4.0 * params.lip_f)
    log_nnu = log_covering_count(params, nu)
    log_failure = math.log(2.0 * dim) + log_nnu - eps * eps * n / (12.0 * dim * params.sup_f ** 2)
    log_fin = None
    if probe_count is not None:
        log_fin = math.log(2.0 * dim * probe_count) - eps * eps * n / (3.0 * dim * params.sup_f ** 2)
    return _report("gradient", eps, n, nu, log_nnu, log_failure, probe_count, log_fin)


def feasible_set_bound(params: LDParams, eps: float, n: int,
                       probe_count: Optional[int] = None) -> BoundReport:
    """Lower bound on P{the shifted-set inclusion chain holds}.

    Covering failure term: 2 N nnu exp(-eps^2 n / (12 sup_h^2)) with
    nu = eps / (4 lip_h); finite-set variant 2 N |A| exp(-eps^2 n / (3 sup_h^2)).
    """
    _check_eps(params, eps)
    nu = eps / (4.0 * params.lip_h)
    log_nnu = log_covering_count(params, nu)
    log_failure = math.log(2.0 * params.n_players) + log_nnu - eps * eps * n / (12.0 * params.sup_h ** 2)
    log_fin = None
    if probe_count is not None:
        log_fin = math.log(2.0 * params.n_players * probe_count) \
            - eps * eps * n / (3.0 * params.sup_h ** 2)
    return _report("feasible-set", eps, n, nu, log_nnu, log_failure, probe_count, log_fin)


def combined_bound(params: LDParams, eps: float, n: int) -> BoundReport:
    """Union bound over the gradient and feasible-set failure events."""
    g = gradient_deviation_bound(params, eps, n)
    f = feasible_set_bound(params, eps, n)
    log_failure = np.logaddexp(g.log_failure, f.log_failure)
    nu = min(g.nu, f.nu)
    return _report("combined", eps, n, nu, max(g.log_covering_count, f.log_covering_count),
                   float(log_failure), None, None)


@dataclass(frozen=True)
class ScheduleEntry:
    n: int
    eps: float
    nu: float


def epsilon_schedule(params: LDParams, alpha: float, n_list: Sequence[int]) -> list[ScheduleEntry]:
    """Shrinking deviation schedule eps_n = eps_valid * n^(-alpha) with the
    matched covering radii nu_n = eps_n / (4 max(lip_f, lip_h)).

    Requires 0 < alpha < 1/2 so the failure probabilities stay summable.
    """
    if not 0.0 < alpha < 0.5:
        raise ValueError(f"alpha must lie in (0, 1/2), got {alpha}")
    lip = max(params.lip_f, params.lip_h)
    out = []
    for n in n_list:
        if n < 1:
            raise ValueError("sample sizes must be >= 1")
        eps_n = params.eps_valid * float(n) ** (-alpha)
        out.append(ScheduleEntry(n=int(n), eps=eps_n, nu=eps_n / (4.0 * lip)))
    return out


def min_samples(params: LDParams, eps: float, delta: float, kind: str = "gradient") -> int:
    """Smallest n whose raw covering bound reaches 1 - delta.

    Closed-form inversion of the failure term followed by an exact integer
    adjustment, all in log space.
    """
    _check_eps(params, eps)
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if kind == "gradient":
        dim = params.dim
        nu = eps / (4.0 * params.lip_f)
        log_pref = math.log(2.0 * dim) + log_covering_count(params, nu)
        rate = eps * eps / (12.0 * dim * params.sup_f ** 2)
    elif kind == "feasible-set":
        nu = eps / (4.0 * params.lip_h)
        log_pref = math.log(2.0 * params.n_players) + log_covering_count(params, nu)
        rate = eps * eps / (12.0 * params.sup_h ** 2)
    else:
        raise ValueError(f"unknown bound kind {kind!r}")

    def log_failure(n: int) -> float:
        return log_pref - rate * n

    target = math.log(delta)
    n = max(1, math.ceil((log_pref - target) / rate))
    while n > 1 and log_failure(n - 1) <= target:
        n -= 1
    while log_failure(n) > target:
        n += 1
    return int(n)


# ---------------------------------------------------------------------------
# empirical constant estimation
# ---------------------------------------------------------------------------

def _random_profile(game: GameDefinition, layout: ProfileLayout,
                    rng: np.random.Generator) -> CoefficientProfile:
    coeffs = []
    for m_i in game.m:
        v = rng.normal(size=m_i * layout.d)
        nrm = float(np.linalg.norm(v))
        if nrm == 0.0:
            nrm = 1.0
        r = game.radius * rng.uniform() ** (1.0 / (m_i * layout.d))
        coeffs.append((v * (r / nrm)).reshape(m_i, layout.d))
    zetas = None
    if game.has_zeta:
        zetas = rng.uniform(game.zeta_bounds[0], game.zeta_bounds[1], size=game.n_players)
    return CoefficientProfile(coeffs=tuple(coeffs), zetas=zetas)


def estimate_ld_params(
    game: GameDefinition,
    basis: BasisSet,
    sampler,
    n_draws: int = 10_000,
    seed: int = 0,
    inflation: float = 1.5,
    eps_valid: Optional[float] = None,
    slater_margin: Optional[float] = None,
) -> LDParams:
    """Empirical stand-ins for the bound constants.

    Maxima of the lifted operator magnitude, constraint magnitude, and
    difference quotients over random in-ball profiles and sampled scenarios,
    inflated by a safety factor. eps_valid defaults to 0.9 of the declared
    strict-feasibility margin.
    """
    layout = ProfileLayout.for_game(game, basis)
    data = sampler.sample(n_draws, seed=derive_seed(seed, 0xC0457))
    rng = derive_rng(seed, 0xC0457, 1)
    sup_f = 0.0
    sup_h = 0.0
    lip_f = 0.0
    lip_h = 0.0
    for k in range(data.n):
        x, y = data.xs[k], data.ys[k]
        p1 = _random_profile(game, layout, rng)
        p2 = _random_profile(game, layout, rng)
        g1 = pseudo_gradient_scenario(game, basis, p1, x, y)
        g2 = pseudo_gradient_scenario(game, basis, p2, x, y)
        sup_f = max(sup_f, float(np.max(np.abs(g1))), float(np.max(np.abs(g2))))
        diff = float(np.linalg.norm(p1.to_flat() - p2.to_flat()))
        if diff > 1e-12:
            lip_f = max(lip_f, float(np.linalg.norm(g1 - g2)) / diff)
        if not game.trivial_constraint:
            phi = evaluate_basis(basis, x)
            for i in range(game.n_players):
                z1 = p1.coeffs[i] @ phi
                z2 = p2.coeffs[i] @ phi
                ze1 = float(p1.zetas[i]) if p1.zetas is not None else 0.0
                ze2 = float(p2.zetas[i]) if p2.zetas is not None else 0.0
                h1 = float(game.constraint_value(i, z1, ze1, y))
                h2 = float(game.constraint_value(i, z2, ze2, y))
                sup_h = max(sup_h, abs(h1), abs(h2))
                bdiff = math.sqrt(float(np.sum((p1.coeffs[i] - p2.coeffs[i]) ** 2)) + (ze1 - ze2) ** 2)
                if bdiff > 1e-12:
                    lip_h = max(lip_h, abs(h1 - h2) / bdiff)
    sup_h = max(sup_h, 1e-12)
    lip_h = max(lip_h, 1e-12)
    margin = slater_margin if slater_margin is not None else game.slater_margin
    valid = eps_valid if eps_valid is not None else 0.9 * margin
    return LDParams(
        n_players=game.n_players,
        d=basis.d,
        radius=game.radius,
        sup_f=inflation * max(sup_f, 1e-12),
        sup_h=inflation * sup_h,
        lip_f=inflation * max(lip_f, 1e-12),
        lip_h=inflation * lip_h,
        eps_valid=valid,
        slater_margin=margin,
    )


# ---------------------------------------------------------------------------
# Monte-Carlo deviation study
# ---------------------------------------------------------------------------

def wilson_interval(successes: int, trials: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion (95% by default)."""
    if trials < 1:
        return 0.0, 1.0
    p = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (p + z2 / (2.0 * trials)) / denom
    half = z * math.sqrt(p * (1.0 - p) / trials + z2 / (4.0 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass(frozen=True)
class StudyRow:
    n: int
    trials: int
    grad_dev_freq: float
    grad_dev_lo: float
    grad_dev_hi: float
    grad_bound: float
    sandwich_viol_freq: float
    sandwich_lo: float
    sandwich_hi: float
    set_bound: float


@dataclass
class DeviationStudy:
    eps: float
    rows: list

    CSV_COLUMNS = ("n", "trials", "grad_dev_freq", "grad_dev_lo", "grad_dev_hi",
                   "grad_bound", "sandwich_viol_freq", "sandwich_lo", "sandwich_hi",
                   "set_bound")

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.CSV_COLUMNS)
            for row in self.rows:
                writer.writerow([row.n, row.trials] + [
                    f"{getattr(row, c):.17g}" for c in self.CSV_COLUMNS[2:]
                ])


def monte_carlo_deviation_study(
    game: GameDefinition,
    basis: BasisSet,
    sampler,
    params: LDParams,
    probes: Sequence[CoefficientProfile],
    eps: float,
    n_list: Sequence[int],
    trials: int,
    seed: int = 0,
    big_factor: int = 100,
) -> DeviationStudy:
    """Observed frequencies of the finite-set deviation events vs theory.

    For every n, draws `trials` independent datasets and records how often
    some probe's empirical pseudo-gradient deviates from a high-sample
    Monte-Carlo reference by at least eps, and how often the shifted-set
    inclusion chain breaks on the probes. Frequencies come with Wilson 95%
    intervals; the theoretical columns are the finite-set failure bounds for
    the probe set.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not probes:
        raise ValueError("need at least one probe profile")
    _check_eps(params, eps)
    n_list = [int(n) for n in n_list]
    n_mc = max(big_factor * max(n_list), max(n_list) + 1)
    big = sampler.sample(n_mc, seed=derive_seed(seed, 0xB16DA7A))
    ref = [empirical_pseudo_gradient(game, basis, p, big) for p in probes]

    do_sandwich = not game.trivial_constraint
    if do_sandwich:
        spec_inner = FeasibleSetSpec.for_game(game, big, shift=-eps)
        spec_outer = FeasibleSetSpec.for_game(game, big, shift=+eps)

    dim = params.dim
    rows = []
    for n in n_list:
        grad_hits = 0
        sand_hits = 0
        for t in range(trials):
            data = sampler.sample(n, seed=derive_seed(seed, n, t))
            dev = 0.0
            for p, r in zip(probes, ref):
                g = empirical_pseudo_gradient(game, basis, p, data)
                dev = max(dev, float(np.linalg.norm(g - r)))
            if dev >= eps:
                grad_hits += 1
            if do_sandwich:
                spec_mid = FeasibleSetSpec.for_game(game, data, shift=0.0)
                recs = sandwich_test(spec_inner, spec_mid, spec_outer, game, basis, probes)
                if any(r.violated for r in recs):
                    sand_hits += 1
        g_lo, g_hi = wilson_interval(grad_hits, trials)
        s_lo, s_hi = wilson_interval(sand_hits, trials)
        grad_bound = min(1.0, math.exp(
            math.log(2.0 * dim * len(probes)) - eps * eps * n / (3.0 * dim * params.sup_f ** 2)))
        set_bound = min(1.0, math.exp(
            math.log(2.0 * params.n_players * len(probes)) - eps * eps * n / (3.0 * params.sup_h ** 2))) \
            if do_sandwich else math.nan
        rows.append(StudyRow(
            n=n, trials=trials,
            grad_dev_freq=grad_hits / trials, grad_dev_lo=g_lo, grad_dev_hi=g_hi,
            grad_bound=grad_bound,
            sandwich_viol_freq=sand_hits / trials if do_sandwich else math.nan,
            sandwich_lo=s_lo if do_sandwich else math.nan,
            sandwich_hi=s_hi if do_sandwich else math.nan,
            set_bound=set_bound,
        ))
    return DeviationStudy(eps=eps, rows=rows)
