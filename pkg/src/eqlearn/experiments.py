"""Batch experiment drivers: dataset generation, offline-learning sweeps,
bound tables, and plot-ready output. Shared by the CLI and the test suite.

All randomness derives from the configured base seed; reruns with the same
config produce byte-identical CSV outputs on a machine.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from . import _kernels
from .basis import BasisSet, make_polynomial_basis
from .bounds import (
    LDParams,
    estimate_ld_params,
    feasible_set_bound,
    gradient_deviation_bound,
    monte_carlo_deviation_study,
)
from .feasible import FeasibleSetSpec, InfeasibleOrIllConditioned
from .games import (
    CoefficientProfile,
    GameDefinition,
    ProductionDataGenerator,
    SampleSet,
    ToyRegressionGenerator,
    production_game,
    toy_quadratic_game,
)
from .portfolio import (
    PortfolioParams,
    build_portfolio_game,
    evaluate_on_test,
    make_default_generator,
)
from .seeding import derive_seed
from .solver import SolveReport, SolverConfig, relative_distance, solve_offline

__all__ = [
    "RunConfig",
    "SurrogateConfig",
    "BoundsConfig",
    "Problem",
    "load_config",
    "build_problem",
    "cmd_generate",
    "cmd_experiment",
    "cmd_bounds",
    "cmd_plotdata",
    "cmd_solve",
    "SchemaError",
    "RESULTS_COLUMNS",
]

RESULTS_COLUMNS = ("n", "seed", "player", "payoff", "penalty_reg", "constraint",
                   "rel_dist", "status")


class SchemaError(ValueError):
    """An input table is missing required columns or rows."""


@dataclass(frozen=True)
class SurrogateConfig:
    """High-accuracy reference solve used for relative distances.

    Solved once per configuration on a fresh held-out dataset and cached on
    disk under a digest of everything that influences it. A cheap warm-start
    phase on a prefix of the reference data precedes the full-data solve.
    """

    n_ref: int = 200_000
    max_iters: int = 20_000
    tau: Optional[float] = None          # defaults to the experiment solver step
    residual_tol: float = 0.0
    warm_fraction: float = 0.1
    warm_iters: Optional[int] = None     # defaults to max_iters
    seed: int = 9090


@dataclass(frozen=True)
class BoundsConfig:
    eps_list: tuple[float, ...] = (0.02, 0.05, 0.08)
    n_list: tuple[int, ...] = (100, 1_000, 10_000, 100_000)
    probe_count: Optional[int] = None
    constants: Optional[dict] = None     # overrides for LDParams fields
    estimate_draws: int = 2_000
    mc_trials: int = 0                   # 0 disables the Monte-Carlo study
    mc_eps: float = 0.05
    mc_n_list: tuple[int, ...] = (50, 100, 200, 400, 800)


@dataclass(frozen=True)
class RunConfig:
    game: str = "portfolio"
    basis_degree: int = 2
    n_list: tuple[int, ...] = (10, 20, 100, 200, 1_000, 2_000)
    seeds: tuple[int, ...] = (1,)
    n_test: int = 10_000
    solver: SolverConfig = field(default_factory=lambda: SolverConfig(
        tau=3e-4, max_iters=100_000, residual_tol=0.0))
    surrogate: SurrogateConfig = field(default_factory=SurrogateConfig)
    bounds: BoundsConfig = field(default_factory=BoundsConfig)
    out: str = "runs/out"
    reproducible: bool = True
    relax_slack: float = 0.0
    base_seed: int = 0
    tol_feas: float = 1e-8
    proj_max_iter: int = 500

    def __post_init__(self) -> None:
        if not self.n_list:
            raise ValueError("n_list must be non-empty")
        if list(self.n_list) != sorted(set(self.n_list)):
            raise ValueError("n_list must be strictly increasing")
        if not self.seeds:
            raise ValueError("seeds must be non-empty")
        if self.game not in ("portfolio", "production", "toy-quadratic"):
            raise ValueError(f"unknown game {self.game!r}")
        if self.relax_slack < 0:
            raise ValueError("relax_slack must be >= 0")


def _merge_dataclass(cls, defaults, data: dict):
    if not isinstance(data, dict):
        raise ValueError(f"expected a mapping for {cls.__name__}, got {type(data).__name__}")
    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ValueError(f"unknown {cls.__name__} option {key!r}")
        kwargs[key] = value
    merged = dataclasses.asdict(defaults) if defaults is not None else {}
    merged.update(kwargs)
    for f in dataclasses.fields(cls):
        if f.name in merged and isinstance(merged[f.name], list):
            merged[f.name] = tuple(merged[f.name])
    return merged


def load_config(path: Optional[str] = None, overrides: Optional[dict] = None) -> RunConfig:
    """Resolve a RunConfig from an optional JSON file plus flag overrides."""
    raw: dict = {}
    if path is not None:
        with open(path) as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise ValueError("config file must contain a JSON object")
    if overrides:
        raw = {**raw, **{k: v for k, v in overrides.items() if v is not None}}

    solver_raw = raw.pop("solver", {})
    surrogate_raw = raw.pop("surrogate", {})
    bounds_raw = raw.pop("bounds", {})
    base = RunConfig()
    solver = SolverConfig(**_merge_dataclass(SolverConfig, base.solver, solver_raw))
    surrogate = SurrogateConfig(**_merge_dataclass(SurrogateConfig, base.surrogate, surrogate_raw))
    bounds = BoundsConfig(**_merge_dataclass(BoundsConfig, base.bounds, bounds_raw))
    main = _merge_dataclass(RunConfig, base, raw)
    main["solver"] = solver
    main["surrogate"] = surrogate
    main["bounds"] = bounds
    return RunConfig(**main)


@dataclass(frozen=True)
class Problem:
    game: GameDefinition
    generator: object
    basis: BasisSet


def build_problem(cfg: RunConfig) -> Problem:
    if cfg.game == "portfolio":
        params = PortfolioParams()
        game = build_portfolio_game(params)
        gen = make_default_generator(seed=cfg.base_seed, params=params)
    elif cfg.game == "production":
        game = production_game(
            n_players=3, base_cost=(0.4, 0.5, 0.3), revenue=(2.0, 2.2, 1.8),
            coupling=0.3, n_x=2, reg_weight=1e-4)
        gen = ProductionDataGenerator(n_players=3, n_x=2, seed=cfg.base_seed)
    else:
        game = toy_quadratic_game(n_x=1, reg_weight=1e-4)
        gen = ToyRegressionGenerator(n_x=1, seed=cfg.base_seed)
    basis = make_polynomial_basis(game.n_x, cfg.basis_degree)
    return Problem(game=game, generator=gen, basis=basis)


# ---------------------------------------------------------------------------
# seeds and metadata
# ---------------------------------------------------------------------------

def _train_seed(cfg: RunConfig, n: int, seed: int) -> int:
    return derive_seed(cfg.base_seed, 0x7EA1, seed, n)

def _test_seed(cfg: RunConfig) -> int:
    return derive_seed(cfg.base_seed, 0x7E57)

def _surrogate_seed(cfg: RunConfig) -> int:
    return derive_seed(cfg.base_seed, 0x5A11, cfg.surrogate.seed)


def _generator_digest(gen) -> str:
    h = hashlib.sha256()
    h.update(getattr(gen, "name", type(gen).__name__).encode())
    for attr in ("quad", "lin", "const", "noise_mu"):
        arr = getattr(gen, attr, None)
        if arr is not None:
            h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()[:16]


def _write_metadata(cfg: RunConfig, problem: Problem, out_dir: Path, command: str,
                    extra: Optional[dict] = None) -> None:
    meta = {
        "command": command,
        "config": _config_dict(cfg),
        "library_version": __version__,
        "numpy_version": np.__version__,
        "compiled_kernels": bool(_kernels.HAVE_NUMBA),
        "kernel_threads": int(_kernels.get_num_threads()) if _kernels.HAVE_NUMBA else 0,
        "reduction_mode": "vectorized deterministic (fixed per machine/thread-count)",
        "reproducible": cfg.reproducible,
        "generator": {"name": getattr(problem.generator, "name", "unknown"),
                      "digest": _generator_digest(problem.generator)},
        "basis": problem.basis.metadata(),
    }
    if extra:
        meta.update(extra)
    with open(out_dir / "run_metadata.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _config_dict(cfg: RunConfig) -> dict:
    return dataclasses.asdict(cfg)


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------

def cmd_generate(cfg: RunConfig) -> list[Path]:
    """Write train CSVs for every (n, seed) cell plus the shared test set."""
    problem = build_problem(cfg)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for n in cfg.n_list:
        for s in cfg.seeds:
            data = problem.generator.sample(n, seed=_train_seed(cfg, n, s))
            path = out_dir / f"train_n{n}_seed{s}.csv"
            data.save_csv(path)
            _write_sidecar(path, problem, data)
            paths.append(path)
    test = problem.generator.sample(cfg.n_test, seed=_test_seed(cfg))
    test_path = out_dir / "test.csv"
    test.save_csv(test_path)
    _write_sidecar(test_path, problem, test)
    paths.append(test_path)
    _write_metadata(cfg, problem, out_dir, "generate")
    return paths


def _write_sidecar(path: Path, problem: Problem, data: SampleSet) -> None:
    record = {
        "generator": getattr(problem.generator, "name", "unknown"),
        "generator_digest": _generator_digest(problem.generator),
        "seed": data.seed,
        "n": data.n,
    }
    with open(path.with_suffix(".meta.json"), "w") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# surrogate reference
# ---------------------------------------------------------------------------

def _surrogate_digest(cfg: RunConfig, problem: Problem) -> str:
    payload = {
        "game": cfg.game,
        "basis": problem.basis.metadata(),
        "generator": _generator_digest(problem.generator),
        "surrogate": dataclasses.asdict(cfg.surrogate),
        "tau": cfg.surrogate.tau if cfg.surrogate.tau is not None else cfg.solver.tau,
        "relax_slack": cfg.relax_slack,
        "tol_feas": cfg.tol_feas,
        "seed": _surrogate_seed(cfg),
    }
    if cfg.game == "portfolio":
        payload["params"] = dataclasses.asdict(problem.game.extras["portfolio_params"])
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:20]


def surrogate_reference(cfg: RunConfig, problem: Problem,
                        cache_dir: Optional[Path] = None) -> CoefficientProfile:
    """Solve (or load) the high-accuracy reference profile for rel_dist."""
    cache_dir = Path(cache_dir) if cache_dir is not None else Path(cfg.out) / "cache"
    cache_dir.mkdir(parents=True, exist_ok=True)
    key = _surrogate_digest(cfg, problem)
    cache_file = cache_dir / f"a_star_{key}.npz"
    layout_game = problem.game
    if cache_file.exists():
        with np.load(cache_file) as payload:
            coeffs = tuple(payload[f"A_{i}"] for i in range(layout_game.n_players))
            zetas = payload["zetas"] if "zetas" in payload.files else None
        return CoefficientProfile(coeffs=coeffs, zetas=zetas)

    sur = cfg.surrogate
    tau = sur.tau if sur.tau is not None else cfg.solver.tau
    data = problem.generator.sample(sur.n_ref, seed=_surrogate_seed(cfg))
    spec = FeasibleSetSpec.for_game(problem.game, data, shift=cfg.relax_slack,
                                    tol=cfg.tol_feas, max_iter=cfg.proj_max_iter)
    warm_profile = None
    warm_n = int(sur.warm_fraction * sur.n_ref)
    if 0 < warm_n < sur.n_ref:
        warm_data = SampleSet(xs=data.xs[:warm_n], ys=data.ys[:warm_n], seed=data.seed)
        warm_spec = FeasibleSetSpec.for_game(problem.game, warm_data, shift=cfg.relax_slack,
                                             tol=cfg.tol_feas, max_iter=cfg.proj_max_iter)
        warm_cfg = SolverConfig(tau=tau, max_iters=sur.warm_iters or sur.max_iters,
                                residual_tol=sur.residual_tol)
        warm_profile = solve_offline(problem.game, problem.basis, warm_data, warm_spec,
                                     warm_cfg).profile
    solve_cfg = SolverConfig(tau=tau, max_iters=sur.max_iters, residual_tol=sur.residual_tol)
    report = solve_offline(problem.game, problem.basis, data, spec, solve_cfg,
                           initial=warm_profile)
    profile = report.profile
    payload = {f"A_{i}": profile.coeffs[i] for i in range(problem.game.n_players)}
    if profile.zetas is not None:
        payload["zetas"] = profile.zetas
    np.savez(cache_file, **payload)
    return profile


# ---------------------------------------------------------------------------
# experiment
# ---------------------------------------------------------------------------

@dataclass
class ExperimentResult:
    rows: list
    summary: list
    exit_code: int
    results_path: Path
    summary_path: Path


def cmd_experiment(cfg: RunConfig) -> ExperimentResult:
    """Solve every (n, seed) cell, evaluate on the test set, and relate each
    solution to the cached surrogate reference. Cells whose projection
    reports an infeasible empirical set are marked and skipped, and the run
    continues with exit code 2."""
    problem = build_problem(cfg)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    test = problem.generator.sample(cfg.n_test, seed=_test_seed(cfg))
    reference = surrogate_reference(cfg, problem)

    rows = []
    any_infeasible = False
    for n in cfg.n_list:
        for s in cfg.seeds:
            data = problem.generator.sample(n, seed=_train_seed(cfg, n, s))
            spec = FeasibleSetSpec.for_game(problem.game, data, shift=cfg.relax_slack,
                                            tol=cfg.tol_feas, max_iter=cfg.proj_max_iter)
            try:
                report = solve_offline(problem.game, problem.basis, data, spec, cfg.solver)
            except InfeasibleOrIllConditioned:
                any_infeasible = True
                for player in range(problem.game.n_players):
                    rows.append((n, s, player + 1, float("nan"), float("nan"),
                                 float("nan"), float("nan"), "infeasible"))
                continue
            rel = relative_distance(report.profile, reference)
            evals = evaluate_on_test(problem.game, problem.basis, report.profile, test)
            for player, ev in enumerate(evals, start=1):
                rows.append((n, s, player, ev.payoff, ev.penalty_reg, ev.constraint,
                             rel, "ok"))
    rows.sort(key=lambda r: (r[0], r[1], r[2]))

    results_path = out_dir / "results.csv"
    with open(results_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULTS_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])

    summary = _summarize(problem.game.n_players, rows, cfg.n_list)
    summary_path = out_dir / "summary.csv"
    _write_summary(summary_path, problem.game.n_players, summary)
    _write_metadata(cfg, problem, out_dir, "experiment",
                    extra={"surrogate_digest": _surrogate_digest(cfg, problem)})
    return ExperimentResult(rows=rows, summary=summary, exit_code=2 if any_infeasible else 0,
                            results_path=results_path, summary_path=summary_path)


def _summarize(n_players: int, rows: Sequence[tuple], n_list: Sequence[int]) -> list:
    summary = []
    for n in n_list:
        cell = [r for r in rows if r[0] == n and r[7] == "ok"]
        rel = [r[6] for r in cell if r[2] == 1]
        entry = {"n": n, "rel_dist_median": float(np.median(rel)) if rel else float("nan")}
        for player in range(1, n_players + 1):
            sub = [r for r in cell if r[2] == player]
            for j, name in ((3, "payoff"), (4, "penalty_reg"), (5, "constraint")):
                vals = [r[j] for r in sub]
                entry[f"{name}_p{player}"] = float(np.median(vals)) if vals else float("nan")
        summary.append(entry)
    return summary


def _write_summary(path: Path, n_players: int, summary: list) -> None:
    cols = ["n", "rel_dist_median"]
    for player in range(1, n_players + 1):
        cols += [f"payoff_p{player}", f"penalty_reg_p{player}", f"constraint_p{player}"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for entry in summary:
            writer.writerow([_fmt(entry[c]) for c in cols])


# ---------------------------------------------------------------------------
# bounds
# ---------------------------------------------------------------------------

def _resolve_ld_params(cfg: RunConfig, problem: Problem) -> LDParams:
    overrides = dict(cfg.bounds.constants or {})
    needed = {"sup_f", "sup_h", "lip_f", "lip_h"}
    if needed.issubset(overrides):
        return LDParams(
            n_players=problem.game.n_players,
            d=problem.basis.d,
            radius=problem.game.radius,
            sup_f=overrides["sup_f"],
            sup_h=overrides["sup_h"],
            lip_f=overrides["lip_f"],
            lip_h=overrides["lip_h"],
            eps_valid=overrides.get("eps_valid", 0.9 * problem.game.slater_margin),
            slater_margin=overrides.get("slater_margin", problem.game.slater_margin),
        )
    est = estimate_ld_params(problem.game, problem.basis, problem.generator,
                             n_draws=cfg.bounds.estimate_draws,
                             seed=derive_seed(cfg.base_seed, 0xB0D5))
    if overrides:
        est = dataclasses.replace(est, **overrides)
    return est


def cmd_bounds(cfg: RunConfig) -> tuple[Path, Optional[Path]]:
    """Write the theoretical bound grid and, when configured, the
    Monte-Carlo deviation frequency table."""
    problem = build_problem(cfg)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    params = _resolve_ld_params(cfg, problem)

    bounds_path = out_dir / "bounds.csv"
    with open(bounds_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bound_type", "eps", "n", "nu", "log_covering_count",
                         "log_failure", "raw_bound", "bound", "error"])
        for eps in cfg.bounds.eps_list:
            for n in cfg.bounds.n_list:
                for fn, kind in ((gradient_deviation_bound, "gradient"),
                                 (feasible_set_bound, "feasible-set")):
                    try:
                        rep = fn(params, eps, n, probe_count=cfg.bounds.probe_count)
                        writer.writerow([kind, _fmt(eps), n, _fmt(rep.nu),
                                         _fmt(rep.log_covering_count), _fmt(rep.log_failure),
                                         _fmt(rep.raw_bound), _fmt(rep.bound), ""])
                    except ValueError as exc:
                        writer.writerow([kind, _fmt(eps), n, "", "", "", "", "", str(exc)])

    freq_path = None
    if cfg.bounds.mc_trials > 0:
        layout_probes = _default_probes(problem)
        study = monte_carlo_deviation_study(
            problem.game, problem.basis, problem.generator, params,
            layout_probes, cfg.bounds.mc_eps, cfg.bounds.mc_n_list,
            trials=cfg.bounds.mc_trials, seed=derive_seed(cfg.base_seed, 0x3C0))
        freq_path = out_dir / "deviation_frequencies.csv"
        study.write_csv(freq_path)
    _write_metadata(cfg, problem, out_dir, "bounds",
                    extra={"ld_params": dataclasses.asdict(params)})
    return bounds_path, freq_path


def _default_probes(problem: Problem) -> list[CoefficientProfile]:
    game, basis = problem.game, problem.basis
    zero = CoefficientProfile.zeros(game, basis)
    probes = [zero]
    scale = min(1.0, game.radius / 4.0)
    for i in range(game.n_players):
        for sign in (+1.0, -1.0):
            A = np.zeros((game.m[i], basis.d))
            A[:, 0] = sign * scale
            probes.append(zero.with_block(i, A, None))
    return probes


# ---------------------------------------------------------------------------
# plotdata
# ---------------------------------------------------------------------------

def cmd_plotdata(results_path, out_path) -> Path:
    """Long-format series for external plotting.

    Emits per-n medians: `rel_dist` (player "all"), and per player the
    stacked decomposition `augmented_payoff` plus `penalty_reg`, whose sum
    reproduces the payoff column.
    """
    results_path = Path(results_path)
    if not results_path.exists():
        raise SchemaError(f"results file {results_path} does not exist")
    with open(results_path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise SchemaError("results file is empty")
        missing = [c for c in RESULTS_COLUMNS[:7] if c not in reader.fieldnames]
        if missing:
            raise SchemaError(f"results file missing column(s): {', '.join(missing)}")
        rows = [r for r in reader]
    if not rows:
        raise SchemaError("results file has no data rows")

    ok = [r for r in rows if r.get("status", "ok") == "ok"]
    n_values = sorted({int(r["n"]) for r in rows})
    players = sorted({int(r["player"]) for r in rows})
    out_rows = []
    for n in n_values:
        rel = [float(r["rel_dist"]) for r in ok if int(r["n"]) == n and int(r["player"]) == players[0]]
        if rel:
            out_rows.append(("rel_dist", n, "all", float(np.median(rel))))
        for player in players:
            sub = [r for r in ok if int(r["n"]) == n and int(r["player"]) == player]
            if not sub:
                continue
            payoff = float(np.median([float(r["payoff"]) for r in sub]))
            pen = float(np.median([float(r["penalty_reg"]) for r in sub]))
            out_rows.append(("augmented_payoff", n, str(player), payoff - pen))
            out_rows.append(("penalty_reg", n, str(player), pen))

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["series", "n", "player", "value"])
        for series, n, player, value in out_rows:
            writer.writerow([series, n, player, _fmt(value)])
    return out_path


# ---------------------------------------------------------------------------
# single solve
# ---------------------------------------------------------------------------

def cmd_solve(cfg: RunConfig, n: Optional[int] = None, seed: Optional[int] = None) -> Path:
    """One offline solve on a freshly generated dataset; writes the report."""
    problem = build_problem(cfg)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    n = n if n is not None else cfg.n_list[-1]
    seed = seed if seed is not None else cfg.seeds[0]
    data = problem.generator.sample(n, seed=_train_seed(cfg, n, seed))
    spec = FeasibleSetSpec.for_game(problem.game, data, shift=cfg.relax_slack,
                                    tol=cfg.tol_feas, max_iter=cfg.proj_max_iter)
    report = solve_offline(problem.game, problem.basis, data, spec, cfg.solver)
    path = out_dir / f"solve_n{n}_seed{seed}.json"
    with open(path, "w") as fh:
        json.dump(report.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_metadata(cfg, problem, out_dir, "solve")
    return path
