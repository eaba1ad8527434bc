"""Extra-gradient solvers for the empirical variational inequality.

Offline mode iterates on one fixed dataset; online mode draws a fresh,
superlinearly growing batch each iteration (the sample-hungry baseline).
Both use two projected steps per iteration and track the natural residual
||a - P(a - tau F(a))|| / tau as the optimality measure.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, asdict
from typing import Callable, Optional

import numpy as np

from .basis import BasisSet
from .feasible import FeasibleSetSpec, _project_block_core, project_ball
from .games import (
    CoefficientProfile,
    GameDefinition,
    ProfileLayout,
    SampleSet,
    empirical_constraint,
    empirical_constraint_gradient,
    empirical_pseudo_gradient,
    phi_for,
)
from .seeding import derive_seed

__all__ = [
    "SolverConfig",
    "SolveReport",
    "NumericalBlowup",
    "solve_offline",
    "solve_online",
    "relative_distance",
    "natural_residual",
    "make_empirical_ops",
]


class NumericalBlowup(RuntimeError):
    """Non-finite gradient encountered; carries the iterate snapshot."""

    def __init__(self, message: str, iteration: int, profile: CoefficientProfile):
        super().__init__(message)
        self.iteration = iteration
        self.profile = profile


@dataclass(frozen=True)
class SolverConfig:
    tau: float
    max_iters: int
    residual_tol: float = 1e-9
    mode: str = "offline_saa"          # or "online_growing_batch"
    batch_rho: float = 1.0             # online batch size N_k = ceil(rho * k^(1+growth))
    batch_growth: float = 0.5
    sample_budget: Optional[int] = None
    seed: int = 0
    record_every: Optional[int] = None  # residual history decimation; default keeps <= 1000 points

    def __post_init__(self) -> None:
        if self.tau <= 0:
            raise ValueError("step size tau must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.residual_tol < 0:
            raise ValueError("residual_tol must be >= 0")
        if self.mode not in ("offline_saa", "online_growing_batch"):
            raise ValueError(f"unknown mode {self.mode!r}")

    @property
    def history_stride(self) -> int:
        if self.record_every is not None:
            return max(1, int(self.record_every))
        return max(1, self.max_iters // 1000)


@dataclass
class SolveReport:
    profile: CoefficientProfile
    iterations: int
    final_residual: float
    residual_history: list          # (iteration, residual) pairs, decimated
    constraint_values: tuple        # per-player empirical constraint at the solution
    samples_consumed: int
    wall_time: float                # excluded from determinism guarantees
    stop_reason: str
    config: SolverConfig

    def to_json_dict(self) -> dict:
        return {
            "config": asdict(self.config),
            "iterations": self.iterations,
            "final_residual": self.final_residual,
            "stop_reason": self.stop_reason,
            "samples_consumed": self.samples_consumed,
            "wall_time": self.wall_time,
            "residual_history": [[int(k), float(r)] for k, r in self.residual_history],
            "constraint_values": [float(v) for v in self.constraint_values],
            "coefficients": [A.tolist() for A in self.profile.coeffs],
            "zetas": None if self.profile.zetas is None else self.profile.zetas.tolist(),
        }


# ---------------------------------------------------------------------------
# dataset-bound empirical operators
# ---------------------------------------------------------------------------

class GenericEmpiricalOps:
    """Empirical operator stack built from the game's scalar/batch callables.

    Slow but faithful; doubles as the reference implementation that any
    game-provided fast operator must match.
    """

    def __init__(self, game: GameDefinition, basis: BasisSet, data: SampleSet):
        self.game = game
        self.basis = basis
        self.data = data
        self.layout = ProfileLayout.for_game(game, basis)
        phi_for(basis, data)  # warm the design-matrix cache

    def gradient(self, flat: np.ndarray) -> np.ndarray:
        profile = self.layout.unflatten(flat)
        return empirical_pseudo_gradient(self.game, self.basis, profile, self.data)

    def _trial(self, i: int, block: np.ndarray) -> CoefficientProfile:
        m_i, d = self.game.m[i], self.layout.d
        zeta = float(block[m_i * d]) if self.game.has_zeta else None
        profile = CoefficientProfile.zeros(self.game, self.basis)
        return profile.with_block(i, block[:m_i * d].reshape(m_i, d), zeta)

    def constraint_value(self, i: int, block: np.ndarray) -> float:
        return empirical_constraint(self.game, self.basis, self._trial(i, block), i, self.data)

    def constraint_value_grad(self, i: int, block: np.ndarray) -> tuple[float, np.ndarray]:
        trial = self._trial(i, block)
        h = empirical_constraint(self.game, self.basis, trial, i, self.data)
        gA, gz = empirical_constraint_gradient(self.game, self.basis, trial, i, self.data)
        grad = np.concatenate([gA, [gz]]) if self.game.has_zeta else gA
        return h, grad

    def constraint_lipschitz(self, i: int) -> Optional[float]:
        return None  # no cheap certified bound in the generic path


def make_empirical_ops(game: GameDefinition, basis: BasisSet, data: SampleSet):
    """Game-provided compiled operators when available, generic ones otherwise."""
    if game.fast_ops_factory is not None:
        ops = game.fast_ops_factory(game, basis, data)
        if ops is not None:
            return ops
    return GenericEmpiricalOps(game, basis, data)


class _ProfileProjector:
    """Per-player projection of a flat profile with a certified skip cache.

    For each player it remembers the last block at which the constraint was
    truly evaluated; when a Lipschitz bound certifies the new ball/box
    projected block still satisfies the constraint, the expensive level-set
    machinery is skipped. Outputs are identical either way.
    """

    def __init__(self, game: GameDefinition, layout: ProfileLayout,
                 spec: FeasibleSetSpec, ops):
        self.game = game
        self.layout = layout
        self.spec = spec
        self.ops = ops
        n = game.n_players
        self._lips = [ops.constraint_lipschitz(i) for i in range(n)]
        self._cache: list[Optional[tuple[np.ndarray, float]]] = [None] * n

    def _ball_box(self, block: np.ndarray, i: int) -> np.ndarray:
        m_i, d = self.game.m[i], self.layout.d
        out = block.copy()
        out[:m_i * d] = project_ball(out[:m_i * d], self.spec.radius)
        if self.game.has_zeta:
            lo, hi = self.spec.zeta_bounds
            out[m_i * d] = min(max(out[m_i * d], lo), hi)
        return out

    def project(self, flat: np.ndarray) -> np.ndarray:
        out = flat.copy()
        for i in range(self.game.n_players):
            start = self.layout.block_start(i)
            stop = start + self.layout.block_size(i)
            block = out[start:stop]
            if self.game.trivial_constraint or self.spec.data is None:
                out[start:stop] = self._ball_box(block, i)
                continue
            bb = self._ball_box(block, i)
            cached = self._cache[i]
            lip = self._lips[i]
            if cached is not None and lip is not None:
                ref_block, ref_h = cached
                drift = float(np.linalg.norm(bb - ref_block))
                if ref_h + lip * drift <= self.spec.shift:
                    out[start:stop] = bb
                    continue
            last_eval: dict = {}

            def eval_h_grad(u: np.ndarray) -> tuple[float, np.ndarray]:
                h, g = self.ops.constraint_value_grad(i, u)
                last_eval["point"] = u.copy()
                last_eval["h"] = h
                return h, g

            m_i, d = self.game.m[i], self.layout.d
            res = _project_block_core(
                block, m_i * d, self.spec.radius, self.spec.zeta_bounds,
                self.game.has_zeta, self.spec.shift, self.spec.tol,
                self.spec.max_iter, eval_h_grad, player=i,
            )
            if last_eval:
                self._cache[i] = (last_eval["point"], last_eval["h"])
            out[start:stop] = res
        return out


# ---------------------------------------------------------------------------
# solvers
# ---------------------------------------------------------------------------

def _check_finite(vec: np.ndarray, iteration: int, layout: ProfileLayout) -> None:
    if not np.all(np.isfinite(vec)):
        raise NumericalBlowup(
            f"non-finite gradient at iteration {iteration}",
            iteration=iteration,
            profile=layout.unflatten(np.nan_to_num(vec)),
        )


def _final_constraints(game, ops, layout, flat) -> tuple:
    vals = []
    for i in range(game.n_players):
        start = layout.block_start(i)
        block = flat[start:start + layout.block_size(i)]
        vals.append(ops.constraint_value(i, block))
    return tuple(vals)


def solve_offline(
    game: GameDefinition,
    basis: BasisSet,
    data: SampleSet,
    feasible_spec: FeasibleSetSpec,
    cfg: SolverConfig,
    initial: Optional[CoefficientProfile] = None,
) -> SolveReport:
    """Deterministic extra-gradient on the fixed-dataset operator.

    Starts from the projected zero profile (or a supplied warm start).
    Stops at the iteration budget or when the natural residual drops to
    cfg.residual_tol; the final residual is re-evaluated at the returned
    point rather than trusted from the loop.
    """
    if data.n < 1:
        raise ValueError("offline solve needs a non-empty dataset")
    if feasible_spec.data is not None and feasible_spec.data is not data:
        raise ValueError("feasible_spec must reference the same dataset as the solve")
    t0 = time.perf_counter()
    layout = ProfileLayout.for_game(game, basis)
    ops = make_empirical_ops(game, basis, data)
    projector = _ProfileProjector(game, layout, feasible_spec, ops)

    tau = cfg.tau
    stride = cfg.history_stride
    start = np.zeros(layout.size) if initial is None else initial.to_flat()
    a = projector.project(start)
    history: list[tuple[int, float]] = []
    stop_reason = "max_iters"
    iterations = 0
    for k in range(1, cfg.max_iters + 1):
        g = ops.gradient(a)
        _check_finite(g, k, layout)
        a_half = projector.project(a - tau * g)
        residual = float(np.linalg.norm(a - a_half)) / tau
        if k % stride == 0 or k == 1 or k == cfg.max_iters:
            history.append((k, residual))
        iterations = k
        if residual <= cfg.residual_tol:
            stop_reason = "residual_tol"
            if history[-1][0] != k:
                history.append((k, residual))
            break
        g_half = ops.gradient(a_half)
        _check_finite(g_half, k, layout)
        a = projector.project(a - tau * g_half)

    g = ops.gradient(a)
    final_residual = float(np.linalg.norm(a - projector.project(a - tau * g))) / tau
    report = SolveReport(
        profile=layout.unflatten(a),
        iterations=iterations,
        final_residual=final_residual,
        residual_history=history,
        constraint_values=_final_constraints(game, ops, layout, a),
        samples_consumed=data.n,
        wall_time=time.perf_counter() - t0,
        stop_reason=stop_reason,
        config=cfg,
    )
    return report


def online_batch_size(cfg: SolverConfig, k: int) -> int:
    """Batch size at (1-based) iteration k: ceil(rho * k^(1+growth))."""
    return int(math.ceil(cfg.batch_rho * k ** (1.0 + cfg.batch_growth)))


def solve_online(
    game: GameDefinition,
    basis: BasisSet,
    sampler,
    feasible_spec_factory: Callable[[SampleSet], FeasibleSetSpec],
    cfg: SolverConfig,
) -> SolveReport:
    """Extra-gradient with a fresh, growing batch per iteration.

    Iteration k draws N_k = ceil(rho * k^(1+growth)) samples (seeded from
    cfg.seed and k), builds that batch's operator and feasible set, and takes
    one extra-gradient step. Stops at max_iters or the sample budget.
    """
    if cfg.mode != "online_growing_batch":
        raise ValueError("solve_online requires mode='online_growing_batch'")
    t0 = time.perf_counter()
    layout = ProfileLayout.for_game(game, basis)
    tau = cfg.tau
    stride = cfg.history_stride

    a = np.zeros(layout.size)
    a[:] = _ball_box_only(game, layout, a)
    history: list[tuple[int, float]] = []
    samples_consumed = 0
    stop_reason = "max_iters"
    iterations = 0
    ops = None
    projector = None
    for k in range(1, cfg.max_iters + 1):
        n_k = online_batch_size(cfg, k)
        if cfg.sample_budget is not None and samples_consumed + n_k > cfg.sample_budget:
            stop_reason = "sample_budget"
            break
        data_k = sampler.sample(n_k, seed=derive_seed(cfg.seed, k))
        samples_consumed += n_k
        ops = make_empirical_ops(game, basis, data_k)
        projector = _ProfileProjector(game, layout, feasible_spec_factory(data_k), ops)

        g = ops.gradient(a)
        _check_finite(g, k, layout)
        a_half = projector.project(a - tau * g)
        residual = float(np.linalg.norm(a - a_half)) / tau
        if k % stride == 0 or k == 1:
            history.append((k, residual))
        iterations = k
        if residual <= cfg.residual_tol:
            stop_reason = "residual_tol"
            break
        g_half = ops.gradient(a_half)
        _check_finite(g_half, k, layout)
        a = projector.project(a - tau * g_half)

    if ops is None:
        raise ValueError("online solve performed no iterations; raise the sample budget")
    g = ops.gradient(a)
    final_residual = float(np.linalg.norm(a - projector.project(a - tau * g))) / tau
    if not history:
        history.append((iterations, final_residual))
    return SolveReport(
        profile=layout.unflatten(a),
        iterations=iterations,
        final_residual=final_residual,
        residual_history=history,
        constraint_values=_final_constraints(game, ops, layout, a),
        samples_consumed=samples_consumed,
        wall_time=time.perf_counter() - t0,
        stop_reason=stop_reason,
        config=cfg,
    )


def _ball_box_only(game: GameDefinition, layout: ProfileLayout, flat: np.ndarray) -> np.ndarray:
    out = flat.copy()
    for i in range(game.n_players):
        start = layout.block_start(i)
        m_i = game.m[i]
        sl = slice(start, start + m_i * layout.d)
        out[sl] = project_ball(out[sl], game.radius)
        if game.has_zeta:
            lo, hi = game.zeta_bounds
            idx = start + m_i * layout.d
            out[idx] = min(max(out[idx], lo), hi)
    return out


def relative_distance(profile: CoefficientProfile, reference: CoefficientProfile) -> float:
    """||flat(a) - flat(ref)||_2 / ||flat(ref)||_2."""
    fa = profile.to_flat()
    fr = reference.to_flat()
    if fa.shape != fr.shape:
        raise ValueError(f"profiles have different flat sizes {fa.shape} vs {fr.shape}")
    denom = float(np.linalg.norm(fr))
    if denom == 0.0:
        raise ValueError("reference profile has zero norm")
    return float(np.linalg.norm(fa - fr)) / denom


def natural_residual(
    game: GameDefinition,
    basis: BasisSet,
    data: SampleSet,
    feasible_spec: FeasibleSetSpec,
    profile: CoefficientProfile,
    tau: float,
) -> float:
    """Post-hoc fixed-point residual via the generic operator path."""
    layout = ProfileLayout.for_game(game, basis)
    ops = GenericEmpiricalOps(game, basis, data)
    projector = _ProfileProjector(game, layout, feasible_spec, ops)
    a = profile.to_flat()
    g = ops.gradient(a)
    return float(np.linalg.norm(a - projector.project(a - tau * g))) / tau
