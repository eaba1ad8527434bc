"""Empirical feasible sets and projections onto them.

Per player the feasible block is {||vec(A_i)||_2 <= R} x {zeta in bounds}
intersected with one empirical expectation-constraint level set
{h_i(A_i, zeta_i) <= shift}. Projection combines exact ball/box projections
with Polyak halfspace cuts; every step is anchored back toward the input
point (Haugazeau's correction), so the returned point approximates the
metric projection, not merely a feasible point.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .basis import BasisSet
from .games import (
    CoefficientProfile,
    GameDefinition,
    SampleSet,
    empirical_constraint,
    empirical_constraint_gradient,
)

__all__ = [
    "FeasibleSetSpec",
    "InfeasibleOrIllConditioned",
    "project_ball",
    "project_feasible",
    "project_profile",
    "sandwich_test",
    "SandwichRecord",
]


class InfeasibleOrIllConditioned(RuntimeError):
    """Projection failed to reach the constraint level set.

    Signals a possibly empty empirical feasible set (expected at small
    sample sizes) or a degenerate constraint gradient. Carries the best
    iterate found and its residual violation.
    """

    def __init__(self, message: str, player: int, best_coeffs: np.ndarray,
                 best_zeta: Optional[float], violation: float):
        super().__init__(message)
        self.player = player
        self.best_coeffs = best_coeffs
        self.best_zeta = best_zeta
        self.violation = violation


@dataclass(frozen=True)
class FeasibleSetSpec:
    """One player-wise feasible set: ball radius, zeta box, and a shifted
    empirical constraint level {h <= shift} defined by `data`.

    shift = 0 gives the plain empirical set; +/-eps give the shifted sets
    used by the sandwich checks (with `data` a large Monte-Carlo draw when
    the expected constraint is being approximated).
    """

    radius: float
    zeta_bounds: tuple[float, float] = (-1.0, 1.0)
    shift: float = 0.0
    data: Optional[SampleSet] = None
    tol: float = 1e-8
    max_iter: int = 500

    def __post_init__(self) -> None:
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")

    @classmethod
    def for_game(cls, game: GameDefinition, data: Optional[SampleSet],
                 shift: float = 0.0, tol: float = 1e-8, max_iter: int = 500) -> "FeasibleSetSpec":
        return cls(radius=game.radius, zeta_bounds=game.zeta_bounds,
                   shift=shift, data=data, tol=tol, max_iter=max_iter)

    def shifted(self, shift: float) -> "FeasibleSetSpec":
        return replace(self, shift=shift)


def project_ball(v: np.ndarray, radius: float) -> np.ndarray:
    """Euclidean projection onto the closed ball of the given radius."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    v = np.asarray(v, dtype=np.float64)
    nrm = float(np.linalg.norm(v))
    if nrm <= radius:
        return v.copy()
    return v * (radius / nrm)


def _haugazeau_combine(anchor: np.ndarray, x: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Project `anchor` onto the intersection of the two halfspaces
    {u: <anchor-x, u-x> <= 0} and {u: <x-z, u-z> <= 0}.

    This is the correction that steers cut iterates toward the metric
    projection of the anchor instead of an arbitrary feasible point.
    """
    dax = anchor - x
    dxz = x - z
    chi = float(dax @ dxz)
    mu = float(dax @ dax)
    nu = float(dxz @ dxz)
    if nu == 0.0:
        return x
    rho = mu * nu - chi * chi
    if rho <= 1e-30 * max(mu * nu, 1e-300):
        return z.copy()
    if chi * nu >= rho:
        return anchor + (1.0 + chi / nu) * (z - x)
    return x + (nu / rho) * (chi * dax + mu * (z - x))


def _project_block_core(
    block0: np.ndarray,
    n_coeff: int,
    radius: float,
    zeta_bounds: tuple[float, float],
    has_zeta: bool,
    shift: float,
    tol: float,
    max_iter: int,
    eval_h_grad: Optional[Callable[[np.ndarray], tuple[float, np.ndarray]]],
    player: int,
) -> np.ndarray:
    """Shared projection engine on a flat per-player block [vec(A_i); zeta].

    eval_h_grad evaluates the empirical constraint and its gradient at a
    block; pass None for games whose constraint is a vacuous constant.
    """

    def ball_box(u: np.ndarray) -> np.ndarray:
        out = u.copy()
        out[:n_coeff] = project_ball(out[:n_coeff], radius)
        if has_zeta:
            out[n_coeff] = min(max(out[n_coeff], zeta_bounds[0]), zeta_bounds[1])
        return out

    anchor = np.asarray(block0, dtype=np.float64).copy()
    if eval_h_grad is None:
        return ball_box(anchor)

    x = anchor.copy()
    best = None
    best_viol = np.inf
    for _ in range(max_iter):
        cand = ball_box(x)
        hval, grad = eval_h_grad(cand)
        viol = hval - shift
        if viol < best_viol:
            best_viol = viol
            best = cand
        if viol <= tol:
            return cand
        # Haugazeau step with the ball/box projector as the cutter
        x = _haugazeau_combine(anchor, x, cand)
        # Polyak cut from the linearization of h at the candidate point
        gnorm2 = float(grad @ grad)
        if gnorm2 <= 0.0:
            raise InfeasibleOrIllConditioned(
                f"player {player}: constraint gradient vanished at violation {viol:.3e}",
                player=player,
                best_coeffs=best[:n_coeff].copy(),
                best_zeta=float(best[n_coeff]) if has_zeta else None,
                violation=best_viol,
            )
        overshoot = hval + float(grad @ (x - cand)) - shift
        if overshoot > 0.0:
            cut = x - (overshoot / gnorm2) * grad
            x = _haugazeau_combine(anchor, x, cut)
    raise InfeasibleOrIllConditioned(
        f"player {player}: projection did not reach the constraint level "
        f"within {max_iter} iterations (violation {best_viol:.3e})",
        player=player,
        best_coeffs=best[:n_coeff].copy(),
        best_zeta=float(best[n_coeff]) if has_zeta else None,
        violation=best_viol,
    )


def project_feasible(
    spec: FeasibleSetSpec,
    game: GameDefinition,
    basis: BasisSet,
    profile: CoefficientProfile,
    i: int,
) -> tuple[np.ndarray, Optional[float]]:
    """Project player i's block of `profile` onto the player's feasible set.

    Returns (coefficient matrix, zeta). Raises InfeasibleOrIllConditioned
    when the level set cannot be reached within spec.max_iter cuts.
    """
    if not 0 <= i < game.n_players:
        raise ValueError(f"player index {i} out of range")
    m_i = game.m[i]
    d = basis.d
    n_coeff = m_i * d
    has_zeta = game.has_zeta
    block = profile.coeffs[i].ravel()
    if has_zeta:
        block = np.concatenate([block, [float(profile.zetas[i])]])

    if game.trivial_constraint or spec.data is None:
        eval_h_grad = None
    else:
        def eval_h_grad(u: np.ndarray) -> tuple[float, np.ndarray]:
            trial = profile.with_block(i, u[:n_coeff].reshape(m_i, d),
                                       float(u[n_coeff]) if has_zeta else None)
            hval = empirical_constraint(game, basis, trial, i, spec.data)
            gA, gz = empirical_constraint_gradient(game, basis, trial, i, spec.data)
            grad = np.concatenate([gA, [gz]]) if has_zeta else gA
            return hval, grad

    out = _project_block_core(
        block, n_coeff, spec.radius, spec.zeta_bounds, has_zeta,
        spec.shift, spec.tol, spec.max_iter, eval_h_grad, player=i,
    )
    zeta = float(out[n_coeff]) if has_zeta else None
    return out[:n_coeff].reshape(m_i, d), zeta


def project_profile(
    spec: FeasibleSetSpec,
    game: GameDefinition,
    basis: BasisSet,
    profile: CoefficientProfile,
) -> CoefficientProfile:
    """Apply `project_feasible` to every player's block."""
    coeffs = []
    zetas = [] if game.has_zeta else None
    for i in range(game.n_players):
        A_i, zeta_i = project_feasible(spec, game, basis, profile, i)
        coeffs.append(A_i)
        if zetas is not None:
            zetas.append(zeta_i)
    return CoefficientProfile(coeffs=tuple(coeffs),
                              zetas=np.array(zetas) if zetas is not None else None)


@dataclass(frozen=True)
class SandwichRecord:
    """Membership of one probe in the inner / empirical / outer sets and
    whether the inclusion chain inner => empirical => outer is violated."""

    probe_index: int
    in_inner: bool
    in_empirical: bool
    in_outer: bool

    @property
    def violated(self) -> bool:
        return (self.in_inner and not self.in_empirical) or \
               (self.in_empirical and not self.in_outer)


def _member(spec: FeasibleSetSpec, game: GameDefinition, basis: BasisSet,
            probe: CoefficientProfile) -> bool:
    for i in range(game.n_players):
        if empirical_constraint(game, basis, probe, i, spec.data) > spec.shift:
            return False
    return True


def sandwich_test(
    spec_inner: FeasibleSetSpec,
    spec_empirical: FeasibleSetSpec,
    spec_outer: FeasibleSetSpec,
    game: GameDefinition,
    basis: BasisSet,
    probes: Sequence[CoefficientProfile],
) -> list[SandwichRecord]:
    """Evaluate the set-inclusion chain on in-ball probe profiles.

    spec_inner / spec_outer carry a large Monte-Carlo dataset standing in
    for the expected constraint with shifts -eps / +eps; spec_empirical
    carries the finite training dataset with shift 0.
    """
    records = []
    for idx, probe in enumerate(probes):
        records.append(SandwichRecord(
            probe_index=idx,
            in_inner=_member(spec_inner, game, basis, probe),
            in_empirical=_member(spec_empirical, game, basis, probe),
            in_outer=_member(spec_outer, game, basis, probe),
        ))
    return records
