"""Game definitions and the empirical / scenario / Monte-Carlo operator stack.

A game bundles per-player objective derivatives and a scalar expectation
constraint per player. Decisions are functions of an observed feature vector,
parameterized by basis coefficients; the operators here act on the stacked
coefficient vector (the variational-inequality variable).

Summation over samples uses numpy reductions, whose order is fixed for a
given build/thread configuration; run metadata records the reduction mode so
experiments stay reproducible on a machine.
"""

from __future__ import annotations

import csv
import weakref
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .basis import BasisSet, evaluate_basis, evaluate_basis_batch
from .seeding import derive_rng

__all__ = [
    "SampleSet",
    "GameDefinition",
    "CoefficientProfile",
    "ProfileLayout",
    "smoothed_pos",
    "smoothed_pos_grad",
    "smoothed_min",
    "smoothed_min_grad",
    "pseudo_gradient_scenario",
    "empirical_pseudo_gradient",
    "expected_pseudo_gradient_mc",
    "empirical_constraint",
    "empirical_constraint_gradient",
    "production_game",
    "affine_game",
    "toy_quadratic_game",
    "ToyRegressionGenerator",
    "ConstantGenerator",
    "ProductionDataGenerator",
]


# ---------------------------------------------------------------------------
# smoothing primitives (C^1 replacements for max(0, .) and min)
# ---------------------------------------------------------------------------

def smoothed_pos(x, delta: float):
    """C^1 positive part: 0 for x<=0, x^2/(2*delta) on (0, delta], x - delta/2 beyond.

    Convex, exact outside a delta-band, matches max(0, x) up to delta/2.
    """
    x = np.asarray(x, dtype=np.float64)
    return np.where(x <= 0.0, 0.0, np.where(x <= delta, x * x / (2.0 * delta), x - delta / 2.0))


def smoothed_pos_grad(x, delta: float):
    """Derivative of `smoothed_pos`: ramps linearly from 0 to 1 across the band."""
    x = np.asarray(x, dtype=np.float64)
    return np.where(x <= 0.0, 0.0, np.where(x <= delta, x / delta, 1.0))


def _smoothed_abs(t, delta: float):
    t = np.asarray(t, dtype=np.float64)
    return np.where(np.abs(t) >= delta, np.abs(t), t * t / (2.0 * delta) + delta / 2.0)


def smoothed_min(a, b, delta: float):
    """C^1 minimum: exact when |a-b| >= delta, quadratic interpolant inside."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return (a + b - _smoothed_abs(a - b, delta)) / 2.0


def smoothed_min_grad(a, b, delta: float):
    """Partial derivative of `smoothed_min` with respect to its first argument."""
    t = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    dabs = np.where(np.abs(t) >= delta, np.sign(t), t / delta)
    return (1.0 - dabs) / 2.0


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SampleSet:
    """Offline dataset of i.i.d. (feature, noise) pairs.

    xs: (n, n_x) observed features; ys: (n, n_y) unobservable outcomes.
    seed records provenance of the generating stream (None for loaded data
    of unknown origin).
    """

    xs: np.ndarray
    ys: np.ndarray
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        xs = np.atleast_2d(np.asarray(self.xs, dtype=np.float64))
        ys = np.atleast_2d(np.asarray(self.ys, dtype=np.float64))
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)
        if xs.shape[0] != ys.shape[0]:
            raise ValueError(f"xs and ys disagree on sample count: {xs.shape[0]} vs {ys.shape[0]}")
        if xs.shape[0] < 1:
            raise ValueError("a SampleSet needs at least one sample")

    @property
    def n(self) -> int:
        return self.xs.shape[0]

    @property
    def n_x(self) -> int:
        return self.xs.shape[1]

    @property
    def n_y(self) -> int:
        return self.ys.shape[1]

    def save_csv(self, path) -> None:
        """Write `x_0,..,x_{n_x-1},y_0,..,y_{n_y-1}` rows at 17 significant digits."""
        header = [f"x_{j}" for j in range(self.n_x)] + [f"y_{j}" for j in range(self.n_y)]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for k in range(self.n):
                row = [f"{v:.17g}" for v in self.xs[k]] + [f"{v:.17g}" for v in self.ys[k]]
                writer.writerow(row)

    @classmethod
    def load_csv(cls, path, seed: Optional[int] = None) -> "SampleSet":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            n_x = sum(1 for h in header if h.startswith("x_"))
            n_y = sum(1 for h in header if h.startswith("y_"))
            if n_x + n_y != len(header) or n_x == 0 or n_y == 0:
                raise ValueError(f"unrecognized SampleSet header: {header}")
            rows = [[float(v) for v in row] for row in reader if row]
        arr = np.asarray(rows, dtype=np.float64)
        return cls(xs=arr[:, :n_x], ys=arr[:, n_x:], seed=seed)


# design-matrix cache; SampleSet and BasisSet are immutable so entries never go stale
_PHI_CACHE: "weakref.WeakKeyDictionary[SampleSet, dict]" = weakref.WeakKeyDictionary()


def phi_for(basis: BasisSet, data: SampleSet) -> np.ndarray:
    """Design matrix of basis evaluations for a dataset, memoized weakly."""
    per_data = _PHI_CACHE.setdefault(data, {})
    phi = per_data.get(basis)
    if phi is None:
        phi = evaluate_basis_batch(basis, data.xs)
        per_data[basis] = phi
    return phi


# ---------------------------------------------------------------------------
# games and coefficient profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GameDefinition:
    """Immutable game description.

    The scalar callables define the contract; the *_batch callables are
    optional vectorized implementations over a sample axis (rows), used by
    the empirical operators when present. `fast_ops_factory`, when set,
    builds dataset-bound compiled operators for the solver hot path; its
    output must agree with the generic path (covered by tests).
    """

    n_players: int
    m: tuple[int, ...]                 # per-player decision output dimension
    n_x: int
    n_y: int
    objective_derivative: Callable     # (i, z_list, y) -> (m_i,)
    objective_value: Callable          # (i, z_list, y) -> float   (reporting only)
    constraint_value: Callable         # (i, z_i, zeta_i, y) -> float
    constraint_derivative: Callable    # (i, z_i, zeta_i, y) -> ((m_i,), float)
    radius: float                      # coefficient ball radius per player
    reg_weight: float                  # strong-monotonicity regularization weight
    zeta_bounds: tuple[float, float] = (-1.0, 1.0)
    slater_margin: float = 0.1         # declared strict-feasibility slack (bounds inputs)
    has_zeta: bool = False
    trivial_constraint: bool = False   # constant, always-feasible constraint
    name: str = "game"
    objective_derivative_batch: Optional[Callable] = None   # (i, Z_list, Y) -> (n, m_i)
    constraint_value_batch: Optional[Callable] = None       # (i, Z_i, zeta_i, Y) -> (n,)
    constraint_derivative_batch: Optional[Callable] = None  # (i, Z_i, zeta_i, Y) -> ((n, m_i), (n,))
    cost_batch: Optional[Callable] = None                   # (i, Z_list, Y) -> (n,)  raw cost part
    penalty_batch: Optional[Callable] = None                # (i, Z_i) -> (n,)        penalty part
    fast_ops_factory: Optional[Callable] = None             # (game, basis, data) -> ops object
    extras: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.n_players < 1:
            raise ValueError("a game needs at least one player")
        if len(self.m) != self.n_players or any(mi < 1 for mi in self.m):
            raise ValueError(f"bad per-player output dims {self.m}")
        if self.n_x < 1 or self.n_y < 1:
            raise ValueError("feature and noise dimensions must be >= 1")
        if self.radius <= 0:
            raise ValueError("coefficient ball radius must be positive")
        if self.reg_weight < 0:
            raise ValueError("regularization weight must be nonnegative")
        lo, hi = self.zeta_bounds
        if not lo < hi:
            raise ValueError(f"zeta bounds must satisfy lo < hi, got {self.zeta_bounds}")
        if self.slater_margin <= 0:
            raise ValueError("slater margin must be positive")


@dataclass(frozen=True)
class ProfileLayout:
    """Flattening convention for coefficient profiles.

    Players in order; each player's coefficient matrix row-major, then its
    zeta auxiliary (when the game declares one).
    """

    m: tuple[int, ...]
    d: int
    has_zeta: bool

    @classmethod
    def for_game(cls, game: GameDefinition, basis: BasisSet) -> "ProfileLayout":
        return cls(m=tuple(game.m), d=basis.d, has_zeta=game.has_zeta)

    @property
    def n_players(self) -> int:
        return len(self.m)

    def block_size(self, i: int) -> int:
        return self.m[i] * self.d + (1 if self.has_zeta else 0)

    def block_start(self, i: int) -> int:
        return sum(self.block_size(j) for j in range(i))

    def coeff_slice(self, i: int) -> slice:
        start = self.block_start(i)
        return slice(start, start + self.m[i] * self.d)

    def zeta_index(self, i: int) -> Optional[int]:
        if not self.has_zeta:
            return None
        return self.block_start(i) + self.m[i] * self.d

    @property
    def size(self) -> int:
        return sum(self.block_size(i) for i in range(self.n_players))

    def unflatten(self, flat: np.ndarray) -> "CoefficientProfile":
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (self.size,):
            raise ValueError(f"flat vector has shape {flat.shape}, expected ({self.size},)")
        coeffs = []
        zetas = [] if self.has_zeta else None
        for i in range(self.n_players):
            coeffs.append(flat[self.coeff_slice(i)].reshape(self.m[i], self.d).copy())
            if self.has_zeta:
                zetas.append(float(flat[self.zeta_index(i)]))
        return CoefficientProfile(
            coeffs=tuple(coeffs),
            zetas=np.array(zetas) if zetas is not None else None,
        )


@dataclass(frozen=True, eq=False)
class CoefficientProfile:
    """Per-player coefficient matrices plus optional CVaR auxiliaries.

    This is the variational-inequality variable; `to_flat` realizes the
    documented flattening convention.
    """

    coeffs: tuple[np.ndarray, ...]         # player i: (m_i, d)
    zetas: Optional[np.ndarray] = None     # (n_players,) or None

    def __post_init__(self) -> None:
        coeffs = tuple(np.ascontiguousarray(A, dtype=np.float64) for A in self.coeffs)
        object.__setattr__(self, "coeffs", coeffs)
        if self.zetas is not None:
            z = np.asarray(self.zetas, dtype=np.float64).reshape(-1)
            if z.shape[0] != len(coeffs):
                raise ValueError("zetas length must match player count")
            object.__setattr__(self, "zetas", z)

    @property
    def n_players(self) -> int:
        return len(self.coeffs)

    @classmethod
    def zeros(cls, game: GameDefinition, basis: BasisSet) -> "CoefficientProfile":
        coeffs = tuple(np.zeros((mi, basis.d)) for mi in game.m)
        zetas = np.zeros(game.n_players) if game.has_zeta else None
        return cls(coeffs=coeffs, zetas=zetas)

    def to_flat(self) -> np.ndarray:
        parts = []
        for i, A in enumerate(self.coeffs):
            parts.append(A.ravel())
            if self.zetas is not None:
                parts.append(np.array([self.zetas[i]]))
        return np.concatenate(parts)

    def with_block(self, i: int, A_i: np.ndarray, zeta_i: Optional[float] = None) -> "CoefficientProfile":
        coeffs = list(self.coeffs)
        coeffs[i] = np.asarray(A_i, dtype=np.float64).reshape(self.coeffs[i].shape)
        zetas = None
        if self.zetas is not None:
            zetas = self.zetas.copy()
            if zeta_i is not None:
                zetas[i] = zeta_i
        return CoefficientProfile(coeffs=tuple(coeffs), zetas=zetas)


def decision_values(basis: BasisSet, profile: CoefficientProfile, data: SampleSet) -> list[np.ndarray]:
    """Realized decisions Z_i = Phi @ A_i^T for every player, (n, m_i) each."""
    phi = phi_for(basis, data)
    return [phi @ A.T for A in profile.coeffs]


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------

def pseudo_gradient_scenario(
    game: GameDefinition,
    basis: BasisSet,
    profile: CoefficientProfile,
    x: np.ndarray,
    y: np.ndarray,
) -> np.ndarray:
    """Unregularized stacked gradient at a single scenario (x, y).

    Player i's block is outer(dJ_i(z(x); y), phi(x)) flattened row-major;
    zeta slots receive 0 (the raw objective does not depend on them).
    """
    layout = ProfileLayout.for_game(game, basis)
    phi = evaluate_basis(basis, x)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.shape[0] != game.n_y:
        raise ValueError(f"y has length {y.shape[0]}, expected {game.n_y}")
    z_list = [A @ phi for A in profile.coeffs]
    out = np.zeros(layout.size)
    for i in range(game.n_players):
        dj = np.asarray(game.objective_derivative(i, z_list, y), dtype=np.float64).reshape(game.m[i])
        out[layout.coeff_slice(i)] = np.outer(dj, phi).ravel()
    return out


def _scenario_derivative_rows(game, i, Z_list, Y):
    """Per-sample objective derivatives, vectorized when the game provides it."""
    if game.objective_derivative_batch is not None:
        rows = np.asarray(game.objective_derivative_batch(i, Z_list, Y), dtype=np.float64)
        return rows.reshape(Y.shape[0], game.m[i])
    n = Y.shape[0]
    rows = np.empty((n, game.m[i]))
    for k in range(n):
        z_list = [Z[k] for Z in Z_list]
        rows[k] = np.asarray(game.objective_derivative(i, z_list, Y[k]), dtype=np.float64).reshape(game.m[i])
    return rows


def empirical_pseudo_gradient(
    game: GameDefinition,
    basis: BasisSet,
    profile: CoefficientProfile,
    data: SampleSet,
) -> np.ndarray:
    """Sample mean of the scenario pseudo-gradient plus the regularization term."""
    if data.n < 1:
        raise ValueError("empirical pseudo-gradient needs a non-empty dataset")
    layout = ProfileLayout.for_game(game, basis)
    phi = phi_for(basis, data)
    Z_list = [phi @ A.T for A in profile.coeffs]
    out = np.zeros(layout.size)
    for i in range(game.n_players):
        rows = _scenario_derivative_rows(game, i, Z_list, data.ys)
        out[layout.coeff_slice(i)] = (rows.T @ phi).ravel() / data.n
    if game.reg_weight != 0.0:
        out += game.reg_weight * profile.to_flat()
    return out


def expected_pseudo_gradient_mc(
    game: GameDefinition,
    basis: BasisSet,
    profile: CoefficientProfile,
    sampler,
    n_mc: int,
    seed: int,
) -> np.ndarray:
    """Monte-Carlo stand-in for the expected operator: a fresh size-n_mc draw."""
    if n_mc < 1:
        raise ValueError("n_mc must be >= 1")
    data = sampler.sample(n_mc, seed=seed)
    return empirical_pseudo_gradient(game, basis, profile, data)


def _zeta_of(profile: CoefficientProfile, i: int) -> float:
    return float(profile.zetas[i]) if profile.zetas is not None else 0.0


def empirical_constraint(
    game: GameDefinition,
    basis: BasisSet,
    profile: CoefficientProfile,
    i: int,
    data: SampleSet,
) -> float:
    """Sample mean of player i's constraint function over the dataset."""
    if not 0 <= i < game.n_players:
        raise ValueError(f"player index {i} out of range")
    if data.n < 1:
        raise ValueError("empirical constraint needs a non-empty dataset")
    phi = phi_for(basis, data)
    Z_i = phi @ profile.coeffs[i].T
    zeta = _zeta_of(profile, i)
    if game.constraint_value_batch is not None:
        vals = np.asarray(game.constraint_value_batch(i, Z_i, zeta, data.ys), dtype=np.float64)
        return float(vals.mean())
    total = 0.0
    for k in range(data.n):
        total += float(game.constraint_value(i, Z_i[k], zeta, data.ys[k]))
    return total / data.n


def empirical_constraint_gradient(
    game: GameDefinition,
    basis: BasisSet,
    profile: CoefficientProfile,
    i: int,
    data: SampleSet,
) -> tuple[np.ndarray, float]:
    """Gradient of the empirical constraint: (d/d vec(A_i), d/d zeta_i)."""
    if data.n < 1:
        raise ValueError("empirical constraint gradient needs a non-empty dataset")
    phi = phi_for(basis, data)
    Z_i = phi @ profile.coeffs[i].T
    zeta = _zeta_of(profile, i)
    if game.constraint_derivative_batch is not None:
        dz_rows, dzeta_rows = game.constraint_derivative_batch(i, Z_i, zeta, data.ys)
        dz_rows = np.asarray(dz_rows, dtype=np.float64).reshape(data.n, game.m[i])
        dzeta_rows = np.asarray(dzeta_rows, dtype=np.float64).reshape(data.n)
    else:
        dz_rows = np.empty((data.n, game.m[i]))
        dzeta_rows = np.empty(data.n)
        for k in range(data.n):
            dz, dzeta = game.constraint_derivative(i, Z_i[k], zeta, data.ys[k])
            dz_rows[k] = np.asarray(dz, dtype=np.float64).reshape(game.m[i])
            dzeta_rows[k] = float(dzeta)
    grad = (dz_rows.T @ phi).ravel() / data.n
    return grad, float(dzeta_rows.mean())


# ---------------------------------------------------------------------------
# built-in games
# ---------------------------------------------------------------------------

def _trivial_constraint_fields():
    return dict(
        constraint_value=lambda i, z_i, zeta_i, y: -1.0,
        constraint_derivative=lambda i, z_i, zeta_i, y: (np.zeros(np.shape(z_i)), 0.0),
        constraint_value_batch=lambda i, Z_i, zeta_i, Y: -np.ones(Y.shape[0]),
        constraint_derivative_batch=lambda i, Z_i, zeta_i, Y: (np.zeros_like(Z_i), np.zeros(Y.shape[0])),
        trivial_constraint=True,
        has_zeta=False,
    )


def production_game(
    n_players: int,
    base_cost: Sequence[float],
    revenue: Sequence[float],
    coupling: float,
    smooth_width: float = 0.01,
    n_x: int = 1,
    radius: float = 50.0,
    reg_weight: float = 0.0,
) -> GameDefinition:
    """Vendors choosing production quantities before demand is revealed.

    Player i pays a base cost plus a collective-volume price impact and sells
    min(production, demand) at a unit revenue. The kinked minimum is replaced
    by a C^1 quadratic interpolant of width `smooth_width` so the objective
    derivatives exist everywhere.
    """
    if coupling <= 0:
        raise ValueError("coupling must be positive")
    if smooth_width <= 0:
        raise ValueError("smooth_width must be positive")
    dvec = np.asarray(base_cost, dtype=np.float64).reshape(n_players)
    rvec = np.asarray(revenue, dtype=np.float64).reshape(n_players)
    if np.any(rvec < 0):
        raise ValueError("revenues must be nonnegative")

    def obj_value(i, z_list, y):
        z = np.array([float(np.squeeze(zj)) for zj in z_list])
        return float((dvec[i] + coupling * z.sum()) * z[i]
                     - rvec[i] * smoothed_min(z[i], y[i], smooth_width))

    def obj_derivative(i, z_list, y):
        z = np.array([float(np.squeeze(zj)) for zj in z_list])
        g = dvec[i] + coupling * z.sum() + coupling * z[i] \
            - rvec[i] * smoothed_min_grad(z[i], y[i], smooth_width)
        return np.array([g])

    def obj_derivative_batch(i, Z_list, Y):
        total = np.zeros(Y.shape[0])
        for Z in Z_list:
            total += Z[:, 0]
        g = dvec[i] + coupling * total + coupling * Z_list[i][:, 0] \
            - rvec[i] * smoothed_min_grad(Z_list[i][:, 0], Y[:, i], smooth_width)
        return g[:, None]

    return GameDefinition(
        n_players=n_players,
        m=(1,) * n_players,
        n_x=n_x,
        n_y=n_players,
        objective_derivative=obj_derivative,
        objective_value=obj_value,
        objective_derivative_batch=obj_derivative_batch,
        radius=radius,
        reg_weight=reg_weight,
        name="production",
        **_trivial_constraint_fields(),
    )


class ProductionDataGenerator:
    """Features uniform on [-1, 1]^{n_x}; per-player demand affine in the
    features plus bounded uniform noise, clipped to stay positive."""

    def __init__(self, n_players: int, n_x: int = 1, seed: int = 0,
                 base_demand: float = 2.0, feature_gain: float = 0.8, noise: float = 0.5):
        self.n_x = n_x
        self.n_y = n_players
        self.seed = seed
        self.name = "production-default"
        rng = derive_rng(912_001, n_players, n_x)
        self._w = rng.uniform(-feature_gain, feature_gain, size=(n_players, n_x))
        self._base = base_demand
        self._noise = noise

    def sample(self, n: int, seed: Optional[int] = None) -> SampleSet:
        use = self.seed if seed is None else seed
        rng = derive_rng(use, n)
        xs = rng.uniform(-1.0, 1.0, size=(n, self.n_x))
        noise = rng.uniform(-self._noise, self._noise, size=(n, self.n_y))
        ys = np.clip(self._base + xs @ self._w.T + noise, 0.05, None)
        return SampleSet(xs=xs, ys=ys, seed=use)


def affine_game(M: np.ndarray, q: np.ndarray, radius: float = 100.0) -> GameDefinition:
    """Game whose stacked pseudo-gradient is exactly a -> M a + q (with a
    constant basis). One output per player; useful as a solvable test case."""
    M = np.asarray(M, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64).reshape(-1)
    n = q.shape[0]
    if M.shape != (n, n):
        raise ValueError(f"M has shape {M.shape}, expected ({n}, {n})")

    def obj_value(i, z_list, y):
        z = np.array([float(np.squeeze(zj)) for zj in z_list])
        off_diag = sum(M[i, j] * z[j] for j in range(n) if j != i)
        return float(0.5 * M[i, i] * z[i] ** 2 + off_diag * z[i] + q[i] * z[i])

    def obj_derivative(i, z_list, y):
        z = np.array([float(np.squeeze(zj)) for zj in z_list])
        return np.array([float(M[i] @ z + q[i])])

    def obj_derivative_batch(i, Z_list, Y):
        stacked = np.column_stack([Z[:, 0] for Z in Z_list])
        return (stacked @ M[i] + q[i])[:, None]

    return GameDefinition(
        n_players=n,
        m=(1,) * n,
        n_x=1,
        n_y=1,
        objective_derivative=obj_derivative,
        objective_value=obj_value,
        objective_derivative_batch=obj_derivative_batch,
        radius=radius,
        reg_weight=0.0,
        name="affine-toy",
        **_trivial_constraint_fields(),
    )


def toy_quadratic_game(
    n_x: int = 1,
    radius: float = 10.0,
    reg_weight: float = 0.0,
    constraint_offset: Optional[float] = None,
) -> GameDefinition:
    """Single player tracking the noise outcome: J(z; y) = z^2/2 - y z.

    The lifted expected operator is affine in the coefficients, so the
    solution is a linear least-squares fit of y onto the basis. When
    `constraint_offset` is given, the player additionally carries the affine
    expectation constraint E[z - y] <= offset.
    """
    trivial = constraint_offset is None

    def obj_value(i, z_list, y):
        z = float(np.squeeze(z_list[0]))
        return 0.5 * z * z - float(y[0]) * z

    def obj_derivative(i, z_list, y):
        z = float(np.squeeze(z_list[0]))
        return np.array([z - float(y[0])])

    def obj_derivative_batch(i, Z_list, Y):
        return Z_list[0] - Y[:, :1]

    fields: dict = dict(
        constraint_value=lambda i, z_i, zeta_i, y: -1.0,
        constraint_derivative=lambda i, z_i, zeta_i, y: (np.zeros(1), 0.0),
        constraint_value_batch=lambda i, Z_i, zeta_i, Y: -np.ones(Y.shape[0]),
        constraint_derivative_batch=lambda i, Z_i, zeta_i, Y: (np.zeros_like(Z_i), np.zeros(Y.shape[0])),
        trivial_constraint=True,
    )
    if not trivial:
        off = float(constraint_offset)
        fields = dict(
            constraint_value=lambda i, z_i, zeta_i, y: float(np.squeeze(z_i)) - float(y[0]) - off,
            constraint_derivative=lambda i, z_i, zeta_i, y: (np.ones(1), 0.0),
            constraint_value_batch=lambda i, Z_i, zeta_i, Y: Z_i[:, 0] - Y[:, 0] - off,
            constraint_derivative_batch=lambda i, Z_i, zeta_i, Y: (np.ones_like(Z_i), np.zeros(Y.shape[0])),
            trivial_constraint=False,
        )

    return GameDefinition(
        n_players=1,
        m=(1,),
        n_x=n_x,
        n_y=1,
        objective_derivative=obj_derivative,
        objective_value=obj_value,
        objective_derivative_batch=obj_derivative_batch,
        radius=radius,
        reg_weight=reg_weight,
        has_zeta=False,
        name="toy-quadratic",
        **fields,
    )


class ToyRegressionGenerator:
    """x uniform on [-1, 1]^{n_x}; y affine in x plus bounded uniform noise."""

    def __init__(self, n_x: int = 1, intercept: float = 0.5, slope: float = 1.0,
                 noise: float = 1.0, seed: int = 0):
        self.n_x = n_x
        self.n_y = 1
        self.seed = seed
        self.name = "toy-regression"
        self.intercept = intercept
        self.slope = slope
        self.noise = noise

    def sample(self, n: int, seed: Optional[int] = None) -> SampleSet:
        use = self.seed if seed is None else seed
        rng = derive_rng(use, n)
        xs = rng.uniform(-1.0, 1.0, size=(n, self.n_x))
        eta = rng.uniform(-self.noise, self.noise, size=(n, 1))
        ys = self.intercept + self.slope * xs[:, :1] + eta
        return SampleSet(xs=xs, ys=ys, seed=use)


class ConstantGenerator:
    """Degenerate distribution: every sample equals a fixed (x0, y0) atom."""

    def __init__(self, x0, y0):
        self.x0 = np.asarray(x0, dtype=np.float64).reshape(-1)
        self.y0 = np.asarray(y0, dtype=np.float64).reshape(-1)
        self.n_x = self.x0.shape[0]
        self.n_y = self.y0.shape[0]
        self.seed = 0
        self.name = "constant"

    def sample(self, n: int, seed: Optional[int] = None) -> SampleSet:
        xs = np.tile(self.x0, (n, 1))
        ys = np.tile(self.y0, (n, 1))
        return SampleSet(xs=xs, ys=ys, seed=seed if seed is not None else 0)
