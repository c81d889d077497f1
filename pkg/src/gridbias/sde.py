"""Exact sampling of the bivariate linear process on an equidistant grid.

The observable state ``X_t = (Y_t, W_t)`` solves
``dX = -beta X dt + sigma dB`` with a Gaussian initial law.  Over a step of
length ``delta`` the transition is Gaussian with mean map ``e^{-beta delta}``
and covariance ``int_0^delta e^{-beta u} sigma sigma' e^{-beta' u} du``, so
panels are sampled from the exact transition law: the marginal distribution
at every grid time is exact regardless of step size, and any simulation bias
is zero by construction.

The counterfactual outcome under a deterministic schedule ``w`` solves
``dY = -(b11 Y + b12 w_t) dt + s11 dB1 + s12 dB2`` and is sampled the same
way from its scalar transition law.

Randomness is reproducible: every unit draws from its own stream derived
from the master seed via ``SeedSequence((seed, replicate, unit))``, so the
output is independent of unit evaluation order.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .estimands import TreatmentPlan, plan_integral
from .linalg2 import matexp

__all__ = [
    "ModelParams",
    "Grid",
    "TrajectoryPanel",
    "TransitionLaw",
    "transition_law",
    "simulate_panel",
    "simulate_counterfactual",
    "subsample_panel",
    "write_panel_csv",
    "read_panel_csv",
]

# Kronecker-sum systems with smaller relative smallest singular value than
# this are treated as singular and the covariance integral falls back to
# quadrature (e.g. beta = 0, or eigenvalues summing to zero).
KRON_RCOND = 1e-8
COV_SIMPSON_PANELS = 10_000
PSD_EIG_FLOOR = -1e-12

PANEL_CSV_HEADER = ("unit", "k", "t", "Y", "W")


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the bivariate linear process.

    ``beta`` is the 2x2 drift (per unit time), ``sigma`` the 2x2 diffusion
    (per sqrt unit time), the initial state is Gaussian with ``init_mean``
    and symmetric PSD ``init_cov``, and ``horizon`` is the study length.
    """

    beta: np.ndarray
    sigma: np.ndarray
    init_mean: np.ndarray
    init_cov: np.ndarray
    horizon: float

    def __post_init__(self):
        object.__setattr__(self, "beta", _checked_mat(self.beta, "beta"))
        object.__setattr__(self, "sigma", _checked_mat(self.sigma, "sigma"))
        mean = np.array(self.init_mean, dtype=float).reshape(2)
        if not np.all(np.isfinite(mean)):
            raise ValueError("init_mean must be finite")
        object.__setattr__(self, "init_mean", _frozen(mean))
        cov = _checked_mat(self.init_cov, "init_cov", writeable=True)
        if np.max(np.abs(cov - cov.T)) > 1e-12:
            raise ValueError("init_cov must be symmetric (within 1e-12)")
        if np.min(np.linalg.eigvalsh(cov)) < PSD_EIG_FLOOR:
            raise ValueError("init_cov must be positive semidefinite")
        object.__setattr__(self, "init_cov", _frozen(cov))
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise ValueError("horizon must be a positive finite number")


def _checked_mat(m, name: str, writeable: bool = False) -> np.ndarray:
    a = np.array(m, dtype=float)
    if a.shape != (2, 2):
        raise ValueError(f"{name} must be 2x2, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} entries must be finite")
    return a if writeable else _frozen(a)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Grid:
    """Equidistant measurement grid ``t_k = k T / J`` for ``k = 0..J``."""

    J: int
    T: float

    def __post_init__(self):
        if self.J < 1:
            raise ValueError("grid needs J >= 1")
        if not (math.isfinite(self.T) and self.T > 0):
            raise ValueError("grid horizon must be positive and finite")

    @property
    def step(self) -> float:
        return self.T / self.J

    @property
    def times(self) -> np.ndarray:
        # linspace pins t_J to exactly T and makes every second point of a
        # 2J grid bit-identical to the J grid, which subsampling relies on.
        return np.linspace(0.0, self.T, self.J + 1)


@dataclass(frozen=True)
class TrajectoryPanel:
    """``n`` units observed on a grid; ``values[i, k]`` is ``(Y, W)``.

    The value array is frozen after construction; panels are safe to share.
    """

    grid: Grid
    n: int
    values: np.ndarray
    seed: int

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.n, self.grid.J + 1, 2):
            raise ValueError(
                f"values shape {v.shape} inconsistent with n={self.n}, J={self.grid.J}"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("panel values must be finite")
        object.__setattr__(self, "values", _frozen(v))


@dataclass(frozen=True)
class TransitionLaw:
    """Gaussian one-step law: ``X_next = mean_map @ X + eps``,
    ``eps ~ N(0, noise_cov)``."""

    mean_map: np.ndarray
    noise_cov: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean_map", _checked_mat(self.mean_map, "mean_map"))
        cov = _checked_mat(self.noise_cov, "noise_cov", writeable=True)
        if np.max(np.abs(cov - cov.T)) > 1e-12:
            raise ValueError("noise_cov must be symmetric")
        if np.min(np.linalg.eigvalsh(cov)) < PSD_EIG_FLOOR:
            raise ValueError("noise_cov must be positive semidefinite")
        object.__setattr__(self, "noise_cov", _frozen(cov))


def transition_law(params: ModelParams, delta: float) -> TransitionLaw:
    """Exact transition law of the observable process over a step ``delta``.

    The noise covariance ``C = int_0^delta e^{-beta u} D e^{-beta' u} du``
    (``D = sigma sigma'``) satisfies the Sylvester identity
    ``beta C + C beta' = D - e^{-beta delta} D e^{-beta' delta}``, solved in
    vectorized form through the Kronecker sum ``beta (+) beta``.  When that
    4x4 system is near-singular (smallest singular value below
    ``KRON_RCOND`` times the largest, e.g. ``beta = 0``) the integral is
    evaluated by composite Simpson quadrature instead.
    """
    if not (math.isfinite(delta) and delta > 0):
        raise ValueError("delta must be a positive finite number")
    mean_map = matexp(params.beta, -delta)
    d = params.sigma @ params.sigma.T
    rhs = d - mean_map @ d @ mean_map.T
    eye = np.eye(2)
    kron_sum = np.kron(params.beta, eye) + np.kron(eye, params.beta)
    svals = np.linalg.svd(kron_sum, compute_uv=False)
    if svals[-1] > KRON_RCOND * svals[0]:
        cov = np.linalg.solve(kron_sum, rhs.reshape(4)).reshape(2, 2)
    else:
        cov = _cov_integral_simpson(params.beta, d, delta, COV_SIMPSON_PANELS)
    cov = 0.5 * (cov + cov.T)
    return TransitionLaw(mean_map=mean_map, noise_cov=cov)


def _cov_integral_simpson(beta: np.ndarray, d: np.ndarray, delta: float, panels: int) -> np.ndarray:
    def f(u: float) -> np.ndarray:
        e = matexp(beta, -u)
        return e @ d @ e.T

    h = delta / panels
    total = np.zeros((2, 2))
    left = f(0.0)
    for i in range(panels):
        mid = f((i + 0.5) * h)
        right = f((i + 1) * h)
        total += h / 6.0 * (left + 4.0 * mid + right)
        left = right
    return total


def _psd_sqrt(cov: np.ndarray) -> np.ndarray:
    """Symmetric square root tolerant of (numerically) zero eigenvalues."""
    eigvals, eigvecs = np.linalg.eigh(cov)
    if eigvals.min() < PSD_EIG_FLOOR:
        raise ValueError("covariance is not positive semidefinite")
    return (eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))) @ eigvecs.T


def unit_stream(seed: int, unit: int, replicate: int = 0) -> np.random.Generator:
    """Independent per-unit stream keyed on ``(seed, replicate, unit)``."""
    return np.random.default_rng(np.random.SeedSequence((seed, replicate, unit)))


def _unit_normals(seed: int, n: int, draws_per_unit: int) -> np.ndarray:
    """Standard normals of shape (n, draws_per_unit), one stream per unit."""
    z = np.empty((n, draws_per_unit))
    for i in range(n):
        z[i] = unit_stream(seed, i).standard_normal(draws_per_unit)
    return z


def simulate_panel(params: ModelParams, grid: Grid, n: int, seed: int) -> TrajectoryPanel:
    """Sample ``n`` units of the observable process on ``grid``.

    Each unit's initial state is drawn from the initial Gaussian law and
    advanced through the exact one-step transition; marginal laws carry no
    discretization error.  Deterministic given (params, grid, n, seed).
    """
    if n < 1:
        raise ValueError("need at least one unit")
    law = transition_law(params, grid.step)
    init_sqrt = _psd_sqrt(params.init_cov)
    noise_sqrt = _psd_sqrt(law.noise_cov)
    z = _unit_normals(seed, n, 2 * (grid.J + 1)).reshape(n, grid.J + 1, 2)
    values = np.empty((n, grid.J + 1, 2))
    values[:, 0, :] = params.init_mean + z[:, 0, :] @ init_sqrt.T
    for k in range(grid.J):
        values[:, k + 1, :] = values[:, k, :] @ law.mean_map.T + z[:, k + 1, :] @ noise_sqrt.T
    return TrajectoryPanel(grid=grid, n=n, values=values, seed=seed)


def counterfactual_step_variance(params: ModelParams, delta: float) -> float:
    """Noise variance of the counterfactual outcome over one step:
    ``(s11^2 + s12^2)(1 - e^{-2 b11 delta}) / (2 b11)``, with the
    ``b11 -> 0`` limit ``(s11^2 + s12^2) delta``."""
    b11 = params.beta[0, 0]
    s2 = params.sigma[0, 0] ** 2 + params.sigma[0, 1] ** 2
    if abs(b11) * delta < 1e-8:
        return s2 * delta
    return s2 * -math.expm1(-2.0 * b11 * delta) / (2.0 * b11)


def simulate_counterfactual(
    params: ModelParams,
    plan: TreatmentPlan,
    grid: Grid,
    n: int,
    seed: int,
) -> TrajectoryPanel:
    """Sample the counterfactual outcome under a deterministic schedule.

    Only the Y column is stochastic; the W column stores the schedule's
    values at the grid times.  Per step from ``t`` to ``t + delta``:

    ``Y' = e^{-b11 delta} Y - b12 * int_0^delta e^{-b11 (delta-u)} w(t+u) du + nu``

    with ``nu`` Gaussian (see :func:`counterfactual_step_variance`).  The
    schedule integral is evaluated through :func:`gridbias.estimands.plan_integral`.
    ``Y_0`` is drawn from the same marginal as the observable outcome.
    """
    if n < 1:
        raise ValueError("need at least one unit")
    if plan.horizon < grid.T:
        raise ValueError("plan is not defined on the whole grid span")
    b11 = params.beta[0, 0]
    b12 = params.beta[0, 1]
    delta = grid.step
    times = grid.times
    decay = math.exp(-b11 * delta)
    noise_sd = math.sqrt(counterfactual_step_variance(params, delta))
    # Deterministic forcing per step, shared by every unit.
    forcing = np.array(
        [-b12 * plan_integral(plan, times[k], times[k + 1], b11) for k in range(grid.J)]
    )
    init_sd = math.sqrt(max(params.init_cov[0, 0], 0.0))
    z = _unit_normals(seed, n, grid.J + 1)
    values = np.empty((n, grid.J + 1, 2))
    values[:, :, 1] = plan.values_at(times)
    y = params.init_mean[0] + init_sd * z[:, 0]
    values[:, 0, 0] = y
    for k in range(grid.J):
        y = decay * y + forcing[k] + noise_sd * z[:, k + 1]
        values[:, k + 1, 0] = y
    return TrajectoryPanel(grid=grid, n=n, values=values, seed=seed)


def subsample_panel(panel: TrajectoryPanel, factor: int) -> TrajectoryPanel:
    """Keep every ``factor``-th grid point (endpoints included).

    Requires ``factor`` to divide the panel's J; the coarse grid's time
    stamps equal the fine grid's retained stamps exactly.
    """
    if factor < 1:
        raise ValueError("factor must be >= 1")
    if panel.grid.J % factor != 0:
        raise ValueError(f"factor {factor} does not divide J={panel.grid.J}")
    coarse = Grid(J=panel.grid.J // factor, T=panel.grid.T)
    return TrajectoryPanel(
        grid=coarse,
        n=panel.n,
        values=panel.values[:, ::factor, :].copy(),
        seed=panel.seed,
    )


def write_panel_csv(panel: TrajectoryPanel, path) -> None:
    """Long-format CSV with fixed header ``unit,k,t,Y,W``; floats are
    written as shortest round-trip decimals."""
    times = panel.grid.times
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PANEL_CSV_HEADER)
        for i in range(panel.n):
            for k in range(panel.grid.J + 1):
                writer.writerow(
                    (
                        i,
                        k,
                        repr(float(times[k])),
                        repr(float(panel.values[i, k, 0])),
                        repr(float(panel.values[i, k, 1])),
                    )
                )


def read_panel_csv(path, seed: int = -1) -> TrajectoryPanel:
    """Rebuild a panel from :func:`write_panel_csv` output.

    The CSV does not carry the seed; pass it explicitly if known.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != PANEL_CSV_HEADER:
            raise ValueError(f"unexpected panel CSV header: {header}")
        rows = [(int(u), int(k), float(t), float(y), float(w)) for u, k, t, y, w in reader]
    if not rows:
        raise ValueError("empty panel CSV")
    n = max(r[0] for r in rows) + 1
    J = max(r[1] for r in rows)
    T = max(r[2] for r in rows)
    values = np.empty((n, J + 1, 2))
    for u, k, _t, y, w in rows:
        values[u, k, 0] = y
        values[u, k, 1] = w
    return TrajectoryPanel(grid=Grid(J=J, T=T), n=n, values=values, seed=seed)
