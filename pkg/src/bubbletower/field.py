"""Discretized line functions, the energy, residuals and the linearized operator.

Functions live on a uniform grid over a truncated interval with homogeneous
(zero) values outside; all profiles here decay exponentially, so truncation
at max(30, 10/sigma) beyond the outer spikes keeps boundary effects far below
discretization error.  Second derivatives use the 3-point stencil with zero
ghost values; the energy's kinetic term uses the matching staggered first
difference (see energy).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.sparse as sp

from .errors import TruncationError
from .profiles import ModelParams, critical_exponents, profile_U, profile_dU

__all__ = [
    "Grid",
    "GridFunction",
    "SpikeFrame",
    "default_sigma",
    "default_window",
    "grid_for_spikes",
    "tower_ansatz",
    "star_norm",
    "energy",
    "ansatz_residual",
    "nonlinear_remainder",
    "linearized_apply",
    "linearized_matrix",
    "full_operator",
]


@dataclass(frozen=True)
class Grid:
    """Uniform grid x_i = x0 + i h, i = 0..n-1."""

    x0: float
    h: float
    n: int

    def __post_init__(self):
        if self.h <= 0.0:
            raise ValueError("grid spacing must be positive")
        if self.n < 3:
            raise ValueError("grid needs at least 3 nodes")

    @property
    def x1(self) -> float:
        return self.x0 + (self.n - 1) * self.h

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.h * np.arange(self.n)

    @staticmethod
    def from_span(a: float, b: float, h: float) -> "Grid":
        n = int(math.ceil((b - a) / h)) + 1
        return Grid(x0=a, h=h, n=n)

    def trapezoid_weights(self) -> np.ndarray:
        w = np.full(self.n, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w


@dataclass(frozen=True)
class GridFunction:
    """Samples on a Grid, optionally tagged with end decay rates.

    The tag declares exponential decay toward each truncation end; it feeds
    the integrability check of the energy and a soft boundary-consistency
    warning.  Derived quantities (residuals, increments) carry no tag.
    """

    grid: Grid
    values: np.ndarray
    decay: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n,):
            raise ValueError("values shape does not match grid")
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid function values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if self.decay is not None:
            self._soft_check_decay()

    def _soft_check_decay(self):
        # soft consistency: end values should be below what the decay tag
        # implies from the interior maximum; warn, never fail
        v = np.abs(self.values)
        peak = v.max()
        if peak == 0.0:
            return
        i_peak = int(v.argmax())
        for end, rate, dist in ((0, self.decay[0], i_peak * self.grid.h),
                                (-1, self.decay[1], (self.grid.n - 1 - i_peak) * self.grid.h)):
            implied = peak * math.exp(-min(rate * dist, 700.0))
            if v[end] > 50.0 * implied + 1e-12 * peak:
                warnings.warn(
                    f"end value {v[end]:.3e} exceeds decay-tag bound {implied:.3e}; "
                    "domain may be too short", stacklevel=3)

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.grid, np.asarray(values, dtype=float), self.decay)


@dataclass(frozen=True)
class SpikeFrame:
    """Spike set and the weight exponent sigma of the weighted sup norm."""

    xi: np.ndarray
    sigma: float

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=float)
        xi.setflags(write=False)
        object.__setattr__(self, "xi", xi)
        if self.sigma <= 0.0:
            raise ValueError("sigma must be positive")

    def weight(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.exp(-self.sigma * np.abs(x[..., None] - self.xi)).sum(axis=-1)


def default_sigma(params: ModelParams) -> float:
    """Half of min{1, p*-1, 2q-p*-1}: safely interior to the admissible window."""
    p_star = params.p_star
    return 0.5 * min(1.0, p_star - 1.0, 2.0 * params.q - p_star - 1.0)


def default_window(sigma: float) -> float:
    return max(30.0, 10.0 / sigma)


def grid_for_spikes(xi, sigma: float, h: float = 0.02, pad: float = 0.0) -> Grid:
    """Truncated domain [xi_1 - W - pad, xi_k + W + pad] with W = max(30, 10/sigma)."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    w = default_window(sigma) + pad
    return Grid.from_span(float(xi[0]) - w, float(xi[-1]) + w, h)


def tower_ansatz(xi, grid: Grid, params: ModelParams) -> GridFunction:
    """Sum of translated line profiles U(x - xi_i)."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if np.any(np.diff(xi) <= 0.0):
        raise ValueError("spike locations must be strictly increasing")
    x = grid.x
    vals = np.zeros(grid.n)
    for s in xi:
        vals += profile_U(x - s, params.n_dim)
    return GridFunction(grid, vals, decay=(1.0, 1.0))


def star_norm(psi: GridFunction, frame: SpikeFrame) -> float:
    """Weighted sup norm: max |psi| / sum_i exp(-sigma |x - xi_i|)."""
    return float(np.max(np.abs(psi.values) / frame.weight(psi.grid.x)))


def second_difference(values: np.ndarray, h: float) -> np.ndarray:
    padded = np.concatenate(([0.0], values, [0.0]))
    return (padded[2:] - 2.0 * values + padded[:-2]) / (h * h)


def _nonlinear_weight(x: np.ndarray, params: ModelParams) -> np.ndarray:
    """exp(+eps x) in the sub-q orientation, exp(-eps x) in super-q."""
    return np.exp(params.ef_sign * params.epsilon * x)


def _potential_weight(x: np.ndarray, params: ModelParams) -> np.ndarray:
    """exp(-(p*-q)x) sub-q, exp(+(p*-q)x) super-q."""
    _, p_star = critical_exponents(params.n_dim)
    return np.exp(-params.ef_sign * (p_star - params.q) * x)


def _check_potential_truncation(psi: GridFunction, params: ModelParams):
    """Declared decay must beat the growth of the potential weight at both ends."""
    if params.potential.bound == 0.0:
        return
    decay = psi.decay if psi.decay is not None else (1.0, 1.0)
    p_star = params.p_star
    qp = params.ef_sign * (p_star - params.q)   # weight is exp(-qp * x)
    net_left = (params.q + 1.0) * decay[0] - qp
    net_right = (params.q + 1.0) * decay[1] + qp
    if net_left <= 0.0 or net_right <= 0.0:
        raise TruncationError(
            f"potential term not integrable at truncation ends: net decay rates "
            f"({net_left:g}, {net_right:g}) must both be positive")


def energy(psi: GridFunction, params: ModelParams) -> float:
    """Ansatz energy on the truncated domain.

    0.5 int (psi'^2 + psi^2) - beta/(p+1) int w_nl |psi|^{p+1}
    + beta/(q+1) int omega w_pot |psi|^{q+1},  p = p* + eps,
    with the regime-oriented weights w_nl, w_pot.

    The kinetic term uses the staggered (midpoint) difference and the other
    terms plain h-weighted sums, so this discrete energy is the exact
    Lyapunov function of the 3-point discrete operator: its gradient at a
    grid function equals the discrete equation residual, which is what lets
    the outer reduced solve drive the multipliers to zero.  Both choices
    are second-order accurate like centered differences.
    """
    _check_potential_truncation(psi, params)
    x = psi.grid.x
    h = psi.grid.h
    vals = psi.values
    # staggered first difference including the two boundary half-cells
    # (zero values outside the domain)
    dv = np.diff(np.concatenate(([0.0], vals, [0.0]))) / h
    p = params.p_star + params.epsilon
    beta = params.beta
    quad = 0.5 * h * (np.sum(dv * dv) + np.sum(vals * vals))
    av = np.abs(vals)
    nl = h * np.sum(_nonlinear_weight(x, params) * av ** (p + 1.0))
    term_nl = beta / (p + 1.0) * nl
    term_pot = 0.0
    if params.potential.bound != 0.0:
        pot = h * np.sum(params.omega(x) * _potential_weight(x, params)
                         * av ** (params.q + 1.0))
        term_pot = beta / (params.q + 1.0) * pot
    return float(quad - term_nl + term_pot)


def ansatz_residual(xi, params: ModelParams, grid: Grid) -> GridFunction:
    """Residual of the pure tower in the transformed equation (analytic form).

    R = beta [ sum_i U_i^{p*} - w_nl Ubar^{p*+eps} + omega w_pot Ubar^q ];
    the derivative part is exact because each translate solves the
    unperturbed profile equation.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    x = grid.x
    p_star = params.p_star
    beta = params.beta
    sum_crit = np.zeros(grid.n)
    ubar = np.zeros(grid.n)
    for s in xi:
        ui = profile_U(x - s, params.n_dim)
        ubar += ui
        sum_crit += ui ** p_star
    vals = sum_crit - _nonlinear_weight(x, params) * ubar ** (p_star + params.epsilon)
    if params.potential.bound != 0.0:
        vals = vals + params.omega(x) * _potential_weight(x, params) * ubar ** params.q
    return GridFunction(grid, beta * vals)


def nonlinear_remainder(phi: GridFunction, xi, params: ModelParams) -> GridFunction:
    """Quadratic remainder of the nonlinearity around the tower.

    N(phi) = beta w_nl [ (Ubar+phi)_+^p - Ubar^p - p Ubar^{p-1} phi ]
           - beta omega w_pot [ (Ubar+phi)_+^q - Ubar^q - q Ubar^{q-1} phi ]
    with p = p* + eps; negative parts of Ubar+phi are clipped before powers.
    """
    grid = phi.grid
    x = grid.x
    ubar = tower_ansatz(xi, grid, params).values
    bumped = np.maximum(ubar + phi.values, 0.0)
    p = params.p_star + params.epsilon
    beta = params.beta
    n1 = (_nonlinear_weight(x, params)
          * (bumped ** p - ubar ** p - p * ubar ** (p - 1.0) * phi.values))
    vals = n1
    if params.potential.bound != 0.0:
        n2 = (params.omega(x) * _potential_weight(x, params)
              * (bumped ** params.q - ubar ** params.q
                 - params.q * ubar ** (params.q - 1.0) * phi.values))
        vals = n1 - n2
    return GridFunction(grid, beta * vals)


def full_operator(psi: GridFunction, params: ModelParams) -> GridFunction:
    """Discrete nonlinear operator -psi'' + psi - beta (w_nl psi_+^p - omega w_pot psi_+^q).

    Uses the same 3-point Laplacian as the linearized matrix, so a grid
    function with this operator equal to sum_i c_i Z_i is a discrete
    solution of the transformed equation up to the kernel directions.
    """
    x = psi.grid.x
    pos = np.maximum(psi.values, 0.0)
    p = params.p_star + params.epsilon
    nl = _nonlinear_weight(x, params) * pos ** p
    if params.potential.bound != 0.0:
        nl = nl - params.omega(x) * _potential_weight(x, params) * pos ** params.q
    vals = -second_difference(psi.values, psi.grid.h) + psi.values - params.beta * nl
    return GridFunction(psi.grid, vals)


def linearized_potential(xi, params: ModelParams, grid: Grid) -> np.ndarray:
    """The multiplicative potential of the linearized operator.

    W(x) = beta [ p w_nl Ubar^{p-1} - q omega w_pot Ubar^{q-1} ], p = p*+eps.
    """
    x = grid.x
    ubar = tower_ansatz(xi, grid, params).values
    p = params.p_star + params.epsilon
    w = p * _nonlinear_weight(x, params) * ubar ** (p - 1.0)
    if params.potential.bound != 0.0:
        w = w - params.q * params.omega(x) * _potential_weight(x, params) \
            * ubar ** (params.q - 1.0)
    return params.beta * w


def linearized_apply(phi: GridFunction, xi, params: ModelParams) -> GridFunction:
    """Apply the linearized operator -phi'' + phi - W phi (3-point stencil)."""
    w = linearized_potential(xi, params, phi.grid)
    vals = -second_difference(phi.values, phi.grid.h) + phi.values - w * phi.values
    return GridFunction(phi.grid, vals)


def linearized_matrix(xi, params: ModelParams, grid: Grid) -> sp.csc_matrix:
    """Sparse symmetric matrix of the linearized operator with zero end values."""
    w = linearized_potential(xi, params, grid)
    h2 = grid.h * grid.h
    main = 2.0 / h2 + 1.0 - w
    off = np.full(grid.n - 1, -1.0 / h2)
    return sp.diags([off, main, off], offsets=(-1, 0, 1), format="csc")


def kernel_directions(xi, params: ModelParams, grid: Grid) -> np.ndarray:
    """Columns Z_i(x) = U'(x - xi_i): the approximate kernel of the operator."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    x = grid.x
    z = np.empty((grid.n, xi.size))
    for i, s in enumerate(xi):
        z[:, i] = profile_dU(x - s, params.n_dim)
    return z
