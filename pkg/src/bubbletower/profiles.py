"""Closed-form profiles, model constants and the Emden-Fowler change of variables.

Everything in this module is exact (no grids): the standard-bubble family, its
line profile U obtained by the Emden-Fowler substitution, and the forward /
inverse transforms between radial functions of r > 0 and functions on the line.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import HypothesisViolationError

__all__ = [
    "Regime",
    "PotentialSpec",
    "ModelParams",
    "critical_exponents",
    "model_constants",
    "bubble_w",
    "profile_U",
    "profile_dU",
    "profile_d2U",
    "ef_forward",
    "ef_inverse",
    "ef_x_of_r",
    "ef_r_of_x",
]

# exp() clamp: beyond this the double result is 0 or inf anyway
_EXP_CLIP = 700.0


class Regime(enum.Enum):
    """Position of the competing exponent q relative to the critical power."""

    SUB_Q = "sub"      # p^s < q < p*: concentrating tower, needs V(0) < 0
    SUPER_Q = "super"  # q > p*: flat tower, needs V at infinity < 0

    @property
    def ef_sign(self) -> float:
        """Sign s in r = exp(-s (p*-1) x / 2)."""
        return 1.0 if self is Regime.SUB_Q else -1.0


def critical_exponents(n_dim: int):
    """Return (p_s, p_star) = (N/(N-2), (N+2)/(N-2))."""
    if n_dim < 3:
        raise ValueError(f"dimension must be >= 3, got {n_dim}")
    return n_dim / (n_dim - 2), (n_dim + 2) / (n_dim - 2)


def model_constants(n_dim: int):
    """Return (gamma_N, beta) = ((N(N-2))^{(N-2)/4}, (2/(N-2))^2)."""
    if n_dim < 3:
        raise ValueError(f"dimension must be >= 3, got {n_dim}")
    gamma = (n_dim * (n_dim - 2.0)) ** ((n_dim - 2.0) / 4.0)
    beta = (2.0 / (n_dim - 2.0)) ** 2
    return gamma, beta


@dataclass(frozen=True)
class PotentialSpec:
    """Bounded radial potential r -> V(r) with its two limiting values."""

    evaluate: Callable[[np.ndarray], np.ndarray]
    v0: float
    v_inf: float
    bound: float
    label: str = "custom"

    @staticmethod
    def constant(c: float) -> "PotentialSpec":
        return PotentialSpec(lambda r: np.full_like(np.asarray(r, dtype=float), c),
                             v0=c, v_inf=c, bound=abs(c), label=f"const:{c:g}")

    @staticmethod
    def rational(a: float, b: float) -> "PotentialSpec":
        """V(r) = a + b r^2/(1+r^2); V(0) = a, V(inf) = a + b."""
        def _eval(r):
            r = np.asarray(r, dtype=float)
            # 1/(1+r^-2) form stays finite when r^2 overflows
            with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
                frac = np.where(r > 1.0, 1.0 / (1.0 + r ** -2.0),
                                r * r / (1.0 + r * r))
            return a + b * frac
        return PotentialSpec(_eval, v0=a, v_inf=a + b,
                             bound=abs(a) + abs(b), label=f"rational:{a:g},{b:g}")

    @staticmethod
    def zero() -> "PotentialSpec":
        return PotentialSpec.constant(0.0)


@dataclass(frozen=True)
class ModelParams:
    """Dimension, exponents, tower height and regime for one problem instance."""

    n_dim: int
    q: float
    epsilon: float
    k: int = 1
    regime: Regime = Regime.SUB_Q
    potential: PotentialSpec = field(default_factory=PotentialSpec.zero)

    def __post_init__(self):
        if self.n_dim < 3:
            raise ValueError("dimension must be >= 3")
        if self.k < 1:
            raise ValueError("tower height k must be >= 1")
        # epsilon = 0 is admitted: the unperturbed problem is used as an oracle
        if not (0.0 <= self.epsilon < 1.0):
            raise ValueError("epsilon must lie in [0, 1)")
        p_s, p_star = critical_exponents(self.n_dim)
        if self.regime is Regime.SUB_Q and not (p_s < self.q < p_star):
            raise ValueError(f"sub-q regime needs {p_s:g} < q < {p_star:g}, got q={self.q:g}")
        if self.regime is Regime.SUPER_Q and not (self.q > p_star):
            raise ValueError(f"super-q regime needs q > {p_star:g}, got q={self.q:g}")

    @staticmethod
    def make(n_dim: int, q: float, epsilon: float, k: int = 1,
             potential: Optional[PotentialSpec] = None,
             regime: Optional[Regime] = None) -> "ModelParams":
        """Build params, inferring the regime from q when not given."""
        _, p_star = critical_exponents(n_dim)
        if regime is None:
            regime = Regime.SUB_Q if q < p_star else Regime.SUPER_Q
        if potential is None:
            potential = PotentialSpec.zero()
        return ModelParams(n_dim=n_dim, q=q, epsilon=epsilon, k=k,
                           regime=regime, potential=potential)

    @property
    def p_s(self) -> float:
        return self.n_dim / (self.n_dim - 2)

    @property
    def p_star(self) -> float:
        return (self.n_dim + 2) / (self.n_dim - 2)

    @property
    def gamma(self) -> float:
        return model_constants(self.n_dim)[0]

    @property
    def beta(self) -> float:
        return model_constants(self.n_dim)[1]

    @property
    def ef_sign(self) -> float:
        return self.regime.ef_sign

    @property
    def exponent_gap(self) -> float:
        """Positive gap |p* - q| oriented by regime (p*-q sub, q-p* super)."""
        return self.p_star - self.q if self.regime is Regime.SUB_Q else self.q - self.p_star

    @property
    def v_ref(self) -> float:
        """The potential value entering the reduced functional: V(0) or V(inf)."""
        return self.potential.v0 if self.regime is Regime.SUB_Q else self.potential.v_inf

    def check_hypotheses(self):
        """Raise unless the regime's sign condition on the potential holds."""
        if self.v_ref >= 0.0:
            where = "V(0)" if self.regime is Regime.SUB_Q else "V at infinity"
            raise HypothesisViolationError(
                f"{where} = {self.v_ref:g} must be negative for the "
                f"{self.regime.value}-q construction")

    def omega(self, x) -> np.ndarray:
        """Potential read in the line variable: omega(x) = V(r(x))."""
        return self.potential.evaluate(ef_r_of_x(x, self.n_dim, self.regime))


def bubble_w(lam: float, xi_center, y, n_dim: int) -> float:
    """Standard bubble gamma_N (lam / (lam^2 + |y-xi|^2))^{(N-2)/2}."""
    if lam <= 0:
        raise ValueError("bubble scale must be positive")
    gamma, _ = model_constants(n_dim)
    d2 = np.sum((np.atleast_1d(np.asarray(y, dtype=float))
                 - np.atleast_1d(np.asarray(xi_center, dtype=float))) ** 2)
    return gamma * (lam / (lam * lam + d2)) ** ((n_dim - 2) / 2.0)


def profile_U(x, n_dim: int):
    """Line profile U(x) = gamma_N (2 cosh(2x/(N-2)))^{-(N-2)/2}.

    The cosh form stays finite for any representable x, unlike the
    exp-product form which overflows beyond |x| ~ 300.
    """
    gamma, _ = model_constants(n_dim)
    m = (n_dim - 2) / 2.0
    x = np.asarray(x, dtype=float)
    # (2 cosh)^{-m} = exp(-m log(2 cosh)); log(2cosh(t)) = |t| + log1p(e^{-2|t|})
    t = np.abs(x / m)
    log2cosh = t + np.log1p(np.exp(-2.0 * t))
    out = gamma * np.exp(-m * log2cosh)
    return out if out.ndim else float(out)


def profile_dU(x, n_dim: int):
    """Derivative U'(x) = -U(x) tanh(2x/(N-2)); odd, vanishes at 0."""
    m = (n_dim - 2) / 2.0
    x = np.asarray(x, dtype=float)
    out = -profile_U(x, n_dim) * np.tanh(x / m)
    return out if out.ndim else float(out)


def profile_d2U(x, n_dim: int):
    """Second derivative in closed form: U (tanh^2(x/m) - sech^2(x/m)/m)."""
    m = (n_dim - 2) / 2.0
    x = np.asarray(x, dtype=float)
    th = np.tanh(x / m)
    sech2 = 1.0 - th * th
    out = profile_U(x, n_dim) * (th * th - sech2 / m)
    return out if out.ndim else float(out)


def ef_r_of_x(x, n_dim: int, regime: Regime):
    """r(x) = exp(-s (p*-1) x / 2) with s = +1 (sub) / -1 (super)."""
    _, p_star = critical_exponents(n_dim)
    x = np.asarray(x, dtype=float)
    expo = -regime.ef_sign * 0.5 * (p_star - 1.0) * x
    return np.exp(np.clip(expo, -_EXP_CLIP, _EXP_CLIP))


def ef_x_of_r(r, n_dim: int, regime: Regime):
    """Inverse map x(r) = -s (N-2)/2 * log r."""
    m = (n_dim - 2) / 2.0
    r = np.asarray(r, dtype=float)
    return -regime.ef_sign * m * np.log(r)


def ef_forward(u: Callable, n_dim: int, regime: Regime = Regime.SUB_Q) -> Callable:
    """Transform a radial function u(r) to v(x) = r^{(N-2)/2} u(r), r = r(x).

    The result is an exact composition (no resampling); `u` must accept
    numpy arrays of radii.
    """
    m = (n_dim - 2) / 2.0

    def v(x):
        r = ef_r_of_x(x, n_dim, regime)
        return r ** m * u(r)

    return v


def ef_inverse(v: Callable, n_dim: int, regime: Regime = Regime.SUB_Q) -> Callable:
    """Transform a line function v(x) back to u(r) = r^{-(N-2)/2} v(x(r))."""
    m = (n_dim - 2) / 2.0

    def u(r):
        r = np.asarray(r, dtype=float)
        return r ** (-m) * v(ef_x_of_r(r, n_dim, regime))

    return u
