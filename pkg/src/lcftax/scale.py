"""q-scale functions, the two-sided exit formula and the tax identity.

Both supported models have a rational Laplace exponent, so ``psi(theta) - q``
has two real roots ``phi >= rho`` and ``1/(psi - q)`` splits into two simple
fractions:

* Brownian motion, ``psi = m theta + s^2 theta^2 / 2``::

      1/(psi - q) = (2/s^2) / ((theta - phi)(theta - rho))
      W(z) = (2/s^2) (e^{phi z} - e^{rho z}) / (phi - rho)

* Cramer-Lundberg with Exp(mu) claims, ``psi = c theta - lam theta / (mu + theta)``::

      1/(psi - q) = (mu + theta) / (c (theta - phi)(theta - rho))
      W(z) = ((mu + phi) e^{phi z} - (mu + rho) e^{rho z}) / (c (phi - rho))

The exponential difference ``(e^{phi z} - e^{rho z}) / (phi - rho)`` is
evaluated through expm1, which keeps the double-root limit (zero drift, q = 0)
free of cancellation and avoids overflow for large z.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import quad

from .errors import DomainError
from .paths import BrownianWithDrift, CramerLundberg, LevyModel
from .rates import RateFunction, solve_rate_ode

QUAD_EPSABS = 1e-12
QUAD_EPSREL = 1e-12
EXIT_TOLERANCE = 1e-10


def _quadratic_roots(a: float, b: float, c: float) -> tuple[float, float]:
    """Real roots of a x^2 + b x + c, largest first, computed stably."""
    disc = b * b - 4 * a * c
    if disc < 0:
        disc = 0.0
    sq = math.sqrt(disc)
    q = -0.5 * (b + math.copysign(sq, b)) if b != 0 else -0.5 * sq
    if q == 0.0:
        r1 = r2 = 0.0
    else:
        r1, r2 = q / a, c / q
    return (r1, r2) if r1 >= r2 else (r2, r1)


def _exp_diff(phi: float, rho: float, z):
    """(e^{phi z} - e^{rho z}) / (phi - rho) for z >= 0, with the limit z e^{phi z}."""
    z = np.asarray(z, dtype=float)
    d = phi - rho
    if d == 0.0:
        return z * np.exp(phi * z)
    dz = d * z
    small = dz <= 1.0
    with np.errstate(over="ignore"):
        near = np.exp(rho * z) * np.expm1(np.where(small, dz, 0.0)) / d
        far = np.exp(phi * z) * -np.expm1(-np.where(small, 1.0, dz)) / d
    return np.where(small, near, far)


def _exp_diff_scaled(phi: float, rho: float, z):
    """e^{-phi z} times ``_exp_diff``: bounded by z, never overflows."""
    z = np.asarray(z, dtype=float)
    d = phi - rho
    if d == 0.0:
        return z.copy()
    return -np.expm1(-d * z) / d


@dataclass(frozen=True)
class ScaleFunction:
    """W^(q) of a supported model, with its density W^(q)'."""

    model: LevyModel
    q: float
    phi: float
    rho: float
    form: str = "closed_form"

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        zp = np.maximum(z, 0.0)
        diff = _exp_diff(self.phi, self.rho, zp)
        m = self.model
        if isinstance(m, BrownianWithDrift):
            w = 2.0 / m.volatility**2 * diff
        else:
            w = ((m.claim_rate + self.phi) * diff + np.exp(self.rho * zp)) / m.premium_rate
        out = np.where(z < 0, 0.0, w)
        return out if out.ndim else float(out)

    def derivative(self, z):
        """Right derivative of W on [0, inf); 0 below zero."""
        z = np.asarray(z, dtype=float)
        zp = np.maximum(z, 0.0)
        phi, rho = self.phi, self.rho
        d = phi - rho
        # phi >= 0 >= rho, so both terms below are non-negative: no cancellation
        if d > 0:
            ddiff = (phi * np.exp(phi * zp) - rho * np.exp(rho * zp)) / d
        else:
            ddiff = (1.0 + phi * zp) * np.exp(phi * zp)
        m = self.model
        if isinstance(m, BrownianWithDrift):
            w = 2.0 / m.volatility**2 * ddiff
        else:
            mu = m.claim_rate
            if d > 0:
                w = ((mu + phi) * phi * np.exp(phi * zp) - rho * (mu + rho) * np.exp(rho * zp)) / (m.premium_rate * d)
            else:
                w = ((mu + phi) * ddiff + rho * np.exp(rho * zp)) / m.premium_rate
        out = np.where(z < 0, 0.0, w)
        return out if out.ndim else float(out)

    def scaled(self, z):
        """e^{-phi z} W(z), finite for every z."""
        z = np.asarray(z, dtype=float)
        zp = np.maximum(z, 0.0)
        diff = _exp_diff_scaled(self.phi, self.rho, zp)
        m = self.model
        if isinstance(m, BrownianWithDrift):
            w = 2.0 / m.volatility**2 * diff
        else:
            w = ((m.claim_rate + self.phi) * diff + np.exp(-(self.phi - self.rho) * zp)) / m.premium_rate
        out = np.where(z < 0, 0.0, w)
        return out if out.ndim else float(out)

    def log_derivative(self, z):
        """W'/W on (0, inf)."""
        return self.derivative(z) / self(z)


def scale_function(model: LevyModel, q: float) -> ScaleFunction:
    if not (q >= 0 and math.isfinite(q)):
        raise ValueError("q must be a finite non-negative number")
    if isinstance(model, BrownianWithDrift):
        phi, rho = _quadratic_roots(0.5 * model.volatility**2, model.drift, -q)
    elif isinstance(model, CramerLundberg):
        c, lam, mu = model.premium_rate, model.claim_intensity, model.claim_rate
        phi, rho = _quadratic_roots(c, c * mu - lam - q, -q * mu)
    else:
        raise TypeError(f"unsupported model {model!r}")
    return ScaleFunction(model, float(q), phi + 0.0, rho + 0.0)


def laplace_identity_errors(scale: ScaleFunction, lambdas) -> np.ndarray:
    """Relative errors of int_0^inf e^{-lam z} W(z) dz against 1/(psi(lam) - q).

    Only meaningful for ``lam > scale.phi``. The transform is integrated by
    adaptive quadrature up to Z with e^{-(lam - phi) Z} = 1e-18, plus the tail
    e^{-lam Z} W(Z) / (lam - phi) of a pure exponential beyond Z.
    """
    errs = []
    for lam in np.atleast_1d(lambdas):
        lam = float(lam)
        if lam <= scale.phi:
            raise DomainError("Laplace identity holds only for lambda > Phi(q)")
        gap = lam - scale.phi
        cut = math.log(1e18) / gap
        edges = np.linspace(0.0, cut, 9)
        val = 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            part, _ = quad(lambda z: math.exp(-gap * z) * scale.scaled(z), lo, hi, epsabs=0, epsrel=1e-13, limit=200)
            val += part
        val += math.exp(-gap * cut) * scale.scaled(cut) / gap
        target = 1.0 / (float(scale.model.laplace_exponent(lam)) - scale.q)
        errs.append(abs(val - target) / abs(target))
    return np.array(errs)


@dataclass(frozen=True)
class ExitProblem:
    """E_x[e^{-q tau_a^+} ; tau_a^+ < tau_0^-] for the natural tax process with rate ``rate``."""

    x: float
    a: float
    q: float
    rate: RateFunction

    def __post_init__(self):
        if self.x < 0:
            raise ValueError("start level must be non-negative")
        if self.x >= self.a:
            raise ValueError("need x < a")


def _integrate_hazard(scale: ScaleFunction, rate: RateFunction, lo: float, hi: float) -> float:
    """int_lo^hi W'(y) / (W(y) (1 - delta(y))) dy, split at the rate's breakpoints."""
    cuts = rate.breakpoints()
    edges = np.concatenate(([lo], cuts[(cuts > lo) & (cuts < hi)], [hi]))

    def integrand(y):
        return scale.log_derivative(y) / (1.0 - rate(y))

    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = quad(integrand, a, b, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=200)
        total += val
    return total


def exit_transform(problem: ExitProblem, scale: ScaleFunction) -> float:
    """Discounted probability that the taxed process exits (0, a) upwards.

    Returns exactly 0 when ``a`` is at or above the ODE horizon y(inf), the
    ceiling of the taxed running maximum.
    """
    if scale.q != problem.q:
        raise ValueError("scale function was built for a different q")
    rate = problem.rate.restrict(problem.x)
    sol = solve_rate_ode(rate, problem.x)
    if problem.a >= sol.limit:
        return 0.0
    if scale(problem.x) == 0.0:
        # W(0) = 0: the process leaves 0 downwards immediately
        return 0.0
    return math.exp(-_integrate_hazard(scale, rate, problem.x, problem.a))


def phi_0(model: LevyModel, x):
    """Survival probability without tax, psi'(0+) W(x) (0 without positive drift)."""
    drift = model.mean_drift
    if drift <= 0:
        return np.zeros_like(np.asarray(x, dtype=float)) if np.ndim(x) else 0.0
    return drift * scale_function(model, 0.0)(x)


@dataclass(frozen=True)
class SurvivalResult:
    value: float
    phi_0: float
    degenerate: Optional[str] = None

    def __float__(self):
        return self.value


# the quadrature part covers [x, U] with 1 - phi_0(U) below this
_TAIL_SPLIT = 1e-3


def survival_probability(model: LevyModel, x: float, rate: RateFunction) -> SurvivalResult:
    """phi_delta(x) = exp(-int_x^inf W'/(W (1 - delta))).

    Beyond its last breakpoint the rate is constant, so the tail of the
    integral is ``-log(phi_0(U)) / (1 - delta_tail)`` exactly, using
    W(inf) = 1/psi'(0+). The finite part [x, U] goes through quadrature.
    """
    if x < 0:
        return SurvivalResult(0.0, 0.0, "start below zero")
    p0 = float(phi_0(model, x))
    drift = model.mean_drift
    if drift <= 0:
        return SurvivalResult(0.0, p0, "no positive drift: ruin is certain")
    rate = rate.restrict(x)
    sol = solve_rate_ode(rate, x)
    if math.isfinite(sol.limit):
        return SurvivalResult(
            0.0, p0, f"taxed process is capped at y(inf) = {sol.limit:.17g}; ruin is certain"
        )
    scale = scale_function(model, 0.0)
    if scale(x) == 0.0:
        return SurvivalResult(0.0, p0, "W(x) = 0")
    cuts = rate.breakpoints()
    upper = max(x, float(cuts.max(initial=x)))
    span = 1.0
    while 1.0 - drift * scale(upper) > _TAIL_SPLIT:
        upper += span
        span *= 2.0
    head = _integrate_hazard(scale, rate, x, upper) if upper > x else 0.0
    tail = -math.log(drift * scale(upper)) / (1.0 - rate.tail_value)
    return SurvivalResult(math.exp(-(head + tail)), p0)
