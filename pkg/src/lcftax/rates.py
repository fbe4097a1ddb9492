"""Tax-rate functions and the latent/natural conversion calculus.

Conventions
-----------
* A rate lives on ``[domain_start, inf)`` and takes values in ``[0, 1)``.
  Tabulated rates may reach exactly 1 at their final knot ("saturation"):
  beyond that level no capital is retained, which is what makes the ODE
  horizon ``y(inf)`` finite.
* ``PiecewiseConstant`` pieces are closed on the right, ``f(z) = values[i]``
  for ``thresholds[i-1] < z <= thresholds[i]``, so the two-level rate
  ``alpha`` for ``z <= b`` and ``beta`` above is ``PiecewiseConstant((b,), (alpha, beta))``.
* Tabulated step rates are closed on the left, as is usual for knot tables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Union

import numpy as np
from scipy.integrate import solve_ivp

from .errors import AdmissibilityError, DomainError

# 1 - rate below this counts as full saturation
SATURATION_TOL = 1e-12
INVERSE_TOL = 1e-12
ODE_RTOL = 1e-10
ODE_ATOL = 1e-12


@dataclass(frozen=True)
class Constant:
    value: float


@dataclass(frozen=True)
class PiecewiseConstant:
    thresholds: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "thresholds", tuple(float(t) for t in self.thresholds))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(self.values) != len(self.thresholds) + 1:
            raise ValueError("need exactly one more value than thresholds")
        if any(b <= a for a, b in zip(self.thresholds, self.thresholds[1:])):
            raise ValueError("thresholds must be strictly ascending")


@dataclass(frozen=True)
class Tabulated:
    levels: tuple[float, ...]
    rates: tuple[float, ...]
    interpolation: Literal["step", "linear"] = "linear"

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(float(t) for t in self.levels))
        object.__setattr__(self, "rates", tuple(float(v) for v in self.rates))
        if len(self.levels) != len(self.rates) or not self.levels:
            raise ValueError("levels and rates must be non-empty and of equal length")
        if any(b <= a for a, b in zip(self.levels, self.levels[1:])):
            raise ValueError("knot levels must be strictly ascending")
        if self.interpolation not in ("step", "linear"):
            raise ValueError("interpolation must be 'step' or 'linear'")


RateSpec = Union[Constant, PiecewiseConstant, Tabulated]


@dataclass(frozen=True)
class Lipschitz:
    constant: float


Admissibility = Union[Literal["none", "monotone"], Lipschitz]


def _spec_values(spec: RateSpec) -> tuple[float, ...]:
    if isinstance(spec, Constant):
        return (spec.value,)
    if isinstance(spec, PiecewiseConstant):
        return spec.values
    return spec.rates


@dataclass(frozen=True)
class RateFunction:
    """A tax rate on ``[domain_start, inf)`` with an admissibility certificate."""

    domain_start: float
    spec: RateSpec
    admissibility: Admissibility = "none"

    def __post_init__(self):
        spec = self.spec
        if not math.isfinite(self.domain_start):
            raise ValueError("domain_start must be finite")
        values = np.array(_spec_values(spec))
        if np.any(~np.isfinite(values)) or np.any(values < 0):
            raise ValueError("rate values must be finite and non-negative")
        if isinstance(spec, Tabulated):
            if spec.levels[0] != self.domain_start:
                raise ValueError("first knot must sit at domain_start")
            if np.any(values[:-1] >= 1) or values[-1] > 1:
                raise ValueError("tabulated rates must lie in [0,1); only the final knot may equal 1")
        elif np.any(values >= 1):
            raise ValueError("rate values must lie in [0, 1)")
        if isinstance(spec, PiecewiseConstant) and spec.thresholds and spec.thresholds[0] <= self.domain_start:
            raise ValueError("thresholds must exceed domain_start")
        adm = self.admissibility
        if adm == "monotone":
            if np.any(np.diff(values) < 0):
                raise AdmissibilityError("rate certified monotone but values decrease")
        elif isinstance(adm, Lipschitz):
            if adm.constant < 0:
                raise ValueError("Lipschitz constant must be non-negative")
            if isinstance(spec, Tabulated) and spec.interpolation == "linear":
                slopes = np.abs(np.diff(values) / np.diff(spec.levels))
                if np.any(slopes > adm.constant * (1 + 1e-12)):
                    raise AdmissibilityError("knot slopes exceed the certified Lipschitz constant")
            elif np.any(values != values[0]):
                raise AdmissibilityError("a rate with jumps cannot be Lipschitz")
        elif adm != "none":
            raise ValueError(f"unknown admissibility {adm!r}")

    # evaluation -----------------------------------------------------------

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        if np.any(z < self.domain_start):
            raise DomainError(f"rate evaluated below its domain start {self.domain_start}")
        spec = self.spec
        if isinstance(spec, Constant):
            out = np.full(z.shape, spec.value)
        elif isinstance(spec, PiecewiseConstant):
            out = np.asarray(spec.values)[np.searchsorted(spec.thresholds, z, side="left")]
        elif spec.interpolation == "step":
            i = np.searchsorted(spec.levels, z, side="right") - 1
            out = np.asarray(spec.rates)[i]
        else:
            out = np.interp(z, spec.levels, spec.rates)
        return out if out.ndim else float(out)

    @property
    def sup(self) -> float:
        return float(max(_spec_values(self.spec)))

    @property
    def inf(self) -> float:
        return float(min(_spec_values(self.spec)))

    @property
    def saturation_level(self) -> float:
        """Level from which the rate equals 1, or ``inf``."""
        spec = self.spec
        if isinstance(spec, Tabulated) and spec.rates[-1] >= 1 - SATURATION_TOL:
            return spec.levels[-1]
        return math.inf

    @property
    def tail_value(self) -> float:
        """The constant value the rate takes beyond its last breakpoint."""
        return float(_spec_values(self.spec)[-1])

    def breakpoints(self) -> np.ndarray:
        """Levels where the rate is not smooth (thresholds or knots)."""
        spec = self.spec
        if isinstance(spec, Constant):
            return np.empty(0)
        if isinstance(spec, PiecewiseConstant):
            return np.asarray(spec.thresholds)
        return np.asarray(spec.levels[1:])

    def restrict(self, x: float) -> "RateFunction":
        """The same rate seen as a function on ``[x, inf)``."""
        if x < self.domain_start:
            raise DomainError(f"start level {x} lies below the rate's domain start {self.domain_start}")
        if x == self.domain_start:
            return self
        spec = self.spec
        adm = self.admissibility
        if isinstance(spec, Constant):
            return RateFunction(x, spec, adm)
        if isinstance(spec, PiecewiseConstant):
            k = int(np.searchsorted(spec.thresholds, x, side="right"))
            new = PiecewiseConstant(spec.thresholds[k:], spec.values[k:])
            return RateFunction(x, new, adm)
        k = int(np.searchsorted(spec.levels, x, side="right"))
        new = Tabulated((x,) + spec.levels[k:], (float(self(x)),) + spec.rates[k:], spec.interpolation)
        return RateFunction(x, new, adm)

    # serialization --------------------------------------------------------

    def to_json(self) -> dict:
        spec = self.spec
        if isinstance(spec, Constant):
            body: dict = {"constant": spec.value}
        elif isinstance(spec, PiecewiseConstant):
            body = {"piecewise": {"thresholds": list(spec.thresholds), "values": list(spec.values)}}
        else:
            body = {
                "tabulated": {
                    "knots": [[lv, r] for lv, r in zip(spec.levels, spec.rates)],
                    "interpolation": spec.interpolation,
                }
            }
        adm = self.admissibility
        adm_json = {"lipschitz": adm.constant} if isinstance(adm, Lipschitz) else adm
        return {"domain_start": self.domain_start, "spec": body, "admissibility": adm_json}

    @classmethod
    def from_json(cls, data: dict) -> "RateFunction":
        spec_json = data["spec"]
        if len(spec_json) != 1:
            raise ValueError("rate spec must have exactly one of constant/piecewise/tabulated")
        kind, body = next(iter(spec_json.items()))
        if kind == "constant":
            spec: RateSpec = Constant(float(body))
        elif kind == "piecewise":
            spec = PiecewiseConstant(tuple(body["thresholds"]), tuple(body["values"]))
        elif kind == "tabulated":
            knots = body["knots"]
            spec = Tabulated(
                tuple(k[0] for k in knots), tuple(k[1] for k in knots), body.get("interpolation", "linear")
            )
        else:
            raise ValueError(f"unknown rate kind {kind!r}")
        adm = data.get("admissibility", "none")
        if isinstance(adm, dict):
            adm = Lipschitz(float(adm["lipschitz"]))
        return cls(float(data["domain_start"]), spec, adm)


def constant_rate(value: float, domain_start: float = 0.0) -> RateFunction:
    return RateFunction(domain_start, Constant(value), "monotone")


def two_level_rate(alpha: float, beta: float, b: float, domain_start: float) -> RateFunction:
    """``alpha`` up to and including level ``b``, ``beta`` above it."""
    adm: Admissibility = "monotone" if alpha <= beta else "none"
    return RateFunction(domain_start, PiecewiseConstant((b,), (alpha, beta)), adm)


def _is_linear(rate: RateFunction) -> bool:
    return isinstance(rate.spec, Tabulated) and rate.spec.interpolation == "linear" and len(rate.spec.levels) > 1


def _step_pieces(rate: RateFunction) -> tuple[np.ndarray, np.ndarray]:
    """Piece start levels and piece values of a piecewise-constant rate."""
    spec = rate.spec
    if isinstance(spec, Constant):
        return np.array([rate.domain_start]), np.array([spec.value])
    if isinstance(spec, PiecewiseConstant):
        return np.array((rate.domain_start,) + spec.thresholds), np.array(spec.values)
    return np.array(spec.levels), np.array(spec.rates)


def _clamp_saturated(values: np.ndarray) -> np.ndarray:
    out = values.copy()
    out[out >= 1 - SATURATION_TOL] = 1.0
    return out


def _bisect(f, lo, hi, target, tol=INVERSE_TOL, max_iter=200):
    """Vectorized bisection for an increasing ``f`` on ``[lo, hi]``."""
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    for _ in range(max_iter):
        if np.all(hi - lo <= tol * np.maximum(1.0, np.abs(lo))):
            break
        mid = 0.5 * (lo + hi)
        below = f(mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def _finish(out):
    out = np.asarray(out)
    return out if out.ndim else float(out)


# gamma_bar ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GammaBarMap:
    """``s -> x + int_x^s (1 - gamma)``, its inverse and its limit at infinity."""

    base: float
    rate: RateFunction
    levels: np.ndarray
    images: np.ndarray
    values: np.ndarray
    slopes: np.ndarray
    limit: float

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s < self.base):
            raise DomainError("gamma_bar evaluated below its base point")
        i = np.searchsorted(self.levels, s, side="right") - 1
        d = s - self.levels[i]
        out = self.images[i] + (1.0 - self.values[i]) * d - 0.5 * self.slopes[i] * d * d
        return _finish(out)

    def inverse(self, u):
        """Inverse map, ``inf`` at and above ``limit``."""
        u = np.asarray(u, dtype=float)
        if np.any(u < self.base):
            raise DomainError("gamma_bar inverse evaluated below its base point")
        out = np.full(u.shape, math.inf)
        ok = u < self.limit
        uu = u[ok]
        i = np.searchsorted(self.images, uu, side="right") - 1
        res = self.levels[i] + (uu - self.images[i]) / (1.0 - self.values[i])
        curved = self.slopes[i] != 0
        if np.any(curved):
            ic = i[curved]
            lo = self.levels[ic]
            hi = self.levels[ic + 1]
            res[curved] = _bisect(self, lo, hi, uu[curved])
        out[ok] = res
        return _finish(out)


def gamma_bar(rate: RateFunction, x: float) -> GammaBarMap:
    rate = rate.restrict(x)
    if _is_linear(rate):
        levels = np.array(rate.spec.levels)
        vals = _clamp_saturated(np.array(rate.spec.rates))
        slopes = np.append(np.diff(vals) / np.diff(levels), 0.0)
    else:
        levels, vals = _step_pieces(rate)
        vals = _clamp_saturated(vals)
        slopes = np.zeros_like(vals)
    widths = np.diff(levels)
    gains = (1.0 - vals[:-1]) * widths - 0.5 * slopes[:-1] * widths**2
    images = x + np.concatenate(([0.0], np.cumsum(gains)))
    limit = float(images[-1]) if vals[-1] >= 1.0 else math.inf
    return GammaBarMap(float(x), rate, levels, images, vals, slopes, limit)


# rate ODE dy/dt = 1 - delta(y), y(0) = x --------------------------------------


def _require_certificate(rate: RateFunction) -> None:
    if rate.admissibility == "none":
        raise AdmissibilityError(
            "uniqueness not certified: declare the rate 'monotone' or 'lipschitz' to solve dy/dt = 1 - delta(y)"
        )


@dataclass(frozen=True, eq=False)
class _Segment:
    t0: float
    t1: float
    y0: float
    y1: float
    sol: object  # scipy dense output, or None for an affine segment
    slope: float


@dataclass(frozen=True, eq=False)
class RateOdeSolution:
    """Solution ``y`` of dy/dt = 1 - delta(y), y(0) = x, with inverse and horizon."""

    base: float
    rate: RateFunction
    method: Literal["analytic", "numeric"]
    segments: tuple[_Segment, ...]
    limit: float
    _t0: np.ndarray = field(repr=False)
    _y0: np.ndarray = field(repr=False)

    @property
    def knot_times(self) -> np.ndarray:
        """Times at which y passes the successive breakpoints of the rate."""
        return self._t0[1:]

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise DomainError("the rate ODE is solved forward from t = 0")
        i = np.searchsorted(self._t0, t, side="right") - 1
        out = np.empty(t.shape)
        for k in np.unique(i):
            seg = self.segments[k]
            sel = i == k
            tk = t[sel]
            if seg.sol is None:
                out[sel] = seg.y0 + seg.slope * (tk - seg.t0)
            else:
                inside = tk <= seg.t1
                vals = np.full(tk.shape, seg.y1)
                if np.any(inside):
                    vals[inside] = np.clip(seg.sol(tk[inside])[0], seg.y0, seg.y1)
                out[sel] = vals
        return _finish(out)

    def inverse(self, level):
        """First time y reaches ``level``; ``inf`` at and above the horizon."""
        level = np.asarray(level, dtype=float)
        if np.any(level < self.base):
            raise DomainError("level below the ODE start point")
        out = np.full(level.shape, math.inf)
        ok = level < self.limit
        lv = level[ok]
        i = np.searchsorted(self._y0, lv, side="right") - 1
        res = np.empty(lv.shape)
        for k in np.unique(i):
            seg = self.segments[k]
            sel = i == k
            if seg.sol is None:
                res[sel] = seg.t0 + (lv[sel] - seg.y0) / seg.slope
            else:
                f = lambda tt, s=seg: s.sol(tt)[0]
                res[sel] = _bisect(f, np.full(sel.sum(), seg.t0), np.full(sel.sum(), seg.t1), lv[sel])
        # knots map exactly onto their crossing times
        on_knot = lv == self._y0[i]
        res[on_knot] = self._t0[i[on_knot]]
        out[ok] = res
        return _finish(out)


def _make_solution(x, rate, method, segments, limit) -> RateOdeSolution:
    t0 = np.array([s.t0 for s in segments])
    y0 = np.array([s.y0 for s in segments])
    return RateOdeSolution(float(x), rate, method, tuple(segments), limit, t0, y0)


def _solve_piecewise_constant(rate: RateFunction, x: float) -> RateOdeSolution:
    levels, vals = _step_pieces(rate)
    vals = _clamp_saturated(vals)
    segments = []
    t = 0.0
    limit = math.inf
    for k in range(levels.size):
        slope = 1.0 - vals[k]
        y_end = levels[k + 1] if k + 1 < levels.size else math.inf
        if slope == 0.0:
            # saturated: y stays put from here on
            segments.append(_Segment(t, math.inf, levels[k], levels[k], None, 0.0))
            limit = float(levels[k])
            break
        t_end = t + (y_end - levels[k]) / slope
        segments.append(_Segment(t, t_end, levels[k], y_end, None, slope))
        t = t_end
    return _make_solution(x, rate, "analytic", segments, limit)


def _solve_linear_tabulated(rate: RateFunction, x: float) -> RateOdeSolution:
    spec = rate.spec
    levels = np.array(spec.levels)
    vals = _clamp_saturated(np.array(spec.rates))
    segments = []
    t = 0.0
    limit = math.inf
    for k in range(levels.size - 1):
        lo, hi = levels[k], levels[k + 1]
        r0, r1 = vals[k], vals[k + 1]
        m = (r1 - r0) / (hi - lo)

        def rhs(_t, y, r0=r0, m=m, lo=lo):
            return 1.0 - (r0 + m * (y - lo))

        if r1 >= 1.0:
            # the rate reaches 1 at hi: y approaches hi only asymptotically
            decay = (1.0 - r0) / (hi - lo)
            t_end = t + math.log((hi - lo) / 1e-14) / decay
            sol = solve_ivp(rhs, (t, t_end), [lo], method="RK45", rtol=ODE_RTOL, atol=ODE_ATOL, dense_output=True)
            segments.append(_Segment(t, t_end, lo, hi, sol.sol, 0.0))
            limit = float(hi)
            return _make_solution(x, rate, "numeric", segments, limit)

        def hit(_t, y, hi=hi):
            return y[0] - hi

        hit.terminal = True
        hit.direction = 1
        t_max = (hi - lo) / (1.0 - max(r0, r1))
        sol = solve_ivp(
            rhs,
            (t, t + 1.5 * t_max + 1e-9),
            [lo],
            method="RK45",
            rtol=ODE_RTOL,
            atol=ODE_ATOL,
            dense_output=True,
            events=hit,
        )
        if not sol.t_events[0].size:
            raise RuntimeError("rate ODE failed to reach the next knot")
        t_hit = float(sol.t_events[0][0])
        segments.append(_Segment(t, t_hit, lo, hi, sol.sol, 0.0))
        t = t_hit
    tail = 1.0 - vals[-1]
    if tail == 0.0:
        segments.append(_Segment(t, math.inf, levels[-1], levels[-1], None, 0.0))
        limit = float(levels[-1])
    else:
        segments.append(_Segment(t, math.inf, levels[-1], math.inf, None, tail))
    return _make_solution(x, rate, "numeric", segments, limit)


def solve_rate_ode(rate: RateFunction, x: float) -> RateOdeSolution:
    """Solve dy/dt = 1 - delta(y), y(0) = x.

    Piecewise-constant rates are solved in closed form. Linearly interpolated
    tables are integrated knot to knot with an adaptive RK45 scheme
    (rtol 1e-10), stopping exactly on each knot through event location.
    """
    _require_certificate(rate)
    rate = rate.restrict(x)
    if _is_linear(rate):
        return _solve_linear_tabulated(rate, x)
    return _solve_piecewise_constant(rate, x)


# conversions ----------------------------------------------------------------


def _converted_admissibility(adm: Admissibility, stretch: float) -> Admissibility:
    if isinstance(adm, Lipschitz):
        return Lipschitz(adm.constant * stretch) if math.isfinite(stretch) else "none"
    return adm


def latent_to_natural(rate: RateFunction, x: float) -> RateFunction:
    """Natural rate ``gamma o gamma_bar^{-1}`` reproducing the latent tax process.

    Thresholds and knots are mapped through ``gamma_bar``; this is exact for
    piecewise-constant rates and exact at the knots for linear tables.
    """
    rate = rate.restrict(x)
    gb = gamma_bar(rate, x)
    spec = rate.spec
    if isinstance(spec, Constant):
        new: RateSpec = spec
    elif isinstance(spec, PiecewiseConstant):
        new = PiecewiseConstant(tuple(gb.images[1:]), spec.values)
    else:
        new = Tabulated(tuple(gb.images), spec.rates, spec.interpolation)
    sup = rate.sup
    stretch = 1.0 / (1.0 - sup) if sup < 1 else math.inf
    return RateFunction(float(x), new, _converted_admissibility(rate.admissibility, stretch))


def natural_to_latent(rate: RateFunction, x: float) -> RateFunction:
    """Latent rate ``s -> delta(y(s - x))`` reproducing the natural tax process."""
    rate = rate.restrict(x)
    sol = solve_rate_ode(rate, x)
    spec = rate.spec
    if isinstance(spec, Constant):
        return RateFunction(float(x), spec, rate.admissibility)
    times = sol.knot_times
    if isinstance(spec, PiecewiseConstant):
        new: RateSpec = PiecewiseConstant(tuple(x + times), spec.values)
    elif spec.interpolation == "step":
        new = Tabulated((x,) + tuple(x + times), spec.rates, "step")
    else:
        finite = np.isfinite(sol.inverse(np.array(spec.levels)))
        lv = list(x + sol.inverse(np.array(spec.levels)[finite]))
        rt = list(np.array(spec.rates)[finite])
        if not finite.all():
            # saturating table: sample 1 - rate uniformly at 0.02 decay lengths
            # (trapezoid error ~3e-5 relative)
            seg = sol.segments[-1]
            n = int(math.ceil(math.log((seg.y1 - seg.y0) / 1e-14) / 0.02))
            ts = seg.t0 + (seg.t1 - seg.t0) * np.arange(1, n) / n
            # on this piece 1 - delta(y(t)) = (1 - r0) exp(-k (t - t0)) in closed form
            r0 = float(rate(seg.y0))
            k = (1.0 - r0) / (seg.y1 - seg.y0)
            vals = 1.0 - (1.0 - r0) * np.exp(-k * (ts - seg.t0))
            keep = vals < 1.0 - SATURATION_TOL
            lv += list(x + ts[keep]) + [x + seg.t1]
            rt += list(vals[keep]) + [1.0]
        new = Tabulated(tuple(lv), tuple(rt), "linear")
    return RateFunction(float(x), new, _converted_admissibility(rate.admissibility, 1.0))


def kappa_to_delta(kappa: RateSpec, domain_start: float, admissibility: Admissibility = "none") -> RateFunction:
    """Map a rate on tax-paid-per-retained-capital to a natural rate, delta = kappa / (1 + kappa).

    Knot values are mapped pointwise; the spec shape is kept, so for linear
    tables the result is exact at the knots only.
    """
    vals = np.array(_spec_values(kappa), dtype=float)
    if np.any(vals < 0) or np.any(~np.isfinite(vals)):
        raise ValueError("kappa must be finite and non-negative")
    mapped = tuple(float(v) for v in vals / (1.0 + vals))
    if isinstance(kappa, Constant):
        spec: RateSpec = Constant(mapped[0])
    elif isinstance(kappa, PiecewiseConstant):
        spec = PiecewiseConstant(kappa.thresholds, mapped)
    else:
        spec = Tabulated(kappa.levels, mapped, kappa.interpolation)
    if isinstance(admissibility, Lipschitz):
        # d/dk k/(1+k) <= 1
        admissibility = Lipschitz(admissibility.constant)
    return RateFunction(float(domain_start), spec, admissibility)
