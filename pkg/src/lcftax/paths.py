"""Exact sample paths of spectrally negative risk processes.

A path is stored as a list of breakpoints ``(t_i, X(t_i-), X(t_i))``. Between
consecutive breakpoints the path is affine, and every breakpoint may carry a
downward jump. Compound Poisson paths with linear premium income are therefore
represented without any discretization error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Union

import numpy as np

from .errors import DomainError

Direction = Literal["up", "down"]

# relative slack for the "no upward jump" check on externally supplied data
_JUMP_TOL = 1e-12


@dataclass(frozen=True)
class RngStream:
    """Seed plus substream index; each pair yields an independent generator."""

    seed: int
    stream_index: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_index,))
        return np.random.default_rng(ss)


@dataclass(frozen=True)
class CramerLundberg:
    """Premium income at rate c, Poisson(lambda) claims with exponential sizes."""

    premium_rate: float
    claim_intensity: float
    claim_mean: float

    def __post_init__(self):
        for name in ("premium_rate", "claim_intensity", "claim_mean"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.premium_rate <= 0:
            raise ValueError("premium_rate must be positive")
        if self.claim_intensity < 0:
            raise ValueError("claim_intensity must be non-negative")
        if self.claim_mean <= 0:
            raise ValueError("claim_mean must be positive")

    @property
    def claim_rate(self) -> float:
        """Parameter mu of the exponential claim law (mean 1/mu)."""
        return 1.0 / self.claim_mean

    def laplace_exponent(self, theta):
        theta = np.asarray(theta, dtype=float)
        mu = self.claim_rate
        return self.premium_rate * theta - self.claim_intensity * theta / (mu + theta)

    @property
    def mean_drift(self) -> float:
        """psi'(0+), the expected increment per unit time."""
        return self.premium_rate - self.claim_intensity * self.claim_mean


@dataclass(frozen=True)
class BrownianWithDrift:
    drift: float
    volatility: float

    def __post_init__(self):
        if not (math.isfinite(self.drift) and math.isfinite(self.volatility)):
            raise ValueError("Brownian parameters must be finite")
        if self.volatility <= 0:
            raise ValueError("volatility must be positive")

    def laplace_exponent(self, theta):
        theta = np.asarray(theta, dtype=float)
        return self.drift * theta + 0.5 * self.volatility**2 * theta**2

    @property
    def mean_drift(self) -> float:
        return self.drift


LevyModel = Union[CramerLundberg, BrownianWithDrift]


@dataclass(frozen=True, eq=False)
class PiecewiseLinearPath:
    """Cadlag path with affine pieces and downward jumps at the breakpoints.

    ``left[i]`` is the left limit at ``times[i]`` and ``right[i]`` the value.
    The first breakpoint sits at time 0 and the last one at the horizon.
    """

    times: np.ndarray
    left: np.ndarray
    right: np.ndarray

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        left = np.array(self.left, dtype=float)
        right = np.array(self.right, dtype=float)
        if times.ndim != 1 or times.shape != left.shape or times.shape != right.shape:
            raise ValueError("times, left and right must be 1-d arrays of equal length")
        if times.size < 2:
            raise ValueError("a path needs at least a start and a horizon breakpoint")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(left)) and np.all(np.isfinite(right))):
            raise ValueError("path data must be finite")
        if times[0] != 0.0:
            raise ValueError("first breakpoint must be at time 0")
        if np.any(np.diff(times) <= 0):
            raise ValueError("breakpoint times must be strictly increasing")
        if left[0] != right[0]:
            raise ValueError("no jump allowed at time 0")
        scale = np.maximum(1.0, np.abs(left))
        if np.any(right - left > _JUMP_TOL * scale):
            raise ValueError("upward jumps are not allowed")
        for arr in (times, left, right):
            arr.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)
        # running maximum at each breakpoint, left limits included
        bp_max = np.maximum.accumulate(np.maximum(left, right))
        bp_max.flags.writeable = False
        object.__setattr__(self, "_bp_max", bp_max)

    @property
    def start_value(self) -> float:
        return float(self.right[0])

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def __len__(self):
        return self.times.size

    def _check_times(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > self.horizon) or np.any(np.isnan(t)):
            raise DomainError(f"time outside [0, {self.horizon}]")
        return t

    def value(self, t):
        """Right-continuous evaluation X_t."""
        t = self._check_times(t)
        i = np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, self.times.size - 2)
        t0, t1 = self.times[i], self.times[i + 1]
        frac = (t - t0) / (t1 - t0)
        out = self.right[i] + (self.left[i + 1] - self.right[i]) * frac
        # the final breakpoint may itself carry a jump
        out = np.where(t == self.horizon, self.right[-1], out)
        return out if out.ndim else float(out)

    def value_left(self, t):
        """Left limit X_{t-} (equal to X_0 at t = 0)."""
        t = self._check_times(t)
        out = np.asarray(self.value(t), dtype=float).copy()
        j = np.searchsorted(self.times, t, side="left")
        j_clip = np.minimum(j, self.times.size - 1)
        on_bp = self.times[j_clip] == t
        out[on_bp] = self.left[j_clip[on_bp]]
        return out if out.ndim else float(out)

    def __eq__(self, other):
        if not isinstance(other, PiecewiseLinearPath):
            return NotImplemented
        return (
            np.array_equal(self.times, other.times)
            and np.array_equal(self.left, other.left)
            and np.array_equal(self.right, other.right)
        )

    __hash__ = None

    def to_csv(self, path: str | Path) -> None:
        write_path_csv(self, path)


def path_from_claims(x: float, premium_rate: float, claim_times, claim_sizes, horizon: float) -> PiecewiseLinearPath:
    """Assemble the exact path x + c t - S_t from claim arrival times and sizes."""
    claim_times = np.asarray(claim_times, dtype=float)
    claim_sizes = np.asarray(claim_sizes, dtype=float)
    keep = claim_times < horizon
    claim_times, claim_sizes = claim_times[keep], claim_sizes[keep]
    paid_before = np.concatenate(([0.0], np.cumsum(claim_sizes)))
    left_claims = x + premium_rate * claim_times - paid_before[:-1]
    right_claims = left_claims - claim_sizes
    end_value = x + premium_rate * horizon - paid_before[-1]
    times = np.concatenate(([0.0], claim_times, [horizon]))
    left = np.concatenate(([x], left_claims, [end_value]))
    right = np.concatenate(([x], right_claims, [end_value]))
    return PiecewiseLinearPath(times, left, right)


def generate_cramer_lundberg(model: CramerLundberg, x: float, horizon: float, rng: RngStream) -> PiecewiseLinearPath:
    if not (math.isfinite(x) and math.isfinite(horizon)):
        raise ValueError("x and horizon must be finite")
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    gen = rng.generator()
    lam = model.claim_intensity
    times: list[np.ndarray] = []
    sizes: list[np.ndarray] = []
    t_last = 0.0
    if lam > 0:
        chunk = max(16, int(lam * horizon * 1.2) + 16)
        while t_last < horizon:
            gaps = gen.exponential(1.0 / lam, chunk)
            claims = gen.exponential(model.claim_mean, chunk)
            arrivals = t_last + np.cumsum(gaps)
            times.append(arrivals)
            sizes.append(claims)
            t_last = arrivals[-1]
    if times:
        all_times = np.concatenate(times)
        all_sizes = np.concatenate(sizes)
    else:
        all_times = all_sizes = np.empty(0)
    return path_from_claims(x, model.premium_rate, all_times, all_sizes, horizon)


def generate_brownian_drift(
    model: BrownianWithDrift, x: float, horizon: float, step: float, rng: RngStream
) -> PiecewiseLinearPath:
    """Euler approximation on a uniform grid, linearly interpolated.

    This is the only approximate generator: passage times and maxima carry an
    O(sqrt(step)) discretization error with respect to true Brownian motion.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    if step >= horizon:
        raise ValueError("step must be smaller than the horizon")
    n = int(math.ceil(horizon / step - 1e-9))
    times = np.minimum(np.arange(n + 1) * step, horizon)
    times[-1] = horizon
    dt = np.diff(times)
    gen = rng.generator()
    incr = model.drift * dt + model.volatility * np.sqrt(dt) * gen.standard_normal(n)
    values = x + np.concatenate(([0.0], np.cumsum(incr)))
    return PiecewiseLinearPath(times, values, values.copy())


def running_max(path: PiecewiseLinearPath, t):
    """Exact running supremum over [0, t]; vectorized in t."""
    t = path._check_times(t)
    i = np.searchsorted(path.times, t, side="right") - 1
    out = np.maximum(path._bp_max[i], path.value(t))
    return out if np.ndim(out) else float(out)


def passage_on_nodes(times, left, right, level: float, direction: Direction) -> float:
    """First strict passage of an affine-between-nodes cadlag function.

    Up means the first time the function exceeds ``level``, down the first
    time it drops below. Returns ``math.inf`` when no passage occurs.
    """
    if direction not in ("up", "down"):
        raise ValueError("direction must be 'up' or 'down'")
    times = np.asarray(times, dtype=float)
    start = np.asarray(right, dtype=float)
    end = np.asarray(left, dtype=float)[1:]
    if direction == "up":
        at_node = start > level
        inside = np.concatenate((end > level, [False]))
    else:
        at_node = start < level
        inside = np.concatenate((end < level, [False]))
    hit = at_node | inside
    if not hit.any():
        return math.inf
    i = int(np.argmax(hit))
    if at_node[i]:
        return float(times[i])
    t0, t1 = times[i], times[i + 1]
    s0, s1 = start[i], end[i]
    t_cross = t0 + (level - s0) / (s1 - s0) * (t1 - t0)
    return float(min(max(t_cross, t0), t1))


def first_passage(path: PiecewiseLinearPath, level: float, direction: Direction) -> float:
    """Exact first passage time; ``math.inf`` if none occurs by the horizon."""
    return passage_on_nodes(path.times, path.left, path.right, level, direction)


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_path_csv(path: PiecewiseLinearPath, target: str | Path) -> None:
    lines = ["t,left,right"]
    lines += [f"{_fmt(t)},{_fmt(l)},{_fmt(r)}" for t, l, r in zip(path.times, path.left, path.right)]
    Path(target).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_path_csv(source: str | Path) -> PiecewiseLinearPath:
    text = Path(source).read_text(encoding="utf-8").strip().splitlines()
    if not text or text[0].strip() != "t,left,right":
        raise ValueError("expected header 't,left,right'")
    rows = np.array([[float(v) for v in line.split(",")] for line in text[1:]])
    return PiecewiseLinearPath(rows[:, 0], rows[:, 1], rows[:, 2])
