"""Property-based checks over randomly drawn rates, paths and models."""

import math

import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from conftest import CL
from lcftax.paths import BrownianWithDrift, CramerLundberg, path_from_claims, read_path_csv, running_max, write_path_csv
from lcftax.rates import PiecewiseConstant, RateFunction, gamma_bar, latent_to_natural, natural_to_latent, solve_rate_ode
from lcftax.scale import ExitProblem, exit_transform, scale_function
from lcftax.taxation import apply_latent_tax, apply_natural_tax

X0 = 3.0


@st.composite
def piecewise_rates(draw, x=X0):
    k = draw(st.integers(1, 4))
    gaps = draw(st.lists(st.floats(0.2, 10.0), min_size=k - 1, max_size=k - 1))
    values = draw(st.lists(st.floats(0.0, 0.95), min_size=k, max_size=k))
    thresholds = tuple(x + np.cumsum(gaps)) if gaps else ()
    return RateFunction(x, PiecewiseConstant(thresholds, tuple(sorted(values))), "monotone")


@st.composite
def claim_paths(draw, x=X0, horizon=20.0):
    n = draw(st.integers(0, 25))
    times = np.sort(draw(st.lists(st.floats(0.01, horizon - 0.01), min_size=n, max_size=n, unique=True)))
    sizes = draw(st.lists(st.floats(0.01, 4.0), min_size=n, max_size=n))
    return path_from_claims(x, CL.premium_rate, times, sizes, horizon)


@given(piecewise_rates(), st.floats(0.0, 40.0), st.floats(0.0, 40.0))
def test_gamma_bar_slope_bounds(rate, s1, s2):
    lo, hi = sorted((X0 + s1, X0 + s2))
    g = gamma_bar(rate, X0)
    rise = g(hi) - g(lo)
    assert (1 - rate.sup) * (hi - lo) - 1e-9 <= rise <= (1 - rate.inf) * (hi - lo) + 1e-9


@given(piecewise_rates(), st.floats(0.0, 60.0))
def test_ode_solution_bounds_and_inverse(rate, t):
    sol = solve_rate_ode(rate, X0)
    y = sol(t)
    assert (1 - rate.sup) * t - 1e-9 <= y - X0 <= (1 - rate.inf) * t + 1e-9
    assert abs(sol.inverse(y) - t) <= 1e-9 * max(1.0, t) / (1 - rate.sup)


@given(piecewise_rates())
def test_conversion_round_trip(rate):
    back = natural_to_latent(latent_to_natural(rate, X0), X0)
    assert np.allclose(back.spec.thresholds, rate.spec.thresholds, rtol=0, atol=1e-9)
    assert back.spec.values == rate.spec.values


@given(claim_paths(), piecewise_rates())
def test_taxed_process_stays_below_pre_tax(path, rate):
    t = np.union1d(path.times, np.linspace(0, path.horizon, 200))
    for taxed in (apply_latent_tax(path, rate), apply_natural_tax(path, rate)):
        v = taxed.values(t)
        assert np.all(v <= path.value(t) + 1e-12)
        # the taxed running maximum never exceeds the pre-tax one
        assert np.all(taxed.running_max(t) <= running_max(path, t) + 1e-12)


@given(claim_paths(), piecewise_rates())
def test_latent_and_natural_agree_after_conversion(path, rate):
    a = apply_latent_tax(path, rate)
    b = apply_natural_tax(path, latent_to_natural(rate, X0))
    t = np.union1d(path.times, np.linspace(0, path.horizon, 200))
    assert np.max(np.abs(a.values(t) - b.values(t))) <= 1e-9


@given(piecewise_rates(), st.floats(0.5, 20.0), st.floats(0.5, 20.0), st.sampled_from([0.0, 0.05]))
def test_exit_transform_monotone_in_upper_level(rate, d1, d2, q):
    w = scale_function(CL, q)
    lo, hi = sorted((d1, d2))
    v_lo = exit_transform(ExitProblem(X0, X0 + lo, q, rate), w)
    v_hi = exit_transform(ExitProblem(X0, X0 + hi, q, rate), w)
    assert 0.0 <= v_hi <= v_lo + 1e-12 <= 1.0 + 1e-12


@given(claim_paths())
def test_path_csv_round_trip(tmp_path_factory, path):
    f = tmp_path_factory.mktemp("csv") / "p.csv"
    write_path_csv(path, f)
    assert read_path_csv(f) == path


@given(
    st.one_of(
        st.builds(CramerLundberg, st.floats(0.1, 5.0), st.floats(0.0, 5.0), st.floats(0.1, 3.0)),
        st.builds(BrownianWithDrift, st.floats(-2.0, 2.0), st.floats(0.1, 3.0)),
    )
)
def test_laplace_exponent_convex(model):
    grid = np.linspace(0.0, 10.0, 101)
    psi = np.array([model.laplace_exponent(v) for v in grid])
    assert psi[0] == 0.0
    second = psi[2:] - 2 * psi[1:-1] + psi[:-2]
    assert np.all(second >= -1e-9 * np.maximum(1.0, np.abs(psi[1:-1])))
    assert math.isfinite(psi[-1])
