import math

import numpy as np
import pytest

from lcftax.errors import DomainError
from lcftax.paths import (
    BrownianWithDrift,
    CramerLundberg,
    PiecewiseLinearPath,
    RngStream,
    first_passage,
    generate_brownian_drift,
    generate_cramer_lundberg,
    path_from_claims,
    read_path_csv,
    running_max,
    write_path_csv,
)


def _dense_scan(path, level, direction, n=400_001):
    """Grid oracle: first grid time (right-continuous values) beyond the level."""
    t = np.linspace(0.0, path.horizon, n)
    v = path.value(t)
    hit = v > level if direction == "up" else v < level
    return t[np.argmax(hit)] if hit.any() else math.inf


class TestModels:
    def test_cl_rejects_bad_parameters(self):
        with pytest.raises(ValueError):
            CramerLundberg(0.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            CramerLundberg(1.0, -1.0, 1.0)
        with pytest.raises(ValueError):
            CramerLundberg(1.0, 1.0, 0.0)

    def test_bm_needs_positive_volatility(self):
        with pytest.raises(ValueError):
            BrownianWithDrift(1.0, 0.0)

    def test_laplace_exponents(self):
        cl = CramerLundberg(2.0, 1.0, 0.5)
        # c theta - lam theta / (mu + theta) with mu = 2
        assert cl.laplace_exponent(1.0) == pytest.approx(2.0 - 1.0 / 3.0)
        assert cl.mean_drift == pytest.approx(1.5)
        bm = BrownianWithDrift(0.3, 2.0)
        assert bm.laplace_exponent(2.0) == pytest.approx(0.6 + 0.5 * 4 * 4)


class TestPathObject:
    def test_evaluation_is_right_continuous(self):
        p = PiecewiseLinearPath([0, 1, 3], [1, 2, 3], [1, 0.5, 3])
        assert p.value(1.0) == 0.5
        assert p.value_left(1.0) == 2.0
        assert p.value(0.5) == pytest.approx(1.5)
        # slope on (1, 3) is (3 - 0.5) / 2
        assert p.value(2.0) == pytest.approx(1.75)
        assert p.value(3.0) == 3.0

    def test_rejects_upward_jump_and_bad_grid(self):
        with pytest.raises(ValueError):
            PiecewiseLinearPath([0, 1], [0, 1], [0, 2])
        with pytest.raises(ValueError):
            PiecewiseLinearPath([0, 0], [0, 0], [0, 0])
        with pytest.raises(ValueError):
            PiecewiseLinearPath([0.1, 1], [0, 0], [0, 0])

    def test_outside_horizon_is_an_error(self):
        p = PiecewiseLinearPath([0, 1], [0, 1], [0, 1])
        with pytest.raises(DomainError):
            p.value(1.5)

    def test_arrays_are_read_only(self):
        p = PiecewiseLinearPath([0, 1], [0, 1], [0, 1])
        with pytest.raises(ValueError):
            p.times[0] = 3.0

    def test_running_max_against_dense_grid(self):
        path = generate_cramer_lundberg(CramerLundberg(2, 1, 1), 3.0, 20.0, RngStream(1))
        t = np.linspace(0, 20, 200_001)
        grid_max = np.maximum.accumulate(path.value(t))
        exact = running_max(path, t)
        assert np.all(exact >= grid_max - 1e-12)
        assert np.max(exact - grid_max) <= 2 * 20 / 200_000 + 1e-12


class TestGenerators:
    def test_same_stream_same_path(self):
        m = CramerLundberg(2, 1, 1)
        a = generate_cramer_lundberg(m, 5.0, 30.0, RngStream(4, 2))
        b = generate_cramer_lundberg(m, 5.0, 30.0, RngStream(4, 2))
        c = generate_cramer_lundberg(m, 5.0, 30.0, RngStream(4, 3))
        assert a == b
        assert a != c

    def test_cl_path_matches_claim_assembly(self):
        m = CramerLundberg(2, 1, 1)
        p = generate_cramer_lundberg(m, 5.0, 30.0, RngStream(8))
        jumps = p.left[1:-1] - p.right[1:-1]
        rebuilt = path_from_claims(5.0, 2.0, p.times[1:-1], jumps, 30.0)
        assert np.allclose(rebuilt.left, p.left, atol=1e-12)
        assert np.allclose(rebuilt.right, p.right, atol=1e-12)

    def test_cl_moments(self):
        m = CramerLundberg(2, 1, 1)
        ends = [generate_cramer_lundberg(m, 0.0, 10.0, RngStream(0, k)).right[-1] for k in range(4000)]
        # X_10 has mean 10 (c - lam E[claim]) t and variance lam E[claim^2] t = 20
        assert abs(np.mean(ends) - 10.0) < 4 * math.sqrt(20 / 4000)
        assert np.var(ends) == pytest.approx(20.0, rel=0.1)

    def test_zero_intensity_is_a_line(self):
        p = generate_cramer_lundberg(CramerLundberg(1.5, 0.0, 1.0), 2.0, 4.0, RngStream(0))
        assert len(p) == 2
        assert p.value(4.0) == pytest.approx(8.0)

    def test_brownian_grid_and_moments(self):
        m = BrownianWithDrift(0.5, 1.0)
        p = generate_brownian_drift(m, 1.0, 2.0, 0.01, RngStream(3))
        assert len(p) == 201
        assert p.horizon == 2.0
        ends = [generate_brownian_drift(m, 0.0, 1.0, 0.1, RngStream(1, k)).right[-1] for k in range(4000)]
        assert abs(np.mean(ends) - 0.5) < 4 / math.sqrt(4000)

    @pytest.mark.slow
    def test_cl_law_of_large_numbers(self):
        m = CramerLundberg(2, 1, 1)
        rates = np.array(
            [generate_cramer_lundberg(m, 10.0, 100.0, RngStream(5, k)).right[-1] for k in range(100_000)]
        )
        rates = (rates - 10.0) / 100.0
        se = np.std(rates, ddof=1) / math.sqrt(rates.size)
        assert abs(np.mean(rates) - 1.0) <= 3 * se

    @pytest.mark.slow
    def test_brownian_unit_variance(self):
        m = BrownianWithDrift(0.0, 1.0)
        ends = np.array([generate_brownian_drift(m, 0.0, 1.0, 0.5, RngStream(6, k)).right[-1] for k in range(100_000)])
        # the sample variance of n normals has standard error sqrt(2 / n)
        assert abs(np.var(ends, ddof=1) - 1.0) <= 3 * math.sqrt(2 / ends.size)
        assert all(generate_brownian_drift(m, 0.7, 1.0, 0.5, RngStream(6, k)).right[0] == 0.7 for k in range(5))

    def test_brownian_rejects_coarse_step(self):
        with pytest.raises(ValueError):
            generate_brownian_drift(BrownianWithDrift(0, 1), 0.0, 1.0, 1.0, RngStream(0))


class TestPassage:
    def test_strict_passage_examples(self):
        p = PiecewiseLinearPath([0, 2, 4], [1, 3, 2], [1, 0.5, 2])
        assert first_passage(p, 2.0, "up") == pytest.approx(1.0)
        # reaching exactly 3 is not a strict passage above 3
        assert first_passage(p, 3.0, "up") == math.inf
        # starting exactly at 1 is not below 1; the jump at t = 2 is
        assert first_passage(p, 1.0, "down") == 2.0
        assert first_passage(p, 0.0, "down") == math.inf

    def test_straight_line(self):
        p = PiecewiseLinearPath([0, 5], [0, 5], [0, 5])
        assert first_passage(p, 3.0, "up") == 3.0
        assert running_max(p, 4.0) == 4.0

    def test_max_before_jump(self):
        p = PiecewiseLinearPath([0, 1, 3], [0, 5, 2], [0, 2, 2])
        assert running_max(p, 2.0) == 5.0

    def test_start_beyond_level(self):
        p = PiecewiseLinearPath([0, 1], [3, 4], [3, 4])
        assert first_passage(p, 2.0, "up") == 0.0

    @pytest.mark.parametrize("seed", range(5))
    def test_against_dense_grid(self, seed):
        path = generate_cramer_lundberg(CramerLundberg(2, 1, 1), 5.0, 20.0, RngStream(seed))
        dt = 20.0 / 400_000
        for level, direction in ((12.0, "up"), (3.0, "down")):
            exact = first_passage(path, level, direction)
            grid = _dense_scan(path, level, direction)
            if math.isinf(exact):
                assert math.isinf(grid)
            else:
                assert exact <= grid <= exact + dt + 1e-12


class TestCsv:
    def test_round_trip_and_format(self, tmp_path):
        p = generate_cramer_lundberg(CramerLundberg(2, 1, 1), 5.0, 10.0, RngStream(0))
        f = tmp_path / "p.csv"
        write_path_csv(p, f)
        raw = f.read_bytes()
        assert raw.startswith(b"t,left,right\n")
        assert b"\r" not in raw
        assert read_path_csv(f) == p

    def test_header_is_checked(self, tmp_path):
        f = tmp_path / "bad.csv"
        f.write_text("a,b,c\n0,1,1\n")
        with pytest.raises(ValueError):
            read_path_csv(f)
