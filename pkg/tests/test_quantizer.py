"""Uniform scalar quantizer: grids, mapping, bounds."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ggsc.quantizer import QuantGrid, dequantize, fit_grid, quantize


class TestFitGrid:
    def test_group_mode_takes_widest_range(self):
        vals = np.array([
            [0.0, 0.0, 0.25],
            [1.0, 2.0, 0.75],
        ])
        grid = fit_grid(vals, q=8, mode="group")
        np.testing.assert_array_equal(grid.mins, [0.0, 0.0, 0.25])
        np.testing.assert_array_equal(grid.scales, [2.0, 2.0, 2.0])

    def test_component_mode_keeps_per_component_range(self):
        vals = np.array([
            [0.0, 0.0, 0.25],
            [1.0, 2.0, 0.75],
        ])
        grid = fit_grid(vals, q=8, mode="component")
        np.testing.assert_array_equal(grid.scales, [1.0, 2.0, 0.5])

    def test_matches_linear_scan(self):
        rng = np.random.default_rng(0)
        vals = rng.normal(size=(500, 4))
        grid = fit_grid(vals, q=10, mode="component")
        for c in range(4):
            lo = min(float(v) for v in vals[:, c])
            hi = max(float(v) for v in vals[:, c])
            assert grid.mins[c] == lo
            assert grid.scales[c] == hi - lo

    def test_all_equal_degenerates_to_zero_scale(self):
        grid = fit_grid(np.full((10, 2), 3.5), q=8)
        np.testing.assert_array_equal(grid.scales, [0.0, 0.0])
        levels = quantize(np.full((10, 2), 3.5), grid)
        assert (levels == 0).all()

    def test_one_dimensional_samples(self):
        grid = fit_grid(np.array([1.0, 3.0, 2.0]), q=4)
        assert grid.components == 1
        assert grid.mins[0] == 1.0
        assert grid.scales[0] == 2.0

    def test_bad_input_rejected(self):
        with pytest.raises(ValueError):
            fit_grid(np.zeros((0, 3)), q=8)
        with pytest.raises(ValueError):
            fit_grid(np.array([[np.nan, 0.0]]), q=8)
        with pytest.raises(ValueError):
            fit_grid(np.zeros((4, 3)), q=8, mode="global")

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            QuantGrid(mins=np.zeros(3), scales=np.zeros(3), q=0, mode="group")
        with pytest.raises(ValueError):
            QuantGrid(mins=np.zeros(3), scales=np.zeros(3), q=32, mode="group")
        with pytest.raises(ValueError):
            QuantGrid(mins=np.zeros(3), scales=-np.ones(3), q=8, mode="group")
        with pytest.raises(ValueError):
            QuantGrid(mins=np.zeros(3), scales=np.zeros(2), q=8, mode="group")

    def test_levels_and_step(self):
        grid = QuantGrid(mins=np.zeros(1), scales=np.array([2.0]), q=3,
                         mode="group")
        assert grid.levels == 7
        np.testing.assert_allclose(grid.step, [2.0 / 7.0])


class TestQuantize:
    def test_formula_pins(self):
        """Direct evaluations of b = floor((a-min)*(2^q-1)/s + 1/2)."""
        grid = QuantGrid(mins=np.array([0.0]), scales=np.array([1.0]), q=2,
                         mode="group")
        assert quantize(np.array([0.5]), grid)[0] == 2  # floor(1.5 + 0.5)
        assert quantize(np.array([0.0]), grid)[0] == 0  # at the minimum

        grid8 = QuantGrid(mins=np.array([-1.0]), scales=np.array([2.0]), q=8,
                          mode="group")
        assert quantize(np.array([1.0]), grid8)[0] == 255  # at min + s

    def test_rounds_to_nearest(self):
        grid = QuantGrid(mins=np.array([0.0]), scales=np.array([10.0]), q=4,
                         mode="group")
        step = 10.0 / 15.0
        vals = np.array([0.49 * step, 0.51 * step, 7 * step + 0.2 * step])
        np.testing.assert_array_equal(quantize(vals, grid), [0, 1, 7])

    def test_clamps_half_ulp_excursions(self):
        grid = QuantGrid(mins=np.array([0.0]), scales=np.array([1.0]), q=8,
                         mode="group")
        assert quantize(np.array([1.0 + 1e-12]), grid)[0] == 255
        assert quantize(np.array([-1e-12]), grid)[0] == 0
        # values clearly past the fitted range clamp instead of wrapping
        assert quantize(np.array([1.01]), grid)[0] == 255
        assert quantize(np.array([-0.01]), grid)[0] == 0

    def test_monotone(self):
        rng = np.random.default_rng(1)
        vals = np.sort(rng.uniform(-3.0, 3.0, size=1000))
        grid = fit_grid(vals, q=6)
        levels = quantize(vals, grid)
        assert (np.diff(levels) >= 0).all()

    def test_multidim_shapes(self):
        rng = np.random.default_rng(2)
        vals = rng.normal(size=(7, 5, 3))
        grid = fit_grid(vals.reshape(-1, 3), q=8)
        levels = quantize(vals, grid)
        assert levels.shape == (7, 5, 3)
        assert levels.dtype == np.int64

    def test_trailing_dim_mismatch_rejected(self):
        grid = fit_grid(np.zeros((3, 2)), q=4)
        with pytest.raises(ValueError):
            quantize(np.zeros((5, 3)), grid)


class TestDequantize:
    def test_endpoints(self):
        grid = QuantGrid(mins=np.array([2.0]), scales=np.array([4.0]), q=1,
                         mode="group")
        assert dequantize(np.array([0]), grid)[0] == 2.0
        assert dequantize(np.array([1]), grid)[0] == 6.0  # min + s at q=1

    def test_zero_scale_returns_min(self):
        grid = QuantGrid(mins=np.array([1.5]), scales=np.array([0.0]), q=8,
                         mode="group")
        assert dequantize(np.array([0]), grid)[0] == 1.5

    def test_out_of_range_levels_rejected(self):
        grid = QuantGrid(mins=np.zeros(1), scales=np.ones(1), q=3, mode="group")
        with pytest.raises(ValueError):
            dequantize(np.array([8]), grid)
        with pytest.raises(ValueError):
            dequantize(np.array([-1]), grid)

    def test_non_integer_levels_rejected(self):
        grid = QuantGrid(mins=np.zeros(1), scales=np.ones(1), q=3, mode="group")
        with pytest.raises(ValueError):
            dequantize(np.array([1.5]), grid)
        # float-typed but integral values are accepted
        assert dequantize(np.array([2.0]), grid)[0] == pytest.approx(2.0 / 7.0)


class TestRoundTrip:
    def test_error_within_half_step(self):
        rng = np.random.default_rng(3)
        vals = rng.uniform(-5.0, 7.0, size=(2000, 3))
        for q in (1, 4, 8, 12, 16):
            for mode in ("group", "component"):
                grid = fit_grid(vals, q=q, mode=mode)
                back = dequantize(quantize(vals, grid), grid)
                bound = 0.5 * grid.scales / grid.levels + 1e-12
                err = np.abs(back - vals)
                assert (err <= bound).all(), (q, mode, err.max(), bound)

    def test_fixed_point_on_grid_levels(self):
        """quantize(dequantize(b)) == b for every representable level."""
        grid = QuantGrid(mins=np.array([-2.0, 0.5]),
                         scales=np.array([3.0, 3.0]), q=6, mode="group")
        levels = np.stack(
            np.meshgrid(np.arange(64), np.arange(64), indexing="ij"), axis=-1
        )
        back = quantize(dequantize(levels, grid), grid)
        np.testing.assert_array_equal(back, levels)

    def test_group_mode_bound_uses_shared_scale(self):
        """A narrow component in group mode sees the wide component's
        scale, so its absolute error bound is the shared one."""
        rng = np.random.default_rng(4)
        vals = np.stack([
            rng.uniform(0.0, 10.0, 500),
            rng.uniform(0.0, 0.1, 500),
        ], axis=1)
        grid = fit_grid(vals, q=8, mode="group")
        back = dequantize(quantize(vals, grid), grid)
        shared = 0.5 * 10.0 / 255.0
        assert np.abs(back - vals).max() <= shared * 1.02


@settings(max_examples=60, deadline=None)
@given(
    seed=st.integers(0, 2**16),
    n=st.integers(min_value=1, max_value=200),
    c=st.integers(min_value=1, max_value=4),
    q=st.integers(min_value=1, max_value=16),
    mode=st.sampled_from(["group", "component"]),
)
def test_quantizer_bound_property(seed, n, c, q, mode):
    rng = np.random.default_rng(seed)
    vals = rng.uniform(-100.0, 100.0, size=(n, c)) * rng.uniform(0.01, 1.0, c)
    grid = fit_grid(vals, q=q, mode=mode)
    levels = quantize(vals, grid)
    assert levels.min() >= 0 and levels.max() <= grid.levels
    back = dequantize(levels, grid)
    bound = 0.5 * grid.scales / grid.levels + 1e-12
    assert (np.abs(back - vals) <= bound).all()
    # fixed point
    np.testing.assert_array_equal(quantize(back, grid), levels)
