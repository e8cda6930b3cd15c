import pytest
from hypothesis import given, strategies as st

from minewatch.environment import Channel
from minewatch.sensing import Reading, SensorSpec, default_sensor_suite, quantize, sample
from minewatch.topology import NodeAddress

TMP = SensorSpec(Channel.TEMP_C, quant_step=0.5, min_value=-40.0, max_value=125.0, sensor_noise_std=0.0)
LIGHT = SensorSpec(Channel.LIGHT_RAW, quant_step=1.0, min_value=0.0, max_value=65535.0, sensor_noise_std=0.0)


class TestSample:
    def test_nearest_step(self):
        assert sample(TMP, 25.26, rng_key=1) == 25.5

    def test_clamp_at_16bit_ceiling(self):
        assert sample(LIGHT, 70000.0, rng_key=1) == 65535.0

    def test_tie_rounds_away_from_zero(self):
        assert sample(TMP, 25.25, rng_key=1) == 25.5
        assert sample(TMP, -25.25, rng_key=1) == -25.5

    def test_clamp_floor(self):
        assert sample(TMP, -100.0, rng_key=1) == -40.0

    def test_deterministic(self):
        noisy = SensorSpec(Channel.TEMP_C, 0.5, -40.0, 125.0, sensor_noise_std=0.4)
        assert sample(noisy, 20.0, rng_key=77) == sample(noisy, 20.0, rng_key=77)
        # a step fine enough that distinct noise draws stay distinct
        fine = SensorSpec(Channel.TEMP_C, 1e-9, -40.0, 125.0, sensor_noise_std=0.4)
        assert sample(fine, 20.0, rng_key=77) != sample(fine, 20.0, rng_key=78)

    @given(st.floats(-39.5, 124.5))
    def test_quantization_idempotent(self, truth):
        once = sample(TMP, truth, rng_key=0)
        assert sample(TMP, once, rng_key=0) == once

    @given(st.floats(allow_nan=False, allow_infinity=False, width=64), st.integers(0, 2**64 - 1))
    def test_range_safety(self, truth, key):
        noisy = SensorSpec(Channel.TEMP_C, 0.5, -40.0, 125.0, sensor_noise_std=2.0)
        v = sample(noisy, truth, rng_key=key)
        assert -40.0 <= v <= 125.0

    @given(st.floats(-1000, 1000))
    def test_output_on_grid(self, truth):
        v = sample(TMP, truth, rng_key=0)
        assert v == quantize(v, 0.5)


class TestQuantize:
    @pytest.mark.parametrize(
        "value,step,expected",
        [(25.26, 0.5, 25.5), (25.24, 0.5, 25.0), (25.25, 0.5, 25.5), (-25.25, 0.5, -25.5), (0.0, 0.5, 0.0), (7.0, 1.0, 7.0)],
    )
    def test_cases(self, value, step, expected):
        assert quantize(value, step) == expected


class TestDefaultSuite:
    def test_temp_step(self):
        suite = default_sensor_suite({Channel.TEMP_C})
        assert suite[Channel.TEMP_C].quant_step == 0.5
        assert suite[Channel.TEMP_C].min_value == -40.0
        assert suite[Channel.TEMP_C].max_value == 125.0

    def test_empty(self):
        assert default_sensor_suite(set()) == {}

    def test_gas_ranges(self):
        suite = default_sensor_suite({Channel.CH4_PPM, Channel.CO_PPM})
        assert suite[Channel.CH4_PPM].min_value == 0.0
        assert suite[Channel.CH4_PPM].max_value == 50000.0
        assert suite[Channel.CO_PPM].max_value == 1000.0

    def test_light_is_16bit(self):
        suite = default_sensor_suite({Channel.LIGHT_RAW})
        assert suite[Channel.LIGHT_RAW].max_value == 65535.0
        assert suite[Channel.LIGHT_RAW].sensor_noise_std == 0.0


class TestSpecValidation:
    def test_step_positive(self):
        with pytest.raises(ValueError):
            SensorSpec(Channel.TEMP_C, 0.0, 0.0, 1.0)

    def test_range_ordered(self):
        with pytest.raises(ValueError):
            SensorSpec(Channel.TEMP_C, 0.5, 5.0, 5.0)


class TestReading:
    def test_equality_ignores_sim_time(self):
        a = Reading(NodeAddress.parse("1"), Channel.TEMP_C, 3, 3.0, 25.5)
        b = Reading(NodeAddress.parse("1"), Channel.TEMP_C, 3, 99.0, 25.5)
        assert a == b

    def test_null_is_distinct_value(self):
        a = Reading(NodeAddress.parse("1"), Channel.TEMP_C, 3, 3.0, None)
        b = Reading(NodeAddress.parse("1"), Channel.TEMP_C, 3, 3.0, 25.5)
        assert a != b
