from pathlib import Path

import pytest

from minewatch.config import RunConfig
from minewatch.environment import Channel, EnvField, Environment
from minewatch.sensing import default_sensor_suite

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture(scope="session")
def paper_config() -> RunConfig:
    return RunConfig.load(CONFIG_DIR / "paper.toml")


@pytest.fixture(scope="session")
def leak_config() -> RunConfig:
    return RunConfig.load(CONFIG_DIR / "mine_leak.toml")


@pytest.fixture(scope="session")
def paper_topology(paper_config):
    return paper_config.topology


@pytest.fixture()
def quiet_env() -> Environment:
    """Noise-free constant fields for tests that need exact values."""
    return Environment(
        fields={
            Channel.TEMP_C: EnvField(Channel.TEMP_C, baseline=25.0),
            Channel.LIGHT_RAW: EnvField(Channel.LIGHT_RAW, baseline=512.0),
            Channel.CH4_PPM: EnvField(Channel.CH4_PPM, baseline=4.0),
            Channel.CO_PPM: EnvField(Channel.CO_PPM, baseline=2.0),
        }
    )


@pytest.fixture()
def quiet_sensors():
    """Default suite with sensor noise zeroed, all channels."""
    import dataclasses

    suite = default_sensor_suite(set(Channel))
    return {c: dataclasses.replace(s, sensor_noise_std=0.0) for c, s in suite.items()}
