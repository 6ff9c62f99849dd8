"""
Tests for configuration: environment defaults, parameter validation and the
experiment file loader.
"""

import os
import tempfile
from unittest.mock import patch

import pytest

from rtxp_sim.core.config import ConfigError, PedamacsConfig, XmacConfig, ensure_data_dir, get_data_dir
from rtxp_sim.experiments.models import ExperimentSpec, load_spec, read_config_file


@pytest.fixture
def config_file():
    """Write an INI experiment file and yield its path."""
    with tempfile.TemporaryDirectory() as temp_dir:
        path = os.path.join(temp_dir, "experiment.ini")

        def write(text):
            with open(path, "w", encoding="utf-8") as f:
                f.write(text)
            return path

        yield write


def test_data_dir_from_environment():
    """RTXP_SIM_DATA_DIR overrides the default data directory."""
    with tempfile.TemporaryDirectory() as temp_dir:
        target = os.path.join(temp_dir, "out")
        with patch.dict(os.environ, {"RTXP_SIM_DATA_DIR": target}):
            assert get_data_dir() == target
            assert ensure_data_dir() == target
            assert os.path.isdir(target)


def test_xmac_and_tdma_validation():
    """Bad timing values are configuration errors."""
    with pytest.raises(ConfigError):
        XmacConfig(max_retries=-1)
    with pytest.raises(ConfigError):
        XmacConfig(cycle_period_us=0)
    with pytest.raises(ConfigError):
        PedamacsConfig(guard_us=2_000)
    assert XmacConfig().strobe_period_us == 1_000


def test_spec_defaults():
    """Defaults describe the reference campaign."""
    spec = ExperimentSpec()
    assert spec.node_counts == [100, 200, 300, 400, 500, 600, 700, 800]
    assert spec.replications == 20
    assert spec.alarms == 200
    assert spec.alarm_period_us == 5_000_000


def test_spec_rejects_bad_values():
    """Validation failures surface as ConfigError from load_spec."""
    with pytest.raises(ConfigError):
        load_spec(node_counts=[1])
    with pytest.raises(ConfigError):
        load_spec(alarm_period_s=0)
    with pytest.raises(ConfigError):
        load_spec(replications=0)
    with pytest.raises(ConfigError):
        load_spec(protocol="aloha")
    with pytest.raises(ConfigError):
        load_spec(rtxp={"duty_cycle": 2.0})
    with pytest.raises(ConfigError):
        load_spec(rtxp={"warp_factor": 9})


def test_read_config_file(config_file):
    """Sections map onto spec fields and override dictionaries."""
    path = config_file(
        "[experiment]\n"
        "protocol = xmac-gradient\n"
        "channel = log-normal\n"
        "node_counts = 300, 100 200\n"
        "alarm_period_s = 1\n"
        "\n"
        "[xmac]\n"
        "max_retries = 500\n"
        "\n"
        "[rtxp]\n"
        "duty_cycle = 0.02\n"
        "\n"
        "[pedamacs]\n"
        "guard_receivers = False\n"
    )
    values = read_config_file(path)
    assert values["protocol"] == "xmac-gradient"
    assert values["node_counts"] == [300, 100, 200]
    assert values["xmac"] == {"max_retries": 500}

    spec = load_spec(path)
    assert spec.node_counts == [100, 200, 300]
    assert spec.alarm_period_us == 1_000_000
    settings = spec.settings()
    assert settings.xmac.max_retries == 500
    assert settings.rtxp.duty_cycle == 0.02
    assert settings.pedamacs.guard_receivers is False


def test_overrides_beat_the_file(config_file):
    """Command line values win; None leaves the file value alone."""
    path = config_file("[experiment]\nalarms = 50\nseed = 9\n\n[xmac]\nmax_retries = 5\ncca_us = 300\n")
    spec = load_spec(path, alarms=10, seed=None, xmac={"max_retries": 0})
    assert spec.alarms == 10
    assert spec.seed == 9
    assert spec.xmac == {"max_retries": 0, "cca_us": 300}


def test_unknown_section(config_file):
    path = config_file("[experiment]\nalarms = 5\n\n[mesh]\nsize = 3\n")
    with pytest.raises(ConfigError):
        read_config_file(path)


def test_missing_config_file():
    with pytest.raises(OSError):
        read_config_file("/nonexistent/experiment.ini")
