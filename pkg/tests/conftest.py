# tests/conftest.py
import os
import sys

import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from src.channel import ChannelState, SystemParams  # noqa: E402


@pytest.fixture
def typical_channel():
    """Default geometry with unit fading: pathloss d^-3 on every link."""
    return ChannelState(
        g1=5.0 ** -3,
        g2=20.0 ** -3,
        g3=8.0 ** -3,
        h1=15.0 ** -3,
        h2=4.0 ** -3,
        f1=4.0 ** -3,
        f2=12.0 ** -3,
        sigma2=0.001,
    )


@pytest.fixture
def params():
    """40 dBm BS, 20 dBm relay, short dual budget so tests stay quick."""
    return SystemParams(P=1e4, Pr_max=100.0, beta=0.1, Rmin=0.1, max_dual_iters=40)


@pytest.fixture
def write_config(tmp_path):
    def _write(text: str, name: str = "params.env") -> str:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return str(path)
    return _write
