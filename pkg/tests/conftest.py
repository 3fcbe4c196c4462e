import dataclasses

import pytest

from reflectwave import default_config, run_to_end, validate
from reflectwave.params import CableParams, SimParams


@pytest.fixture(scope="session")
def default_cfg():
    return default_config()


@pytest.fixture(scope="session")
def short_cfg(default_cfg):
    """Default scenario truncated to the first two bursts (fast tests)."""
    return validate(dataclasses.replace(
        default_cfg,
        sim=dataclasses.replace(default_cfg.sim, t_end=100e-6)))


@pytest.fixture(scope="session")
def lossless_cfg(default_cfg):
    """Lossless variant on a fine grid over ten cable delays."""
    return validate(dataclasses.replace(
        default_cfg,
        cable=CableParams(r_per_m=0.0),
        sim=SimParams(dt=0.25e-9, t_end=10 * default_cfg.tau,
                      record_stride=1)))


@pytest.fixture(scope="session")
def off_trace(default_cfg):
    return run_to_end(default_cfg, mode="off")


@pytest.fixture(scope="session")
def adaptive_trace(default_cfg):
    return run_to_end(default_cfg, mode="adaptive")


@pytest.fixture(scope="session")
def matched_trace(default_cfg):
    return run_to_end(default_cfg, mode="static-matched")
