import dataclasses
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reflectwave.params import (CableParams, Config, ConfigError, MracParams,
                                PwmParams, SimParams, Trace, default_config,
                                load_config, parse_quantity, validate,
                                write_config)

REPO = Path(__file__).resolve().parents[1]


# -- quantity parsing --------------------------------------------------------

@pytest.mark.parametrize("text,value", [
    ("250n", 250e-9),
    ("0.35u", 0.35e-6),
    ("0.35µ", 0.35e-6),
    ("2k", 2e3),
    ("15M", 15e6),
    ("1m", 1e-3),
    ("1e-9", 1e-9),
    ("-3.5", -3.5),
    (".5k", 500.0),
])
def test_parse_quantity(text, value):
    assert parse_quantity(text) == pytest.approx(value, rel=1e-15)


@pytest.mark.parametrize("text", ["", "abc", "1.2.3", "5 G", "n250"])
def test_parse_quantity_rejects(text):
    with pytest.raises(ValueError):
        parse_quantity(text)


# -- derived quantities ------------------------------------------------------

def test_surge_impedance_default():
    # sqrt(250 nH / 100 pF) = sqrt(2500)
    assert CableParams(l_per_m=250e-9, c_per_m=100e-12).z0 == 50.0


def test_delay_default():
    # 70 m * sqrt(250e-9 * 100e-12) = 70 * 5e-9, worked by hand
    assert CableParams(length_m=70.0).tau == pytest.approx(0.35e-6, rel=1e-12)


def test_validate_populates_derived(default_cfg):
    assert default_cfg.z0 == 50.0
    assert default_cfg.tau == pytest.approx(0.35e-6)
    assert default_cfg.f_ring == pytest.approx(714285.714, rel=1e-6)
    assert default_cfg.n_delay * default_cfg.sim.dt == pytest.approx(
        default_cfg.tau, rel=1e-12)


# -- invariant violations ----------------------------------------------------

def test_dmin_zero_reported():
    cfg = Config(branch=dataclasses.replace(Config().branch, d_min=0.0))
    with pytest.raises(ConfigError) as err:
        validate(cfg)
    assert any("d_min" in v and "> 0" in v for v in err.value.violations)


def test_all_violations_collected():
    cfg = Config(
        cable=CableParams(length_m=-1.0),
        pwm=dataclasses.replace(Config().pwm, v_dc=0.0),
    )
    with pytest.raises(ConfigError) as err:
        validate(cfg)
    text = " ".join(err.value.violations)
    assert "length_m" in text and "v_dc" in text


def test_nonfinite_rejected():
    cfg = Config(cable=CableParams(l_per_m=math.nan))
    with pytest.raises(ConfigError) as err:
        validate(cfg)
    assert any("finite" in v for v in err.value.violations)


def test_dt_coarser_than_rise_rejected():
    cfg = Config(sim=SimParams(dt=1e-7))
    with pytest.raises(ConfigError) as err:
        validate(cfg)
    assert any("t_rise/20" in v for v in err.value.violations)


# -- idempotency and scaling -------------------------------------------------

def test_validate_idempotent_default():
    once = validate(Config())
    twice = validate(once)
    assert once == twice


@given(dt=st.floats(min_value=4.4e-10, max_value=5e-9),
       length=st.floats(min_value=20.0, max_value=200.0))
@settings(max_examples=30, deadline=None)
def test_validate_idempotent_random(dt, length):
    cfg = Config(cable=CableParams(length_m=length),
                 sim=SimParams(dt=dt, t_end=2e-3))
    once = validate(cfg)
    assert validate(once) == once
    # adjusted step never stretches and lands exactly on the delay grid
    assert once.sim.dt <= dt * (1 + 1e-12)
    assert once.n_delay * once.sim.dt == pytest.approx(once.tau, rel=1e-12)


@given(k=st.floats(min_value=0.1, max_value=10.0))
@settings(max_examples=40, deadline=None)
def test_length_scaling(k):
    a = CableParams(length_m=70.0)
    b = CableParams(length_m=70.0 * k)
    assert b.tau == pytest.approx(k * a.tau, rel=1e-12)
    assert b.z0 == a.z0


# -- config file I/O ---------------------------------------------------------

def test_default_ini_matches_builtin(default_cfg):
    loaded = load_config(REPO / "configs" / "default.ini")
    assert loaded == default_cfg


def test_config_roundtrip(tmp_path, default_cfg):
    path = tmp_path / "echo.ini"
    write_config(default_cfg, path)
    assert load_config(path) == default_cfg


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[cable]\nlenght_m = 70\n")
    with pytest.raises(ConfigError) as err:
        load_config(path)
    assert any("lenght_m" in v for v in err.value.violations)


def test_unknown_section_rejected(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[cabel]\nlength_m = 70\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_si_suffix_in_file(tmp_path):
    path = tmp_path / "c.ini"
    path.write_text("[cable]\nl_per_m = 250n\nc_per_m = 0.1n\n")
    cfg = load_config(path)
    assert cfg.cable.l_per_m == pytest.approx(250e-9)
    assert cfg.z0 == pytest.approx(50.0)


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/nowhere.ini")


# -- trace container ---------------------------------------------------------

def test_trace_length_mismatch_rejected():
    cols = {name: np.zeros(4) for name in
            ("t_s", "v_inv_V", "v_mot_V", "v_coil_V", "i_hf_A",
             "i_branch_A", "duty", "zeq_ohm", "lyap_J")}
    cols["duty"] = np.zeros(3)
    with pytest.raises(ValueError):
        Trace(**cols)


def test_trace_column_access(off_trace):
    assert off_trace.column("v_mot_V") is off_trace.v_mot_V
    with pytest.raises(KeyError):
        off_trace.column("bogus")
