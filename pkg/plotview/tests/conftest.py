import math
import shutil
import struct
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

HEADER = ("t_s,v_inv_V,v_mot_V,v_coil_V,i_hf_A,i_branch_A,"
          "duty,zeq_ohm,lyap_J")


def write_csv(path, cols):
    n = len(cols["t_s"])
    names = HEADER.split(",")
    with open(path, "w", newline="\n") as fh:
        fh.write(HEADER + "\n")
        for k in range(n):
            fh.write(",".join(repr(float(cols[c][k])) for c in names) + "\n")
    return path


def png_size(path):
    data = Path(path).read_bytes()
    assert data[:8] == b"\x89PNG\r\n\x1a\n"
    w, h = struct.unpack(">II", data[16:24])
    return w, h


@pytest.fixture()
def synthetic_ring(tmp_path):
    """Square drive with a decaying 500 kHz ring on the motor terminal."""
    v_dc = 500.0
    t = np.arange(0.0, 200e-6, 50e-9)
    drive = v_dc * ((t % 50e-6) < 25e-6)
    ring = 1.05 * v_dc * np.exp(-((t % 50e-6) / 12e-6)) \
        * np.cos(2 * math.pi * 500e3 * t)
    cols = {
        "t_s": t,
        "v_inv_V": drive,
        "v_mot_V": drive + ring,
        "v_coil_V": (drive + ring) / 4.0,
        "i_hf_A": 0.1 * np.sin(2 * math.pi * 500e3 * t),
        "i_branch_A": np.zeros_like(t),
        "duty": np.full_like(t, 0.32),
        "zeq_ohm": np.full_like(t, 60.0),
        "lyap_J": (ring / 4.0) ** 2 / 2.0,
    }
    return write_csv(tmp_path / "ring.csv", cols)


def _reflectwave_cli(*args):
    return subprocess.run([sys.executable, "-m", "reflectwave.cli", *args],
                          capture_output=True, text=True)


@pytest.fixture(scope="session")
def real_traces(tmp_path_factory):
    """Default unmatched and adaptive traces via the simulator CLI."""
    if shutil.which(sys.executable) is None:
        pytest.skip("no python executable")
    probe = _reflectwave_cli("--help")
    if probe.returncode != 0:
        pytest.skip("reflectwave CLI not installed")
    root = tmp_path_factory.mktemp("real")
    for mode in ("off", "adaptive"):
        res = _reflectwave_cli("run", "--out", str(root / mode),
                               "--mode", mode)
        assert res.returncode == 0, res.stderr
    return {"off": root / "off" / "trace.csv",
            "adaptive": root / "adaptive" / "trace.csv"}
