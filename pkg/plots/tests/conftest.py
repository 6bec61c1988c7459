"""Shared fixtures: real solver output produced through the solver CLI.

The plotting package must never recompute physics, so these tests
exercise it against directories written by actual `rtupwind` runs,
driven as subprocesses exactly the way a user would drive them.
"""

import json
import subprocess

import pytest


def run_cli(cmd):
    proc = subprocess.run(cmd, capture_output=True, text=True)
    assert proc.returncode == 0, (
        f"{' '.join(map(str, cmd))} exited {proc.returncode}\n"
        f"stdout:\n{proc.stdout}\nstderr:\n{proc.stderr}")
    return proc


@pytest.fixture(scope="session")
def desk_run(tmp_path_factory):
    """Transient desk-scale phantom run (bundled preset, 400 steps)."""
    out = tmp_path_factory.mktemp("desk") / "run"
    run_cli(["rtupwind", "run", "--config", "preset:phantom2d_desk",
             "--out", str(out)])
    return out


@pytest.fixture(scope="session")
def steady_run(tmp_path_factory):
    """Stationary solve on the desk-scale grid.

    Same medium and beam as the desk preset at a coarser time step and
    stopping tolerance, to keep the fixture fast while still producing
    a genuine residual history and contraction-rate manifest.
    """
    root = tmp_path_factory.mktemp("steady")
    cfg = {
        "dimension": 2,
        "grid": {"L1": 50.0, "L2": 50.0, "M1": 50, "M2": 50, "M": 60,
                 "dt": 0.5, "T": 40.0},
        "medium": {"c": 0.196, "mu_a": 0.08, "mu_s": 1.09},
        "kernel": {"type": "hg", "g": 0.9},
        "source": {"type": "zero"},
        "initial": {"type": "zero"},
        "boundary": {"type": "gaussian_theta", "face": "x2=0",
                     "strip": [24.9, 25.1],
                     "center": 1.5707963267948966, "sigma": 0.2},
        "run": {"mode": "stationary", "tol": 1e-8},
    }
    cfg_path = root / "steady.json"
    cfg_path.write_text(json.dumps(cfg))
    out = root / "run"
    run_cli(["rtupwind", "steady", "--config", str(cfg_path),
             "--out", str(out)])
    return out
