from __future__ import annotations

import numpy as np
import pytest

from resetsg import lmi
from resetsg.model import ResetSystem, r1_system
from resetsg.partition import build_partition
from resetsg.simulator import BatterySpec, battery_inputs, run_battery

# coarse centre grids, nine each
COARSE_INTERIOR = np.linspace(-1.0, 3.0, 9)
COARSE_EXTERIOR = np.linspace(-1.0, 4.0, 9)
WINDOW = (-0.5, 1.5, -1.0, 1.0)


def first_order_lag() -> ResetSystem:
    """``1/(s+1)`` with an empty jump set."""
    return ResetSystem(A=[[-1.0]], B=[[1.0]], C=[[1.0]], D=[[0.0]], R=[[1.0]], M=[[1.0]], name="lag")


def static_gain(k: float = 2.0) -> ResetSystem:
    return ResetSystem(A=[[-1.0]], B=[[0.0]], C=[[0.0]], D=[[k]], R=[[1.0]], M=[[1.0]], name="gain")


def zeno_system() -> ResetSystem:
    """R1 flow with ``R = I``: a state in the jump set is mapped back into it."""
    r1 = r1_system()
    return ResetSystem(A=r1.A, B=r1.B, C=r1.C, D=r1.D, R=np.eye(2), M=r1.M, name="zeno")


@pytest.fixture
def lag():
    return first_order_lag()


@pytest.fixture
def r1():
    return r1_system()


@pytest.fixture(scope="session")
def r1_sweeps():
    sys = r1_system()
    out = {}
    for n in (1, 8):
        out[n] = lmi.sweep(sys, build_partition(sys.M, n), COARSE_INTERIOR, COARSE_EXTERIOR)
    return out


@pytest.fixture(scope="session")
def r1_battery():
    sys = r1_system()
    inputs = battery_inputs(1, BatterySpec(multisine=100), seed=0)
    return inputs, run_battery(sys, inputs)
