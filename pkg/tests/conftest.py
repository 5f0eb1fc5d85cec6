import numpy as np
import pytest

from lzsim import DriveParameters, IntegratorConfig, evolve

# published drive-parameter classes used throughout the suite
FIG3A = dict(delta_mhz=5.57, epsilon_m_mhz=100.0, period_ns=128.0)
FIG3B = dict(delta_mhz=9.60, epsilon_m_mhz=50.4, period_ns=606.0)
FIG3D = dict(delta_mhz=5.84, epsilon_m_mhz=100.0, period_ns=592.0)


@pytest.fixture(scope="session")
def fig3a_drive():
    return DriveParameters(**FIG3A, n_periods=63)


@pytest.fixture(scope="session")
def fig3b_drive():
    return DriveParameters(**FIG3B, n_periods=15)


@pytest.fixture(scope="session")
def fig3d_drive():
    return DriveParameters(**FIG3D, n_periods=25)


@pytest.fixture(scope="session")
def fig3a_traj_8us(fig3a_drive):
    """Dense fast-passage trajectory over 8 us; shared by several tests."""
    return evolve(fig3a_drive, IntegratorConfig(), t_span=(0.0, 8000.0), sample_every=8.0)


def ode_propagator(p, t1, t2, cfg=None):
    """Full 2x2 diabatic propagator over [t1, t2] from two basis runs."""
    from lzsim import QubitState

    cfg = cfg or IntegratorConfig()
    cols = []
    for init in (QubitState.ket0(), QubitState.ket1()):
        traj = evolve(p, cfg, init, t_span=(t1, t2), sample_every=(t2 - t1))
        cols.append(traj.amplitudes[-1])
    return np.array(cols).T
