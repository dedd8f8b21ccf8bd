import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from raqmimo.params import FrontEnd, SystemConfig, UserLink

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

UNIT_FE = FrontEnd(rho=1.0, phi=1.0, sigma2=1.0)


def spread_angles(K):
    """Elevations with distinct spatial frequencies."""
    if K == 1:
        return [0.3]
    return list(np.linspace(-1.2, 1.2, K))


def make_cfg(
    M=8,
    K=2,
    delta=0.0,
    betas=None,
    p_p=1.0,
    p_d=1.0,
    fe=UNIT_FE,
    rf=None,
    tau=None,
    T=100,
    elevations=None,
    azimuths=None,
    lo=0.0,
):
    betas = [1.0] * K if betas is None else list(betas)
    deltas = delta if isinstance(delta, (list, tuple)) else [delta] * K
    el = spread_angles(K) if elevations is None else list(elevations)
    az = [0.0] * K if azimuths is None else list(azimuths)
    p_p = p_p if isinstance(p_p, (list, tuple)) else [p_p] * K
    p_d = p_d if isinstance(p_d, (list, tuple)) else [p_d] * K
    users = tuple(
        UserLink(beta=b, rician=d, elevation=float(e), azimuth=float(a), pilot_power=pp, data_power=pd)
        for b, d, e, a, pp, pd in zip(betas, deltas, el, az, p_p, p_d)
    )
    return SystemConfig(
        num_sensors=M,
        users=users,
        pilot_length=K if tau is None else tau,
        coherence=T,
        front_end=fe,
        lo_arrival=lo,
        rf_baseline=rf,
    )


@pytest.fixture
def cfg_factory():
    return make_cfg


def rel(a, b):
    return abs(a - b) / abs(b)


# ---------------------------------------------------------------------------
# acceptance summary: one line per criterion at the end of the run
# ---------------------------------------------------------------------------

ACCEPTANCE = {}


@pytest.fixture
def record():
    def _record(number, ok, detail):
        ACCEPTANCE[number] = (bool(ok), detail)
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")

