"""Shared fixtures: the 4-bus case study, its certificate, and slow trajectories.

Session scope keeps the two 600 s reference simulations to one run each.
"""

import contextlib

import numpy as np
import pytest

from swingcert import (
    SystemState,
    build_certificate,
    build_network,
    case_study_setup,
    generate_schedule,
    simulate,
    solve_equilibrium,
)


def flat_start(net) -> SystemState:
    return SystemState(
        delta=np.zeros(net.n), omega_g=np.zeros(net.n_gen), xi=np.zeros(net.n), t=0.0
    )


@pytest.fixture(scope="session")
def case():
    return case_study_setup()


@pytest.fixture(scope="session")
def case_eq(case):
    net, ctrl = case
    return solve_equilibrium(net, ctrl)


@pytest.fixture(scope="session")
def case_cert(case, case_eq):
    # kappa/tau of the reference DoS experiment
    net, ctrl = case
    return build_certificate(net, ctrl, case_eq, kappa=10.0, tau=1.5)


@pytest.fixture(scope="session")
def dos_schedule():
    return generate_schedule(10.0, 1.5, 600.0, seed=0, policy="greedy")


@pytest.fixture(scope="session")
def jit_warm(case):
    # compile the integrator kernel outside any timed test
    net, ctrl = case
    simulate(net, ctrl, flat_start(net), None, dt=1e-3, t_end=0.05, sample_dt=0.05)
    return True


@pytest.fixture(scope="session")
def nominal_traj(case, case_eq, case_cert, jit_warm):
    net, ctrl = case
    return simulate(
        net, ctrl, flat_start(net), None, dt=1e-3, t_end=600.0, sample_dt=0.05,
        equilibrium=case_eq, eps1=case_cert.eps1, eps2=case_cert.eps2,
    )


@pytest.fixture(scope="session")
def dos_traj(case, case_eq, case_cert, dos_schedule, jit_warm):
    net, ctrl = case
    return simulate(
        net, ctrl, flat_start(net), dos_schedule, dt=1e-3, t_end=600.0, sample_dt=0.05,
        equilibrium=case_eq, eps1=case_cert.eps1, eps2=case_cert.eps2,
    )


@pytest.fixture
def make_two_bus():
    """Factory for a minimal generator-plus-load pair with unit coupling."""

    def _make(load2=1.0, b=1.0, costs=(1.0, 1.0), damping=(1.0, 1.0)):
        config = {
            "buses": [
                {"id": 1, "voltage": 1.0, "inertia": 1.0, "damping": damping[0]},
                {"id": 2, "voltage": 1.0, "damping": damping[1]},
            ],
            "generators": [1],
            "lines": [{"from": 1, "to": 2, "susceptance": b}],
            "comm_edges": [[1, 2]],
            "costs": {"1": costs[0], "2": costs[1]},
            "loads": {"2": load2},
        }
        return build_network(config)

    return _make


@pytest.fixture
def report_line(capsys):
    """Context manager printing one ACCEPTANCE n: PASS|FAIL line per criterion."""

    @contextlib.contextmanager
    def _report(n: int):
        try:
            yield
        except BaseException:
            with capsys.disabled():
                print(f"ACCEPTANCE {n}: FAIL", flush=True)
            raise
        with capsys.disabled():
            print(f"ACCEPTANCE {n}: PASS", flush=True)

    return _report
