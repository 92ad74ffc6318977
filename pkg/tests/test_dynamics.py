"""Vector field, algebraic load buses, and RK4 integration tests."""

import numpy as np
import pytest

from swingcert import (
    DoSSchedule,
    SecurityRegionExit,
    SystemState,
    build_network,
    simulate,
    vector_field,
    weighted_laplacian,
)
from swingcert.dynamics import (
    load_frequency,
    potential,
    potential_gradient,
    potential_hessian,
)

from conftest import flat_start


def star_network():
    # one generator feeding two loads with distinct damping
    config = {
        "buses": [
            {"id": 1, "voltage": 1.0, "inertia": 1.0, "damping": 1.0},
            {"id": 2, "voltage": 1.0, "damping": 1.0},
            {"id": 3, "voltage": 1.0, "damping": 2.0},
        ],
        "generators": [1],
        "lines": [
            {"from": 1, "to": 2, "susceptance": 1.0},
            {"from": 1, "to": 3, "susceptance": 1.0},
        ],
        "comm_edges": [[1, 2], [2, 3]],
        "costs": {"1": 1.0, "2": 1.0, "3": 1.0},
        "loads": {},
    }
    return build_network(config)


def random_state(net, rng, scale=0.2):
    delta = rng.uniform(-scale, scale, net.n)
    delta -= delta.mean()
    return SystemState(
        delta=delta,
        omega_g=rng.uniform(-scale, scale, net.n_gen),
        xi=rng.uniform(-scale, scale, net.n),
        t=0.0,
    )


# --- potential ---------------------------------------------------------


def test_potential_gradient_zero_angle(case):
    net, _ = case
    assert np.array_equal(potential_gradient(net, np.zeros(net.n)), np.zeros(net.n))
    H = potential_hessian(net, np.zeros(net.n))
    assert np.allclose(H, weighted_laplacian(net.incidence, net.gamma), atol=1e-14)


def test_potential_gradient_two_bus(make_two_bus):
    net, _ = make_two_bus()
    delta = np.array([np.pi / 12, -np.pi / 12])
    assert np.allclose(potential_gradient(net, delta), [0.5, -0.5], atol=1e-12)


def test_potential_gradient_matches_finite_differences(case):
    net, _ = case
    rng = np.random.default_rng(3)
    delta = rng.uniform(-0.05, 0.05, net.n)
    delta -= delta.mean()
    g = potential_gradient(net, delta)
    h = 1e-6
    fd = np.zeros(net.n)
    for i in range(net.n):
        e = np.zeros(net.n)
        e[i] = h
        fd[i] = (potential(net, delta + e) - potential(net, delta - e)) / (2 * h)
    assert np.allclose(fd, g, rtol=1e-6, atol=1e-9)


# --- load buses ---------------------------------------------------------


def test_load_frequency_zero_at_equilibrium(case, case_eq):
    net, _ = case
    wl = load_frequency(net, case_eq.delta_bar, case_eq.u_star)
    assert np.allclose(wl, 0.0, atol=1e-12)


def test_load_frequency_zero_when_balanced(case):
    net, _ = case
    xi = net.load.copy()
    assert np.allclose(load_frequency(net, np.zeros(net.n), xi), 0.0, atol=1e-15)


def test_load_frequency_arithmetic():
    net, _ = star_network()
    xi = np.array([0.0, 0.1, -0.2])
    wl = load_frequency(net, np.zeros(3), xi)
    assert np.allclose(wl, [0.1, -0.1], atol=1e-15)


def test_load_frequency_satisfies_constraint(case):
    net, _ = case
    rng = np.random.default_rng(11)
    for _ in range(20):
        s = random_state(net, rng)
        wl = load_frequency(net, s.delta, s.xi)
        grad_l = potential_gradient(net, s.delta)[net.n_gen:]
        resid = net.damping[net.n_gen:] * wl + grad_l + net.load[net.n_gen:] - s.xi[net.n_gen:]
        assert np.linalg.norm(resid) <= 1e-12


# --- vector field -------------------------------------------------------


def test_vector_field_zero_at_equilibrium(case, case_eq):
    net, ctrl = case
    s = SystemState(
        delta=case_eq.delta_bar, omega_g=np.zeros(net.n_gen), xi=case_eq.u_star, t=0.0
    )
    dd, dw, dx = vector_field(net, ctrl, s, comm_on=True)
    assert np.allclose(dd, 0.0, atol=1e-10)
    assert np.allclose(dw, 0.0, atol=1e-10)
    assert np.allclose(dx, 0.0, atol=1e-10)


def test_vector_field_integrators_freeze_without_comm(case):
    net, ctrl = case
    # pick xi with exactly zero frequency: at delta = 0 the flow gradient
    # vanishes, so xi_L = load_L gives omega_L = 0 with no rounding
    xi = net.load.copy()
    xi[: net.n_gen] += np.array([0.3, -0.8])
    s = SystemState(delta=np.zeros(net.n), omega_g=np.zeros(net.n_gen), xi=xi, t=0.0)
    _, _, dx = vector_field(net, ctrl, s, comm_on=False)
    assert np.array_equal(dx, np.zeros(net.n))
    # with the consensus term back on the same state moves
    _, _, dx_on = vector_field(net, ctrl, s, comm_on=True)
    assert np.linalg.norm(dx_on) > 1e-3


def test_vector_field_delta_dot_zero_mean(case):
    net, ctrl = case
    rng = np.random.default_rng(7)
    for _ in range(20):
        dd, _, _ = vector_field(net, ctrl, random_state(net, rng), comm_on=True)
        assert abs(dd.sum()) <= 1e-12


def test_vector_field_affine_in_omega_xi(case):
    # for fixed delta the map is exactly linear in (omega_g, xi)
    net, ctrl = case
    rng = np.random.default_rng(19)
    base = random_state(net, rng)
    a, b = 0.7, -1.3

    def field(omega_g, xi):
        s = SystemState(delta=base.delta, omega_g=omega_g, xi=xi, t=0.0)
        return np.concatenate(vector_field(net, ctrl, s, comm_on=True))

    d1 = (rng.standard_normal(net.n_gen), rng.standard_normal(net.n))
    d2 = (rng.standard_normal(net.n_gen), rng.standard_normal(net.n))
    f0 = field(base.omega_g, base.xi)
    combo = field(base.omega_g + a * d1[0] + b * d2[0], base.xi + a * d1[1] + b * d2[1])
    expect = f0 + a * (field(base.omega_g + d1[0], base.xi + d1[1]) - f0) + b * (
        field(base.omega_g + d2[0], base.xi + d2[1]) - f0
    )
    assert np.allclose(combo, expect, atol=1e-12)


def test_state_projection_validated():
    with pytest.raises(ValueError, match="range\\(Pi\\)"):
        SystemState(delta=np.array([0.5, 0.2]), omega_g=np.zeros(1), xi=np.zeros(2), t=0.0)


# --- integration --------------------------------------------------------


def test_simulate_constant_at_equilibrium(case, case_eq, jit_warm):
    net, ctrl = case
    x0 = SystemState(
        delta=case_eq.delta_bar, omega_g=np.zeros(net.n_gen), xi=case_eq.u_star, t=0.0
    )
    traj = simulate(net, ctrl, x0, None, dt=1e-3, t_end=10.0, sample_dt=0.1)
    assert np.max(np.abs(traj.delta - case_eq.delta_bar)) <= 1e-10
    assert np.max(np.abs(traj.omega)) <= 1e-10
    assert np.max(np.abs(traj.xi - case_eq.u_star)) <= 1e-10


def test_simulate_matches_single_rk4_step(case, case_eq, jit_warm):
    net, ctrl = case
    rng = np.random.default_rng(5)
    x0 = random_state(net, rng, scale=0.05)
    dt = 1e-3
    traj = simulate(net, ctrl, x0, None, dt=dt, t_end=dt, sample_dt=dt)

    def f(delta, omega_g, xi):
        s = SystemState(delta=delta, omega_g=omega_g, xi=xi, t=0.0)
        return vector_field(net, ctrl, s, comm_on=True)

    state = (x0.delta, x0.omega_g, x0.xi)
    k1 = f(*state)
    k2 = f(*(s + 0.5 * dt * k for s, k in zip(state, k1)))
    k3 = f(*(s + 0.5 * dt * k for s, k in zip(state, k2)))
    k4 = f(*(s + dt * k for s, k in zip(state, k3)))
    step = [
        s + dt / 6.0 * (a + 2 * b + 2 * c + d)
        for s, a, b, c, d in zip(state, k1, k2, k3, k4)
    ]
    step[0] = step[0] - step[0].mean()  # the integrator re-projects angles
    assert np.allclose(traj.delta[1], step[0], atol=1e-12)
    assert np.allclose(traj.omega[1, : net.n_gen], step[1], atol=1e-12)
    assert np.allclose(traj.xi[1], step[2], atol=1e-12)


def test_simulate_self_convergence(case, jit_warm):
    net, ctrl = case
    a = simulate(net, ctrl, flat_start(net), None, dt=1e-3, t_end=1.0, sample_dt=1.0)
    b = simulate(net, ctrl, flat_start(net), None, dt=5e-4, t_end=1.0, sample_dt=1.0)
    gap = max(
        np.max(np.abs(a.delta[-1] - b.delta[-1])),
        np.max(np.abs(a.omega[-1] - b.omega[-1])),
        np.max(np.abs(a.xi[-1] - b.xi[-1])),
    )
    assert gap < 1e-8


def test_simulate_deterministic(case, jit_warm):
    net, ctrl = case
    a = simulate(net, ctrl, flat_start(net), None, dt=1e-3, t_end=2.0)
    b = simulate(net, ctrl, flat_start(net), None, dt=1e-3, t_end=2.0)
    assert np.array_equal(a.delta, b.delta)
    assert np.array_equal(a.omega, b.omega)
    assert np.array_equal(a.xi, b.xi)


def test_simulate_frequency_settles(nominal_traj):
    late = nominal_traj.t >= 30.0  # settle time frozen after first verified run
    assert np.max(np.abs(nominal_traj.omega[late])) < 1e-3


def test_simulate_algebraic_residual(case, nominal_traj):
    # load-bus constraint holds at every recorded sample
    net, _ = case
    n_g = net.n_gen
    grad_s = (net.gamma * np.sin(nominal_traj.delta @ net.incidence)) @ net.incidence.T
    resid = (
        net.damping[n_g:] * nominal_traj.omega[:, n_g:]
        + grad_s[:, n_g:]
        + net.load[n_g:]
        - nominal_traj.xi[:, n_g:]
    )
    assert np.max(np.linalg.norm(resid, axis=1)) <= 1e-10


def test_simulate_keeps_delta_projected(nominal_traj):
    assert np.max(np.abs(nominal_traj.delta.sum(axis=1))) <= 1e-9


def test_simulate_records_lyapunov(nominal_traj):
    W = nominal_traj.lyapunov
    z = nominal_traj.z_norm
    assert W is not None and z is not None
    assert W.shape == nominal_traj.t.shape and z.shape == nominal_traj.t.shape
    assert np.all(np.isfinite(W)) and np.all(np.isfinite(z))
    assert W[0] > 0 and z[0] > 0  # flat start is off-equilibrium


def test_simulate_dos_active_sampling(case, jit_warm):
    net, ctrl = case
    sched = DoSSchedule(intervals=((0.2, 0.3),), kappa=0.3, tau=2.0)
    traj = simulate(net, ctrl, flat_start(net), sched, dt=1e-3, t_end=1.0, sample_dt=0.05)
    expect = (traj.t >= 0.2) & (traj.t < 0.5)  # outage half-open on the right
    assert np.array_equal(traj.dos_active, expect)


def test_security_region_exit(make_two_bus, jit_warm):
    net, ctrl = make_two_bus(load2=5.0)  # far beyond the sine transfer limit
    with pytest.raises(SecurityRegionExit) as ei:
        simulate(net, ctrl, flat_start(net), None, dt=1e-3, t_end=20.0, sample_dt=0.05)
    exc = ei.value
    assert exc.time > 0.0
    assert exc.partial is not None
    assert exc.partial.n_samples >= 1
    assert exc.partial.t[-1] <= exc.time + 1e-12
    assert np.all(np.isfinite(exc.partial.delta))


def test_simulate_argument_validation(case):
    net, ctrl = case
    x0 = flat_start(net)
    with pytest.raises(ValueError, match="dt must be positive"):
        simulate(net, ctrl, x0, None, dt=0.0, t_end=1.0)
    with pytest.raises(ValueError, match="dt must be positive"):
        simulate(net, ctrl, x0, None, dt=1e-3, t_end=-1.0)
    with pytest.raises(ValueError, match="integer multiple"):
        simulate(net, ctrl, x0, None, dt=2e-3, t_end=1.0, sample_dt=3e-3)
    late = SystemState(delta=x0.delta, omega_g=x0.omega_g, xi=x0.xi, t=1.0)
    sched = DoSSchedule(intervals=((0.0, 1.0),), kappa=1.0, tau=2.0)
    with pytest.raises(ValueError, match="anchored at t = 0"):
        simulate(net, ctrl, late, sched, dt=1e-3, t_end=2.0)


def test_simulate_zero_horizon(case, jit_warm):
    net, ctrl = case
    traj = simulate(net, ctrl, flat_start(net), None, dt=1e-3, t_end=0.0)
    assert traj.n_samples == 1
    assert traj.t[0] == 0.0


def test_simulate_offset_start_without_schedule(case, jit_warm):
    net, ctrl = case
    x0 = SystemState(delta=np.zeros(net.n), omega_g=np.zeros(net.n_gen), xi=np.zeros(net.n), t=1.0)
    traj = simulate(net, ctrl, x0, None, dt=1e-3, t_end=1.5, sample_dt=0.05)
    assert traj.t[0] == 1.0


def test_trajectory_csv_round_trip(case, case_eq, case_cert, tmp_path, jit_warm):
    net, ctrl = case
    traj = simulate(
        net, ctrl, flat_start(net), None, dt=1e-3, t_end=0.5, sample_dt=0.05,
        equilibrium=case_eq, eps1=case_cert.eps1, eps2=case_cert.eps2,
    )
    path = tmp_path / "traj.csv"
    traj.to_csv(path)
    lines = path.read_text().splitlines()
    n = net.n
    header = (
        "t,"
        + ",".join(f"delta_{i}" for i in range(1, n + 1))
        + ","
        + ",".join(f"omega_{i}" for i in range(1, n + 1))
        + ","
        + ",".join(f"xi_{i}" for i in range(1, n + 1))
        + ",W,z_norm,dos_active"
    )
    assert lines[0] == header
    assert len(lines) == traj.n_samples + 1
    data = np.genfromtxt(path, delimiter=",", skip_header=1)
    assert np.allclose(data[:, 0], traj.t, rtol=1e-11, atol=1e-14)
    assert np.allclose(data[:, 1 : 1 + n], traj.delta, rtol=1e-11, atol=1e-14)
    assert np.allclose(data[:, 1 + n : 1 + 2 * n], traj.omega, rtol=1e-11, atol=1e-14)
    assert np.allclose(data[:, 1 + 2 * n : 1 + 3 * n], traj.xi, rtol=1e-11, atol=1e-14)
    assert np.allclose(data[:, 1 + 3 * n], traj.lyapunov, rtol=1e-11, atol=1e-16)
    assert set(np.unique(data[:, -1])) <= {0.0, 1.0}
