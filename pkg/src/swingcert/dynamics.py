"""Closed-loop dynamics: potential function, algebraic load buses,
switched vector field, and the fixed-step RK4 simulator.

Load buses carry no inertia; their frequency is an algebraic function of
the remaining state (index-1 constraint, eliminated in closed form).
The distributed integral controller runs in one of two modes: with
communication (consensus term active) or under DoS (consensus removed,
local integration only).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

import numpy as np
from numba import njit

from .network import ControllerSetup, PowerNetwork

if TYPE_CHECKING:  # pragma: no cover
    from .dos import DoSSchedule
    from .equilibrium import Equilibrium


class SecurityRegionExit(RuntimeError):
    """A step drove some angle difference out of (-pi/2, pi/2)."""

    def __init__(self, message: str, time: float, partial: Optional["Trajectory"] = None):
        super().__init__(message)
        self.time = time
        self.partial = partial


@dataclass(frozen=True)
class SystemState:
    """Projected angles, generator frequencies, controller states."""

    delta: np.ndarray    # (n,), sum within 1e-9 of zero
    omega_g: np.ndarray  # (n_gen,)
    xi: np.ndarray       # (n,)
    t: float = 0.0

    def __post_init__(self) -> None:
        if abs(float(np.sum(self.delta))) > 1e-9:
            raise ValueError("delta not in range(Pi): |1^T delta| > 1e-9")


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled closed-loop trajectory.

    ``omega`` holds the full frequency vector (generators first, then the
    algebraic load-bus frequencies). ``lyapunov`` and ``z_norm`` are
    populated only when the simulation was given an equilibrium and
    cross-term weights to evaluate against.
    """

    t: np.ndarray           # (ns,)
    delta: np.ndarray       # (ns, n)
    omega: np.ndarray       # (ns, n)
    xi: np.ndarray          # (ns, n)
    dos_active: np.ndarray  # (ns,) bool, sample time inside an outage
    sample_dt: float
    lyapunov: Optional[np.ndarray] = None  # (ns,)
    z_norm: Optional[np.ndarray] = None    # (ns,)

    @property
    def n_samples(self) -> int:
        return len(self.t)

    def state_at(self, k: int, n_gen: int) -> SystemState:
        return SystemState(
            delta=self.delta[k], omega_g=self.omega[k, :n_gen], xi=self.xi[k], t=float(self.t[k])
        )

    def to_csv(self, path) -> None:
        """Write the trajectory with 12-significant-digit floats.

        Header: ``t,delta_1..n,omega_1..n,xi_1..n,W,z_norm,dos_active``.
        """
        n = self.delta.shape[1]
        w = self.lyapunov if self.lyapunov is not None else np.full(self.n_samples, np.nan)
        z = self.z_norm if self.z_norm is not None else np.full(self.n_samples, np.nan)
        cols = [self.t[:, None], self.delta, self.omega, self.xi,
                w[:, None], z[:, None], self.dos_active[:, None].astype(int)]
        data = np.concatenate(cols, axis=1)
        names = (["t"]
                 + [f"delta_{i + 1}" for i in range(n)]
                 + [f"omega_{i + 1}" for i in range(n)]
                 + [f"xi_{i + 1}" for i in range(n)]
                 + ["W", "z_norm", "dos_active"])
        fmt = ["%.12g"] * (len(names) - 1) + ["%d"]
        np.savetxt(path, data, fmt=fmt, delimiter=",", header=",".join(names), comments="")


def project_zero_mean(v: np.ndarray) -> np.ndarray:
    """Apply Pi = I - (1/n) 1 1^T."""
    v = np.asarray(v, dtype=float)
    return v - v.mean()


def potential(net: PowerNetwork, delta: np.ndarray) -> float:
    """U(delta) = -1^T Gamma cos(B^T delta)."""
    eta = net.incidence.T @ delta
    return float(-(net.gamma * np.cos(eta)).sum())


def potential_gradient(net: PowerNetwork, delta: np.ndarray) -> np.ndarray:
    """grad U = B Gamma sin(B^T delta)."""
    eta = net.incidence.T @ delta
    return net.incidence @ (net.gamma * np.sin(eta))


def potential_hessian(net: PowerNetwork, delta: np.ndarray) -> np.ndarray:
    """hess U = B Gamma [cos(B^T delta)] B^T, a weighted Laplacian."""
    eta = net.incidence.T @ delta
    return (net.incidence * (net.gamma * np.cos(eta))) @ net.incidence.T


def load_frequency(net: PowerNetwork, delta: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Algebraic load-bus frequency: omega_L = D_L^-1 (xi_L - P_L - grad U(delta)_L)."""
    ng = net.n_gen
    grad = net.incidence @ (net.gamma * np.sin(net.incidence.T @ delta))
    return (xi[ng:] - net.load[ng:] - grad[ng:]) / net.damping[ng:]


def vector_field(
    net: PowerNetwork, ctrl: ControllerSetup, state: SystemState, comm_on: bool
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Time derivatives (delta_dot, omega_g_dot, xi_dot) of the closed loop.

    delta_dot = Pi omega with omega = (omega_g, load frequencies);
    M_G omega_g_dot = -D_G omega_g - grad U_G + xi_G - P_G;
    xi_dot = -[comm_on] L_xi Q xi - Q^-1 omega.
    """
    ng = net.n_gen
    grad = potential_gradient(net, state.delta)
    omega = np.concatenate([state.omega_g, load_frequency(net, state.delta, state.xi)])
    d_delta = omega - omega.mean()
    d_omega_g = (-net.damping[:ng] * state.omega_g - grad[:ng]
                 + state.xi[:ng] - net.load[:ng]) / net.inertia
    d_xi = -omega / ctrl.cost
    if comm_on:
        d_xi = d_xi - ctrl.comm_laplacian @ (ctrl.cost * state.xi)
    return d_delta, d_omega_g, d_xi


@njit(cache=True)
def _rk4_kernel(delta0, omega_g0, xi0, dt, nsteps, stride, off_at_edge,
                B, BT, gamma, m_inv, d_gen, dl_inv, q_inv, q, L_xi, P, ng):
    n = delta0.shape[0]
    nsamp = nsteps // stride + 1
    sd = np.empty((nsamp, n))
    so = np.empty((nsamp, n))
    sx = np.empty((nsamp, n))
    d = delta0.copy()
    og = omega_g0.copy()
    xi = xi0.copy()

    def field(d, og, xi, off, outd, outo, outx):
        eta = BT @ d
        grad = B @ (gamma * np.sin(eta))
        om = np.empty(n)
        om[:ng] = og
        om[ng:] = (xi[ng:] - P[ng:] - grad[ng:]) * dl_inv
        mo = om.sum() / n
        for i in range(n):
            outd[i] = om[i] - mo
        for i in range(ng):
            outo[i] = (-d_gen[i] * og[i] - grad[i] + xi[i] - P[i]) * m_inv[i]
        if off:
            for i in range(n):
                outx[i] = -q_inv[i] * om[i]
        else:
            cons = L_xi @ (q * xi)
            for i in range(n):
                outx[i] = -q_inv[i] * om[i] - cons[i]

    def record(idx, d, og, xi):
        eta = BT @ d
        grad = B @ (gamma * np.sin(eta))
        sd[idx] = d
        so[idx, :ng] = og
        so[idx, ng:] = (xi[ng:] - P[ng:] - grad[ng:]) * dl_inv
        sx[idx] = xi

    record(0, d, og, xi)
    f1d = np.empty(n); f1o = np.empty(ng); f1x = np.empty(n)
    f2d = np.empty(n); f2o = np.empty(ng); f2x = np.empty(n)
    f3d = np.empty(n); f3o = np.empty(ng); f3x = np.empty(n)
    f4d = np.empty(n); f4o = np.empty(ng); f4x = np.empty(n)
    halt = -1
    for k in range(nsteps):
        off1 = off_at_edge[k]
        off4 = off_at_edge[k + 1]
        field(d, og, xi, off1, f1d, f1o, f1x)
        field(d + 0.5 * dt * f1d, og + 0.5 * dt * f1o, xi + 0.5 * dt * f1x, off1, f2d, f2o, f2x)
        field(d + 0.5 * dt * f2d, og + 0.5 * dt * f2o, xi + 0.5 * dt * f2x, off1, f3d, f3o, f3x)
        field(d + dt * f3d, og + dt * f3o, xi + dt * f3x, off4, f4d, f4o, f4x)
        d = d + (dt / 6.0) * (f1d + 2.0 * f2d + 2.0 * f3d + f4d)
        og = og + (dt / 6.0) * (f1o + 2.0 * f2o + 2.0 * f3o + f4o)
        xi = xi + (dt / 6.0) * (f1x + 2.0 * f2x + 2.0 * f3x + f4x)
        d = d - d.sum() / n
        eta = BT @ d
        out = False
        for e in range(eta.shape[0]):
            if eta[e] >= np.pi / 2 or eta[e] <= -np.pi / 2:
                out = True
        if out:
            halt = k + 1
            break
        if (k + 1) % stride == 0:
            record((k + 1) // stride, d, og, xi)
    return sd, so, sx, halt


def _off_at_edges(schedule: Optional["DoSSchedule"], dt: float, nsteps: int) -> np.ndarray:
    """Communication-off flag at each step edge time j*dt.

    Outage boundaries are rounded to the nearest step edge; membership is
    half-open [start, end), so an edge exactly at an outage start is off
    and one exactly at its end is back on.
    """
    off = np.zeros(nsteps + 1, dtype=np.bool_)
    if schedule is None:
        return off
    for start, dur in schedule.intervals:
        a = int(round(start / dt))
        b = int(round((start + dur) / dt))
        off[max(a, 0): min(b, nsteps + 1)] = True
    return off


def simulate(
    net: PowerNetwork,
    ctrl: ControllerSetup,
    x0: SystemState,
    schedule: Optional["DoSSchedule"],
    dt: float = 1e-3,
    t_end: float = 600.0,
    *,
    sample_dt: float = 0.05,
    equilibrium: Optional["Equilibrium"] = None,
    eps1: float = 0.0,
    eps2: float = 0.0,
) -> Trajectory:
    """Integrate the switched closed loop with classical fixed-step RK4.

    The communication mode is evaluated at each sub-step time (stages at
    the step start use the mode at the left edge, the final stage the
    mode at the right edge). delta is re-projected onto 1-perp after
    every step. If any angle difference reaches +-pi/2 the run halts
    with :class:`SecurityRegionExit` carrying the partial trajectory.

    With ``equilibrium`` attached, each sample is annotated with the
    Lyapunov value (at the given cross-term weights) and the full-state
    deviation norm ``z_norm``.
    """
    if dt <= 0 or t_end < 0:
        raise ValueError("dt must be positive and t_end nonnegative")
    if schedule is not None and x0.t != 0.0:
        raise ValueError("schedules are anchored at t = 0; start the state there")
    nsteps = int(round(t_end / dt))
    stride = max(1, int(round(sample_dt / dt)))
    if abs(stride * dt - sample_dt) > 1e-12 * max(1.0, sample_dt):
        raise ValueError("sample_dt must be an integer multiple of dt")
    ng = net.n_gen
    off = _off_at_edges(schedule, dt, nsteps)
    sd, so, sx, halt = _rk4_kernel(
        np.asarray(x0.delta, dtype=float),
        np.asarray(x0.omega_g, dtype=float),
        np.asarray(x0.xi, dtype=float),
        float(dt), nsteps, stride, off,
        net.incidence, np.ascontiguousarray(net.incidence.T), net.gamma,
        1.0 / net.inertia, net.damping[:ng], 1.0 / net.damping[ng:],
        1.0 / ctrl.cost, ctrl.cost, ctrl.comm_laplacian, net.load, ng,
    )
    halted = halt >= 0
    n_keep = (halt - 1) // stride + 1 if halted else sd.shape[0]
    ts = x0.t + np.arange(n_keep) * (stride * dt)
    dos_active = off[: nsteps + 1: stride][:n_keep].copy()
    W = z = None
    if equilibrium is not None:
        W, z = lyapunov_samples(
            net, ctrl, equilibrium, eps1, eps2, sd[:n_keep], so[:n_keep], sx[:n_keep]
        )
    traj = Trajectory(
        t=ts, delta=sd[:n_keep], omega=so[:n_keep], xi=sx[:n_keep],
        dos_active=dos_active, sample_dt=stride * dt, lyapunov=W, z_norm=z,
    )
    if halted:
        t_bad = x0.t + halt * dt
        raise SecurityRegionExit(
            f"angle difference left (-pi/2, pi/2) at t = {t_bad:.6f} s", t_bad, traj
        )
    return traj


def lyapunov_samples(
    net: PowerNetwork,
    ctrl: ControllerSetup,
    equilibrium: "Equilibrium",
    eps1: float,
    eps2: float,
    delta_s: np.ndarray,
    omega_s: np.ndarray,
    xi_s: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized Lyapunov value and full-state norm per sample row.

    Evaluated in a cancellation-free form (half-angle identities around
    the equilibrium angles) so that values tens of orders below W(0)
    remain meaningful. Accepts complex input for derivative checks.
    """
    B = net.incidence
    gamma = net.gamma
    q = ctrl.cost
    mdiag = net.inertia_full
    eta_bar = B.T @ equilibrium.delta_bar
    delta_s = np.atleast_2d(delta_s)
    omega_s = np.atleast_2d(omega_s)
    xi_s = np.atleast_2d(xi_s)
    eta = delta_s @ B
    e = eta - eta_bar
    # 1 - cos(e) and sin(e) - e, both stable near e = 0
    breg = (gamma * (np.cos(eta_bar) * (2.0 * np.sin(e / 2.0) ** 2)
                     + np.sin(eta_bar) * (np.sin(e) - e))).sum(axis=1)
    # grad U(delta) - grad U(delta_bar), written as a product of differences
    p = (gamma * (2.0 * np.cos((eta + eta_bar) / 2.0) * np.sin(e / 2.0))) @ B.T
    xd = xi_s - equilibrium.u_star
    mo = omega_s * mdiag
    W = (breg
         + 0.5 * (omega_s * mo).sum(axis=1)
         + 0.5 * (xd * (xd * q)).sum(axis=1)
         + eps1 * ((p * q) * mo).sum(axis=1)
         - eps2 * xd.sum(axis=1) * mo.sum(axis=1))
    dd = delta_s - equilibrium.delta_bar
    z = np.sqrt((dd * dd).sum(axis=1) + (omega_s * omega_s).sum(axis=1) + (xd * xd).sum(axis=1))
    return W, z
