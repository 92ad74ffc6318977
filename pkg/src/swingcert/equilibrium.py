"""Optimal dispatch, the synchronous equilibrium, and its security margin."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .network import ControllerSetup, PowerNetwork


class InfeasibleEquilibrium(RuntimeError):
    """No equilibrium inside the security region could be located."""


@dataclass(frozen=True)
class Equilibrium:
    """Synchronous equilibrium with optimal dispatch.

    ``rho`` is the security margin: half the smallest slack between the
    equilibrium angle differences and +-pi/2, so the equilibrium sits
    strictly inside the shrunk angle region used by all certificate
    minimizations.
    """

    delta_bar: np.ndarray  # (n,), zero-mean
    u_star: np.ndarray     # (n,)
    rho: float
    mu: float              # 1^T Q^-1 1
    residual: float        # steady-state equation residual norm

    def __post_init__(self) -> None:
        if self.rho <= 0:
            raise ValueError("security margin must be positive")


def optimal_dispatch(ctrl: ControllerSetup, load: np.ndarray) -> np.ndarray:
    """Minimizer of total quadratic cost subject to supply-demand balance.

    u* = Q^-1 1 (1^T P) / (1^T Q^-1 1): every unit runs at the same
    marginal cost q_i u*_i and 1^T(u* - P) = 0.
    """
    load = np.asarray(load, dtype=float)
    mu = float((1.0 / ctrl.cost).sum())
    return (1.0 / ctrl.cost) * (float(load.sum()) / mu)


def _ones_complement_basis(n: int) -> np.ndarray:
    """Orthonormal basis of 1-perp (Helmert columns)."""
    H = np.zeros((n, n - 1))
    for k in range(1, n):
        H[:k, k - 1] = 1.0
        H[k, k - 1] = -float(k)
        H[:, k - 1] /= np.sqrt(k * (k + 1.0))
    return H


def _newton(net: PowerNetwork, forcing: np.ndarray, x0: np.ndarray,
            tol: float = 1e-12, max_iter: int = 80) -> Optional[np.ndarray]:
    """Damped Newton for B Gamma sin(B^T delta) = forcing on 1-perp.

    Returns the zero-mean solution or None. Iterates are kept strictly
    inside |B^T delta| < pi/2, where the reduced Jacobian is positive
    definite and the solution branch is unique.
    """
    B, BT, gamma = net.incidence, net.incidence.T, net.gamma
    S = _ones_complement_basis(net.n)
    x = S.T @ x0

    def residual(x: np.ndarray) -> np.ndarray:
        return B @ (gamma * np.sin(BT @ (S @ x))) - forcing

    r = residual(x)
    fx = float(r @ r)
    for _ in range(max_iter):
        if np.sqrt(fx) <= tol:
            return S @ x
        eta = BT @ (S @ x)
        J = S.T @ ((B * (gamma * np.cos(eta))) @ BT) @ S
        try:
            step = np.linalg.solve(J, S.T @ r)
        except np.linalg.LinAlgError:
            step, *_ = np.linalg.lstsq(J, S.T @ r, rcond=None)
        t = 1.0
        while t >= 1e-8:
            x_new = x - t * step
            if np.all(np.abs(BT @ (S @ x_new)) < np.pi / 2):
                r_new = residual(x_new)
                f_new = float(r_new @ r_new)
                if f_new < fx:
                    x, r, fx = x_new, r_new, f_new
                    break
            t *= 0.5
        else:
            return None
    return S @ x if np.sqrt(fx) <= tol else None


def solve_equilibrium(
    net: PowerNetwork, ctrl: ControllerSetup, x0: Optional[np.ndarray] = None
) -> Equilibrium:
    """Solve the steady-state flow equation at the optimal dispatch.

    Newton starts from ``x0`` (default: the origin); if that fails, a
    homotopy ramps the load from zero to full in 10 steps, warm-starting
    each solve. Raises :class:`InfeasibleEquilibrium` when no solution
    with all angle differences strictly inside (-pi/2, pi/2) is found.
    """
    u_star = optimal_dispatch(ctrl, net.load)
    forcing = u_star - net.load
    start = project_start(net, x0)
    delta_bar = _newton(net, forcing, start)
    if delta_bar is None:
        delta_bar = start
        for s in np.linspace(0.1, 1.0, 10):
            delta_bar = _newton(net, s * forcing, delta_bar)
            if delta_bar is None:
                raise InfeasibleEquilibrium("infeasible: homotopy Newton failed")
    eta = net.incidence.T @ delta_bar
    if np.any(np.abs(eta) >= np.pi / 2):
        raise InfeasibleEquilibrium("infeasible: equilibrium on security boundary")
    resid = float(np.linalg.norm(net.incidence @ (net.gamma * np.sin(eta)) - forcing))
    return Equilibrium(
        delta_bar=delta_bar,
        u_star=u_star,
        rho=security_margin(net, delta_bar),
        mu=float((1.0 / ctrl.cost).sum()),
        residual=resid,
    )


def project_start(net: PowerNetwork, x0: Optional[np.ndarray]) -> np.ndarray:
    if x0 is None:
        return np.zeros(net.n)
    x0 = np.asarray(x0, dtype=float)
    return x0 - x0.mean()


def security_margin(net: PowerNetwork, delta_bar: np.ndarray) -> float:
    """Half the smallest slack min_k (pi/2 - |B^T delta_bar|_k).

    Halving keeps the equilibrium strictly interior to the angle box the
    certificates minimize over, with quantified room on every edge.
    """
    eta = net.incidence.T @ delta_bar
    slack = np.pi / 2 - np.abs(eta)
    if np.any(slack <= 0):
        raise ValueError("on boundary: some |B^T delta| reaches pi/2")
    return float(slack.min() / 2.0)
