"""End-to-end verification: run simulations, check every certificate
inequality along trajectories, and reproduce the four-bus case study.

Decay checks run in log space against a noise floor. A trajectory that
has contracted to the fixed point sits in a cloud of states whose W
values are set by rounding noise, not by the dynamics; consecutive-
sample ratios inside that cloud are meaningless. Samples are therefore
clamped from below at floor = c2 (256 eps_mach scale)^2 (the W-value
scale of a state perturbed by a few hundred ulps), and the certified
inequalities are required of the clamped sequence. The floor and the
number of clamped samples are part of every report.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .certificate import (
    Certificate,
    build_certificate,
    certificate_to_dict,
    reference_comparison,
)
from .dos import DoSSchedule, generate_schedule, schedule_to_json
from .dynamics import SystemState, Trajectory, simulate
from .equilibrium import Equilibrium, solve_equilibrium
from .network import ControllerSetup, PowerNetwork, build_network

_TOL = math.log1p(1e-6)
_FLOOR_ULPS = 256.0


@dataclass(frozen=True)
class CheckReport:
    name: str
    status: str  # "pass" | "fail" | "not applicable"
    first_violation: float | None = None
    detail: str = ""
    stats: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == "pass"


@dataclass(frozen=True)
class DecayReport:
    nominal: CheckReport
    dos: CheckReport
    envelope: CheckReport
    in_theta: bool
    noise_floor: float
    clamped: int

    @property
    def passed(self) -> bool:
        return self.nominal.passed and self.dos.passed and self.envelope.passed

    @property
    def checks(self) -> tuple[CheckReport, CheckReport, CheckReport]:
        return self.nominal, self.dos, self.envelope


def check_to_dict(report: CheckReport) -> dict:
    return {
        "name": report.name,
        "status": report.status,
        "first_violation": report.first_violation,
        "detail": report.detail,
        "stats": {k: (None if isinstance(v, float) and not math.isfinite(v) else v)
                  for k, v in report.stats.items()},
    }


def _outage_measure_at(schedule: DoSSchedule | None, ts: np.ndarray) -> np.ndarray:
    if schedule is None or not schedule.intervals:
        return np.zeros(len(ts))
    starts = np.array([s for s, _ in schedule.intervals])
    durs = np.array([d for _, d in schedule.intervals])
    return np.clip(ts[:, None] - starts[None, :], 0.0, durs[None, :]).sum(axis=1)


def _max_angle(net: PowerNetwork, traj: Trajectory) -> float:
    return float(np.abs(traj.delta @ net.incidence).max())


def _not_applicable(name: str, max_eta: float, limit: float) -> CheckReport:
    return CheckReport(
        name=name,
        status="not applicable",
        detail=(f"trajectory left the certified angle region: max |B^T delta| = "
                f"{max_eta:.6g} exceeds pi/2 - rho = {limit:.6g}"),
        stats={"max_eta": max_eta, "limit": limit},
    )


def check_decay(
    net: PowerNetwork,
    traj: Trajectory,
    cert: Certificate,
    schedule: DoSSchedule | None,
) -> DecayReport:
    """Verify the three certified decay inequalities along a trajectory.

    (i) over communication-on sampling intervals, W contracts at rate c;
    (ii) over outage intervals, W grows at most at rate d;
    (iii) every sample sits under the global switched envelope
    W(0) exp((c+d) kappa) exp(-(c - (c+d)/tau) t), with (kappa, tau)
    taken from the schedule (0 and no-constraint when there is none).
    All three run on the noise-floor-clamped sequence; the envelope's
    right side is itself floored so a fully contracted tail cannot fail
    on rounding noise. Tolerance multiplier (1 + 1e-6) throughout.

    A sampling interval counts as DoS time if the outage measure grows
    across it. If the trajectory leaves the certified angle region the
    checks do not apply and are reported distinctly.
    """
    if traj.lyapunov is None:
        raise ValueError("trajectory lacks Lyapunov annotation; simulate with an equilibrium")
    max_eta = _max_angle(net, traj)
    limit = math.pi / 2 - cert.rho
    if max_eta > limit:
        na = [_not_applicable(nm, max_eta, limit)
              for nm in ("nominal-rate", "dos-rate", "global-envelope")]
        return DecayReport(nominal=na[0], dos=na[1], envelope=na[2],
                           in_theta=False, noise_floor=float("nan"), clamped=0)

    ts = traj.t
    W = traj.lyapunov
    scale = max(1.0, float(np.abs(traj.delta).max()), float(np.abs(traj.xi).max()))
    floor = cert.c2 * (_FLOOR_ULPS * np.finfo(float).eps * scale) ** 2
    clamped = int((W < floor).sum())
    logw = np.log(np.maximum(W, floor))
    dt_k = np.diff(ts)
    dlog = np.diff(logw)
    meas = _outage_measure_at(schedule, ts)
    dos_interval = np.diff(meas) > 0.0

    def interval_check(name: str, mask: np.ndarray, rate_slope: float) -> CheckReport:
        if not mask.any():
            return CheckReport(name=name, status="pass",
                               detail="no intervals of this kind",
                               stats={"intervals": 0})
        bound = rate_slope * dt_k[mask] + _TOL
        excess = dlog[mask] - bound
        bad = excess > 0.0
        stats = {
            "intervals": int(mask.sum()),
            "violations": int(bad.sum()),
            "max_excess_log": float(excess.max()),
        }
        if bad.any():
            first = int(np.nonzero(mask)[0][np.nonzero(bad)[0][0]])
            return CheckReport(name=name, status="fail",
                               first_violation=float(ts[first + 1]),
                               detail=f"rate bound exceeded on {int(bad.sum())} interval(s)",
                               stats=stats)
        return CheckReport(name=name, status="pass", stats=stats)

    nominal = interval_check("nominal-rate", ~dos_interval, -cert.c)
    dos = interval_check("dos-rate", dos_interval, cert.d)

    if schedule is None:
        kappa_eff, inv_tau = 0.0, 0.0
    else:
        kappa_eff, inv_tau = schedule.kappa, 1.0 / schedule.tau
    env_log = logw[0] + (cert.c + cert.d) * kappa_eff - (cert.c - (cert.c + cert.d) * inv_tau) * ts
    rhs = np.maximum(env_log, math.log(floor)) + _TOL
    excess = logw - rhs
    bad = excess > 0.0
    stats = {
        "samples": int(len(ts)),
        "violations": int(bad.sum()),
        "max_excess_log": float(excess.max()),
        "min_slack_log": float((-excess).min()),
    }
    if bad.any():
        first = int(np.nonzero(bad)[0][0])
        envelope = CheckReport(name="global-envelope", status="fail",
                               first_violation=float(ts[first]),
                               detail=f"envelope exceeded at {int(bad.sum())} sample(s)",
                               stats=stats)
    else:
        envelope = CheckReport(name="global-envelope", status="pass", stats=stats)

    return DecayReport(nominal=nominal, dos=dos, envelope=envelope,
                       in_theta=True, noise_floor=float(floor), clamped=clamped)


def check_state_envelope(
    net: PowerNetwork,
    traj: Trajectory,
    cert: Certificate,
    regime: str = "nominal",
) -> CheckReport:
    """Verify ||z(t)|| <= alpha exp(-beta t) ||z(0)|| (1 + 1e-6).

    ``regime`` selects the pair: "nominal" for (alpha_nom, beta_nom),
    "dos" for (alpha_dos, beta_dos); the DoS alpha is handled in log
    space since it can exceed float range. Bounds with nonpositive beta
    are still checked as stated; they are simply loose, and the slack
    statistics record how loose.
    """
    if traj.z_norm is None:
        raise ValueError("trajectory lacks state-norm annotation; simulate with an equilibrium")
    if regime == "nominal":
        log_alpha, beta = math.log(cert.alpha_nom), cert.beta_nom
    elif regime == "dos":
        log_alpha, beta = cert.log_alpha_dos, cert.beta_dos
    else:
        raise ValueError(f"unknown regime: {regime!r}")
    max_eta = _max_angle(net, traj)
    limit = math.pi / 2 - cert.rho
    name = f"state-envelope-{regime}"
    if max_eta > limit:
        return _not_applicable(name, max_eta, limit)
    ts = traj.t
    z = traj.z_norm
    z0 = float(z[0])
    if z0 == 0.0:
        ok = bool(np.all(z == 0.0))
        return CheckReport(name=name, status="pass" if ok else "fail",
                           first_violation=None if ok else float(ts[int(np.argmax(z > 0))]),
                           detail="started at the fixed point",
                           stats={"z0": 0.0})
    with np.errstate(divide="ignore"):
        logz = np.log(z)
    rhs = log_alpha + math.log(z0) - beta * ts + _TOL
    excess = logz - rhs
    bad = excess > 0.0
    stats = {
        "samples": int(len(ts)),
        "violations": int(bad.sum()),
        "max_excess_log": float(excess.max()),
        "min_slack_log": float((-excess).min()),
        "log_alpha": float(log_alpha),
        "beta": float(beta),
    }
    if bad.any():
        first = int(np.nonzero(bad)[0][0])
        return CheckReport(name=name, status="fail", first_violation=float(ts[first]),
                           detail=f"state envelope exceeded at {int(bad.sum())} sample(s)",
                           stats=stats)
    return CheckReport(name=name, status="pass", stats=stats)


CASE_STUDY_CONFIG: dict[str, Any] = {
    "buses": [
        {"id": 1, "voltage": 0.98, "inertia": 3.26, "damping": 1.0},
        {"id": 2, "voltage": 0.97, "inertia": 3.26, "damping": 1.0},
        {"id": 3, "voltage": 0.96, "damping": 1.0},
        {"id": 4, "voltage": 1.04, "damping": 1.0},
    ],
    "generators": [1, 2],
    "lines": [
        {"from": 1, "to": 2, "susceptance": 25.6},
        {"from": 2, "to": 3, "susceptance": 33.1},
        {"from": 2, "to": 4, "susceptance": 21.0},
    ],
    "comm_edges": [[1, 4], [2, 3], [3, 4], [1, 3]],
    "costs": {"1": 1.0, "2": 0.75, "3": 1.5, "4": 0.5},
    "loads": {"1": 0.0, "2": 0.0, "3": 0.72, "4": 0.24},
}


def case_study_setup() -> tuple[PowerNetwork, ControllerSetup]:
    """Four-bus reference network: two generators, two loads, ring comm graph."""
    return build_network(CASE_STUDY_CONFIG)


def _flat_start(net: PowerNetwork) -> SystemState:
    return SystemState(delta=np.zeros(net.n), omega_g=np.zeros(net.n_gen),
                       xi=np.zeros(net.n), t=0.0)


def run_case_study(
    out_dir: str | Path,
    dt: float = 1e-3,
    t_end: float = 600.0,
    sample_dt: float = 0.05,
    kappa: float = 10.0,
    tau: float = 1.5,
) -> dict[str, Any]:
    """Reproduce the four-bus study end to end and emit artifacts.

    Loads step on at t = 0 from the unloaded steady state; a greedy
    budget-exhausting DoS schedule runs against the certificate built
    for the same (kappa, tau). Writes trajectory.csv, certificate.json
    (computed constants beside the published reference values),
    envelope.dat (state norm with both certified envelopes, gnuplot
    format) and report.json (pass/fail per check plus final-state
    metrics). Returns the in-memory objects keyed by name.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    net, ctrl = case_study_setup()
    eq = solve_equilibrium(net, ctrl)
    cert = build_certificate(net, ctrl, eq, kappa=kappa, tau=tau)
    schedule = generate_schedule(kappa, tau, t_end, policy="greedy")
    traj = simulate(net, ctrl, _flat_start(net), schedule, dt=dt, t_end=t_end,
                    sample_dt=sample_dt, equilibrium=eq,
                    eps1=cert.eps1, eps2=cert.eps2)

    decay = check_decay(net, traj, cert, schedule)
    envelope = check_state_envelope(net, traj, cert, regime="dos")
    checks = list(decay.checks) + [envelope]

    last = traj.state_at(len(traj.t) - 1, net.n_gen)
    final_omega = float(np.abs(traj.omega[-1]).max())
    final_xi_err = float(np.linalg.norm(last.xi - eq.u_star))

    traj.to_csv(out / "trajectory.csv")
    cert_doc = certificate_to_dict(cert, eq)
    cert_doc["reference_comparison"] = reference_comparison(net, ctrl, eq)
    (out / "certificate.json").write_text(json.dumps(cert_doc, indent=2) + "\n")
    _write_envelope_dat(out / "envelope.dat", traj, cert)
    schedule_to_json(schedule, out / "schedule.json")

    report = {
        "passed": bool(all(c.passed for c in checks)),
        "checks": [check_to_dict(c) for c in checks],
        "noise_floor": decay.noise_floor,
        "clamped_samples": decay.clamped,
        "final_state": {
            "t": float(traj.t[-1]),
            "max_abs_omega": final_omega,
            "xi_error_norm": final_xi_err,
        },
        "schedule": {
            "kappa": schedule.kappa,
            "tau": schedule.tau,
            "intervals": len(schedule.intervals),
            "total_outage": schedule.total_outage,
        },
        "settings": {"dt": dt, "t_end": t_end, "sample_dt": sample_dt},
    }
    (out / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    return {
        "net": net, "ctrl": ctrl, "eq": eq, "cert": cert,
        "schedule": schedule, "trajectory": traj,
        "decay": decay, "state_envelope": envelope,
        "report": report, "out_dir": out,
    }


def _write_envelope_dat(path: Path, traj: Trajectory, cert: Certificate) -> None:
    """State norm and certified envelopes, one sample per line.

    The DoS envelope's prefactor overflows floats, so its column is the
    base-10 logarithm of the bound; the nominal envelope is linear.
    """
    z0 = float(traj.z_norm[0])
    log_z0 = math.log(z0) if z0 > 0 else -math.inf
    log10 = math.log(10.0)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# state norm along the trajectory with certified envelopes\n")
        fh.write("# columns: t  z  env_nominal  log10_env_dos\n")
        fh.write(f"# alpha_nom={cert.alpha_nom:.6g} beta_nom={cert.beta_nom:.6g} "
                 f"log_alpha_dos={cert.log_alpha_dos:.6g} beta_dos={cert.beta_dos:.6g}\n")
        for t, z in zip(traj.t, traj.z_norm):
            env_nom = cert.alpha_nom * z0 * math.exp(-cert.beta_nom * t)
            log10_dos = (cert.log_alpha_dos + log_z0 - cert.beta_dos * t) / log10
            dos_col = f"{log10_dos:.12g}" if math.isfinite(log10_dos) else "nan"
            fh.write(f"{t:.12g} {z:.12g} {env_nom:.12g} {dos_col}\n")
