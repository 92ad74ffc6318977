"""Command-line entry point.

Subcommands: simulate, certify, verify, case-study. Exit codes: 0 on
success (all checks pass), 1 when a verification check fails, 2 on
input or setup errors. No subcommand modifies its input files.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .certificate import (
    CertificateError,
    build_certificate,
    certificate_to_dict,
    reference_comparison,
    select_epsilons,
)
from .dos import DoSSchedule, generate_schedule, schedule_from_json, schedule_to_json, validate_schedule
from .dynamics import SecurityRegionExit, SystemState, simulate
from .equilibrium import InfeasibleEquilibrium, solve_equilibrium
from .harness import (
    _write_envelope_dat,
    check_decay,
    check_state_envelope,
    check_to_dict,
    run_case_study,
)
from .network import ConfigError, build_network


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swingcert",
        description=("Simulate AC power networks under distributed averaging "
                     "frequency control and verify explicit exponential "
                     "convergence certificates, with or without "
                     "denial-of-service interruptions."),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_dos_flags(p: argparse.ArgumentParser) -> None:
        group = p.add_mutually_exclusive_group()
        group.add_argument("--dos", metavar="S", help="DoS schedule JSON file")
        group.add_argument("--dos-generate", metavar="K,T[,POLICY[,SEED]]",
                           help="generate a schedule: kappa,tau,policy,seed "
                                "(policy greedy|random, default greedy,0)")

    p_sim = sub.add_parser("simulate", help="integrate the closed loop from the unloaded "
                                            "flat start and write trajectory.csv")
    p_sim.add_argument("--config", required=True, metavar="F")
    add_dos_flags(p_sim)
    p_sim.add_argument("--dt", type=float, default=1e-3, metavar="D")
    p_sim.add_argument("--t-end", type=float, default=600.0, metavar="T")
    p_sim.add_argument("--sample-dt", type=float, default=0.05)
    p_sim.add_argument("--out", required=True, metavar="DIR")
    p_sim.set_defaults(func=_cmd_simulate)

    p_cert = sub.add_parser("certify", help="compute the convergence certificate "
                                            "and write it as JSON")
    p_cert.add_argument("--config", required=True, metavar="F")
    p_cert.add_argument("--kappa", type=float, default=0.0, metavar="K")
    p_cert.add_argument("--tau", type=float, default=2.0, metavar="T")
    p_cert.add_argument("--out", required=True, metavar="FILE")
    p_cert.set_defaults(func=_cmd_certify)

    p_ver = sub.add_parser("verify", help="simulate under a DoS schedule and check "
                                          "every certified inequality")
    p_ver.add_argument("--config", required=True, metavar="F")
    add_dos_flags(p_ver)
    p_ver.add_argument("--dt", type=float, default=1e-3, metavar="D")
    p_ver.add_argument("--t-end", type=float, default=600.0, metavar="T")
    p_ver.add_argument("--sample-dt", type=float, default=0.05)
    p_ver.add_argument("--out", required=True, metavar="DIR")
    p_ver.set_defaults(func=_cmd_verify)

    p_case = sub.add_parser("case-study", help="reproduce the four-bus study and "
                                               "emit all artifacts")
    p_case.add_argument("--out", required=True, metavar="DIR")
    p_case.add_argument("--t-end", type=float, default=600.0, metavar="T")
    p_case.set_defaults(func=_cmd_case_study)

    return parser


def _load_schedule(args: argparse.Namespace, t_end: float) -> DoSSchedule | None:
    if getattr(args, "dos", None):
        path = Path(args.dos)
        if not path.exists():
            raise ConfigError(f"schedule file not found: {path}")
        return schedule_from_json(path)
    raw = getattr(args, "dos_generate", None)
    if raw:
        parts = raw.split(",")
        if len(parts) < 2:
            raise ConfigError("--dos-generate needs at least kappa,tau")
        kappa, tau = float(parts[0]), float(parts[1])
        policy = parts[2] if len(parts) > 2 and parts[2] else "greedy"
        seed = int(parts[3]) if len(parts) > 3 else 0
        return generate_schedule(kappa, tau, t_end, seed=seed, policy=policy)
    return None


def _require_valid(schedule: DoSSchedule) -> None:
    ok, t_bad = validate_schedule(schedule)
    if not ok:
        raise ConfigError(f"schedule violates DoS budget at t={t_bad:g}")


def _flat_start(n: int, n_gen: int) -> SystemState:
    return SystemState(delta=np.zeros(n), omega_g=np.zeros(n_gen), xi=np.zeros(n), t=0.0)


def _print_checks(checks) -> bool:
    ok = True
    for c in checks:
        print(f"check {c.name}: {c.status}"
              + (f" (first violation at t={c.first_violation:g})"
                 if c.first_violation is not None else ""))
        ok = ok and c.passed
    return ok


def _cmd_simulate(args: argparse.Namespace) -> int:
    net, ctrl = build_network(args.config)
    schedule = _load_schedule(args, args.t_end)
    if schedule is not None:
        _require_valid(schedule)
    eq = e1 = e2 = None
    try:
        eq = solve_equilibrium(net, ctrl)
        e1, e2 = select_epsilons(net, ctrl, eq.rho)
    except (InfeasibleEquilibrium, CertificateError) as exc:
        print(f"note: trajectory not annotated with W ({exc})", file=sys.stderr)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        traj = simulate(net, ctrl, _flat_start(net.n, net.n_gen), schedule,
                        dt=args.dt, t_end=args.t_end, sample_dt=args.sample_dt,
                        equilibrium=eq, eps1=e1 or 0.0, eps2=e2 or 0.0)
    except SecurityRegionExit as exc:
        exc.partial.to_csv(out / "trajectory.csv")
        print(f"error: {exc}", file=sys.stderr)
        return 1
    traj.to_csv(out / "trajectory.csv")
    if schedule is not None:
        schedule_to_json(schedule, out / "schedule.json")
    print(f"wrote {out / 'trajectory.csv'} ({traj.n_samples} samples)")
    return 0


def _cmd_certify(args: argparse.Namespace) -> int:
    net, ctrl = build_network(args.config)
    eq = solve_equilibrium(net, ctrl)
    cert = build_certificate(net, ctrl, eq, kappa=args.kappa, tau=args.tau)
    doc = certificate_to_dict(cert, eq)
    doc["reference_comparison"] = reference_comparison(net, ctrl, eq)
    out = Path(args.out)
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(doc, indent=2) + "\n")
    print(f"certificate: c={cert.c:.6g} d={cert.d:.6g} "
          f"alpha_nom={cert.alpha_nom:.6g} beta_nom={cert.beta_nom:.6g} "
          f"dos_stable={cert.dos_stable}")
    print(f"wrote {out}")
    return 0


def _cmd_verify(args: argparse.Namespace) -> int:
    net, ctrl = build_network(args.config)
    schedule = _load_schedule(args, args.t_end)
    if schedule is None:
        raise ConfigError("verify needs --dos or --dos-generate")
    _require_valid(schedule)
    eq = solve_equilibrium(net, ctrl)
    cert = build_certificate(net, ctrl, eq, kappa=schedule.kappa, tau=schedule.tau)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        traj = simulate(net, ctrl, _flat_start(net.n, net.n_gen), schedule,
                        dt=args.dt, t_end=args.t_end, sample_dt=args.sample_dt,
                        equilibrium=eq, eps1=cert.eps1, eps2=cert.eps2)
    except SecurityRegionExit as exc:
        exc.partial.to_csv(out / "trajectory.csv")
        print(f"error: {exc}", file=sys.stderr)
        return 1
    decay = check_decay(net, traj, cert, schedule)
    regime = "dos" if schedule.intervals else "nominal"
    env = check_state_envelope(net, traj, cert, regime=regime)
    checks = list(decay.checks) + [env]

    traj.to_csv(out / "trajectory.csv")
    (out / "certificate.json").write_text(
        json.dumps(certificate_to_dict(cert, eq), indent=2) + "\n")
    _write_envelope_dat(out / "envelope.dat", traj, cert)
    report = {
        "passed": bool(all(c.passed for c in checks)),
        "checks": [check_to_dict(c) for c in checks],
        "noise_floor": decay.noise_floor,
        "clamped_samples": decay.clamped,
    }
    (out / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    ok = _print_checks(checks)
    print(f"wrote {out}")
    return 0 if ok else 1


def _cmd_case_study(args: argparse.Namespace) -> int:
    result = run_case_study(args.out, t_end=args.t_end)
    ok = _print_checks(list(result["decay"].checks) + [result["state_envelope"]])
    final = result["report"]["final_state"]
    print(f"final state: max|omega|={final['max_abs_omega']:.3g} "
          f"xi error={final['xi_error_norm']:.3g}")
    print(f"wrote {result['out_dir']}")
    return 0 if ok else 1


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.func(args)
    except (ConfigError, InfeasibleEquilibrium, CertificateError,
            ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    raise SystemExit(main(sys.argv[1:]))
