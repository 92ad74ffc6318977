"""Denial-of-service schedules: budget model, validation, generation.

An attack is a set of disjoint outage intervals during which controller
communication is down. Admissible attacks satisfy the linear budget
total outage in [0, t) <= kappa + t / tau for all t, with kappa the
burst allowance and tau > 1 the long-run thinness of the attack.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

_BUDGET_SLACK = 1e-12


@dataclass(frozen=True)
class DoSSchedule:
    """Sorted disjoint outage intervals plus the (kappa, tau) budget.

    ``intervals`` holds (start, duration) pairs; consecutive intervals
    must be separated by a positive gap (touching intervals should be
    merged by the caller). The budget parameters describe the class the
    schedule claims membership of; use :func:`validate_schedule` to
    check the claim.
    """

    intervals: tuple[tuple[float, float], ...]
    kappa: float
    tau: float

    def __post_init__(self) -> None:
        if self.kappa < 0:
            raise ValueError("kappa must be nonnegative")
        if self.tau <= 1.0:
            raise ValueError("tau must exceed 1")
        norm = tuple((float(s), float(d)) for s, d in self.intervals)
        object.__setattr__(self, "intervals", norm)
        prev_end = -float("inf")
        for start, dur in norm:
            if start < 0:
                raise ValueError("interval starts before t = 0")
            if dur <= 0:
                raise ValueError("interval durations must be positive")
            if start <= prev_end:
                raise ValueError("intervals must be sorted and disjoint")
            prev_end = start + dur

    @property
    def total_outage(self) -> float:
        return float(sum(d for _, d in self.intervals))


def dos_measure(schedule: DoSSchedule | None, t: float) -> float:
    """Total outage time accumulated in [0, t). Piecewise linear in t."""
    if schedule is None:
        return 0.0
    acc = 0.0
    for start, dur in schedule.intervals:
        if t <= start:
            break
        acc += min(t, start + dur) - start
    return acc


def validate_schedule(schedule: DoSSchedule) -> tuple[bool, float | None]:
    """Check the budget constraint; return (ok, first violation time).

    The slack kappa + t/tau - outage(t) decreases only inside outages
    (slope 1/tau - 1 < 0) and its infimum over each outage is attained
    at the right endpoint, so only interval right endpoints need
    checking. The reported violation time is the right endpoint of the
    first interval whose end overdraws the budget.
    """
    acc = 0.0
    for start, dur in schedule.intervals:
        acc += dur
        end = start + dur
        if acc > schedule.kappa + end / schedule.tau + _BUDGET_SLACK:
            return False, end
    return True, None


def generate_schedule(
    kappa: float,
    tau: float,
    t_end: float,
    seed: int = 0,
    policy: str = "greedy",
    unit: float = 1.0,
) -> DoSSchedule:
    """Build an admissible schedule on [0, t_end).

    greedy: exhaust the budget. The burst allowance supports one initial
    outage of length kappa tau / (tau - 1) (budget tight at its end);
    afterwards each unit-length outage is placed at the earliest start
    that keeps the budget tight at the outage's right endpoint.

    random: seeded draws of gaps and durations, each duration clamped to
    what the budget permits, so the result is admissible by
    construction. Deterministic for a fixed seed.
    """
    if kappa < 0 or tau <= 1.0:
        raise ValueError("need kappa >= 0 and tau > 1")
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    if unit <= 0:
        raise ValueError("unit must be positive")
    intervals: list[tuple[float, float]] = []
    if policy == "greedy":
        t = 0.0
        acc = 0.0
        if kappa > 0:
            first = min(kappa * tau / (tau - 1.0), t_end)
            intervals.append((0.0, first))
            t = first
            acc = first
        while True:
            # earliest start keeping acc + unit <= kappa + (start + unit)/tau
            gap = max(0.0, tau * (acc + unit - kappa) - t - unit)
            start = t + gap
            if start >= t_end:
                break
            dur = min(unit, t_end - start)
            intervals.append((start, dur))
            t = start + dur
            acc += dur
    elif policy == "random":
        rng = np.random.default_rng(seed)
        t = 0.0
        acc = 0.0
        while t < t_end:
            start = t + float(rng.uniform(0.5 * unit, 3.0 * unit * tau))
            if start >= t_end:
                break
            want = float(rng.uniform(0.25 * unit, unit))
            # largest dur with acc + dur <= kappa + (start + dur)/tau
            cap = (kappa + start / tau - acc) / (1.0 - 1.0 / tau)
            dur = min(want, cap, t_end - start)
            if dur > 1e-9:
                intervals.append((start, dur))
                acc += dur
                t = start + dur
            else:
                t = start + unit
    else:
        raise ValueError(f"unknown policy: {policy!r}")
    return DoSSchedule(intervals=tuple(intervals), kappa=kappa, tau=tau)


def schedule_to_json(schedule: DoSSchedule, path: str | Path | None = None) -> str:
    """Serialize to the {kappa, tau, intervals: [[start, duration], ...]} form."""
    doc = {
        "kappa": schedule.kappa,
        "tau": schedule.tau,
        "intervals": [[s, d] for s, d in schedule.intervals],
    }
    text = json.dumps(doc, indent=2)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text


def schedule_from_json(source: str | Path) -> DoSSchedule:
    """Load a schedule from a JSON document, file path, or JSON text."""
    if isinstance(source, Path):
        text = source.read_text()
    else:
        text = str(source)
        p = Path(text)
        try:
            if p.exists():
                text = p.read_text()
        except OSError:
            pass
    doc = json.loads(text)
    try:
        intervals = tuple((float(s), float(d)) for s, d in doc["intervals"])
        return DoSSchedule(intervals=intervals, kappa=float(doc["kappa"]), tau=float(doc["tau"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed schedule document: {exc}") from exc
