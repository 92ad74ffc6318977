"""Physical network and controller communication graph.

Buses are partitioned into generators (rotating inertia) and loads
(zero inertia, frequency-dependent). The electrical topology is held as
a signed incidence matrix with per-edge coupling weights
gamma_k = B_ij * V_i * V_j; the controller layer is a separate
unit-weight communication graph over the same buses.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np


class ConfigError(ValueError):
    """Raised for malformed or physically invalid configuration input."""


@dataclass(frozen=True)
class PowerNetwork:
    """Validated structure-preserving network model.

    Buses are internally reindexed so generators come first; ``bus_ids``
    maps internal index back to the configured identifier.
    """

    n: int
    n_gen: int
    bus_ids: tuple[str, ...]
    edges: tuple[tuple[int, int], ...]
    incidence: np.ndarray        # (n, m), columns sum to zero
    gamma: np.ndarray            # (m,), strictly positive
    inertia: np.ndarray          # (n_gen,), strictly positive
    damping: np.ndarray          # (n,), strictly positive
    load: np.ndarray             # (n,), injections (+demand)

    def __post_init__(self) -> None:
        if self.incidence.shape != (self.n, len(self.edges)):
            raise ConfigError("incidence shape mismatch")
        if np.any(self.gamma <= 0):
            raise ConfigError("non-positive edge weight")
        if np.any(self.inertia <= 0):
            raise ConfigError("non-positive inertia")
        if np.any(self.damping <= 0):
            raise ConfigError("non-positive damping")
        if np.linalg.matrix_rank(self.incidence) != self.n - 1:
            raise ConfigError("physical graph disconnected")

    @property
    def n_load(self) -> int:
        return self.n - self.n_gen

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def inertia_full(self) -> np.ndarray:
        """Inertia extended by zeros on load buses (the matrix M diagonal)."""
        out = np.zeros(self.n)
        out[: self.n_gen] = self.inertia
        return out


@dataclass(frozen=True)
class ControllerSetup:
    """Marginal costs Q = diag(cost) and the communication Laplacian."""

    cost: np.ndarray             # (n,), strictly positive
    comm_edges: tuple[tuple[int, int], ...]
    comm_laplacian: np.ndarray = field(repr=False, default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if np.any(self.cost <= 0):
            raise ConfigError("non-positive cost coefficient")
        n = len(self.cost)
        if self.comm_laplacian is None:
            inc = _edge_incidence(n, self.comm_edges)
            object.__setattr__(self, "comm_laplacian", inc @ inc.T)
        ev = np.linalg.eigvalsh(self.comm_laplacian)
        if ev[1] <= 1e-12:
            raise ConfigError("communication graph disconnected")


def _edge_incidence(n: int, edges: Sequence[tuple[int, int]]) -> np.ndarray:
    inc = np.zeros((n, len(edges)))
    for k, (i, j) in enumerate(edges):
        inc[i, k] = 1.0
        inc[j, k] = -1.0
    return inc


def weighted_laplacian(incidence: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Return B diag(weights) B^T for an incidence matrix B.

    Symmetric, PSD for nonnegative weights, rows summing to zero.
    """
    incidence = np.asarray(incidence, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if incidence.ndim != 2 or weights.shape != (incidence.shape[1],):
        raise ValueError("dimension mismatch between incidence and weights")
    if np.any(weights < 0):
        raise ValueError("weights must be nonnegative")
    return (incidence * weights) @ incidence.T


def build_network(config: Mapping[str, Any] | str | Path) -> tuple[PowerNetwork, ControllerSetup]:
    """Construct a validated (PowerNetwork, ControllerSetup) pair.

    ``config`` is a JSON-compatible mapping (or a path to a JSON file)
    with keys:

    - ``buses``: list of {id, voltage, damping, inertia?} entries
    - ``generators``: list of bus ids with rotating inertia
    - ``lines``: list of {from, to, susceptance}; entries with
      ``from == to`` are self terms and do not enter the lossless model
    - ``comm_edges``: list of [id, id] communication pairs
    - ``costs``: mapping id -> marginal cost coefficient
    - ``loads``: mapping id -> constant power demand (may be sparse)

    Buses may appear in any order; generators are reindexed first.
    """
    if isinstance(config, (str, Path)):
        with open(config, "r", encoding="utf-8") as fh:
            config = json.load(fh)
    for key in ("buses", "generators", "lines", "comm_edges", "costs"):
        if key not in config:
            raise ConfigError(f"config missing key {key!r}")

    buses = list(config["buses"])
    ids = [str(b["id"]) for b in buses]
    if len(set(ids)) != len(ids):
        raise ConfigError("duplicate bus id")
    gen_ids = [str(g) for g in config["generators"]]
    for g in gen_ids:
        if g not in ids:
            raise ConfigError(f"unknown generator id {g!r}")
    # generators first, each class keeping configured order
    order = [i for i in ids if i in gen_ids] + [i for i in ids if i not in gen_ids]
    index = {bid: k for k, bid in enumerate(order)}
    by_id = {str(b["id"]): b for b in buses}

    n = len(order)
    n_gen = len(gen_ids)
    try:
        voltage = np.array([float(by_id[b]["voltage"]) for b in order])
        damping = np.array([float(by_id[b]["damping"]) for b in order])
        inertia = np.array([float(by_id[b]["inertia"]) for b in order[:n_gen]])
    except KeyError as exc:
        raise ConfigError(f"bus entry missing field {exc.args[0]!r}") from exc

    loads_cfg = {str(k): float(v) for k, v in dict(config.get("loads", {})).items()}
    load = np.array([loads_cfg.get(b, 0.0) for b in order])
    costs_cfg = {str(k): float(v) for k, v in dict(config["costs"]).items()}
    missing = [b for b in order if b not in costs_cfg]
    if missing:
        raise ConfigError(f"missing cost for bus {missing[0]!r}")
    cost = np.array([costs_cfg[b] for b in order])

    edges: list[tuple[int, int]] = []
    gamma: list[float] = []
    seen: set[frozenset[int]] = set()
    for line in config["lines"]:
        a, b = str(line["from"]), str(line["to"])
        if a not in index or b not in index:
            raise ConfigError(f"line references unknown bus {a!r} or {b!r}")
        if a == b:
            continue  # self-susceptance, absent from the lossless flow model
        i, j = index[a], index[b]
        key = frozenset((i, j))
        if key in seen:
            raise ConfigError(f"duplicate line {a}-{b}")
        seen.add(key)
        edges.append((i, j))
        gamma.append(float(line["susceptance"]) * voltage[i] * voltage[j])

    comm_edges: list[tuple[int, int]] = []
    seen_c: set[frozenset[int]] = set()
    for pair in config["comm_edges"]:
        a, b = str(pair[0]), str(pair[1])
        if a not in index or b not in index:
            raise ConfigError(f"comm edge references unknown bus {a!r} or {b!r}")
        i, j = index[a], index[b]
        key = frozenset((i, j))
        if key in seen_c:
            raise ConfigError(f"duplicate comm edge {a}-{b}")
        seen_c.add(key)
        comm_edges.append((i, j))

    net = PowerNetwork(
        n=n,
        n_gen=n_gen,
        bus_ids=tuple(order),
        edges=tuple(edges),
        incidence=_edge_incidence(n, edges),
        gamma=np.array(gamma),
        inertia=inertia,
        damping=damping,
        load=load,
    )
    ctrl = ControllerSetup(cost=cost, comm_edges=tuple(comm_edges))
    return net, ctrl
