"""Nonatomic congestion on single-commodity networks with affine latencies.

Edge e carries latency a_e + b_e * flow (a, b >= 0). One origin, one
destination, positive scalar demand, paths enumerated by deterministic DFS
in edge-declaration order. Costs are minimized in this module; every result
record says so explicitly.

Equilibrium and optimum both come from the same pairwise flow-shift descent:
the equilibrium minimizes the potential sum_e (a_e f_e + b_e f_e^2 / 2), the
system optimum minimizes total cost, which equals the potential of the
network with slopes doubled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, ComputationError

MAX_PATHS = 32
GAP_TOL = 1e-9
USED_TOL = 1e-12
MAX_SHIFTS = 500_000


@dataclass(frozen=True)
class Edge:
    tail: str
    head: str
    a: float        # free-flow latency
    b: float        # latency slope per unit flow

    def __post_init__(self):
        if self.a < 0 or self.b < 0:
            raise ValueError(f"latency coefficients must be >= 0: {self}")


@dataclass(frozen=True)
class CongestionNetwork:
    edges: tuple
    origin: str
    destination: str
    demand: float

    def __post_init__(self):
        if self.demand <= 0:
            raise ValueError(f"demand must be positive, got {self.demand}")
        nodes = {self.origin, self.destination}
        for e in self.edges:
            nodes.add(e.tail)
            nodes.add(e.head)
        if self.origin == self.destination:
            raise ValueError("origin and destination must differ")

    @staticmethod
    def of(edges, origin, destination, demand) -> "CongestionNetwork":
        return CongestionNetwork(tuple(Edge(*e) if not isinstance(e, Edge) else e
                                       for e in edges),
                                 origin, destination, float(demand))

    def with_edge(self, edge: Edge) -> "CongestionNetwork":
        return CongestionNetwork(self.edges + (edge,), self.origin,
                                 self.destination, self.demand)


def enumerate_paths(network: CongestionNetwork):
    """Acyclic origin-destination paths as edge-index tuples, DFS order.

    Neighbors are explored in edge-declaration order; more than 32 paths is a
    capacity error, zero paths a ValueError.
    """
    by_tail = {}
    for idx, e in enumerate(network.edges):
        by_tail.setdefault(e.tail, []).append(idx)
    paths = []

    def walk(node, visited, trail):
        if node == network.destination:
            paths.append(tuple(trail))
            if len(paths) > MAX_PATHS:
                raise CapacityError(f"more than {MAX_PATHS} paths")
            return
        for idx in by_tail.get(node, ()):
            head = network.edges[idx].head
            if head in visited:
                continue
            visited.add(head)
            trail.append(idx)
            walk(head, visited, trail)
            trail.pop()
            visited.remove(head)

    walk(network.origin, {network.origin}, [])
    if not paths:
        raise ValueError("no origin-destination path exists")
    return tuple(paths)


@dataclass(frozen=True)
class FlowAssignment:
    convention: str          # always "minimize" here
    kind: str                # "equilibrium" | "system-optimum"
    paths: tuple             # edge-index tuples
    path_flows: np.ndarray
    edge_flows: np.ndarray
    path_latencies: np.ndarray   # actual latencies at these flows
    total_cost: float
    per_unit_cost: float
    gap: float               # first-order gap of the minimized objective


def _descend(paths, a_vec, b_vec, demand):
    """Minimize sum_e (a_e f_e + b_e f_e^2 / 2) over the path-flow simplex.

    Pairwise shifts from the costliest used path to the cheapest path with
    exact line search; terminates when the total gap is below 1e-9 and every
    used path is within 5e-8 of the cheapest.
    """
    n_paths = len(paths)
    n_edges = len(a_vec)
    inc = np.zeros((n_paths, n_edges))
    for p, path in enumerate(paths):
        for e in path:
            inc[p, e] += 1.0
    h = np.zeros(n_paths)
    h[0] = demand
    for it in range(MAX_SHIFTS):
        f = inc.T @ h
        lat = inc @ (a_vec + b_vec * f)
        p_min = int(np.argmin(lat))
        used = h > USED_TOL
        lat_used = np.where(used, lat, -np.inf)
        p_max = int(np.argmax(lat_used))
        gap = float(h @ lat - demand * lat[p_min])
        worst = float(lat[p_max] - lat[p_min])
        if gap < GAP_TOL and worst <= 5e-8:
            return h, f, lat, gap
        diff = inc[p_max] - inc[p_min]
        denom = float(b_vec @ (diff * diff))
        if denom > 0:
            t = min(h[p_max], worst / denom)
        else:
            t = h[p_max]
        if t <= 0:
            return h, f, lat, gap
        h[p_max] -= t
        h[p_min] += t
    raise ComputationError("flow-shift descent did not converge")


def _assignment(network, paths, h, kind):
    a_vec = np.asarray([e.a for e in network.edges])
    b_vec = np.asarray([e.b for e in network.edges])
    inc = np.zeros((len(paths), len(network.edges)))
    for p, path in enumerate(paths):
        for e in path:
            inc[p, e] += 1.0
    f = inc.T @ h
    lat = inc @ (a_vec + b_vec * f)
    total = float(f @ (a_vec + b_vec * f))
    used = h > USED_TOL
    gap = float(h @ lat - network.demand * lat.min())
    return FlowAssignment("minimize", kind, paths, h, f, lat, total,
                          total / network.demand, gap)


def wardrop_equilibrium(network: CongestionNetwork) -> FlowAssignment:
    """User equilibrium: every used path has minimal latency (within 1e-7)."""
    paths = enumerate_paths(network)
    a_vec = np.asarray([e.a for e in network.edges])
    b_vec = np.asarray([e.b for e in network.edges])
    h, _, _, _ = _descend(paths, a_vec, b_vec, network.demand)
    return _assignment(network, paths, h, "equilibrium")


def system_optimum(network: CongestionNetwork) -> FlowAssignment:
    """Total-cost minimizer; the descent runs on marginal costs a + 2 b f."""
    paths = enumerate_paths(network)
    a_vec = np.asarray([e.a for e in network.edges])
    b_vec = np.asarray([e.b for e in network.edges])
    h, _, _, _ = _descend(paths, a_vec, 2.0 * b_vec, network.demand)
    out = _assignment(network, paths, h, "system-optimum")
    return out


@dataclass(frozen=True)
class PoaReport:
    defined: bool
    ratio: float | None
    equilibrium_cost: float
    optimal_cost: float
    reason: str = ""


def price_of_anarchy(network: CongestionNetwork) -> PoaReport:
    eq = wardrop_equilibrium(network)
    so = system_optimum(network)
    if so.total_cost <= 1e-12:
        return PoaReport(False, None, eq.total_cost, so.total_cost,
                         "zero-cost optimum")
    ratio = eq.total_cost / so.total_cost
    if ratio < 1.0 - 1e-9:
        raise ComputationError(
            f"equilibrium cheaper than optimum ({ratio}); solver inconsistency")
    return PoaReport(True, ratio, eq.total_cost, so.total_cost)


@dataclass(frozen=True)
class BraessReport:
    base_per_unit_cost: float
    augmented_per_unit_cost: float
    delta: float                     # augmented - base; positive = paradox
    base: FlowAssignment
    augmented: FlowAssignment


def braess_delta(network: CongestionNetwork, extra: Edge) -> BraessReport:
    """Equilibrium cost change from adding one edge."""
    base = wardrop_equilibrium(network)
    augmented = wardrop_equilibrium(network.with_edge(extra))
    return BraessReport(base.per_unit_cost, augmented.per_unit_cost,
                        augmented.per_unit_cost - base.per_unit_cost,
                        base, augmented)


@dataclass(frozen=True)
class TollReport:
    tolls: np.ndarray                # per edge: b_e * optimal flow
    tolled_equilibrium: FlowAssignment
    system_optimum: FlowAssignment
    max_edge_flow_gap: float         # tolled equilibrium vs optimum flows
    latency_cost: float              # tolled flows priced at latency only
    latency_per_unit_cost: float


def marginal_cost_tolls(network: CongestionNetwork) -> TollReport:
    """Tolls b_e * f_e* that make the system optimum an equilibrium.

    The tolled network adds each toll to the edge's free-flow latency; the
    report carries the largest edge-flow deviation of the tolled equilibrium
    from the system optimum, and the tolled flows re-priced at latency alone
    (tolls are transfers, not travel time).
    """
    so = system_optimum(network)
    tolls = np.asarray([e.b for e in network.edges]) * so.edge_flows
    tolled = CongestionNetwork(
        tuple(Edge(e.tail, e.head, e.a + tolls[i], e.b)
              for i, e in enumerate(network.edges)),
        network.origin, network.destination, network.demand)
    eq = wardrop_equilibrium(tolled)
    gap = float(np.max(np.abs(eq.edge_flows - so.edge_flows)))
    a_vec = np.asarray([e.a for e in network.edges])
    b_vec = np.asarray([e.b for e in network.edges])
    latency_cost = float(eq.edge_flows @ (a_vec + b_vec * eq.edge_flows))
    return TollReport(tolls, eq, so, gap, latency_cost,
                      latency_cost / network.demand)
