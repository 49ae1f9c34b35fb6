"""Problem instances: sites with opening costs, clients with integer demands,
and an exact rational site-by-client distance matrix.

Distances must satisfy the bipartite four-point inequality
``d[i][j] <= d[i][j'] + d[i'][j'] + d[i'][j]``, which is the form of the
triangle inequality the rounding analysis consumes.  Everything is stored
as :class:`fractions.Fraction`; downstream stages certify exact equalities
that floating point could not.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from math import isqrt

from .rationals import format_rational, parse_rational
from .rng import SplitMix64

ValidationReport = list[str]


@dataclass(frozen=True)
class Site:
    """A location where facilities can be built, at cost ``open_cost`` each.

    ``parent`` is set on sites created by the completeness transform and
    points at the site they were split from; ``None`` marks an original site.
    """

    id: int
    open_cost: Fraction
    parent: int | None = None


@dataclass(frozen=True)
class Client:
    id: int
    demand: int


@dataclass(frozen=True)
class FtfpInstance:
    """Immutable problem instance.

    ``dist[i][j]`` is the connection cost between site ``i`` and client
    ``j``.  Instances are safe to share across threads.
    """

    sites: tuple[Site, ...]
    clients: tuple[Client, ...]
    dist: tuple[tuple[Fraction, ...], ...]

    @property
    def num_sites(self) -> int:
        return len(self.sites)

    @property
    def num_clients(self) -> int:
        return len(self.clients)

    @property
    def max_demand(self) -> int:
        return max((c.demand for c in self.clients), default=0)

    def open_cost(self, site: int) -> Fraction:
        return self.sites[site].open_cost

    def demand(self, client: int) -> int:
        return self.clients[client].demand

    def root_site(self, site: int) -> int:
        """Follow split lineage back to the original site."""
        while self.sites[site].parent is not None:
            site = self.sites[site].parent
        return site


def make_instance(
    open_costs: list[Fraction | int | str],
    demands: list[int],
    dist: list[list[Fraction | int | str]],
    parents: list[int | None] | None = None,
) -> FtfpInstance:
    """Build an instance from plain lists, normalizing values to Fraction."""
    if parents is None:
        parents = [None] * len(open_costs)
    sites = tuple(
        Site(i, Fraction(f), parent) for i, (f, parent) in enumerate(zip(open_costs, parents))
    )
    clients = tuple(Client(j, int(r)) for j, r in enumerate(demands))
    matrix = tuple(tuple(Fraction(v) for v in row) for row in dist)
    return FtfpInstance(sites, clients, matrix)


def validate(instance: FtfpInstance) -> ValidationReport:
    """Check all instance invariants; returns a list of violations (empty = valid).

    The metric check evaluates every four-point inequality exhaustively,
    which is O(|F|^2 |C|^2) and fine at the instance sizes this package
    targets.
    """
    report: list[str] = []
    n, m = instance.num_sites, instance.num_clients

    for i, site in enumerate(instance.sites):
        if site.id != i:
            report.append(f"site at position {i} has id {site.id}, expected {i}")
        if site.open_cost < 0:
            report.append(f"site {i} has negative open cost {site.open_cost}")
        if site.parent is not None and not (0 <= site.parent < n):
            report.append(f"site {i} has parent {site.parent} out of range")
    for j, client in enumerate(instance.clients):
        if client.id != j:
            report.append(f"client at position {j} has id {client.id}, expected {j}")
        if client.demand < 1:
            report.append(f"client {j}: demand must be positive, got {client.demand}")

    if len(instance.dist) != n:
        report.append(f"distance matrix has {len(instance.dist)} rows, expected {n}")
        return report
    for i, row in enumerate(instance.dist):
        if len(row) != m:
            report.append(f"distance row {i} has {len(row)} entries, expected {m}")
            return report
        for j, d in enumerate(row):
            if d < 0:
                report.append(f"distance d[{i}][{j}] = {d} is negative")

    dist = instance.dist
    for i in range(n):
        for i2 in range(n):
            if i2 == i:
                continue
            for j in range(m):
                base = dist[i][j]
                row_i, row_i2 = dist[i], dist[i2]
                d_i2j = row_i2[j]
                for j2 in range(m):
                    if j2 == j:
                        continue
                    if base > row_i[j2] + row_i2[j2] + d_i2j:
                        report.append(
                            f"four-point inequality fails at sites ({i},{i2}) "
                            f"clients ({j},{j2}): {base} > "
                            f"{row_i[j2]} + {row_i2[j2]} + {d_i2j}"
                        )
    return report


def _rounded_sqrt_millionths(squared: int) -> Fraction:
    # round(sqrt(squared) * 10**6) computed exactly: round(sqrt(m)) = (isqrt(4m)+1)//2
    scaled = squared * 10**12
    return Fraction((isqrt(4 * scaled) + 1) // 2, 10**6)


def generate_euclidean(
    num_sites: int, num_clients: int, r_max: int, seed: int
) -> FtfpInstance:
    """Random instance on a 101x101 integer grid; deterministic in ``seed``.

    Distances are Euclidean lengths rounded to six decimal digits, stored
    exactly.  Rounding can in principle nick a tight four-point
    inequality, so the result is re-validated and regenerated from the
    same stream on the rare failure.
    """
    if num_sites < 1 or num_clients < 1:
        raise ValueError("need at least one site and one client")
    if r_max < 1:
        raise ValueError("r_max must be at least 1")
    rng = SplitMix64(seed)
    while True:
        site_pts = [(rng.next_u64() % 101, rng.next_u64() % 101) for _ in range(num_sites)]
        client_pts = [(rng.next_u64() % 101, rng.next_u64() % 101) for _ in range(num_clients)]
        open_costs = [Fraction(1 + rng.next_u64() % 100) for _ in range(num_sites)]
        demands = [1 + rng.next_u64() % r_max for _ in range(num_clients)]
        dist = [
            [
                _rounded_sqrt_millionths((sx - cx) ** 2 + (sy - cy) ** 2)
                for (cx, cy) in client_pts
            ]
            for (sx, sy) in site_pts
        ]
        instance = make_instance(open_costs, demands, dist)
        if not validate(instance):
            return instance


class InstanceFormatError(ValueError):
    """Raised when an instance file cannot be parsed or violates invariants."""


def to_json_dict(instance: FtfpInstance) -> dict:
    sites = []
    for site in instance.sites:
        entry: dict = {"id": site.id, "open_cost": format_rational(site.open_cost)}
        if site.parent is not None:
            entry["parent"] = site.parent
        sites.append(entry)
    return {
        "sites": sites,
        "clients": [{"id": c.id, "demand": c.demand} for c in instance.clients],
        "distances": [[format_rational(d) for d in row] for row in instance.dist],
    }


def from_json_dict(data: dict) -> FtfpInstance:
    try:
        open_costs = [parse_rational(s["open_cost"]) for s in data["sites"]]
        parents = [s.get("parent") for s in data["sites"]]
        demands = [int(c["demand"]) for c in data["clients"]]
        dist = [[parse_rational(v) for v in row] for row in data["distances"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceFormatError(f"malformed instance file: {exc}") from exc
    instance = make_instance(open_costs, demands, dist, parents)
    report = validate(instance)
    if report:
        raise InstanceFormatError("invalid instance: " + "; ".join(report))
    return instance


def save(instance: FtfpInstance, path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(to_json_dict(instance), handle, indent=2, sort_keys=True)
        handle.write("\n")


def load(path: str) -> FtfpInstance:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    return from_json_dict(data)
