"""Adaptive partitioning: split clients into unit demands and sites into
facilities, carving the fractional solution up with them.

The construction is iterative.  Each round scores every unexhausted
client by the cost of its nearest chunk of connection mass plus a
client-specific offset, creates one new unit demand for the cheapest
client, and either starts a new cluster around it (making it a *primary*
demand) or attaches it to an existing cluster whose facilities it shares.
A second phase tops every demand up to one unit of connection value.

The output satisfies a family of exact invariants (see
``verify_properties``): the demand values partition the input solution,
every connection is all-or-nothing, primary neighborhoods are disjoint,
every demand overlaps its primary's neighborhood and is no cheaper, and
demands of the same client never share facilities, directly or through
their primaries.  Those invariants are what make the randomized rounding
stages feasible and costed.

All ties (client selection, distance ordering, primary choice, leftover
choice) resolve to the lowest creation index, so runs are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from .instance import FtfpInstance
from .lp import DualSolution, FractionalSolution, completeness_violations

Report = list[str]

ONE = Fraction(1)


@dataclass(frozen=True)
class Facility:
    id: int
    site: int
    ybar: Fraction


@dataclass(frozen=True)
class Demand:
    id: int
    client: int


@dataclass(frozen=True)
class Snapshot:
    """State copy taken after a construction step, for invariant tests."""

    phase: int
    step: int
    fac_site: tuple[int, ...]
    ybar: tuple[Fraction, ...]
    xbar: dict[tuple[int, int], Fraction]      # (facility, demand) -> value
    leftover: dict[tuple[int, int], Fraction]  # (facility, client) -> value
    demand_client: tuple[int, ...]


@dataclass(frozen=True)
class PartitionedSolution:
    """Facilities, unit demands, and the partitioned fractional values."""

    instance: FtfpInstance
    primal: FractionalSolution
    facilities: tuple[Facility, ...]
    demands: tuple[Demand, ...]
    xbar: dict[tuple[int, int], Fraction]   # (facility, demand) -> value
    primaries: tuple[int, ...]
    assigned: tuple[int, ...]               # demand -> its primary demand
    alpha_of_demand: tuple[Fraction, ...]
    phase1_members: tuple[frozenset[int], ...]  # facilities acquired in phase 1

    def neighborhood(self, demand: int) -> list[int]:
        return [f.id for f in self.facilities if (f.id, demand) in self.xbar]

    def distance(self, facility: int, demand: int) -> Fraction:
        return self.instance.dist[self.facilities[facility].site][
            self.demands[demand].client
        ]

    def avg_conn_cost(self, demand: int) -> Fraction:
        """Connection cost of the demand averaged by its fractional values."""
        total = Fraction(0)
        for fac in self.neighborhood(demand):
            total += self.distance(fac, demand) * self.xbar[(fac, demand)]
        return total


class PartitionState:
    """Mutable construction state; drives both partitioning variants.

    ``chunk_mass`` is the connection mass a nearest chunk must reach: one
    unit for the plain partition, 1/gamma for the close/far variant.
    """

    def __init__(
        self,
        instance: FtfpInstance,
        primal: FractionalSolution,
        dual: DualSolution,
        chunk_mass: Fraction = ONE,
    ):
        violations = completeness_violations(primal)
        if violations:
            raise ValueError("input solution is not complete: " + violations[0])
        if not (0 < chunk_mass <= 1):
            raise ValueError("chunk mass must be in (0, 1]")
        self.instance = instance
        self.primal = primal
        self.alpha = dual.alpha
        self.chunk_mass = chunk_mass

        self.fac_site: list[int] = []
        self.ybar: list[Fraction] = []
        self.xbar: list[dict[int, Fraction]] = []      # facility -> {demand: value}
        self.leftover: list[dict[int, Fraction]] = []  # facility -> {client: value}
        self.client_support: list[set[int]] = [set() for _ in instance.clients]

        self.demand_client: list[int] = []
        self.demand_total: list[Fraction] = []
        self.nbr: list[set[int]] = []
        self.primaries: list[int] = []
        self.assigned: list[int] = []
        self.phase1_members: list[set[int]] = []

        for i in range(instance.num_sites):
            if primal.y[i] == 0:
                continue
            fac = self._new_facility(i, primal.y[i])
            for j in range(instance.num_clients):
                if primal.x[i][j]:
                    self.leftover[fac][j] = primal.x[i][j]
                    self.client_support[j].add(fac)

    # -- facilities ----------------------------------------------------

    def _new_facility(self, site: int, ybar: Fraction) -> int:
        fac = len(self.ybar)
        self.fac_site.append(site)
        self.ybar.append(ybar)
        self.xbar.append({})
        self.leftover.append({})
        return fac

    def dist_to_client(self, fac: int, client: int) -> Fraction:
        return self.instance.dist[self.fac_site[fac]][client]

    def split(self, fac: int, keep: Fraction) -> int:
        """Split ``fac`` so it retains ``keep`` of its opening value; the
        remainder moves to a new facility that inherits every positive
        connection row.  Callers must have 0 < keep < ybar."""
        rest = self.ybar[fac] - keep
        assert 0 < keep and 0 < rest, "split would create an empty facility"
        new = self._new_facility(self.fac_site[fac], rest)
        self.ybar[fac] = keep
        for dem in list(self.xbar[fac]):
            self.xbar[fac][dem] = keep
            self.xbar[new][dem] = rest
            self.nbr[dem].add(new)
            if fac in self.phase1_members[dem]:
                self.phase1_members[dem].add(new)
        for client in list(self.leftover[fac]):
            self.leftover[fac][client] = keep
            self.leftover[new][client] = rest
            self.client_support[client].add(new)
        return new

    # -- demands -------------------------------------------------------

    def _new_demand(self, client: int) -> int:
        dem = len(self.demand_client)
        self.demand_client.append(client)
        self.demand_total.append(Fraction(0))
        self.nbr.append(set())
        self.assigned.append(-1)
        self.phase1_members.append(set())
        return dem

    def _move(self, fac: int, demand: int, client: int) -> None:
        value = self.leftover[fac].pop(client)
        self.client_support[client].discard(fac)
        self.xbar[fac][demand] = value
        self.nbr[demand].add(fac)
        self.demand_total[demand] += value

    # -- the two mutating helpers ---------------------------------------

    def nearest_unit_chunk(self, client: int) -> list[int]:
        """Nearest facilities of the client holding exactly ``chunk_mass``
        of leftover connection value; splits at most one facility to land
        on the mass exactly.  Distance ties favor lower facility ids."""
        order = sorted(
            self.client_support[client],
            key=lambda f: (self.dist_to_client(f, client), f),
        )
        chunk: list[int] = []
        cum = Fraction(0)
        for fac in order:
            value = self.leftover[fac][client]
            if cum + value < self.chunk_mass:
                chunk.append(fac)
                cum += value
                continue
            if cum + value > self.chunk_mass:
                self.split(fac, self.chunk_mass - cum)
            chunk.append(fac)
            return chunk
        raise AssertionError(
            f"client {client} retains {cum} < {self.chunk_mass} of connection value"
        )

    def chunk_score(self, client: int) -> tuple[list[int], Fraction, Fraction]:
        """Chunk plus its mass-weighted distance sum and maximum distance."""
        chunk = self.nearest_unit_chunk(client)
        weighted = Fraction(0)
        dmax = Fraction(0)
        for fac in chunk:
            d = self.dist_to_client(fac, client)
            weighted += d * self.leftover[fac][client]
            if d > dmax:
                dmax = d
        return chunk, weighted, dmax

    def augment_to_unit(self, demand: int, client: int) -> None:
        """Raise the demand's total connection value to one unit using the
        client's leftover values, splitting at most once at the end."""
        while self.demand_total[demand] < 1:
            support = self.client_support[client]
            if not support:
                raise AssertionError(
                    f"client {client} has no leftover value to augment demand {demand}"
                )
            fac = min(support)
            need = ONE - self.demand_total[demand]
            if need >= self.leftover[fac][client]:
                self._move(fac, demand, client)
            else:
                new = self.split(fac, self.ybar[fac] - need)
                self.leftover[new].pop(client)
                self.client_support[client].discard(new)
                self.xbar[new][demand] = need
                self.nbr[demand].add(new)
                self.demand_total[demand] += need

    # -- snapshots -------------------------------------------------------

    def snapshot(self, phase: int, step: int) -> Snapshot:
        xbar = {
            (fac, dem): v
            for fac, row in enumerate(self.xbar)
            for dem, v in row.items()
        }
        leftover = {
            (fac, client): v
            for fac, row in enumerate(self.leftover)
            for client, v in row.items()
        }
        return Snapshot(
            phase=phase,
            step=step,
            fac_site=tuple(self.fac_site),
            ybar=tuple(self.ybar),
            xbar=xbar,
            leftover=leftover,
            demand_client=tuple(self.demand_client),
        )

    # -- result ----------------------------------------------------------

    def finish(self) -> PartitionedSolution:
        xbar = {
            (fac, dem): v
            for fac, row in enumerate(self.xbar)
            for dem, v in row.items()
        }
        return PartitionedSolution(
            instance=self.instance,
            primal=self.primal,
            facilities=tuple(
                Facility(f, self.fac_site[f], self.ybar[f])
                for f in range(len(self.ybar))
            ),
            demands=tuple(
                Demand(d, self.demand_client[d])
                for d in range(len(self.demand_client))
            ),
            xbar=xbar,
            primaries=tuple(self.primaries),
            assigned=tuple(self.assigned),
            alpha_of_demand=tuple(
                self.alpha[self.demand_client[d]]
                for d in range(len(self.demand_client))
            ),
            phase1_members=tuple(frozenset(s) for s in self.phase1_members),
        )


def nearest_unit_chunk(client: int, state: PartitionState) -> list[int]:
    return state.nearest_unit_chunk(client)


def augment_to_unit(demand: int, client: int, state: PartitionState) -> None:
    state.augment_to_unit(demand, client)


def tcc(client: int, state: PartitionState) -> Fraction:
    """Tentative connection cost: average distance of the client's nearest
    unit of leftover connection value (normalized by the chunk mass)."""
    _, weighted, _ = state.chunk_score(client)
    return weighted / state.chunk_mass


def run_phases(
    state: PartitionState,
    selection_key: Callable[[int, Fraction, Fraction], Fraction],
    observer: Callable[[Snapshot], None] | None = None,
) -> None:
    """Drive both construction phases on a fresh state.

    ``selection_key(client, weighted, dmax)`` ranks unexhausted clients
    given their chunk's weighted distance sum and maximum distance; the
    minimum (ties to the lowest client id) is split off next.
    """
    instance = state.instance
    remaining = [c.demand for c in instance.clients]
    active = [j for j in range(instance.num_clients) if remaining[j] > 0]
    step = 0
    while active:
        best_client = -1
        best_key = None
        for j in active:
            _, weighted, dmax = state.chunk_score(j)
            key = selection_key(j, weighted, dmax)
            if best_key is None or key < best_key:
                best_key = key
                best_client = j
        p = best_client
        # Recompute at use: chunk calls for other clients may have split a
        # boundary facility meanwhile; the refreshed prefix again holds
        # exactly chunk_mass and costs the same.
        chunk = state.nearest_unit_chunk(p)
        dem = state._new_demand(p)
        owner = -1
        for kappa in state.primaries:
            if any(fac in state.nbr[kappa] for fac in chunk):
                owner = kappa
                break
        if owner >= 0:
            state.assigned[dem] = owner
            # The overlap test looked at the chunk, but the whole
            # intersection with the client's leftover support moves over.
            moved = sorted(state.client_support[p] & state.nbr[owner])
            for fac in moved:
                state._move(fac, dem, p)
        else:
            state.primaries.append(dem)
            state.assigned[dem] = dem
            for fac in chunk:
                state._move(fac, dem, p)
        state.phase1_members[dem] = set(state.nbr[dem])
        remaining[p] -= 1
        if remaining[p] == 0:
            active.remove(p)
        step += 1
        if observer is not None:
            observer(state.snapshot(1, step))

    for j in range(instance.num_clients):
        for dem in range(len(state.demand_client)):
            if state.demand_client[dem] == j and state.demand_total[dem] < 1:
                state.augment_to_unit(dem, j)
    if observer is not None:
        observer(state.snapshot(2, step + 1))


def partition(
    instance: FtfpInstance,
    complete_primal: FractionalSolution,
    dual: DualSolution,
    observer: Callable[[Snapshot], None] | None = None,
) -> PartitionedSolution:
    """Partition a complete optimal solution into unit demands.

    Client selection minimizes tentative connection cost plus the client's
    dual value.  Pass an ``observer`` to receive a snapshot after every
    phase-1 step (and once after phase 2) for invariant testing.
    """
    state = PartitionState(instance, complete_primal, dual, chunk_mass=ONE)
    alpha = dual.alpha
    run_phases(state, lambda j, weighted, dmax: weighted + alpha[j], observer)
    return state.finish()


def verify_core_properties(ps: PartitionedSolution, primal: FractionalSolution) -> Report:
    """Clauses shared by both partition flavors: unit demand masses, exact
    site/client marginals, all-or-nothing connections, demand counts, and
    the facility count bound."""
    report: list[str] = []
    instance = ps.instance
    nbr = {d.id: set() for d in ps.demands}
    for (fac, dem) in ps.xbar:
        nbr[dem].add(fac)

    for d in ps.demands:
        total = sum((ps.xbar[(f, d.id)] for f in nbr[d.id]), Fraction(0))
        if total != 1:
            report.append(f"unit mass: demand {d.id} totals {total}")

    by_site: dict[int, list[int]] = {i: [] for i in range(instance.num_sites)}
    for f in ps.facilities:
        by_site[f.site].append(f.id)
    by_client: dict[int, list[int]] = {j: [] for j in range(instance.num_clients)}
    for d in ps.demands:
        by_client[d.client].append(d.id)
    for i in range(instance.num_sites):
        for j in range(instance.num_clients):
            total = Fraction(0)
            for f in by_site[i]:
                for d in by_client[j]:
                    total += ps.xbar.get((f, d), Fraction(0))
            if total != primal.x[i][j]:
                report.append(
                    f"connection partition: site {i} client {j} totals {total}, "
                    f"input has {primal.x[i][j]}"
                )
        ytotal = sum((ps.facilities[f].ybar for f in by_site[i]), Fraction(0))
        if ytotal != primal.y[i]:
            report.append(
                f"opening partition: site {i} totals {ytotal}, input has {primal.y[i]}"
            )

    for (fac, dem), v in ps.xbar.items():
        if v != ps.facilities[fac].ybar:
            report.append(
                f"completeness: xbar[{fac},{dem}] = {v} != ybar = {ps.facilities[fac].ybar}"
            )

    bound = (
        instance.num_sites
        + 2 * instance.max_demand * instance.num_clients ** 2
    )
    if len(ps.facilities) > bound:
        report.append(f"facility count {len(ps.facilities)} exceeds bound {bound}")

    expected = sum(c.demand for c in instance.clients)
    if len(ps.demands) != expected:
        report.append(f"demand count {len(ps.demands)} != total demand {expected}")
    for j, dems in by_client.items():
        if len(dems) != instance.clients[j].demand:
            report.append(
                f"client {j} has {len(dems)} demands, expected {instance.clients[j].demand}"
            )
    return report


def verify_properties(
    ps: PartitionedSolution,
    primal: FractionalSolution,
    dual: DualSolution,
) -> Report:
    """Exact check of every partitioned-solution invariant; returns one
    entry per violated clause with a witness."""
    instance = ps.instance
    nbr = {d.id: set() for d in ps.demands}
    for (fac, dem) in ps.xbar:
        nbr[dem].add(fac)
    by_client: dict[int, list[int]] = {j: [] for j in range(instance.num_clients)}
    for d in ps.demands:
        by_client[d.client].append(d.id)
    by_site: dict[int, list[int]] = {i: [] for i in range(instance.num_sites)}
    for f in ps.facilities:
        by_site[f.site].append(f.id)

    report = verify_core_properties(ps, primal)

    # Primary neighborhoods pairwise disjoint.
    for a_idx, ka in enumerate(ps.primaries):
        for kb in ps.primaries[a_idx + 1:]:
            inter = nbr[ka] & nbr[kb]
            if inter:
                report.append(
                    f"primary disjointness: primaries {ka} and {kb} share {sorted(inter)}"
                )

    # Per-site primary mass within the opening value.
    for i in range(instance.num_sites):
        total = Fraction(0)
        for f in by_site[i]:
            for kappa in ps.primaries:
                total += ps.xbar.get((f, kappa), Fraction(0))
        if total > primal.y[i]:
            report.append(
                f"primary site mass: site {i} holds {total} > y = {primal.y[i]}"
            )

    # Assignment: overlap and cost ordering.
    primary_set = set(ps.primaries)
    for d in ps.demands:
        kappa = ps.assigned[d.id]
        if kappa not in primary_set:
            report.append(f"assignment: demand {d.id} assigned to non-primary {kappa}")
            continue
        if not nbr[d.id] & nbr[kappa]:
            report.append(
                f"assignment overlap: demand {d.id} shares no facility with {kappa}"
            )
        lhs = ps.avg_conn_cost(d.id) + ps.alpha_of_demand[d.id]
        rhs = ps.avg_conn_cost(kappa) + ps.alpha_of_demand[kappa]
        if lhs < rhs:
            report.append(
                f"assignment cost order: demand {d.id} has {lhs} < primary {kappa} has {rhs}"
            )

    # Sibling conditions.
    for j, dems in by_client.items():
        for a_idx, da in enumerate(dems):
            for db in dems[a_idx + 1:]:
                if nbr[da] & nbr[db]:
                    report.append(
                        f"sibling disjointness: demands {da},{db} of client {j} overlap"
                    )
        for da in dems:
            for db in dems:
                if da == db:
                    continue
                inter = nbr[db] & nbr[ps.assigned[da]]
                if inter:
                    report.append(
                        f"sibling/primary disjointness: demand {db} overlaps "
                        f"primary of sibling {da}"
                    )

    # Every neighborhood edge is within the demand's dual value.
    for (fac, dem) in ps.xbar:
        d = ps.distance(fac, dem)
        if d > dual.alpha[ps.demands[dem].client]:
            report.append(
                f"dual bound: edge ({fac},{dem}) has distance {d} > "
                f"alpha = {dual.alpha[ps.demands[dem].client]}"
            )
    return report
