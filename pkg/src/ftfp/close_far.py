"""Partitioning variant whose demands carry close/far neighborhood splits.

For a scaling parameter gamma in (1, 2), each demand's neighborhood is cut
into a *close* part holding exactly 1/gamma of its connection value at the
smallest distances, and a *far* part holding the rest.  Construction
differs from the plain partition in two ways: clients are scored by the
average distance of their nearest 1/gamma chunk plus the chunk's maximum
distance (no dual values involved), and a new primary claims only that
chunk, so primary clusters are built out of close neighborhoods.

Boundary ties when classifying close versus far are broken in favor of
facilities the demand acquired during phase 1 (those inherited from its
primary's cluster), then by creation order.  That rule is what keeps a
demand's close set overlapping its primary's.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable

from .instance import FtfpInstance
from .lp import DualSolution, FractionalSolution
from .partition import (
    PartitionedSolution,
    PartitionState,
    Report,
    Snapshot,
    run_phases,
    verify_core_properties,
)


@dataclass(frozen=True)
class CloseFarPartition:
    base: PartitionedSolution
    gamma: Fraction
    close: dict[int, frozenset[int]]     # demand -> close facility ids
    far: dict[int, frozenset[int]]       # demand -> far facility ids
    avg_close: dict[int, Fraction]
    max_close: dict[int, Fraction]
    avg_far: dict[int, Fraction]
    avg_all: dict[int, Fraction]


def avg_distance(
    ps: PartitionedSolution, facilities: Iterable[int], demand: int
) -> Fraction:
    """Opening-weighted average distance from a demand to a facility set."""
    total = Fraction(0)
    weight = Fraction(0)
    for fac in facilities:
        y = ps.facilities[fac].ybar
        total += ps.distance(fac, demand) * y
        weight += y
    if weight == 0:
        raise ValueError("average distance over an empty or weightless set")
    return total / weight


def partition_close_far(
    instance: FtfpInstance,
    complete_primal: FractionalSolution,
    gamma: Fraction,
    dual: DualSolution | None = None,
    observer: Callable[[Snapshot], None] | None = None,
) -> CloseFarPartition:
    """Build the partition and classify every neighborhood at mass 1/gamma.

    The dual is optional: construction never reads it, but passing it
    fills in the per-demand dual values for downstream checks.
    """
    gamma = Fraction(gamma)
    if not (1 < gamma < 2):
        raise ValueError(f"gamma must be strictly between 1 and 2, got {gamma}")
    if dual is None:
        dual = DualSolution(
            alpha=tuple(Fraction(0) for _ in instance.clients),
            beta=tuple(
                tuple(Fraction(0) for _ in instance.clients) for _ in instance.sites
            ),
        )
    state = PartitionState(instance, complete_primal, dual, chunk_mass=1 / gamma)
    run_phases(state, lambda j, weighted, dmax: gamma * weighted + dmax, observer)

    # Classification: the close set is the minimal prefix of the
    # neighborhood, ordered by distance with phase-1 facilities winning
    # ties, holding exactly 1/gamma; the boundary facility is split when
    # the prefix would overshoot.  Splits refine facilities globally, so
    # already classified demands get the new shard filed with its parent.
    threshold = 1 / gamma
    close_sets: list[set[int]] = []
    far_sets: list[set[int]] = []

    def split_with_fixup(fac: int, keep: Fraction) -> int:
        new = state.split(fac, keep)
        for s in close_sets:
            if fac in s:
                s.add(new)
        for s in far_sets:
            if fac in s:
                s.add(new)
        return new

    for dem in range(len(state.demand_client)):
        client = state.demand_client[dem]
        members = state.phase1_members[dem]
        order = sorted(
            state.nbr[dem],
            key=lambda f: (
                state.dist_to_client(f, client),
                0 if f in members else 1,
                f,
            ),
        )
        close: set[int] = set()
        cum = Fraction(0)
        for fac in order:
            value = state.xbar[fac][dem]
            if cum + value < threshold:
                close.add(fac)
                cum += value
                continue
            if cum + value > threshold:
                split_with_fixup(fac, threshold - cum)
            close.add(fac)
            break
        close_sets.append(close)
        far_sets.append(set(state.nbr[dem]) - close)

    base = state.finish()
    avg_close: dict[int, Fraction] = {}
    max_close: dict[int, Fraction] = {}
    avg_far: dict[int, Fraction] = {}
    avg_all: dict[int, Fraction] = {}
    for dem in range(len(base.demands)):
        avg_close[dem] = avg_distance(base, close_sets[dem], dem)
        max_close[dem] = max(base.distance(f, dem) for f in close_sets[dem])
        avg_far[dem] = avg_distance(base, far_sets[dem], dem)
        avg_all[dem] = base.avg_conn_cost(dem)
    return CloseFarPartition(
        base=base,
        gamma=gamma,
        close={d: frozenset(s) for d, s in enumerate(close_sets)},
        far={d: frozenset(s) for d, s in enumerate(far_sets)},
        avg_close=avg_close,
        max_close=max_close,
        avg_far=avg_far,
        avg_all=avg_all,
    )


def verify_properties_cf(cfp: CloseFarPartition) -> Report:
    """Exact check of every close/far clause; one entry per violation."""
    report: list[str] = []
    ps = cfp.base
    gamma = cfp.gamma
    instance = ps.instance
    nbr = {d.id: set() for d in ps.demands}
    for (fac, dem) in ps.xbar:
        nbr[dem].add(fac)

    report.extend(verify_core_properties(ps, ps.primal))

    for d in ps.demands:
        close = cfp.close[d.id]
        far = cfp.far[d.id]
        if close & far:
            report.append(f"close/far overlap at demand {d.id}: {sorted(close & far)}")
        if close | far != nbr[d.id]:
            report.append(f"close/far do not cover neighborhood of demand {d.id}")
        mass = sum((ps.xbar[(f, d.id)] for f in close), Fraction(0))
        if mass != 1 / gamma:
            report.append(f"close mass of demand {d.id} is {mass}, expected {1 / gamma}")
        far_mass = sum((ps.xbar[(f, d.id)] for f in far), Fraction(0))
        if far_mass != 1 - 1 / gamma:
            report.append(
                f"far mass of demand {d.id} is {far_mass}, expected {1 - 1 / gamma}"
            )
        if close and far:
            dmax_close = max(ps.distance(f, d.id) for f in close)
            dmin_far = min(ps.distance(f, d.id) for f in far)
            if dmax_close > dmin_far:
                report.append(
                    f"distance order: demand {d.id} has close distance {dmax_close} "
                    f"beyond far distance {dmin_far}"
                )
        # Boundary ties must respect the phase-1-first, lowest-id-first rule.
        members = ps.phase1_members[d.id]
        for f_far in far:
            df = ps.distance(f_far, d.id)
            for f_close in close:
                if ps.distance(f_close, d.id) == df:
                    far_rank = (0 if f_far in members else 1, f_far)
                    close_rank = (0 if f_close in members else 1, f_close)
                    if far_rank < close_rank:
                        report.append(
                            f"tie rule: demand {d.id} keeps {f_close} close but "
                            f"{f_far} far despite equal distance and higher priority"
                        )
        # Average over the whole neighborhood decomposes across the split.
        lhs = cfp.avg_all[d.id]
        rhs = cfp.avg_close[d.id] / gamma + cfp.avg_far[d.id] * (gamma - 1) / gamma
        if lhs != rhs:
            report.append(
                f"average identity: demand {d.id} has {lhs} != {rhs}"
            )

    for idx, ka in enumerate(ps.primaries):
        for kb in ps.primaries[idx + 1:]:
            inter = cfp.close[ka] & cfp.close[kb]
            if inter:
                report.append(
                    f"primary close disjointness: {ka} and {kb} share {sorted(inter)}"
                )

    for i in range(instance.num_sites):
        total = Fraction(0)
        for kappa in ps.primaries:
            for f in cfp.close[kappa]:
                if ps.facilities[f].site == i:
                    total += ps.xbar[(f, kappa)]
        if total > ps.primal.y[i]:
            report.append(
                f"primary close site mass: site {i} holds {total} > y = {ps.primal.y[i]}"
            )

    for d in ps.demands:
        kappa = ps.assigned[d.id]
        if not cfp.close[d.id] & cfp.close[kappa]:
            report.append(
                f"close assignment overlap: demand {d.id} shares no close facility "
                f"with primary {kappa}"
            )
        lhs = cfp.avg_close[d.id] + cfp.max_close[d.id]
        rhs = cfp.avg_close[kappa] + cfp.max_close[kappa]
        if lhs < rhs:
            report.append(
                f"close cost order: demand {d.id} has {lhs} < primary {kappa} has {rhs}"
            )

    by_client: dict[int, list[int]] = {}
    for d in ps.demands:
        by_client.setdefault(d.client, []).append(d.id)
    for j, dems in by_client.items():
        for idx, da in enumerate(dems):
            for db in dems[idx + 1:]:
                if nbr[da] & nbr[db]:
                    report.append(
                        f"sibling disjointness: demands {da},{db} of client {j} overlap"
                    )
        for da in dems:
            for db in dems:
                if da != db and nbr[db] & cfp.close[ps.assigned[da]]:
                    report.append(
                        f"sibling/primary-close disjointness: demand {db} overlaps "
                        f"close set of sibling {da}'s primary"
                    )

    for f in ps.facilities:
        if gamma * f.ybar > 1:
            report.append(
                f"scaled opening: facility {f.id} has gamma*ybar = {gamma * f.ybar} > 1"
            )
    return report
