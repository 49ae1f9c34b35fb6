"""Randomized rounding of partitioned solutions into integral ones.

Three rounders share one skeleton: open exactly one facility per primary
cluster (drawn by the cluster's fractional values), possibly open further
facilities independently, then connect every demand, preferring open
facilities in its own neighborhood and falling back to the facility its
primary opened.

* ``round_egup``: only primary clusters open facilities; every demand
  connects to its primary's pick.  Expected facility cost stays within
  the fractional facility cost.
* ``round_echs``: facilities outside all primary neighborhoods also open,
  independently with their fractional opening value; demands connect to
  the nearest open neighbor when one exists.  Expected facility cost
  equals the fractional facility cost exactly.
* ``round_ebgs``: like ``round_echs`` but on a close/far partition with
  all probabilities scaled by gamma, preferring close neighbors, then far
  ones, then the primary's pick.

Runs are pure functions of (input, seed): a single splitmix64 stream is
consumed in a documented order (primaries by creation order, then
independent facilities by creation order), and categorical draws compare
the 64-bit word against exact cumulative thresholds.

Feasibility holds for every seed: demands of one client live in disjoint
neighborhood-plus-primary-cluster footprints, so their connections land
on distinct facilities.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from fractions import Fraction

from .close_far import CloseFarPartition
from .instance import FtfpInstance
from .partition import PartitionedSolution
from .rng import TWO64, SplitMix64, trial_seed

Report = list[str]


@dataclass
class IntegralSolution:
    """Open facility counts per site and per-client connection lists.

    A connection is a (site, copy_index) pair; copies within one client
    are all distinct, which is the fault-tolerance requirement.
    """

    open_counts: dict[int, int]
    connections: dict[int, list[tuple[int, int]]]
    facility_cost: Fraction
    connection_cost: Fraction
    total_cost: Fraction


def validate_integral(instance: FtfpInstance, sol: IntegralSolution) -> Report:
    """Feasibility and exact cost recomputation; returns violations."""
    report: list[str] = []
    for site, count in sol.open_counts.items():
        if not (0 <= site < instance.num_sites):
            report.append(f"open count for unknown site {site}")
        if count < 0:
            report.append(f"negative open count at site {site}")
    for j in sol.connections:
        if not (0 <= j < instance.num_clients):
            report.append(f"connections for unknown client {j}")
            return report
    for j in range(instance.num_clients):
        conns = sol.connections.get(j, [])
        if len(conns) != instance.clients[j].demand:
            report.append(
                f"client {j} has {len(conns)} connections, demand is "
                f"{instance.clients[j].demand}"
            )
        if len(set(conns)) != len(conns):
            report.append(f"client {j} connects twice to one facility")
        for (site, copy) in conns:
            if not (0 <= site < instance.num_sites):
                report.append(f"client {j} connects to unknown site {site}")
            elif not (0 <= copy < sol.open_counts.get(site, 0)):
                report.append(
                    f"client {j} uses copy {copy} at site {site}, only "
                    f"{sol.open_counts.get(site, 0)} open"
                )
    facility = Fraction(0)
    for site, count in sol.open_counts.items():
        if 0 <= site < instance.num_sites:
            facility += instance.sites[site].open_cost * count
    connection = Fraction(0)
    for j, conns in sol.connections.items():
        if 0 <= j < instance.num_clients:
            for (site, _) in conns:
                if 0 <= site < instance.num_sites:
                    connection += instance.dist[site][j]
    if facility != sol.facility_cost:
        report.append(f"facility cost {sol.facility_cost} != recomputed {facility}")
    if connection != sol.connection_cost:
        report.append(f"connection cost {sol.connection_cost} != recomputed {connection}")
    if sol.total_cost != sol.facility_cost + sol.connection_cost:
        report.append("total cost is not the sum of its parts")
    return report


# -- sampling plans ------------------------------------------------------


@dataclass
class _Plan:
    """Prepared, integer-heavy view of a partition for repeated sampling."""

    algo: str
    instance: FtfpInstance
    fac_site: tuple[int, ...]
    num_facilities: int
    # Per primary cluster, in creation order: member facilities and exact
    # cumulative thresholds (num * 2**64, den) for the categorical draw.
    primary_facs: list[tuple[int, ...]]
    primary_thresholds: list[tuple[tuple[int, int], ...]]
    primary_probs: list[tuple[Fraction, ...]]
    # Independently opened facilities: (facility, num * 2**64, den, prob).
    independents: list[tuple[int, int, int, Fraction]]
    # Per demand: client, primary index (into the lists above), and scan
    # lists of candidate facilities ordered by (distance, creation).
    demand_client: tuple[int, ...]
    demand_primary_idx: tuple[int, ...]
    demand_is_primary: tuple[bool, ...]
    demand_scans: tuple[tuple[tuple[int, ...], ...], ...]
    # Integer costs over a common denominator.
    cost_den: int
    f_int: tuple[int, ...]
    dist_int: tuple[tuple[int, ...], ...]   # [facility][client]

    @property
    def nonprimary_count(self) -> int:
        return sum(1 for p in self.demand_is_primary if not p)


def _thresholds(probs: list[Fraction]) -> tuple[tuple[int, int], ...]:
    cum = Fraction(0)
    out = []
    for p in probs:
        cum += p
        out.append((cum.numerator * TWO64, cum.denominator))
    if cum != 1:
        raise AssertionError(f"cluster probabilities sum to {cum}, not 1")
    return tuple(out)


def _scan_order(ps: PartitionedSolution, facs: set[int], client: int) -> tuple[int, ...]:
    return tuple(
        sorted(facs, key=lambda f: (ps.instance.dist[ps.facilities[f].site][client], f))
    )


def _common_costs(ps: PartitionedSolution):
    den = 1
    inst = ps.instance
    for s in inst.sites:
        den = den * s.open_cost.denominator // math.gcd(den, s.open_cost.denominator)
    for row in inst.dist:
        for d in row:
            den = den * d.denominator // math.gcd(den, d.denominator)
    f_int = tuple(
        int(inst.sites[f.site].open_cost * den) for f in ps.facilities
    )
    dist_int = tuple(
        tuple(int(d * den) for d in inst.dist[f.site]) for f in ps.facilities
    )
    return den, f_int, dist_int


def _plan_common(ps: PartitionedSolution, algo: str) -> dict:
    den, f_int, dist_int = _common_costs(ps)
    return dict(
        algo=algo,
        instance=ps.instance,
        fac_site=tuple(f.site for f in ps.facilities),
        num_facilities=len(ps.facilities),
        demand_client=tuple(d.client for d in ps.demands),
        cost_den=den,
        f_int=f_int,
        dist_int=dist_int,
    )


def _neighborhoods(ps: PartitionedSolution) -> dict[int, set[int]]:
    nbr: dict[int, set[int]] = {d.id: set() for d in ps.demands}
    for (fac, dem) in ps.xbar:
        nbr[dem].add(fac)
    return nbr


def _build_plan(ps: PartitionedSolution, algo: str, cfp: CloseFarPartition | None) -> _Plan:
    nbr = _neighborhoods(ps)
    primary_index = {kappa: i for i, kappa in enumerate(ps.primaries)}

    primary_facs = []
    primary_probs = []
    covered: set[int] = set()
    for kappa in ps.primaries:
        if algo == "ebgs":
            assert cfp is not None
            members = sorted(cfp.close[kappa])
            probs = [cfp.gamma * ps.xbar[(f, kappa)] for f in members]
        else:
            members = sorted(nbr[kappa])
            probs = [ps.xbar[(f, kappa)] for f in members]
        primary_facs.append(tuple(members))
        primary_probs.append(tuple(probs))
        covered.update(members)

    independents: list[tuple[int, int, int, Fraction]] = []
    if algo in ("echs", "ebgs"):
        scale = cfp.gamma if algo == "ebgs" else Fraction(1)
        for f in ps.facilities:
            if f.id in covered:
                continue
            p = scale * f.ybar
            if p > 1:
                raise ValueError(
                    f"facility {f.id} has opening probability {p} > 1; "
                    "scaled opening requires gamma * ybar <= 1"
                )
            independents.append((f.id, p.numerator * TWO64, p.denominator, p))

    scans = []
    for d in ps.demands:
        if d.id in primary_index:
            scans.append(())
        elif algo == "egup":
            scans.append(())
        elif algo == "echs":
            scans.append((_scan_order(ps, nbr[d.id], d.client),))
        else:
            scans.append(
                (
                    _scan_order(ps, set(cfp.close[d.id]), d.client),
                    _scan_order(ps, set(cfp.far[d.id]), d.client),
                )
            )

    return _Plan(
        primary_facs=primary_facs,
        primary_thresholds=[_thresholds(list(p)) for p in primary_probs],
        primary_probs=primary_probs,
        independents=independents,
        demand_primary_idx=tuple(primary_index[ps.assigned[d.id]] for d in ps.demands),
        demand_is_primary=tuple(d.id in primary_index for d in ps.demands),
        demand_scans=tuple(scans),
        **_plan_common(ps, algo),
    )


def plan_egup(ps: PartitionedSolution) -> _Plan:
    return _build_plan(ps, "egup", None)


def plan_echs(ps: PartitionedSolution) -> _Plan:
    return _build_plan(ps, "echs", None)


def plan_ebgs(cfp: CloseFarPartition) -> _Plan:
    return _build_plan(cfp.base, "ebgs", cfp)


# -- single-run sampling --------------------------------------------------


def _sample(plan: _Plan, seed: int):
    """One outcome: (opened facility flags, primary choices).

    Draw order: one categorical word per primary cluster in creation
    order, then one word per independent facility in creation order.
    """
    rng = SplitMix64(seed)
    opened = bytearray(plan.num_facilities)
    chosen: list[int] = []
    for facs, thresholds in zip(plan.primary_facs, plan.primary_thresholds):
        u = rng.next_u64()
        pick = len(facs) - 1
        for idx, (num264, den) in enumerate(thresholds):
            if u * den < num264:
                pick = idx
                break
        fac = facs[pick]
        chosen.append(fac)
        opened[fac] = 1
    for (fac, num264, den, _) in plan.independents:
        if rng.next_u64() * den < num264:
            opened[fac] = 1
    return opened, chosen


def _connect(plan: _Plan, opened: bytearray, chosen: list[int]):
    """Connection targets per demand plus the count of demands that fell
    back to their primary's facility with no open neighbor of their own."""
    targets = []
    indirect = 0
    for dem in range(len(plan.demand_client)):
        if plan.demand_is_primary[dem]:
            targets.append(chosen[plan.demand_primary_idx[dem]])
            continue
        fac = -1
        for scan in plan.demand_scans[dem]:
            for g in scan:
                if opened[g]:
                    fac = g
                    break
            if fac >= 0:
                break
        if fac < 0:
            indirect += 1
            fac = chosen[plan.demand_primary_idx[dem]]
        targets.append(fac)
    return targets, indirect


def _solution_from_outcome(
    plan: _Plan, opened: bytearray, targets: list[int]
) -> IntegralSolution:
    inst = plan.instance
    copy_of: dict[int, int] = {}
    open_counts: dict[int, int] = {}
    facility = Fraction(0)
    for fac in range(plan.num_facilities):
        if opened[fac]:
            site = plan.fac_site[fac]
            copy_of[fac] = open_counts.get(site, 0)
            open_counts[site] = copy_of[fac] + 1
            facility += inst.sites[site].open_cost
    connections: dict[int, list[tuple[int, int]]] = {
        j: [] for j in range(inst.num_clients)
    }
    connection = Fraction(0)
    for dem, fac in enumerate(targets):
        client = plan.demand_client[dem]
        site = plan.fac_site[fac]
        connections[client].append((site, copy_of[fac]))
        connection += inst.dist[site][client]
    return IntegralSolution(
        open_counts=open_counts,
        connections=connections,
        facility_cost=facility,
        connection_cost=connection,
        total_cost=facility + connection,
    )


def _round_with_plan(plan: _Plan, seed: int) -> IntegralSolution:
    opened, chosen = _sample(plan, seed)
    targets, _ = _connect(plan, opened, chosen)
    return _solution_from_outcome(plan, opened, targets)


def round_egup(ps: PartitionedSolution, seed: int) -> IntegralSolution:
    """One facility per primary cluster; every demand follows its primary."""
    return _round_with_plan(plan_egup(ps), seed)


def round_echs(ps: PartitionedSolution, seed: int) -> IntegralSolution:
    """Primary clusters plus independent openings; nearest-neighbor connects."""
    return _round_with_plan(plan_echs(ps), seed)


def round_ebgs(cfp: CloseFarPartition, seed: int) -> IntegralSolution:
    """Scaled openings on a close/far partition; close, then far, then target."""
    return _round_with_plan(plan_ebgs(cfp), seed)


# -- multi-trial estimation ------------------------------------------------


@dataclass
class EstimateStats:
    algo: str
    trials: int
    mean_cost: float
    mean_facility: float
    mean_connection: float
    se_cost: float
    se_facility: float
    se_connection: float
    fraction_indirect: float
    se_indirect: float
    indirect_events: int
    nonprimary_events: int


def _trial_sums(plan: _Plan, start: int, stop: int, seed: int):
    sum_c = sum_c2 = 0
    sum_f = sum_f2 = 0
    sum_x = sum_x2 = 0
    indirect_total = 0
    f_int = plan.f_int
    dist_int = plan.dist_int
    for t in range(start, stop):
        opened, chosen = _sample(plan, trial_seed(seed, t))
        targets, indirect = _connect(plan, opened, chosen)
        fcost = 0
        for fac in range(plan.num_facilities):
            if opened[fac]:
                fcost += f_int[fac]
        ccost = 0
        for dem, fac in enumerate(targets):
            ccost += dist_int[fac][plan.demand_client[dem]]
        total = fcost + ccost
        sum_c += total
        sum_c2 += total * total
        sum_f += fcost
        sum_f2 += fcost * fcost
        sum_x += ccost
        sum_x2 += ccost * ccost
        indirect_total += indirect
    return (sum_c, sum_c2, sum_f, sum_f2, sum_x, sum_x2, indirect_total)


def _mean_se(total: int, total_sq: int, n: int, den: int) -> tuple[float, float]:
    mean = total / n / den
    if n < 2:
        return mean, 0.0
    var = (total_sq / den / den - n * mean * mean) / (n - 1)
    return mean, math.sqrt(max(var, 0.0) / n)


def _workers_from_env() -> int:
    value = os.environ.get("FTFP_THREADS", "1")
    try:
        return max(1, int(value))
    except ValueError:
        return 1


def estimate(
    algo: str,
    part: PartitionedSolution | CloseFarPartition,
    trials: int,
    seed: int,
    workers: int | None = None,
) -> EstimateStats:
    """Monte-Carlo statistics over ``trials`` independent roundings.

    Trial t runs on derived seed ``seed ^ t``.  Costs are measured, not
    certified, so floating point is fine here; the per-trial sums are
    still exact integers, which keeps the result independent of worker
    count and summation order.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    plan = _make_plan(algo, part)
    if workers is None:
        workers = _workers_from_env()
    workers = min(workers, trials)
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        chunk = (trials + workers - 1) // workers
        ranges = [(i, min(i + chunk, trials)) for i in range(0, trials, chunk)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(
                pool.map(_trial_sums_star, [(plan, a, b, seed) for a, b in ranges])
            )
        sums = tuple(sum(col) for col in zip(*parts))
    else:
        sums = _trial_sums(plan, 0, trials, seed)

    sum_c, sum_c2, sum_f, sum_f2, sum_x, sum_x2, indirect_total = sums
    den = plan.cost_den
    mean_c, se_c = _mean_se(sum_c, sum_c2, trials, den)
    mean_f, se_f = _mean_se(sum_f, sum_f2, trials, den)
    mean_x, se_x = _mean_se(sum_x, sum_x2, trials, den)
    nonprim = plan.nonprimary_count
    if nonprim:
        p = indirect_total / (trials * nonprim)
        se_p = math.sqrt(max(p * (1 - p), 0.0) / (trials * nonprim))
    else:
        p, se_p = 0.0, 0.0
    return EstimateStats(
        algo=algo,
        trials=trials,
        mean_cost=mean_c,
        mean_facility=mean_f,
        mean_connection=mean_x,
        se_cost=se_c,
        se_facility=se_f,
        se_connection=se_x,
        fraction_indirect=p,
        se_indirect=se_p,
        indirect_events=indirect_total,
        nonprimary_events=trials * nonprim,
    )


def _trial_sums_star(args):
    return _trial_sums(*args)


def _make_plan(algo: str, part) -> _Plan:
    if algo == "egup":
        return plan_egup(part)
    if algo == "echs":
        return plan_echs(part)
    if algo == "ebgs":
        if not isinstance(part, CloseFarPartition):
            raise TypeError("ebgs rounds a close/far partition")
        return plan_ebgs(part)
    raise ValueError(f"unknown algorithm {algo!r}")


def round_with(algo: str, part, seed: int) -> IntegralSolution:
    return _round_with_plan(_make_plan(algo, part), seed)
