"""Demand reduction: split an optimal complete fractional solution into an
integral part (the floors) and a small residual problem.

The floors of a complete solution are feasible on their own, and what is
left is a feasible fractional solution for the residual instance whose
demands are the fractional remainders.  Every residual demand is below
the number of sites, so the partitioning stage stays polynomial no matter
how large the original demands were.  Solving the residual and adding the
floors back yields a solution of the original instance at the combined
cost, which is how the end-to-end pipeline composes.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .instance import Client, FtfpInstance
from .lp import DualSolution, FractionalSolution, completeness_violations
from .rounding import IntegralSolution, validate_integral


@dataclass(frozen=True)
class ReductionResult:
    source_instance: FtfpInstance            # instance the split was computed on
    xhat: tuple[tuple[int, ...], ...]        # floors of x, [site][client]
    yhat: tuple[int, ...]                    # floors of y
    rhat: tuple[int, ...]                    # demand already covered per client
    rdot: tuple[int, ...]                    # residual demand per client
    residual_instance: FtfpInstance          # clients with rdot > 0, reindexed
    residual_fractional: FractionalSolution  # fractional remainders, residual indexing
    residual_client_of: tuple[int, ...]      # residual client index -> source client index

    @property
    def integral_part_cost(self) -> Fraction:
        return self.integral_facility_cost + self.integral_connection_cost

    @property
    def integral_facility_cost(self) -> Fraction:
        return sum(
            (s.open_cost * y for s, y in zip(self.source_instance.sites, self.yhat)),
            Fraction(0),
        )

    @property
    def integral_connection_cost(self) -> Fraction:
        total = Fraction(0)
        for i, row in enumerate(self.xhat):
            for j, v in enumerate(row):
                if v:
                    total += self.source_instance.dist[i][j] * v
        return total


def reduce_demands(
    instance: FtfpInstance, complete_primal: FractionalSolution
) -> ReductionResult:
    """Split (x, y) into integer floors and a residual fractional solution.

    Requires a complete input; on a non-complete solution the remainders
    can violate the opening constraints, so the offending pair is reported
    instead of silently producing an infeasible residual.
    """
    violations = completeness_violations(complete_primal)
    if violations:
        raise ValueError("solution is not complete: " + violations[0])

    n, m = instance.num_sites, instance.num_clients
    xhat = [[int(complete_primal.x[i][j]) for j in range(m)] for i in range(n)]
    yhat = [int(complete_primal.y[i]) for i in range(n)]
    xdot = [
        [complete_primal.x[i][j] - xhat[i][j] for j in range(m)] for i in range(n)
    ]
    ydot = [complete_primal.y[i] - yhat[i] for i in range(n)]

    rhat = [sum(xhat[i][j] for i in range(n)) for j in range(m)]
    rdot_frac = [sum((xdot[i][j] for i in range(n)), Fraction(0)) for j in range(m)]
    if any(v.denominator != 1 for v in rdot_frac):
        raise AssertionError("residual demands must be integral")
    rdot = [int(v) for v in rdot_frac]

    kept = [j for j in range(m) if rdot[j] > 0]
    residual_instance = FtfpInstance(
        sites=instance.sites,
        clients=tuple(Client(idx, rdot[j]) for idx, j in enumerate(kept)),
        dist=tuple(tuple(instance.dist[i][j] for j in kept) for i in range(n)),
    )
    residual_fractional = FractionalSolution(
        x=tuple(tuple(xdot[i][j] for j in kept) for i in range(n)),
        y=tuple(ydot),
    )
    return ReductionResult(
        source_instance=instance,
        xhat=tuple(tuple(row) for row in xhat),
        yhat=tuple(yhat),
        rhat=tuple(rhat),
        rdot=tuple(rdot),
        residual_instance=residual_instance,
        residual_fractional=residual_fractional,
        residual_client_of=tuple(kept),
    )


def restrict_dual(dual: DualSolution, reduction: ReductionResult) -> DualSolution:
    """Dual restricted to the residual instance's clients.

    The same multipliers remain optimal for the residual problem: its
    demands are exactly the slack the floors left behind, so every
    slackness condition carries over.
    """
    kept = reduction.residual_client_of
    alpha = tuple(dual.alpha[j] for j in kept)
    beta = tuple(tuple(row[j] for j in kept) for row in dual.beta)
    return DualSolution(alpha=alpha, beta=beta)


def integral_part_solution(reduction: ReductionResult) -> IntegralSolution:
    """The floors as an explicit solution on the source instance.

    Client j uses copies 0..xhat[i][j]-1 at site i; copies are shared
    freely across clients, so yhat[i] copies always suffice.
    """
    inst = reduction.source_instance
    connections: dict[int, list[tuple[int, int]]] = {}
    for j in range(inst.num_clients):
        conns: list[tuple[int, int]] = []
        for i in range(inst.num_sites):
            conns.extend((i, c) for c in range(reduction.xhat[i][j]))
        connections[j] = conns
    open_counts = {i: y for i, y in enumerate(reduction.yhat) if y}
    return IntegralSolution(
        open_counts=open_counts,
        connections=connections,
        facility_cost=reduction.integral_facility_cost,
        connection_cost=reduction.integral_connection_cost,
        total_cost=reduction.integral_part_cost,
    )


def recombine(
    reduction: ReductionResult, residual_solution: IntegralSolution
) -> IntegralSolution:
    """Add a residual solution to the integral part, mapping split sites
    back to their original roots; result is feasible for the instance the
    pipeline started from and costs exactly the sum of the two parts.
    """
    report = validate_integral(reduction.residual_instance, residual_solution)
    if report:
        raise ValueError("residual solution infeasible: " + report[0])

    inst = reduction.source_instance
    counter: dict[int, int] = {}
    connections: dict[int, list[tuple[int, int]]] = {
        j: [] for j in range(inst.num_clients)
    }

    # Integral part: one block of copy indices per source site.
    base_int: dict[int, int] = {}
    for i, y in enumerate(reduction.yhat):
        if y:
            root = inst.root_site(i)
            base_int[i] = counter.get(root, 0)
            counter[root] = base_int[i] + y
    for j in range(inst.num_clients):
        for i in range(inst.num_sites):
            for c in range(reduction.xhat[i][j]):
                root = inst.root_site(i)
                connections[j].append((root, base_int[i] + c))

    # Residual part: fresh blocks after the integral ones.
    base_res: dict[int, int] = {}
    for i in sorted(residual_solution.open_counts):
        count = residual_solution.open_counts[i]
        if count:
            root = inst.root_site(i)
            base_res[i] = counter.get(root, 0)
            counter[root] = base_res[i] + count
    for res_j, conns in residual_solution.connections.items():
        j = reduction.residual_client_of[res_j]
        for (i, c) in conns:
            connections[j].append((inst.root_site(i), base_res[i] + c))

    open_counts = {root: c for root, c in counter.items() if c}
    facility = Fraction(0)
    for root, c in open_counts.items():
        facility += inst.sites[root].open_cost * c
    connection = Fraction(0)
    for j, conns in connections.items():
        for (site, _) in conns:
            connection += inst.dist[site][j]
    return IntegralSolution(
        open_counts=open_counts,
        connections={j: list(v) for j, v in connections.items()},
        facility_cost=facility,
        connection_cost=connection,
        total_cost=facility + connection,
    )
