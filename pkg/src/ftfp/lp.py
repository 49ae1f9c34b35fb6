"""Exact relaxation solving, cost decomposition, and the completeness
transform that downstream stages require.

A fractional solution is *complete* when every positive connection uses
its site fully (``x[i][j] > 0`` implies ``x[i][j] == y[i]``).  Solutions
straight from the simplex are not complete in general; ``make_complete``
splits sites until they are, preserving all costs exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .instance import FtfpInstance, Site, validate
from .simplex import solve_facility_lp

Report = list[str]


@dataclass(frozen=True)
class FractionalSolution:
    """Primal values: x[site][client] connection amounts, y[site] openings."""

    x: tuple[tuple[Fraction, ...], ...]
    y: tuple[Fraction, ...]

    def cost(self, instance: FtfpInstance) -> Fraction:
        total = Fraction(0)
        for i, site in enumerate(instance.sites):
            total += site.open_cost * self.y[i]
            row = instance.dist[i]
            for j, v in enumerate(self.x[i]):
                if v:
                    total += row[j] * v
        return total


@dataclass(frozen=True)
class DualSolution:
    """Dual values: alpha[client] and beta[site][client]."""

    alpha: tuple[Fraction, ...]
    beta: tuple[tuple[Fraction, ...], ...]


@dataclass(frozen=True)
class CostBreakdown:
    facility_cost: Fraction
    connection_cost: Fraction
    per_client: tuple[Fraction, ...]
    lp_value: Fraction


def breakdown(instance: FtfpInstance, primal: FractionalSolution) -> CostBreakdown:
    facility = Fraction(0)
    for i, site in enumerate(instance.sites):
        if primal.y[i]:
            facility += site.open_cost * primal.y[i]
    per_client = []
    for j in range(instance.num_clients):
        c = Fraction(0)
        for i in range(instance.num_sites):
            if primal.x[i][j]:
                c += instance.dist[i][j] * primal.x[i][j]
        per_client.append(c)
    connection = sum(per_client, Fraction(0))
    return CostBreakdown(facility, connection, tuple(per_client), facility + connection)


def solve_lp(
    instance: FtfpInstance,
) -> tuple[FractionalSolution, DualSolution, CostBreakdown]:
    """Solve the relaxation exactly; returns optimal primal, dual, and costs.

    Strong duality is asserted on every solve: the primal objective must
    equal sum_j r_j * alpha_j as exact rationals.
    """
    result = solve_facility_lp(
        [s.open_cost for s in instance.sites],
        [c.demand for c in instance.clients],
        [list(row) for row in instance.dist],
    )
    primal = FractionalSolution(
        x=tuple(tuple(row) for row in result.x), y=tuple(result.y)
    )
    dual = DualSolution(
        alpha=tuple(result.alpha), beta=tuple(tuple(row) for row in result.beta)
    )
    costs = breakdown(instance, primal)
    dual_value = sum(
        (Fraction(c.demand) * dual.alpha[j] for j, c in enumerate(instance.clients)),
        Fraction(0),
    )
    if costs.lp_value != result.objective or costs.lp_value != dual_value:
        raise AssertionError(
            f"duality gap: primal {costs.lp_value}, dual {dual_value}"
        )
    return primal, dual, costs


def check_feasible(instance: FtfpInstance, primal: FractionalSolution) -> Report:
    report = []
    for i in range(instance.num_sites):
        if primal.y[i] < 0:
            report.append(f"y[{i}] = {primal.y[i]} is negative")
        for j in range(instance.num_clients):
            v = primal.x[i][j]
            if v < 0:
                report.append(f"x[{i}][{j}] = {v} is negative")
            if v > primal.y[i]:
                report.append(f"x[{i}][{j}] = {v} exceeds y[{i}] = {primal.y[i]}")
    for j, client in enumerate(instance.clients):
        total = sum((primal.x[i][j] for i in range(instance.num_sites)), Fraction(0))
        if total != client.demand:
            report.append(f"client {j}: connections sum to {total}, demand {client.demand}")
    return report


def check_complementary_slackness(
    instance: FtfpInstance, primal: FractionalSolution, dual: DualSolution
) -> Report:
    """Slackness conditions tying an optimal primal/dual pair together:
    a used connection has a tight distance constraint, and an open site
    has a saturated cost constraint.
    """
    report = []
    for i in range(instance.num_sites):
        for j in range(instance.num_clients):
            if primal.x[i][j] and dual.alpha[j] - dual.beta[i][j] != instance.dist[i][j]:
                report.append(
                    f"x[{i}][{j}] > 0 but alpha[{j}] - beta[{i}][{j}] = "
                    f"{dual.alpha[j] - dual.beta[i][j]} != d = {instance.dist[i][j]}"
                )
        if primal.y[i]:
            total = sum(dual.beta[i], Fraction(0))
            if total != instance.sites[i].open_cost:
                report.append(
                    f"y[{i}] > 0 but sum of beta[{i}] = {total} != "
                    f"f = {instance.sites[i].open_cost}"
                )
    return report


def make_complete(
    instance: FtfpInstance, primal: FractionalSolution
) -> tuple[FtfpInstance, FractionalSolution]:
    """Split sites until every connection is all-or-nothing.

    Each client has at most one partially used site at a vertex solution,
    so at most one split per client is needed; split sites copy the
    parent's cost and distances and record the parent id.  Facility cost,
    connection cost, and the per-client totals are unchanged.
    """
    report = check_feasible(instance, primal)
    if report:
        raise ValueError("cannot complete infeasible solution: " + "; ".join(report))

    open_costs: list[Fraction] = [s.open_cost for s in instance.sites]
    parents: list[int | None] = [s.parent for s in instance.sites]
    dist: list[list[Fraction]] = [list(row) for row in instance.dist]
    x: list[list[Fraction]] = [list(row) for row in primal.x]
    y: list[Fraction] = list(primal.y)
    m = instance.num_clients

    for k in range(m):
        partial = [i for i in range(len(y)) if 0 < x[i][k] < y[i]]
        for i in partial:
            cut = x[i][k]
            new_id = len(y)
            open_costs.append(open_costs[i])
            parents.append(i)
            dist.append(list(dist[i]))
            y.append(y[i] - cut)
            y[i] = cut
            new_row = []
            for j in range(m):
                new_row.append(max(x[i][j] - cut, Fraction(0)))
                x[i][j] = min(x[i][j], cut)
            x.append(new_row)

    completed = FtfpInstance(
        sites=tuple(
            Site(i, f, parent) for i, (f, parent) in enumerate(zip(open_costs, parents))
        ),
        clients=instance.clients,
        dist=tuple(tuple(row) for row in dist),
    )
    completed_primal = FractionalSolution(
        x=tuple(tuple(row) for row in x), y=tuple(y)
    )
    return completed, completed_primal


def dual_for_completed(completed: FtfpInstance, dual: DualSolution) -> DualSolution:
    """Extend a dual to a completed instance: split sites copy the parent's
    beta row, which preserves feasibility and all slackness conditions."""
    beta = [list(row) for row in dual.beta]
    for site in completed.sites[len(dual.beta):]:
        beta.append(list(beta[completed.root_site(site.id)]))
    return DualSolution(alpha=dual.alpha, beta=tuple(tuple(row) for row in beta))


def is_complete(primal: FractionalSolution) -> bool:
    return all(
        v == 0 or v == primal.y[i]
        for i, row in enumerate(primal.x)
        for v in row
    )


def completeness_violations(primal: FractionalSolution) -> Report:
    return [
        f"x[{i}][{j}] = {v} is neither 0 nor y[{i}] = {primal.y[i]}"
        for i, row in enumerate(primal.x)
        for j, v in enumerate(row)
        if v != 0 and v != primal.y[i]
    ]
