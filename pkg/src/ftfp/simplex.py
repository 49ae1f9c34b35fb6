"""Dense two-phase simplex over exact rationals, specialized to the
facility-placement relaxation.

Model, for n sites and m clients:

    minimize   sum_i f_i y_i + sum_{ij} d_ij x_ij
    subject to x_ij - y_i + s_ij = 0        (one row per site/client pair)
               sum_i x_ij + a_j  = r_j      (one row per client)
               x, y, s, a >= 0

The pair rows are the opening constraints ``x_ij <= y_i`` in slack form;
the client rows force every demand to be met exactly (an optimal solution
with nonnegative distances never over-covers, and downstream stages assume
tight coverage).  Artificials ``a_j`` exist only for Phase 1 and stay out
of the basis afterwards; their reduced costs expose the client-row duals.

Pivoting uses Bland's rule (lowest-index entering column, lowest-index
basic variable on ratio ties), which precludes cycling and makes the
returned vertex deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction


@dataclass
class SimplexResult:
    x: list[list[Fraction]]        # [site][client]
    y: list[Fraction]
    objective: Fraction
    alpha: list[Fraction]          # client-row duals
    beta: list[list[Fraction]]     # pair-row duals, [site][client]
    pivots: int


class SimplexError(RuntimeError):
    pass


def _pivot(rows, obj, basis, prow_idx, col) -> None:
    prow = rows[prow_idx]
    inv = 1 / prow[col]
    if inv != 1:
        rows[prow_idx] = prow = [v * inv if v else v for v in prow]
    support = [k for k, v in enumerate(prow) if v]
    for r, row in enumerate(rows):
        if r == prow_idx:
            continue
        factor = row[col]
        if factor:
            for k in support:
                row[k] -= factor * prow[k]
    factor = obj[col]
    if factor:
        for k in support:
            obj[k] -= factor * prow[k]
    basis[prow_idx] = col


def _bland_loop(rows, obj, basis, banned, pivots) -> int:
    ncols = len(obj) - 1
    while True:
        enter = -1
        for j in range(ncols):
            if obj[j] < 0 and j not in banned:
                enter = j
                break
        if enter < 0:
            return pivots
        leave = -1
        best = None
        for r, row in enumerate(rows):
            coeff = row[enter]
            if coeff > 0:
                ratio = row[-1] / coeff
                if best is None or ratio < best or (ratio == best and basis[r] < basis[leave]):
                    best = ratio
                    leave = r
        if leave < 0:
            raise SimplexError("unbounded objective; input instance is malformed")
        _pivot(rows, obj, basis, leave, enter)
        pivots += 1


def solve_facility_lp(
    open_costs: list[Fraction],
    demands: list[int],
    dist: list[list[Fraction]],
) -> SimplexResult:
    n = len(open_costs)
    m = len(demands)
    zero = Fraction(0)

    x_col = lambda i, j: i * m + j
    y_col = lambda i: n * m + i
    s_col = lambda i, j: n * m + n + i * m + j
    a_col = lambda j: 2 * n * m + n + j
    ncols = 2 * n * m + n + m

    rows: list[list[Fraction]] = []
    basis: list[int] = []
    for i in range(n):
        for j in range(m):
            row = [zero] * (ncols + 1)
            row[x_col(i, j)] = Fraction(1)
            row[y_col(i)] = Fraction(-1)
            row[s_col(i, j)] = Fraction(1)
            rows.append(row)
            basis.append(s_col(i, j))
    for j in range(m):
        row = [zero] * (ncols + 1)
        for i in range(n):
            row[x_col(i, j)] = Fraction(1)
        row[a_col(j)] = Fraction(1)
        row[-1] = Fraction(demands[j])
        rows.append(row)
        basis.append(a_col(j))

    # Phase 1: minimize the artificial total, starting from the
    # slack/artificial basis (feasible because all right-hand sides are >= 0).
    obj = [zero] * (ncols + 1)
    for j in range(m):
        obj[a_col(j)] = Fraction(1)
    for r, b in enumerate(basis):
        if obj[b]:
            factor = obj[b]
            for k, v in enumerate(rows[r]):
                if v:
                    obj[k] -= factor * v
    pivots = _bland_loop(rows, obj, basis, banned=frozenset(), pivots=0)
    if obj[-1] != 0:
        raise SimplexError("infeasible; demands cannot be covered")

    art_start = a_col(0)
    for r in range(len(rows)):
        if basis[r] >= art_start:
            row = rows[r]
            enter = next((k for k in range(art_start) if row[k]), None)
            if enter is None:
                raise SimplexError("redundant row with basic artificial")
            _pivot(rows, obj, basis, r, enter)
            pivots += 1

    # Phase 2: true objective; artificial columns are kept (their reduced
    # costs carry the client-row duals) but barred from entering.
    obj = [zero] * (ncols + 1)
    for i in range(n):
        obj[y_col(i)] = Fraction(open_costs[i])
        for j in range(m):
            obj[x_col(i, j)] = Fraction(dist[i][j])
    for r, b in enumerate(basis):
        if obj[b]:
            factor = obj[b]
            for k, v in enumerate(rows[r]):
                if v:
                    obj[k] -= factor * v
    banned = frozenset(a_col(j) for j in range(m))
    pivots = _bland_loop(rows, obj, basis, banned, pivots)

    values = [zero] * ncols
    for r, b in enumerate(basis):
        values[b] = rows[r][-1]
    x = [[values[x_col(i, j)] for j in range(m)] for i in range(n)]
    y = [values[y_col(i)] for i in range(n)]
    alpha = [-obj[a_col(j)] for j in range(m)]
    beta = [[obj[s_col(i, j)] for j in range(m)] for i in range(n)]
    return SimplexResult(x=x, y=y, objective=-obj[-1], alpha=alpha, beta=beta, pivots=pivots)
