"""Particle transitions between tempered measures: multinomial resampling and
the optimal-transport ensemble transform.

The transport plan couples the weighted empirical measure (row marginals) with
the uniform one (column marginals = 1/J) under squared-Euclidean cost, solved
exactly by a transportation simplex on the bipartite spanning-tree basis.
Entering arcs are chosen by the most negative reduced cost with lowest-index
tie-breaking, falling back to Bland's rule if degenerate pivots stall, so runs
are deterministic and termination is guaranteed.
"""

import numpy as np

from .errors import ContractViolation, DimensionError, NumericalError
from .fields import GridField
from .permeability import (
    N_GEOM,
    ChannelGeometry,
    P1Parameter,
    P2Parameter,
    Parameter,
)

_MARGINAL_TOL = 1e-9


def multinomial_resample(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """J ancestor indices drawn i.i.d. according to the weights."""
    weights = np.asarray(weights, dtype=float)
    p = weights / weights.sum()
    return rng.choice(weights.size, size=weights.size, replace=True, p=p)


def flatten(u: Parameter) -> np.ndarray:
    """Parameter as one coordinate vector: (d1..d5, u1, u2) for the channel model."""
    if isinstance(u, P1Parameter):
        return u.logk.values.copy()
    return np.concatenate([u.geom.as_array(), u.logk_in.values, u.logk_out.values])


def unflatten(vec: np.ndarray, template: Parameter) -> Parameter:
    vec = np.asarray(vec, dtype=float)
    if isinstance(template, P1Parameter):
        if vec.size != template.grid.n_cells:
            raise DimensionError(f"expected {template.grid.n_cells} values, got {vec.size}")
        return P1Parameter(GridField(template.grid, vec.copy()))
    n = template.grid.n_cells
    if vec.size != N_GEOM + 2 * n:
        raise DimensionError(f"expected {N_GEOM + 2 * n} values, got {vec.size}")
    geom = ChannelGeometry.from_array(vec[:N_GEOM])
    u1 = GridField(template.grid, vec[N_GEOM : N_GEOM + n].copy())
    u2 = GridField(template.grid, vec[N_GEOM + n :].copy())
    return P2Parameter(geom, u1, u2)


def cost_matrix(particles_flat: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, symmetric with a zero diagonal."""
    u = np.asarray(particles_flat, dtype=float)
    sq = np.sum(u**2, axis=1)
    d = sq[:, None] + sq[None, :] - 2.0 * (u @ u.T)
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)
    return np.maximum(d, 0.0)


def transform_ensemble(particles_flat: np.ndarray, plan: np.ndarray) -> np.ndarray:
    """Deterministic resampling: each new particle is the plan-weighted average
    of the old ones, u_hat_j = sum_i (J T_ij) u_i."""
    u = np.asarray(particles_flat, dtype=float)
    if plan.shape != (u.shape[0], u.shape[0]):
        raise DimensionError(f"plan shape {plan.shape} does not match {u.shape[0]} particles")
    return (u.shape[0] * plan).T @ u


def solve_transport(cost: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Exact optimal plan between the weighted and uniform empirical measures."""
    cost = np.asarray(cost, dtype=float)
    weights = np.asarray(weights, dtype=float)
    j = weights.size
    if cost.shape != (j, j):
        raise DimensionError(f"cost is {cost.shape}, expected ({j}, {j})")
    if np.any(weights < -1e-12) or abs(weights.sum() - 1.0) > _MARGINAL_TOL:
        raise ContractViolation("weights must be nonnegative and sum to 1")
    demand = np.full(j, 1.0 / j)
    return _transportation_simplex(cost, np.maximum(weights, 0.0), demand)


def _northwest_corner(supply: np.ndarray, demand: np.ndarray):
    """Initial basic feasible solution with exactly m + n - 1 arcs."""
    m, n = supply.size, demand.size
    ra, rb = supply.copy(), demand.copy()
    arc_i, arc_j, arc_f = [], [], []
    i = j = 0
    while True:
        f = min(ra[i], rb[j])
        arc_i.append(i)
        arc_j.append(j)
        arc_f.append(f)
        ra[i] -= f
        rb[j] -= f
        if i == m - 1 and j == n - 1:
            break
        if i < m - 1 and (ra[i] <= rb[j] or j == n - 1):
            i += 1
        else:
            j += 1
    return arc_i, arc_j, arc_f


def _transportation_simplex(cost, supply, demand, max_pivots=2_000_000):
    m, n = supply.size, demand.size
    scale = max(1.0, float(np.max(np.abs(cost))))
    tol = 1e-12 * scale

    arc_i, arc_j, arc_f = _northwest_corner(supply, demand)
    # basis tree over nodes 0..m-1 (rows) and m..m+n-1 (columns), rooted at 0
    adj = [set() for _ in range(m + n)]
    for a in range(m + n - 1):
        adj[arc_i[a]].add(a)
        adj[m + arc_j[a]].add(a)

    u = np.zeros(m)
    v = np.zeros(n)
    parent = [-1] * (m + n)
    parent_arc = [-1] * (m + n)

    def other_end(a, node):
        return m + arc_j[a] if node == arc_i[a] else arc_i[a]

    # initial duals and parent structure
    stack = [0]
    seen = [False] * (m + n)
    seen[0] = True
    while stack:
        node = stack.pop()
        for a in adj[node]:
            nxt = other_end(a, node)
            if seen[nxt]:
                continue
            seen[nxt] = True
            parent[nxt] = node
            parent_arc[nxt] = a
            if nxt >= m:
                v[nxt - m] = cost[arc_i[a], arc_j[a]] - u[arc_i[a]]
            else:
                u[nxt] = cost[arc_i[a], arc_j[a]] - v[arc_j[a]]
            stack.append(nxt)

    reduced = np.empty_like(cost)
    bland = False
    degenerate_streak = 0
    for _pivot in range(max_pivots):
        np.subtract(cost, u[:, None], out=reduced)
        np.subtract(reduced, v[None, :], out=reduced)
        if bland:
            mask = reduced.ravel() < -tol
            if not mask.any():
                break
            flat = int(np.argmax(mask))
        else:
            flat = int(np.argmin(reduced))
        rmin = reduced.ravel()[flat]
        if rmin >= -tol:
            break
        ei, ej = divmod(flat, n)

        # cycle: climb from both endpoints to their lowest common ancestor
        anc: dict = {ei: 0}
        node = ei
        while parent[node] != -1:
            anc[parent[node]] = len(anc)
            node = parent[node]
        node = m + ej
        path_b = []
        while node not in anc:
            path_b.append(parent_arc[node])
            node = parent[node]
        path_a = []
        cut_a = anc[node]
        node = ei
        for _ in range(cut_a):
            path_a.append(parent_arc[node])
            node = parent[node]
        path = path_a + path_b[::-1]

        minus = path[0::2]
        theta = min(arc_f[a] for a in minus)
        if bland:
            leave = min(
                (a for a in minus if arc_f[a] <= theta),
                key=lambda a: arc_i[a] * n + arc_j[a],
            )
        else:
            leave = next(a for a in minus if arc_f[a] <= theta)

        for a in minus:
            arc_f[a] -= theta
        for a in path[1::2]:
            arc_f[a] += theta

        # the subtree detached by removing the leaving arc contains exactly one
        # endpoint of the entering arc: the one whose climb met the leaving arc
        b_end, a_end = (ei, m + ej) if leave in path_a else (m + ej, ei)
        li, lj = arc_i[leave], m + arc_j[leave]
        child = li if parent_arc[li] == leave else lj
        adj[li].discard(leave)
        adj[lj].discard(leave)

        # interleaved walk of both components to find the smaller one
        sides = []
        for start in (b_end, a_end):
            sides.append(([start], {start}))
        small = None
        idx = [0, 0]
        while small is None:
            for s in (0, 1):
                frontier, visited = sides[s]
                if idx[s] >= len(frontier):
                    small = s
                    break
                node = frontier[idx[s]]
                idx[s] += 1
                for a in adj[node]:
                    nxt = other_end(a, node)
                    if nxt not in visited:
                        visited.add(nxt)
                        frontier.append(nxt)

        # dual update: shifting either side by opposite signs is equivalent
        row_shift, col_shift = (rmin, -rmin) if b_end < m else (-rmin, rmin)
        if small == 1:
            row_shift, col_shift = -row_shift, -col_shift
        for node in sides[small][0]:
            if node >= m:
                v[node - m] += col_shift
            else:
                u[node] += row_shift

        # re-root the detached subtree at b_end: reverse the chain up to the
        # old sub-root, then hang it off a_end through the entering arc
        node, prev_parent, prev_arc = b_end, a_end, leave
        while True:
            old_parent, old_arc = parent[node], parent_arc[node]
            parent[node] = prev_parent
            parent_arc[node] = prev_arc
            if node == child:
                break
            prev_parent, prev_arc, node = node, old_arc, old_parent

        arc_i[leave], arc_j[leave], arc_f[leave] = ei, ej, theta
        adj[ei].add(leave)
        adj[m + ej].add(leave)

        if theta <= tol:
            degenerate_streak += 1
            if degenerate_streak > 3 * (m + n):
                bland = True
        else:
            degenerate_streak = 0
    else:
        raise NumericalError("transportation simplex exceeded the pivot cap")

    plan = np.zeros((m, n))
    plan[arc_i, arc_j] = np.maximum(arc_f, 0.0)
    return plan


def transport_cost(cost: np.ndarray, plan: np.ndarray) -> float:
    return float(np.sum(cost * plan))


def independent_coupling_cost(cost: np.ndarray, weights: np.ndarray) -> float:
    """Cost of the feasible product coupling T_ij = W_i / J, an optimality bound."""
    j = weights.size
    return float(weights @ cost @ np.full(j, 1.0 / j))
