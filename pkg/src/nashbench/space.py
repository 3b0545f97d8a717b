"""Finite joint strategy spaces with per-agent slice indexing.

A joint space is the Cartesian product of per-agent candidate sets.  Joint
candidates get dense integer ids in row-major order (agent 0 varies slowest),
and for every agent the space is partitioned into "slices": groups of
candidates that share the opponents' profile and differ only in that agent's
own strategy.  Slice lookups are the workhorse behind best-response gains and
partial-maximum confidence bounds, so they are precomputed as index arrays.
"""

from __future__ import annotations

import itertools

import numpy as np

DEFAULT_CANDIDATE_CAP = 200_000


class ConfigurationError(ValueError):
    """Raised for invalid game or experiment configuration."""


class JointSpace:
    """Enumerated joint strategy set of a finite n-agent game.

    Parameters
    ----------
    per_agent : list of ndarray
        One (m_i, d_i) float array per agent holding its candidate strategies.
    cap : int
        Maximum allowed number of joint candidates; exceeding it raises
        ConfigurationError rather than silently materializing a huge product.
    """

    def __init__(self, per_agent, cap=DEFAULT_CANDIDATE_CAP):
        if not per_agent:
            raise ConfigurationError("per_agent candidate list is empty")
        self.per_agent = [np.atleast_2d(np.asarray(a, dtype=float)) for a in per_agent]
        for i, arr in enumerate(self.per_agent):
            if arr.shape[0] == 0:
                raise ConfigurationError(f"agent {i} has an empty candidate set")
        self.n_agents = len(self.per_agent)
        self.sizes = tuple(arr.shape[0] for arr in self.per_agent)
        self.agent_dims = tuple(arr.shape[1] for arr in self.per_agent)
        total = 1
        for m in self.sizes:
            total *= m
        if total > cap:
            raise ConfigurationError(
                f"joint candidate count {total} exceeds the cap {cap}; "
                "use a coarser per-agent discretization or raise the cap"
            )
        self.n_candidates = total

        # Row-major strides: id = sum_i a_i * stride_i with agent 0 slowest.
        strides = np.empty(self.n_agents, dtype=np.int64)
        acc = 1
        for i in range(self.n_agents - 1, -1, -1):
            strides[i] = acc
            acc *= self.sizes[i]
        self.strides = strides

        ids = np.arange(total, dtype=np.int64)
        # agent_index[i][g] = index of agent i's strategy inside candidate g
        self.agent_index = [
            (ids // strides[i]) % self.sizes[i] for i in range(self.n_agents)
        ]

        # Joint coordinate matrix, one row per candidate.
        dim = sum(self.agent_dims)
        X = np.empty((total, dim), dtype=float)
        off = 0
        for i, arr in enumerate(self.per_agent):
            X[:, off : off + arr.shape[1]] = arr[self.agent_index[i]]
            off += arr.shape[1]
        self.X = X
        self.dim = dim

        # Slice tables.  For agent i, anchors are the candidates with a_i = 0;
        # each anchor generates one slice by stepping through a_i.
        self.slice_rows = []
        self.slice_of = []
        for i in range(self.n_agents):
            anchor_of = ids - self.agent_index[i] * strides[i]
            anchors = np.unique(anchor_of)
            rows = anchors[:, None] + np.arange(self.sizes[i], dtype=np.int64) * strides[i]
            self.slice_rows.append(rows)
            self.slice_of.append(np.searchsorted(anchors, anchor_of))

    def __len__(self):
        return self.n_candidates

    def coords(self, cid):
        """Joint coordinate vector of candidate `cid`."""
        return self.X[cid]

    def agent_block(self, agent):
        """Column slice of X holding the given agent's coordinates."""
        off = sum(self.agent_dims[:agent])
        return slice(off, off + self.agent_dims[agent])

    def slice_members(self, agent, cid):
        """Ids of all candidates sharing `cid`'s opponent profile for `agent`,
        ordered by the agent's own candidate index."""
        return self.slice_rows[agent][self.slice_of[agent][cid]]

    def nearest(self, coords):
        """Id of the candidate closest (Euclidean) to the given joint vector."""
        coords = np.asarray(coords, dtype=float).ravel()
        if coords.shape[0] != self.dim:
            raise ValueError(
                f"expected a joint vector of dimension {self.dim}, got {coords.shape[0]}"
            )
        d2 = ((self.X - coords[None, :]) ** 2).sum(axis=1)
        return int(np.argmin(d2))

    def locate(self, coords, tol=1e-9):
        """Id of the candidate exactly matching `coords` (within `tol`)."""
        cid = self.nearest(coords)
        if not np.allclose(self.X[cid], np.asarray(coords, dtype=float).ravel(),
                           rtol=0.0, atol=tol):
            raise KeyError(f"no candidate at {coords!r}")
        return cid


def unit_grid(resolution, dims):
    """Uniform grid over [0, 1]^dims with `resolution` points per axis."""
    if resolution < 2:
        raise ConfigurationError(f"grid resolution must be >= 2, got {resolution}")
    axis = np.linspace(0.0, 1.0, resolution)
    if dims == 1:
        return axis[:, None]
    prod = itertools.product(*([axis] * dims))
    return np.asarray(list(prod), dtype=float)


def simplex_lattice(denominator):
    """All points of the 2-simplex with coordinates that are multiples of
    1/denominator, ordered lexicographically in the first two weights."""
    k = int(denominator)
    if k < 1:
        raise ConfigurationError(f"simplex lattice denominator must be >= 1, got {k}")
    pts = []
    for a in range(k + 1):
        for b in range(k + 1 - a):
            pts.append((a / k, b / k, (k - a - b) / k))
    return np.asarray(pts, dtype=float)


def budget_vectors(capacities, unit_costs, budget):
    """Integer allocation vectors x with 0 <= x[s] <= capacities[s] and
    dot(unit_costs, x) <= budget, in row-major enumeration order."""
    capacities = np.asarray(capacities, dtype=int)
    unit_costs = np.asarray(unit_costs, dtype=float)
    if np.any(capacities < 0):
        raise ConfigurationError("channel capacities must be nonnegative")
    feasible = []
    for combo in itertools.product(*[range(c + 1) for c in capacities]):
        if float(np.dot(unit_costs, combo)) <= budget + 1e-12:
            feasible.append(combo)
    if not feasible:
        raise ConfigurationError(
            "no feasible allocation vectors: the budget excludes even the zero vector"
        )
    return np.asarray(feasible, dtype=float)
