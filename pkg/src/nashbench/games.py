"""Benchmark games with exact utility oracles and noisy query access.

Each game provides a finite joint strategy space plus exact per-agent
utilities for any joint candidate.  The exact oracle is what experiments are
scored against; the solver itself only ever sees noisy queries.

Games
-----
Saddle
    Two agents on [0, 1].  Agent 1 gets (x2-1/2)^2 - (x1-1/2)^2 and agent 2
    the same with roles swapped, so each wants its own coordinate at 1/2: a
    saddle-shaped game with the equilibrium at the center.
RPS
    Two agents mixing over {rock, paper, scissors} on a simplex lattice with
    the usual cyclic win/lose payoffs; the uniform mix is the equilibrium.
Hotelling
    n firms each pick a location in the unit square; a firm's utility is the
    area of the region of the square nearer to it than to any rival (ties
    split equally).  Areas are computed by midpoint-grid integration.
Budget
    n advertisers allocate integer budget units across channels; each
    customer is won by the first advertiser to activate it, averaged exactly
    over all orderings of the advertisers.
TableGame
    Explicit per-agent utility tables, mainly for small synthetic games in
    tests and demos.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .space import (
    ConfigurationError,
    DEFAULT_CANDIDATE_CAP,
    JointSpace,
    budget_vectors,
    simplex_lattice,
    unit_grid,
)

GAME_KINDS = ("saddle", "rps", "hotelling", "budget")


@dataclass(frozen=True)
class GameSpec:
    """Declarative description of a benchmark game instance.

    Only the fields relevant to `kind` are consulted:

    * saddle: resolution (points per axis on [0, 1], default 21)
    * rps: lattice_k (simplex denominator, must be divisible by 3 so the
      uniform mix lies on the lattice)
    * hotelling: resolution (per-axis grid for firm locations, default 11)
      and integration_resolution (midpoint grid used for the area integrals)
    * budget: channels, customers, capacity, unit_cost, budget and
      instance_seed (activation probabilities are drawn U[0, 0.2] from the
      seed, so an instance is reproducible from its spec alone)
    """

    kind: str
    n: int = 2
    noise_variance: float = 0.01
    resolution: int | None = None
    lattice_k: int = 6
    integration_resolution: int = 201
    channels: int = 4
    customers: int = 12
    capacity: int = 2
    unit_cost: float = 1.0
    budget: float = 3.0
    instance_seed: int = 7
    candidate_cap: int = DEFAULT_CANDIDATE_CAP

    def __post_init__(self):
        # per-kind grid default: a 21-point axis for the saddle, 11 per firm
        # coordinate for the location game (whose joint space is 4-D)
        if self.resolution is None:
            object.__setattr__(
                self, "resolution", 11 if self.kind == "hotelling" else 21
            )

    def validate(self):
        problems = []
        if self.kind not in GAME_KINDS:
            problems.append(f"unknown game kind {self.kind!r}; expected one of {GAME_KINDS}")
        if self.noise_variance < 0:
            problems.append(f"noise_variance must be >= 0, got {self.noise_variance}")
        if self.kind in ("saddle", "rps") and self.n != 2:
            problems.append(f"{self.kind} is a two-agent game, got n={self.n}")
        if self.kind == "hotelling" and self.n < 2:
            problems.append(f"hotelling needs n >= 2, got n={self.n}")
        if self.kind == "budget" and not (2 <= self.n <= 4):
            problems.append(
                f"budget supports 2 <= n <= 4 (exact ordering average), got n={self.n}"
            )
        if self.kind in ("saddle", "hotelling") and self.resolution < 2:
            problems.append(f"resolution must be >= 2, got {self.resolution}")
        if self.kind == "rps" and self.lattice_k % 3 != 0:
            problems.append(
                f"rps lattice_k must be divisible by 3 so the uniform mix is a "
                f"candidate, got {self.lattice_k}"
            )
        if self.kind == "hotelling" and self.integration_resolution < 2:
            problems.append(
                f"integration_resolution must be >= 2, got {self.integration_resolution}"
            )
        if problems:
            raise ConfigurationError("; ".join(problems))
        return self


class GameOracle:
    """A game instance: joint space, exact utilities, and noisy queries.

    Subclasses implement `utilities_batch`.  Everything else (best-response
    gains via slice maximization, the equilibrium loss, epsilon-equilibrium
    tests) is generic.  Instances are immutable after construction apart from
    internal caches, and `query` draws its noise from the caller's generator.
    """

    def __init__(self, spec, space):
        self.spec = spec
        self.space = space
        self._slice_cache = {}

    @property
    def n(self):
        return self.space.n_agents

    # -- exact utilities -------------------------------------------------

    def utilities_batch(self, cids):
        """Exact utilities for candidate ids `cids`; returns (len(cids), n)."""
        raise NotImplementedError

    def exact_utilities(self, cid):
        """Exact utility vector (one entry per agent) of a joint candidate."""
        return self.utilities_batch(np.asarray([cid], dtype=np.int64))[0]

    def slice_utilities(self, agent, row):
        """Agent's exact utilities across slice `row`, ordered by its own
        candidate index.  Cached: slices repeat heavily during a run."""
        key = (agent, int(row))
        got = self._slice_cache.get(key)
        if got is None:
            members = self.space.slice_rows[agent][row]
            got = self.utilities_batch(members)[:, agent].copy()
            self._slice_cache[key] = got
        return got

    # -- noisy access ----------------------------------------------------

    def query(self, cid, rng):
        """One noisy utility observation per agent at the given candidate."""
        exact = self.exact_utilities(cid)
        noise = rng.normal(0.0, np.sqrt(self.spec.noise_variance), size=self.n)
        return exact + noise

    # -- equilibrium measures ---------------------------------------------

    def best_response_gain(self, agent, cid):
        """How much the agent could gain by unilaterally switching strategy."""
        row = self.space.slice_of[agent][cid]
        vals = self.slice_utilities(agent, row)
        own = self.space.agent_index[agent][cid]
        return float(vals.max() - vals[own])

    def exact_loss(self, cid):
        """Summed best-response gains; zero exactly at equilibria."""
        return float(sum(self.best_response_gain(i, cid) for i in range(self.n)))

    def is_eps_ne(self, cid, eps):
        """True when no agent can gain more than `eps` by deviating."""
        return max(self.best_response_gain(i, cid) for i in range(self.n)) <= eps

    def known_ne_id(self):
        """Candidate id of a known equilibrium, or None when the game has no
        closed-form equilibrium on this discretization."""
        return None


class SaddleGame(GameOracle):
    """Two-agent saddle game on [0, 1]^2."""

    def __init__(self, spec):
        spec.validate()
        grid = unit_grid(spec.resolution, 1)
        space = JointSpace([grid, grid], cap=spec.candidate_cap)
        super().__init__(spec, space)

    def utilities_batch(self, cids):
        cids = np.asarray(cids, dtype=np.int64)
        x1 = self.space.X[cids, 0]
        x2 = self.space.X[cids, 1]
        u1 = (x2 - 0.5) ** 2 - (x1 - 0.5) ** 2
        return np.stack([u1, -u1], axis=1)

    def known_ne_id(self):
        # The center is on the grid only for odd resolutions.
        if self.spec.resolution % 2 == 1:
            return self.space.locate([0.5, 0.5])
        return None


class RpsGame(GameOracle):
    """Rock-paper-scissors over mixed strategies on a simplex lattice."""

    def __init__(self, spec):
        spec.validate()
        lattice = simplex_lattice(spec.lattice_k)
        space = JointSpace([lattice, lattice], cap=spec.candidate_cap)
        super().__init__(spec, space)

    def utilities_batch(self, cids):
        cids = np.asarray(cids, dtype=np.int64)
        a = self.space.X[cids, 0:3]  # agent 1 weights (rock, paper, scissors)
        b = self.space.X[cids, 3:6]
        u1 = (
            (a[:, 1] - a[:, 2]) * b[:, 0]
            + (a[:, 2] - a[:, 0]) * b[:, 1]
            + (a[:, 0] - a[:, 1]) * b[:, 2]
        )
        return np.stack([u1, -u1], axis=1)

    def known_ne_id(self):
        third = np.full(6, 1.0 / 3.0)
        try:
            return self.space.locate(third)
        except KeyError:
            return None


class HotellingGame(GameOracle):
    """Location competition on the unit square with grid-integrated areas.

    Every firm chooses from the same location grid.  Squared distances from
    each grid location to every integration midpoint are precomputed once;
    per-candidate utilities and whole-slice utility vectors are then pure
    comparison work.  Tie handling is exact: midpoints equidistant from
    several nearest firms are split equally among them.
    """

    def __init__(self, spec):
        spec.validate()
        locs = unit_grid(spec.resolution, 2)
        space = JointSpace([locs] * spec.n, cap=spec.candidate_cap)
        super().__init__(spec, space)
        m = spec.integration_resolution
        axis = (np.arange(m) + 0.5) / m
        px, py = np.meshgrid(axis, axis, indexing="ij")
        pts = np.stack([px.ravel(), py.ravel()], axis=1)  # (m*m, 2) midpoints
        diff = locs[:, None, :] - pts[None, :, :]
        self._d2 = (diff**2).sum(axis=2)  # (n_locations, m*m)
        self._n_pts = pts.shape[0]
        self._cache = {}

    def _utilities_one(self, cid):
        got = self._cache.get(int(cid))
        if got is not None:
            return got
        rows = self._d2[[self.space.agent_index[i][cid] for i in range(self.n)]]
        dmin = rows.min(axis=0)
        ties = rows == dmin
        share = ties / ties.sum(axis=0)
        u = share.sum(axis=1) / self._n_pts
        self._cache[int(cid)] = u
        return u

    def utilities_batch(self, cids):
        cids = np.asarray(cids, dtype=np.int64)
        return np.stack([self._utilities_one(c) for c in cids], axis=0)

    def slice_utilities(self, agent, row):
        key = (agent, int(row))
        got = self._slice_cache.get(key)
        if got is not None:
            return got
        members = self.space.slice_rows[agent][row]
        anchor = members[0]
        others = [j for j in range(self.n) if j != agent]
        opp = self._d2[[self.space.agent_index[j][anchor] for j in others]]
        omin = opp.min(axis=0)
        ocnt = (opp == omin).sum(axis=0)
        mine = self._d2  # all possible own locations at once
        share = (mine < omin) + (mine == omin) / (1.0 + ocnt)
        got = share.sum(axis=1) / self._n_pts
        self._slice_cache[key] = got
        return got

    def known_ne_id(self):
        # With two firms and the center on the grid, co-locating at the
        # center leaves no profitable deviation (any line through the square
        # leaves the far side with area < 1/2).
        if self.n == 2 and self.spec.resolution % 2 == 1:
            return self.space.locate([0.5, 0.5, 0.5, 0.5])
        return None


class BudgetGame(GameOracle):
    """Budgeted channel-allocation race for customers.

    Advertiser i activates customer z with probability
    1 - prod_s (1 - p[s, z])**x_i[s]; a customer is claimed by the first
    advertiser (in a uniformly random ordering) that activates it, and the
    utility is the exact average of claimed customers over all orderings.
    """

    def __init__(self, spec, activation=None):
        spec.validate()
        caps = np.full(spec.channels, spec.capacity, dtype=int)
        costs = np.full(spec.channels, spec.unit_cost, dtype=float)
        vectors = budget_vectors(caps, costs, spec.budget)
        space = JointSpace([vectors] * spec.n, cap=spec.candidate_cap)
        super().__init__(spec, space)
        if activation is None:
            inst = np.random.default_rng(spec.instance_seed)
            activation = inst.uniform(0.0, 0.2, size=(spec.channels, spec.customers))
        else:
            activation = np.asarray(activation, dtype=float)
            if activation.shape != (spec.channels, spec.customers):
                raise ConfigurationError(
                    f"activation matrix must be (channels, customers) = "
                    f"({spec.channels}, {spec.customers}), got {activation.shape}"
                )
        if np.any(activation < 0) or np.any(activation > 1):
            raise ConfigurationError("activation probabilities must lie in [0, 1]")
        self.activation = activation
        # Per-strategy activation probability for every customer: the same
        # table serves every agent because all agents share the vector set.
        with np.errstate(divide="ignore"):
            log_miss = np.log1p(-activation)  # log(1 - p)
        # A certain activation (p == 1) gives log 0; a huge negative finite
        # stand-in keeps 0 * log_miss == 0 for zero allocations.
        log_miss = np.maximum(log_miss, -1e9)
        expo = self.space.per_agent[0] @ log_miss  # (n_vectors, customers)
        self._p_hit = 1.0 - np.exp(expo)
        self._orderings = list(itertools.permutations(range(spec.n)))

    def utilities_batch(self, cids):
        cids = np.asarray(cids, dtype=np.int64)
        n = self.n
        # hit[k, i, z]: candidate k, agent i activates customer z
        hit = np.stack(
            [self._p_hit[self.space.agent_index[i][cids]] for i in range(n)], axis=1
        )
        miss = 1.0 - hit
        total = np.zeros_like(hit)
        for order in self._orderings:
            ahead = np.ones_like(hit[:, 0, :])
            for i in order:
                total[:, i, :] += hit[:, i, :] * ahead
                ahead = ahead * miss[:, i, :]
        total /= len(self._orderings)
        return total.sum(axis=2)  # customers are additive


class TableGame(GameOracle):
    """Game given by explicit per-agent utility tables.

    `tables` is a list with one n-dimensional array per agent, indexed by the
    per-agent strategy indices.  Coordinates default to a uniform 1-D grid on
    [0, 1] per agent, which is what surrogate models see.
    """

    def __init__(self, tables, noise_variance=0.01, per_agent_coords=None,
                 ne_index=None, cap=DEFAULT_CANDIDATE_CAP):
        tables = [np.asarray(t, dtype=float) for t in tables]
        shape = tables[0].shape
        if len(shape) != len(tables):
            raise ConfigurationError(
                f"need one table axis per agent: {len(tables)} tables, "
                f"tables of rank {len(shape)}"
            )
        for t in tables:
            if t.shape != shape:
                raise ConfigurationError("all utility tables must share one shape")
        if per_agent_coords is None:
            per_agent_coords = [unit_grid(m, 1) if m > 1 else np.zeros((1, 1))
                                for m in shape]
        space = JointSpace(per_agent_coords, cap=cap)
        spec = _TableSpec(n=len(tables), noise_variance=noise_variance)
        super().__init__(spec, space)
        # Row-major candidate ids line up with C-order flattening.
        self._flat = np.stack([t.ravel(order="C") for t in tables], axis=1)
        self._ne_index = ne_index

    def utilities_batch(self, cids):
        return self._flat[np.asarray(cids, dtype=np.int64)]

    def known_ne_id(self):
        return self._ne_index


@dataclass(frozen=True)
class _TableSpec:
    n: int
    noise_variance: float
    kind: str = "table"


def make_oracle(spec):
    """Build the oracle for a GameSpec."""
    spec.validate()
    cls = {
        "saddle": SaddleGame,
        "rps": RpsGame,
        "hotelling": HotellingGame,
        "budget": BudgetGame,
    }[spec.kind]
    return cls(spec)
