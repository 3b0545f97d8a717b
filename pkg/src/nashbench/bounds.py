"""Confidence bounds on utilities, best-response values, and equilibrium loss.

Everything is computed over the full finite candidate set as flat arrays.
Three levels are chained per round:

u-level   per-agent utility bounds mu +/- sqrt(beta) * sigma;
v-level   per-agent best-response value bounds: the max of the u-level upper
          (resp. lower) bound over the agent's slice restricted to a
          candidate region S;
f-level   loss bounds: upper = sum_i (v_upper_i - u_lower_i), lower =
          sum_i (v_lower_i - u_upper_i).

A monotone envelope optionally intersects each round's u-level interval with
the running historical intersection, which makes all derived bounds (and the
derived sublevel-set regions) monotone over time even across hyperparameter
refits.  v-level entries are NaN where a slice has no member inside S;
consuming such an entry is a logic error, so downstream reductions assert
against it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class BoundsTable:
    """One round's bounds over every joint candidate.

    `lcb_u`/`ucb_u` have shape (n_agents, n_candidates); `lcb_v`/`ucb_v` the
    same with NaN outside the composable region; `lcb_f`/`ucb_f` have shape
    (n_candidates,).  `region` is the boolean membership mask of the set S
    the v-level maxima ranged over (all-true for the full domain).
    """

    round_index: int
    beta: float
    lcb_u: np.ndarray
    ucb_u: np.ndarray
    lcb_v: np.ndarray
    ucb_v: np.ndarray
    lcb_f: np.ndarray
    ucb_f: np.ndarray
    region: np.ndarray


def u_bounds(mean, var, beta):
    """Per-candidate utility confidence bounds from posterior moments."""
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    half = np.sqrt(beta) * np.sqrt(np.maximum(var, 0.0))
    return mean - half, mean + half


def slice_reduce_max(values, space, agent, region=None):
    """Per-candidate max of `values` over the candidate's agent slice ∩ region.

    Entries are constant across a slice by construction; slices with no
    member in `region` come back NaN (undefined).
    """
    rows = space.slice_rows[agent]
    vals = values[rows]
    if region is not None:
        vals = np.where(region[rows], vals, -np.inf)
    red = vals.max(axis=1)
    red = np.where(np.isneginf(red), np.nan, red)
    return red[space.slice_of[agent]]


def v_bounds(lcb_u_i, ucb_u_i, space, agent, region=None):
    """Best-response value bounds for one agent: slice maxima of the u-level
    bounds over the region."""
    lcb_v = slice_reduce_max(lcb_u_i, space, agent, region)
    ucb_v = slice_reduce_max(ucb_u_i, space, agent, region)
    return lcb_v, ucb_v


def f_bounds(lcb_u, ucb_u, lcb_v, ucb_v):
    """Loss bounds from stacked (n_agents, n_candidates) u- and v-bounds."""
    ucb_f = (ucb_v - lcb_u).sum(axis=0)
    lcb_f = (lcb_v - ucb_u).sum(axis=0)
    return lcb_f, ucb_f


def compose_table(lcb_u, ucb_u, space, round_index, beta, region=None):
    """Build the v- and f-levels on top of given u-level bound arrays."""
    n = space.n_agents
    lcb_v = np.empty_like(lcb_u)
    ucb_v = np.empty_like(ucb_u)
    for i in range(n):
        lcb_v[i], ucb_v[i] = v_bounds(lcb_u[i], ucb_u[i], space, i, region)
    lcb_f, ucb_f = f_bounds(lcb_u, ucb_u, lcb_v, ucb_v)
    mask = np.ones(space.n_candidates, dtype=bool) if region is None else region
    return BoundsTable(
        round_index=round_index,
        beta=beta,
        lcb_u=lcb_u,
        ucb_u=ucb_u,
        lcb_v=lcb_v,
        ucb_v=ucb_v,
        lcb_f=lcb_f,
        ucb_f=ucb_f,
        region=mask,
    )


class EnvelopeState:
    """Running intersection of per-round u-level confidence intervals.

    Intersecting each new interval with all previous ones makes the resulting
    bounds monotone (uppers never rise, lowers never fall), which is what the
    sublevel-set region updates rely on.  Disabled state passes bounds through
    untouched.
    """

    def __init__(self, enabled=True):
        self.enabled = bool(enabled)
        self.lcb_u = None
        self.ucb_u = None

    def intersect(self, lcb_u, ucb_u):
        """Intersect the running envelope with new u-level bounds, update the
        stored envelope, and return the tightened arrays."""
        if not self.enabled:
            return lcb_u, ucb_u
        if self.lcb_u is None:
            self.lcb_u = lcb_u.copy()
            self.ucb_u = ucb_u.copy()
        else:
            np.maximum(self.lcb_u, lcb_u, out=self.lcb_u)
            np.minimum(self.ucb_u, ucb_u, out=self.ucb_u)
        return self.lcb_u.copy(), self.ucb_u.copy()


def monotone_envelope(state, table, space):
    """Intersect a table's u-level with the running envelope and recompose.

    Returns a new BoundsTable over the same region; the state advances to
    include this round.
    """
    lcb_u, ucb_u = state.intersect(table.lcb_u, table.ucb_u)
    region = None if table.region.all() else table.region
    return compose_table(lcb_u, ucb_u, space, table.round_index, table.beta, region)


def acquisition(table, candidate_ids=None):
    """Loss-interval width alpha = ucb_f - lcb_f, the search's acquisition.

    With `candidate_ids` given, returns widths for exactly those candidates
    and insists they are defined (a NaN means a v-bound was consumed where
    the slice never met the region: a logic error upstream).
    """
    width = table.ucb_f - table.lcb_f
    if candidate_ids is not None:
        width = width[candidate_ids]
    if np.isnan(width).any():
        raise ValueError("acquisition consumed an undefined (NaN) bound entry")
    return np.maximum(width, 0.0)
