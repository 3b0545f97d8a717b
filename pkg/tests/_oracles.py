"""Reference implementations used as independent oracles in the tests.

Everything here is written from first principles on purpose: dense linear
solves instead of Cholesky reuse, slice enumeration by coordinate matching
instead of the library's precomputed slice index, and permutation averaging
via itertools.  Slow and obvious beats fast and shared-bug.
"""

import itertools
import math

import numpy as np


# ---------------------------------------------------------------------------
# Gaussian process reference (dense, no factorization reuse)

def kernel_ref(family, X1, X2, lengthscales, signal_variance):
    ls = np.broadcast_to(np.atleast_1d(np.asarray(lengthscales, dtype=float)),
                         (X1.shape[1],))
    A = X1 / ls
    B = X2 / ls
    d2 = ((A[:, None, :] - B[None, :, :]) ** 2).sum(axis=2)
    if family == "squared-exponential":
        return signal_variance * np.exp(-0.5 * d2)
    if family == "matern52":
        u = np.sqrt(np.maximum(5.0 * d2, 0.0))
        return signal_variance * (1.0 + u + u * u / 3.0) * np.exp(-u)
    raise ValueError(family)


def dense_posterior(X_train, y_train, X_test, params, center=False):
    """Posterior mean/variance via one np.linalg.solve per query batch."""
    X_train = np.atleast_2d(np.asarray(X_train, dtype=float))
    X_test = np.atleast_2d(np.asarray(X_test, dtype=float))
    y = np.asarray(y_train, dtype=float)
    fam = params.family
    ls, sv, nv = params.lengthscales, params.signal_variance, params.noise_variance
    if len(y) == 0:
        prior = np.full(X_test.shape[0], sv)
        return np.zeros(X_test.shape[0]), prior
    offset = y.mean() if center else 0.0
    K = kernel_ref(fam, X_train, X_train, ls, sv) + nv * np.eye(len(y))
    Ks = kernel_ref(fam, X_test, X_train, ls, sv)
    alpha = np.linalg.solve(K, y - offset)
    mean = Ks @ alpha + offset
    tmp = np.linalg.solve(K, Ks.T)
    var = sv - np.einsum("ij,ji->i", Ks, tmp)
    return mean, np.maximum(var, 0.0)


def dense_nlml(X, y, params, center=False):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    offset = y.mean() if center else 0.0
    r = y - offset
    K = kernel_ref(params.family, X, X, params.lengthscales,
                   params.signal_variance) + params.noise_variance * np.eye(len(y))
    sign, logdet = np.linalg.slogdet(K)
    assert sign > 0
    return 0.5 * (r @ np.linalg.solve(K, r) + logdet + len(y) * math.log(2 * math.pi))


def info_gain_ref(X, params):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] == 0:
        return 0.0
    K = kernel_ref(params.family, X, X, params.lengthscales, params.signal_variance)
    sign, logdet = np.linalg.slogdet(np.eye(len(X)) + K / params.noise_variance)
    assert sign > 0
    return 0.5 * logdet


def nlml_grid_scan(X, y, noise_variance, family="squared-exponential",
                   lengthscale_grid=None, signal_grid=None, center=False):
    """Best (lengthscale, signal_variance) on a log grid, by dense NLML."""
    from nashbench.kernels import KernelParams

    if lengthscale_grid is None:
        lengthscale_grid = np.geomspace(0.02, 8.0, 30)
    if signal_grid is None:
        signal_grid = np.geomspace(0.02, 8.0, 30)
    best = (math.inf, None, None)
    for ls in lengthscale_grid:
        for sv in signal_grid:
            p = KernelParams(family=family, lengthscales=float(ls),
                             signal_variance=float(sv),
                             noise_variance=noise_variance)
            val = dense_nlml(X, y, p, center=center)
            if val < best[0]:
                best = (val, float(ls), float(sv))
    return best


# ---------------------------------------------------------------------------
# Game-side references (coordinate matching, no slice index)

def slice_ids_by_coords(space, agent, cid):
    """Ids of every joint candidate that shares cid's opponent coordinates."""
    block = space.agent_block(agent)
    lo, hi = block.start, block.stop
    anchor = space.X[cid]
    others = np.ones(len(space), dtype=bool)
    for d in range(space.X.shape[1]):
        if lo <= d < hi:
            continue
        others &= np.isclose(space.X[:, d], anchor[d], rtol=0.0, atol=1e-12)
    return np.nonzero(others)[0]


def brute_best_response_gain(oracle, agent, cid):
    members = slice_ids_by_coords(oracle.space, agent, cid)
    best = max(oracle.exact_utilities(int(m))[agent] for m in members)
    return best - oracle.exact_utilities(cid)[agent]


def brute_exact_loss(oracle, cid):
    return sum(brute_best_response_gain(oracle, i, cid)
               for i in range(oracle.spec.n))


def brute_slice_max(values, space, agent, cid, region_mask=None):
    """Max of `values` over cid's agent slice, optionally region-restricted.

    Returns NaN when the restricted slice is empty, matching the library's
    convention for undefined partial maxima.
    """
    members = slice_ids_by_coords(space, agent, cid)
    if region_mask is not None:
        members = members[region_mask[members]]
    if len(members) == 0:
        return math.nan
    return float(np.max(np.asarray(values)[members]))


def budget_utility_ref(hit_probabilities, agent):
    """Average utility of `agent` over all arrival orders of the advertisers.

    `hit_probabilities[i][z]` is advertiser i's activation probability for
    customer z under the joint allocation being evaluated.
    """
    P = np.asarray(hit_probabilities, dtype=float)
    n, n_customers = P.shape
    total = 0.0
    for order in itertools.permutations(range(n)):
        for z in range(n_customers):
            ahead = 1.0
            for j in order:
                if j == agent:
                    total += P[agent, z] * ahead
                    break
                ahead *= 1.0 - P[j, z]
    return total / math.factorial(n)
