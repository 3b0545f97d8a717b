"""Gaussian-process surrogates over utility observations.

One `SurrogateModel` holds the noisy observations of a single agent's
utility.  The Gram factorization is maintained incrementally: adding an
observation extends the Cholesky factor by one bordered row instead of
refactorizing, and a `PosteriorCache` keeps per-candidate predictive
quantities for a fixed finite domain up to date in O(t * |domain|) per step.

Numerical policy: the factor is of K + (noise + jitter) I, where jitter is 0
until a factorization actually fails and then escalates from 1e-8 to 1e-4
(relative to the signal variance) before giving up.
"""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy.linalg import solve_triangular
from scipy.optimize import minimize

from .kernels import KernelParams, kernel_diag, kernel_matrix

LOG_LENGTHSCALE_BOUNDS = (math.log(0.01), math.log(10.0))
LOG_SIGNAL_VARIANCE_BOUNDS = (math.log(0.01), math.log(10.0))
LOG_NOISE_VARIANCE_BOUNDS = (math.log(1e-6), math.log(1.0))
_JITTER_LADDER = (0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4)  # relative to signal variance


class ModelFactorizationError(RuntimeError):
    """Gram matrix stayed non-positive-definite through the jitter ladder."""


def _chol_with_jitter(K, noise_variance, signal_variance, start=0.0):
    """Cholesky factor of K + (noise + jitter) I using the escalation ladder.

    Returns (L, jitter_used).  `start` skips ladder levels below a previously
    needed jitter so repeated rebuilds do not churn.
    """
    t = K.shape[0]
    eye = np.eye(t)
    for rel in _JITTER_LADDER:
        if rel < start:
            continue
        try:
            L = np.linalg.cholesky(K + (noise_variance + rel * signal_variance) * eye)
            return L, rel
        except np.linalg.LinAlgError:
            continue
    raise ModelFactorizationError(
        f"Gram matrix of size {t} is not positive definite even with jitter "
        f"{_JITTER_LADDER[-1]} * signal_variance"
    )


class SurrogateModel:
    """GP regression over one agent's utility observations.

    Parameters
    ----------
    dim : int
        Input dimension (the joint candidate vector length).
    params : KernelParams
        Kernel family and hyperparameters; `noise_variance` is the assumed
        observation noise and is held fixed unless a fit explicitly frees it.
    center_targets : bool
        When set, predictions subtract the running target mean before the
        linear solve and add it back afterwards.  Off by default so the
        posterior is the plain textbook formula.
    """

    def __init__(self, dim, params, center_targets=False):
        self.dim = int(dim)
        self._params = params
        self.center_targets = bool(center_targets)
        self._X = np.empty((0, self.dim))
        self._y = np.empty(0)
        self._K = np.empty((0, 0))
        self._L = np.empty((0, 0))
        self._jitter_rel = 0.0
        self._c = None  # cached L^{-1} (y - offset)
        self._last_border = None  # (l, lam) of the most recent bordering step
        self.revision = 0  # bumps on every observation
        self.structure_revision = 0  # bumps when the whole factor is rebuilt

    # -- basic accessors ---------------------------------------------------

    def __len__(self):
        return self._X.shape[0]

    @property
    def inputs(self):
        return self._X

    @property
    def targets(self):
        return self._y

    @property
    def params(self):
        return self._params

    @property
    def jitter(self):
        """Current absolute jitter on the Gram diagonal."""
        return self._jitter_rel * self._params.signal_variance

    def copy(self):
        import copy

        return copy.deepcopy(self)

    # -- internals ----------------------------------------------------------

    def _offset(self):
        if self.center_targets and len(self):
            return float(self._y.mean())
        return 0.0

    def _center_solve(self):
        """L^{-1} (y - offset), cached until the data or factor changes."""
        if self._c is None:
            r = self._y - self._offset()
            self._c = solve_triangular(self._L, r, lower=True) if len(self) else np.empty(0)
        return self._c

    def _rebuild(self, start_jitter=0.0):
        self._L, self._jitter_rel = _chol_with_jitter(
            self._K, self._params.noise_variance, self._params.signal_variance,
            start=start_jitter,
        )
        self._c = None
        self._last_border = None
        self.structure_revision += 1

    # -- observation updates -------------------------------------------------

    def update(self, x, y):
        """Add one observation, extending the factorization by a bordered row."""
        x = np.asarray(x, dtype=float).reshape(1, self.dim)
        t = len(self)
        kxx = float(kernel_diag(self._params, x)[0])
        diag = kxx + self._params.noise_variance + self.jitter
        if t == 0:
            self._X = x.copy()
            self._y = np.asarray([y], dtype=float)
            self._K = np.asarray([[kxx]])
            if diag <= 0:
                self._rebuild()
            else:
                self._L = np.asarray([[math.sqrt(diag)]])
                self._last_border = (np.empty(0), math.sqrt(diag))
        else:
            k_new = kernel_matrix(self._params, self._X, x)[:, 0]
            self._X = np.vstack([self._X, x])
            self._y = np.append(self._y, float(y))
            K = np.empty((t + 1, t + 1))
            K[:t, :t] = self._K
            K[:t, t] = k_new
            K[t, :t] = k_new
            K[t, t] = kxx
            self._K = K
            l = solve_triangular(self._L, k_new, lower=True)
            lam2 = diag - float(l @ l)
            if lam2 <= 1e-12 * diag:
                # Border step lost positive-definiteness: escalate and refactor.
                self._rebuild(start_jitter=max(self._jitter_rel, 1e-8))
            else:
                lam = math.sqrt(lam2)
                L = np.zeros((t + 1, t + 1))
                L[:t, :t] = self._L
                L[t, :t] = l
                L[t, t] = lam
                self._L = L
                self._last_border = (l, lam)
        self._c = None
        self.revision += 1
        return self

    # -- prediction -----------------------------------------------------------

    def posterior_batch(self, X):
        """Posterior mean and variance at each row of X."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        prior = kernel_diag(self._params, X)
        if len(self) == 0:
            return np.zeros(X.shape[0]), prior.copy()
        cross = kernel_matrix(self._params, self._X, X)
        V = solve_triangular(self._L, cross, lower=True)
        mean = V.T @ self._center_solve() + self._offset()
        var = np.maximum(prior - (V**2).sum(axis=0), 0.0)
        return mean, var

    def posterior(self, x):
        """Posterior mean and variance at a single point."""
        mean, var = self.posterior_batch(np.asarray(x, dtype=float).reshape(1, -1))
        return float(mean[0]), float(var[0])

    # -- hyperparameters -------------------------------------------------------

    def set_params(self, params):
        """Swap hyperparameters and refactorize from scratch."""
        if params.noise_variance != self._params.noise_variance and len(self):
            # Allowed, but the Gram diagonal changes wholesale.
            pass
        self._params = params
        if len(self):
            self._K = kernel_matrix(self._params, self._X)
            self._rebuild()
        else:
            self.structure_revision += 1
        return self

    def fit(self, search_budget=60, fit_noise=False):
        """Refit hyperparameters by marginal likelihood; never worsens it."""
        fitted = fit_hyperparams(
            self._X,
            self._y,
            self._params,
            search_budget=search_budget,
            center_targets=self.center_targets,
            fit_noise=fit_noise,
        )
        if fitted is not self._params:
            self.set_params(fitted)
        return self._params

    def nlml(self, params=None):
        """Negative log marginal likelihood of the current data."""
        params = params or self._params
        return _nlml_dense(params, self._X, self._y, self.center_targets)

    # -- diagnostics -----------------------------------------------------------

    def empirical_info_gain(self):
        """Half log-determinant of I + K / noise: the information actually
        carried by the queried set under the current kernel."""
        nv = self._params.noise_variance
        if nv <= 0:
            raise ValueError("empirical information gain requires noise_variance > 0")
        t = len(self)
        if t == 0:
            return 0.0
        sign, logdet = np.linalg.slogdet(np.eye(t) + self._K / nv)
        if sign <= 0:
            raise ModelFactorizationError("I + K/noise lost positive definiteness")
        return 0.5 * float(logdet)


def _nlml_dense(params, X, y, center_targets):
    """Plain NLML evaluation with its own small factorization."""
    t = X.shape[0]
    if t == 0:
        return 0.0
    r = y - (y.mean() if center_targets else 0.0)
    K = kernel_matrix(params, X)
    try:
        L, _ = _chol_with_jitter(K, params.noise_variance, params.signal_variance)
    except ModelFactorizationError:
        return np.inf
    c = solve_triangular(L, r, lower=True)
    return float(0.5 * (c @ c) + np.log(np.diag(L)).sum() + 0.5 * t * math.log(2.0 * math.pi))


def fit_hyperparams(X, y, incumbent, search_budget=60, center_targets=False,
                    fit_noise=False):
    """Marginal-likelihood fit of (lengthscale, signal variance).

    Multi-start derivative-free local search in log space, isotropic
    lengthscale, within fixed box bounds.  The incumbent is always evaluated
    and is returned whenever nothing beats it, so the NLML never worsens; a
    zero budget returns the incumbent unchanged.  Noise variance is held
    fixed unless `fit_noise` is set.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if search_budget <= 0 or X.shape[0] < 2:
        return incumbent

    r = y - (y.mean() if center_targets else 0.0)
    t = X.shape[0]
    # Raw squared distances once; every NLML evaluation rescales them.
    diff = X[:, None, :] - X[None, :, :]
    d2_raw = (diff**2).sum(axis=2)
    log2pi_term = 0.5 * t * math.log(2.0 * math.pi)
    family = incumbent.family
    fixed_nv = incumbent.noise_variance

    lo = np.array([LOG_LENGTHSCALE_BOUNDS[0], LOG_SIGNAL_VARIANCE_BOUNDS[0]])
    hi = np.array([LOG_LENGTHSCALE_BOUNDS[1], LOG_SIGNAL_VARIANCE_BOUNDS[1]])
    if fit_noise:
        lo = np.append(lo, LOG_NOISE_VARIANCE_BOUNDS[0])
        hi = np.append(hi, LOG_NOISE_VARIANCE_BOUNDS[1])

    evaluations = [0]

    def objective(theta):
        evaluations[0] += 1
        theta = np.clip(theta, lo, hi)
        ls = math.exp(theta[0])
        sv = math.exp(theta[1])
        nv = math.exp(theta[2]) if fit_noise else fixed_nv
        d2 = d2_raw / (ls * ls)
        if family == "squared-exponential":
            K = sv * np.exp(-0.5 * d2)
        else:
            u = np.sqrt(5.0 * d2)
            K = sv * (1.0 + u + u**2 / 3.0) * np.exp(-u)
        try:
            L, _ = _chol_with_jitter(K, nv, sv)
        except ModelFactorizationError:
            return np.inf
        c = solve_triangular(L, r, lower=True)
        return float(0.5 * (c @ c) + np.log(np.diag(L)).sum() + log2pi_term)

    inc_ls = float(np.exp(np.log(incumbent.lengthscales).mean()))  # isotropic collapse
    y_var = float(np.clip(r.var(), math.exp(lo[1]), math.exp(hi[1])))
    starts = [
        [inc_ls, incumbent.signal_variance],
        [0.1, 1.0],
        [0.3, y_var],
        [1.0, y_var],
        [3.0, 1.0],
    ]
    thetas = []
    for s in starts:
        th = [math.log(s[0]), math.log(s[1])]
        if fit_noise:
            th.append(math.log(max(fixed_nv, math.exp(lo[2]))))
        thetas.append(np.clip(np.asarray(th), lo, hi))

    scored = []
    for th in thetas:
        if evaluations[0] >= search_budget:
            break
        scored.append((objective(th), tuple(th)))
    incumbent_nlml = scored[0][0]  # the incumbent is always evaluated first
    if not np.isfinite(min(s[0] for s in scored)):
        warnings.warn("hyperparameter search failed to factorize; keeping incumbent")
        return incumbent
    scored.sort(key=lambda s: s[0])

    best_nlml, best_theta = scored[0]
    remaining = search_budget - evaluations[0]
    for _, th in scored[:2]:
        if remaining < 8:
            break
        res = minimize(
            objective,
            np.asarray(th),
            method="Nelder-Mead",
            bounds=list(zip(lo, hi)),
            options={"maxfev": remaining // 2, "xatol": 1e-3, "fatol": 1e-8},
        )
        remaining = search_budget - evaluations[0]
        if res.fun < best_nlml:
            best_nlml, best_theta = float(res.fun), tuple(np.clip(res.x, lo, hi))

    # The incumbent wins all ties: refits must never make the NLML worse.
    if not np.isfinite(best_nlml) or best_nlml >= incumbent_nlml:
        return incumbent
    new_nv = math.exp(best_theta[2]) if fit_noise else fixed_nv
    return KernelParams(
        family=family,
        lengthscales=math.exp(best_theta[0]),
        signal_variance=math.exp(best_theta[1]),
        noise_variance=new_nv,
    )


class PosteriorCache:
    """Incrementally maintained posterior over a fixed candidate matrix.

    After `model.update` the cache absorbs the new observation with one
    triangular-substitution row; after a refit (or jitter escalation) it
    refreshes from scratch.  `stats` returns posterior means and variances
    for every candidate.
    """

    def __init__(self, model, X_all):
        self.X_all = np.asarray(X_all, dtype=float)
        self._V = np.empty((0, self.X_all.shape[0]))
        self._tail = np.zeros(self.X_all.shape[0])
        self._rows = 0
        self._rev = -1
        self._struct = -1
        self.sync(model)

    def _ensure_capacity(self, rows):
        if self._V.shape[0] < rows:
            new_cap = max(16, 2 * self._V.shape[0], rows)
            grown = np.empty((new_cap, self.X_all.shape[0]))
            grown[: self._rows] = self._V[: self._rows]
            self._V = grown

    def refresh(self, model):
        t = len(model)
        self._prior = kernel_diag(model.params, self.X_all)
        if t == 0:
            self._rows = 0
            self._tail = np.zeros(self.X_all.shape[0])
        else:
            cross = kernel_matrix(model.params, model.inputs, self.X_all)
            V = solve_triangular(model._L, cross, lower=True)
            self._ensure_capacity(t)
            self._V[:t] = V
            self._rows = t
            self._tail = (V**2).sum(axis=0)
        self._rev = model.revision
        self._struct = model.structure_revision

    def sync(self, model):
        """Bring the cache up to date with the model's current state."""
        if (
            model.structure_revision != self._struct
            or model.revision - self._rev > 1
            or model.revision < self._rev
            or len(model) != self._rev_rows_guess(model)
        ):
            self.refresh(model)
        elif model.revision == self._rev + 1:
            self._extend(model)

    def _rev_rows_guess(self, model):
        return self._rows + (model.revision - self._rev)

    def _extend(self, model):
        t = len(model)
        l, lam = model._last_border
        x_new = model.inputs[-1][None, :]
        cross_new = kernel_matrix(model.params, x_new, self.X_all)[0]
        self._ensure_capacity(t)
        if t == 1:
            row = cross_new / lam
        else:
            row = (cross_new - l @ self._V[: t - 1]) / lam
        self._V[t - 1] = row
        self._tail = self._tail + row**2
        self._rows = t
        self._rev = model.revision

    def stats(self, model):
        """(means, variances) over the cached candidate matrix."""
        self.sync(model)
        if self._rows == 0:
            return np.zeros(self.X_all.shape[0]), self._prior.copy()
        mean = self._V[: self._rows].T @ model._center_solve() + model._offset()
        var = np.maximum(self._prior - self._tail, 0.0)
        return mean, var
