"""Sequential equilibrium search over a finite joint strategy space.

The loop is shared by every selection rule: fit/update one GP surrogate per
agent on the noisy utility observations, form loss confidence bounds over all
candidates, shrink the candidate region of interest (the sublevel set of the
loss lower bound under a data-driven threshold), pick the next query, and
record a trace row.  Selection rules:

arise           widest loss interval inside the region of interest, with
                best-response values restricted to that region;
arise-global    widest loss interval over the whole domain;
prediction      minimizer of a plug-in loss estimate built from posterior
                means (slice moments plus an exploration bonus);
epsilon-greedy  the prediction rule, but with probability epsilon queries
                where the summed posterior deviations are largest;
sur-lite        largest summed posterior variance (pure exploration).

The reported answer is always the region member minimizing the loss lower
bound once all observations are in.
"""

from __future__ import annotations

import math
import time
import warnings as _warnings
from dataclasses import dataclass, field

import numpy as np

from .bounds import EnvelopeState, acquisition, compose_table, u_bounds
from .gp import PosteriorCache, SurrogateModel
from .kernels import KernelParams
from .space import ConfigurationError

ALGORITHM_KINDS = ("arise", "arise-global", "prediction", "epsilon-greedy", "sur-lite")


@dataclass(frozen=True)
class AlgorithmSpec:
    """A selection rule plus its own small knobs."""

    kind: str
    epsilon: float = 0.1
    tau: float = 1.0

    def validate(self):
        if self.kind not in ALGORITHM_KINDS:
            raise ConfigurationError(
                f"unknown algorithm {self.kind!r}; expected one of {ALGORITHM_KINDS}"
            )
        if not 0.0 <= self.epsilon <= 1.0:
            raise ConfigurationError(f"epsilon must be in [0, 1], got {self.epsilon}")
        if self.tau < 0:
            raise ConfigurationError(f"tau must be >= 0, got {self.tau}")
        return self

    @property
    def label(self):
        return self.kind


@dataclass(frozen=True)
class RunConfig:
    """Knobs shared by all selection rules."""

    horizon: int = 100
    init_count: int = 10
    beta: float = 2.0
    envelopes: bool = True
    refit_every_round_until: int = 25
    refit_period: int = 5
    fit_search_budget: int = 60
    kernel_family: str = "squared-exponential"
    initial_lengthscale: float = 0.5
    initial_signal_variance: float = 1.0
    center_targets: bool = True
    fit_noise: bool = False
    record_timing: bool = True
    keep_roi_history: bool = False

    def validate(self):
        problems = []
        if self.horizon < 1:
            problems.append(f"horizon must be >= 1, got {self.horizon}")
        if self.init_count < 1:
            problems.append(f"init_count must be >= 1, got {self.init_count}")
        if self.beta < 0:
            problems.append(f"beta must be >= 0, got {self.beta}")
        if self.refit_period < 1:
            problems.append(f"refit_period must be >= 1, got {self.refit_period}")
        if problems:
            raise ConfigurationError("; ".join(problems))
        return self


@dataclass
class TraceRecord:
    """One solver round as recorded in trace files."""

    iteration: int
    candidate_id: int
    coords: tuple
    f_exact: float
    min_f_exact: float
    roi_size: int
    ci_width: float
    info_gain: tuple
    info_gain_total: float
    beta: float
    wall_ms: float
    notes: str = ""


@dataclass
class RoiState:
    """Active candidate ids plus the per-round bookkeeping of the filter."""

    active: np.ndarray
    sizes: list = field(default_factory=list)
    thresholds: list = field(default_factory=list)
    fallback_rounds: list = field(default_factory=list)


@dataclass
class RunResult:
    algorithm: AlgorithmSpec
    config: RunConfig
    n_agents: int
    noise_variance: float
    beta: float
    init_ids: np.ndarray
    records: list
    roi: RoiState
    roi_history: list
    report_id: int
    report_coords: tuple
    models: list
    alphas: list
    width_chain_ok: list
    warnings: list


def theoretical_beta(n_agents, domain_size, horizon, delta):
    """Confidence scaling 2 * ln(n * |D| * T / delta) for simultaneous
    coverage of every utility bound over the whole run."""
    for name, v in (("n_agents", n_agents), ("domain_size", domain_size),
                    ("horizon", horizon)):
        if int(v) < 1:
            raise ValueError(f"{name} must be a positive integer, got {v}")
    if not 0.0 < delta <= 1.0:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    if delta == 1.0:
        _warnings.warn("delta = 1 is the degenerate boundary; the resulting "
                       "beta carries no coverage guarantee")
    value = 2.0 * math.log(int(n_agents) * int(domain_size) * int(horizon) / delta)
    return float(value)


def update_roi(state, table):
    """Shrink the active set to candidates whose loss lower bound stays under
    min(min ucb_f, 0); empty results fall back to the single most plausible
    member of the previous set (with a logged warning)."""
    if not table.region.all():
        raise ValueError("region updates need bounds composed over the full domain")
    threshold = min(float(table.ucb_f.min()), 0.0)
    keep = state.active[table.lcb_f[state.active] <= threshold]
    fell_back = False
    if keep.size == 0:
        j = int(np.argmin(table.lcb_f[state.active]))
        keep = state.active[j : j + 1]
        fell_back = True
    # Nesting is structural (we filtered the previous active set), but it is
    # load-bearing for the reported answer, so keep a hard check.
    if keep.size > state.active.size or not np.isin(keep, state.active).all():
        raise AssertionError("region update produced a non-nested active set")
    new = RoiState(
        active=keep,
        sizes=state.sizes + [int(keep.size)],
        thresholds=state.thresholds + [threshold],
        fallback_rounds=state.fallback_rounds + ([table.round_index] if fell_back else []),
    )
    return new


def _prediction_scores(means, space, tau):
    """Plug-in loss estimate from posterior means: per agent, the slice mean
    of predicted utilities plus tau times their slice deviation, minus the
    candidate's own predicted utility; the estimate takes the worst agent."""
    n = space.n_agents
    est = np.full(space.n_candidates, -np.inf)
    for i in range(n):
        rows = space.slice_rows[i]
        sliced = means[i][rows]
        mu_v = sliced.mean(axis=1)[space.slice_of[i]]
        sd_v = sliced.std(axis=1)[space.slice_of[i]]
        est = np.maximum(est, mu_v + tau * sd_v - means[i])
    return est


def select_next(algorithm, table_x, roi, means, var, space, rng, table_roi=None):
    """Pick the next query candidate id.

    Returns (candidate_id, alpha_at_selection, notes).  `table_roi` is the
    bounds table recomposed over the active region and is required for the
    'arise' rule.  Ties always resolve to the lowest candidate id.
    """
    notes = []
    kind = algorithm.kind
    if kind == "arise":
        if table_roi is None:
            raise ValueError("the arise rule needs bounds composed over the region")
        ids = roi.active
        alpha = acquisition(table_roi, ids)
        j = int(np.argmax(alpha))
        cid = int(ids[j])
        same_v = bool(
            np.allclose(table_roi.ucb_v[:, ids], table_x.ucb_v[:, ids],
                        rtol=0.0, atol=1e-12)
            and np.allclose(table_roi.lcb_v[:, ids], table_x.lcb_v[:, ids],
                            rtol=0.0, atol=1e-12)
        )
        notes.append(f"v_region_matches_full={int(same_v)}")
        return cid, float(alpha[j]), notes
    if kind == "arise-global":
        alpha = acquisition(table_x)
        cid = int(np.argmax(alpha))
        return cid, float(alpha[cid]), notes
    if kind == "sur-lite":
        cid = int(np.argmax(var.sum(axis=0)))
        return cid, _alpha_at(table_x, cid), notes
    if kind == "epsilon-greedy":
        draw = float(rng.uniform())
        explored = draw < algorithm.epsilon
        notes.append(f"explore_draw={draw:.17g}")
        notes.append(f"explored={int(explored)}")
        if explored:
            cid = int(np.argmax(np.sqrt(var).sum(axis=0)))
        else:
            cid = int(np.argmin(_prediction_scores(means, space, algorithm.tau)))
        return cid, _alpha_at(table_x, cid), notes
    if kind == "prediction":
        cid = int(np.argmin(_prediction_scores(means, space, algorithm.tau)))
        return cid, _alpha_at(table_x, cid), notes
    raise ConfigurationError(f"unknown algorithm kind {kind!r}")


def _alpha_at(table, cid):
    return float(table.ucb_f[cid] - table.lcb_f[cid])


def run(oracle, algorithm, config, rng):
    """Execute one seeded run of a selection rule against a game oracle."""
    algorithm.validate()
    config.validate()
    space = oracle.space
    n = oracle.n
    N = space.n_candidates
    if config.init_count > N:
        raise ConfigurationError(
            f"init_count {config.init_count} exceeds the {N} candidates "
            "(initial queries are drawn without replacement)"
        )
    params0 = KernelParams(
        family=config.kernel_family,
        lengthscales=config.initial_lengthscale,
        signal_variance=config.initial_signal_variance,
        noise_variance=oracle.spec.noise_variance,
    )
    models = [
        SurrogateModel(space.dim, params0, center_targets=config.center_targets)
        for _ in range(n)
    ]

    init_ids = rng.choice(N, size=config.init_count, replace=False).astype(np.int64)
    for cid in init_ids:
        y = oracle.query(int(cid), rng)
        for i in range(n):
            models[i].update(space.X[cid], y[i])
    caches = [PosteriorCache(m, space.X) for m in models]

    envelope = EnvelopeState(enabled=config.envelopes)
    roi = RoiState(active=np.arange(N, dtype=np.int64))
    roi_history = []
    records = []
    alphas = []
    width_chain_ok = []
    run_warnings = []
    min_f = math.inf

    def build_round(t):
        """Posterior stats and full-domain bounds for round t."""
        mean_rows, var_rows = [], []
        for cache, model in zip(caches, models):
            mu, v = cache.stats(model)
            mean_rows.append(mu)
            var_rows.append(v)
        means = np.stack(mean_rows)
        var = np.stack(var_rows)
        lcb_list, ucb_list = [], []
        for i in range(n):
            lo, hi = u_bounds(means[i], var[i], config.beta)
            lcb_list.append(lo)
            ucb_list.append(hi)
        lcb_raw = np.stack(lcb_list)
        ucb_raw = np.stack(ucb_list)
        lcb_u, ucb_u = envelope.intersect(lcb_raw, ucb_raw)
        table = compose_table(lcb_u, ucb_u, space, t, config.beta)
        return means, var, lcb_u, ucb_u, table

    for t in range(1, config.horizon + 1):
        tic = time.perf_counter()
        if t <= config.refit_every_round_until or (
            (t - config.refit_every_round_until) % config.refit_period == 0
        ):
            for m in models:
                m.fit(search_budget=config.fit_search_budget, fit_noise=config.fit_noise)

        means, var, lcb_u, ucb_u, table_x = build_round(t)
        roi = update_roi(roi, table_x)
        if roi.fallback_rounds and roi.fallback_rounds[-1] == t:
            run_warnings.append(f"round {t}: active region emptied; fell back to "
                                "the most plausible previous member")
        if config.keep_roi_history:
            roi_history.append(roi.active.copy())

        table_roi = None
        if algorithm.kind == "arise":
            mask = np.zeros(N, dtype=bool)
            mask[roi.active] = True
            table_roi = compose_table(lcb_u, ucb_u, space, t, config.beta, region=mask)
        cid, alpha_sel, notes = select_next(
            algorithm, table_x, roi, means, var, space, rng, table_roi=table_roi
        )
        if roi.fallback_rounds and roi.fallback_rounds[-1] == t:
            notes.append("roi_fallback=1")

        # Per-round width-chain check at the acquisition argmax: the selected
        # interval is never wider than (n + 1) times the summed utility
        # interval widths there.
        if algorithm.kind in ("arise", "arise-global"):
            rhs = (n + 1) * float((ucb_u[:, cid] - lcb_u[:, cid]).sum())
            ok = alpha_sel <= rhs + 1e-9
            width_chain_ok.append(bool(ok))
            notes.append(f"alpha={alpha_sel:.17g}")
            if not ok:
                notes.append("width_chain_ok=0")
                run_warnings.append(f"round {t}: width-chain inequality violated")
        else:
            width_chain_ok.append(True)
            notes.append(f"alpha={alpha_sel:.17g}")
        alphas.append(alpha_sel)

        y = oracle.query(cid, rng)
        for i in range(n):
            models[i].update(space.X[cid], y[i])

        f_exact = oracle.exact_loss(cid)
        min_f = min(min_f, f_exact)
        gains = tuple(float(m.empirical_info_gain()) for m in models)
        ci_width = float(
            table_x.ucb_f[roi.active].min() - table_x.lcb_f[roi.active].min()
        )
        wall_ms = (time.perf_counter() - tic) * 1000.0 if config.record_timing else 0.0
        records.append(
            TraceRecord(
                iteration=t,
                candidate_id=int(cid),
                coords=tuple(float(c) for c in space.X[cid]),
                f_exact=float(f_exact),
                min_f_exact=float(min_f),
                roi_size=int(roi.active.size),
                ci_width=ci_width,
                info_gain=gains,
                info_gain_total=float(sum(gains)),
                beta=float(config.beta),
                wall_ms=wall_ms,
                notes=";".join(notes),
            )
        )

    # Final refresh with every observation in, then report the region member
    # with the smallest loss lower bound.
    _, _, _, _, final_table = build_round(config.horizon + 1)
    roi = update_roi(roi, final_table)
    if config.keep_roi_history:
        roi_history.append(roi.active.copy())
    report_j = int(np.argmin(final_table.lcb_f[roi.active]))
    report_id = int(roi.active[report_j])

    return RunResult(
        algorithm=algorithm,
        config=config,
        n_agents=n,
        noise_variance=float(oracle.spec.noise_variance),
        beta=float(config.beta),
        init_ids=init_ids,
        records=records,
        roi=roi,
        roi_history=roi_history,
        report_id=report_id,
        report_coords=tuple(float(c) for c in space.X[report_id]),
        models=models,
        alphas=alphas,
        width_chain_ok=width_chain_ok,
        warnings=run_warnings,
    )


def report(result):
    """(candidate id, coords) the run settled on."""
    return result.report_id, result.report_coords


@dataclass
class CertificateReport:
    """Outcome of the end-of-run certificate inequalities."""

    rounds: int
    sum_alpha_sq: float
    bound_alpha_sq: float
    alpha_sq_ok: bool
    final_ci_width: float
    bound_ci_width: float
    ci_width_ok: bool
    cumulative_loss: float
    bound_cumulative: float
    cumulative_ok: bool
    width_chain_violations: int

    @property
    def all_ok(self):
        """The two deterministic inequalities (interval energy and final
        width); the cumulative-loss bound is statistical and reported
        separately."""
        return self.alpha_sq_ok and self.ci_width_ok


def certificate_values(n_agents, noise_variance, beta, alphas, final_ci_width,
                       final_info_gain, losses, width_chain_violations=0):
    """Evaluate the certificate inequalities from per-round scalars."""
    if noise_variance <= 0:
        raise ValueError("certificates require noise_variance > 0")
    rounds = len(alphas)
    if rounds == 0:
        raise ValueError("certificates need at least one completed round")
    c1 = 8.0 / math.log(1.0 + 1.0 / noise_variance)
    grow = (n_agents + 1) ** 2 * c1 * beta * final_info_gain
    sum_alpha_sq = float(np.sum(np.square(alphas)))
    bound_b = math.sqrt(grow / rounds)
    cumulative = float(np.sum(losses))
    bound_c = math.sqrt(rounds * beta * final_info_gain * (n_agents + 1) ** 2 * c1)
    tol = 1e-9
    return CertificateReport(
        rounds=rounds,
        sum_alpha_sq=sum_alpha_sq,
        bound_alpha_sq=grow,
        alpha_sq_ok=sum_alpha_sq <= grow + tol,
        final_ci_width=float(final_ci_width),
        bound_ci_width=bound_b,
        ci_width_ok=final_ci_width <= bound_b + tol,
        cumulative_loss=cumulative,
        bound_cumulative=bound_c,
        cumulative_ok=cumulative <= bound_c + tol,
        width_chain_violations=int(width_chain_violations),
    )


def verify_round_certificates(result):
    """Certificate inequalities for a completed widest-interval global run.

    (a) the summed squared acquisition widths stay under the information
        budget; (b) the final loss-interval width is under the per-round
        average implied by (a); (c) the cumulative exact loss of the queried
        points is under the matching square-root budget.  (a) and (b) follow
        from envelope monotonicity; (c) holds with high probability only.
    """
    if result.algorithm.kind != "arise-global":
        raise ValueError("certificates are defined for 'arise-global' runs")
    if not result.config.envelopes:
        raise ValueError("certificates require the monotone envelope to be on")
    last = result.records[-1]
    return certificate_values(
        result.n_agents,
        result.noise_variance,
        result.beta,
        result.alphas,
        last.ci_width,
        last.info_gain_total,
        [r.f_exact for r in result.records],
        width_chain_violations=sum(1 for ok in result.width_chain_ok if not ok),
    )
