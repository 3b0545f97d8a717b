"""Experiment configuration: a small YAML tree with exhaustive validation.

A config names one game, a list of selection rules, the confidence scaling
(a fixed value or "theoretical"), and the run/trial bookkeeping.  Validation
collects every violation before raising so a bad file is fixed in one pass.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import yaml

from .games import GAME_KINDS, GameSpec
from .solver import ALGORITHM_KINDS, AlgorithmSpec, RunConfig, theoretical_beta
from .space import ConfigurationError

ENV_OUT_DIR = "NASHBENCH_OUT"

_GAME_KEYS = {
    "kind", "n", "noise_variance", "resolution", "lattice_k",
    "integration_resolution", "channels", "customers", "capacity",
    "unit_cost", "budget", "instance_seed", "candidate_cap",
}
_TOP_KEYS = {
    "game", "algorithms", "beta", "horizon", "init_count", "trials",
    "base_seed", "workers", "envelopes", "refit", "fit_search_budget",
    "kernel_family", "center_targets", "fit_noise", "record_timing",
    "out_dir",
}
_DEFAULT_BETA = {"hotelling": 1.0}  # every other game defaults to 2.0


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description."""

    game: GameSpec
    algorithms: tuple = (
        AlgorithmSpec("arise"),
        AlgorithmSpec("arise-global"),
        AlgorithmSpec("prediction"),
        AlgorithmSpec("epsilon-greedy"),
        AlgorithmSpec("sur-lite"),
    )
    beta_mode: str = "practical"  # or "theoretical"
    beta_value: float | None = None  # None: per-game default
    beta_delta: float = 0.05
    horizon: int = 100
    init_count: int = 10
    trials: int = 10
    base_seed: int = 0
    workers: int = 1
    envelopes: bool = True
    refit_every_round_until: int = 25
    refit_period: int = 5
    fit_search_budget: int = 60
    kernel_family: str = "squared-exponential"
    center_targets: bool = True
    fit_noise: bool = False
    record_timing: bool = True
    out_dir: str | None = None

    def resolve_beta(self, domain_size):
        """Concrete confidence scaling for a domain of the given size."""
        if self.beta_mode == "theoretical":
            return theoretical_beta(self.game.n, domain_size, self.horizon,
                                    self.beta_delta)
        if self.beta_value is not None:
            return float(self.beta_value)
        return _DEFAULT_BETA.get(self.game.kind, 2.0)

    def run_config(self, beta):
        return RunConfig(
            horizon=self.horizon,
            init_count=self.init_count,
            beta=beta,
            envelopes=self.envelopes,
            refit_every_round_until=self.refit_every_round_until,
            refit_period=self.refit_period,
            fit_search_budget=self.fit_search_budget,
            kernel_family=self.kernel_family,
            center_targets=self.center_targets,
            fit_noise=self.fit_noise,
            record_timing=self.record_timing,
        )

    def with_overrides(self, **kw):
        return replace(self, **kw)


def _parse_algorithms(raw, problems):
    if raw is None:
        return ExperimentConfig.algorithms
    if isinstance(raw, str):
        raw = [token.strip() for token in raw.split(",") if token.strip()]
    if not isinstance(raw, (list, tuple)) or not raw:
        problems.append("algorithms must be a nonempty list")
        return ExperimentConfig.algorithms
    out = []
    for item in raw:
        if isinstance(item, str):
            item = {"kind": item}
        if not isinstance(item, dict) or "kind" not in item:
            problems.append(f"algorithm entries need a kind, got {item!r}")
            continue
        kind = str(item["kind"]).lower()
        if kind not in ALGORITHM_KINDS:
            problems.append(
                f"unknown algorithm {kind!r}; expected one of {ALGORITHM_KINDS}"
            )
            continue
        extras = set(item) - {"kind", "epsilon", "tau"}
        if extras:
            problems.append(f"unknown algorithm keys {sorted(extras)} for {kind}")
        spec = AlgorithmSpec(
            kind=kind,
            epsilon=float(item.get("epsilon", 0.1)),
            tau=float(item.get("tau", 1.0)),
        )
        try:
            spec.validate()
        except ConfigurationError as err:
            problems.append(str(err))
            continue
        out.append(spec)
    return tuple(out)


def _parse_beta(raw, problems):
    mode, value, delta = "practical", None, 0.05
    if raw is None:
        return mode, value, delta
    if isinstance(raw, str):
        if raw.lower() == "theoretical":
            return "theoretical", None, delta
        try:
            return "practical", float(raw), delta
        except ValueError:
            problems.append(f"beta must be a number or 'theoretical', got {raw!r}")
            return mode, value, delta
    if isinstance(raw, (int, float)):
        if raw < 0:
            problems.append(f"beta must be >= 0, got {raw}")
        return "practical", float(raw), delta
    if isinstance(raw, dict):
        extras = set(raw) - {"mode", "value", "delta"}
        if extras:
            problems.append(f"unknown beta keys {sorted(extras)}")
        mode = str(raw.get("mode", "practical"))
        if mode not in ("practical", "theoretical"):
            problems.append(f"beta mode must be practical or theoretical, got {mode!r}")
        if "value" in raw:
            value = float(raw["value"])
            if value < 0:
                problems.append(f"beta value must be >= 0, got {value}")
        delta = float(raw.get("delta", 0.05))
        if not 0 < delta <= 1:
            problems.append(f"beta delta must lie in (0, 1], got {delta}")
        return mode, value, delta
    problems.append(f"unsupported beta specification {raw!r}")
    return mode, value, delta


def config_from_dict(data, source="<config>"):
    """Build and validate an ExperimentConfig from a parsed mapping."""
    problems = []
    if not isinstance(data, dict):
        raise ConfigurationError(f"{source}: top level must be a mapping")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        problems.append(f"unknown top-level keys {sorted(unknown)}")

    game_raw = data.get("game")
    if game_raw is None:
        problems.append("a game section (or game: <kind>) is required")
        game = None
    else:
        if isinstance(game_raw, str):
            game_raw = {"kind": game_raw}
        if not isinstance(game_raw, dict):
            problems.append(f"game must be a mapping or kind name, got {game_raw!r}")
            game = None
        else:
            extras = set(game_raw) - _GAME_KEYS
            if extras:
                problems.append(f"unknown game keys {sorted(extras)}")
            kind = str(game_raw.get("kind", "")).lower()
            kwargs = {k: game_raw[k] for k in _GAME_KEYS & set(game_raw) if k != "kind"}
            try:
                game = GameSpec(kind=kind, **kwargs)
                game.validate()
            except (ConfigurationError, TypeError) as err:
                problems.append(str(err))
                game = None

    algorithms = _parse_algorithms(data.get("algorithms"), problems)
    beta_mode, beta_value, beta_delta = _parse_beta(data.get("beta"), problems)

    refit = data.get("refit") or {}
    if not isinstance(refit, dict):
        problems.append(f"refit must be a mapping, got {refit!r}")
        refit = {}
    extras = set(refit) - {"every_round_until", "period"}
    if extras:
        problems.append(f"unknown refit keys {sorted(extras)}")

    def _int(key, default, minimum=None):
        v = data.get(key, default)
        try:
            v = int(v)
        except (TypeError, ValueError):
            problems.append(f"{key} must be an integer, got {data.get(key)!r}")
            return default
        if minimum is not None and v < minimum:
            problems.append(f"{key} must be >= {minimum}, got {v}")
        return v

    horizon = _int("horizon", 100, 1)
    init_count = _int("init_count", 10, 1)
    trials = _int("trials", 10, 1)
    base_seed = _int("base_seed", 0)
    workers = _int("workers", 1, 1)
    fit_search_budget = _int("fit_search_budget", 60, 0)
    refit_until = refit.get("every_round_until", 25)
    refit_period = refit.get("period", 5)
    try:
        refit_until = int(refit_until)
        refit_period = int(refit_period)
        if refit_period < 1:
            problems.append(f"refit period must be >= 1, got {refit_period}")
    except (TypeError, ValueError):
        problems.append("refit entries must be integers")
        refit_until, refit_period = 25, 5

    kernel_family = str(data.get("kernel_family", "squared-exponential"))
    if kernel_family not in ("squared-exponential", "matern52"):
        problems.append(f"kernel_family must be squared-exponential or matern52, "
                        f"got {kernel_family!r}")

    out_dir = data.get("out_dir")
    if out_dir is not None:
        out_dir = str(out_dir)

    if problems:
        raise ConfigurationError(f"{source}: " + "; ".join(problems))

    return ExperimentConfig(
        game=game,
        algorithms=algorithms,
        beta_mode=beta_mode,
        beta_value=beta_value,
        beta_delta=beta_delta,
        horizon=horizon,
        init_count=init_count,
        trials=trials,
        base_seed=base_seed,
        workers=workers,
        envelopes=bool(data.get("envelopes", True)),
        refit_every_round_until=refit_until,
        refit_period=refit_period,
        fit_search_budget=fit_search_budget,
        kernel_family=kernel_family,
        center_targets=bool(data.get("center_targets", True)),
        fit_noise=bool(data.get("fit_noise", False)),
        record_timing=bool(data.get("record_timing", True)),
        out_dir=out_dir,
    )


def load_config(path):
    """Parse and validate a YAML experiment config file."""
    try:
        with open(path, "r") as fh:
            data = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}")
    except yaml.YAMLError as err:
        raise ConfigurationError(f"{path}: not parseable as YAML: {err}")
    if data is None:
        raise ConfigurationError(f"{path}: config file is empty")
    return config_from_dict(data, source=str(path))
