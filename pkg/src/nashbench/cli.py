"""Command-line interface.

Subcommands: `run` (execute an experiment from a YAML config and write
traces), `plot` (convergence figure from a trace directory), `verify`
(re-check invariants and certificates over recorded traces), and `oracle`
(print exact utilities/gains/loss for one joint action).

Exit codes: 0 success, 1 run failure, 2 configuration error,
3 verification failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from .config import ENV_OUT_DIR, _parse_algorithms, load_config
from .games import GAME_KINDS, GameSpec, make_oracle
from .harness import load_traces, run_experiment, summarize, verify_traces, write_traces
from .space import ConfigurationError

EXIT_OK = 0
EXIT_RUN_FAILURE = 1
EXIT_CONFIG_ERROR = 2
EXIT_VERIFY_FAILURE = 3


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="nashbench",
        description="Benchmark harness for confidence-bound equilibrium "
                    "learning on black-box games.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment from a YAML config")
    run_p.add_argument("config", help="path to the experiment YAML")
    run_p.add_argument("--out", "-o", help="output directory for traces "
                       f"(overrides ${ENV_OUT_DIR} and the config)")
    run_p.add_argument("--seed", type=int, help="override base_seed")
    run_p.add_argument("--trials", type=int, help="override trial count")
    run_p.add_argument("--beta", help="confidence scaling: a number, or "
                       "'theoretical'")
    run_p.add_argument("--horizon", type=int, help="override round count")
    run_p.add_argument("--algo", help="comma-separated algorithm kinds "
                       "(overrides the config list)")
    run_p.add_argument("--game", help="override the game kind, keeping other "
                       "game settings")
    run_p.add_argument("--workers", type=int, help="trial thread pool size")

    plot_p = sub.add_parser("plot", help="plot convergence curves from traces")
    plot_p.add_argument("trace_dir", help="directory written by `run`")
    plot_p.add_argument("--out", "-o", required=True,
                        help="output figure path (.svg or .pdf)")
    plot_p.add_argument("--best-so-far", action="store_true",
                        help="plot the running minimum instead of the "
                             "per-round loss")
    plot_p.add_argument("--log", action="store_true",
                        help="logarithmic loss axis")
    plot_p.add_argument("--title", help="figure title")

    verify_p = sub.add_parser("verify", help="re-check invariants and "
                              "certificates over recorded traces")
    verify_p.add_argument("trace_dir", help="directory written by `run`")

    oracle_p = sub.add_parser("oracle", help="print exact utilities, gains, "
                              "and loss at one joint action")
    oracle_p.add_argument("game", choices=sorted(GAME_KINDS),
                          help="benchmark game kind")
    oracle_p.add_argument("--x", help="comma-separated joint coordinates "
                          "(snapped to the nearest candidate); defaults to "
                          "the known equilibrium or candidate 0")
    oracle_p.add_argument("--n", type=int, help="number of agents")
    oracle_p.add_argument("--resolution", type=int,
                          help="per-axis grid resolution")
    oracle_p.add_argument("--lattice-k", type=int,
                          help="simplex lattice denominator")
    oracle_p.add_argument("--instance-seed", type=int,
                          help="instance seed for randomized games")
    oracle_p.add_argument("--eps", type=float,
                          help="also report whether the point is an "
                               "eps-equilibrium")
    return parser


def _apply_run_overrides(config, args):
    overrides = {}
    if args.seed is not None:
        overrides["base_seed"] = args.seed
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.horizon is not None:
        overrides["horizon"] = args.horizon
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.beta is not None:
        if args.beta.strip().lower() == "theoretical":
            overrides["beta_mode"] = "theoretical"
            overrides["beta_value"] = None
        else:
            try:
                overrides["beta_value"] = float(args.beta)
            except ValueError:
                raise ConfigurationError(
                    f"--beta must be a number or 'theoretical', got {args.beta!r}"
                )
            overrides["beta_mode"] = "practical"
    if args.algo is not None:
        problems = []
        algorithms = _parse_algorithms(args.algo, problems)
        if problems:
            raise ConfigurationError("; ".join(problems))
        overrides["algorithms"] = algorithms
    if args.game is not None:
        overrides["game"] = replace(config.game,
                                    kind=args.game.strip().lower()).validate()
    return config.with_overrides(**overrides)


def _resolve_out_dir(args, config):
    if args.out:
        return args.out
    env = os.environ.get(ENV_OUT_DIR)
    if env:
        return env
    if config.out_dir:
        return config.out_dir
    return f"traces-{config.game.kind}"


def _cmd_run(args):
    config = load_config(args.config)
    config = _apply_run_overrides(config, args)
    out_dir = _resolve_out_dir(args, config)
    ts = run_experiment(config)
    written = write_traces(ts, out_dir)
    print(f"wrote {len(written)} files to {out_dir} "
          f"(beta={ts.beta:.6g}, |D|={ts.n_candidates})")
    for label, trial, err in ts.failures:
        last = err.strip().splitlines()[-1]
        print(f"run failed: {label} trial {trial}: {last}", file=sys.stderr)
    if ts.failures:
        return EXIT_RUN_FAILURE
    return EXIT_OK


def _cmd_plot(args):
    loaded = load_traces(args.trace_dir)
    summaries = summarize(loaded)
    title = args.title or loaded.metadata["config"]["game"]["kind"]
    from .plotting import emit_plot

    path = emit_plot(summaries, args.out, best_so_far=args.best_so_far,
                     log_scale=args.log, title=title)
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_verify(args):
    loaded = load_traces(args.trace_dir)
    report = verify_traces(loaded)
    print(report)
    return EXIT_OK if report.ok else EXIT_VERIFY_FAILURE


def _cmd_oracle(args):
    fields = {"kind": args.game}
    if args.n is not None:
        fields["n"] = args.n
    if args.resolution is not None:
        fields["resolution"] = args.resolution
    if args.lattice_k is not None:
        fields["lattice_k"] = args.lattice_k
    if args.instance_seed is not None:
        fields["instance_seed"] = args.instance_seed
    oracle = make_oracle(GameSpec(**fields))
    space = oracle.space

    if args.x is not None:
        try:
            coords = np.array([float(v) for v in args.x.split(",")])
        except ValueError:
            raise ConfigurationError(f"--x must be comma-separated numbers, "
                                     f"got {args.x!r}")
        cid = space.nearest(coords)
    else:
        cid = oracle.known_ne_id()
        if cid is None:
            cid = 0
        cid = int(cid)

    point = space.coords(cid)
    utilities = oracle.exact_utilities(cid)
    gains = [oracle.best_response_gain(i, cid) for i in range(oracle.spec.n)]
    loss = oracle.exact_loss(cid)

    print(f"game: {args.game}  candidates: {len(space)}  dim: {space.dim}")
    print("candidate id:", cid)
    print("joint action:", " ".join(f"{v:.10g}" for v in point))
    for i in range(oracle.spec.n):
        print(f"agent {i}: utility {utilities[i]:.10g}  "
              f"best-response gain {gains[i]:.10g}")
    print(f"exact loss: {loss:.10g}")
    if args.eps is not None:
        verdict = "yes" if oracle.is_eps_ne(cid, args.eps) else "no"
        print(f"eps-equilibrium at eps={args.eps:g}: {verdict}")
    return EXIT_OK


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "plot": _cmd_plot,
        "verify": _cmd_verify,
        "oracle": _cmd_oracle,
    }
    try:
        return handlers[args.command](args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except FileNotFoundError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except Exception as exc:  # pragma: no cover - defensive catch-all
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUN_FAILURE


if __name__ == "__main__":
    sys.exit(main())
