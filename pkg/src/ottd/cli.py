"""Command-line front end.

Exit codes: 0 on success, 1 on usage or validation errors (nothing is
written), 2 when a run fails or a self-test check does not pass.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from . import config as cfgmod
from .errors import ConfigError

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _common(p: argparse.ArgumentParser, out_required: bool = True) -> None:
    p.add_argument("--config", help="TOML config file or a manifest.json from an earlier run")
    p.add_argument("--out", required=out_required, help="output directory")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key (repeatable)")
    p.add_argument("--threads", type=int, default=None, help="worker processes (default: all cores)")
    p.add_argument("--seed-count", type=int, default=None, help="shorthand for experiment.n_seeds")
    p.add_argument("--episodes", type=int, default=None, help="shorthand for experiment.n_episodes")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ottd", description="OT-guided tabular TD learning experiments")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    _common(sub.add_parser("run", help="run one experiment and write CSV outputs"))
    _common(sub.add_parser("sweep-beta", help="repeat an experiment for every beta in sweep.betas"))
    p = sub.add_parser("check-theorem1", help="compare unsafe stationary mass of plain and penalized policies")
    p.add_argument("--mdp", help="ExplicitMDP JSON (default: built-in five-state risky ring)")
    p.add_argument("--snapshot", help="(Q, U, epsilon, beta) JSON (default: matching built-in snapshot)")
    p.add_argument("--beta", type=float, default=None, help="override the snapshot's beta")
    p.add_argument("--epsilon", type=float, default=None, help="override the snapshot's epsilon")
    _common(sub.add_parser("export-layout", help="write the environment layout as JSON"))
    sub.add_parser("selftest", help="run the built-in oracle and invariant checks")
    return parser


def _resolve(args) -> dict:
    overrides = list(args.overrides)
    if args.seed_count is not None:
        overrides.append(f"experiment.n_seeds={args.seed_count}")
    if args.episodes is not None:
        overrides.append(f"experiment.n_episodes={args.episodes}")
    if args.threads is not None and args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    return cfgmod.resolve(args.config, overrides)


def _threads(args) -> int:
    from .harness import default_threads

    return args.threads if args.threads is not None else default_threads()


def _cmd_run(args) -> int:
    from .harness import run_experiment, summarize, write_outputs

    flat = _resolve(args)
    exp = cfgmod.to_experiment(flat)
    metrics = run_experiment(exp, _threads(args))
    write_outputs(metrics, args.out, {"command": "run", "config": cfgmod.from_experiment(exp, flat["sweep.betas"])})
    for row in summarize(metrics):
        print(f"{row.agent:14s} mean_return={row.mean_return:.3f} std_return={row.std_return:.3f} "
              f"mean_failures={row.mean_failures:.2f}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    from .harness import beta_sweep, summarize, write_outputs

    flat = _resolve(args)
    exp = cfgmod.to_experiment(flat)
    betas = flat["sweep.betas"]
    if not betas:
        raise ConfigError("sweep.betas is empty")
    results = beta_sweep(exp, betas, _threads(args))
    out = Path(args.out)
    rows = []
    for beta, metrics in results.items():
        sub_cfg = cfgmod.with_beta(exp, beta)
        write_outputs(metrics, out / f"beta_{beta:g}",
                      {"command": "run", "config": cfgmod.from_experiment(sub_cfg, betas)})
        for row in summarize(metrics):
            rows.append([repr(float(beta)), row.agent, repr(row.mean_return), repr(row.std_return),
                         repr(row.mean_failures)])
            print(f"beta={beta:<6g} {row.agent:14s} mean_return={row.mean_return:.3f} "
                  f"mean_failures={row.mean_failures:.2f}")
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["beta", "agent", "mean_return", "std_return", "mean_failures"])
        w.writerows(rows)
    return EXIT_OK


def _cmd_theorem(args) -> int:
    from .chain_analysis import ExplicitMDP, Snapshot, risky_ring, risky_ring_snapshot, theorem1_ratio

    try:
        mdp = ExplicitMDP.load(args.mdp) if args.mdp else risky_ring()
        snap = Snapshot.load(args.snapshot) if args.snapshot else risky_ring_snapshot()
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"cannot load inputs: {exc}") from exc
    beta = snap.beta if args.beta is None else args.beta
    eps = snap.epsilon if args.epsilon is None else args.epsilon
    if beta < 0 or not 0 <= eps <= 1:
        raise ConfigError("need beta >= 0 and epsilon in [0, 1]")
    if snap.q.shape != (mdp.n_states, mdp.n_actions) or snap.u.shape != snap.q.shape:
        raise ConfigError(f"snapshot tables must have shape {(mdp.n_states, mdp.n_actions)}")
    c_hat, mass_base, mass_ot = theorem1_ratio(mdp, snap.q, snap.u, eps, beta)
    print(f"c_hat={c_hat!r}")
    print(f"mass_base={mass_base!r}")
    print(f"mass_ot={mass_ot!r}")
    return EXIT_OK


def _cmd_export(args) -> int:
    from .envs import make_env

    flat = _resolve(args)
    exp = cfgmod.to_experiment(flat)
    env = make_env(exp.env_name, exp.scenario, exp.layout_seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "layout.json"
    env.export_layout(path)
    print(path)
    return EXIT_OK


def _cmd_selftest(args) -> int:
    from .selftest import run_checks

    results = run_checks()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_RUNTIME


COMMANDS = {
    "run": _cmd_run,
    "sweep-beta": _cmd_sweep,
    "check-theorem1": _cmd_theorem,
    "export-layout": _cmd_export,
    "selftest": _cmd_selftest,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_INVALID
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
