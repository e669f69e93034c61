"""Command-line front door.

Subcommands: ``plan`` (print the bound report for a configuration), ``run``
(autonomous campaign over a builtin objective), ``session`` (ask-tell campaign
persisted to a JSON file), ``map`` (stability maps), ``experiment`` (repeated
comparison runs).

Exit codes: 0 success, 1 I/O failure, 2 configuration/validation error,
3 ask-tell protocol violation.
"""

from __future__ import annotations

import argparse
import fcntl
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from .mathcore import DomainError
from .stability import PerturbationTooLargeError
from .bench import OBJECTIVES, ExperimentConfig, run_experiment, stability_map
from .optimizer import (
    OptConfig,
    ProtocolError,
    new_state,
    plan,
    recommend,
    run,
    state_from_json,
    state_to_json,
    suggest,
    tell,
    trace_to_csv,
)

EXIT_OK = 0
EXIT_IO = 1
EXIT_CONFIG = 2
EXIT_PROTOCOL = 3


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=str(path.parent), prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_config(path: str, overrides: argparse.Namespace | None = None) -> OptConfig:
    with open(path) as fh:
        obj = json.load(fh)
    config = OptConfig.from_json(obj)
    if overrides is not None:
        changes = {}
        if getattr(overrides, "seed", None) is not None:
            changes["seed"] = overrides.seed
        if getattr(overrides, "acq", None) is not None:
            changes["acq_kind"] = overrides.acq
        if changes:
            from dataclasses import replace

            config = replace(config, **changes)
    return config


def _print_plan(config: OptConfig) -> None:
    params, report = plan(config)
    print(f"F (sup-norm bound)      : {report.f_bound:.6g}")
    print(f"D (remainder prefactor) : {report.d_bound:.6g}")
    print("U_q(B) remainder bounds :")
    for q, u in sorted(report.u_of_q.items()):
        print(f"  q={q}: U={u:.6g}  eps-={report.eps_minus[q]:.6g}  eps+={report.eps_plus[q]:.6g}")
    print(f"p_min                   : {report.p_min}")
    print(f"p_rec                   : {report.p_rec}")
    print(f"resolved p              : {params.resolved_p}")
    print(f"thresholds eps_q        : {[round(e, 6) for e in params.eps]}")


class _SessionFile:
    """Advisory-locked session document with atomic writes."""

    def __init__(self, path: str):
        self.path = Path(path)

    def load(self):
        with open(self.path) as fh:
            return state_from_json(json.load(fh))

    def save(self, state) -> None:
        lock_path = self.path.with_suffix(self.path.suffix + ".lock")
        with open(lock_path, "w") as lock:
            fcntl.flock(lock, fcntl.LOCK_EX)
            _atomic_write(self.path, json.dumps(state_to_json(state), indent=2) + "\n")


def _cmd_plan(args) -> int:
    _print_plan(_load_config(args.config, args))
    return EXIT_OK


def _cmd_run(args) -> int:
    config = _load_config(args.config, args)
    if args.objective not in OBJECTIVES:
        print(f"unknown objective {args.objective!r}; choose from {sorted(OBJECTIVES)}",
              file=sys.stderr)
        return EXIT_CONFIG
    f = OBJECTIVES[args.objective]
    state = run(config, lambda v: f(float(v[0])) if config.dim == 1 else f(v))
    out = Path(args.out or "trace.csv")
    _atomic_write(out, trace_to_csv(state))
    rec_x, stable_gain, _ = recommend(state)
    print(json.dumps({
        "recommendation": [float(v) for v in rec_x],
        "stable_gain": stable_gain,
        "observations": len(state.dataset),
        "trace": str(out),
    }))
    return EXIT_OK


def _cmd_session(args) -> int:
    store = _SessionFile(args.session)
    if args.action == "new":
        config = _load_config(args.config, args)
        state = new_state(config)
        store.save(state)
        print(json.dumps({"session": str(store.path), "resolved_p": state.params.resolved_p,
                          "eps": list(state.params.eps)}))
        return EXIT_OK
    state = store.load()
    if args.action == "suggest":
        x = suggest(state)
        store.save(state)
        print(json.dumps({"x": [float(v) for v in x]}))
        return EXIT_OK
    if args.action == "tell":
        if args.x is None or args.y is None:
            print("tell requires --x and --y", file=sys.stderr)
            return EXIT_CONFIG
        x = [float(v) for v in args.x.split(",")]
        tell(state, x, float(args.y))
        store.save(state)
        row = state.trace[-1]
        print(json.dumps({"trace_row": row.to_json()}))
        return EXIT_OK
    if args.action == "recommend":
        rec_x, stable_gain, per_point = recommend(state)
        print(json.dumps({
            "x_star": [float(v) for v in rec_x],
            "stable_gain": stable_gain,
            "per_point": per_point,
        }))
        return EXIT_OK
    if args.action == "status":
        print(json.dumps({
            "observations": len(state.dataset),
            "pending": None if state.pending is None
            else [float(v) for v in state.pending["x"]],
            "trace_rows": len(state.trace),
            "resolved_p": state.params.resolved_p,
        }))
        return EXIT_OK
    print(f"unknown session action {args.action!r}", file=sys.stderr)
    return EXIT_CONFIG


def _cmd_map(args) -> int:
    config = _load_config(args.config, args)
    if config.dim != 1:
        print("stability maps require a 1-D configuration", file=sys.stderr)
        return EXIT_CONFIG
    if args.objective not in OBJECTIVES:
        print(f"unknown objective {args.objective!r}", file=sys.stderr)
        return EXIT_CONFIG
    f = OBJECTIVES[args.objective]
    lo, hi = config.bounds[0]
    grid = np.linspace(lo, hi, args.grid)
    eps = config.eps_override if isinstance(config.eps_override, float) else 0.1867
    result = stability_map(
        f, grid, config.a, config.b, mode=args.mode,
        kernel=config.kernel, eps=eps, p=config.p_max, seed=config.seed,
    )
    lines = []
    if args.mode == "oracle":
        lines.append("x,stable")
        for x, s in zip(result["x"], result["stable"]):
            lines.append(f"{float(x)!r},{1 if s else 0}")
    else:
        p = result["score_q"].shape[0]
        lines.append("x,score," + ",".join(f"score_q{q}" for q in range(1, p + 1)))
        for i, x in enumerate(result["x"]):
            per = ",".join(repr(float(result["score_q"][q, i])) for q in range(p))
            lines.append(f"{float(x)!r},{float(result['score'][i])!r},{per}")
    _atomic_write(Path(args.out), "\n".join(lines) + "\n")
    print(json.dumps({"rows": len(result["x"]), "out": args.out}))
    return EXIT_OK


def _cmd_experiment(args) -> int:
    config = _load_config(args.config, args)
    kinds = tuple(k.strip() for k in (args.acq or config.acq_kind).split(",") if k.strip())
    cfg = ExperimentConfig(
        template=config,
        out_dir=args.out,
        objective=args.objective,
        kinds=kinds,
        repeats=args.repeats,
        workers=args.workers,
    )
    summary = run_experiment(cfg)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stablebo",
        description="Stability-aware Bayesian optimisation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="print the stability bound report for a config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--acq")
    p.set_defaults(func=_cmd_plan)

    p = sub.add_parser("run", help="autonomous campaign over a builtin objective")
    p.add_argument("--config", required=True)
    p.add_argument("--objective", default="synthetic1d")
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--acq")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("session", help="ask-tell campaign persisted to JSON")
    p.add_argument("action", choices=["new", "suggest", "tell", "recommend", "status"])
    p.add_argument("--session", required=True)
    p.add_argument("--config")
    p.add_argument("--x")
    p.add_argument("--y")
    p.add_argument("--seed", type=int)
    p.add_argument("--acq")
    p.set_defaults(func=_cmd_session)

    p = sub.add_parser("map", help="oracle or model-based stability map CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--mode", choices=["oracle", "gp_score"], default="oracle")
    p.add_argument("--grid", type=int, default=721)
    p.add_argument("--out", required=True)
    p.add_argument("--objective", default="synthetic1d")
    p.add_argument("--seed", type=int)
    p.add_argument("--acq")
    p.set_defaults(func=_cmd_map)

    p = sub.add_parser("experiment", help="repeated comparison runs with reports")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--objective", default="synthetic1d")
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--acq", help="comma-separated acquisition kinds")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_experiment)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ProtocolError as exc:
        print(f"protocol error: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL
    except json.JSONDecodeError as exc:
        print(f"configuration error: invalid JSON ({exc})", file=sys.stderr)
        return EXIT_CONFIG
    except (PerturbationTooLargeError, DomainError, ValueError, KeyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
