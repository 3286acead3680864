"""Command-line entry point: ``csirl {gen-expert,train,eval,export-plots}``.

Exit codes: 0 on success, 1 for usage errors (bad flags, bad config keys or
values), 2 for runtime failures (missing files, training errors).  Every
command prints its fully resolved settings before doing any work.

Run directories are named ``<config digest>-seed<seed>`` under ``--runs``.
They are written to a temporary sibling and renamed on success, so a
finished directory is never partially overwritten; targeting an existing
one is an error.
"""
from __future__ import annotations

import argparse
import csv
import json
import shutil
import sys
import tempfile
import traceback
from pathlib import Path

from . import envs
from .data import generate_expert, save_trajectories
from .trainer import ConfigError, TrainConfig, auc, evaluate, load_actor, parse_config_text, \
    read_metrics, train

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="csirl", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-expert", help="roll out the scripted expert")
    g.add_argument("--env", required=True, choices=sorted(envs.ENVS))
    g.add_argument("--n", type=int, default=25, help="successful trajectories to keep")
    g.add_argument("--out", required=True, help="output .jsonl path")
    g.add_argument("--seed", type=int, default=0, help="first episode seed")

    t = sub.add_parser("train", help="train one run from a key=value config")
    t.add_argument("--config", required=True)
    t.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    t.add_argument("--runs", default="runs", help="parent directory for run directories")
    t.add_argument("--quiet", action="store_true", help="suppress progress lines")

    e = sub.add_parser("eval", help="evaluate a checkpoint's deterministic policy")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--env", choices=sorted(envs.ENVS), help="defaults to the checkpoint's env")
    e.add_argument("--episodes", type=int, default=20)
    e.add_argument("--seed", type=int, default=100_000, help="first evaluation episode seed")

    x = sub.add_parser("export-plots", help="write curve data and summary tables")
    x.add_argument("--run", required=True, action="append", help="run directory (repeatable)")
    x.add_argument("--out", required=True)
    return p


def _echo(settings: dict) -> None:
    for k, v in settings.items():
        print(f"{k}={v}")
    sys.stdout.flush()


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_gen_expert(args) -> int:
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    _echo({"command": "gen-expert", "env": args.env, "n": args.n, "out": args.out,
           "seed": args.seed})
    log = lambda msg: print(msg, file=sys.stderr)  # noqa: E731
    trajs, failed = generate_expert(args.env, args.n, args.seed, log)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_trajectories(out, trajs)
    print(f"wrote {len(trajs)} trajectories to {out} ({len(failed)} seeds skipped)")
    return EXIT_OK


def resolve_config(path, overrides) -> TrainConfig:
    """File first, then ``--override`` pairs in order."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    pairs = parse_config_text(text)
    for item in overrides:
        if "=" not in item:
            raise UsageError(f"--override expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        pairs[k.strip()] = v.strip()
    return TrainConfig.from_pairs(pairs)


def run_dir_name(config: TrainConfig) -> str:
    return f"{config.digest()}-seed{config.seed}"


def cmd_train(args) -> int:
    config = resolve_config(args.config, args.override)
    root = Path(args.runs)
    run_dir = root / run_dir_name(config)
    print(f"# run directory: {run_dir}")
    _echo(dict(line.split("=", 1) for line in config.to_text().splitlines()))
    if run_dir.exists():
        print(f"error: run directory {run_dir} already exists", file=sys.stderr)
        return EXIT_RUNTIME
    root.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=run_dir.name + ".", suffix=".partial", dir=root))
    try:
        log = None if args.quiet else print
        result = train(config, run_dir=tmp, log=log)
        tmp.rename(run_dir)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    print(f"final accomplish rate {result.final_rate:.4f} after {result.steps_done} steps"
          f"{' (halted: no subgoal qualified)' if result.halted else ''}")
    return EXIT_OK


def cmd_eval(args) -> int:
    actor, meta = load_actor(args.checkpoint)
    env = args.env or meta.get("env")
    if env is None:
        raise UsageError("checkpoint does not record its env; pass --env")
    _echo({"command": "eval", "checkpoint": args.checkpoint, "env": env,
           "episodes": args.episodes, "seed": args.seed})
    rate = evaluate(actor, env, args.episodes, args.seed)
    print(f"accomplish_rate={rate!r}")
    return EXIT_OK


def _write_pairs(path: Path, xs, ys) -> None:
    with open(path, "w") as fh:
        for x, y in zip(xs, ys):
            fh.write(f"{x!r},{y!r}\n")


def run_summary(run: Path) -> dict:
    metrics_path = run / "metrics.csv"
    if not metrics_path.exists():
        raise FileNotFoundError(f"{run}: no metrics.csv")
    rows = read_metrics(metrics_path)
    if not rows:
        raise ValueError(f"{metrics_path}: no metric rows")
    steps = [r["step"] for r in rows]
    rates = [r["accomplish_rate"] for r in rows]
    seed = ""
    cfg = run / "config.txt"
    if cfg.exists():
        seed = parse_config_text(cfg.read_text()).get("seed", "")
    return {"run": run.name, "mode": rows[0]["mode"], "seed": seed, "eval_points": len(rows),
            "final_step": steps[-1], "final_accomplish_rate": rates[-1],
            "auc": auc(steps, rates) if len(rows) >= 2 and steps[-1] > steps[0] else rates[-1],
            "_rows": rows}


def cmd_export_plots(args) -> int:
    runs = [Path(r) for r in args.run]
    out = Path(args.out)
    _echo({"command": "export-plots", "run": ",".join(map(str, runs)), "out": out})
    summaries = [run_summary(r) for r in runs]
    out.mkdir(parents=True, exist_ok=True)
    for run, summ in zip(runs, summaries):
        dest = out / run.name if len(runs) > 1 else out
        dest.mkdir(parents=True, exist_ok=True)
        rows = summ.pop("_rows")
        steps = [r["step"] for r in rows]
        _write_pairs(dest / "accomplish_rate.csv", steps, [r["accomplish_rate"] for r in rows])
        _write_pairs(dest / "subgoal_index.csv", steps, [r["subgoal_index"] for r in rows])
        events = run / "subgoals.jsonl"
        if events.exists():
            recs = [json.loads(line) for line in events.read_text().splitlines() if line.strip()]
            _write_pairs(dest / "subgoal_events.csv", [r["round"] for r in recs],
                         [-1 if r["index"] is None else r["index"] for r in recs])
    summaries.sort(key=lambda s: (s["mode"], str(s["seed"]), s["run"]))
    cols = ["mode", "seed", "run", "eval_points", "final_step", "final_accomplish_rate", "auc"]
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for s in summaries:
            w.writerow([repr(s[c]) if isinstance(s[c], float) else s[c] for c in cols])
    for s in summaries:
        print(f"{s['mode']:<11s} seed={s['seed']:<4} final={s['final_accomplish_rate']:.4f} "
              f"auc={s['auc']:.4f}  {s['run']}")
    return EXIT_OK


COMMANDS = {"gen-expert": cmd_gen_expert, "train": cmd_train, "eval": cmd_eval,
            "export-plots": cmd_export_plots}


def _component(exc: BaseException) -> str:
    """Name of the innermost ``csirl`` module in the traceback."""
    name = "cli"
    for frame in traceback.extract_tb(exc.__traceback__):
        parts = Path(frame.filename).parts
        if "csirl" in parts:
            tail = parts[parts.index("csirl") + 1:]
            if tail:
                name = tail[0].split(".")[0]
    return name


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # surfaced with the failing component named
        print(f"error [{_component(exc)}]: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
