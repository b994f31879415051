"""Command-line entry point: ``camisac {train,evaluate,sweep-mi,sweep-users}``.

Every run writes ``meta.txt`` (the resolved config, re-readable with
``--config``), one ``runs/<label>/curve.csv`` per training run, and the
mode's summary CSV. Files are written under a ``.partial`` name and renamed
once complete. Exit codes: 0 success, 1 config error, 2 runtime error.
"""

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import PolicyKind, aggregate, evaluate_policy, run_baseline, with_probe_threshold
from .config import ConfigError, resolve, version_hash
from .ddpg import checkpoint_bytes, train
from .environment import IsacEnv
from .plotting import line_chart, moving_average

log = logging.getLogger("camisac")

MODES = ("train", "evaluate", "sweep-mi", "sweep-users")
CURVE_COLUMNS = ("step", "raw_reward", "normalized_reward", "MI", "feasible_flag")
SWEEP_COLUMNS = ("N", "policy", "mean_rate_bps", "std_rate_bps", "mean_MI_bits")
MI_SWEEP_COLUMNS = ("mi_min_bits", "seed", "final_mean_reward", "mean_rate_bps", "mean_MI_bits",
                    "feasible_fraction")
FINAL_WINDOW = 200
PLOT_WINDOW = 50


class PartialFile:
    """Write to ``<path>.partial`` and rename to ``path`` on clean exit."""

    def __init__(self, path, mode="w"):
        self.path = Path(path)
        self.tmp = self.path.with_name(self.path.name + ".partial")
        self.mode = mode
        self.fh = None

    def __enter__(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        kw = {} if "b" in self.mode else {"newline": "", "encoding": "utf-8"}
        self.fh = open(self.tmp, self.mode, **kw)
        return self.fh

    def __exit__(self, exc_type, exc, tb):
        self.fh.close()
        if exc_type is None:
            os.replace(self.tmp, self.path)
        return False


def write_text(path, text):
    with PartialFile(path) as fh:
        fh.write(text)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_curve(path, curve):
    with PartialFile(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_COLUMNS)
        for row in zip(curve.step, curve.raw_reward, curve.normalized_reward, curve.mi, curve.feasible):
            w.writerow([_fmt(v) for v in row])


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def meta_text(cfg, mode, seed):
    d = cfg.derived()
    header = [
        f"# reproduce with: camisac {mode} --config meta.txt --seed {seed}",
        f"# mode = {mode}",
        f"# seed = {seed}",
        f"# version = {__version__}",
        f"# version_sha1 = {version_hash(__version__)}",
        f"# bandwidth_per_user_hz = {d['bandwidth_per_user_hz']!r}",
        f"# rms_bandwidth_hz = {d['rms_bandwidth_hz']!r}",
    ]
    return "\n".join(header) + "\n" + cfg.dump()


def final_mean(values, window=FINAL_WINDOW):
    values = np.asarray(values, dtype=float)
    return float(values[-window:].mean()) if values.size else float("nan")


def _save_run(out, label, cfg, curve, agent=None):
    run_dir = Path(out) / "runs" / label
    write_curve(run_dir / "curve.csv", curve)
    if agent is not None and cfg["run.save_checkpoint"]:
        with PartialFile(run_dir / "agent.ckpt", "wb") as fh:
            fh.write(checkpoint_bytes(agent))


def _reward_plot(out, series, title):
    smoothed = {k: (np.asarray(x), moving_average(y, PLOT_WINDOW)) for k, (x, y) in series.items()}
    write_text(Path(out) / "plot.svg", line_chart(smoothed, title, "training step", "reward (bps)"))


def run_train(cfg, seed, out):
    hp = cfg.hyperparams()
    scenario = cfg.scenario()
    series = {}
    for s in cfg.seeds(seed):
        log.info("training seed %d for %d steps", s, hp.max_steps)
        agent, curve = train(IsacEnv(scenario, s), hp, s)
        _save_run(out, f"seed{s}", cfg, curve, agent)
        series[f"seed {s}"] = (curve.step, curve.raw_reward)
    if cfg["run.plot"]:
        _reward_plot(out, series, f"training reward, N={scenario.n_users}")


def _write_sweep(fh, rows):
    w = csv.writer(fh, lineterminator="\n")
    for r in rows:
        w.writerow([r.n_users, r.policy.value, _fmt(r.mean_rate), _fmt(r.std_rate), _fmt(r.mean_mi)])
    fh.flush()


def _run_cells(cfg, seed, out, n_list, kinds):
    hp = cfg.hyperparams()
    rows_all = []
    with PartialFile(Path(out) / "sweep.csv") as fh:
        csv.writer(fh, lineterminator="\n").writerow(SWEEP_COLUMNS)
        for n in n_list:
            scenario = cfg.scenario(n)
            records = []
            for s in cfg.seeds(seed):
                for kind in kinds:
                    log.info("N=%d seed=%d policy=%s", n, s, kind.value)
                    rec = run_baseline(kind, scenario, hp, s, cfg["run.eval_episodes"], cfg["run.precoder"])
                    if rec.curve is not None:
                        _save_run(out, f"N{n}_{kind.value}_seed{s}", cfg, rec.curve)
                    records.append(rec)
            rows = aggregate(records)
            rows.sort(key=lambda r: kinds.index(r.policy))
            _write_sweep(fh, rows)
            rows_all.extend(rows)
    return rows_all


def run_evaluate(cfg, seed, out):
    _run_cells(cfg, seed, out, [cfg["scenario.n_users"]], [cfg.policy()])


def run_sweep_users(cfg, seed, out):
    kinds = cfg.policies()
    n_list = list(cfg["sweep.users"])
    rows = _run_cells(cfg, seed, out, n_list, kinds)
    if cfg["run.plot"]:
        series = {}
        for kind in kinds:
            pts = sorted((r.n_users, r.mean_rate) for r in rows if r.policy is kind)
            series[kind.value] = ([p[0] for p in pts], [p[1] for p in pts])
        write_text(Path(out) / "plot.svg", line_chart(series, "sum rate vs users", "users N", "sum rate (bps)"))


def mi_thresholds(cfg, scenario, seed):
    """``(label, mi_min)`` pairs: probe fractions if configured, else absolute values."""
    if cfg["sweep.mi_fractions"]:
        out = []
        for f in cfg["sweep.mi_fractions"]:
            sc, _ = with_probe_threshold(scenario, seed, f, cfg["sweep.probe_samples"])
            out.append((f"frac{f:g}", sc.mi_min))
        return out
    return [(f"mi{v:g}", v) for v in cfg["sweep.mi_values"]]


def run_sweep_mi(cfg, seed, out):
    hp = cfg.hyperparams()
    base = cfg.scenario()
    series = {}
    with PartialFile(Path(out) / "mi_sweep.csv") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MI_SWEEP_COLUMNS)
        for s in cfg.seeds(seed):
            for label, mi_min in mi_thresholds(cfg, base, s):
                scenario = cfg.scenario(mi_min=mi_min)
                log.info("seed=%d MI_min=%.4g", s, mi_min)
                agent, curve = train(IsacEnv(scenario, s), hp, s)
                _save_run(out, f"{label}_seed{s}", cfg, curve, agent)
                rec = evaluate_policy(PolicyKind.PROPOSED, scenario, s, agent, cfg["run.eval_episodes"])
                w.writerow([_fmt(mi_min), s, _fmt(final_mean(curve.raw_reward)), _fmt(rec.mean_rate),
                            _fmt(rec.mean_mi), _fmt(rec.feasible_fraction)])
                fh.flush()
                series.setdefault(label, []).append(curve)
    if cfg["run.plot"]:
        avg = {}
        for label, curves in series.items():
            n = min(len(c.step) for c in curves)
            avg[label] = (curves[0].step[:n], np.mean([c.raw_reward[:n] for c in curves], axis=0))
        _reward_plot(out, avg, "training reward per MI threshold")


RUNNERS = {"train": run_train, "evaluate": run_evaluate, "sweep-mi": run_sweep_mi,
           "sweep-users": run_sweep_users}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser():
    p = _Parser(prog="camisac", description=__doc__.splitlines()[0])
    p.add_argument("mode", choices=MODES)
    p.add_argument("--config", type=Path, default=None, help="key = value file; omit for defaults")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", type=Path, default=Path("out"))
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("-q", "--quiet", action="store_true")
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        cfg = resolve(args.config, args.overrides)
    except ConfigError as exc:
        print(f"camisac: config error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(asctime)s %(message)s", stream=sys.stderr)
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        write_text(args.out / "meta.txt", meta_text(cfg, args.mode, args.seed))
        RUNNERS[args.mode](cfg, args.seed, args.out)
    except ConfigError as exc:
        print(f"camisac: config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - any failure mid-run is a runtime error
        print(f"camisac: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
