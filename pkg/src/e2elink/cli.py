"""Experiment runner: config parsing, named RNG streams, BLER sweeps over an
Eb/N0 grid, and CSV emission.

Config files are flat "key = value" text ('#' starts a comment); CLI flags
override file values. Exit codes: 0 ok, 1 config error, 2 training abort,
3 I/O error.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import channels, comms, training
from .errors import ConfigError, DatasetError, TrainingAbort

STREAM_NAMES = ("init", "messages", "channel", "latent", "rl_explore", "eval")


@dataclass
class RngStreams:
    init: np.random.Generator
    messages: np.random.Generator
    channel: np.random.Generator
    latent: np.random.Generator
    rl_explore: np.random.Generator
    eval: np.random.Generator


def _stream_key(name):
    return int.from_bytes(hashlib.sha256(name.encode()).digest()[:8], "big")


def seed_everything(seed):
    """Disjoint named streams from one master seed.

    The stream for name s is PCG64 seeded with SeedSequence([seed, H(s)]),
    H(s) being the first 8 bytes of sha256(s) — stable across machines and
    interpreter runs.
    """
    return RngStreams(**{
        name: np.random.default_rng(np.random.SeedSequence([seed, _stream_key(name)]))
        for name in STREAM_NAMES})


def eval_point_rng(seed, index):
    """Independent stream for one BLER grid point, keyed by the point's
    position in the sorted grid, so points can be evaluated in any order."""
    return np.random.default_rng(
        np.random.SeedSequence([seed, _stream_key("eval-grid"), int(index)]))


@dataclass
class BlerPoint:
    ebn0_db: float
    bler: float
    trials: int


@dataclass
class BlerCurve:
    points: list
    scheme: str
    seed: int


@dataclass
class ExperimentConfig:
    scheme: str
    channel: str
    dataset_path: str | None
    M: int
    n: int
    B: int
    lam: float
    pilot: bool
    train_ebn0_db: float
    eval_ebn0_grid: tuple
    eval_n: int
    val_n: int
    seed: int
    out: str
    epochs: int
    sigma_p: float
    lr: float
    n_train: int


def _parse_bool(raw):
    lowered = raw.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ValueError(raw)


def _parse_grid(raw):
    toks = [t for t in raw.replace(";", ",").split(",") if t.strip()]
    return tuple(float(t) for t in toks)


_KEY_PARSERS = {
    "scheme": str,
    "channel": str,
    "dataset_path": str,
    "M": int,
    "n": int,
    "B": int,
    "lam": float,
    "pilot": _parse_bool,
    "train_ebn0_db": float,
    "eval_ebn0_grid": _parse_grid,
    "eval_n": int,
    "val_n": int,
    "seed": int,
    "out": str,
    "epochs": int,
    "sigma_p": float,
    "lr": float,
    "n_train": int,
}


def _convert(key, raw):
    try:
        return _KEY_PARSERS[key](raw)
    except ValueError:
        raise ConfigError("config key %r: cannot parse value %r" % (key, raw)) from None


def _read_config_file(path):
    if not os.path.exists(path):
        raise ConfigError("config file not found: %s" % (path,))
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigError("%s:%d: expected 'key = value', got %r"
                                  % (path, lineno, line.rstrip()))
            key, raw = (t.strip() for t in text.split("=", 1))
            if key not in _KEY_PARSERS:
                raise ConfigError("unknown config key %r" % (key,))
            values[key] = _convert(key, raw)
    return values


def parse_config(path=None, overrides=None):
    """Assemble a validated config from an optional file plus overrides
    (already-typed values, e.g. from CLI flags); overrides win."""
    values = _read_config_file(path) if path is not None else {}
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if key not in _KEY_PARSERS:
            raise ConfigError("unknown config key %r" % (key,))
        values[key] = val

    if "scheme" not in values:
        raise ConfigError("missing required config key 'scheme'")
    scheme = values["scheme"]
    if scheme not in training.SCHEME_TAGS:
        raise ConfigError("config key 'scheme': unknown scheme %r" % (scheme,))
    channel = values.get("channel", "awgn")
    if channel not in ("awgn", "rayleigh", "dataset"):
        raise ConfigError("config key 'channel': unknown channel %r" % (channel,))
    if channel == "dataset" and not values.get("dataset_path"):
        raise ConfigError("missing required config key 'dataset_path' (channel = dataset)")

    fading = channel != "awgn"
    grid = values.get("eval_ebn0_grid",
                      tuple(float(v) for v in (range(0, 21, 2) if fading else range(0, 9))))
    cfg = ExperimentConfig(
        scheme=scheme,
        channel=channel,
        dataset_path=values.get("dataset_path"),
        M=values.get("M", 16),
        n=values.get("n", 7),
        B=values.get("B", 320),
        lam=values.get("lam", 0.01),
        pilot=values.get("pilot", fading),
        train_ebn0_db=values.get("train_ebn0_db", 13.0 if fading else 3.0),
        eval_ebn0_grid=tuple(sorted(set(grid))),
        eval_n=values.get("eval_n", 100000),
        val_n=values.get("val_n", 10000),
        seed=values.get("seed", 0),
        out=values.get("out", "out"),
        epochs=values.get("epochs", 100 if fading else 50),
        sigma_p=values.get("sigma_p", 0.15),
        lr=values.get("lr", 0.001),
        n_train=values.get("n_train", 10000),
    )
    if cfg.M < 2:
        raise ConfigError("config key 'M': must be >= 2")
    if cfg.n < 1:
        raise ConfigError("config key 'n': must be >= 1")
    if cfg.B < 1:
        raise ConfigError("config key 'B': must be >= 1")
    if cfg.lam < 0:
        raise ConfigError("config key 'lam': must be >= 0")
    if cfg.epochs < 0:
        raise ConfigError("config key 'epochs': must be >= 0")
    if cfg.eval_n < 1:
        raise ConfigError("config key 'eval_n': must be >= 1")
    if cfg.val_n < 1:
        raise ConfigError("config key 'val_n': must be >= 1")
    if not cfg.eval_ebn0_grid:
        raise ConfigError("config key 'eval_ebn0_grid': must be non-empty")
    return cfg


def run_experiment(cfg):
    """Train per config, sweep BLER over the grid, and write both CSVs.
    Returns (TrainReport, BlerCurve)."""
    ds = channels.dataset_load(cfg.dataset_path) if cfg.channel == "dataset" else None
    spec = training.ChannelSpec(kind=cfg.channel, dataset=ds)
    link = comms.LinkConfig(M=cfg.M, n=cfg.n, ebn0_db=cfg.train_ebn0_db,
                            B=cfg.B, lam=cfg.lam, pilot_enabled=cfg.pilot)
    scheme = training.Scheme(tag=cfg.scheme, epochs=cfg.epochs, sigma_p=cfg.sigma_p)
    rngs = seed_everything(cfg.seed)
    result = training.train(scheme, link, spec, rngs,
                            lr=cfg.lr, n_train=cfg.n_train, val_n=cfg.val_n)

    points = []
    for i, ebn0 in enumerate(cfg.eval_ebn0_grid):
        noise_var = comms.ebn0_to_noise_var(ebn0, cfg.M, cfg.n)
        value = training.evaluate_bler(
            result.theta_t, result.theta_r, M=cfg.M, n=cfg.n, noise_var=noise_var,
            channel_spec=spec, pilot=cfg.pilot, n_messages=cfg.eval_n,
            rng=eval_point_rng(cfg.seed, i))
        points.append(BlerPoint(ebn0_db=float(ebn0), bler=value, trials=cfg.eval_n))
    curve = BlerCurve(points=points, scheme=cfg.scheme, seed=cfg.seed)
    emit_csv(result.report, curve, cfg.out)
    return result.report, curve


LOSS_COLUMNS = ("epoch", "l_hat_r", "l_hat_t", "l_tilde_r", "l_tilde_t",
                "l_hat_g", "l_hat_d", "penalty_r", "penalty_t", "penalty_g",
                "penalty_d", "bler")
BLER_COLUMNS = ("ebn0_db", "bler", "trials", "scheme", "seed")


def _fmt(x):
    return format(float(x), ".17g")


def emit_csv(report, curve, out_dir):
    """losses.csv (one row per epoch) and bler.csv (one row per grid point,
    ascending Eb/N0); floats carry 17 significant digits so parsing them
    back is bit-exact."""
    os.makedirs(out_dir, exist_ok=True)
    losses_path = os.path.join(out_dir, "losses.csv")
    with open(losses_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(LOSS_COLUMNS) + "\n")
        r = report
        for e in range(r.n_epochs()):
            row = [str(e + 1),
                   _fmt(r.l_hat_r[e]), _fmt(r.l_hat_t[e]),
                   _fmt(r.l_tilde_r[e]), _fmt(r.l_tilde_t[e]),
                   _fmt(r.l_hat_g[e]), _fmt(r.l_hat_d[e]),
                   _fmt(r.pen_r[e]), _fmt(r.pen_t[e]),
                   _fmt(r.pen_g[e]), _fmt(r.pen_d[e]),
                   _fmt(r.val_bler[e])]
            fh.write(",".join(row) + "\n")
    bler_path = os.path.join(out_dir, "bler.csv")
    with open(bler_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(BLER_COLUMNS) + "\n")
        for pt in sorted(curve.points, key=lambda p: p.ebn0_db):
            fh.write(",".join([_fmt(pt.ebn0_db), _fmt(pt.bler), str(pt.trials),
                               curve.scheme, str(curve.seed)]) + "\n")
    return losses_path, bler_path


def build_parser():
    parser = argparse.ArgumentParser(
        prog="e2elink",
        description="Train an end-to-end learned link and sweep its BLER curve.")
    sub = parser.add_subparsers(dest="command", required=True)
    t = sub.add_parser("train", help="train one scheme per the config, then evaluate")
    t.add_argument("--config", help="flat 'key = value' config file")
    t.add_argument("--seed", type=int)
    t.add_argument("--scheme", help="optimal | gan | ra-gan | rl")
    t.add_argument("--channel", help="awgn | rayleigh | dataset")
    t.add_argument("--out", help="output directory for the CSVs")
    t.add_argument("--eval-n", type=int, dest="eval_n",
                   help="messages per BLER grid point")
    t.add_argument("--epochs", type=int)
    return parser


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    overrides = {key: getattr(args, key)
                 for key in ("seed", "scheme", "channel", "out", "eval_n", "epochs")}
    try:
        cfg = parse_config(args.config, overrides)
    except ConfigError as err:
        print("config error: %s" % (err,), file=sys.stderr)
        return 1
    try:
        report, curve = run_experiment(cfg)
    except (ConfigError, DatasetError) as err:
        print("config error: %s" % (err,), file=sys.stderr)
        return 1
    except TrainingAbort as err:
        try:
            os.makedirs(cfg.out, exist_ok=True)
            with open(os.path.join(cfg.out, "abort.txt"), "w", encoding="utf-8") as fh:
                fh.write("training aborted: %s\n" % (err,))
                fh.write("scheme=%s epoch=%s iteration=%s step=%s\n"
                         % (err.scheme, err.epoch, err.iteration, err.step))
        except OSError:
            pass
        print("training abort: %s" % (err,), file=sys.stderr)
        return 2
    except OSError as err:
        print("i/o error: %s" % (err,), file=sys.stderr)
        return 3
    last = report.val_bler[-1] if report.val_bler else float("nan")
    print("done: %d epochs, final validation BLER %.4g, CSVs in %s"
          % (report.n_epochs(), last, cfg.out))
    return 0
