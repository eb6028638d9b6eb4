"""``cpr-lab`` command line.

Subcommands: ripcheck, lemmas, recover, sweep-pt, sweep-noise. Values come
from flags, then an optional JSON ``--config`` file, then per-command
defaults. Exit codes: 0 success, 1 runtime failure (including a failed
lemma check), 2 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import datetime
import io
import json
import logging
import math
import os
import sys
from dataclasses import fields

from . import experiments
from .experiments import ConfigError, ExperimentConfig

log = logging.getLogger("cpr_lab")

DEFAULTS = {
    "ripcheck": {"n": 64, "k": [4], "multiplier": [6.0], "samples": 10_000},
    "lemmas": {"samples": 1_000_000, "trials": 1000},
    "recover": {"n": 128, "k": [5], "multiplier": [8.0], "trials": 1, "epsilon": [0.0]},
    "sweep-pt": {"n": 128, "k": list(range(2, 11)), "multiplier": [float(v) for v in range(2, 11)], "trials": 50},
    "sweep-noise": {"n": 64, "k": [3], "multiplier": [10.0], "trials": 20, "epsilon": [0.0, 0.01, 0.1, 1.0]},
}


def _int_list(text: str) -> list[int]:
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if ":" in part:
            lo, hi, *step = (int(p) for p in part.split(":"))
            out.extend(range(lo, hi + 1, step[0] if step else 1))
        elif part:
            out.append(int(part))
    return out


def _float_list(text: str) -> list[float]:
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if ":" in part:
            lo, hi, *step = (float(p) for p in part.split(":"))
            step = step[0] if step else 1.0
            if step <= 0:
                raise ValueError(f"range step must be positive in {part!r}")
            count = int(math.floor((hi - lo) / step + 1e-9)) + 1
            out.extend(round(lo + i * step, 12) for i in range(max(count, 0)))
        elif part:
            out.append(float(part))
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    S = argparse.SUPPRESS
    common.add_argument("--config", help="JSON file with option values")
    common.add_argument("--n", type=int, default=S, help="ambient dimension")
    common.add_argument("--k", type=_int_list, default=S, help="sparsity, list or lo:hi range")
    common.add_argument("--m", type=_int_list, default=S, help="measurement counts (overrides --multiplier)")
    common.add_argument("--multiplier", type=_float_list, default=S, help="m = ceil(multiplier * k * ln(n/k))")
    common.add_argument("--trials", type=int, default=S)
    common.add_argument("--samples", type=int, default=S, help="sampled elements / Monte Carlo draws")
    common.add_argument("--seed", type=int, default=S)
    common.add_argument("--epsilon", type=_float_list, default=S, help="noise level(s)")
    common.add_argument("--noise", choices=["none", "gaussian_rescaled", "adversarial_sphere"], default=S)
    common.add_argument("--a", type=float, default=S, help="oversampling factor (default 2*(8C/c)^2)")
    common.add_argument("--paper-constants", dest="paper_constants", action="store_true", default=S)
    common.add_argument("--constants-from", dest="constants_from", default=S, help="ripcheck report supplying c, C")
    common.add_argument("--max-iters", dest="max_iters", type=int, default=S)
    common.add_argument("--restarts", type=int, default=S)
    common.add_argument("--out", default=S, help="report path (stdout if omitted)")
    common.add_argument("--format", choices=["csv", "json"], default=S)
    common.add_argument("--no-timestamp", dest="timestamp", action="store_false", default=S)
    common.add_argument("--svg", default=S, help="line chart of a sweep")
    common.add_argument("--break-tolerance", dest="break_tolerance", action="store_true", default=S, help=S)
    common.add_argument("-v", "--verbose", action="store_true", default=False)

    p = argparse.ArgumentParser(prog="cpr-lab", description="Compressive phase retrieval experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, text in (
        ("ripcheck", "empirical isometry constants over sampled rank-2 sparse matrices"),
        ("lemmas", "Monte Carlo and property checks of the supporting lemmas"),
        ("recover", "recover random sparse signals and report errors"),
        ("sweep-pt", "success rate over a (k, m) grid"),
        ("sweep-noise", "recovery error against noise level and the stability bounds"),
    ):
        sub.add_parser(name, parents=[common], help=text)
    return p


def resolve_config(argv) -> tuple[ExperimentConfig, bool]:
    ns = build_parser().parse_args(argv)
    values = dict(DEFAULTS[ns.command])
    if getattr(ns, "config", None):
        try:
            with open(ns.config) as fh:
                file_vals = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {ns.config}: {exc}") from None
        values.update(_normalize(file_vals))
    values.update({k: v for k, v in vars(ns).items() if k not in ("config", "verbose", "command")})
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown option(s): {', '.join(sorted(unknown))}")
    if values.get("constants_from"):
        values["paper_constants"] = False
    cfg = ExperimentConfig(command=ns.command, **values)
    return cfg.validate(), ns.verbose


def _normalize(vals: dict) -> dict:
    out = {}
    for key, v in vals.items():
        key = key.replace("-", "_")
        if key == "no_timestamp":
            key, v = "timestamp", not v
        if key in ("k", "m") and not isinstance(v, list):
            v = _int_list(v)
        if key in ("multiplier", "epsilon") and not isinstance(v, list):
            v = _float_list(v)
        out[key] = v
    return out


# ------------------------------------------------------------------ output
def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".17g") if math.isfinite(v) else str(v)
    if isinstance(v, (dict, list)):
        return json.dumps(v, sort_keys=True)
    return str(v)


def _plain(v):
    if hasattr(v, "item"):
        return v.item()
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return v


def render(rows: list[dict], cfg: ExperimentConfig) -> str:
    meta = cfg.provenance()
    if cfg.timestamp:
        meta["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    rows = [_plain(r) for r in rows]
    if cfg.format == "json":
        return json.dumps([{**r, "config": meta} for r in rows], indent=1, sort_keys=False) + "\n"
    buf = io.StringIO()
    buf.write(f"# config: {json.dumps(meta, sort_keys=True)}\n")
    cols = list(rows[0]) if rows else []
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for r in rows:
        writer.writerow([_fmt(r.get(c)) for c in cols])
    return buf.getvalue()


def _check_writable(path: str | None) -> None:
    if path is None:
        return
    parent = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(parent) or not os.access(parent, os.W_OK):
        raise ConfigError(f"cannot write to {path}")


def write_svg(rows: list[dict], cfg: ExperimentConfig, path: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "cpr-lab"
    fig, ax = plt.subplots(figsize=(6, 4))
    if cfg.command == "sweep-pt":
        for k in sorted({r["k"] for r in rows}):
            sel = [r for r in rows if r["k"] == k]
            ax.plot([r["m"] for r in sel], [r["success_rate"] for r in sel], marker="o", label=f"k={k}")
        ax.set_xlabel("m")
        ax.set_ylabel("success rate")
    else:
        sel = [r for r in rows if r["epsilon"] > 0]
        eps = [r["epsilon"] for r in sel]
        ax.loglog(eps, [r["max_dist_matrix"] for r in sel], marker="o", label="max matrix error")
        ax.loglog(eps, [r["matrix_bound"] for r in sel], linestyle="--", label="matrix bound")
        ax.set_xlabel("epsilon")
        ax.set_ylabel("error")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


RUNNERS = {
    "ripcheck": experiments.run_ripcheck,
    "recover": experiments.run_recover,
    "sweep-pt": experiments.run_phase_transition,
    "sweep-noise": experiments.run_noise_sweep,
}


def main(argv=None) -> int:
    try:
        try:
            cfg, verbose = resolve_config(argv)
        except SystemExit as exc:  # argparse usage errors
            return int(exc.code or 0)
        _check_writable(cfg.out)
        if cfg.svg is not None:
            if cfg.command not in ("sweep-pt", "sweep-noise"):
                raise ConfigError("--svg applies to sweep-pt and sweep-noise only")
            _check_writable(cfg.svg)
    except ConfigError as exc:
        print(f"cpr-lab: config error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        status = 0
        if cfg.command == "lemmas":
            rows, all_pass = experiments.run_lemmas(cfg)
            status = 0 if all_pass else 1
        else:
            rows = RUNNERS[cfg.command](cfg)
        text = render(rows, cfg)
        if cfg.out is None:
            sys.stdout.write(text)
        else:
            with open(cfg.out, "w") as fh:
                fh.write(text)
        if cfg.svg is not None:
            write_svg(rows, cfg, cfg.svg)
    except ConfigError as exc:
        print(f"cpr-lab: config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        log.debug("failure", exc_info=True)
        print(f"cpr-lab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return status


if __name__ == "__main__":
    sys.exit(main())
