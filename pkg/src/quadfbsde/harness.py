"""Command line front end: table reproduction, sample paths and validation.

Subcommands::

    quadfbsde expand   --preset eg1 --T 1 --order 3
    quadfbsde mc       --preset eg1 --T 5 --pairs 200000 --seed 42 [--z]
    quadfbsde compare  --table zeg1 --out zeg1.csv [--skip-mc]
    quadfbsde paths    --preset fig1 --T 10 --out fig1.csv
    quadfbsde validate --preset eg1 --paths 100000

A JSON config file may be given with ``--config``; command line flags
override its values. Relative output paths are resolved against
``$QUADFBSDE_OUTPUT_DIR`` when that variable is set.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .colehopf import McConfig, milstein_step, mc_value_curve, mc_z_curve, normal_block
from .expansion import MAX_ORDER, d2_moment, expand, mean_variance_weight, optimal_weight, sum_z, z_terms
from .model import PRESETS, AdjustedParams, MarketState, ModelParams, ParamError, validate
from .xoracle import moment_estimates, simulate_def

__all__ = [
    "OUTPUT_DIR_ENV",
    "TABLES",
    "RunConfig",
    "TableRow",
    "PathSample",
    "reproduce_table",
    "table_csv",
    "sample_paths",
    "paths_csv",
    "run",
    "main",
]

log = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "QUADFBSDE_OUTPUT_DIR"
MODES = ("expand", "mc", "compare", "paths", "validate")
PAPER_SCALE_PAIRS = 1_000_000

# table id -> (preset, component)
TABLES = {
    "eg1": ("eg1", "V"),
    "eg6": ("eg6", "V"),
    "zeg1": ("eg1", "Z"),
    "zeg6": ("eg6", "Z"),
}


@dataclass
class RunConfig:
    params: ModelParams = field(default_factory=lambda: PRESETS["eg1"])
    x0: float | None = None
    maturities: list = field(default_factory=lambda: [float(T) for T in range(1, 11)])
    mc: McConfig = field(default_factory=McConfig)
    mode: str = "expand"
    output: str | None = None
    format: str = "text"

    def __post_init__(self):
        if self.x0 is None:
            self.x0 = self.params.m
        errors = []
        if self.mode not in MODES:
            errors.append(f"mode must be one of {MODES}")
        if any(T <= 0 for T in self.maturities):
            errors.append("maturities must be positive")
        if any(b <= a for a, b in zip(self.maturities, self.maturities[1:])):
            errors.append("maturities must be strictly increasing")
        if not self.x0 > 0:
            errors.append("x0 must be positive")
        if errors:
            raise ValueError("; ".join(errors))

    def to_dict(self) -> dict:
        return {
            "params": asdict(self.params),
            "x0": self.x0,
            "maturities": list(self.maturities),
            "mc": asdict(self.mc),
            "mode": self.mode,
            "output": self.output,
            "format": self.format,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        base = PRESETS[data.pop("preset", "eg1")]
        params = base.with_(**data.pop("params", {}))
        mc = McConfig(**data.pop("mc", {}))
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(params=params, mc=mc, **data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# tables


@dataclass(frozen=True)
class TableRow:
    """One maturity of a comparison table, in decimals."""

    maturity: float
    mc_mean: float | None
    mc_err: float | None
    orders: tuple


def reproduce_table(table_id: str, cfg: RunConfig | None = None, with_mc: bool = True) -> list:
    """Expansion columns (and optionally Monte Carlo columns) of a reference table.

    When ``cfg`` is omitted the table's own parameter set is used.
    """
    if table_id not in TABLES:
        raise ValueError(f"unknown table {table_id!r}; choose from {sorted(TABLES)}")
    preset, component = TABLES[table_id]
    if cfg is None:
        cfg = RunConfig(params=PRESETS[preset])
    params = validate(cfg.params)
    maturities = list(cfg.maturities)

    mc = [None] * len(maturities)
    if with_mc and maturities:
        if component == "V":
            mc = mc_value_curve(params, maturities, cfg.x0, cfg.mc)
        else:
            mc = mc_z_curve(params, maturities, cfg.x0, cfg.mc)

    rows = []
    for T, est in zip(maturities, mc):
        res = [expand(MarketState(0.0, T, cfg.x0), params, order) for order in range(MAX_ORDER + 1)]
        orders = tuple(float(r.v if component == "V" else r.z) for r in res)
        rows.append(TableRow(
            maturity=T,
            mc_mean=None if est is None else est.mean,
            mc_err=None if est is None else est.std_err,
            orders=orders,
        ))
    return rows


def _pct(value):
    return "" if value is None else f"{100 * value:.3f}"


def table_csv(rows, table_id: str) -> str:
    component = TABLES[table_id][1]
    err_label = "std err (%)" if table_id != "zeg1" else "err (%)"
    header = ["maturity (yr)", f"{component}-MC (%)", err_label] + [
        f"eps-{o} (%)" for o in ("0th", "1st", "2nd", "3rd")
    ]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for r in rows:
        writer.writerow([f"{r.maturity:g}", _pct(r.mc_mean), _pct(r.mc_err)] + [_pct(v) for v in r.orders])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# sample paths


@dataclass(frozen=True)
class PathSample:
    times: np.ndarray
    x: np.ndarray
    z: np.ndarray
    w_opt: np.ndarray
    w_mv: np.ndarray


def sample_paths(cfg: RunConfig, seed: int, horizon: float | None = None, order: int = MAX_ORDER) -> PathSample:
    """Variance path under the original measure with the weights it implies.

    Z is the closed-form expansion at each grid time for the remaining
    horizon, truncated at ``order``.
    """
    params = validate(cfg.params)
    T = cfg.maturities[-1] if horizon is None else horizon
    dt = cfg.mc.dt
    n_steps = cfg.mc.n_steps(T)
    physical = AdjustedParams(n=params.m, k=params.k, c=params.c)
    if not physical.scheme_positive:
        raise ValueError("k*m < c^2/4: implicit Milstein scheme may produce negative variance")

    xi = normal_block(seed, 3, 0, n_steps, 1)[:, 0]
    x = np.empty(n_steps + 1)
    x[0] = cfg.x0
    for i in range(n_steps):
        x[i + 1] = milstein_step(x[i], xi[i], dt, physical)
    times = np.arange(n_steps + 1) * dt
    times[-1] = T

    z = sum_z(z_terms(MarketState(times, T, x), params), order)
    return PathSample(
        times=times,
        x=x,
        z=z,
        w_opt=optimal_weight(x, z, params),
        w_mv=mean_variance_weight(x, params),
    )


def paths_csv(sample: PathSample) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["time", "x", "z", "w_opt", "w_mv"])
    for row in zip(sample.times, sample.x, sample.z, sample.w_opt, sample.w_mv):
        writer.writerow([f"{v:.6g}" for v in row])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# CLI


def _common_parser():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--preset", choices=sorted(PRESETS))
    for name in ("mu", "k", "m", "c", "rho", "gamma"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--x0", type=float, help="initial variance (default: m)")
    p.add_argument("--T", type=float, action="append", dest="maturities",
                   help="horizon in years; repeat for several")
    p.add_argument("--pairs", type=int, dest="n_pairs", help="antithetic pairs")
    p.add_argument("--paper-scale", action="store_true", help=f"use {PAPER_SCALE_PAIRS} pairs")
    p.add_argument("--dt", type=float)
    p.add_argument("--bump", type=float)
    p.add_argument("--bump-scheme", choices=("backward", "forward", "central"))
    p.add_argument("--independent", action="store_true",
                   help="independent draws for the bumped valuation")
    p.add_argument("--seed", type=int)
    p.add_argument("--chunk-size", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", dest="output", help="output file (default: stdout)")
    p.add_argument("--format", choices=("text", "json", "csv"))
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="quadfbsde", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="mode", required=True)

    p = sub.add_parser("expand", parents=[common], help="closed-form expansion terms and sums")
    p.add_argument("--t", type=float, default=0.0, help="evaluation time")
    p.add_argument("--order", type=int, default=MAX_ORDER, choices=range(MAX_ORDER + 1))

    p = sub.add_parser("mc", parents=[common], help="Cole-Hopf Monte Carlo estimate")
    p.add_argument("--z", action="store_true", help="also estimate Z by bump-and-revalue")

    p = sub.add_parser("compare", parents=[common], help="reproduce a comparison table as CSV")
    p.add_argument("--table", required=True, choices=sorted(TABLES))
    p.add_argument("--skip-mc", action="store_true", help="expansion columns only")

    p = sub.add_parser("paths", parents=[common], help="sample path of the weights as CSV")
    p.add_argument("--order", type=int, default=MAX_ORDER, choices=range(MAX_ORDER + 1))

    p = sub.add_parser("validate", parents=[common], help="moment checks of the expansion processes")
    p.add_argument("--paths", type=int, default=100_000, dest="n_paths")
    p.add_argument("--horizon", type=float, default=1.0)
    return parser


def _config_from_args(args) -> RunConfig:
    data = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            data = json.load(fh)
    if args.preset:
        data["preset"] = args.preset
        data.pop("params", None)
    elif args.mode == "compare" and "preset" not in data and "params" not in data:
        data["preset"] = TABLES[args.table][0]
    elif args.mode == "paths" and "preset" not in data and "params" not in data:
        data["preset"] = "fig1"

    params = data.setdefault("params", {})
    for name in ("mu", "k", "m", "c", "rho", "gamma"):
        if getattr(args, name) is not None:
            params[name] = getattr(args, name)

    mc = data.setdefault("mc", {})
    for name in ("n_pairs", "dt", "bump", "bump_scheme", "seed", "chunk_size", "workers"):
        if getattr(args, name) is not None:
            mc[name] = getattr(args, name)
    if args.paper_scale:
        mc["n_pairs"] = PAPER_SCALE_PAIRS
    if args.independent:
        mc["common_random_numbers"] = False

    if args.maturities:
        data["maturities"] = sorted(args.maturities)
    elif args.mode in ("expand", "mc") and "maturities" not in data:
        raise ValueError("--T is required")
    elif args.mode == "paths" and "maturities" not in data:
        data["maturities"] = [10.0]
    if args.x0 is not None:
        data["x0"] = args.x0
    if args.output is not None:
        data["output"] = args.output
    if args.format is not None:
        data["format"] = args.format
    data["mode"] = args.mode
    return RunConfig.from_dict(data)


def _emit(text: str, cfg: RunConfig, stdout):
    if cfg.output is None:
        stdout.write(text)
        return
    path = cfg.output
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not os.path.isabs(path):
        path = os.path.join(base, path)
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    log.info("wrote %s", path)


def _cmd_expand(args, cfg, stdout):
    lines = []
    results = {}
    for T in cfg.maturities:
        res = expand(MarketState(args.t, T, cfg.x0), cfg.params, args.order)
        results[T] = res
        lines.append(f"T = {T:g}  t = {args.t:g}  x_t = {cfg.x0:g}  order = {args.order}")
        for (i, j), v in res.terms.v.items():
            lines.append(f"  V({i},{j}) = {float(v): .10e}")
        for (i, j), v in res.terms.z.items():
            lines.append(f"  Z({i},{j}) = {float(v): .10e}")
        lines.append(f"  V = {100 * float(res.v):.3f} %")
        lines.append(f"  Z = {100 * float(res.z):.3f} %")
    if cfg.format == "json":
        payload = {
            f"{T:g}": {
                "v": float(r.v),
                "z": float(r.z),
                "order": r.order,
                "v_terms": {f"{i},{j}": float(v) for (i, j), v in r.terms.v.items()},
                "z_terms": {f"{i},{j}": float(v) for (i, j), v in r.terms.z.items()},
            }
            for T, r in results.items()
        }
        return json.dumps(payload, indent=2) + "\n"
    if cfg.format == "csv":
        rows = [[f"{T:g}", f"{100 * float(r.v):.3f}", f"{100 * float(r.z):.3f}"] for T, r in results.items()]
        return _csv(["maturity (yr)", "V (%)", "Z (%)"], rows)
    return "\n".join(lines) + "\n"


def _cmd_mc(args, cfg, stdout):
    v = mc_value_curve(cfg.params, cfg.maturities, cfg.x0, cfg.mc)
    z = mc_z_curve(cfg.params, cfg.maturities, cfg.x0, cfg.mc) if args.z else [None] * len(v)
    if cfg.format == "json":
        payload = []
        for T, ev, ez in zip(cfg.maturities, v, z):
            item = {"T": T, "v": asdict(ev)}
            if ez is not None:
                item["z"] = asdict(ez)
            payload.append(item)
        return json.dumps(payload, indent=2) + "\n"
    if cfg.format == "csv":
        header = ["maturity (yr)", "V-MC (%)", "std err (%)"] + (["Z-MC (%)", "Z std err (%)"] if args.z else [])
        rows = []
        for T, ev, ez in zip(cfg.maturities, v, z):
            row = [f"{T:g}", f"{100 * ev.mean:.4f}", f"{100 * ev.std_err:.4f}"]
            if ez is not None:
                row += [f"{100 * ez.mean:.4f}", f"{100 * ez.std_err:.4f}"]
            rows.append(row)
        return _csv(header, rows)
    lines = []
    for T, ev, ez in zip(cfg.maturities, v, z):
        lines.append(f"T = {T:g}  V = {100 * ev.mean:.4f} %  std err = {100 * ev.std_err:.4f} %  pairs = {ev.n_samples}")
        if ez is not None:
            lines.append(f"T = {T:g}  Z = {100 * ez.mean:.4f} %  std err = {100 * ez.std_err:.4f} %  pairs = {ez.n_samples}")
    return "\n".join(lines) + "\n"


def _csv(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _cmd_compare(args, cfg, stdout):
    rows = reproduce_table(args.table, cfg, with_mc=not args.skip_mc)
    return table_csv(rows, args.table)


def _cmd_paths(args, cfg, stdout):
    sample = sample_paths(cfg, seed=cfg.mc.seed, order=args.order)
    return paths_csv(sample)


def _cmd_validate(args, cfg, stdout):
    n_bundles = 10
    per = -(-args.n_paths // n_bundles)
    bundles = [
        simulate_def(cfg.params, cfg.x0, args.horizon, cfg.mc.dt, seed=cfg.mc.seed + b, n_paths=per)
        for b in range(n_bundles)
    ]
    moments = moment_estimates(bundles)
    target_d2 = float(d2_moment(MarketState(0.0, args.horizon, cfg.x0), args.horizon, cfg.params))
    targets = {"D": 0.0, "E": 0.0, "F": 0.0, "D2": target_d2, "D3": 0.0, "DE": 0.0}
    lines = []
    ok = True
    for name, est in moments.items():
        z = (est.mean - targets[name]) / est.std_err if est.std_err > 0 else 0.0
        passed = abs(z) <= 3.0
        ok &= passed
        lines.append(
            f"{'PASS' if passed else 'FAIL'}  E[{name}] = {est.mean: .6e}  target = {targets[name]: .6e}  "
            f"std err = {est.std_err:.3e}  z = {z:+.2f}"
        )
    return "\n".join(lines) + "\n", ok


def run(argv=None, stdout=None) -> int:
    """Entry point returning an exit status; 0 on success."""
    stdout = stdout or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config_from_args(args)
        if args.mode == "validate":
            text, ok = _cmd_validate(args, cfg, stdout)
        else:
            handler = {"expand": _cmd_expand, "mc": _cmd_mc, "compare": _cmd_compare, "paths": _cmd_paths}
            text, ok = handler[args.mode](args, cfg, stdout), True
        _emit(text, cfg, stdout)
    except (ParamError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0 if ok else 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
