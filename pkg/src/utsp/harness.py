"""Command-line front end: attack pipelines, walk dumps, ratio checks, plots.

Results persist as newline-delimited JSON records (one record per
construction, deterministic for a fixed config and seed) plus a flat
summary table that carries wall-clock times. Point sets are exported as
"x y" lines and figures are emitted as static SVG files.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import adversary, cyclewalk, orders, tsp
from .errors import ParameterError, UtspError
from .geometry import Point


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    order: str = "sierpinski"
    order_file: Optional[str] = None
    g: list[int] = field(default_factory=lambda: [0])  # 0 = derive from params
    M: int = 16
    r: int = 4
    c: Optional[int] = None
    l: Optional[float] = None
    w: Optional[float] = None
    strict: bool = False
    search: str = "full"
    seed: int = 0
    lines: int = 256
    rmax: Optional[int] = None  # deepest scale; defaults to c*floor(r/c)
    out: str = "results"

    def resolved_params(self, g: int) -> adversary.Params:
        if self.l is not None and self.w is not None:
            c = self.c if self.c is not None else 1
            rmax = self.rmax if self.rmax is not None else c * (self.r // c)
            gg = g if g > 0 else max(1, math.ceil(rmax + 2 - math.log2(self.w)))
            return adversary.Params(
                r=self.r, M=self.M, l=self.l, w=self.w, c=c,
                s=cyclewalk.integer_cube_root(self.M), g=gg,
                strict=self.strict, search=self.search,
            )
        base = adversary.default_params(
            self.r, self.M, strict=self.strict, g=g if g > 0 else None, search=self.search
        )
        override = {}
        if self.c is not None:
            override["c"] = self.c
        if self.l is not None:
            override["l"] = self.l
        if self.w is not None:
            override["w"] = self.w
        if override:
            base = adversary.Params(**{**base.to_dict(), **override})
        return base

    def scales(self, params: adversary.Params) -> list[int]:
        if self.rmax is None:
            return params.scales()
        return [t for t in range(0, self.rmax + 1, params.c)]

    def to_dict(self) -> dict:
        return {
            "order": self.order, "order_file": self.order_file, "g": self.g,
            "M": self.M, "r": self.r, "c": self.c, "l": self.l, "w": self.w,
            "strict": self.strict, "search": self.search, "seed": self.seed,
            "lines": self.lines, "rmax": self.rmax,
        }


def config_hash(cfg: ExperimentConfig, g: int) -> str:
    payload = dict(cfg.to_dict(), g_point=g)
    text = json.dumps(payload, sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def load_config_file(path: str) -> dict:
    """Flat key=value format mirroring the CLI flags; '#' starts a comment."""
    out: dict = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ParameterError(f"config line {lineno}: expected key=value, got {text!r}")
            key, val = (part.strip() for part in text.split("=", 1))
            out[key] = val
    return out


# ---------------------------------------------------------------------------
# Point-set and record I/O
# ---------------------------------------------------------------------------


def write_points(points: Sequence[Point], path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in points:
            fh.write(f"{p.x!r} {p.y!r}\n")


def read_points(path: str) -> list[Point]:
    pts = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) != 2:
                raise ParameterError(f"set file line {lineno}: expected 'x y', got {text!r}")
            try:
                pts.append(Point(float(parts[0]), float(parts[1])))
            except ValueError:
                raise ParameterError(f"set file line {lineno}: bad number in {text!r}") from None
    return pts


def record_line(record: dict) -> str:
    return json.dumps(record, sort_keys=True)


# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------


def make_order(cfg_order: str, g: int, order_file: Optional[str] = None) -> orders.OrderOracle:
    if cfg_order == "file":
        if not order_file:
            raise ParameterError("order kind 'file' requires --order-file")
        return orders.load_order_file(order_file)
    return orders.make_oracle(cfg_order, g)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_attack(cfg: ExperimentConfig, verify: bool = False) -> list[dict]:
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    records_path = out_dir / "records.jsonl"
    summary_path = out_dir / "summary.tsv"
    records: list[dict] = []
    wall: list[float] = []
    for g_point in cfg.g:
        started = time.perf_counter()
        params = cfg.resolved_params(g_point)
        oracle = make_order(cfg.order, params.g, cfg.order_file)
        report = adversary.run_case_dichotomy(
            oracle, params, scales=cfg.scales(params), n_lines=cfg.lines, seed=cfg.seed
        )
        if verify:
            _reverify(oracle, params, report, cfg)
        rec = dict(report.to_dict(), config_hash=config_hash(cfg, g_point))
        records.append(rec)
        wall.append(time.perf_counter() - started)
        set_path = out_dir / f"set_{rec['config_hash']}.txt"
        write_points(report.points, set_path)
    with open(records_path, "a", encoding="utf-8") as fh:
        for rec in records:
            fh.write(record_line(rec) + "\n")
            fh.flush()
    new_summary = not summary_path.exists()
    with open(summary_path, "a", encoding="utf-8") as fh:
        if new_summary:
            fh.write("config_hash\tcase\tn\tcost_order\tratio_lower\twall_seconds\n")
        for rec, dt in zip(records, wall):
            rep = rec.get("report") or {}
            fh.write(
                f"{rec['config_hash']}\t{rec['case']}\t{rec.get('n', 0)}\t"
                f"{rep.get('cost_order', '')}\t{rep.get('ratio_lower', '')}\t{dt:.3f}\n"
            )
    return records


def _reverify(oracle, params, report, cfg) -> None:
    """Re-run the exhaustive certificate scans for an emitted report."""
    atlas = adversary.build_atlas(oracle, params, scales=cfg.scales(params))
    for bt in atlas.backtracks.values():
        adversary.verify_backtrack(oracle, bt)


def cmd_walk(kind: str, M: int, s: int, seed: int = 0, out=sys.stdout) -> dict:
    walk = cyclewalk.make_walk(kind, M, s=s, seed=seed)
    outcome = cyclewalk.dichotomy(walk, s)
    checks = cyclewalk.validate_outcome(walk, s, outcome)
    if isinstance(outcome, cyclewalk.ZigZag):
        head = (
            f"zigzag value={outcome.a} m={outcome.m}"
            f" first_i={int(outcome.i_times[0])} first_j={int(outcome.j_times[0])}"
            f" both_boundaries={outcome.both_boundaries}"
        )
    else:
        head = (
            f"confined value={outcome.a} m={outcome.m}"
            f" interval=[{outcome.start},{outcome.stop}] diameter={outcome.diameter}"
        )
    print(f"walk kind={kind} M={M} N={walk.N} s={s} seed={seed}", file=out)
    print(head, file=out)
    print(f"witness_valid=True checks={json.dumps(checks, sort_keys=True)}", file=out)
    return checks


def cmd_ratio(order: str, g: int, set_path: str, order_file: Optional[str] = None,
              out=sys.stdout) -> tsp.RatioReport:
    points = read_points(set_path)
    oracle = make_order(order, g, order_file)
    report = tsp.measure_order_ratio(oracle, points)
    print(json.dumps(report.to_dict(), sort_keys=True), file=out)
    return report


# ---------------------------------------------------------------------------
# Plotting (matplotlib imported lazily; figures are pure functions of input)
# ---------------------------------------------------------------------------


def _mpl():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_records(records: list[dict], outfile: str):
    plt = _mpl()
    fig, ax = plt.subplots(figsize=(6, 4))
    pts = [
        (rec.get("n", 0), (rec.get("report") or {}).get("ratio_lower"))
        for rec in records
    ]
    pts = [(n, r) for n, r in pts if r is not None and n >= 1]
    if pts:
        ns = [p[0] for p in pts]
        rs = [p[1] for p in pts]
        ax.plot(ns, rs, "o-", label="measured ratio lower bound")
        grid_n = np.linspace(max(2, min(ns)), max(max(ns), 4), 64)
        ref = math.log(max(ns)) if max(ns) > 1 else 1.0
        ax.plot(grid_n, (rs[-1] / ref) * np.log(grid_n), "--", label="log n reference")
        ax.set_xscale("log")
        ax.legend(loc="best")
    ax.set_xlabel("set size n")
    ax.set_ylabel("cost / tsp upper bound")
    fig.tight_layout()
    fig.savefig(outfile)
    plt.close(fig)
    return fig


def plot_set(points: list[Point], outfile: str, order: Optional[str] = None, g: int = 8):
    plt = _mpl()
    fig, ax = plt.subplots(figsize=(5, 5))
    xs = [p.x for p in points]
    ys = [p.y for p in points]
    ax.scatter(xs, ys, s=12, color="black")
    if order and len(points) >= 2:
        oracle = make_order(order, g)
        path = oracle.sort_by_order(points)
        ax.plot([p.x for p in path], [p.y for p in path], color="tab:blue", lw=1.0,
                label=f"{order} order path")
        ax.legend(loc="best")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.set_aspect("equal")
    fig.tight_layout()
    fig.savefig(outfile)
    plt.close(fig)
    return fig


def plot_chain(chain_data: dict, outfile: str):
    plt = _mpl()
    fig, ax = plt.subplots(figsize=(5, 5))
    pts = chain_data["points"]
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    ax.plot(xs, ys, "-", color="tab:gray", lw=0.8)
    ax.scatter(xs, ys, s=10, color="tab:red")
    box = chain_data.get("square", [0.0, 0.0, 1.0, 1.0])
    cx, cy = (box[0] + box[2]) / 2, (box[1] + box[3]) / 2
    M = chain_data.get("M", 16)
    import math

    for j in range(1, M + 1):
        th = 2 * math.pi * j / M
        rad = (box[2] - box[0]) * 0.75
        ax.plot([cx, cx + rad * math.cos(th)], [cy, cy + rad * math.sin(th)],
                color="tab:blue", lw=0.3, alpha=0.5)
    ax.set_xlim(box[0], box[2])
    ax.set_ylim(box[1], box[3])
    ax.set_aspect("equal")
    fig.tight_layout()
    fig.savefig(outfile)
    plt.close(fig)
    return fig


def chain_to_dict(chain: adversary.SpiralChain) -> dict:
    return {
        "M": chain.M,
        "square": list(chain.square.aabb()),
        "termination": chain.termination,
        "points": [[p.x, p.y] for p in chain.points],
        "rays": list(chain.rays),
    }


def cmd_plot(in_path: str, outfile: str):
    text = Path(in_path).read_text(encoding="utf-8").strip()
    if not text:
        return plot_records([], outfile)
    first = text.splitlines()[0].strip()
    if first.startswith("{"):
        loaded = [json.loads(ln) for ln in text.splitlines() if ln.strip()]
        if len(loaded) == 1 and "points" in loaded[0] and "rays" in loaded[0]:
            return plot_chain(loaded[0], outfile)
        return plot_records(loaded, outfile)
    return plot_set(read_points(in_path), outfile)


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="utsp", description="adversarial constructions for square orders"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    atk = sub.add_parser("attack", help="run the case dichotomy over an order")
    atk.add_argument("--config", help="key=value config file; flags override it")
    atk.add_argument("--order", default=None,
                     choices=list(orders.KINDS), help="order kind")
    atk.add_argument("--order-file", default=None)
    atk.add_argument("--g", default=None,
                     help="grid exponent, comma-separated for a sweep; 0 derives it")
    atk.add_argument("--M", type=int, default=None)
    atk.add_argument("--r", type=int, default=None)
    atk.add_argument("--c", type=int, default=None)
    atk.add_argument("--l", type=float, default=None)
    atk.add_argument("--w", type=float, default=None)
    atk.add_argument("--rmax", type=int, default=None)
    atk.add_argument("--lines", type=int, default=None)
    atk.add_argument("--seed", type=int, default=None)
    atk.add_argument("--strict", action="store_true")
    atk.add_argument("--search", default=None, choices=list(adversary.SEARCH_MODES))
    atk.add_argument("--verify", action="store_true",
                     help="re-run every certificate scan before writing records")
    atk.add_argument("--out", default=None)

    wk = sub.add_parser("walk", help="generate a walk and print its witness")
    wk.add_argument("--kind", required=True, choices=list(cyclewalk.WALK_KINDS))
    wk.add_argument("--M", type=int, required=True)
    wk.add_argument("--s", type=int, required=True)
    wk.add_argument("--seed", type=int, default=0)

    rt = sub.add_parser("ratio", help="measure a point-set file under an order")
    rt.add_argument("--order", required=True, choices=list(orders.KINDS))
    rt.add_argument("--order-file", default=None)
    rt.add_argument("--g", type=int, required=True)
    rt.add_argument("--set", dest="set_path", required=True)

    pl = sub.add_parser("plot", help="emit an SVG figure for records/sets/chains")
    pl.add_argument("--in", dest="in_path", required=True)
    pl.add_argument("--out", dest="outfile", required=True)
    return parser


_CONFIG_KEYS = {
    "order": str, "order_file": str, "g": str, "M": int, "r": int, "c": int,
    "l": float, "w": float, "rmax": int, "lines": int, "seed": int,
    "strict": lambda v: v.lower() in ("1", "true", "yes"), "search": str,
    "out": str,
}


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if getattr(args, "config", None):
        for key, raw in load_config_file(args.config).items():
            if key not in _CONFIG_KEYS:
                raise ParameterError(f"unknown config key {key!r}")
            setattr(cfg, key, _CONFIG_KEYS[key](raw))
    for key in ("order", "order_file", "M", "r", "c", "l", "w", "rmax",
                "lines", "seed", "search", "out"):
        val = getattr(args, key, None)
        if val is not None:
            setattr(cfg, key, val)
    if getattr(args, "strict", False):
        cfg.strict = True
    g_raw = getattr(args, "g", None)
    if g_raw is not None:
        cfg.g = [int(part) for part in str(g_raw).split(",")]
    elif isinstance(cfg.g, str):
        cfg.g = [int(part) for part in cfg.g.split(",")]
    return cfg


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "attack":
            cfg = config_from_args(args)
            if cfg.M % 2 == 1:
                raise ParameterError(f"M must be even, got {cfg.M}")
            records = cmd_attack(cfg, verify=args.verify)
            for rec in records:
                print(record_line(rec))
            return 0
        if args.command == "walk":
            cmd_walk(args.kind, args.M, args.s, seed=args.seed)
            return 0
        if args.command == "ratio":
            cmd_ratio(args.order, args.g, args.set_path, order_file=args.order_file)
            return 0
        if args.command == "plot":
            cmd_plot(args.in_path, args.outfile)
            return 0
    except UtspError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 1


if __name__ == "__main__":
    raise SystemExit(main())
