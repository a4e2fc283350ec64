"""Command-line entry point: ``tracefem {run,geom-check,converge,seed-sweep}``."""
import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import studies
from .config import ConfigError, load_config
from .simulation import Simulation, make_surface


def _levels(s):
    try:
        return [int(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad level list {s!r}") from None


def _load(args):
    cfg = load_config(args.config)
    upd = {}
    if args.output_dir is not None:
        upd["output.dir"] = args.output_dir
    if getattr(args, "seed", None) is not None:
        upd["ic.seed"] = args.seed
    return cfg.with_updates(**upd) if upd else cfg


def cmd_run(args, out):
    cfg = _load(args)
    res = Simulation(cfg).run(cfg["output.dir"], max_steps=args.max_steps, quiet=args.quiet)
    last = res.records[-1]
    if not args.quiet:
        print(f"t={last.t:.6g} steps={len(res.records) - 1} E_lyap={last.E_lyap:.8g} "
              f"mass={last.mass:.12g} -> {cfg['output.dir']}", file=out)
    return 0


def cmd_geom_check(args, out):
    cfg = _load(args)
    surface = make_surface(cfg)
    exact = 4.0 * np.pi * cfg["sphere.radius"] ** 2 if cfg["surface"] == "sphere" else None
    rows = studies.geometry_table(surface, args.levels, exact, cfg["mesh.box_half_width"],
                                  cfg["mesh.extra_surface_levels"])
    print(f"{'level':>5} {'h':>10} {'active':>8} {'area':>14} {'error':>11} {'order':>6} {'angle/h':>8}", file=out)
    for r in rows:
        err = f"{r.error:11.4e}" if r.error is not None else f"{'-':>11}"
        order = f"{r.order:6.2f}" if r.order is not None else f"{'-':>6}"
        print(f"{r.level:5d} {r.h:10.5f} {r.n_active:8d} {r.area:14.8f} {err} {order} "
              f"{r.max_normal_angle / r.h:8.3f}", file=out)
    return 0


def cmd_converge(args, out):
    cfg = _load(args)
    if cfg["surface"] != "sphere":
        raise ConfigError("the manufactured-solution study is defined on the unit sphere", key="surface")
    rows = studies.manufactured_sphere(args.levels, cfg["mesh.box_half_width"])
    print(f"{'level':>5} {'h':>10} {'dofs':>7} {'L2 error':>12} {'order':>6}", file=out)
    for r in rows:
        order = f"{r.order:6.2f}" if r.order is not None else f"{'-':>6}"
        print(f"{r.level:5d} {r.h:10.5f} {r.n_dofs:7d} {r.l2_error:12.5e} {order}", file=out)
    return 0


def cmd_seed_sweep(args, out):
    cfg = _load(args)
    root = Path(cfg["output.dir"])
    root.mkdir(parents=True, exist_ok=True)
    sampled = []
    spaces = None
    every = cfg["output.every_t"]
    for seed in range(args.n):
        run_cfg = cfg.with_updates(**{"ic.seed": seed})
        sim = Simulation(run_cfg, spaces)
        spaces = sim.spaces
        res = sim.run(root / f"seed_{seed}", max_steps=args.max_steps, quiet=args.quiet)
        t = res.series("t")
        on_grid = np.isclose(t / every, np.round(t / every), rtol=0, atol=1e-9) | (t == t[-1])
        sampled.append(dict(zip(t[on_grid], res.series("E_lyap")[on_grid])))
    times = sorted(set.intersection(*(set(s) for s in sampled)))
    with open(root / "mean_energy.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# config_hash={cfg.hash} seeds=0..{args.n - 1}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "mean_E_lyap", "std_E_lyap", "n"])
        for t in times:
            e = np.array([s[t] for s in sampled])
            w.writerow([repr(float(t)), repr(float(e.mean())), repr(float(e.std())), len(e)])
    if not args.quiet:
        print(f"{args.n} runs -> {root}", file=out)
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="tracefem", description="TraceFEM Cahn-Hilliard / NSCH solver")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, with_run_flags=True):
        sp.add_argument("config", help="configuration file (section.key = value lines)")
        sp.add_argument("--output-dir", default=None, help="override output.dir")
        sp.add_argument("--quiet", action="store_true", help="suppress progress output")
        if with_run_flags:
            sp.add_argument("--seed", type=int, default=None, help="override ic.seed")
            sp.add_argument("--max-steps", type=int, default=None, help="cap on accepted time steps")

    common(sub.add_parser("run", help="run one simulation"))
    g = sub.add_parser("geom-check", help="surface area and normal convergence table")
    common(g, False)
    g.add_argument("--levels", type=_levels, default=[2, 3, 4])
    c = sub.add_parser("converge", help="manufactured-solution convergence study")
    common(c, False)
    c.add_argument("--levels", type=_levels, default=[2, 3, 4])
    s = sub.add_parser("seed-sweep", help="repeat a run for seeds 0..N-1")
    common(s)
    s.add_argument("--n", type=int, required=True, help="number of seeds")
    return p


COMMANDS = {"run": cmd_run, "geom-check": cmd_geom_check, "converge": cmd_converge,
            "seed-sweep": cmd_seed_sweep}


def main(argv=None, out=None):
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args, out)
    except (ConfigError, OSError, ValueError, RuntimeError) as exc:
        print(f"tracefem: error: {str(exc).splitlines()[0]}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
