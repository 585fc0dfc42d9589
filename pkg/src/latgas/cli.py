"""Command-line entry points.

    latgas validate    --config cfg.json | --velocities vels.txt
    latgas simulate    --config cfg.json --out DIR [--seed S]
    latgas pde         --config cfg.json --out DIR
    latgas converge | stationary | ensembles | exact | diagnostics
                       --config cfg.json --out DIR [--seed S] [--threads T]

Configs are JSON; see README for the schema and demos/ for worked examples.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import harness, measures, pde
from .dynamics import save_snapshot, simulate
from .empirical import test_function_basis
from .harness import EXPERIMENTS, ExperimentConfig, PairingObserver, replica_rng
from .velocities import load_velocity_set, validate_velocity_set


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_json(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def cmd_validate(args) -> int:
    bad = []
    if args.velocities:
        vs = load_velocity_set(args.velocities)
        bad = validate_velocity_set(vs)
        for v in bad:
            print(f"violation: {v.message}")
        print(f"{args.velocities}: d={vs.dim}, {vs.n} velocities, "
              f"{len(vs.quadruples)} collision quadruples, "
              f"{'OK' if not bad else f'{len(bad)} violations'}")
    if args.config:
        cfg = _load_config(args)
        vs = cfg.velocity_set()
        cfg.boundary(vs)
        if "profile" in cfg.model:
            cfg.profile(vs)
        print(f"{args.config}: kind={cfg.kind}, hash={cfg.hash()}, OK")
    if not args.velocities and not args.config:
        print("nothing to validate; pass --config and/or --velocities", file=sys.stderr)
        return 2
    return 1 if bad else 0


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    vs = cfg.velocity_set()
    law = cfg.jump_law(vs)
    bd = cfg.boundary(vs)
    prof = cfg.profile(vs)
    num = cfg.numerics
    N = int(num["N"] if np.isscalar(num["N"]) else num["N"][0])
    T = float(num.get("T", 0.1))
    times = [float(t) for t in num.get("snapshot_times", [T])]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    rng = replica_rng(cfg.seed, "dynamics", N, 0)
    config = measures.sample_product(prof, N, vs, rng)
    lat = config.lattice
    basis = test_function_basis(vs.dim)
    Hv = np.stack([H(lat.macro_coords()) for H in basis])
    obs = PairingObserver(times, Hv, vs.tilde_array(), float(N) ** lat.d)

    class Snapshots:
        def __init__(self, times):
            self.times = times

        def observe(self, t, config):
            save_snapshot(config, t, out / f"snapshot_t{t:g}.bin")

    sim = simulate(config, T, observers=[obs, Snapshots(times)], rng=rng,
                   law=law, boundary=bd)
    import csv
    with open(out / "pairings.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "k", "H_id", "value", "N", "seed"])
        for ti, t in enumerate(times):
            for hi, H in enumerate(basis):
                for k in range(vs.dim + 1):
                    w.writerow([t, k, H.name, obs.stacked()[ti, hi, k], N, cfg.seed])
    print(f"simulated N={N} to T={T}: {sim.events.total} events "
          f"(ex {sim.events.ex}, c {sim.events.c}, b {sim.events.b}); outputs in {out}")
    return 0


def cmd_pde(args) -> int:
    cfg = _load_config(args)
    if cfg.kind == "pde-bench":
        rec = harness.run_pde_bench(cfg)
        out = rec.write(args.out, cfg)
        print(f"pde-bench: wrote {', '.join(n + '.csv' for n in rec.tables)} to {out}")
        print(json.dumps(rec.summary, indent=1, default=str))
        return 0
    vs = cfg.velocity_set()
    bd = cfg.boundary(vs)
    prof = cfg.profile(vs)
    num = cfg.numerics
    T = float(num.get("T", 0.1))
    times = [float(t) for t in num.get("snapshot_times", [T])]
    scfg = pde.SolverConfig(M=int(num.get("pde_M", 128)),
                            scheme=num.get("pde_scheme", "explicit"))
    traj = pde.solve(prof, bd, T, scfg, vs, snapshot_times=times,
                     warn=lambda m: print(f"warning: {m}", file=sys.stderr))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    import csv
    with open(out / "pde_trajectory.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time"] + [f"u{j + 1}" for j in range(vs.dim)] + \
                   [f"comp{k}" for k in range(vs.dim + 1)])
        st = pde.initialize(prof, bd, scfg, vs)
        nodes = st.nodes()
        for t, u in zip(traj.times, traj.states):
            flat = u.reshape(-1, vs.dim + 1)
            for p, row in zip(nodes, flat):
                w.writerow([t, *p, *row])
    print(f"pde solve M={scfg.M} to T={T}; clamps={traj.clamp_events}; outputs in {out}")
    return 0


def cmd_experiment(args) -> int:
    cfg = _load_config(args)
    if cfg.kind != args.command:
        print(f"warning: config kind {cfg.kind!r} run as {args.command!r}", file=sys.stderr)
    rec = EXPERIMENTS[args.command](cfg, threads=args.threads)
    out = rec.write(args.out, cfg)
    print(f"{args.command}: wrote {', '.join(n + '.csv' for n in rec.tables)} "
          f"and manifest.json to {out} ({rec.seconds:.1f}s)")
    print(json.dumps(rec.summary, indent=1, default=str))
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="latgas", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a velocity-set file and/or a config")
    p.add_argument("--config", default=None)
    p.add_argument("--velocities", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("simulate", help="one trajectory with snapshots and pairings")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("pde", help="solve the hydrodynamic system, dump CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=cmd_pde)

    for name in ("converge", "stationary", "ensembles", "exact", "diagnostics"):
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=1)
        p.set_defaults(fn=cmd_experiment)

    args = ap.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
