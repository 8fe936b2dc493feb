"""Batch front end: config ingestion, runs, sweeps, oracle curves, losses.

Subcommands::

    becsteer run    --config fig2a.cfg --out results/ [--workers N]
    becsteer sweep  --config sweep.cfg --out results/ [--workers N]
    becsteer oracle --config fig2a.cfg --out results/
    becsteer losses --config fig3.cfg  --out results/
    becsteer check

Results are written as a CSV (12 significant digits, fixed column order, so
identical configs give byte-identical files regardless of worker count) plus
a JSON manifest echoing the resolved config, versions and timings.
Exit codes: 0 success, 2 at least one sweep point failed, 1 fatal error.
"""

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .config import ConfigError, load_config, CONFIG_VERSION
from .losses import loss_estimate
from .meanfield import ground_state
from .sequence import component_potentials, run_point, prepare_initial

CSV_COLUMNS = ("t_total_s", "t_int_s", "E_EPR", "alpha_opt", "beta_opt",
               "spin_len_a", "spin_len_b", "overlap_a", "overlap_b",
               "inferred_var_1", "inferred_var_2", "oracle_E_EPR")


def _sig(x):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    return f"{float(x):.12g}"


def _write_table(path, columns, rows, fmt):
    if fmt == "json":
        data = [dict(zip(columns, [None if isinstance(v, float) and math.isnan(v)
                                   else v for v in row])) for row in rows]
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(data, fh, indent=1)
            fh.write("\n")
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(columns) + "\n")
            for row in rows:
                fh.write(",".join(_sig(v) for v in row) + "\n")


def _manifest(path, cfg, command, timings, points):
    doc = {
        "tool": "becsteer",
        "version": __version__,
        "config_version": CONFIG_VERSION,
        "command": command,
        "config_echo": cfg.echo(),
        "timings_s": timings,
        "points": points,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def _point_job(payload):
    """One protocol point, run in a worker process."""
    values, t_int, prep, snapshot_path, with_oracle = payload
    from .config import RunConfig
    from .oracle4mode import adiabatic_phases, evolve_exact, pulse_state, \
        oracle_witness

    cfg = RunConfig(values)
    proto = cfg.protocol(snapshot_path=snapshot_path)
    t0 = time.time()
    try:
        point = run_point(proto, t_int, params=cfg.params, prep=prep)
    except Exception as exc:  # noqa: BLE001 - per-point fault isolation
        from .sequence import PointResult
        point = PointResult(t_int=t_int, t_total=2.0 * proto.t_ramp + t_int,
                            error=f"{type(exc).__name__}: {exc}")
    oracle_e = float("nan")
    if with_oracle and point.error is None:
        phis = adiabatic_phases(proto, t_int, params=cfg.params,
                                n_samples=values["oracle_samples"],
                                dn=values["oracle_dn"])
        st = evolve_exact(pulse_state(proto.n_a, proto.n_b,
                                      proto.pulse_amplitudes()), *phis)
        oracle_e = oracle_witness(st).e_epr
    return point, oracle_e, time.time() - t0


def _rows_from_points(cfg, jobs_out):
    rows, notes, nfail = [], [], 0
    omega = cfg.params.omega
    for point, oracle_e, dt_s in jobs_out:
        if point.error is not None:
            nfail += 1
            notes.append({"t_int": point.t_int, "status": "failed",
                          "error": point.error, "seconds": dt_s})
            continue
        r = point.result
        rows.append((point.t_total / omega, point.t_int / omega, r.e_epr,
                     r.alpha, r.beta, r.spin_len_a, r.spin_len_b,
                     r.overlap_a, r.overlap_b, r.inferred_var_1,
                     r.inferred_var_2, oracle_e))
        notes.append({"t_int": point.t_int, "status": "ok", "seconds": dt_s})
    return rows, notes, nfail


def _run_points(cfg, args, out_dir):
    """Shared engine for `run`: scan the configured hold times."""
    t0 = time.time()
    proto = cfg.protocol()
    prep = prepare_initial(proto, cfg.params, tol=cfg.values["gs_tol"])
    t_prep = time.time() - t0

    payloads = []
    for i, t_int in enumerate(proto.t_int):
        snap = os.path.join(out_dir, f"snapshot_point{i}.txt") \
            if args.snapshot else None
        payloads.append((cfg.values, t_int, prep, snap,
                         cfg.values["with_oracle"]))

    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            jobs_out = list(pool.map(_point_job, payloads))
    else:
        jobs_out = [_point_job(p) for p in payloads]

    rows, notes, nfail = _rows_from_points(cfg, jobs_out)
    _write_table(os.path.join(out_dir, "results." + args.format),
                 CSV_COLUMNS, rows, args.format)
    _manifest(os.path.join(out_dir, "manifest.json"), cfg, "run",
              {"prepare": t_prep, "total": time.time() - t0}, notes)
    return 2 if nfail else 0


def _cmd_run(cfg, args, out_dir):
    return _run_points(cfg, args, out_dir)


def _cmd_sweep(cfg, args, out_dir):
    t0 = time.time()
    ns = cfg.values["sweep_n"] or [cfg.values["n_a"]]
    dzs = cfg.values["sweep_dz_max"] or [cfg.values["dz_max"]]
    trs = cfg.values["sweep_t_ramp"] or [cfg.values["t_ramp"]]

    combos = [(n, dz, tr) for n in ns for dz in dzs for tr in trs]
    payloads = []
    for n, dz, tr in combos:
        values = dict(cfg.values)
        values.update(n_a=n, n_b=n, dz_max=dz, t_ramp=tr)
        for t_int in values["t_int"]:
            payloads.append((values, t_int, None, None, values["with_oracle"]))

    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            jobs_out = list(pool.map(_point_job, payloads))
    else:
        jobs_out = [_point_job(p) for p in payloads]

    columns = ("n_a", "n_b", "dz_max", "t_ramp") + CSV_COLUMNS
    rows, notes, nfail = [], [], 0
    omega = cfg.params.omega
    i = 0
    for n, dz, tr in combos:
        for _t in cfg.values["t_int"]:
            point, oracle_e, dt_s = jobs_out[i]
            i += 1
            tag = {"n": n, "dz_max": dz, "t_ramp": tr, "t_int": point.t_int,
                   "seconds": dt_s}
            if point.error is not None:
                nfail += 1
                notes.append({**tag, "status": "failed", "error": point.error})
                continue
            r = point.result
            rows.append((n, n, dz, tr, point.t_total / omega,
                         point.t_int / omega, r.e_epr, r.alpha, r.beta,
                         r.spin_len_a, r.spin_len_b, r.overlap_a, r.overlap_b,
                         r.inferred_var_1, r.inferred_var_2, oracle_e))
            notes.append({**tag, "status": "ok"})
    _write_table(os.path.join(out_dir, "results." + args.format),
                 columns, rows, args.format)
    _manifest(os.path.join(out_dir, "manifest.json"), cfg, "sweep",
              {"total": time.time() - t0}, notes)
    return 2 if nfail else 0


def _cmd_oracle(cfg, args, out_dir):
    from .oracle4mode import (adiabatic_phases, evolve_exact, pulse_state,
                              oracle_witness)
    t0 = time.time()
    proto = cfg.protocol()
    C = proto.pulse_amplitudes()
    rows, notes = [], []
    phis_ab = cfg.values["oracle_phi_ab"]
    if phis_ab is not None:
        # direct mode: twisting phases given, no spatial solve
        def axis(key, n):
            v = cfg.values[key]
            if v is None:
                return [0.0] * n
            return v * n if len(v) == 1 else v
        n = len(phis_ab)
        phis_a = axis("oracle_phi_a", n)
        phis_b = axis("oracle_phi_b", n)
        columns = ("phi_a", "phi_b", "phi_ab", "oracle_E_EPR",
                   "alpha_opt", "beta_opt")
        for pa, pb, pab in zip(phis_a, phis_b, phis_ab):
            st = evolve_exact(pulse_state(proto.n_a, proto.n_b, C), pa, pb, pab)
            r = oracle_witness(st)
            rows.append((pa, pb, pab, r.e_epr, r.alpha, r.beta))
    else:
        columns = ("t_total_s", "t_int_s", "phi_a", "phi_b", "phi_ab",
                   "oracle_E_EPR", "alpha_opt", "beta_opt")
        omega = cfg.params.omega
        for t_int in proto.t_int:
            phis = adiabatic_phases(proto, t_int, params=cfg.params,
                                    n_samples=cfg.values["oracle_samples"],
                                    dn=cfg.values["oracle_dn"])
            st = evolve_exact(pulse_state(proto.n_a, proto.n_b, C), *phis)
            r = oracle_witness(st)
            rows.append(((2 * proto.t_ramp + t_int) / omega, t_int / omega,
                         *phis, r.e_epr, r.alpha, r.beta))
    _write_table(os.path.join(out_dir, "oracle." + args.format),
                 columns, rows, args.format)
    _manifest(os.path.join(out_dir, "manifest.json"), cfg, "oracle",
              {"total": time.time() - t0}, notes)
    return 0


def _cmd_losses(cfg, args, out_dir):
    t0 = time.time()
    proto = cfg.protocol()
    grid = proto.build_grid()
    pots = component_potentials(grid, proto, proto.t_ramp, 0.0)
    ns = np.array([proto.n_a / 2.0, proto.n_a / 2.0,
                   proto.n_b / 2.0, proto.n_b / 2.0])
    st = ground_state(grid, ns, pots, cfg.params.g4(),
                      tol=cfg.values["gs_tol"])
    budget = loss_estimate(grid, st.psi, ns, cfg.params, cfg.values["t_loss"])
    doc = {
        "t_hold_s": budget.t,
        "rate_1b_atoms_per_s": budget.rate_1b,
        "rate_2b_11_atoms_per_s": budget.rate_2b_11,
        "rate_2b_01_atoms_per_s": budget.rate_2b_01,
        "rate_3b_atoms_per_s": budget.rate_3b,
        "n_lost": budget.n_lost,
        "n_lost_2b": budget.n_lost_2b,
        "lost_fraction": budget.lost_fraction,
    }
    with open(os.path.join(out_dir, "losses.json"), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
    print(f"losses over {budget.t:g} s: {budget.n_lost:.3g} atoms "
          f"({budget.n_lost_2b:.3g} two-body), "
          f"fraction {budget.lost_fraction:.3g}")
    _manifest(os.path.join(out_dir, "manifest.json"), cfg, "losses",
              {"total": time.time() - t0}, [])
    return 0


def _cmd_check(args):
    """Fast invariant suite on tiny grids; prints one line per check."""
    checks = []

    def check(name, fn):
        try:
            fn()
            checks.append((name, True, ""))
        except Exception as exc:  # noqa: BLE001
            checks.append((name, False, f"{type(exc).__name__}: {exc}"))

    from .grid import build_grid, inner
    from .meanfield import PhysicalParams, gpe_residual
    from .fockflow import init_trajectories
    from .correlators import spin_moments, epr_witness, brute_force_average
    from .oracle4mode import pulse_state, evolve_exact, oracle_moments

    par = PhysicalParams()
    g4 = par.g4()
    grid = build_grid(10, 16, 0.45, 0.45, -3.6)

    def _lap_hermitian():
        rng = np.random.default_rng(0)
        f = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
        g = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
        lhs = inner(grid, f, grid.laplacian(g))
        rhs = inner(grid, grid.laplacian(f), g)
        assert abs(lhs - rhs) < 1e-10 * abs(lhs)
    check("laplacian hermitian under volume weights", _lap_hermitian)

    V = 0.5 * (grid.r[:, None] ** 2 + grid.z[None, :] ** 2) * np.ones((4, 1, 1))
    gs = {}

    def _ground():
        st = ground_state(grid, np.array([10., 10., 10., 10.]), V, g4)
        res = gpe_residual(grid, st.psi, st.fock.as_array(), V, g4)
        gs["st"] = st
        assert res.max() < 1e-7
    check("ground state stationary to 1e-7", _ground)

    def _pipeline():
        st = gs["st"]
        traj = init_trajectories(grid, g4, 20, 20, st.psi, beta=1)
        C = np.ones(4) / math.sqrt(2)
        for _ in range(40):
            traj.advance(lambda t: V, 0.01)
        assert abs(traj.theta(1, 1) + traj.theta(-1, -1)) < 1e-14
        assert traj.theta(0, 0) == 0.0
        inp = traj.correlator_inputs(C)
        m = spin_moments(inp)
        r = epr_witness(m)
        assert 0.0 < r.e_epr < 1.5
        # fast vs brute force on a one-body term
        from .correlators import MultiIndex, fock_sum_average
        t = MultiIndex((1, 0, 0, 0), (0, 1, 0, 0))
        f = fock_sum_average(inp, t)
        b = brute_force_average(inp, t)
        assert abs(f - b) < 1e-9 * max(abs(b), 1.0)
    check("evolved pipeline: theta antisymmetry, witness, brute force",
          _pipeline)

    def _oracle():
        C = np.ones(4) / math.sqrt(2)
        st = evolve_exact(pulse_state(16, 4, C), 0.11, 0.0, 0.0)
        m = oracle_moments(st)
        target = 8.0 * math.cos(0.11) ** 15
        assert abs(m.mean[0] - target) < 1e-10
    check("four-mode oracle matches twisting closed form", _oracle)

    ok = True
    for name, good, msg in checks:
        print(f"{'PASS' if good else 'FAIL'}: {name}" + (f" ({msg})" if msg else ""))
        ok &= good
    return 0 if ok else 1


def main(argv=None):
    ap = argparse.ArgumentParser(prog="becsteer", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("run", "sweep", "oracle", "losses"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=".")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--snapshot", action="store_true")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--set", action="append", default=[],
                       help="override a config key, e.g. --set 'n_a = 50'")
    sub.add_parser("check")
    args = ap.parse_args(argv)

    if args.command == "check":
        return _cmd_check(args)

    try:
        cfg = load_config(args.config, overrides=args.set)
    except (OSError, ConfigError) as exc:
        print(f"becsteer: {exc}", file=sys.stderr)
        return 1
    os.makedirs(args.out, exist_ok=True)
    try:
        if args.command == "run":
            return _cmd_run(cfg, args, args.out)
        if args.command == "sweep":
            return _cmd_sweep(cfg, args, args.out)
        if args.command == "oracle":
            return _cmd_oracle(cfg, args, args.out)
        return _cmd_losses(cfg, args, args.out)
    except Exception as exc:  # noqa: BLE001 - fatal path contract
        print(f"becsteer: fatal: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
