"""Command-line driver: envelope curves, minimizer sets, chain solves, sweeps.

Every subcommand reads one JSON run configuration, writes a JSON result
document (and CSV curves where they help plotting) into the output
directory, and echoes the fully-resolved configuration plus the tool
version into each artifact.  The same configuration and seed produce
byte-identical artifacts.

Exit codes: 0 success, 2 configuration validation failure, 3 window
extrapolation failed to converge.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    detect_interfaces,
    gamma_limit_compare,
    m_interpolations,
    shift_periodicity_check,
    volume_fraction_gap,
)
from .config import canonical_json, load_config
from .errors import ConfigError, NoConvergence
from .lattice_energy import chain_from_dict, chain_to_dict, total_renormalized_energy
from .microstates import minimizer_set_ell
from .solver import global_minimize
from .transition import phi_converged

__all__ = ["main"]


def _microstate_dict(ms):
    return {
        "slopes": list(ms.slopes),
        "alpha": ms.alpha,
        "well1_count": ms.well1_count,
        "orbit": ms.orbit,
        "offset": ms.offset,
    }


def _set_dict(mset):
    return {
        "ell": mset.ell,
        "regime": mset.regime,
        "boundary": mset.boundary,
        "size": len(mset),
        "members": [_microstate_dict(ms) for ms in mset.members],
    }


def _envelope_dict(env):
    return {
        "grid_step": env.grid_step,
        "warnings": list(env.warnings),
        "contacts": [
            {"branch": c.branch, "left": c.left, "right": c.right} for c in env.contacts
        ],
        "segments": [
            {
                "left": s.left,
                "right": s.right,
                "left_branch": s.left_branch,
                "right_branch": s.right_branch,
                "slope": s.slope,
                "intercept": s.intercept,
                "refined": s.refined,
            }
            for s in env.segments
        ],
    }


def _write(outdir, name, document):
    path = outdir / name
    path.write_text(canonical_json(document) + "\n", encoding="utf-8")
    return path


def _write_csv(outdir, name, header, rows):
    path = outdir / name
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(f"{v:.17g}" if isinstance(v, float) else str(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _document(cfg, subcommand, result):
    return {
        "tool": "dwchain",
        "version": __version__,
        "subcommand": subcommand,
        "config": cfg.resolved(),
        "result": result,
    }


def _regime_of(ep, ell):
    kind, k = ep.envelope.locate(ell)
    if kind == "segment":
        return "segment"
    return f"contact-branch-{ep.envelope.contacts[k].branch}"


def _cmd_psi0(cfg, ep, outdir):
    rows = []
    for ell in cfg.ell:
        value, argmin = ep.psi0(ell)
        rows.append({"ell": ell, "psi0": value, "argmin": list(argmin),
                     "envelope": float(ep.envelope_value(ell))})
    _write(outdir, "psi0.json", _document(cfg, "psi0", {"points": rows}))
    _write_csv(outdir, "psi0.csv", ["z", "psi0", "psi0_envelope"],
               [(r["ell"], r["psi0"], r["envelope"]) for r in rows])
    return 0


def _cmd_envelope(cfg, ep, outdir):
    env = ep.envelope
    _write(outdir, "envelope.json", _document(cfg, "envelope", _envelope_dict(env)))
    lo, hi = ep.z_range
    count = int(round((hi - lo) / cfg.csv_step)) + 1
    zs = np.linspace(lo, hi, count)
    psi0 = ep.psi0_values(zs)
    psi0_env = ep.envelope_value(zs)
    _write_csv(outdir, "envelope.csv", ["z", "psi0", "psi0_envelope"],
               [(float(z), float(a), float(b)) for z, a, b in zip(zs, psi0, psi0_env)])
    return 0


def _cmd_microstates(cfg, ep, outdir):
    sets = [_set_dict(minimizer_set_ell(ep, ell)) for ell in cfg.ell]
    _write(outdir, "microstates.json", _document(cfg, "microstates", {"sets": sets}))
    return 0


def _cmd_minimize(cfg, ep, outdir):
    results = []
    for n in cfg.n:
        for ell in cfg.ell:
            res = global_minimize(
                ep, n, cfg.m, ell,
                budget=cfg.solver["budget"],
                seed=cfg.seed,
                restarts=cfg.solver["restarts"],
                anneal=cfg.solver["anneal"],
                t0=cfg.solver["t0"],
                cooling=cfg.solver["cooling"],
                certify=cfg.solver["certify"],
                gtol=cfg.tolerances["gtol"],
            )
            results.append(
                {
                    "n": n,
                    "ell": ell,
                    "energy": res.energy,
                    "assignment": list(res.assignment),
                    "optimality": res.optimality,
                    "trace": res.trace,
                    "chain": chain_to_dict(res.config),
                }
            )
    _write(outdir, "minimize.json", _document(cfg, "minimize", {"solves": results}))
    if len(results) == 1:
        _write(outdir, "chain.json", results[0]["chain"])
    return 0


def _resolve_pair(cfg, ep, ell):
    tr = cfg.transition
    if tr.get("patterns"):
        left, right = (tuple(float(v) for v in p) for p in tr["patterns"])
        return left, right
    mset = minimizer_set_ell(ep, ell)
    i, j = tr["pair"]
    try:
        return mset.members[i].slopes, mset.members[j].slopes
    except IndexError:
        raise ConfigError(
            [("transition.pair", f"indices {tr['pair']} out of range for "
              f"{len(mset)} minimizers at ell={ell}")]
        )


def _cmd_phi(cfg, ep, outdir):
    ell = cfg.ell[0]
    left, right = _resolve_pair(cfg, ep, ell)
    res = phi_converged(
        ep, ell, left, right,
        tol=cfg.transition["tol"],
        start_window=cfg.transition["start_window"],
        max_window=cfg.transition["max_window"],
        seed=cfg.seed,
        restarts=cfg.transition["restarts"],
        gtol=cfg.tolerances["gtol"],
    )
    result = {
        "ell": ell,
        "left": list(res.left),
        "right": list(res.right),
        "value": res.value,
        "window": res.window,
        "window_values": [{"N": n, "phi": v} for n, v in res.window_values],
        "assignment": list(res.assignment),
        "diagnostics": res.diagnostics,
        "profile": {
            "i": [int(v) for v in res.profile_indices],
            "u": [float(v) for v in res.profile],
        },
    }
    _write(outdir, "phi.json", _document(cfg, "phi", result))
    return 0


def _cmd_analyze(cfg, ep, outdir):
    spec = cfg.analyze
    if "chain" in spec:
        chain_path = Path(spec["chain"])
        chain = chain_from_dict(json.loads(chain_path.read_text(encoding="utf-8")))
    elif "slopes" in spec:
        chain = chain_from_dict(
            {
                "n": len(spec["slopes"]),
                "M": cfg.m,
                "ell": spec.get("ell", cfg.ell[0]),
                "L": cfg.L,
                "slopes": spec["slopes"],
            }
        )
    else:
        raise ConfigError([("analyze", "needs either 'chain' (path) or 'slopes' (list)")])
    phases = detect_interfaces(chain, ep, eta=spec.get("eta"))
    breakdown = total_renormalized_energy(chain, ep, mean_tol=cfg.tolerances["mean_tol"])
    shift = shift_periodicity_check(chain, ep)
    result = {
        "n": chain.n,
        "ell": chain.ell,
        "q": phases.q,
        "e1": breakdown.e1,
        "e1_quotient": breakdown.e1_quotient,
        "eta": phases.eta,
        "interfaces": list(phases.interfaces),
        "high_cells": list(phases.high_cells),
        "counting_bound_ok": phases.counting_bound_ok,
        "segments": [
            {
                "start": s.start,
                "end": s.end,
                "alpha": s.alpha,
                "label": list(s.label.slopes),
                "error": s.error,
            }
            for s in phases.segments
        ],
        "pairs": [
            {"left": list(a.slopes), "right": list(b.slopes)} for a, b in phases.pairs
        ],
        "volume_fraction_gap": volume_fraction_gap(chain, phases),
        "shift_check": {
            "deviations": list(shift.deviations),
            "trivial": list(shift.trivial),
            "rotation": shift.rotation,
            "tolerance": shift.tolerance,
            "passed": shift.passed,
        },
        "shift_map": list(phases.shift_map),
    }
    if spec.get("gamma_compare"):
        rep = gamma_limit_compare(chain, ep, phases, tol=cfg.transition["tol"],
                                  seed=cfg.seed)
        result["gamma"] = {
            "e1": rep.e1,
            "phi_total": rep.phi_total,
            "gap_abs": rep.gap_abs,
            "gap_rel": rep.gap_rel,
        }
    _write(outdir, "analysis.json", _document(cfg, "analyze", result))
    from .lattice_energy import cell_energies

    cells = cell_energies(chain, ep)
    _write_csv(outdir, "cells.csv", ["cell", "energy"],
               [(int(i), float(v)) for i, v in enumerate(cells)])
    tracks, remainder = m_interpolations(chain)
    rows = []
    for block in range(tracks.shape[1]):
        rows.append((block, *[float(tracks[k, block]) for k in range(chain.m)]))
    _write_csv(outdir, "tracks.csv", ["block", *[f"track_{k}" for k in range(chain.m)]], rows)
    return 0


def _sweep_point(ep, ell):
    mset = minimizer_set_ell(ep, ell)
    value, argmin = ep.psi0(ell)
    return {
        "ell": ell,
        "regime": mset.regime,
        "boundary": mset.boundary,
        "set_size": len(mset),
        "psi0": value,
        "psi0_envelope": float(ep.envelope_value(ell)),
        "argmin": list(argmin),
    }


def _cmd_sweep(cfg, ep, outdir):
    ep.envelope  # build once before fanning out
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            rows = list(pool.map(lambda ell: _sweep_point(ep, ell), cfg.ell))
    else:
        rows = [_sweep_point(ep, ell) for ell in cfg.ell]
    _write(outdir, "sweep.json", _document(cfg, "sweep", {"points": rows}))
    _write_csv(
        outdir,
        "sweep.csv",
        ["ell", "regime", "set_size", "psi0", "psi0_envelope"],
        [(r["ell"], r["regime"], r["set_size"], r["psi0"], r["psi0_envelope"]) for r in rows],
    )
    return 0


_COMMANDS = {
    "psi0": _cmd_psi0,
    "envelope": _cmd_envelope,
    "microstates": _cmd_microstates,
    "minimize": _cmd_minimize,
    "phi": _cmd_phi,
    "analyze": _cmd_analyze,
    "sweep": _cmd_sweep,
}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="dwchain",
        description="Double-well lattice chains: effective potential, minimizers, "
                    "interfaces and transition energies.",
    )
    parser.add_argument("subcommand", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="path to the JSON run configuration")
    parser.add_argument("--out", default=None, help="output directory (overrides config)")
    parser.add_argument("--seed", type=int, default=None, help="RNG seed (overrides config)")
    parser.add_argument("--threads", type=int, default=None, help="worker threads (overrides config)")
    args = parser.parse_args(argv)

    overrides = {}
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.threads is not None:
        overrides["threads"] = args.threads

    try:
        cfg = load_config(args.config, overrides=overrides)
        outdir = Path(cfg.out_dir)
        outdir.mkdir(parents=True, exist_ok=True)
        ep = cfg.effective_potential()
        return _COMMANDS[args.subcommand](cfg, ep, outdir)
    except ConfigError as exc:
        for field_name, message in exc.problems:
            print(f"config error at {field_name}: {message}", file=sys.stderr)
        return 2
    except NoConvergence as exc:
        print(f"no convergence: {exc}", file=sys.stderr)
        for window, value in exc.values:
            print(f"  N={window}: {value!r}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
