"""Run-configuration parsing, validation and deterministic serialization."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .potentials import ConvexWell, DoubleWell, LongRangePotential

__all__ = ["RunConfig", "load_config", "canonical_json"]

_SOLVER_DEFAULTS = {
    "budget": None,
    "restarts": 20,
    "anneal": True,
    "t0": 0.05,
    "cooling": 0.95,
    "certify": True,
}

_TRANSITION_DEFAULTS = {
    "pair": [0, 1],
    "patterns": None,
    "tol": 1e-8,
    "start_window": None,
    "max_window": None,
    "restarts": 20,
}

_TOLERANCE_DEFAULTS = {
    "gtol": 1e-10,
    "mean_tol": 1e-9,
}


@dataclass
class RunConfig:
    """Validated run configuration with every default made explicit."""

    potential: dict
    m: int
    n: list
    ell: list
    L: float
    grid_step: float
    csv_step: float
    seed: int
    threads: int
    out_dir: str
    solver: dict
    transition: dict
    analyze: dict
    tolerances: dict
    raw: dict = field(repr=False, default_factory=dict)

    def double_well(self):
        return DoubleWell.from_dict(
            {
                "w1": self.potential["w1"],
                "w2": self.potential["w2"],
                "growth_constant": self.potential.get("growth_constant"),
            }
        )

    def long_range(self):
        return LongRangePotential.from_dict(self.potential["psi_m"])

    def effective_potential(self):
        from .effective_potential import EffectivePotential

        return EffectivePotential(
            self.double_well(),
            self.long_range(),
            self.m,
            z_range=self.potential.get("slope_range"),
            grid_step=self.grid_step,
        )

    def resolved(self):
        """Fully-resolved configuration dict echoed into every artifact."""
        return {
            "potential": self.potential,
            "M": self.m,
            "n": list(self.n),
            "ell": list(self.ell),
            "L": self.L,
            "grid_step": self.grid_step,
            "csv_step": self.csv_step,
            "seed": self.seed,
            "threads": self.threads,
            "out_dir": self.out_dir,
            "solver": self.solver,
            "transition": self.transition,
            "analyze": self.analyze,
            "tolerances": self.tolerances,
        }


def _well_dict(problems, field_name, data):
    if not isinstance(data, dict):
        problems.append((field_name, "expected an object describing a well"))
        return None
    try:
        return ConvexWell.from_dict(data).to_dict()
    except (KeyError, ValueError, TypeError) as exc:
        problems.append((field_name, str(exc)))
        return None


def _as_positive(problems, field_name, value, kind=float):
    try:
        out = kind(value)
    except (TypeError, ValueError):
        problems.append((field_name, f"expected a {kind.__name__}, got {value!r}"))
        return None
    if not out > 0:
        problems.append((field_name, f"must be positive, got {out}"))
        return None
    return out


def _ell_list(problems, value):
    if isinstance(value, dict):
        try:
            start, stop = float(value["start"]), float(value["stop"])
            count = int(value["count"])
        except (KeyError, TypeError, ValueError):
            problems.append(("ell", "grid form needs numeric start/stop and integer count"))
            return []
        if count < 1:
            problems.append(("ell", f"grid count must be >= 1, got {count}"))
            return []
        return [float(v) for v in np.linspace(start, stop, count)]
    if isinstance(value, (list, tuple)):
        try:
            return [float(v) for v in value]
        except (TypeError, ValueError):
            problems.append(("ell", "list entries must be numbers"))
            return []
    try:
        return [float(value)]
    except (TypeError, ValueError):
        problems.append(("ell", f"expected a number, list or grid object, got {value!r}"))
        return []


def load_config(path=None, data=None, overrides=None):
    """Parse and validate a run configuration.

    Raises :class:`ConfigError` carrying (field, message) diagnostics for
    every problem found.
    """
    if data is None:
        with open(path, "r", encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError([("<file>", f"invalid JSON: {exc}")])
    problems = []
    raw = dict(data)
    for key, value in (overrides or {}).items():
        raw[key] = value

    pot_in = raw.get("potential")
    potential = {}
    if not isinstance(pot_in, dict):
        problems.append(("potential", "missing or not an object"))
    else:
        for name in ("w1", "w2", "psi_m"):
            if name not in pot_in:
                problems.append((f"potential.{name}", "missing"))
            else:
                well = _well_dict(problems, f"potential.{name}", pot_in[name])
                if well is not None:
                    potential[name] = well
        if "growth_constant" in pot_in and pot_in["growth_constant"] is not None:
            gc = _as_positive(problems, "potential.growth_constant", pot_in["growth_constant"])
            if gc is not None:
                potential["growth_constant"] = gc
        if pot_in.get("slope_range") is not None:
            sr = pot_in["slope_range"]
            if (
                not isinstance(sr, (list, tuple))
                or len(sr) != 2
                or not all(isinstance(v, (int, float)) for v in sr)
                or not sr[0] < sr[1]
            ):
                problems.append(("potential.slope_range", "expected [lo, hi] with lo < hi"))
            else:
                potential["slope_range"] = [float(sr[0]), float(sr[1])]

    m = raw.get("M")
    if not isinstance(m, int) or isinstance(m, bool) or m < 2:
        problems.append(("M", f"must be an integer >= 2, got {m!r}"))
        m = 2

    n_in = raw.get("n", [])
    n_list = n_in if isinstance(n_in, (list, tuple)) else [n_in]
    n_out = []
    for k, v in enumerate(n_list):
        if not isinstance(v, int) or isinstance(v, bool) or v < m:
            problems.append((f"n[{k}]", f"must be an integer >= M={m}, got {v!r}"))
        else:
            n_out.append(v)

    ell = _ell_list(problems, raw.get("ell", 0.0))
    L = _as_positive(problems, "L", raw.get("L", 1.0)) or 1.0
    grid_step = _as_positive(problems, "grid_step", raw.get("grid_step", 1e-4)) or 1e-4
    csv_step = _as_positive(problems, "csv_step", raw.get("csv_step", 1e-2)) or 1e-2

    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        problems.append(("seed", f"must be a nonnegative integer, got {seed!r}"))
        seed = 0
    threads = raw.get("threads", 1)
    if not isinstance(threads, int) or isinstance(threads, bool) or threads < 1:
        problems.append(("threads", f"must be a positive integer, got {threads!r}"))
        threads = 1

    out_dir = raw.get("out_dir", "out")
    if not isinstance(out_dir, str) or not out_dir:
        problems.append(("out_dir", "must be a nonempty string"))
        out_dir = "out"

    solver = dict(_SOLVER_DEFAULTS)
    solver_in = raw.get("solver", {})
    if not isinstance(solver_in, dict):
        problems.append(("solver", "must be an object"))
    else:
        for key in solver_in:
            if key not in _SOLVER_DEFAULTS:
                problems.append((f"solver.{key}", "unknown key"))
        solver.update({k: v for k, v in solver_in.items() if k in _SOLVER_DEFAULTS})
    if solver["budget"] is not None:
        budget = solver["budget"]
        if not isinstance(budget, int) or isinstance(budget, bool) or budget < 1:
            problems.append(("solver.budget", f"must be a positive integer, got {budget!r}"))

    transition = dict(_TRANSITION_DEFAULTS)
    tr_in = raw.get("transition", {})
    if not isinstance(tr_in, dict):
        problems.append(("transition", "must be an object"))
    else:
        for key in tr_in:
            if key not in _TRANSITION_DEFAULTS:
                problems.append((f"transition.{key}", "unknown key"))
        transition.update({k: v for k, v in tr_in.items() if k in _TRANSITION_DEFAULTS})
    if _as_positive(problems, "transition.tol", transition["tol"]) is None:
        transition["tol"] = 1e-8

    analyze = raw.get("analyze", {})
    if not isinstance(analyze, dict):
        problems.append(("analyze", "must be an object"))
        analyze = {}

    tolerances = dict(_TOLERANCE_DEFAULTS)
    tol_in = raw.get("tolerances", {})
    if not isinstance(tol_in, dict):
        problems.append(("tolerances", "must be an object"))
    else:
        for key, value in tol_in.items():
            if key not in _TOLERANCE_DEFAULTS:
                problems.append((f"tolerances.{key}", "unknown key"))
                continue
            val = _as_positive(problems, f"tolerances.{key}", value)
            if val is not None:
                tolerances[key] = val

    if problems:
        raise ConfigError(problems)

    return RunConfig(
        potential=potential,
        m=m,
        n=n_out,
        ell=ell,
        L=L,
        grid_step=grid_step,
        csv_step=csv_step,
        seed=seed,
        threads=threads,
        out_dir=out_dir,
        solver=solver,
        transition=transition,
        analyze=analyze,
        tolerances=tolerances,
        raw=raw,
    )


def _format_float(x):
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    if x == int(x) and abs(x) < 1e15:
        return f"{x:.1f}"
    return f"{x:.17g}"


def canonical_json(obj, indent=0):
    """Deterministic JSON: sorted keys, floats at 17 significant digits.

    Identical inputs produce byte-identical output; infinities serialize as
    the strings "inf" / "-inf".
    """
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _format_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        parts = [canonical_json(v, indent + 1) for v in obj]
        return "[\n" + ",\n".join(inner + p for p in parts) + "\n" + pad + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        parts = [
            f"{inner}{json.dumps(str(k))}: {canonical_json(v, indent + 1)}"
            for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))
        ]
        return "{\n" + ",\n".join(parts) + "\n" + pad + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")
