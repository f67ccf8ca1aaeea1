"""Transition energies between minimizing patterns.

The transition energy between two minimizer tuples is the infimum over
window sizes N of the minimal renormalized energy of a chain that follows
the left pattern up to -N and the right pattern (plus a free vertical
offset) from N on.  Only the cells meeting the window contribute, because
pattern cells are exactly zero.  The window minimum is nonincreasing in N,
so doubling N until the value stalls yields the limit.

Each window is a non-convex problem over the free slopes; it is solved by
assignment search (exhaustive for up to 16 free bonds, single-flip descent
with seeded restarts beyond) with an exact convex Newton solve per
assignment.  The previous window's minimizer, extended by the far-field
patterns, seeds the next one, which keeps the computed sequence monotone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoConvergence, NotInMinimizerSet
from .microstates import Microstate, cyclic_shift, minimizer_set_ell, pattern_profile
from .newton import WindowProblem
from .solver_util import assignment_bits

__all__ = [
    "TransitionQuery",
    "WindowSolve",
    "TransitionResult",
    "InvarianceReport",
    "phi_window",
    "phi_converged",
    "invariance_suite",
]

_EXHAUSTIVE_FREE_BONDS = 16
_MEMBERSHIP_TOL = 1e-8


@dataclass(frozen=True)
class TransitionQuery:
    """One window evaluation request between two minimizer tuples."""

    ell: float
    left: tuple
    right: tuple
    window: int
    xi: float | None = None


@dataclass(frozen=True)
class WindowSolve:
    """Minimal window energy with the minimizing free slopes."""

    energy: float
    free_slopes: np.ndarray
    assignment: tuple
    xi_star: float
    exhaustive: bool
    diagnostics: dict


@dataclass(frozen=True)
class TransitionResult:
    """Converged transition energy with the window-size trail."""

    ell: float
    left: tuple
    right: tuple
    window_values: tuple
    value: float
    window: int
    profile_indices: np.ndarray
    profile: np.ndarray
    assignment: tuple
    diagnostics: dict


@dataclass(frozen=True)
class InvarianceReport:
    """Cyclic / offset / subadditivity checks around one transition.

    ``xi_pinned`` rows carry (xi, value, deviation, value at the doubled
    window, deviation there); ``xi_ok`` accepts either a small deviation or
    a clear shrink under window doubling, matching the O(1/N) cost of a
    pinned vertical offset.
    """

    cyclic: tuple
    xi_pinned: tuple
    subadditivity: tuple
    cyclic_ok: bool
    xi_ok: bool
    subadditive_ok: bool


def _as_tuple(state):
    if isinstance(state, Microstate):
        return tuple(float(v) for v in state.slopes)
    return tuple(float(v) for v in state)


def _require_members(ep, ell, *states):
    mset = minimizer_set_ell(ep, ell)
    out = []
    for st in states:
        t = _as_tuple(st)
        if mset.find(t, tol=_MEMBERSHIP_TOL) is None:
            raise NotInMinimizerSet(
                f"tuple {t} is not a minimizer at mean slope {ell}"
            )
        out.append(t)
    return out


def _solve_window(wp, seeds, rng, restarts, gtol):
    """Assignment search over the free bonds of one window."""
    if wp.nfree <= _EXHAUSTIVE_FREE_BONDS:
        sigmas = assignment_bits(wp.nfree)
        slopes, relaxed, energy = wp.solve_batch(sigmas, gtol=gtol)
        pick = int(np.argmin(energy))
        x = slopes[pick]
        # polish through the single path for a certified gradient norm
        res = wp.solve(sigmas[pick], x0=x, gtol=gtol)
        return WindowSolve(
            energy=min(float(energy[pick]), res.energy),
            free_slopes=res.slopes,
            assignment=tuple(int(v) for v in sigmas[pick]),
            xi_star=wp.xi_of(res.slopes),
            exhaustive=True,
            diagnostics={"assignments": int(sigmas.shape[0]), "grad_norm": res.grad_norm},
        )

    candidates = list(seeds)
    for _ in range(restarts):
        candidates.append(rng.integers(1, 3, wp.nfree))
    best = None
    best_sigma = None
    solves = 0
    cache = {}

    def solve(sig):
        nonlocal solves
        key = tuple(int(v) for v in sig)
        hit = cache.get(key)
        if hit is None:
            solves += 1
            hit = wp.solve(np.asarray(sig), gtol=gtol)
            cache[key] = hit
        return hit

    for sig in candidates:
        sigma = np.asarray(sig, dtype=int)
        cur = solve(sigma)
        improved = True
        while improved:
            improved = False
            for t in range(wp.nfree):
                cand = sigma.copy()
                cand[t] = 3 - cand[t]
                trial = solve(cand)
                if trial.relaxed < cur.relaxed - 1e-14:
                    sigma, cur = cand, trial
                    improved = True
        if best is None or cur.energy < best.energy - 1e-14:
            best, best_sigma = cur, sigma
    return WindowSolve(
        energy=best.energy,
        free_slopes=best.slopes,
        assignment=tuple(int(v) for v in best_sigma),
        xi_star=wp.xi_of(best.slopes),
        exhaustive=False,
        diagnostics={"solves": solves, "grad_norm": best.grad_norm},
    )


def _window_seeds(wp, prev=None):
    """Splice assignments at every pattern offset around the window center,
    pure continuations, and the previous window's minimizer extended by the
    far fields."""
    seeds = [wp.splice_sigma(off) for off in range(wp.m)]
    seeds.append(wp.splice_sigma(-wp.N))   # all-right
    seeds.append(wp.splice_sigma(wp.N))    # all-left
    if prev is not None:
        prev_wp, prev_solve = prev
        grow = (wp.N - prev_wp.N)
        x = wp.splice_start(0)
        x[grow:grow + prev_wp.nfree] = prev_solve.free_slopes
        x[:grow] = [wp.left[t % wp.m] for t in range(-wp.N, -prev_wp.N)]
        x[grow + prev_wp.nfree:] = [
            wp.right[t % wp.m] for t in range(prev_wp.N, wp.N)
        ]
        seeds.append(wp.pattern_sigma(x))
        sig = np.empty(wp.nfree, dtype=int)
        sig[:grow] = wp.pattern_sigma(x[:grow])
        sig[grow:grow + prev_wp.nfree] = prev_solve.assignment
        sig[grow + prev_wp.nfree:] = wp.pattern_sigma(x[grow + prev_wp.nfree:])
        seeds.append(sig)
    return seeds


def phi_window(ep, query, seed=0, restarts=20, gtol=1e-10):
    """Minimal window energy for one :class:`TransitionQuery`."""
    left, right = _require_members(ep, query.ell, query.left, query.right)
    wp = WindowProblem(ep, query.ell, left, right, query.window)
    rng = np.random.default_rng(seed)
    if query.xi is None:
        return _solve_window(wp, _window_seeds(wp), rng, restarts, gtol)
    # pinned vertical offset: same search, constrained inner solves
    best = None
    best_sigma = None
    for sig in _window_seeds(wp) + [rng.integers(1, 3, wp.nfree) for _ in range(restarts)]:
        sigma = np.asarray(sig, dtype=int)
        cur = wp.solve(sigma, xi=query.xi, gtol=gtol)
        improved = True
        while improved:
            improved = False
            for t in range(wp.nfree):
                cand = sigma.copy()
                cand[t] = 3 - cand[t]
                trial = wp.solve(cand, xi=query.xi, gtol=gtol)
                if trial.relaxed < cur.relaxed - 1e-14:
                    sigma, cur = cand, trial
                    improved = True
        if best is None or cur.energy < best.energy - 1e-14:
            best, best_sigma = cur, sigma
    return WindowSolve(
        energy=best.energy,
        free_slopes=best.slopes,
        assignment=tuple(int(v) for v in best_sigma),
        xi_star=query.xi,
        exhaustive=False,
        diagnostics={"grad_norm": best.grad_norm, "xi_pinned": query.xi},
    )


def phi_converged(ep, ell, left, right, tol=1e-8, start_window=None, max_window=None,
                  seed=0, restarts=20, gtol=1e-10):
    """Transition energy via window doubling until successive values stall.

    Windows run N0, 2*N0, ... with N0 = 4M by default, stopping when the
    decrease drops below ``tol``; :class:`NoConvergence` (carrying the value
    sequence) fires at the 512M cap.  Seeding each window with the previous
    minimizer keeps the sequence nonincreasing up to solver accuracy.
    """
    left, right = _require_members(ep, ell, left, right)
    m = ep.m
    n0 = int(start_window) if start_window is not None else 4 * m
    cap = int(max_window) if max_window is not None else 512 * m
    rng = np.random.default_rng(seed)
    values = []
    prev = None
    window = n0
    while window <= cap:
        wp = WindowProblem(ep, ell, left, right, window)
        res = _solve_window(wp, _window_seeds(wp, prev), rng, restarts, gtol)
        values.append((window, res.energy))
        if prev is not None and abs(prev[1].energy - res.energy) < tol:
            return _transition_result(ep, ell, left, right, values, wp, res)
        prev = (wp, res)
        window *= 2
    raise NoConvergence(
        f"window energies did not stall within tol={tol} up to N={cap}",
        values=values,
    )


def _transition_result(ep, ell, left, right, values, wp, res):
    mono = all(b[1] <= a[1] + 1e-10 for a, b in zip(values[:-1], values[1:]))
    s = wp.full_slopes(res.free_slopes)
    idx = np.arange(wp.nbonds + 1) - (wp.N + wp.m - 1)
    u0 = pattern_profile(left, int(idx[0]))
    profile = u0 + np.concatenate([[0.0], np.cumsum(s)])
    diagnostics = {
        "monotone": mono,
        "xi_star": res.xi_star,
        "exhaustive_first_window": values[0][0] if res.exhaustive else None,
        "grad_norm": res.diagnostics.get("grad_norm"),
    }
    return TransitionResult(
        ell=ell,
        left=tuple(left),
        right=tuple(right),
        window_values=tuple((int(n), float(v)) for n, v in values),
        value=float(values[-1][1]),
        window=int(values[-1][0]),
        profile_indices=idx,
        profile=profile,
        assignment=res.assignment,
        diagnostics=diagnostics,
    )


def invariance_suite(ep, ell, left, right, window, tol_cyclic=1e-8, tol_xi=1e-6,
                     tol_sub=1e-8, xi_values=(-1.0, 0.0, 1.0), seed=0, restarts=20):
    """Cyclic-shift, pinned-offset and subadditivity checks at fixed window.

    Report-only: finite-window offset discrepancies are expected to shrink
    with the window and are reported, not failed, unless they exceed
    ``tol_xi``.
    """
    left, right = _require_members(ep, ell, left, right)
    m = ep.m
    base = phi_window(ep, TransitionQuery(ell, left, right, window), seed=seed,
                      restarts=restarts)

    cyclic = []
    for q in range(m):
        lq = cyclic_shift(tuple(left), q)
        rq = cyclic_shift(tuple(right), q)
        val = phi_window(ep, TransitionQuery(ell, lq, rq, window), seed=seed,
                         restarts=restarts).energy
        cyclic.append((q, float(val), float(abs(val - base.energy))))

    # Pinning the vertical offset costs O(1/N): the mismatch tilts the
    # profile across the window.  Exact agreement is an N -> infinity
    # statement, so the verifiable finite check is that the discrepancy
    # shrinks when the window doubles.
    base2 = phi_window(ep, TransitionQuery(ell, left, right, 2 * window), seed=seed,
                       restarts=restarts)
    xi_rows = []
    for xi in xi_values:
        val = phi_window(ep, TransitionQuery(ell, left, right, window, xi=xi),
                         seed=seed, restarts=restarts).energy
        val2 = phi_window(ep, TransitionQuery(ell, left, right, 2 * window, xi=xi),
                          seed=seed, restarts=restarts).energy
        xi_rows.append(
            (float(xi), float(val), float(abs(val - base.energy)),
             float(val2), float(abs(val2 - base2.energy)))
        )

    sub_rows = []
    mset = minimizer_set_ell(ep, ell)
    phi_cache = {}

    def phi(a, b):
        key = (a, b)
        if key not in phi_cache:
            phi_cache[key] = phi_window(ep, TransitionQuery(ell, a, b, window),
                                        seed=seed, restarts=restarts).energy
        return phi_cache[key]

    phi_cache[(tuple(left), tuple(right))] = base.energy
    for mid in mset.members:
        t = mid.slopes
        lhs = phi(tuple(left), tuple(right))
        rhs = phi(tuple(left), t) + phi(t, tuple(right))
        sub_rows.append((t, float(lhs), float(rhs), bool(lhs <= rhs + tol_sub)))

    return InvarianceReport(
        cyclic=tuple(cyclic),
        xi_pinned=tuple(xi_rows),
        subadditivity=tuple(sub_rows),
        cyclic_ok=all(dev <= tol_cyclic for _, _, dev in cyclic),
        xi_ok=all(
            dev2 <= tol_xi or dev2 <= 0.75 * dev + 1e-10
            for _, _, dev, _, dev2 in xi_rows
        ),
        subadditive_ok=all(ok for *_, ok in sub_rows),
    )
