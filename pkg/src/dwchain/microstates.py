"""Minimizer tuples of the constrained M-slope problem and their orbits.

A microstate is an M-tuple of slopes minimizing sum_k psi1(z_k) at a fixed
average.  For a double well every minimizer takes at most two values, the
unique branch solution (z1, z2) of the optimal occupancy j, so the minimizer
set at one average consists of all C(M, j) arrangements.  On an affine
bridge segment of the envelope the minimizer set is the union of the sets at
the two bridge endpoints.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Microstate",
    "MicrostateSet",
    "minimizer_set_alpha",
    "minimizer_set_ell",
    "pattern_profile",
    "cyclic_shift",
    "classification_threshold",
]

_BOUNDARY_TOL = 1e-9


@dataclass(frozen=True)
class Microstate:
    """One minimizing M-tuple with its average and well-1 occupancy.

    ``orbit`` indexes the cyclic-rotation orbit inside the containing set and
    ``offset`` is the rotation distance from the orbit's canonical (lexico-
    graphically smallest) representative.
    """

    slopes: tuple
    alpha: float
    well1_count: int
    orbit: int = 0
    offset: int = 0

    @property
    def m(self):
        return len(self.slopes)

    def as_array(self):
        return np.asarray(self.slopes, dtype=float)


@dataclass(frozen=True)
class MicrostateSet:
    """Minimizer set at a prescribed mean slope.

    ``regime`` is ``"single-K"`` inside a contact interval and
    ``"segment-union"`` on a bridge segment, where the members collect both
    bridge endpoints.  ``boundary`` flags queries within tolerance of a
    bridge endpoint, where both cases apply and the union is taken.
    """

    ell: float
    regime: str
    members: tuple
    boundary: bool = False

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def slopes(self):
        return [ms.slopes for ms in self.members]

    def find(self, slopes, tol=1e-8):
        """Member matching the given tuple within sup-norm tolerance, or None."""
        target = np.asarray(slopes, dtype=float)
        for ms in self.members:
            if target.shape == (len(ms.slopes),) and np.max(np.abs(ms.as_array() - target)) <= tol:
                return ms
        return None


def _rotations(t):
    return [t[q:] + t[:q] for q in range(len(t))]


def _assign_orbits(raw):
    """Group tuples into cyclic orbits; orbits ordered by canonical member."""
    canon = {}
    for t in raw:
        canon[t] = min(_rotations(t))
    orbit_reps = sorted(set(canon.values()))
    orbit_index = {rep: k for k, rep in enumerate(orbit_reps)}
    out = {}
    for t in raw:
        rep = canon[t]
        # offset q such that rotating the representative right by q gives t
        m = len(t)
        offset = next(q for q in range(m) if rep[m - q:] + rep[:m - q] == t)
        out[t] = (orbit_index[rep], offset)
    return out


def _members_for_alpha(ep, alpha):
    """All minimizing tuples of the M-slope problem at one average."""
    value, argmin = ep.psi0(alpha)
    tuples = {}
    for j in argmin:
        sol = ep.solve_branch(j, alpha, require=True)
        entries_1 = () if sol.z1 is None else (float(sol.z1),)
        entries_2 = () if sol.z2 is None else (float(sol.z2),)
        z1 = entries_1[0] if entries_1 else None
        z2 = entries_2[0] if entries_2 else None
        for positions in itertools.combinations(range(ep.m), j):
            t = tuple(z1 if k in positions else z2 for k in range(ep.m))
            tuples.setdefault(t, j)
    return tuples


def minimizer_set_alpha(ep, alpha):
    """Minimizer set of the constrained M-slope problem at average ``alpha``."""
    alpha = float(alpha)
    tuples = _members_for_alpha(ep, alpha)
    ordered = sorted(tuples)
    orbits = _assign_orbits(ordered)
    members = tuple(
        Microstate(t, sum(t) / ep.m, tuples[t], orbits[t][0], orbits[t][1])
        for t in ordered
    )
    return MicrostateSet(alpha, "single-K", members)


def minimizer_set_ell(ep, ell):
    """Minimizer set for the renormalized problem at mean slope ``ell``.

    Inside a contact interval this is the plain minimizer set at ell; on a
    bridge segment it is the union of the sets at the two bridge endpoints.
    Queries within tolerance of a bridge endpoint take the union as well and
    are flagged via ``boundary``.
    """
    ell = float(ell)
    env = ep.envelope
    segment = None
    boundary = False
    for seg in env.segments:
        if seg.left - _BOUNDARY_TOL <= ell <= seg.right + _BOUNDARY_TOL:
            segment = seg
            boundary = (
                abs(ell - seg.left) <= _BOUNDARY_TOL or abs(ell - seg.right) <= _BOUNDARY_TOL
            )
            break
    if segment is None:
        return minimizer_set_alpha(ep, ell)
    tuples = {}
    tuples.update(_members_for_alpha(ep, segment.left))
    tuples.update(_members_for_alpha(ep, segment.right))
    ordered = sorted(tuples)
    orbits = _assign_orbits(ordered)
    members = tuple(
        Microstate(t, sum(t) / ep.m, tuples[t], orbits[t][0], orbits[t][1])
        for t in ordered
    )
    return MicrostateSet(ell, "segment-union", members, boundary=boundary)


def pattern_profile(slopes, i):
    """Displacement u(i) of the M-periodic slope pattern with u(0) = 0.

    The slope on bond (i, i+1) is slopes[i mod M], for all integer i.
    """
    if isinstance(slopes, Microstate):
        slopes = slopes.slopes
    m = len(slopes)
    i = int(i)
    if i == 0:
        return 0.0
    full, rest = divmod(abs(i), m)
    total = full * sum(slopes)
    if i > 0:
        total += sum(slopes[k % m] for k in range(rest))
    else:
        # u(i) = -sum of slopes on bonds i..-1
        total = -full * sum(slopes) - sum(slopes[k % m] for k in range(i + full * m, 0))
    return float(total)


def cyclic_shift(state, q):
    """Rotate the pattern right by q: the last q entries move to the front."""
    if isinstance(state, Microstate):
        t = state.slopes
    else:
        t = tuple(state)
    m = len(t)
    if not 0 <= q < m:
        raise ValueError(f"shift q must lie in [0, {m}), got {q}")
    shifted = t[m - q:] + t[:m - q]
    if isinstance(state, Microstate):
        return Microstate(shifted, state.alpha, state.well1_count, state.orbit,
                          (state.offset + q) % m)
    return shifted


def classification_threshold(mset, default=0.25):
    """Half the minimal pairwise sup-distance between members.

    A slope window closer than this to one member is unambiguous.  With a
    single member the spacing between its two slope values stands in.
    """
    members = [ms.as_array() for ms in mset.members]
    if len(members) >= 2:
        dists = [
            float(np.max(np.abs(a - b)))
            for a, b in itertools.combinations(members, 2)
        ]
        return 0.5 * min(dists)
    if members:
        vals = sorted(set(float(v) for v in members[0]))
        if len(vals) >= 2:
            return 0.5 * min(b - a for a, b in zip(vals[:-1], vals[1:]))
    return default
