"""Effective per-cell potential, its convex envelope and tangent lines.

For a double well psi1 = min(W1, W2) and a convex long-range potential, the
effective potential at mean slope z is

    psi0(z) = psi_M(z) + (1/M) * min{ sum_k psi1(z_k) : mean(z_k) = z }.

Splitting the M slopes by their active well reduces the inner minimum to a
family of two-variable convex problems indexed by the well-1 occupancy j:
minimize j*W1(z1) + (M-j)*W2(z2) subject to j*z1 + (M-j)*z2 = M*z with z1 in
region A1 and z2 in region A2 (averaging the entries within one well can
only lower a convex well value).  The branch functions

    branch_value(j, z) = psi_M(z) + f_j(z) / M

are convex, and psi0 is their pointwise minimum.  The convex envelope of
psi0 alternates contact intervals, where it coincides with one branch, and
affine bridge segments bitangent to two neighbouring branches.  They are
found by sampling psi0 on a dense grid, taking the lower convex hull, and
refining every bridge by Newton iteration on the bitangency conditions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, root

from .errors import InfeasibleBranch, NonDifferentiable
from .potentials import DoubleWell, LongRangePotential, default_slope_range

__all__ = [
    "BranchSolution",
    "EffectivePotential",
    "EnvelopeStructure",
    "AffineSegment",
    "ContactInterval",
    "TangentLine",
]

_ARGMIN_TOL = 1e-10


@dataclass(frozen=True)
class BranchSolution:
    """Solution of the two-variable occupancy problem at one mean slope.

    ``value`` is j*W1(z1) + (M-j)*W2(z2); ``deriv`` is its derivative with
    respect to the mean slope (M times the shared multiplier at an interior
    solution).  ``z1`` / ``z2`` are None when the branch has no entries in
    that well.  Infeasible branches carry value = +inf.
    """

    j: int
    z1: float | None
    z2: float | None
    value: float
    feasible: bool
    deriv: float


@dataclass(frozen=True)
class AffineSegment:
    """Bridge where the envelope is an affine line strictly below psi0."""

    left: float
    right: float
    left_branch: int
    right_branch: int
    slope: float
    intercept: float
    refined: bool = True

    def value(self, z):
        return self.slope * np.asarray(z, dtype=float) + self.intercept


@dataclass(frozen=True)
class ContactInterval:
    """Maximal interval where the envelope equals psi0 on a single branch."""

    branch: int
    left: float
    right: float


@dataclass(frozen=True)
class EnvelopeStructure:
    """Alternating contact intervals and affine segments, left to right."""

    contacts: tuple
    segments: tuple
    grid_step: float
    warnings: tuple

    def locate(self, z, atol=1e-12):
        """('segment', k) if z lies in closed segment k, else ('contact', k)."""
        for k, seg in enumerate(self.segments):
            if seg.left - atol <= z <= seg.right + atol:
                return ("segment", k)
        for k, contact in enumerate(self.contacts):
            if contact.left < z < contact.right:
                return ("contact", k)
        # z coincides with a contact/segment boundary within rounding
        for k, contact in enumerate(self.contacts):
            if contact.left - atol <= z <= contact.right + atol:
                return ("contact", k)
        raise ValueError(f"slope {z} not covered by the envelope structure")

    def segment_bounds(self):
        out = []
        for seg in self.segments:
            out.extend((seg.left, seg.right))
        return np.asarray(out)


@dataclass(frozen=True)
class TangentLine:
    """Tangent of the convex envelope at a prescribed mean slope.

    In the contact regime the line touches one branch at ``ell``; in the
    segment regime it is the bridge line itself and touches both bridge
    endpoints.
    """

    ell: float
    slope: float
    intercept: float
    regime: str
    touching: tuple

    def value(self, z):
        out = self.slope * np.asarray(z, dtype=float) + self.intercept
        return float(out) if np.ndim(out) == 0 else out


class EffectivePotential:
    """Effective potential psi0 for one (double well, long range, M) triple.

    Immutable after construction; the envelope is built lazily and cached.
    Branch solves are independent and safe to run concurrently.
    """

    def __init__(self, double_well, long_range, m, z_range=None, grid_step=1e-4,
                 refine_tol=1e-10):
        if m < 2:
            raise ValueError(f"interaction range M must be >= 2, got {m}")
        self.double_well = double_well
        self.long_range = long_range
        self.m = int(m)
        self.z_range = tuple(z_range) if z_range is not None else default_slope_range(double_well)
        self.grid_step = float(grid_step)
        self.refine_tol = float(refine_tol)
        lo, hi = self.z_range
        self._regions1 = double_well.region_intervals(1, lo, hi)
        self._regions2 = double_well.region_intervals(2, lo, hi)
        self._envelope = None

    # ------------------------------------------------------------------
    # branch problems

    def _search_bound(self, z_extent):
        lo, hi = self.z_range
        return 8.0 * (max(abs(lo), abs(hi)) + self.m * z_extent + 1.0)

    def solve_branch(self, j, z, require=False):
        """Globally solve the two-variable occupancy problem at mean slope z."""
        m = self.m
        if not 0 <= j <= m:
            raise ValueError(f"occupancy j must lie in [0, {m}], got {j}")
        dw = self.double_well
        z = float(z)
        if j == 0:
            if dw.in_region(2, z):
                return BranchSolution(0, None, z, m * dw.w2.value(z), True,
                                      m * dw.w2.derivative(z))
            if require:
                raise InfeasibleBranch(f"branch j=0 infeasible at z={z}")
            return BranchSolution(0, None, None, math.inf, False, math.nan)
        if j == m:
            if dw.in_region(1, z):
                return BranchSolution(m, z, None, m * dw.w1.value(z), True,
                                      m * dw.w1.derivative(z))
            if require:
                raise InfeasibleBranch(f"branch j={m} infeasible at z={z}")
            return BranchSolution(m, None, None, math.inf, False, math.nan)

        bound = self._search_bound(abs(z))
        w1, w2 = dw.w1, dw.w2

        def z2_of(z1):
            return (m * z - j * z1) / (m - j)

        def gap(z1):
            return w1.derivative(z1) - w2.derivative(z2_of(z1))

        best = None
        for a1, b1 in self._regions1:
            for a2, b2 in self._regions2:
                lo = max(a1, (m * z - (m - j) * b2) / j, -bound)
                hi = min(b1, (m * z - (m - j) * a2) / j, bound)
                if lo > hi:
                    continue
                glo, ghi = gap(lo), gap(hi)
                if glo >= 0:
                    z1 = lo
                elif ghi <= 0:
                    z1 = hi
                else:
                    z1 = brentq(gap, lo, hi, xtol=1e-14, rtol=8.9e-16, maxiter=256)
                z2 = z2_of(z1)
                val = j * w1.value(z1) + (m - j) * w2.value(z2)
                if best is None or val < best[0]:
                    at_a1 = min(abs(z1 - a1), abs(z1 - b1)) <= 1e-11 * max(1.0, abs(z1))
                    best = (val, z1, z2, at_a1)
        if best is None:
            if require:
                raise InfeasibleBranch(f"branch j={j} infeasible at z={z}")
            return BranchSolution(j, None, None, math.inf, False, math.nan)
        val, z1, z2, clamped_z1 = best
        if clamped_z1:
            deriv = m * w2.derivative(z2)
        else:
            deriv = m * w1.derivative(z1)
        return BranchSolution(j, z1, z2, val, True, deriv)

    def branch_value(self, j, z):
        """psi_M(z) + f_j(z)/M, +inf when the branch is infeasible."""
        sol = self.solve_branch(j, z)
        if not sol.feasible:
            return math.inf
        return self.long_range.value(z) + sol.value / self.m

    def branch_derivative(self, j, z):
        sol = self.solve_branch(j, z)
        if not sol.feasible:
            raise InfeasibleBranch(f"branch j={j} infeasible at z={z}")
        return self.long_range.derivative(z) + sol.deriv / self.m

    def psi0(self, z):
        """Minimal branch value and the set of attaining occupancies."""
        vals = [self.branch_value(j, z) for j in range(self.m + 1)]
        best = min(vals)
        argmin = tuple(j for j, v in enumerate(vals) if v <= best + _ARGMIN_TOL)
        return best, argmin

    # ------------------------------------------------------------------
    # vectorized branch evaluation (used for grids and CSV export)

    def _branch_inner_grid(self, j, zs):
        """Vectorized f_j over an array of mean slopes (inf where infeasible)."""
        m = self.m
        dw = self.double_well
        zs = np.asarray(zs, dtype=float)
        if j == 0:
            return np.where(dw.in_region(2, zs), m * np.asarray(dw.w2.value(zs)), np.inf)
        if j == m:
            return np.where(dw.in_region(1, zs), m * np.asarray(dw.w1.value(zs)), np.inf)
        bound = self._search_bound(float(np.max(np.abs(zs))) if zs.size else 1.0)
        w1, w2 = dw.w1, dw.w2
        best = np.full(zs.shape, np.inf)
        for a1, b1 in self._regions1:
            for a2, b2 in self._regions2:
                lo = np.maximum(np.maximum(a1, (m * zs - (m - j) * b2) / j), -bound)
                hi = np.minimum(np.minimum(b1, (m * zs - (m - j) * a2) / j), bound)
                valid = lo <= hi
                if not np.any(valid):
                    continue
                z1 = self._bisect_gap(j, zs, np.where(valid, lo, 0.0), np.where(valid, hi, 0.0))
                z2 = (m * zs - j * z1) / (m - j)
                val = j * np.asarray(w1.value(z1)) + (m - j) * np.asarray(w2.value(z2))
                best = np.minimum(best, np.where(valid, val, np.inf))
        return best

    def _bisect_gap(self, j, zs, lo, hi, iters=64):
        """Clamped stationary point of the 1-D reduced branch objective.

        The derivative gap W1'(z1) - W2'(z2(z1)) is nondecreasing in z1, so
        bisection is safe; endpoint signs short-circuit to the clamp.
        """
        m = self.m
        w1, w2 = self.double_well.w1, self.double_well.w2

        def gap(z1):
            z2 = (m * zs - j * z1) / (m - j)
            return np.asarray(w1.derivative(z1)) - np.asarray(w2.derivative(z2))

        a = lo.astype(float).copy()
        b = hi.astype(float).copy()
        at_lo = gap(lo) >= 0
        at_hi = gap(hi) <= 0
        b = np.where(at_lo, lo, b)
        a = np.where(at_hi & ~at_lo, hi, a)
        for _ in range(iters):
            mid = 0.5 * (a + b)
            go_right = gap(mid) < 0
            a = np.where(go_right, mid, a)
            b = np.where(go_right, b, mid)
        return 0.5 * (a + b)

    def psi0_values(self, zs):
        """Vectorized psi0 over an array of mean slopes."""
        zs = np.asarray(zs, dtype=float)
        inner = np.full(zs.shape, np.inf)
        for j in range(self.m + 1):
            inner = np.minimum(inner, self._branch_inner_grid(j, zs))
        return np.asarray(self.long_range.value(zs)) + inner / self.m

    def _branch_values_argmin(self, zs):
        zs = np.asarray(zs, dtype=float)
        stack = np.stack([self._branch_inner_grid(j, zs) for j in range(self.m + 1)])
        vals = np.asarray(self.long_range.value(zs)) + stack / self.m
        return vals.min(axis=0), vals.argmin(axis=0)

    # ------------------------------------------------------------------
    # envelope

    @property
    def envelope(self):
        if self._envelope is None:
            self._envelope = self.build_envelope()
        return self._envelope

    def build_envelope(self, grid_step=None):
        """Sample psi0, take the lower convex hull, refine every bridge."""
        step = float(grid_step) if grid_step is not None else self.grid_step
        lo, hi = self.z_range
        count = int(round((hi - lo) / step)) + 1
        zs = np.linspace(lo, hi, count)
        vals, arg = self._branch_values_argmin(zs)
        hull = _lower_hull_indices(zs, vals)

        warnings = []
        segments = []
        for i1, i2 in zip(hull[:-1], hull[1:]):
            gap = i2 - i1
            if gap <= 1:
                continue
            p, q = int(arg[i1]), int(arg[i2])
            if p == q:
                warnings.append(
                    f"hull skipped {gap} grid points inside branch {p} near z={zs[i1]:.6g}"
                )
                continue
            if abs(p - q) != 1:
                warnings.append(
                    f"bridge near z={zs[i1]:.6g} jumps from branch {p} to {q}; "
                    "an intermediate contact interval is degenerate at this grid step"
                )
            if gap < 10:
                warnings.append(
                    f"bridge between branches {p} and {q} near z={zs[i1]:.6g} "
                    f"is below grid resolution ({gap} points); endpoints kept at grid accuracy"
                )
                a, b = float(zs[i1]), float(zs[i2])
                fa, fb = float(vals[i1]), float(vals[i2])
                slope = (fb - fa) / (b - a)
                segments.append(AffineSegment(a, b, p, q, slope, fa - slope * a, refined=False))
                continue
            seg = self._refine_bitangent(p, q, float(zs[i1]), float(zs[i2]), warnings)
            segments.append(seg)

        segments.sort(key=lambda s: s.left)
        for s0, s1 in zip(segments[:-1], segments[1:]):
            if s0.right >= s1.left:
                warnings.append(
                    f"contact interval between bridges at {s0.right:.6g} and "
                    f"{s1.left:.6g} collapsed"
                )

        contacts = []
        edges = [-math.inf]
        branches = [int(arg[0])]
        for seg in segments:
            edges.append(seg.left)
            contacts.append(ContactInterval(branches[-1], edges[-2], edges[-1]))
            edges.append(seg.right)
            branches.append(seg.right_branch)
        contacts.append(ContactInterval(branches[-1], edges[-1], math.inf))

        return EnvelopeStructure(tuple(contacts), tuple(segments), step, tuple(warnings))

    def _refine_bitangent(self, p, q, a0, b0, warnings):
        """Newton-polish the common tangent between branches p and q."""

        def F(v):
            a, b = float(v[0]), float(v[1])
            fa, fb = self.branch_value(p, a), self.branch_value(q, b)
            if not (math.isfinite(fa) and math.isfinite(fb)) or b <= a:
                return [1e6 * (1 + abs(a)), 1e6 * (1 + abs(b))]
            da, db = self.branch_derivative(p, a), self.branch_derivative(q, b)
            sec = fb - fa
            return [da * (b - a) - sec, db * (b - a) - sec]

        sol = root(F, [a0, b0], method="hybr", tol=1e-13)
        a, b = float(sol.x[0]), float(sol.x[1])
        res = max(abs(r) for r in F(sol.x))
        scale = max(1.0, abs(self.branch_value(p, a)), abs(self.branch_value(q, b)))
        if not sol.success or res > self.refine_tol * scale * 10 or not a < b:
            warnings.append(
                f"bitangent refinement between branches {p} and {q} stalled "
                f"(residual {res:g}); endpoints kept at grid accuracy"
            )
            a, b = a0, b0
            refined = False
        else:
            refined = True
        fa = self.branch_value(p, a)
        fb = self.branch_value(q, b)
        slope = (fb - fa) / (b - a)
        return AffineSegment(a, b, p, q, slope, fa - slope * a, refined=refined)

    def envelope_value(self, z):
        """The convex envelope psi0** evaluated pointwise (scalar or array)."""
        env = self.envelope
        zarr = np.atleast_1d(np.asarray(z, dtype=float))
        out = np.empty(zarr.shape)
        bounds = env.segment_bounds()
        idx = np.searchsorted(bounds, zarr, side="right") if bounds.size else np.zeros(zarr.shape, int)
        for k, seg in enumerate(env.segments):
            mask = idx == 2 * k + 1
            if np.any(mask):
                out[mask] = seg.value(zarr[mask])
        for k, contact in enumerate(env.contacts):
            mask = idx == 2 * k
            if np.any(mask):
                inner = self._branch_inner_grid(contact.branch, zarr[mask])
                out[mask] = np.asarray(self.long_range.value(zarr[mask])) + inner / self.m
        return float(out[0]) if np.ndim(z) == 0 else out

    def _one_sided_slopes(self, ell, atol=1e-12):
        env = self.envelope
        slopes = []
        for side in ("left", "right"):
            val = None
            for seg in env.segments:
                inside = seg.left - atol <= ell <= seg.right + atol
                if side == "left" and inside and ell > seg.left + atol:
                    val = seg.slope
                if side == "right" and inside and ell < seg.right - atol:
                    val = seg.slope
            if val is None:
                kind, k = env.locate(ell, atol=atol)
                if kind == "segment":
                    seg = env.segments[k]
                    branch = seg.left_branch if side == "left" else seg.right_branch
                else:
                    branch = env.contacts[k].branch
                val = self.branch_derivative(branch, ell)
            slopes.append(val)
        return slopes

    def tangent(self, ell):
        """Tangent line of the envelope at ell.

        Raises :class:`NonDifferentiable` when the one-sided envelope slopes
        disagree by more than 1e-8 (possible only at degenerate structure).
        """
        ell = float(ell)
        sl, sr = self._one_sided_slopes(ell)
        if abs(sl - sr) > 1e-8:
            raise NonDifferentiable(
                f"envelope slopes at {ell} differ: {sl!r} vs {sr!r}"
            )
        env = self.envelope
        kind, k = env.locate(ell)
        if kind == "segment":
            seg = env.segments[k]
            return TangentLine(ell, seg.slope, seg.intercept, "segment",
                               (seg.left, seg.right))
        branch = env.contacts[k].branch
        slope = self.branch_derivative(branch, ell)
        value = self.branch_value(branch, ell)
        return TangentLine(ell, slope, value - slope * ell, "contact", (ell,))


def _lower_hull_indices(x, y):
    """Indices of the lower convex hull of the graph (x ascending)."""
    stack = []
    for i in range(len(x)):
        while len(stack) >= 2:
            o, a = stack[-2], stack[-1]
            if (x[a] - x[o]) * (y[i] - y[o]) - (y[a] - y[o]) * (x[i] - x[o]) <= 0:
                stack.pop()
            else:
                break
        stack.append(i)
    return stack
