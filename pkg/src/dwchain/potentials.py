"""Slope-space interaction potentials for one-dimensional chains.

The nearest-neighbour energy is a double well, the pointwise minimum of two
smooth convex wells W1 and W2; the long-range energy is a single strictly
convex well evaluated on block-averaged slopes.  All evaluators accept
scalars or numpy arrays and are immutable after construction, so they can be
shared freely between worker threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import Polynomial
from scipy.optimize import brentq

from .errors import NoCrossing

__all__ = [
    "ConvexWell",
    "DoubleWell",
    "LongRangePotential",
    "crossing_points",
    "default_slope_range",
]

_CONVEXITY_SLACK = 1e-12


@lru_cache(maxsize=None)
def _poly(coefficients):
    return Polynomial(list(coefficients))


@lru_cache(maxsize=None)
def _poly_deriv(coefficients, order):
    return _poly(coefficients).deriv(order)


def _maybe_scalar(out):
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class ConvexWell:
    """A single smooth convex well.

    Two kinds are supported: ``quadratic``, which is curvature*(z-center)^2,
    and ``polynomial`` with ascending coefficients (even degree, positive
    leading coefficient, verified convex at construction).  Arbitrary
    callables are deliberately excluded so the convexity and growth
    invariants stay checkable.
    """

    kind: str
    center: float = 0.0
    curvature: float = 1.0
    coefficients: tuple = ()

    @staticmethod
    def quadratic(center, curvature):
        if not curvature > 0:
            raise ValueError(f"curvature must be positive, got {curvature}")
        return ConvexWell(kind="quadratic", center=float(center), curvature=float(curvature))

    @staticmethod
    def polynomial(coefficients):
        coeffs = [float(c) for c in coefficients]
        while len(coeffs) > 1 and coeffs[-1] == 0.0:
            coeffs.pop()
        degree = len(coeffs) - 1
        if degree < 2 or degree % 2:
            raise ValueError(f"polynomial well must have even degree >= 2, got degree {degree}")
        if coeffs[-1] <= 0:
            raise ValueError("polynomial well must have a positive leading coefficient")
        well = ConvexWell(kind="polynomial", coefficients=tuple(coeffs))
        well._check_polynomial_convexity()
        return well

    def _check_polynomial_convexity(self):
        d2 = _poly_deriv(self.coefficients, 2)
        # The minimum of d2 over the reals sits at a critical point of d2 (or
        # at infinity, where the positive leading coefficient wins).
        candidates = [0.0]
        d3 = d2.deriv(1)
        if any(abs(c) > 0 for c in d3.coef):
            roots = d3.roots()
            candidates.extend(float(r.real) for r in roots if abs(r.imag) < 1e-9)
        worst = min(float(d2(c)) for c in candidates)
        if worst < -_CONVEXITY_SLACK:
            raise ValueError(f"polynomial well is not convex (min second derivative {worst:g})")

    def value(self, z):
        z = np.asarray(z, dtype=float)
        if self.kind == "quadratic":
            out = self.curvature * (z - self.center) ** 2
        else:
            out = _poly(self.coefficients)(z)
        return _maybe_scalar(out)

    def derivative(self, z):
        z = np.asarray(z, dtype=float)
        if self.kind == "quadratic":
            out = 2.0 * self.curvature * (z - self.center)
        else:
            out = _poly_deriv(self.coefficients, 1)(z)
        return _maybe_scalar(out)

    def second_derivative(self, z):
        z = np.asarray(z, dtype=float)
        if self.kind == "quadratic":
            out = np.full(z.shape, 2.0 * self.curvature)
        else:
            out = _poly_deriv(self.coefficients, 2)(z)
        return _maybe_scalar(out)

    @property
    def argmin(self):
        """Location of the well bottom."""
        if self.kind == "quadratic":
            return self.center
        d1 = _poly_deriv(self.coefficients, 1)
        roots = [float(r.real) for r in d1.roots() if abs(r.imag) < 1e-9]
        if not roots:
            return 0.0
        vals = [float(_poly(self.coefficients)(r)) for r in roots]
        return roots[int(np.argmin(vals))]

    def to_dict(self):
        if self.kind == "quadratic":
            return {"kind": "quadratic", "center": self.center, "curvature": self.curvature}
        return {"kind": "polynomial", "coefficients": list(self.coefficients)}

    @staticmethod
    def from_dict(data):
        kind = data.get("kind")
        if kind == "quadratic":
            return ConvexWell.quadratic(data["center"], data["curvature"])
        if kind == "polynomial":
            return ConvexWell.polynomial(data["coefficients"])
        raise ValueError(f"unknown well kind {kind!r}")


@dataclass(frozen=True)
class DoubleWell:
    """psi1(z) = min(W1(z), W2(z)) with region bookkeeping.

    Region 1 is A1 = {W1 <= W2}, region 2 is A2 = {W2 <= W1}; the two cover
    the line and overlap exactly on the crossing set.  ``growth_constant`` is
    the declared c > 0 with W_i(z) >= c z^2 - 1/c, checked by
    :meth:`validate_growth`.
    """

    w1: ConvexWell
    w2: ConvexWell
    growth_constant: float | None = None

    def psi1(self, z):
        return _maybe_scalar(np.minimum(self.w1.value(z), self.w2.value(z)))

    def active_well(self, z):
        """Index of the attaining well, ties broken toward well 1."""
        out = np.where(np.asarray(self.w1.value(z)) <= np.asarray(self.w2.value(z)), 1, 2)
        return int(out) if np.ndim(out) == 0 else out

    def eval_psi1(self, z):
        """Value of psi1 together with the attaining well index."""
        return self.psi1(z), self.active_well(z)

    def in_region(self, which, z):
        w1 = np.asarray(self.w1.value(z))
        w2 = np.asarray(self.w2.value(z))
        out = w1 <= w2 if which == 1 else w2 <= w1
        return bool(out) if np.ndim(out) == 0 else out

    def crossings(self, lo, hi):
        return crossing_points(self, lo, hi, strict=False)

    def region_intervals(self, which, lo, hi):
        """Closed intervals making up region A1 or A2 on [lo, hi].

        Outermost intervals extend past the search range and are returned
        with infinite endpoints.
        """
        bounds = [-math.inf, *self.crossings(lo, hi), math.inf]
        intervals = []
        for a, b in zip(bounds[:-1], bounds[1:]):
            if math.isinf(a) and math.isinf(b):
                probe = 0.5 * (lo + hi)
            elif math.isinf(a):
                probe = min(b - 1.0, 0.5 * (lo + b))
            elif math.isinf(b):
                probe = max(a + 1.0, 0.5 * (a + hi))
            else:
                probe = 0.5 * (a + b)
            if self.in_region(which, probe):
                intervals.append((a, b))
        return intervals

    def validate_growth(self, lo, hi, samples=20001, slack=1e-9):
        """Check W_i(z) >= c z^2 - 1/c on a dense grid of [lo, hi]."""
        if self.growth_constant is None:
            return
        c = self.growth_constant
        if not c > 0:
            raise ValueError(f"growth constant must be positive, got {c}")
        zs = np.linspace(lo, hi, samples)
        floor = c * zs**2 - 1.0 / c
        for name, well in (("W1", self.w1), ("W2", self.w2)):
            worst = float(np.min(well.value(zs) - floor))
            if worst < -slack:
                raise ValueError(
                    f"{name} violates the declared quadratic growth bound by {-worst:g}"
                )

    def to_dict(self):
        out = {"w1": self.w1.to_dict(), "w2": self.w2.to_dict()}
        if self.growth_constant is not None:
            out["growth_constant"] = self.growth_constant
        return out

    @staticmethod
    def from_dict(data):
        return DoubleWell(
            w1=ConvexWell.from_dict(data["w1"]),
            w2=ConvexWell.from_dict(data["w2"]),
            growth_constant=data.get("growth_constant"),
        )


def crossing_points(dw, lo, hi, samples=8193, strict=True):
    """Roots of W1 - W2 on [lo, hi], sorted ascending.

    Raises :class:`NoCrossing` when one well lies strictly below the other on
    the whole range (``strict=True``).  Identical wells have no sign change
    and return an empty tuple.  Tangential touches without a sign change are
    not detected; the wells are assumed to cross transversally.
    """
    zs = np.linspace(lo, hi, samples)
    diff = np.asarray(dw.w1.value(zs)) - np.asarray(dw.w2.value(zs))
    scale = max(1.0, float(np.max(np.abs(diff))))
    if float(np.max(np.abs(diff))) <= 1e-12 * scale:
        return ()
    sign = np.where(diff >= 0, 1, -1)
    flips = np.nonzero(sign[:-1] != sign[1:])[0]
    if flips.size == 0:
        if strict:
            raise NoCrossing("the wells never cross on the search range")
        return ()

    def f(z):
        return float(dw.w1.value(z) - dw.w2.value(z))

    roots = []
    for i in flips:
        root = brentq(f, zs[i], zs[i + 1], xtol=1e-14, rtol=8.9e-16, maxiter=256)
        if not roots or abs(root - roots[-1]) > 1e-12 * max(1.0, abs(root)):
            roots.append(float(root))
    return tuple(roots)


@dataclass(frozen=True)
class LongRangePotential:
    """Strictly convex long-range potential acting on M-bond slope averages."""

    well: ConvexWell

    def __post_init__(self):
        if self.well.kind == "quadratic" and not self.well.curvature > 0:
            raise ValueError("long-range well must be strictly convex")

    @staticmethod
    def quadratic(a):
        """The built-in psi_M(z) = a z^2 with a > 0."""
        return LongRangePotential(ConvexWell.quadratic(0.0, a))

    def value(self, z):
        return self.well.value(z)

    def derivative(self, z):
        return self.well.derivative(z)

    def second_derivative(self, z):
        return self.well.second_derivative(z)

    def to_dict(self):
        return self.well.to_dict()

    @staticmethod
    def from_dict(data):
        return LongRangePotential(ConvexWell.from_dict(data))


def default_slope_range(dw):
    """Working slope range (-R, R) with R = 8 * (max |well bottom| + 1).

    Minimizing slopes stay bounded for coercive double wells, so a fixed
    multiple of the well positions is a safe search range.
    """
    r = 8.0 * (max(abs(dw.w1.argmin), abs(dw.w2.argmin)) + 1.0)
    return (-r, r)
