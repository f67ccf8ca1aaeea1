"""Inner convex solvers for well-assignment subproblems.

Fixing which well each bond occupies replaces the double well by one smooth
convex well per bond, so minimizing the renormalized chain energy (or a
finite transition window) over slopes becomes a smooth convex problem.
Newton's method applies: the Hessian is banded with bandwidth M-1
(cyclically for periodic chains) plus one dense border row for the
mean-slope constraint.  Batched variants solve many assignments at once via
stacked dense factorizations; they back the exhaustive enumerations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .errors import SingularSystem

__all__ = ["PeriodicProblem", "WindowProblem", "AssignmentSolve"]

_DENSE_LIMIT = 160


@dataclass(frozen=True)
class AssignmentSolve:
    """Result of one inner convex solve at a fixed well assignment.

    ``relaxed`` is the assignment objective (wells as assigned); ``energy``
    re-evaluates the slopes with the true double well, so energy <= relaxed
    with equality iff the assignment is consistent with the solved slopes.
    """

    slopes: np.ndarray
    relaxed: float
    energy: float
    grad_norm: float
    iterations: int
    consistent: bool


def _well_centers(dw):
    return dw.w1.argmin, dw.w2.argmin


def _sigma_values(dw, sigma, z, order=0):
    w1, w2 = dw.w1, dw.w2
    if order == 0:
        a, b = w1.value(z), w2.value(z)
    elif order == 1:
        a, b = w1.derivative(z), w2.derivative(z)
    else:
        a, b = w1.second_derivative(z), w2.second_derivative(z)
    return np.where(np.asarray(sigma) == 1, np.asarray(a), np.asarray(b))


def _sliding_sums(arr, width):
    """Row-wise sums of every contiguous window of the given width."""
    cs = np.cumsum(arr, axis=-1)
    out = cs[..., width - 1:].copy()
    out[..., 1:] -= cs[..., :-width]
    return out


def _consistent(dw, sigma, z, tol=1e-12):
    v1 = np.asarray(dw.w1.value(z))
    v2 = np.asarray(dw.w2.value(z))
    assigned = np.where(np.asarray(sigma) == 1, v1, v2)
    return bool(np.all(assigned <= np.minimum(v1, v2) + tol))


class _DampedNewton:
    """Shared damping/line-search loop for the single-assignment solvers."""

    def __init__(self, objective, gradient, step, project_grad, gtol, max_iter):
        self.objective = objective
        self.gradient = gradient
        self.step = step
        self.project_grad = project_grad
        self.gtol = gtol
        self.max_iter = max_iter

    def run(self, x0):
        x = np.array(x0, dtype=float)
        f = self.objective(x)
        iterations = 0
        mu = 0.0
        for iterations in range(1, self.max_iter + 1):
            g = self.gradient(x)
            gnorm = float(np.max(np.abs(self.project_grad(g))))
            if gnorm <= self.gtol:
                return x, gnorm, iterations - 1
            dx = None
            for _ in range(12):
                try:
                    dx = self.step(x, g, mu)
                except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
                    dx = None
                if dx is not None and np.all(np.isfinite(dx)) and float(np.dot(g, dx)) < 0:
                    break
                mu = max(mu * 10.0, 1e-10)
                dx = None
            if dx is None:
                raise SingularSystem("projected Hessian stayed singular under damping")
            t = 1.0
            slope = float(np.dot(g, dx))
            while t > 1e-14:
                xn = x + t * dx
                fn = self.objective(xn)
                if fn <= f + 1e-4 * t * slope:
                    break
                t *= 0.5
            x = x + t * dx
            f = self.objective(x)
            mu *= 0.1
        g = self.gradient(x)
        gnorm = float(np.max(np.abs(self.project_grad(g))))
        return x, gnorm, iterations


class PeriodicProblem:
    """Renormalized energy of an n-periodic chain at fixed mean slope."""

    def __init__(self, ep, n, ell):
        self.ep = ep
        self.n = int(n)
        self.m = ep.m
        self.ell = float(ell)
        tangent = ep.tangent(ell)
        self.rslope = tangent.slope
        self.rint = tangent.intercept

    # -- energies ------------------------------------------------------

    def _means(self, z):
        acc = np.zeros(z.shape)
        for k in range(self.m):
            acc += np.roll(z, -k, axis=-1)
        return acc / self.m

    def _tangent_sum(self, means):
        return self.rslope * np.sum(means, axis=-1) + self.n * self.rint

    def true_energy(self, z):
        """Renormalized energy with the genuine double well (scalar or batch)."""
        dw = self.ep.double_well
        psi1 = np.minimum(np.asarray(dw.w1.value(z)), np.asarray(dw.w2.value(z)))
        means = self._means(np.asarray(z, dtype=float))
        total = (
            np.sum(np.asarray(self.ep.long_range.value(means)), axis=-1)
            + np.sum(psi1, axis=-1)
            - self._tangent_sum(means)
        )
        return float(total) if np.ndim(total) == 0 else total

    def relaxed_energy(self, sigma, z):
        means = self._means(np.asarray(z, dtype=float))
        total = (
            np.sum(np.asarray(self.ep.long_range.value(means)), axis=-1)
            + np.sum(_sigma_values(self.ep.double_well, sigma, z, 0), axis=-1)
            - self._tangent_sum(means)
        )
        return float(total) if np.ndim(total) == 0 else total

    # -- derivatives ---------------------------------------------------

    def gradient(self, sigma, z):
        means = self._means(z)
        c = np.asarray(self.ep.long_range.derivative(means)) - self.rslope
        cover = np.zeros(z.shape)
        for d in range(self.m):
            cover += np.roll(c, d, axis=-1)
        return _sigma_values(self.ep.double_well, sigma, z, 1) + cover / self.m

    def hessian_entries(self, sigma, z):
        """(rows, cols, vals) triplets of the n-by-n Hessian, duplicates add."""
        n, m = self.n, self.m
        means = self._means(z)
        cpp = np.asarray(self.ep.long_range.second_derivative(means))
        t = np.arange(n)
        diag = _sigma_values(self.ep.double_well, sigma, z, 2).astype(float)
        band0 = np.zeros(n)
        for e in range(m):
            band0 += np.roll(cpp, e)
        rows = [t]
        cols = [t]
        vals = [diag + band0 / m**2]
        for d in range(1, m):
            sd = np.zeros(n)
            for e in range(m - d):
                sd += np.roll(cpp, e)
            u = (t + d) % n
            rows.extend([t, u])
            cols.extend([u, t])
            vals.extend([sd / m**2, sd / m**2])
        return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)

    # -- solves --------------------------------------------------------

    def start(self, sigma):
        c1, c2 = _well_centers(self.ep.double_well)
        z = np.where(np.asarray(sigma) == 1, c1, c2).astype(float)
        return z + (self.ell - float(np.mean(z)))

    def _kkt_solve(self, sigma, z, g, mu):
        n = self.n
        rows, cols, vals = self.hessian_entries(sigma, z)
        if mu > 0:
            rows = np.concatenate([rows, np.arange(n)])
            cols = np.concatenate([cols, np.arange(n)])
            vals = np.concatenate([vals, np.full(n, mu)])
        rhs = np.concatenate([-g, [0.0]])
        if n <= _DENSE_LIMIT:
            kkt = np.zeros((n + 1, n + 1))
            np.add.at(kkt, (rows, cols), vals)
            kkt[:n, n] = 1.0
            kkt[n, :n] = 1.0
            sol = np.linalg.solve(kkt, rhs)
        else:
            border_rows = np.concatenate([rows, np.arange(n), np.full(n, n)])
            border_cols = np.concatenate([cols, np.full(n, n), np.arange(n)])
            border_vals = np.concatenate([vals, np.ones(n), np.ones(n)])
            kkt = scipy.sparse.coo_matrix(
                (border_vals, (border_rows, border_cols)), shape=(n + 1, n + 1)
            ).tocsc()
            sol = scipy.sparse.linalg.spsolve(kkt, rhs)
        return sol[:n]

    def solve(self, sigma, z0=None, gtol=1e-10, max_iter=80):
        sigma = np.asarray(sigma)
        z0 = self.start(sigma) if z0 is None else np.asarray(z0, dtype=float)
        z0 = z0 + (self.ell - float(np.mean(z0)))
        newton = _DampedNewton(
            objective=lambda z: self.relaxed_energy(sigma, z),
            gradient=lambda z: self.gradient(sigma, z),
            step=lambda z, g, mu: self._kkt_solve(sigma, z, g, mu),
            project_grad=lambda g: g - np.mean(g),
            gtol=gtol,
            max_iter=max_iter,
        )
        z, gnorm, iters = newton.run(z0)
        z = z + (self.ell - float(np.mean(z)))
        return AssignmentSolve(
            slopes=z,
            relaxed=self.relaxed_energy(sigma, z),
            energy=self.true_energy(z),
            grad_norm=gnorm,
            iterations=iters,
            consistent=_consistent(self.ep.double_well, sigma, z),
        )

    def solve_batch(self, sigmas, gtol=1e-10, max_iter=60, chunk=4096):
        """Solve many assignments at once; returns (slopes, relaxed, energy)."""
        sigmas = np.asarray(sigmas)
        b, n = sigmas.shape
        out_z = np.empty((b, n))
        for lo in range(0, b, chunk):
            hi = min(lo + chunk, b)
            out_z[lo:hi] = self._solve_chunk(sigmas[lo:hi], gtol, max_iter)
        relaxed = self.relaxed_energy(sigmas, out_z)
        energy = self.true_energy(out_z)
        return out_z, relaxed, energy

    def _solve_chunk(self, sigmas, gtol, max_iter):
        b, n = sigmas.shape
        c1, c2 = _well_centers(self.ep.double_well)
        z = np.where(sigmas == 1, c1, c2).astype(float)
        z += (self.ell - z.mean(axis=1))[:, None]
        mu = np.zeros(b)
        prev = np.full(b, np.inf)
        active = np.ones(b, dtype=bool)
        base_r = np.arange(n)
        pair_rows = [base_r]
        pair_cols = [base_r]
        for d in range(1, self.m):
            u = (base_r + d) % n
            pair_rows.extend([base_r, u])
            pair_cols.extend([u, base_r])
        flat_idx = np.concatenate(pair_rows) * (n + 1) + np.concatenate(pair_cols)
        for _ in range(max_iter):
            idx = np.flatnonzero(active)
            if idx.size == 0:
                break
            g = self.gradient(sigmas[idx], z[idx])
            gproj = g - g.mean(axis=1, keepdims=True)
            gnorm = np.max(np.abs(gproj), axis=1)
            stuck = gnorm > np.maximum(prev[idx] * 0.9, gtol)
            mu[idx[stuck]] = np.maximum(mu[idx[stuck]] * 10.0, 1e-10)
            prev[idx] = gnorm
            done = gnorm <= gtol
            active[idx[done]] = False
            keep = idx[~done]
            if keep.size == 0:
                break
            vals = self._hessian_vals_batch(sigmas[keep], z[keep])
            nb = len(keep)
            kkt = np.zeros((nb, (n + 1) * (n + 1)))
            np.add.at(kkt, (np.arange(nb)[:, None], flat_idx[None, :]), vals)
            kkt = kkt.reshape(nb, n + 1, n + 1)
            if np.any(mu[keep] > 0):
                kkt[:, base_r, base_r] += mu[keep][:, None]
            kkt[:, :n, n] = 1.0
            kkt[:, n, :n] = 1.0
            rhs = np.concatenate([-g[~done], np.zeros((nb, 1))], axis=1)
            try:
                step = np.linalg.solve(kkt, rhs[..., None])[..., 0]
            except np.linalg.LinAlgError:
                kkt[:, base_r, base_r] += 1e-8
                step = np.linalg.solve(kkt, rhs[..., None])[..., 0]
            z[keep] += step[:, :n]
        z += (self.ell - z.mean(axis=1))[:, None]
        return z

    def _hessian_vals_batch(self, sigmas, z):
        m = self.m
        means = self._means(z)
        cpp = np.asarray(self.ep.long_range.second_derivative(means))
        diag = _sigma_values(self.ep.double_well, sigmas, z, 2).astype(float)
        band0 = np.zeros_like(cpp)
        for e in range(m):
            band0 += np.roll(cpp, e, axis=-1)
        vals = [diag + band0 / m**2]
        for d in range(1, m):
            sd = np.zeros_like(cpp)
            for e in range(m - d):
                sd += np.roll(cpp, e, axis=-1)
            vals.extend([sd / m**2, sd / m**2])
        return np.concatenate(vals, axis=-1)


class WindowProblem:
    """Transition window: free interior slopes, pattern-pinned far fields.

    Bond t runs over [-N-M+1, N+M-2]; the 2N bonds in [-N, N-1] are free and
    the rest carry the left/right pattern slopes.  Cells i in [-N-M+1, N-1]
    are exactly those that can be nonzero when, outside the window, the chain
    follows minimizing patterns.
    """

    def __init__(self, ep, ell, left_pattern, right_pattern, half_window):
        self.ep = ep
        self.m = ep.m
        m = self.m
        self.ell = float(ell)
        self.left = tuple(float(v) for v in left_pattern)
        self.right = tuple(float(v) for v in right_pattern)
        if half_window < m:
            raise ValueError(f"window half-size must be >= M, got {half_window}")
        self.N = int(half_window)
        tangent = ep.tangent(ell)
        self.rslope = tangent.slope
        self.rint = tangent.intercept
        n = self.N
        self.nbonds = 2 * n + 2 * m - 2
        self.ncells = 2 * n + m - 1
        self.nfree = 2 * n
        self.free_lo = m - 1
        bond_t = np.arange(self.nbonds) - (n + m - 1)
        template = np.empty(self.nbonds)
        for p, t in enumerate(bond_t):
            if t < -n:
                template[p] = self.left[t % m]
            elif t >= n:
                template[p] = self.right[t % m]
            else:
                template[p] = 0.0
        self.bond_t = bond_t
        self.template = template
        self.alpha_left = sum(self.left) / m
        self.alpha_right = sum(self.right) / m

    # -- assembly ------------------------------------------------------

    def full_slopes(self, x):
        """Complete bond-slope array with the free block substituted."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            s = self.template.copy()
            s[self.free_lo:self.free_lo + self.nfree] = x
            return s
        s = np.broadcast_to(self.template, x.shape[:-1] + (self.nbonds,)).copy()
        s[..., self.free_lo:self.free_lo + self.nfree] = x
        return s

    def splice_start(self, splice):
        """Free slopes switching from the left to the right pattern at bond
        ``splice`` (0 = window center; +-N pins everything to one pattern)."""
        t0 = int(splice)
        return np.array([
            self.left[t % self.m] if t < t0 else self.right[t % self.m]
            for t in range(-self.N, self.N)
        ])

    def splice_sigma(self, splice):
        dw = self.ep.double_well
        x = self.splice_start(splice)
        return np.asarray(dw.active_well(x))

    def pattern_sigma(self, x):
        """Assignment induced by the active wells of the given free slopes."""
        return np.asarray(self.ep.double_well.active_well(np.asarray(x)))

    # -- energies ------------------------------------------------------

    def true_energy(self, x):
        """Window energy with the genuine double well (scalar or batch)."""
        s = self.full_slopes(x)
        dw = self.ep.double_well
        psi1 = np.minimum(np.asarray(dw.w1.value(s)), np.asarray(dw.w2.value(s)))
        return self._cell_total(s, psi1)

    def relaxed_energy(self, sigma, x):
        s = self.full_slopes(x)
        dw = self.ep.double_well
        psi1 = np.minimum(np.asarray(dw.w1.value(s)), np.asarray(dw.w2.value(s)))
        bond_vals = psi1.copy()
        free = slice(self.free_lo, self.free_lo + self.nfree)
        bond_vals[..., free] = _sigma_values(dw, sigma, s[..., free], 0)
        return self._cell_total(s, bond_vals)

    def _cell_total(self, s, bond_vals):
        m = self.m
        means = _sliding_sums(s, m) / m
        lr = np.asarray(self.ep.long_range.value(means))
        cells = lr - (self.rslope * means + self.rint) + _sliding_sums(bond_vals, m) / m
        total = np.sum(cells, axis=-1)
        return float(total) if np.ndim(total) == 0 else total

    def cell_values(self, x):
        s = self.full_slopes(x)
        dw = self.ep.double_well
        psi1 = np.minimum(np.asarray(dw.w1.value(s)), np.asarray(dw.w2.value(s)))
        m = self.m
        means = _sliding_sums(s, m) / m
        lr = np.asarray(self.ep.long_range.value(means))
        return lr - (self.rslope * means + self.rint) + _sliding_sums(psi1, m) / m

    # -- derivatives ---------------------------------------------------

    def gradient(self, sigma, x):
        s = self.full_slopes(x)
        m = self.m
        means = _sliding_sums(s, m) / m
        c = np.asarray(self.ep.long_range.derivative(means)) - self.rslope
        cover = _sliding_sums(c, m)[..., :self.nfree]
        return _sigma_values(self.ep.double_well, sigma, x, 1) + cover / m

    def hessian_dense(self, sigma, x):
        s = self.full_slopes(x)
        m = self.m
        means = _sliding_sums(s, m) / m
        cpp = np.asarray(self.ep.long_range.second_derivative(means))
        nf = self.nfree
        h = np.zeros((nf, nf))
        diag = _sigma_values(self.ep.double_well, sigma, x, 2)
        h[np.arange(nf), np.arange(nf)] = diag + _sliding_sums(cpp, m)[: nf] / m**2
        for d in range(1, m):
            sd = _sliding_sums(cpp, m - d)
            t = np.arange(nf - d)
            vals = sd[t + d] / m**2
            h[t, t + d] = vals
            h[t + d, t] = vals
        return h

    def hessian_bands(self, sigma, x):
        """Upper banded storage for scipy solveh_banded."""
        s = self.full_slopes(x)
        m = self.m
        means = _sliding_sums(s, m) / m
        cpp = np.asarray(self.ep.long_range.second_derivative(means))
        nf = self.nfree
        ab = np.zeros((m, nf))
        diag = _sigma_values(self.ep.double_well, sigma, x, 2)
        ab[m - 1] = diag + _sliding_sums(cpp, m)[: nf] / m**2
        for d in range(1, m):
            sd = _sliding_sums(cpp, m - d)
            t = np.arange(nf - d)
            ab[m - 1 - d, d:] = sd[t + d] / m**2
        return ab

    # -- solves --------------------------------------------------------

    def _newton_step(self, sigma, x, g, mu, xi_target):
        nf = self.nfree
        if xi_target is None:
            if nf <= _DENSE_LIMIT:
                h = self.hessian_dense(sigma, x)
                if mu > 0:
                    h[np.arange(nf), np.arange(nf)] += mu
                return np.linalg.solve(h, -g)
            ab = self.hessian_bands(sigma, x)
            if mu > 0:
                ab[self.m - 1] += mu
            return scipy.linalg.solveh_banded(ab, -g)
        target = self.constraint_target(xi_target)
        resid = target - float(np.sum(x))
        h = self.hessian_dense(sigma, x)
        if mu > 0:
            h[np.arange(nf), np.arange(nf)] += mu
        kkt = np.zeros((nf + 1, nf + 1))
        kkt[:nf, :nf] = h
        kkt[:nf, nf] = 1.0
        kkt[nf, :nf] = 1.0
        rhs = np.concatenate([-g, [resid]])
        return np.linalg.solve(kkt, rhs)[:nf]

    def constraint_target(self, xi):
        """Required free-slope total when the vertical offset is pinned."""
        return self.N * (self.alpha_right + self.alpha_left) + xi

    def xi_of(self, x):
        """Vertical offset implied by a free-slope vector."""
        return float(np.sum(x)) - self.N * (self.alpha_right + self.alpha_left)

    def solve(self, sigma, x0=None, xi=None, gtol=1e-10, max_iter=80):
        sigma = np.asarray(sigma)
        x0 = self.splice_start(0) if x0 is None else np.asarray(x0, dtype=float)
        if xi is not None:
            x0 = x0 + (self.constraint_target(xi) - float(np.sum(x0))) / self.nfree

        def project(g):
            return g - np.mean(g) if xi is not None else g

        newton = _DampedNewton(
            objective=lambda x: self.relaxed_energy(sigma, x),
            gradient=lambda x: self.gradient(sigma, x),
            step=lambda x, g, mu: self._newton_step(sigma, x, g, mu, xi),
            project_grad=project,
            gtol=gtol,
            max_iter=max_iter,
        )
        x, gnorm, iters = newton.run(x0)
        return AssignmentSolve(
            slopes=x,
            relaxed=self.relaxed_energy(sigma, x),
            energy=self.true_energy(x),
            grad_norm=gnorm,
            iterations=iters,
            consistent=_consistent(self.ep.double_well, sigma, x),
        )

    def solve_batch(self, sigmas, gtol=1e-10, max_iter=60, chunk=8192):
        sigmas = np.asarray(sigmas)
        b = sigmas.shape[0]
        out = np.empty((b, self.nfree))
        for lo in range(0, b, chunk):
            hi = min(lo + chunk, b)
            out[lo:hi] = self._solve_chunk(sigmas[lo:hi], gtol, max_iter)
        relaxed = self.relaxed_energy(sigmas, out)
        energy = self.true_energy(out)
        return out, relaxed, energy

    def _solve_chunk(self, sigmas, gtol, max_iter):
        b, nf = sigmas.shape
        dw = self.ep.double_well
        c1, c2 = _well_centers(dw)
        x = np.where(sigmas == 1, c1, c2).astype(float)
        mu = np.zeros(b)
        prev = np.full(b, np.inf)
        active = np.ones(b, dtype=bool)
        for _ in range(max_iter):
            idx = np.flatnonzero(active)
            if idx.size == 0:
                break
            g = self.gradient(sigmas[idx], x[idx])
            gnorm = np.max(np.abs(g), axis=1)
            stuck = gnorm > np.maximum(prev[idx] * 0.9, gtol)
            mu[idx[stuck]] = np.maximum(mu[idx[stuck]] * 10.0, 1e-10)
            prev[idx] = gnorm
            done = gnorm <= gtol
            active[idx[done]] = False
            keep = idx[~done]
            if keep.size == 0:
                break
            h = self._hessian_dense_batch(sigmas[keep], x[keep])
            if np.any(mu[keep] > 0):
                h[:, np.arange(nf), np.arange(nf)] += mu[keep][:, None]
            try:
                step = np.linalg.solve(h, -g[~done][..., None])[..., 0]
            except np.linalg.LinAlgError:
                h[:, np.arange(nf), np.arange(nf)] += 1e-8
                step = np.linalg.solve(h, -g[~done][..., None])[..., 0]
            x[keep] += step
        return x

    def _hessian_dense_batch(self, sigmas, x):
        s = self.full_slopes(x)
        m = self.m
        b, nf = x.shape
        means = _sliding_sums(s, m) / m
        cpp = np.asarray(self.ep.long_range.second_derivative(means))
        h = np.zeros((b, nf, nf))
        diag = _sigma_values(self.ep.double_well, sigmas, x, 2)
        r = np.arange(nf)
        h[:, r, r] = diag + _sliding_sums(cpp, m)[..., :nf] / m**2
        for d in range(1, m):
            sd = _sliding_sums(cpp, m - d)
            t = np.arange(nf - d)
            vals = sd[..., t + d] / m**2
            h[:, t, t + d] = vals
            h[:, t + d, t] = vals
        return h
