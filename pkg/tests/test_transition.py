"""Transition energies: window solves, convergence, invariances."""

import numpy as np
import pytest
from scipy.optimize import minimize

from dwchain.errors import NoConvergence, NotInMinimizerSet
from dwchain.microstates import cyclic_shift
from dwchain.transition import (
    TransitionQuery,
    invariance_suite,
    phi_converged,
    phi_window,
)

ZA = (-1.0, 1.0)
ZB = (1.0, -1.0)


def window_energy_direct(ep, ell, left, right, N, x):
    """Independent re-implementation of the window energy (plain loops)."""
    m = ep.m
    tangent = ep.tangent(ell)
    slopes = {}
    for t in range(-N - m + 1, N + m - 1):
        if t < -N:
            slopes[t] = left[t % m]
        elif t >= N:
            slopes[t] = right[t % m]
        else:
            slopes[t] = x[t + N]
    total = 0.0
    for i in range(-N - m + 1, N):
        window = [slopes[i + k] for k in range(m)]
        mean = sum(window) / m
        total += (
            float(ep.long_range.value(mean))
            + sum(float(ep.double_well.psi1(w)) for w in window) / m
            - tangent.value(mean)
        )
    return total


def window_oracle(ep, ell, left, right, N, starts=60, seed=0):
    """Multi-start quasi-Newton minimization of the direct window energy."""
    rng = np.random.default_rng(seed)
    m = ep.m
    best = np.inf
    guesses = []
    for splice in range(-N, N + 1, m):
        guesses.append(
            np.array(
                [left[t % m] if t < splice else right[t % m] for t in range(-N, N)]
            )
        )
    for _ in range(starts):
        guesses.append(rng.normal(0.0, 1.2, 2 * N))
    for x0 in guesses:
        res = minimize(
            lambda x: window_energy_direct(ep, ell, left, right, N, x),
            x0,
            method="L-BFGS-B",
            options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 400},
        )
        best = min(best, float(res.fun))
    return best


def test_window_energy_direct_agrees(ep2):
    rng = np.random.default_rng(15)
    from dwchain.newton import WindowProblem

    wp = WindowProblem(ep2, 0.0, ZA, ZB, 4)
    for _ in range(5):
        x = rng.normal(0, 1, wp.nfree)
        assert wp.true_energy(x) == pytest.approx(
            window_energy_direct(ep2, 0.0, ZA, ZB, 4, x), abs=1e-11
        )


def test_phi_same_pattern_zero(ep2):
    for n in (2, 4, 8):
        res = phi_window(ep2, TransitionQuery(0.0, ZA, ZA, n))
        assert res.energy == pytest.approx(0.0, abs=1e-10)


def test_phi_antiphase_golden(ep2, phi_antiphase, gold):
    assert phi_antiphase.value == pytest.approx(gold["phi_antiphase"], abs=1e-9)
    # the exhaustive N=8 window already matches the converged value closely
    n8 = dict(phi_antiphase.window_values)[8]
    assert n8 == pytest.approx(phi_antiphase.value, abs=1e-8)


def test_phi_antiphase_vs_lbfgs_oracle(ep2):
    prod = phi_window(ep2, TransitionQuery(0.0, ZA, ZB, 8)).energy
    oracle = window_oracle(ep2, 0.0, ZA, ZB, 8)
    # the exhaustive enumeration is exact, so the oracle cannot beat it,
    # and with enough starts it lands in the same basin
    assert oracle >= prod - 1e-9
    assert oracle - prod <= 1e-6


def test_phi_monotone_in_window(ep2):
    values = [
        phi_window(ep2, TransitionQuery(0.0, ZA, ZB, n)).energy for n in (2, 4, 6, 8)
    ]
    for a, b in zip(values[:-1], values[1:]):
        assert b <= a + 1e-10


def test_phi_swapped_arguments(ep2, phi_antiphase):
    swapped = phi_converged(ep2, 0.0, ZB, ZA, tol=1e-8)
    # mirror symmetry of this setup makes the two directions equal
    assert swapped.value == pytest.approx(phi_antiphase.value, abs=1e-9)


def test_phi_macroscopic_interface(ep2):
    mset_slopes = [(-0.9, 1.1), (1.1, -0.9), (0.9, 0.9)]
    res = phi_converged(ep2, 0.5, mset_slopes[0], mset_slopes[2], tol=1e-8)
    assert res.value > 1e-4
    assert all(b <= a + 1e-10 for (_, a), (_, b) in zip(res.window_values, res.window_values[1:]))
    # cross-check the first window against the independent oracle
    prod = phi_window(ep2, TransitionQuery(0.5, mset_slopes[0], mset_slopes[2], 8)).energy
    oracle = window_oracle(ep2, 0.5, mset_slopes[0], mset_slopes[2], 8, starts=40)
    assert oracle >= prod - 1e-9
    assert oracle - prod <= 1e-6


def test_phi_rejects_non_minimizer(ep2):
    with pytest.raises(NotInMinimizerSet):
        phi_window(ep2, TransitionQuery(0.0, (-1.0, 0.9), ZB, 4))
    with pytest.raises(NotInMinimizerSet):
        phi_converged(ep2, 0.3, ZA, ZB)  # wrong mean slope for these patterns


def test_phi_no_convergence_path(ep2):
    with pytest.raises(NoConvergence) as info:
        phi_converged(ep2, 0.0, ZA, ZB, tol=0.0, max_window=8)
    assert len(info.value.values) >= 1


def test_phi_profile_far_fields(ep2, phi_antiphase):
    res = phi_antiphase
    idx = res.profile_indices
    u = res.profile
    from dwchain.microstates import pattern_profile

    i0 = int(idx[0])
    n_win = res.window
    assert u[0] == pytest.approx(pattern_profile(ZA, i0), abs=1e-12)
    slopes = np.diff(u)
    for k, t in enumerate(idx[:-1]):
        if t < -n_win:  # pinned to the left pattern
            assert slopes[k] == pytest.approx(ZA[int(t) % 2], abs=1e-14)
        elif t >= n_win:  # pinned to the right pattern
            assert slopes[k] == pytest.approx(ZB[int(t) % 2], abs=1e-14)
    # free slopes relax onto the patterns toward the window edges
    assert abs(slopes[ep2.m - 1] - ZA[int(idx[ep2.m - 1]) % 2]) < 1e-6
    assert abs(slopes[-ep2.m] - ZB[int(idx[-ep2.m - 1]) % 2]) < 1e-6


def test_phi_pinned_offset(ep2, phi_antiphase):
    free = phi_antiphase
    pinned = phi_window(
        ep2, TransitionQuery(0.0, ZA, ZB, free.window, xi=free.diagnostics["xi_star"])
    )
    assert pinned.energy == pytest.approx(free.value, abs=1e-8)
    off = phi_window(ep2, TransitionQuery(0.0, ZA, ZB, free.window, xi=0.0))
    assert off.energy >= free.value - 1e-10


def test_invariance_suite(ep2, phi_antiphase):
    report = invariance_suite(ep2, 0.0, ZA, ZB, phi_antiphase.window)
    assert report.cyclic_ok
    assert report.subadditive_ok
    for _, _, dev in report.cyclic:
        assert dev < 1e-8
    # pinned-offset cost decays ~1/N: doubling the window shrinks it
    for _, _, dev, _, dev2 in report.xi_pinned:
        assert dev2 <= 1e-6 or dev2 <= 0.75 * dev
    assert report.xi_ok


def test_cyclic_invariance_direct(ep2, phi_antiphase):
    za1 = cyclic_shift(ZA, 1)
    zb1 = cyclic_shift(ZB, 1)
    res = phi_converged(ep2, 0.0, za1, zb1, tol=1e-8)
    assert res.value == pytest.approx(phi_antiphase.value, abs=1e-8)
