"""Cell energies, totals, the difference-quotient identity, JSON round trip."""

import json

import numpy as np
import pytest

from dwchain.errors import MeanMismatch
from dwchain.lattice_energy import (
    ChainConfig,
    cell_energies,
    cell_energy,
    cell_energy_report,
    chain_from_dict,
    chain_to_dict,
    total_renormalized_energy,
    unrenormalized_energy,
)


def random_config(ep, rng, n, ell, spread=1.0, L=1.0):
    z = rng.normal(ell, spread, n)
    z += ell - z.mean()
    return ChainConfig(n, ep.m, ell, z, L)


def test_pure_pattern_cells_vanish(ep2, ep3):
    cfg = ChainConfig.from_pattern((-1.0, 1.0), 12, ell=0.0)
    cells = cell_energies(cfg, ep2)
    assert np.max(np.abs(cells)) <= 1e-10

    cfg3 = ChainConfig.from_pattern((-1.0, 1.0, 1.0), 12, ell=1.0 / 3.0)
    cells3 = cell_energies(cfg3, ep3)
    assert np.max(np.abs(cells3)) <= 1e-10


def test_doubling_keeps_zero(ep2):
    for n in (12, 24, 48):
        cfg = ChainConfig.from_pattern((-1.0, 1.0), n, ell=0.0)
        assert total_renormalized_energy(cfg, ep2).e1 <= 1e-9


def test_constant_slope_cell_value(ep2, gold):
    # constant slopes inside a bridge segment: every cell pays the same
    # psi_M(ell) + psi1(ell) - tangent(ell), evaluated here independently
    n = 10
    ell = 0.5
    cfg = ChainConfig(n, 2, ell, np.full(n, ell))
    expected = (
        0.25 * ell**2
        + min((ell + 1) ** 2, (ell - 1) ** 2)
        - (gold["m2_segment_slope"] * ell + gold["m2_segment_intercept"])
    )
    assert expected == pytest.approx(gold["cell_const_half"], abs=1e-12)
    cells = cell_energies(cfg, ep2)
    assert np.max(np.abs(cells - expected)) <= 1e-12
    assert cell_energy(cfg, ep2, 3) == pytest.approx(expected, abs=1e-12)


def test_cells_nonnegative_random(ep2, ep3):
    rng = np.random.default_rng(8)
    for ep, ell in ((ep2, 0.0), (ep2, 0.5), (ep2, -0.77), (ep3, 1.0 / 3.0), (ep3, 0.31)):
        for _ in range(20):
            cfg = random_config(ep, rng, 17, ell)
            assert np.min(cell_energies(cfg, ep)) >= -1e-12


def test_rotation_invariance(ep3):
    rng = np.random.default_rng(9)
    cfg = random_config(ep3, rng, 15, 0.3)
    base = total_renormalized_energy(cfg, ep3).e1
    rolled = cfg.rotated(3)
    assert total_renormalized_energy(rolled, ep3).e1 == pytest.approx(base, abs=1e-12)
    # rotation by M relabels cells exactly
    assert np.allclose(
        np.roll(cell_energies(cfg, ep3), -3), cell_energies(rolled, ep3), atol=1e-12
    )


def test_unrenormalized_examples(ep2):
    n = 8
    cfg = ChainConfig(n, 2, 0.0, np.zeros(n))
    # psi1(0) = 1 and psi_M(0) = 0, so E = L * 1
    assert unrenormalized_energy(cfg, ep2) == pytest.approx(1.0, abs=1e-12)

    ell = 0.4
    affine = ChainConfig(n, 2, ell, np.full(n, ell), L=2.0)
    expected = 2.0 * (min((ell + 1) ** 2, (ell - 1) ** 2) + 0.25 * ell**2)
    assert unrenormalized_energy(affine, ep2) == pytest.approx(expected, abs=1e-12)


def test_difference_quotient_identity(ep2, ep3):
    rng = np.random.default_rng(10)
    for ep, ell, L in ((ep2, 0.0, 1.0), (ep2, 0.5, 2.0), (ep3, 1.0 / 3.0, 1.0), (ep3, -0.2, 0.5)):
        for n in (12, 30):
            cfg = random_config(ep, rng, n, ell, L=L)
            breakdown = total_renormalized_energy(cfg, ep)
            assert breakdown.e1 == pytest.approx(breakdown.e1_quotient, abs=1e-8 * n)


def test_mean_mismatch_raises(ep2):
    cfg = ChainConfig(8, 2, 0.25, np.zeros(8))
    with pytest.raises(MeanMismatch):
        total_renormalized_energy(cfg, ep2)


def test_report_totals(ep2):
    rng = np.random.default_rng(11)
    cfg = random_config(ep2, rng, 14, 0.5)
    report = cell_energy_report(cfg, ep2)
    assert report.total == pytest.approx(float(np.sum(report.cells)), abs=1e-14)
    assert report.block_means.shape == (14,)
    assert float(np.mean(report.block_means)) == pytest.approx(0.5, abs=1e-12)


def test_displacements_and_wrap(ep2):
    cfg = ChainConfig.from_pattern((-1.0, 1.0), 10, ell=0.0)
    u = cfg.displacements()
    assert u[0] == 0.0
    assert u[-1] == pytest.approx(cfg.L * cfg.ell, abs=1e-12)
    assert cfg.q == 0
    assert ChainConfig.from_pattern((-1.0, 1.0), 11).q == 1


def test_json_roundtrip(ep2, tmp_path):
    cfg = ChainConfig.from_pattern((-0.9, 1.1), 12, ell=0.1, L=2.0)
    data = chain_to_dict(cfg, potential={"note": "prototype"})
    path = tmp_path / "chain.json"
    path.write_text(json.dumps(data))
    again = chain_from_dict(json.loads(path.read_text()))
    assert again.n == cfg.n and again.m == cfg.m
    assert again.ell == cfg.ell and again.L == cfg.L
    assert np.array_equal(again.slopes, cfg.slopes)


def test_slopes_frozen(ep2):
    cfg = ChainConfig.from_pattern((-1.0, 1.0), 8, ell=0.0)
    with pytest.raises(ValueError):
        cfg.slopes[0] = 5.0
