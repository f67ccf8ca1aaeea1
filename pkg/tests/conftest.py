"""Shared fixtures: the standard quadratic setup and cached heavy artifacts."""

import numpy as np
import pytest

from dwchain.effective_potential import EffectivePotential
from dwchain.potentials import ConvexWell, DoubleWell, LongRangePotential
from dwchain.transition import phi_converged


@pytest.fixture(scope="session")
def proto_wells():
    """min((z+1)^2, (z-1)^2): well 1 bottoms at -1, well 2 at +1."""
    return DoubleWell(
        ConvexWell.quadratic(-1.0, 1.0),
        ConvexWell.quadratic(1.0, 1.0),
        growth_constant=0.5,
    )


@pytest.fixture(scope="session")
def quad_lr():
    return LongRangePotential.quadratic(0.25)


@pytest.fixture(scope="session")
def ep2(proto_wells, quad_lr):
    ep = EffectivePotential(proto_wells, quad_lr, 2)
    ep.envelope
    return ep


@pytest.fixture(scope="session")
def ep3(proto_wells, quad_lr):
    ep = EffectivePotential(proto_wells, quad_lr, 3)
    ep.envelope
    return ep


@pytest.fixture(scope="session")
def phi_antiphase(ep2):
    """Converged transition energy between the two anti-phase patterns."""
    return phi_converged(ep2, 0.0, (-1.0, 1.0), (1.0, -1.0), tol=1e-8)


# Frozen golden values for the quadratic setup (derived analytically and
# cross-checked by the grid/scan oracles in the tests).
GOLD = {
    "m2_segment_right": (0.1, 0.9),
    "m2_segment_slope": 0.25,
    "m2_segment_intercept": -0.0125,
    "m3_contacts": (4.0 / 15.0, 0.4, 14.0 / 15.0),
    "m3_mid_intercept": 1.0 / 45.0,
    "psi0_at_half": 0.3125,
    "branch_1_at_quarter": (-0.75, 1.25, 0.125),
    "phi_antiphase": 0.22360679775,
    "cell_const_half": 0.2,
}


@pytest.fixture(scope="session")
def gold():
    return GOLD
