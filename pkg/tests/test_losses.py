import math

import numpy as np
import pytest

from becsteer.grid import build_grid
from becsteer.losses import LossBudget, loss_estimate
from becsteer.meanfield import PhysicalParams


@pytest.fixture(scope="module")
def setup():
    grid = build_grid(24, 48, 0.2, 0.2, -4.8)
    f = np.exp(-0.5 * (grid.r[:, None] ** 2 + grid.z[None, :] ** 2))
    f = f / math.sqrt(np.sum(grid.weights * f ** 2))
    psi = np.broadcast_to(f, (4,) + grid.shape).copy()
    return grid, psi


def test_budget_validation():
    with pytest.raises(ValueError):
        LossBudget(rate_1b=-1.0, rate_2b_11=0.0, rate_2b_01=0.0, rate_3b=0.0,
                   t=1.0, n_total=100)
    b = LossBudget(rate_1b=1.0, rate_2b_11=2.0, rate_2b_01=3.0, rate_3b=0.5,
                   t=2.0, n_total=100)
    assert b.rate_total == pytest.approx(6.5)
    assert b.n_lost == pytest.approx(13.0)
    assert b.n_lost_2b == pytest.approx(10.0)
    assert b.lost_fraction == pytest.approx(0.13)


def test_zero_couplings_give_zero_loss(setup):
    grid, psi = setup
    par = PhysicalParams(kappa_11=0.0, kappa_01=0.0, kappa_000=0.0,
                         tau_1=math.inf)
    b = loss_estimate(grid, psi, [100, 100, 100, 100], par, 0.2)
    assert b.rate_total == 0.0
    assert b.n_lost == 0.0
    assert b.lost_fraction == 0.0


def test_one_body_channel(setup):
    grid, psi = setup
    par = PhysicalParams(kappa_11=0.0, kappa_01=0.0, kappa_000=0.0, tau_1=50.0)
    b = loss_estimate(grid, psi, [100, 100, 100, 100], par, 0.5)
    assert b.rate_1b == pytest.approx(400 / 50.0)
    assert b.lost_fraction == pytest.approx(0.5 * 8.0 / 400)


def test_density_scaling(setup):
    # two-body rates scale as N^2, three-body as N^3 for a fixed orbital
    grid, psi = setup
    par = PhysicalParams(tau_1=math.inf)
    b1 = loss_estimate(grid, psi, [50, 50, 50, 50], par, 0.2)
    b2 = loss_estimate(grid, psi, [100, 100, 100, 100], par, 0.2)
    assert b2.rate_2b_11 == pytest.approx(4.0 * b1.rate_2b_11, rel=1e-12)
    assert b2.rate_2b_01 == pytest.approx(4.0 * b1.rate_2b_01, rel=1e-12)
    assert b2.rate_3b == pytest.approx(8.0 * b1.rate_3b, rel=1e-12)


def test_cross_channel_counts_both_atoms(setup):
    # a 0-1 loss event removes one atom of each state: rate = 2 kappa int n0 n1
    grid, psi = setup
    par = PhysicalParams(kappa_11=0.0, kappa_000=0.0, tau_1=math.inf)
    ns = np.array([30.0, 70.0, 0.0, 0.0])
    b = loss_estimate(grid, psi, ns, par, 0.1)
    dens = np.abs(psi[0]) ** 2
    i2 = float(np.sum(grid.weights * dens ** 2)) / par.a_ho ** 3
    assert b.rate_2b_01 == pytest.approx(2.0 * par.kappa_01 * 30 * 70 * i2,
                                         rel=1e-12)


def test_magnitude_realistic_config(setup):
    # with the default rate constants, a 500+500 atom overlapped cloud loses
    # a handful of atoms in 0.2 s, dominated by the 1-1 channel
    grid, psi = setup
    par = PhysicalParams(tau_1=60.0)
    b = loss_estimate(grid, psi, [250, 250, 250, 250], par, 0.2)
    assert 0.5 < b.n_lost_2b < 100.0
    assert b.rate_3b < 0.1 * b.rate_2b_11
    assert 1e-4 < b.lost_fraction < 0.2
