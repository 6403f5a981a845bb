import numpy as np
import pytest

from phenowave.continuum import Snapshot
from phenowave.ibm import IBState, make_rng, resolve_rho_max, run_replicates
from phenowave.ibm2d import (IBSimulation2D, _cells_2d, angular_profile, radial_transect, run_2d,
                             transect_ensemble)
from phenowave.model import InitialProfile, ModelParams, build_laws
from phenowave.wave import extract_ybar


def planar(**kw):
    base = dict(tau=0.2, dx=0.1, dy=0.02, eps=1e-2, X=2.0, T=1.0)
    base.update(kw)
    p = ModelParams(**base)
    return p, build_laws(p)


def test_initial_ybar_sits_at_initial_trait():
    p, laws = planar()
    (snap,) = run_2d(p, laws, InitialProfile(A0=100.0), [0.0], seed=0)
    # where counts are large enough that flooring leaves no plateau of tied maxima
    mask = snap.rho > 0.1 * snap.rho.max()
    yb = extract_ybar(snap.n, snap.y)[mask]
    assert mask.sum() > 20
    assert np.all(np.abs(yb - 0.2) <= p.dy + 1e-12)
    assert snap.meta["step"] == 0 and snap.rho.shape == (21, 21)


def test_movement_conserves_cells_and_respects_walls():
    p, laws = planar(tau=0.5, dx=1.0, dy=0.5, eps=1.0, X=2.0, Y=1.0, alpha=1e-9, rho_max=1e12)
    assert p.theta == pytest.approx(1.0)
    N = np.zeros((3, 3, 3), np.int64)
    N[0, 0, 1] = 20_000
    mu = laws.mu(p.y_grid())
    r = laws.r(p.y_grid())
    rho = N.sum(-1) / p.dx**2
    status = _cells_2d(N, np.empty_like(N), np.ones((3, 3)), rho, mu, r, p.theta, p.eta, p.beta, p.tau,
                       p.alpha, p.rho_max, p.E_max, make_rng(0))
    assert status == 0 and N.sum() == 20_000
    plane = N.sum(-1)
    # each axis: half stays (aborted), half moves one site, independently
    assert plane[2].sum() == 0 and plane[:, 2].sum() == 0
    for v in (plane[0, 0], plane[0, 1], plane[1, 0], plane[1, 1]):
        assert abs(v - 5_000) < 300


def test_radial_transect_of_symmetric_field():
    x = np.arange(31) * 0.1
    rr = np.sqrt(x[:, None] ** 2 + x[None, :] ** 2)
    f = np.exp(-rr)
    snap = Snapshot(0.0, x, np.array([0.0, 1.0]), np.stack([f, 2 * f], -1), f, 0 * f, 1 + 0 * f)
    tr = radial_transect(snap)
    assert tr.x[0] == 0.0 and tr.rho[0] == 1.0
    np.testing.assert_allclose(tr.rho, np.exp(-tr.x), rtol=0.03)
    assert tr.n.shape == (tr.x.size, 2)
    assert sum(tr.meta["ring_sites"]) == np.sum(np.floor(rr / 0.1 + 0.5) < tr.x.size)


def test_ensemble_mean_is_radially_symmetric():
    p, laws = planar(X=2.0, T=0.5)
    prof = InitialProfile(A0=20.0)
    ens = run_replicates(p, laws, prof, [0.5], n_reps=8, seed=2, runner=run_2d)
    stack = np.stack([rep[0].rho for rep in ens.replicates])
    mean = ens.mean[0]
    for radius in (0.5, 1.0):
        ang, vals = angular_profile(mean, radius)
        _, reps = zip(*(angular_profile(rep[0], radius) for rep in ens.replicates))
        reps = np.array(reps)
        edges = np.linspace(0, np.pi / 2 + 1e-9, 4)
        sector = np.digitize(ang, edges) - 1
        ring = vals.mean()
        for k in range(3):
            sel = sector == k
            per_rep = reps[:, sel].mean(axis=1)
            se = per_rep.std(ddof=1) / np.sqrt(len(per_rep))
            assert abs(per_rep.mean() - ring) <= 3 * se + 1e-12
    assert stack.shape[0] == 8


def test_transect_ensemble_identical_replicates_have_zero_error():
    p, laws = planar(T=0.2)
    (snap,) = run_2d(p, laws, InitialProfile(A0=20.0), [0.2], seed=1)
    s = transect_ensemble([snap, snap, snap], n_boot=20)
    assert np.all(s.ybar_se < 1e-12) and np.all(s.rho_se <= 1e-12 * snap.rho.max())
    assert s.mean.meta["replicates"] == 3


def test_planar_run_invariants_and_determinism():
    p, laws = planar(T=0.5)
    prof = InitialProfile(A0=20.0)
    a = run_2d(p, laws, prof, [0.25, 0.5], seed=4)
    b = run_2d(p, laws, prof, [0.25, 0.5], seed=4)
    prev = np.ones_like(a[0].E)
    for sa, sb in zip(a, b):
        assert np.array_equal(sa.n, sb.n) and np.array_equal(sa.E, sb.E)
        assert sa.n.min() >= 0 and sa.M.min() >= 0
        assert sa.E.min() >= 0 and np.all(sa.E <= prev)
        prev = sa.E


def test_planar_rho_max_uses_area():
    p, laws = planar()
    prof = InitialProfile(A0=1.0)
    q = resolve_rho_max(p, prof, dim=2)
    N0 = np.floor(prof.density(0.0, p.y_grid())).sum()
    assert q.rho_max == pytest.approx(N0 / p.dx**2)
    sim = IBSimulation2D(q, laws, IBState(np.zeros((3, 3, p.ny), np.int64), np.zeros((3, 3)), np.ones((3, 3))),
                         make_rng(0))
    sim.advance(3)
    assert sim.state.k == 3
