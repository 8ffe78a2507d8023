import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from turing_nf import fieldops as fo
from turing_nf import normalform as nf
from turing_nf.errors import AlignmentError, OutOfRegime

def tiled_translation(p, theta, J):
    return np.tile((p.shifted(theta) - p.profile)[None], (J, 1, 1))


# -- chopping -------------------------------------------------------------------------

def test_chop_unchop(pattern):
    ones = nf.chop(np.ones(4 * 32), 4)
    assert ones.shape == (4, 32, 1) and np.all(ones == 1)
    V = np.random.default_rng(1).normal(size=(5 * 64, 2))
    assert np.array_equal(nf.unchop(nf.chop(V, 5)), V)
    tiled = nf.chop(np.tile(pattern.profile, (3, 1)), 3)
    for cell in tiled:
        assert np.array_equal(cell, pattern.profile)
    with pytest.raises(AlignmentError):
        nf.chop(np.ones(100), 3)


# -- cutoff, corrector, stencil ------------------------------------------------------

def test_cutoff_shape(ctx):
    s = ctx.width
    assert ctx.phi_at(0.9 * np.pi) == 0.5 and ctx.phi_at(-0.9 * np.pi) == -0.5
    assert ctx.phi_at(0.0) == 0.0
    x = np.linspace(-np.pi, np.pi, 2001)
    phi = nf.cutoff(x, s)
    assert np.all(np.diff(phi) >= 0)
    np.testing.assert_allclose(phi, -nf.cutoff(-x, s), atol=1e-15)
    # continuity at ±π/2
    assert abs(nf.cutoff(0.5 * np.pi - 1e-12, s) - 0.5) < 1e-14


def test_mollifier_unit_mass(ctx):
    xg, wg = np.polynomial.legendre.leggauss(400)
    xg, wg = 0.5 * np.pi * xg, 0.5 * np.pi * wg
    assert abs(wg @ nf.mollifier(xg, ctx.width) - 1) < 1e-13
    assert abs(nf.mollifier_cosine_transform(0.0, ctx.width) - 1) < 1e-13


def test_corrector(ctx, u_ad):
    assert abs(fo.inner_product(ctx.psi, u_ad) - 1) < 1e-9
    assert np.abs(ctx.psi[1:] + ctx.psi[:0:-1]).max() < 1e-12
    x = fo.grid(ctx.N)
    assert np.abs(ctx.psi[np.abs(x) >= ctx.psi_support]).max() == 0.0
    np.testing.assert_allclose(ctx.psi_at(x), ctx.psi, atol=1e-12)


def test_stencil_sum(ctx, pattern):
    np.testing.assert_allclose(ctx.E.sum(axis=0), -pattern.profile_dx, atol=1e-12)


# -- linear maps ------------------------------------------------------------------------

def test_phase_functional_of_stencil(ctx):
    # F(E_0) = 1 and F(E_{±1}) = 0 make E∗θ a right inverse of F
    J = 6
    th = np.zeros(J)
    th[2] = 1.0
    c = nf.convolve_E(ctx, th)
    np.testing.assert_allclose(c[2], ctx.E[1], atol=0)
    np.testing.assert_allclose(c[3], ctx.E[2], atol=0)
    np.testing.assert_allclose(c[1], ctx.E[0], atol=0)
    assert np.abs(c[[0, 4, 5]]).max() == 0


def test_linear_maps(ctx, rng):
    J = 8
    z = nf.linear_decompose(ctx, np.zeros((J, ctx.N, ctx.n)))
    assert z.norm() == 0
    th = rng.uniform(-0.1, 0.1, J)
    s = nf.linear_decompose(ctx, nf.convolve_E(ctx, th))
    np.testing.assert_allclose(s.theta, th, atol=1e-10)
    assert np.abs(s.W).max() < 1e-10
    v = nf.unchop(nf.random_state(ctx, J, rng).W) + 0.01 * np.cos(fo.large_grid(J, ctx.N) / 3)[:, None]
    v = nf.chop(v, J)
    back = nf.linear_reconstruct(ctx, nf.linear_decompose(ctx, v))
    assert np.abs(back - v).max() < 1e-10


# -- corrector field -------------------------------------------------------------------

def test_H_vanishes_for_uniform_phase(ctx):
    W0 = np.zeros((ctx.N, ctx.n))
    for th in (0.0, 0.12):
        H, c = nf.assemble_H(ctx, th, th, th, W0)
        assert abs(c) < 1e-14 and np.abs(H).max() < 1e-14


def test_H_out_of_regime(ctx):
    with pytest.raises(OutOfRegime):
        nf.assemble_H(ctx, 0.0, 0.9, 0.0, np.zeros((ctx.N, ctx.n)))


@settings(max_examples=8, deadline=None)
@given(st.lists(st.floats(-0.2, 0.2), min_size=3, max_size=3), st.integers(0, 10**6))
def test_constraint_restored_by_c(ctx, thetas, seed):
    """⟨W + H, u_ad(·-θ)⟩ = ⟨W, u_ad⟩, checked with Gauss-Legendre quadrature."""
    rng = np.random.default_rng(seed)
    tp, t0, tn = thetas
    N, n = ctx.N, ctx.n
    x = fo.grid(N)
    W = sum(rng.normal(size=n)[None] * np.cos(k * x + rng.uniform(0, 6))[:, None] for k in range(4))
    _, c = nf.assemble_H(ctx, tp, t0, tn, 0.05 * W)
    # independent evaluation on quadrature nodes
    xg, wg = np.polynomial.legendre.leggauss(400)
    xg, wg = np.pi * xg, np.pi * wg
    K = N // 2 - 1
    cu = ctx.pattern.coeffs(K)
    cad = fo.to_fourier(ctx.u_ad, K)
    cw = fo.to_fourier(0.05 * W, K)
    u = lambda th: fo.evaluate(cu, xg - th).real
    ad_sh = fo.evaluate(cad, xg - t0).real
    Wg = fo.evaluate(cw, xg).real
    phi = ctx.phi_at(xg)[:, None]
    H1 = 0.5 * phi * (u(tn) - u(tp)) + 0.25 * (u(tn) + u(tp) - 2 * u(t0))
    Hg = H1 + c * ctx.psi_at(xg - t0)
    lhs = wg @ np.sum((Wg + Hg) * ad_sh, axis=1)
    rhs = wg @ np.sum(Wg * fo.evaluate(cad, xg).real, axis=1)
    assert abs(lhs - rhs) <= 1e-9


# -- nonlinear maps ---------------------------------------------------------------------

def test_reconstruct_special_cases(ctx, pattern):
    J = 4
    assert np.abs(nf.reconstruct(ctx, nf.LatticeState.zeros(J, ctx.N, ctx.n))).max() < 1e-14
    s = nf.LatticeState(np.full(J, 0.1), np.zeros((J, ctx.N, ctx.n)))
    np.testing.assert_allclose(nf.reconstruct(ctx, s), tiled_translation(pattern, 0.1, J), atol=1e-13)


def test_reconstruct_derivative_at_zero(ctx, rng):
    s = nf.random_state(ctx, 6, rng)
    ratios = []
    for e in (1e-2, 1e-3, 1e-4):
        d = nf.reconstruct(ctx, s.scaled(e)) - e * nf.linear_reconstruct(ctx, s)
        ratios.append(np.abs(d).max() / e**2)
    assert max(ratios) < 1.5 * min(ratios)


def test_decompose_zero_and_translation(ctx, pattern):
    J = 8
    z = nf.decompose(ctx, np.zeros((J, ctx.N, ctx.n)))
    assert z.norm() == 0
    s = nf.decompose(ctx, tiled_translation(pattern, 0.1, J))
    assert np.abs(s.theta - 0.1).max() < 1e-9
    assert np.abs(s.W).max() <= 1e-8


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 10**6))
def test_round_trip(ctx, seed):
    rng = np.random.default_rng(seed)
    s = nf.random_state(ctx, 8, rng)
    back = nf.decompose(ctx, nf.reconstruct(ctx, s))
    assert (back - s).norm() <= 1e-9
    nf.check_state(ctx, back)


def test_random_state_satisfies_constraints(ctx, rng):
    s = nf.random_state(ctx, 8, rng)
    assert np.abs(nf.cell_pair(ctx, s.W, ctx.u_ad_pair)).max() < 1e-12
    jump, djump = nf.boundary_mismatch(s.W)
    assert max(jump, djump) < 1e-6


# -- normal-form operator -------------------------------------------------------------

def test_A_nf_phase_row_ignores_theta(ctx, rng):
    s = nf.LatticeState(rng.uniform(-0.1, 0.1, 8), np.zeros((8, ctx.N, ctx.n)))
    assert np.abs(nf.apply_A_nf(ctx, s).theta).max() == 0


def test_boundary_term_of_constant_sequence(ctx, rng):
    W1 = nf.random_state(ctx, 1, rng).W
    W = np.repeat(W1, 5, axis=0)
    assert np.abs(nf.delta_plus(nf.gamma_boundary(ctx, W))).max() < 1e-14


def test_conjugacy(ctx, rng):
    for _ in range(5):
        s = nf.random_state(ctx, 8, rng)
        lhs = nf.linear_reconstruct(ctx, nf.apply_A_nf(ctx, s))
        rhs = nf.apply_A_ch(ctx, nf.linear_reconstruct(ctx, s))
        assert np.abs(lhs - rhs).max() <= 1e-8 * np.abs(rhs).max()


# -- nonlinearity ----------------------------------------------------------------------

def test_nonlinearity_zero_and_translation(ctx, pattern):
    J = 6
    nth, nw = nf.nonlinear_residual(ctx, pattern.sys, nf.LatticeState.zeros(J, ctx.N, ctx.n))
    # only the steady-state residual of the discrete pattern survives
    assert np.abs(nth).max() < 1e-14 and np.abs(nw).max() <= 10 * pattern.residual_norm
    s = nf.decompose(ctx, tiled_translation(pattern, 0.1, J))
    nth, nw = nf.nonlinear_residual(ctx, pattern.sys, s)
    assert max(np.abs(nth).max(), np.abs(nw).max()) <= 1e-9


def test_nonlinearity_is_quadratic(ctx, pattern, rng):
    s = nf.random_state(ctx, 8, rng)
    eps = np.array([1e-2, 1e-3, 1e-4])
    size = [max(np.abs(a).max(), np.abs(b).max())
            for a, b in (nf.nonlinear_residual(ctx, pattern.sys, s.scaled(e)) for e in eps)]
    slope = np.polyfit(np.log(eps), np.log(size), 1)[0]
    assert abs(slope - 2) <= 0.1


def test_nonlinearity_is_local_for_a_phase_step(ctx, pattern):
    J = 16
    theta = np.where(np.arange(J) >= J // 2, 0.05, 0.0)
    s = nf.LatticeState(theta, np.zeros((J, ctx.N, ctx.n)))
    nth, _ = nf.nonlinear_residual(ctx, pattern.sys, s)
    near = {6, 7, 8, 9, 14, 15, 0, 1}
    far = [j for j in range(J) if j not in near]
    assert np.abs(nth[far]).max() <= 1e-6 * np.abs(nth).max()
