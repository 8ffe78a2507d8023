import numpy as np
import pytest

from conftest import brusselator_on_cell, solve
from turing_nf import bloch as bl
from turing_nf import fieldops as fo
from turing_nf import kinetics as kin
from turing_nf import pattern as pt
from turing_nf.errors import PoorFit, PreconditionError

M = 48


def constant_state(sys, u, N=64):
    prof = np.tile(np.asarray(u, dtype=float), (N, 1))
    return pt.PatternSolution(prof, 0 * prof, 0 * prof, sys)


def linear_system(C, D=(1.0, 1.0)):
    C = np.asarray(C, dtype=float)
    return kin.ReactionSystem(name="linear", n=len(D), D=tuple(D), params={},
                              f=lambda u: u @ C.T,
                              jac=lambda u: np.broadcast_to(C, u.shape[:-1] + C.shape).copy())


def cubic_scalar(mu=1.5):
    # u'' + mu u - u³ = 0: a gradient system, so B(0) is self-adjoint
    return kin.ReactionSystem(name="cubic", n=1, D=(1.0,), params={"mu": mu},
                              f=lambda u: mu * u - u**3,
                              jac=lambda u: (mu - 3 * u**2)[..., None],
                              equilibrium_guess=(0.0,))


def test_constant_coefficient_oracle():
    s = kin.builtin("brusselator", a=2.0, b=3.2, D=[1, 8]).rescaled(0.8)
    p = constant_state(s, s.equilibrium_guess)
    C = s.jac(np.array(s.equilibrium_guess))
    sigma, Mt = 0.3, 10
    lam = np.sort_complex(np.linalg.eigvals(bl.assemble_bloch(p, sigma, Mt).entries))
    ref = np.concatenate([np.linalg.eigvals(-(sigma + l) ** 2 * np.diag(s.Dvec) + C)
                          for l in range(-Mt, Mt + 1)])
    np.testing.assert_allclose(lam, np.sort_complex(ref), atol=1e-10)


def test_hermitian_for_self_adjoint_data():
    C = np.array([[-1.0, 0.4], [0.4, -2.0]])
    p = constant_state(linear_system(C), [0.0, 0.0])
    A = bl.assemble_bloch(p, 0.17, 12).entries
    np.testing.assert_allclose(A, A.conj().T, atol=1e-14)


def test_assembly_preconditions(pattern):
    with pytest.raises(PreconditionError):
        bl.assemble_bloch(pattern, 0.6, M)
    with pytest.raises(PreconditionError):
        bl.assemble_bloch(pattern, 0.1, 4)


def test_spectrum_at_zero(pattern):
    sp = bl.bloch_spectrum(pattern, 0.0, M)
    assert abs(sp.eigvals[0]) <= 1e-8
    assert sp.eigvals[1].real < -0.1
    assert sp.converged[:5].all()


def test_spectrum_at_half_is_stable(pattern):
    assert bl.bloch_spectrum(pattern, 0.5, M).eigvals[0].real < 0


@pytest.mark.parametrize("sigma", [0.05, 0.21, 0.43])
def test_conjugate_symmetry(pattern, sigma):
    a = np.linalg.eigvals(bl.assemble_bloch(pattern, sigma, M).entries)
    b = np.conj(np.linalg.eigvals(bl.assemble_bloch(pattern, -sigma, M).entries))
    d = np.abs(a[:, None] - b[None, :]).min(axis=1)
    assert d.max() <= 1e-8 * max(1, np.abs(a).max())


def test_truncation_convergence(pattern):
    a = bl.bloch_spectrum(pattern, 0.2, M).eigvals[:5]
    b = bl.bloch_spectrum(pattern, 0.2, 2 * M).eigvals[:5]
    assert np.abs(a - b).max() <= 1e-6


def test_collocation_agrees_with_fourier(pattern128):
    sigma = 0.3
    col = np.linalg.eigvals(bl.collocation_bloch(pattern128, sigma))
    four = bl.bloch_spectrum(pattern128, sigma, 40).eigvals[:5]
    for z in four:
        assert np.abs(col - z).min() <= 1e-6


def test_adjoint_mode(pattern, u_ad):
    assert abs(fo.inner_product(pattern.profile_dx, u_ad) - 1) <= 1e-9
    assert np.abs(u_ad[1:] + u_ad[:0:-1]).max() <= 1e-8
    A = bl.assemble_bloch(pattern, 0.0, M).entries
    w = bl.to_vec(fo.to_fourier(u_ad, M))
    assert np.linalg.norm(A.conj().T @ w) <= 1e-7 * np.linalg.norm(w)


def test_adjoint_mode_self_adjoint_toy():
    s = cubic_scalar()
    p = pt.solve_pattern(s, pt.onset_seed(s, N=64))
    u_ad = bl.adjoint_zero_mode(p, 24)
    du = p.profile_dx
    expect = du / fo.inner_product(du, du).real
    np.testing.assert_allclose(u_ad, expect, atol=1e-9)


def test_corrector_and_formula(pattern, u_ad):
    rhs = -2 * pattern.sys.Dvec[None, :] * pattern.profile_dxx
    assert abs(fo.inner_product(rhs, u_ad)) <= 1e-8
    d, e1 = bl.diffusion_coefficient_formula(pattern, u_ad, M, return_e1=True)
    assert d > 0
    assert np.abs(e1[1:] - e1[:0:-1]).max() <= 1e-8
    assert abs(fo.inner_product(e1, u_ad)) <= 1e-9


def test_branch_properties(branch):
    assert abs(branch.lambdas[len(branch.sigmas) // 2]) <= 1e-8
    assert branch.evenness_residual() <= 1e-8
    assert branch.realness_residual() <= 1e-8
    nz = branch.sigmas != 0
    assert np.all(branch.lambdas[nz].real < 0)
    for e, es in zip(branch.eigvecs, branch.e_star):
        assert abs(bl.coeff_inner(e, es) - 1) <= 1e-8


def test_two_sided_bound(branch, pattern, u_ad):
    d = bl.diffusion_coefficient_formula(pattern, u_ad, M)
    inner = (np.abs(branch.sigmas) <= 0.5 * branch.gamma0) & (branch.sigmas != 0)
    s2 = branch.sigmas[inner] ** 2
    lam = branch.lambdas[inner].real
    assert np.all(-2 * d * s2 < lam) and np.all(lam < -0.5 * d * s2)


def test_fit_synthetic():
    s = np.linspace(-0.2, 0.2, 17)
    assert abs(bl.diffusion_coefficient_fit((s, -3 * s**2)) - 3) <= 1e-10
    assert abs(bl.diffusion_coefficient_fit((s, -3 * s**2 + 5 * s**4)) - 3) <= 1e-8
    with pytest.raises(PoorFit):
        bl.diffusion_coefficient_fit((s[:7], -3 * s[:7] ** 2))
    with pytest.raises(PoorFit):
        bl.diffusion_coefficient_fit((s, -3 * s**2 + 0.1 * np.cos(60 * s)))


def test_fit_matches_formula(branch, pattern, u_ad):
    d_fit = bl.diffusion_coefficient_fit(branch, window=0.5 * branch.gamma0)
    d_form = bl.diffusion_coefficient_formula(pattern, u_ad, M)
    assert abs(d_fit - d_form) <= 1e-3 * d_form


def test_stability_report_precondition(pattern):
    with pytest.raises(PreconditionError):
        bl.verify_spectral_stability(pattern, sigma_grid_size=3)


def test_eckhaus_unstable_wavenumber():
    p = solve(brusselator_on_cell(k_factor=1.2), 128)
    rep = bl.verify_spectral_stability(p, sigma_grid_size=33, M=32, branch_samples=17)
    assert not rep.hypothesis_i_ok
    assert rep.max_real_part_away_from_zero > 0
    # the growing modes sit at small σ
    grid, tops = rep.sigma_grid, rep.top_real_parts
    assert abs(grid[np.argmax(tops)]) <= 0.25
    assert rep.to_record()["hypothesis_i_ok"] is False
