import numpy as np
import pytest

from turing_nf import evolve as ev
from turing_nf import kinetics as kin
from turing_nf import normalform as nf
from turing_nf import pattern as pt
from turing_nf.errors import AlignmentError, BlowUp, Indeterminate, WindowError

J = 4


def translated(p, theta, J):
    return np.tile(p.shifted(theta) - p.profile, (J, 1))


def bump(p, J, amplitude=1e-2, **kw):
    return ev.make_perturbation("gaussian_bump", J, p.N, p, amplitude=amplitude, **kw)


# -- integrator ----------------------------------------------------------------------

def test_zero_stays_zero(pattern128):
    tr = ev.integrate(pattern128, np.zeros((J * 128, 2)), 2.0, 0.05, J)
    assert np.abs(tr.snapshots).max() == 0 and np.all(tr.sup_norms == 0)


def test_linearized_flow_is_linear(pattern128):
    v0 = bump(pattern128, J)
    a = ev.integrate(pattern128, v0, 2.0, 0.05, J, linearized=True)
    b = ev.integrate(pattern128, 3 * v0, 2.0, 0.05, J, linearized=True)
    np.testing.assert_allclose(b.snapshots, 3 * a.snapshots, atol=1e-15)


def test_translated_pattern_is_steady(pattern128):
    v0 = translated(pattern128, 0.2, J)
    tr = ev.integrate(pattern128, v0, 5.0, 0.05, J)
    assert np.ptp(tr.sup_norms) <= 1e-8
    assert np.abs(tr.snapshots[-1] - v0).max() <= 1e-8


def test_linear_and_nonlinear_agree_for_small_data(pattern128):
    v0 = bump(pattern128, J, amplitude=1e-6)
    a = ev.integrate(pattern128, v0, 2.0, 0.05, J, linearized=True).snapshots[-1]
    b = ev.integrate(pattern128, v0, 2.0, 0.05, J).snapshots[-1]
    # the difference is quadratic in the amplitude
    assert np.abs(a - b).max() <= 1e-3 * np.abs(a).max()


def test_fourth_order_in_time():
    # a mildly stiff problem: diffusion scaled down around a homogeneous state
    s = kin.builtin("brusselator", a=2.0, b=1.0, D=[0.01, 0.08])
    flat = np.tile([2.0, 0.5], (64, 1))
    hom = pt.PatternSolution(flat, 0 * flat, 0 * flat, s)
    v0 = ev.make_perturbation("gaussian_bump", 2, 64, hom, amplitude=0.5)
    end = lambda dt: ev.integrate(hom, v0, 2.0, dt, 2, stride=1).snapshots[-1]
    ref = end(0.005)
    e1, e2 = (np.abs(end(dt) - ref).max() for dt in (0.1, 0.05))
    assert 16 / 1.5 <= e1 / e2 <= 16 * 1.5


def test_stiff_convergence_around_pattern(pattern128):
    # stiff order reduction leaves roughly third order here
    v0 = bump(pattern128, 2, amplitude=0.2)
    end = lambda dt: ev.integrate(pattern128, v0, 1.0, dt, 2, stride=1).snapshots[-1]
    ref = end(0.00625)
    e1, e2 = (np.abs(end(dt) - ref).max() for dt in (0.1, 0.05))
    assert e1 / e2 >= 8


def test_field_times_and_norms(pattern128):
    v0 = bump(pattern128, J)
    tr = ev.integrate(pattern128, v0, 1.0, 0.05, J, stride=4, field_times=[0.0, 0.5, 1.0, 7.0])
    np.testing.assert_allclose(tr.times, [0.0, 0.5, 1.0])
    assert len(tr.norm_times) == len(tr.sup_norms) == 6
    h = 2 * np.pi / 128
    assert abs(tr.l1_norms[0] - h * np.linalg.norm(v0, axis=1).sum()) <= 1e-15


def test_integrate_input_errors(pattern128):
    with pytest.raises(AlignmentError):
        ev.integrate(pattern128, np.zeros((100, 2)), 1.0, 0.1, J)
    with pytest.raises(ValueError):
        ev.integrate(pattern128, np.zeros((J * 128, 2)), 1.0, 0.0, J)


def test_blowup_on_turing_unstable_state(bru):
    u0 = pt.homogeneous_equilibrium(bru, bru.equilibrium_guess)
    flat = np.tile(u0, (64, 1))
    hom = pt.PatternSolution(flat, 0 * flat, 0 * flat, bru)
    v0 = ev.make_perturbation("gaussian_bump", 2, 64, hom, amplitude=1e-6)
    with pytest.raises(BlowUp):
        ev.integrate(hom, v0, 200.0, 0.1, 2, linearized=True, blowup_factor=10)


# -- initial data -----------------------------------------------------------------------

def test_perturbation_kinds(pattern128):
    N = 128
    zero = ev.make_perturbation("gaussian_bump", J, N, pattern128, amplitude=0.0)
    assert np.all(zero == 0)
    full = ev.make_perturbation("phase_bump", J, N, pattern128, amplitude=0.1, width=np.inf)
    np.testing.assert_allclose(full, translated(pattern128, 0.1, J), atol=1e-12)
    amp, w = 1e-2, 1.5
    g = ev.make_perturbation("gaussian_bump", 16, N, pattern128, amplitude=amp, width=w)
    l1 = 2 * np.pi / N * np.linalg.norm(g, axis=1).sum()
    assert abs(l1 - amp * w * np.sqrt(2 * np.pi)) <= 0.02 * l1
    r1 = ev.make_perturbation("random_localized", J, N, pattern128, seed=3, amplitude=0.5)
    r2 = ev.make_perturbation("random_localized", J, N, pattern128, seed=3, amplitude=0.5)
    assert np.array_equal(r1, r2) and abs(np.abs(r1).max() - 0.5) < 1e-15
    with pytest.raises(ValueError):
        ev.make_perturbation("step", J, N, pattern128)


def test_wrap_fraction_of_localized_data(pattern128):
    v0 = bump(pattern128, 8)
    tr = ev.Trajectory(times=np.array([0.0]), snapshots=v0[None], J=8, N=128, dt=0.1,
                       linearized=True)
    assert ev.wrap_fraction(tr) < 1e-12


# -- lattice coordinates -------------------------------------------------------------------

def test_lattice_track_of_translation(pattern128, ctx128):
    v0 = translated(pattern128, 0.05, J)
    tr = ev.integrate(pattern128, v0, 1.0, 0.05, J, field_times=[0.0, 1.0])
    times, states, note = ev.lattice_track(ctx128, tr)
    assert note is None and len(states) == 2
    norms = ev.lattice_norms(states, 128)
    np.testing.assert_allclose(norms["theta_inf"], 0.05, atol=1e-8)
    np.testing.assert_allclose(norms["theta_sum"], 0.05 * J, atol=1e-7)
    assert norms["dtheta_l2"].max() <= 1e-8 and norms["W_Xinf"].max() <= 1e-7


def test_lattice_norms_hand_values(ctx128):
    s = nf.LatticeState(np.array([0.0, 1.0, 3.0, 0.0]), np.zeros((4, 128, 2)))
    out = ev.lattice_norms([s], 128)
    assert out["theta_inf"][0] == 3.0 and out["theta_sum"][0] == 4.0
    assert abs(out["dtheta_l2"][0] - np.sqrt(1 + 4 + 9 + 0)) < 1e-15
    assert out["W_L1"][0] == 0


# -- fits ----------------------------------------------------------------------------------

def test_measure_decay_on_power_law():
    t = np.linspace(0, 1000, 2001)
    r = ev.measure_decay(t, 3 * (1 + t) ** -0.75, norm="dtheta_l2")
    assert abs(r.exponent - 0.75) < 1e-12 and abs(r.prefactor - 3) < 1e-10
    assert r.passed and r.target == 0.75
    assert not ev.measure_decay(t, (1 + t) ** -0.2, norm="v_inf").passed


@pytest.mark.parametrize("window", [(5.0, 800.0), (100.0, 100.0), (50.0, 2000.0)])
def test_measure_decay_window_errors(window):
    t = np.linspace(0, 1000, 101)
    with pytest.raises(WindowError):
        ev.measure_decay(t, 1 / (1 + t), window=window)


def test_measure_decay_too_few_samples():
    t = np.array([0.0, 60.0, 1000.0])
    with pytest.raises(WindowError):
        ev.measure_decay(t, 1 / (1 + t))


def test_heat_kernel_properties():
    h = ev.lattice_heat_kernel(31, 0.3, 2.0, j0=5)
    assert abs(h.sum() - 1) < 1e-13 and h.argmax() == 5 and h.min() > 0
    # satisfies the lattice equation
    e = 1e-5
    dh = (ev.lattice_heat_kernel(31, 0.3, 2.0 + e, 5) - ev.lattice_heat_kernel(31, 0.3, 2.0 - e, 5)) / (2 * e)
    np.testing.assert_allclose(dh, 0.3 * (np.roll(h, -1) - 2 * h + np.roll(h, 1)), atol=1e-8)


def test_synthetic_heat_kernel_decay_and_coefficient():
    Jl, d = 201, 0.3
    times = np.linspace(50, 800, 301)
    thetas = np.array([ev.lattice_heat_kernel(Jl, d, t, j0=100) for t in times])
    r = ev.measure_decay(times, np.abs(thetas).max(axis=1), norm="theta_inf")
    assert abs(r.exponent - 0.5) <= 0.02
    d_fit, resid = ev.compare_discrete_diffusion(times, thetas)
    assert abs(d_fit - d) <= 1e-3 and resid < 1e-3


def test_diffusion_indeterminate_and_short():
    times = np.linspace(0, 10, 60)
    with pytest.raises(Indeterminate):
        ev.compare_discrete_diffusion(times, np.ones((60, 8)))
    with pytest.raises(WindowError):
        ev.compare_discrete_diffusion(times[:20], np.ones((20, 8)))
