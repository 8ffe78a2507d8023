import numpy as np
import pytest

from turing_nf import bloch as bl
from turing_nf import kinetics as kin
from turing_nf import normalform as nf
from turing_nf import pattern as pt

A, B, D = 2.0, 3.2, (1.0, 8.0)
# closed-form critical wavenumber of the Brusselator
KC = (A**2 / (D[0] * D[1])) ** 0.25

# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE = {}


def brusselator_on_cell(k_factor=1.0, b=B):
    return kin.builtin("brusselator", a=A, b=b, D=list(D)).rescaled(KC * k_factor)


def solve(sys, N):
    return pt.solve_pattern(sys, pt.onset_seed(sys, N=N))


@pytest.fixture(scope="session")
def bru():
    return brusselator_on_cell()


@pytest.fixture(scope="session")
def pattern(bru):
    return solve(bru, 256)


@pytest.fixture(scope="session")
def pattern128(bru):
    return solve(bru, 128)


@pytest.fixture(scope="session")
def u_ad(pattern):
    return bl.adjoint_zero_mode(pattern, 48)


@pytest.fixture(scope="session")
def ctx(pattern, u_ad):
    return nf.build_context(pattern, u_ad)


@pytest.fixture(scope="session")
def ctx128(pattern128):
    return nf.build_context(pattern128, bl.adjoint_zero_mode(pattern128, 48))


@pytest.fixture(scope="session")
def branch(pattern, u_ad):
    return bl.critical_branch(pattern, samples=33, M=48, u_ad=u_ad)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
