import numpy as np
import pytest

import hjminimax as hj
from hjminimax import viscosity
from hjminimax.errors import CFLViolation, MalformedInput, OutOfRange


@pytest.fixture(scope="module")
def quad():
    return viscosity.ConvexHamiltonian(H=hj.parse("p^2/2"), p_window=(-4.0, 4.0))


def test_convexity_certificate(quad):
    assert viscosity.is_convex_in_p(hj.parse("p^2/2"))
    assert viscosity.is_convex_in_p(hj.parse("p^4/4 + p^2/2"))
    assert not viscosity.is_convex_in_p(hj.parse("cos(p) - 1"))
    assert not viscosity.is_convex_in_p(hj.parse("p^2/2 + cos(q)"))  # not p-only


def test_convex_hamiltonian_rejects_nonconvex():
    with pytest.raises(MalformedInput):
        viscosity.ConvexHamiltonian(H=hj.parse("cos(p)"), p_window=(-3, 3))
    with pytest.raises(MalformedInput):
        viscosity.ConvexHamiltonian(H=hj.parse("p^2/2 + q"), p_window=(-3, 3))


def test_legendre_quadratic(quad):
    # (p^2/2)* = v^2/2
    for v in (-2.0, -0.3, 0.0, 1.7):
        assert viscosity.legendre(quad, v) == pytest.approx(v * v / 2, abs=1e-8)


def test_legendre_quartic():
    # (p^4/4)* at v=1: maximizer p=1, value 1 - 1/4 = 3/4
    Hc = viscosity.ConvexHamiltonian(H=hj.parse("p^4/4"), p_window=(-3.0, 3.0))
    assert viscosity.legendre(Hc, 1.0) == pytest.approx(0.75, abs=1e-7)
    assert viscosity.legendre(Hc, 0.0) == pytest.approx(0.0, abs=1e-9)


def test_legendre_out_of_range(quad):
    with pytest.raises(OutOfRange):
        viscosity.legendre(quad, 11.0)


def test_lax_oleinik_smooth_regime(quad):
    # before the caustic the variational solution equals the classical one
    u0 = hj.parse("cos(q)")
    q_grid = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    t = 0.5
    u = viscosity.lax_oleinik(quad, u0, t, q_grid)
    for j, q in enumerate(q_grid):
        q0 = q
        for _ in range(60):
            q0 -= (q0 - t * np.sin(q0) - q) / (1 - t * np.cos(q0))
        z = np.cos(q0) + t * np.sin(q0) ** 2 / 2
        assert u[j] == pytest.approx(z, abs=1e-6)


def test_lax_oleinik_zero_time(quad):
    u0 = hj.parse("cos(q)")
    qs = np.linspace(0, 6, 31)
    np.testing.assert_allclose(viscosity.lax_oleinik(quad, u0, 0.0, qs),
                               np.cos(qs), atol=1e-14)


def test_lax_friedrichs_transport():
    # H = c*p advects exactly: u(t,q) = u0(q - c t) up to scheme diffusion
    spec = hj.ProblemSpec(H=hj.parse("0.8*p"), u0=hj.parse("cos(q)"),
                          domain=hj.Periodic(2 * np.pi), t_max=1.0)
    t_grid = np.linspace(0, 1, 9)
    q_grid = np.linspace(0, 2 * np.pi, 256, endpoint=False)
    g = viscosity.lax_friedrichs(spec, t_grid, q_grid, cfl=0.5)
    exact = np.cos(q_grid - 0.8)
    assert np.abs(g.u[-1] - exact).max() < 0.05


def test_lax_friedrichs_matches_lax_oleinik(quad, burgers_spec):
    t_grid = np.linspace(0, 2.0, 17)
    q_grid = np.linspace(0, 2 * np.pi, 256, endpoint=False)
    lf = viscosity.lax_friedrichs(burgers_spec, t_grid, q_grid, cfl=0.5)
    lo = viscosity.lax_oleinik_grid(quad, burgers_spec.u0, t_grid, q_grid)
    # first-order scheme on a shocked solution: agreement at grid accuracy
    assert np.abs(lf.u - lo.u).max() < 0.12
    assert lf.provenance == lo.provenance == "viscosity"


def test_lax_friedrichs_cfl_guard(burgers_spec):
    t_grid = np.linspace(0, 1, 5)
    q_grid = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    with pytest.raises(CFLViolation):
        viscosity.lax_friedrichs(burgers_spec, t_grid, q_grid, cfl=1.2)


def test_zero_hamiltonian_all_methods_agree():
    spec = hj.ProblemSpec(H=hj.parse("0*p"), u0=hj.parse("cos(q)"),
                          domain=hj.Periodic(2 * np.pi), t_max=1.0)
    t_grid = np.linspace(0, 1, 5)
    q_grid = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    lf = viscosity.lax_friedrichs(spec, t_grid, q_grid)
    np.testing.assert_allclose(lf.u, np.tile(np.cos(q_grid), (5, 1)), atol=1e-9)
