from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lbmbench.d3q19 import (
    C, OPP, W, WEIGHTS_EXACT, BodyForce, TrtParams, equilibrium, macroscopic, trt_collide,
)
from lbmbench.errors import DomainError, InvalidStateError

from oracles import AXIS, DIAG, ref_collide, reference_weight


def test_stencil_matches_enumeration():
    vecs = [tuple(int(v) for v in c) for c in C]
    assert vecs[0] == (0, 0, 0)
    assert sorted(vecs[1:7]) == sorted(AXIS)
    assert sorted(vecs[7:]) == sorted(DIAG)
    for c, w in zip(vecs, WEIGHTS_EXACT):
        assert w == reference_weight(c)


def test_moment_identities_exact():
    assert sum(WEIGHTS_EXACT) == 1
    for a in range(3):
        assert sum(w * int(c[a]) for w, c in zip(WEIGHTS_EXACT, C)) == 0
        for b in range(3):
            m = sum(w * int(c[a]) * int(c[b]) for w, c in zip(WEIGHTS_EXACT, C))
            assert m == (Fraction(1, 3) if a == b else 0)


def test_opposites():
    assert np.array_equal(C[OPP], -C)
    assert np.array_equal(OPP[OPP], np.arange(19))


def test_trt_params_relations():
    p = TrtParams.from_tau(0.9)
    assert p.nu == pytest.approx(2 / 15, rel=1e-15)
    lam = (1 / p.omega_plus - 0.5) * (1 / p.omega_minus - 0.5)
    assert lam == pytest.approx(3 / 16, rel=1e-14)
    assert TrtParams.from_viscosity(p.nu).omega_plus == pytest.approx(p.omega_plus, rel=1e-15)


@pytest.mark.parametrize("omega", [0.0, 2.0, -1.0, 2.5])
def test_trt_params_domain(omega):
    with pytest.raises(DomainError):
        TrtParams(omega)


def test_body_force_rejects_non_finite():
    with pytest.raises(DomainError):
        BodyForce((np.nan, 0, 0))
    with pytest.raises(DomainError):
        BodyForce((1, 2))


def test_macroscopic_examples():
    rho, u = macroscopic(W)
    assert rho == pytest.approx(1.0, abs=1e-15)
    assert np.all(np.abs(u) < 1e-16)
    rho, u = macroscopic(equilibrium(2.0, (0, 0, 0)))
    assert rho == pytest.approx(2.0, abs=1e-15)
    assert np.all(np.abs(u) < 1e-16)
    _, u = macroscopic(equilibrium(1.0, (0.05, 0, 0)))
    assert np.allclose(u, (0.05, 0, 0), rtol=0, atol=1e-15)


def test_macroscopic_rejects_non_finite():
    f = W.copy()
    f[3] = np.inf
    with pytest.raises(InvalidStateError):
        macroscopic(f)


def test_equilibrium_examples():
    assert np.array_equal(equilibrium(1.0, (0, 0, 0)), W)
    u = np.array([0.02, -0.01, 0.03])
    f = equilibrium(1.0, u)
    assert abs(f.sum() - 1.0) < 1e-14
    assert np.allclose(f @ C, u, rtol=0, atol=1e-14)
    f = equilibrium(1.0, (0.1, 0, 0))
    assert f[1] - f[2] == pytest.approx(1 / 30, abs=1e-16)
    with pytest.raises(DomainError):
        equilibrium(0.0, (0, 0, 0))


def random_pdfs(rng, n):
    rho = rng.uniform(0.5, 2.0, n)
    u = rng.uniform(-0.1, 0.1, (n, 3))
    return equilibrium(rho, u) * (1 + 0.1 * rng.uniform(-1, 1, (n, 19)))


def test_collide_matches_reference():
    rng = np.random.default_rng(1)
    f = random_pdfs(rng, 200)
    p = TrtParams.from_tau(0.73)
    g = (1e-4, -2e-5, 3e-5)
    out = trt_collide(f, p, BodyForce(g))
    ref = ref_collide(f, p.omega_plus, p.omega_minus, g)
    assert np.max(np.abs(out - ref)) < 1e-15


def test_equilibrium_fixed_point():
    p = TrtParams.from_tau(0.9)
    f = equilibrium(1.0, (0.03, -0.02, 0.01))
    assert np.max(np.abs(trt_collide(f, p) - f)) < 1e-15


def test_conservation_1000_states():
    rng = np.random.default_rng(7)
    f = random_pdfs(rng, 1000)
    p = TrtParams.from_tau(0.6)
    out = trt_collide(f, p)
    rho = f.sum(axis=1)
    assert np.all(np.abs(out.sum(axis=1) - rho) <= 1e-13 * rho)
    assert np.all(np.abs(out @ C - f @ C) <= 1e-13 * rho[:, None])


def test_momentum_gain_1000_states():
    rng = np.random.default_rng(8)
    f = random_pdfs(rng, 1000)
    g = np.array([1e-6, 0, 0])
    out = trt_collide(f, TrtParams.from_tau(0.9), BodyForce(g))
    rho = f.sum(axis=1)
    gain = out @ C - f @ C
    assert np.max(np.abs(gain - rho[:, None] * g)) <= 1e-13


@settings(max_examples=200, deadline=None)
@given(
    rho=st.floats(0.2, 5.0),
    u=st.tuples(*[st.floats(-0.15, 0.15)] * 3),
    tau=st.floats(0.51, 3.0),
)
def test_equilibrium_is_fixed_point_property(rho, u, tau):
    f = equilibrium(rho, u)
    out = trt_collide(f, TrtParams.from_tau(tau))
    assert np.max(np.abs(out - f)) <= 1e-14 * rho


@settings(max_examples=200, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    tau=st.floats(0.51, 3.0),
    g=st.tuples(*[st.floats(-1e-4, 1e-4)] * 3),
)
def test_collision_moments_property(seed, tau, g):
    f = random_pdfs(np.random.default_rng(seed), 1)[0]
    out = trt_collide(f, TrtParams.from_tau(tau), BodyForce(g))
    rho = f.sum()
    assert abs(out.sum() - rho) <= 1e-13 * rho
    assert np.max(np.abs(out @ C - f @ C - rho * np.array(g))) <= 1e-13
