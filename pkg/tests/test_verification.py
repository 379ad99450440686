import json

import numpy as np
import pytest

from lbmbench.errors import ConfigurationError, NumericalFailure
from lbmbench.geometry import fluid_count
from lbmbench.kernels import get_kernel
from lbmbench.lattice_list import PaddingPolicy
from lbmbench.verification import PASS_TOLERANCE, PoiseuilleCase, analytic_profile, verify_kernel, wall_model


def test_analytic_profile():
    case = PoiseuilleCase()
    u = analytic_profile(case)
    assert len(u) == case.h == 32
    assert np.array_equal(u, u[::-1])
    nu = case.params.nu
    assert nu == pytest.approx(2 / 15, rel=1e-15)
    # centreline value g h^2 / (8 nu) and zero at the walls, from the same formula
    assert case.mach_proxy == pytest.approx(9.6e-4, rel=1e-12)
    assert case.g / (2 * nu) * 0 * case.h == 0.0
    assert u.max() < case.mach_proxy and u.min() > 0


def test_case_validation():
    with pytest.raises(ConfigurationError):
        PoiseuilleCase(nz=5)
    with pytest.raises(ConfigurationError):
        PoiseuilleCase(g=1e-2)
    with pytest.raises(ConfigurationError):
        PoiseuilleCase(g=float("nan"))
    case = PoiseuilleCase(4, 4, 10)
    ff = case.geometry()
    assert ff.periodic == (True, True, False) and fluid_count(ff) == 4 * 4 * 8
    assert case.default_interval() % 2 == 0


def test_wall_models():
    assert wall_model(get_kernel("list-aa-soa")) == "half-way"
    assert wall_model(get_kernel("aa-vec-soa")) == "full-way"


@pytest.mark.parametrize("name", ["list-push-soa", "blk-pull-aos"])
def test_zero_force_is_exact(name):
    rep = verify_kernel(name, PoiseuilleCase(4, 4, 10, g=0.0))
    assert rep.converged and rep.passed
    assert rep.linf == 0.0 and rep.l2 == 0.0
    assert np.all(np.array(rep.u_sim) == 0.0)


@pytest.mark.parametrize("name", ["list-aa-pv-soa", "aa-soa"])
def test_single_kernel_passes(name):
    rep = verify_kernel(name, PoiseuilleCase(4, 4, 34))
    assert rep.converged and rep.passed, rep.message
    assert 0 <= rep.linf < PASS_TOLERANCE and rep.l2 >= 0
    assert rep.xy_deviation <= 1e-13
    # the raw (pre-collision) velocity lags by g/2, far below the shift-corrected error
    assert rep.linf_raw > 100 * rep.linf
    d = json.loads(rep.to_json())
    assert d["kernel"] == name and len(d["u_sim"]) == 32 and d["steps"] == rep.steps


@pytest.mark.parametrize("family", [
    ["list-aa-soa", "list-push-aos"],
    ["blk-push-soa", "blk-pull-aos"],
])
def test_outcome_independent_of_layout_blk_padding(family):
    case = PoiseuilleCase(4, 4, 18)
    reports = [verify_kernel(n, case) for n in family]
    k = get_kernel(family[0], blk=3)
    reports.append(verify_kernel(k, case))
    if k.is_list:
        reports.append(verify_kernel(family[0], case, padding=PaddingPolicy("thrash")))
    else:
        reports.append(verify_kernel(family[0], case, pad=5))
    ref = np.array(reports[0].u_sim)
    for rep in reports:
        assert rep.passed
        assert np.max(np.abs(np.array(rep.u_sim) - ref)) <= 1e-12 * np.max(ref)


def test_non_convergence_reported():
    rep = verify_kernel("list-aa-soa", PoiseuilleCase(4, 4, 34), max_steps=100)
    assert not rep.converged and not rep.passed
    assert "no convergence" in rep.message and rep.steps == 100


def test_divergence_reported(monkeypatch):
    from lbmbench import verification

    def diverge(*args, **kwargs):
        raise NumericalFailure("simulation diverged by step 42", step=42)

    monkeypatch.setattr(verification, "steady_state_run", diverge)
    rep = verify_kernel("list-aa-soa", PoiseuilleCase(4, 4, 10))
    assert not rep.converged and not rep.passed
    assert rep.steps == 42 and "diverged" in rep.message
    assert rep.linf == float("inf")
