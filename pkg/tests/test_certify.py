import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cvqms.certify import (CertificationError, MomentBoundSpec, certify_moment_bound, ec_diamond_lower_bound,
                           estimate_tight_constants, evolved_channel, g_l, paper_constants, qou_constants,
                           scalar_lemma_suite, sup_power_gap, perturbation_constants, two_mode_bound_margin)
from cvqms.dynamics import IntegratorConfig
from cvqms.fock import FockBasisSpec
from cvqms.generator import displacement, pure_loss, qou, realize_generator


@given(st.floats(0.1, 50), st.floats(1.0, 8))
def test_sup_power_gap_is_the_sup(C, nu):
    xs = np.linspace(0, 2 * C + 2, 20001)
    numeric = np.max(-xs ** nu + C * xs ** (nu - 1))
    closed = sup_power_gap(C, nu)
    assert numeric <= closed * (1 + 1e-9) + 1e-12
    assert numeric >= closed * (1 - 1e-3)


def test_spec_validation():
    with pytest.raises(CertificationError):
        MomentBoundSpec(2, "plain")
    with pytest.raises(CertificationError):
        MomentBoundSpec(2, "drift", c=-1, mu=1)
    assert MomentBoundSpec(2, "drift", c=2, mu=6).cap == 3


def test_qou_regimes():
    assert qou_constants(2.0, 1.0, 2).form == "drift"
    assert qou_constants(1.0, 1.0, 2).omega == pytest.approx(2 + 2)
    with pytest.raises(CertificationError):
        paper_constants("cnot", 2)


def test_too_small_omega_is_flagged():
    rg = realize_generator(qou(0.5, 1.0), FockBasisSpec(60))
    rep = certify_moment_bound(rg, MomentBoundSpec(2, "plain", omega=0.5))
    assert rep.verdict in ("violated", "inconclusive-edge")
    assert rep.margin < 0
    assert "witness" in rep.to_dict()


def test_violation_in_the_bulk():
    # with lam = mu = 1, L†(N+1) = 1, so omega* = max 1/(n+1) = 1, attained at the vacuum
    rg = realize_generator(qou(1.0, 1.0), FockBasisSpec(40))
    tc = estimate_tight_constants(rg, 2)
    assert tc.omega == pytest.approx(1.0, rel=1e-9)
    rep = certify_moment_bound(rg, MomentBoundSpec(2, "plain", omega=0.5))
    assert rep.verdict == "violated"
    assert not rep.certified


def test_tight_pure_loss():
    rg = realize_generator(pure_loss(), FockBasisSpec(40))
    tc = estimate_tight_constants(rg, 2, mu=1.0, c=1.0)
    assert tc.omega == pytest.approx(0.0, abs=1e-12)
    assert tc.c_star >= 0.5 - 1e-9
    assert certify_moment_bound(rg, paper_constants("pure_loss", 2)).certified


def test_cutoff_guard():
    with pytest.raises(CertificationError):
        certify_moment_bound(realize_generator(pure_loss(), FockBasisSpec(8)), paper_constants("pure_loss", 2))


@given(st.floats(0, 1e3), st.integers(1, 5), st.integers(2, 8))
def test_g_l_bounds(x, l, k):
    g = g_l(x, l, k)
    assert g >= 0
    assert g <= (x + 1) ** (k / 2) * (1 + 1e-12)
    if x >= l - 1:
        assert g >= (x + 1) ** (k / 2 - 1) * l * (1 - 1e-11)


def test_lemma_suite_small():
    rep = scalar_lemma_suite(trials=300, seed=3)
    assert rep.passed
    assert rep.to_dict()["passed"]
    with pytest.raises(ValueError):
        scalar_lemma_suite(trials=0)


def test_two_mode_margin_nonnegative():
    rng = np.random.default_rng(0)
    h = np.cumsum(np.cumsum(rng.random((6, 6)), axis=0), axis=1)
    assert two_mode_bound_margin(1, 2, 2, 2, 0.3 + 0.1j, h) >= -1e-12


def test_perturbation_constants_special_case():
    c, gamma, k = perturbation_constants(2, 2.0, displacement(), 0.01)
    assert k == 10
    assert c == pytest.approx(2 * (1 + 24 + 16))
    assert gamma > 1e10


def test_ec_bound():
    basis = FockBasisSpec(10)
    cfg = IntegratorConfig(1.0, rtol=1e-10, atol=1e-12)
    ch = evolved_channel(realize_generator(pure_loss(), basis), 0.3, cfg)
    same = ec_diamond_lower_bound(ch, ch, basis, 1.0, probes=4, support=5)
    assert same.lower_bound == 0
    ident = lambda X: X
    rep = ec_diamond_lower_bound(ch, ident, basis, 1.0, probes=4, support=5)
    # the single-photon probe alone gives 2(1 - e^{-0.3}) at energy 1
    assert rep.lower_bound >= 2 * (1 - math.exp(-0.3)) - 1e-8
    assert rep.lower_bound <= 2
    assert rep.sobolev_ratio_bound >= rep.lower_bound - 1e-12
    vac = ec_diamond_lower_bound(ch, ident, basis, 0.0, support=5)
    assert vac.lower_bound < 1e-10
