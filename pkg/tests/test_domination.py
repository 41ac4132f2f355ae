import math

import numpy as np
import pytest

import cocyclelab as cl
from cocyclelab import fixtures
from cocyclelab import domination as dommod
from cocyclelab import operator as opmod
from cocyclelab import spectrum as specmod
from cocyclelab.errors import IncompleteEvidenceError, ShapeError

LOG2 = math.log(2.0)


def _bundles(M=32):
    eye = np.eye(M)
    u = dommod.Bundle(eye[:, :1])
    c = dommod.Bundle(eye[:, 1:2])
    s = dommod.Bundle(eye[:, 2:], includes_tail=True)
    return u, c, s


def test_check_domination_pass_with_witness(A32, rotation):
    u, c, _ = _bundles()
    cert = cl.check_domination(A32, rotation, u, c, 1, 0.6, 1.0,
                               seed=0, samples=100, orbit_len=200, pair="u,c")
    assert cert.passed
    assert cert.worst_witness.ratio == pytest.approx(0.5, abs=1e-12)


def test_check_domination_violation(A32, rotation):
    u, c, _ = _bundles()
    cert = cl.check_domination(A32, rotation, u, c, 1, 0.4, 1.0,
                               seed=0, samples=50, orbit_len=100)
    assert not cert.passed
    assert any(v["kind"] == "III.2" for v in cert.violations)


def test_check_domination_identical_bundles_rejected(A32, rotation):
    u, _, _ = _bundles()
    with pytest.raises(ShapeError):
        cl.check_domination(A32, rotation, u, u, 1, 0.5, 1.0, samples=10,
                            orbit_len=10)


def test_tightest_constants_all_pairs(A32, rotation):
    u, c, s = _bundles()
    a_uc, t_uc, g_uc = cl.tightest_constants(A32, rotation, u, c, 1,
                                             seed=0, samples=100)
    assert a_uc == pytest.approx(0.5, abs=1e-12)
    assert t_uc == pytest.approx(2.0, abs=1e-12)
    assert g_uc == pytest.approx(math.pi / 2.0, abs=1e-9)
    a_cs, t_cs, _ = cl.tightest_constants(A32, rotation, c, s, 1,
                                          seed=0, samples=100)
    assert a_cs == pytest.approx(1.0 / 3.0, abs=1e-12)
    assert t_cs == pytest.approx(1.0, abs=1e-12)
    a_us, _, _ = cl.tightest_constants(A32, rotation, u, s, 1,
                                       seed=0, samples=100)
    assert a_us == pytest.approx(1.0 / 6.0, abs=1e-12)


def test_alpha_monotone_in_ell(A32, rotation):
    u, c, _ = _bundles()
    for ell in range(1, 6):
        alpha, _, _ = cl.tightest_constants(A32, rotation, u, c, ell,
                                            seed=0, samples=30)
        assert alpha == pytest.approx(0.5 ** ell, abs=1e-12)


def test_finest_search_splits_example(A32, rotation):
    frames = np.eye(32)[:, :2]
    parts = cl.finest_search(A32, rotation, frames, 1, 0.1, seed=0,
                             samples=30)
    assert parts == [1, 1]


def test_finest_search_identity_single_block(rotation):
    ident = opmod.ConstantCocycle(
        opmod.TruncatedOperator(np.eye(4), opmod.zero_tail()))
    parts = cl.finest_search(ident, rotation, np.eye(4)[:, :3], 1, 0.1,
                             seed=0, samples=20)
    assert parts == [3]


def test_finest_search_three_blocks(rotation):
    A = opmod.ConstantCocycle(
        opmod.TruncatedOperator(np.diag([4.0, 2.0, 1.0]), opmod.zero_tail()))
    parts = cl.finest_search(A, rotation, np.eye(3), 1, 0.1, seed=0,
                             samples=20)
    assert parts == [1, 1, 1]


def test_finest_search_seed_independent(A32, rotation):
    frames = np.eye(32)[:, :2]
    a = cl.finest_search(A32, rotation, frames, 1, 0.1, seed=0, samples=30)
    b = cl.finest_search(A32, rotation, frames, 1, 0.1, seed=99, samples=30)
    assert a == b


def _certs(A, rotation, alpha_uc=0.6, alpha_cs=0.5):
    u, c, s = _bundles(A.M)
    uc = cl.check_domination(A, rotation, u, c, 1, alpha_uc, 1.0, seed=0,
                             samples=60, orbit_len=100, pair="u,c")
    cs = cl.check_domination(A, rotation, c, s, 1, alpha_cs, 0.9, seed=0,
                             samples=60, orbit_len=100, pair="c,s")
    return [uc, cs]


def test_classify_example_partially_hyperbolic(A32, rotation):
    spec = specmod.LyapunovSpectrum.from_exponents(
        [LOG2, 0.0], tail_rule="tail negative")
    cls = cl.classify_ph(spec, _certs(A32, rotation), zero_gap=1e-2)
    assert cls.verdict == "partially_hyperbolic"
    assert (cls.d, cls.c) == (1, 1)


def test_classify_scaled_center_anosov(rotation):
    C = fixtures.scaled_center_cocycle(0.1, 32)
    spec = specmod.LyapunovSpectrum.from_exponents([LOG2 - 0.1, 0.1])
    cls = cl.classify_ph(spec, _certs(C, rotation, alpha_uc=0.7),
                         zero_gap=1e-2)
    assert cls.verdict == "non_uniformly_anosov"


def test_classify_identity_fails(rotation):
    spec = specmod.LyapunovSpectrum.from_exponents([0.0, 0.0])
    ident = opmod.ConstantCocycle(
        opmod.TruncatedOperator(np.eye(32), opmod.zero_tail()))
    u, c, s = _bundles()
    uc = dommod.SplittingCertificate(1, 0.9, 0.5, 1.0, (1, 1), 1, True,
                                     None, pair="u,c")
    cs = dommod.SplittingCertificate(1, 0.9, 0.5, 1.0, (1, 31), 1, True,
                                     None, pair="c,s")
    cls = cl.classify_ph(spec, [uc, cs], zero_gap=1e-2)
    assert cls.verdict == "fail"
    assert "positive" in cls.reason


def test_classify_missing_certificate(A32):
    spec = specmod.LyapunovSpectrum.from_exponents([LOG2, 0.0])
    with pytest.raises(IncompleteEvidenceError):
        cl.classify_ph(spec, [], zero_gap=1e-2)


def test_persistence_zero_delta_unchanged(A32, rotation):
    u, c, _ = _bundles()
    rows = cl.persistence_probe(A32, rotation, u, c, 1, [0.0], seed=0,
                                samples=40, trials=2)
    assert rows[0]["passed"]
    assert rows[0]["alpha"] == pytest.approx(0.5, abs=1e-12)


def test_persistence_small_and_large(A32, rotation):
    u, c, _ = _bundles()
    rows = cl.persistence_probe(A32, rotation, u, c, 1, [0.05, 1.5], seed=0,
                                samples=40, trials=2)
    small, large = rows
    assert small["passed"] and small["alpha"] <= 0.62
    assert not large["passed"]


def test_witness_replay_soundness(A32, rotation):
    # re-evaluating the stored worst witness reproduces its ratio exactly
    u, c, _ = _bundles()
    cert = cl.check_domination(A32, rotation, u, c, 1, 0.6, 1.0, seed=0,
                               samples=60, orbit_len=100, pair="u,c")
    wit = cert.worst_witness
    x = np.asarray(wit.point)
    prod = opmod.cocycle_product(A32, rotation, x, cert.ell)
    nu = np.linalg.norm(prod.block @ (c.at(x) @ np.asarray(wit.u)))
    nv = np.linalg.norm(prod.block @ (u.at(x) @ np.asarray(wit.v)))
    assert nu / nv == pytest.approx(wit.ratio, rel=1e-12)
    assert wit.ratio <= cert.alpha
