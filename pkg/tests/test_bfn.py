import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bfnlab.bfn import (
    BfnConfig,
    chi_profile,
    decrease_rate_profile,
    figure1_alpha,
    figure1_config,
    illposedness_diagnostic,
    oracle_deviation,
    run_bfn,
)
from bfnlab.cli_io import jsonable
from bfnlab.core import (
    BC,
    ConstantAdvection,
    EquationSpec,
    Field,
    Gain,
    Grid1D,
    NamedProfile,
    NoOracle,
    SelfAdvection,
    UnsupportedRegime,
    dirichlet_field,
)

VISCOUS = EquationSpec(0.01, ConstantAdvection(0.0), BC.DIRICHLET, 1.0)
LINEAR = EquationSpec(0.0, ConstantAdvection(1.0), BC.PERIODIC, 1.0)
BURGERS = EquationSpec(0.0, SelfAdvection(), BC.PERIODIC, 1.0)


def config(spec, gain, u0, uobs0, **kw):
    kw.setdefault("grid_n", 129 if spec.viscous else 128)
    kw.setdefault("nt", 128)
    return BfnConfig(spec, gain, u0, uobs0, **kw)


# -- rate profile ----------------------------------------------------------------------------


def test_rate_no_progress():
    w = NamedProfile("sin2pi", phase=0.3).field(Grid1D(64))
    rate = decrease_rate_profile(w, w)
    assert np.all(rate[~np.isnan(rate)] == 0.0)


@pytest.mark.parametrize("T", [0.5, 1.0, 2.0])
def test_rate_of_constant_gain(T):
    w = NamedProfile("sin2pi", phase=0.3).field(Grid1D(64))
    rate = decrease_rate_profile(w, w * math.exp(-2 * T))
    np.testing.assert_allclose(rate, 2 * T, rtol=1e-14)


def test_rate_excludes_zeros():
    g = Grid1D(64)
    w = NamedProfile("sin2pi").field(g)
    rate = decrease_rate_profile(w, 0.5 * w)
    assert np.isnan(rate[0]) and np.isnan(rate[32])
    assert int(np.isnan(rate).sum()) == 2


# -- fixed point and iteration ----------------------------------------------------------------------


@pytest.mark.parametrize("spec,gain,prof", [
    (VISCOUS, Gain(1.0), NamedProfile("sinpi", 0.5)),
    (VISCOUS, Gain(1.0, window=(0.25, 0.75)), NamedProfile("sinpi", 0.5)),
    (LINEAR, Gain(1.0, support=(0.0, 0.5)), NamedProfile("sin2pi", 0.3)),
    (BURGERS, Gain(1.0), NamedProfile("sin2pi", 0.1, phase=0.5)),
])
def test_fixed_point_norms_vanish(spec, gain, prof):
    rep = run_bfn(config(spec, gain, prof, prof, iterations=2))
    for r in rep.iterations:
        assert r.w0_norm <= 1e-14 and r.wT_norm <= 1e-14 and r.wtilde0_norm <= 1e-14
    for case, dev in rep.oracle.items():
        if isinstance(dev, float):
            assert dev <= 1e-12, case


def test_geometric_decay_inviscid_linear():
    cfg = config(LINEAR, Gain(1.0), NamedProfile("sin2pi", 0.3), NamedProfile("sin2pi", 0.1, phase=0.5),
                 iterations=3, nt=256)
    rep = run_bfn(cfg)
    w0 = rep.iterations[0].w0_norm
    for j, r in enumerate(rep.iterations):
        assert r.w0_norm == pytest.approx(math.exp(-2 * j) * w0, rel=1e-6)
    np.testing.assert_allclose(rep.contractions, math.exp(-2), rtol=1e-6)


def test_geometric_decay_viscous_linear():
    u0 = dirichlet_field(Grid1D(129, BC.DIRICHLET), np.sin(np.pi * Grid1D(129, BC.DIRICHLET).x) * 0.7)
    rep = run_bfn(config(VISCOUS, Gain(0.5), u0, NamedProfile("sinpi", 0.2), iterations=3))
    np.testing.assert_allclose(rep.contractions, math.exp(-1), rtol=1e-8)


@pytest.mark.parametrize("kappa", [0.5, 1.0, 2.0])
def test_kappa_scales_rate(kappa):
    T = 0.75
    cfg = config(EquationSpec(0.0, ConstantAdvection(1.0), BC.PERIODIC, T),
                 Gain(1.0, kappa, support=(0.0, 0.5)), NamedProfile("sin2pi"), NamedProfile("zero"),
                 grid_n=128, nt=96)
    rep = run_bfn(cfg)
    c = chi_profile(T, 128, nt=96)
    ok = ~np.isnan(rep.rate)
    np.testing.assert_allclose(rep.rate[ok], (1 + kappa) * c[ok], atol=1e-6)


@settings(max_examples=10, deadline=None)
@given(T=st.sampled_from([0.1, 0.3, 0.6, 1.0]), a=st.floats(0.0, 0.5), kappa=st.floats(0.2, 3.0))
def test_rate_nonnegative_without_observations(T, a, kappa):
    spec = EquationSpec(0.0, ConstantAdvection(1.0), BC.PERIODIC, T)
    cfg = config(spec, Gain(1.0, kappa, support=(a, a + 0.3)), NamedProfile("sin2pi", phase=0.1),
                 NamedProfile("zero"), grid_n=64, nt=32)
    rate = run_bfn(cfg).rate
    assert np.all(rate[~np.isnan(rate)] >= -1e-12)


# -- oracle deviations ---------------------------------------------------------------------------


def test_oracle_deviation_inviscid_linear():
    cfg = config(LINEAR, Gain(1.0), NamedProfile("sin2pi", 0.3), NamedProfile("zero"), nt=1024,
                 record_every=128)
    assert oracle_deviation(run_bfn(cfg), "theorem4") <= 1e-6


def test_oracle_deviation_viscous_window():
    g = Grid1D(129, BC.DIRICHLET)
    u0 = sum(np.sin(k * np.pi * g.x) / k for k in range(1, 9))
    cfg = config(VISCOUS, Gain(1.0, window=(0.25, 0.75)), dirichlet_field(g, u0), NamedProfile("zero"))
    assert oracle_deviation(run_bfn(cfg), "theorem1") <= 1e-8


def test_oracle_deviation_missing():
    rep = run_bfn(config(LINEAR, Gain(1.0), NamedProfile("sin2pi"), NamedProfile("zero"), nt=16))
    with pytest.raises(NoOracle):
        oracle_deviation(rep, "proposition3")


# -- refused regimes -----------------------------------------------------------------------------------


@pytest.mark.parametrize("cfg", [
    config(VISCOUS, Gain(1.0, support=(0.0, 0.5)), NamedProfile("sinpi"), NamedProfile("zero")),
    config(EquationSpec(0.05, SelfAdvection(), BC.DIRICHLET, 0.5), Gain(1.0), NamedProfile("sinpi", 0.2),
           NamedProfile("zero")),
    config(BURGERS, Gain(1.0), NamedProfile("sin2pi", 0.5), NamedProfile("zero")),
])
def test_unsupported_regimes(cfg):
    with pytest.raises(UnsupportedRegime):
        run_bfn(cfg)


def test_viscous_burgers_without_gain():
    cfg = config(EquationSpec(0.05, SelfAdvection(), BC.DIRICHLET, 0.5), Gain(0.0), NamedProfile("sinpi", 0.2),
                 NamedProfile("zero"), grid_n=257, nt=256)
    rep = run_bfn(cfg)
    assert rep.oracle["proposition3"] <= 1e-6
    assert rep.iterations[0].contraction == pytest.approx(1.0, abs=1e-6)


# -- ill-posedness witness ---------------------------------------------------------------------------


def band_limited():
    g = Grid1D(129, BC.DIRICHLET)
    return Field(g, dirichlet_field(g, sum(np.sin(k * np.pi * g.x) / k for k in range(1, 9))).values)


def test_illposedness_reference_is_exact():
    res = illposedness_diagnostic(VISCOUS, Gain(10.0, support=(0.0, 0.5)), band_limited())
    assert res.reference_residual <= 1e-8
    assert res.ratio >= 1e3


def test_illposedness_vanishes_with_gain():
    res = [illposedness_diagnostic(VISCOUS, Gain(K, support=(0.0, 0.5)), band_limited()).residual
           for K in (1.0, 0.1, 0.01)]
    assert res[0] > res[1] > res[2]


# -- figure1 --------------------------------------------------------------------------------------------


def test_figure1_linear_short_horizon():
    rep = run_bfn(figure1_config("linear", 0.25, 1.0, 128, 64))
    x, rate = rep.grid.x, rep.rate
    near = np.abs(x - 0.7) < 0.02
    assert np.all(rate[near] == pytest.approx(0.0, abs=1e-12))
    assert np.nanmax(rate) > 0


def test_figure1_linear_past_threshold():
    rep = run_bfn(figure1_config("linear", 0.75, 1.0, 128, 96))
    assert np.all(rep.rate[~np.isnan(rep.rate)] > 0)


def test_figure1_burgers_alpha_guard():
    assert figure1_alpha("burgers", 0.5) == 0.2
    alpha = figure1_alpha("burgers", 1.0)
    assert alpha < 0.2 and 1 / (2 * np.pi * alpha) > 1.0
    assert figure1_alpha("linear", 1.0) == 1.0


def test_report_is_json_ready():
    rep = run_bfn(config(LINEAR, Gain(1.0, support=(0.0, 0.5)), NamedProfile("sin2pi"), NamedProfile("zero"),
                         nt=32))
    text = json.dumps(jsonable(rep.to_dict()), allow_nan=False)
    assert "excluded_nodes" in text
