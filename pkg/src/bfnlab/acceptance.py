"""Executable acceptance criteria shared by ``bfnlab verify`` and the test suite.

Each check returns a :class:`Outcome` with the measured quantities and the
tolerances they were held to. ``mutate`` names one oracle constant to tamper
with (see :data:`MUTATIONS`); a tampered run must fail.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import burgers as bg
from .bfn import BfnConfig, chi_profile, figure1_alpha, figure1_config, illposedness_diagnostic, run_bfn
from .characteristics import Direction, chi
from .core import (
    BC,
    ConstantAdvection,
    EquationSpec,
    Field,
    Gain,
    Grid1D,
    NamedProfile,
    TruncationError,
    l2_norm,
)
from .linear_pde import theorem1_oracle

# Oracle constants a mutation can tamper with, and the perturbation applied.
MUTATIONS = {
    "theorem1": "scale the predicted ratio exp(-(K+K')(T-t)) by 1 + 1e-6",
    "window": "use the full horizon instead of the window length",
    "chi": "report occupation times 1% too large",
    "theorem6": "flip the sign of the M (T - t) term of the energy bound",
    "bn": "drop the exponential prefactor of the hand-computed b_2",
}


@dataclass
class Outcome:
    passed: bool
    measured: dict
    tolerance: dict


@dataclass
class Result:
    key: str
    title: str
    passed: bool
    measured: dict = field(default_factory=dict)
    tolerance: dict = field(default_factory=dict)
    seconds: float = 0.0
    error: Optional[str] = None

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.key}: {self.title}"


def _band_limited(grid: Grid1D, modes: int = 8) -> np.ndarray:
    x = grid.x
    return sum(np.sin(k * math.pi * x) / k for k in range(1, modes + 1))


def _viscous_setup(gain: Gain, nt: int = 64):
    grid = Grid1D(129, BC.DIRICHLET)
    spec = EquationSpec(0.01, ConstantAdvection(0.0), BC.DIRICHLET, 1.0)
    uobs0 = NamedProfile("sinpi", 0.5)
    u0 = uobs0(grid.x) + _band_limited(grid)
    return BfnConfig(spec, gain, u0, uobs0, 1, nt, 1, grid.n)


def check_theorem1_constant(mutate=None) -> Outcome:
    rep = run_bfn(_viscous_setup(Gain(1.0)))
    fwd, bwd = rep.forward[0], rep.backward[0]
    n0 = l2_norm(fwd.error_field(0))
    scale = 1 + 1e-6 if mutate == "theorem1" else 1.0
    dev = 0.0
    for i, t in enumerate(fwd.times):
        pred = scale * theorem1_oracle(Gain(1.0), 1.0, t)
        dev = max(dev, l2_norm(Field(fwd.grid, bwd.error[i] - pred * fwd.error[i])) / n0)
    wT = fwd.error_field(-1)
    match = l2_norm(bwd.error_field(-1) - wT) / l2_norm(wT)
    return Outcome(dev <= 1e-8 and match <= 1e-8,
                   {"max_deviation": dev, "final_mismatch": match},
                   {"max_deviation": 1e-8, "final_mismatch": 1e-8})


def check_theorem1_window(mutate=None) -> Outcome:
    gain = Gain(1.0, window=(0.25, 0.75))
    rep = run_bfn(_viscous_setup(gain))
    ratio = rep.iterations[0].contraction
    length = 1.0 if mutate == "window" else 0.5
    expected = math.exp(-2.0 * length)
    return Outcome(abs(ratio - expected) <= 1e-8,
                   {"ratio": ratio, "expected": expected, "deviation": abs(ratio - expected)},
                   {"deviation": 1e-8})


def check_illposedness(mutate=None) -> Outcome:
    grid = Grid1D(129, BC.DIRICHLET)
    spec = EquationSpec(0.01, ConstantAdvection(0.0), BC.DIRICHLET, 1.0)
    w0 = Field(grid, _band_limited(grid))
    res = {K: illposedness_diagnostic(spec, Gain(K, support=(0.0, 0.5)), w0) for K in (10.0, 1.0, 0.1)}
    ratio = res[10.0].ratio
    seq = [res[K].residual for K in (10.0, 1.0, 0.1)]
    monotone = all(a > b for a, b in zip(seq, seq[1:]))
    return Outcome(ratio >= 1e3 and monotone,
                   {"ratio_K10": ratio, "residual_K10": seq[0], "residual_K1": seq[1],
                    "residual_K0.1": seq[2], "reference_residual_K10": res[10.0].reference_residual},
                   {"ratio_K10_min": 1e3, "residuals": "strictly decreasing as K -> 0"})


def check_theorem4_figure1(mutate=None) -> Outcome:
    n, nt = 256, 256
    Ts = (0.05, 0.25, 0.5, 0.75, 1.0)
    measured, ok = {}, True
    for T in Ts:
        rep = run_bfn(figure1_config("linear", T, 1.0, n, nt))
        c = chi_profile(T, n, nt=nt)
        if mutate == "chi":
            c = 1.01 * c
        inc = ~np.isnan(rep.rate)
        dev = float(np.max(np.abs(rep.rate[inc] - 2 * c[inc])))
        # Excluded feet (zeros of w0) take the continuous extension 2 chi.
        positive = bool(np.min(2 * c) > 0)
        ok &= dev <= 1e-6 and positive == (T > 0.5)
        measured[f"T={T}"] = {"max_rate_minus_2chi": dev, "min_2chi": float(np.min(2 * c)),
                              "uniformly_positive": positive}
        if T == 1.0:
            flat = float(np.max(np.abs(rep.rate[inc] - 1.0)))
            ok &= flat <= 1e-6
            measured["T=1_max_rate_minus_1"] = flat
    return Outcome(ok, measured, {"rate_vs_2chi": 1e-6, "flat_at_T1": 1e-6,
                                  "positivity": "uniform iff T > 0.5"})


def _burgers_setup():
    grid = Grid1D(256)
    u0 = NamedProfile("sin2pi", 0.2).field(grid)
    uobs = bg.BurgersObservations(NamedProfile("sin2pi", 0.1, phase=0.5))
    return grid, u0, uobs


def check_theorem6(mutate=None) -> Outcome:
    grid, u0, uobs = _burgers_setup()
    T, nt = 0.5, 512
    measured, ok = {}, True
    for name, gain in (("constant", Gain(1.0)), ("window", Gain(1.0, window=(0.1, 0.4)))):
        fwd, cf = bg.solve_inviscid_burgers(Direction.FORWARD, gain, u0, uobs, T, nt, record_every=8)
        bwd, _ = bg.solve_inviscid_burgers(Direction.BACKWARD, gain, cf, uobs, T, nt, record_every=8)
        M = bg.observation_slope_bound(uobs, grid, fwd.times)
        chk = bg.theorem6_bound_check(gain, fwd, bwd, -M if mutate == "theorem6" else M)
        ok &= chk.all_satisfied
        measured[name] = {"M": M, "max_lhs_over_rhs": float(np.max(chk.lhs / chk.rhs)),
                          "stored_times": int(chk.times.size), "all_satisfied": chk.all_satisfied}
    return Outcome(ok, measured, {"lhs_minus_rhs": 0.0})


def check_proposition7(mutate=None) -> Outcome:
    grid = Grid1D(128)
    u0 = NamedProfile("sin2pi", 0.2).field(grid)
    uobs = bg.BurgersObservations(NamedProfile("sin2pi", 0.1, phase=0.5))
    dev = {}
    for nt in (2048, 4096):
        fwd, _ = bg.solve_inviscid_burgers(Direction.FORWARD, Gain(1.0), u0, uobs, 0.5, nt, record_every=nt)
        dev[nt] = float(np.max(bg.proposition7_check(Gain(1.0), fwd, uobs)))
    ratio = dev[4096] / dev[2048] if dev[2048] > 0 else 0.0
    return Outcome(dev[2048] <= 1e-3 and ratio <= 0.6,
                   {"deviation_nt2048": dev[2048], "deviation_nt4096": dev[4096], "refinement_ratio": ratio},
                   {"deviation_nt2048": 1e-3, "refinement_ratio": 0.6})


def check_remark1(mutate=None) -> Outcome:
    grid = Grid1D(256)
    K = 2.0
    gain = Gain(K, support=(0.0, 0.5))
    u0 = NamedProfile("sin2pi", 0.1, offset=1.0).field(grid)
    fwd, cf = bg.solve_inviscid_burgers(Direction.FORWARD, gain, u0, None, 1.0, 2048, record_every=2048)
    occ = chi(gain, cf)
    if mutate == "chi":
        occ = 1.01 * occ
    m = float(np.min(occ))
    w0, wT = cf.carried[0], cf.carried[-1]
    inc = np.abs(w0) >= 1e-10 * np.max(np.abs(w0))
    ratio = wT[inc] / w0[inc]
    bound = math.exp(-K * m)
    worst = float(np.max(ratio / bound))
    return Outcome(m > 0 and worst <= 1 + 1e-6,
                   {"m": m, "bound": bound, "max_ratio": float(np.max(ratio)), "max_ratio_over_bound": worst},
                   {"max_ratio_over_bound": 1 + 1e-6, "m_min": 0.0})


def check_proposition3(mutate=None) -> Outcome:
    g = Grid1D(513, BC.DIRICHLET)
    ic = NamedProfile("sinpi", 0.2).field(g)
    disc = bg.k0_wellposedness_check(ic, 0.05, 0.5, 32, cap=300.0)
    try:
        bg.k0_wellposedness_check(ic, 0.05, 0.5, 64, cap=300.0)
        refused = False
    except TruncationError:
        refused = True
    fd = bg.solve_viscous_burgers_forward(Gain(0.0), ic, None, 0.05, 0.5, 1024)
    ref = bg.cole_hopf_evolution(ic, 0.05, fd.times)
    fd_dev = float(np.max(np.abs(fd.values - ref.values)))
    return Outcome(disc <= 1e-6 and fd_dev <= 1e-4 and refused,
                   {"k0_discrepancy": disc, "fd_vs_cole_hopf": fd_dev, "past_cap_refused": refused},
                   {"k0_discrepancy": 1e-6, "fd_vs_cole_hopf": 1e-4})


def check_bn(mutate=None) -> Outcome:
    a = 1.0 / np.arange(1, 129) ** 2
    zero = bg.bn_sequence(a, 0.0, 0.0, 1.0, 1.0)
    all_zero = bool(np.all(zero.b == 0))
    growth = [bg.bn_sequence(a[:N], 1.0, 1.0, 1.0, 1.0).max_growth for N in (32, 64, 128)]
    K = Kp = nu = T = 1.0
    pre = 1.0 if mutate == "bn" else math.exp((K - Kp) * T) * (math.exp(-2 * (K + Kp) * T) - 1)
    hand = pre * a[0] ** 2 * (math.exp(2 * T * Kp + T * K + 2 * nu * T) - 1) / (2 * Kp + K + 2 * nu)
    b2 = bg.bn_sequence(a[:2], K, Kp, nu, T).b[1]
    rel = abs(b2 - hand) / abs(hand)
    nondecreasing = all(x <= y for x, y in zip(growth, growth[1:]))
    return Outcome(all_zero and growth[-1] >= 0.4 and nondecreasing and rel <= 1e-12,
                   {"zero_gain_all_zero": all_zero, "max_growth_N32": growth[0], "max_growth_N64": growth[1],
                    "max_growth_N128": growth[2], "b2_relative_error": rel},
                   {"max_growth_min": 0.4, "b2_relative_error": 1e-12})


def check_geometric_decay(mutate=None) -> Outcome:
    T = 1.0
    spec = EquationSpec(0.0, ConstantAdvection(1.0), BC.PERIODIC, T)
    cfg = BfnConfig(spec, Gain(1.0), NamedProfile("sin2pi", 0.3), NamedProfile("sin2pi", 0.1, phase=0.5),
                    3, 256, 256, 256)
    rep = run_bfn(cfg)
    c = rep.contractions
    expected = math.exp(-2 * T) * (1 + 1e-6 if mutate == "theorem1" else 1.0)
    spread = float(np.max(c) - np.min(c))
    dev = float(np.max(np.abs(c - expected)))
    return Outcome(spread <= 1e-6 and dev <= 1e-6,
                   {"contractions": c.tolist(), "spread": spread, "max_deviation_from_exp(-2T)": dev},
                   {"spread": 1e-6, "deviation": 1e-6})


def check_figure1_burgers(mutate=None) -> Outcome:
    T = 1.0
    alpha = figure1_alpha("burgers", T)
    rep = run_bfn(figure1_config("burgers", T, alpha, 256, 1024))
    x, rate = rep.grid.x, rep.rate
    inc = ~np.isnan(rate)
    low = float(np.nanmean(rate[x <= 0.1]))
    mid = float(np.nanmean(rate[(x >= 0.5) & (x <= 0.6)]))
    positive = bool(np.all(rate[inc] > 1e-6))
    return Outcome(positive and mid > low,
                   {"alpha": alpha, "min_rate": float(np.min(rate[inc])),
                    "mean_rate_0_0.1": low, "mean_rate_0.5_0.6": mid, "excluded_nodes": int((~inc).sum())},
                   {"positivity_threshold": 1e-6, "asymmetry": "mean[0.5,0.6] > mean[0,0.1]"})


CRITERIA: list[tuple[str, str, Callable]] = [
    ("1", "constant gain: backward error equals exp(-(K+K')(T-t)) forward error", check_theorem1_constant),
    ("2", "windowed gain: one-sweep contraction exp(-(K+K')(t2-t1))", check_theorem1_window),
    ("3", "spatial gain: backward preimage residual witnesses ill-posedness", check_illposedness),
    ("4", "inviscid linear: rate profile equals 2 chi, positive iff T > 0.5", check_theorem4_figure1),
    ("5", "inviscid Burgers: energy bound at every stored time", check_theorem6),
    ("6", "inviscid Burgers: error along characteristics, refinement", check_proposition7),
    ("7", "inviscid Burgers: per-foot ratio below exp(-K m)", check_remark1),
    ("8", "Cole-Hopf: unnudged viscous Burgers round trip and FD agreement", check_proposition3),
    ("9", "b_n sequence: zero at K=K'=0, super-polynomial growth, N=2 by hand", check_bn),
    ("10", "multi-iteration: constant geometric contraction exp(-2T)", check_geometric_decay),
    ("11", "Burgers figure1 variant: rate positive, asymmetric between [0,0.1] and [0.5,0.6]", check_figure1_burgers),
]


def run_criterion(key: str, mutate: Optional[str] = None) -> Result:
    for k, title, fn in CRITERIA:
        if k == key:
            t0 = time.perf_counter()
            try:
                out = fn(mutate)
                res = Result(k, title, bool(out.passed), out.measured, out.tolerance)
            except Exception as exc:  # a crash is a failed criterion, reported as such
                res = Result(k, title, False, error=f"{type(exc).__name__}: {exc}")
            res.seconds = time.perf_counter() - t0
            return res
    raise KeyError(key)


def run_all(mutate: Optional[str] = None, echo: Optional[Callable[[str], None]] = None) -> list[Result]:
    if mutate is not None and mutate not in MUTATIONS:
        raise ValueError(f"unknown mutation {mutate!r}; choose from {sorted(MUTATIONS)}")
    results = []
    for key, _, _ in CRITERIA:
        res = run_criterion(key, mutate)
        if echo is not None:
            echo(res.line())
        results.append(res)
    return results
