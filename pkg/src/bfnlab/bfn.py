"""Back-and-forth nudging driver, decrease-rate profiles and diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import burgers as bg
from .characteristics import (
    Direction,
    chi,
    cumulative_gain_integral,
    observability_certificate,
    shock_time,
    solve_inviscid_linear,
    trace,
)
from .core import (
    BC,
    ConstantAdvection,
    EquationSpec,
    Field,
    Gain,
    Grid1D,
    NamedProfile,
    NoOracle,
    ProfileAdvection,
    ProfileLike,
    SelfAdvection,
    Trajectory,
    UnsupportedRegime,
    field_from,
    l2_norm,
)
from .linear_pde import (
    DEFAULT_CAP,
    NOISE_FLOOR,
    Sign,
    _CoupledPropagator,
    backward_solve_modal,
    bfn_initial_error,
    sine_matrix,
    solve_forward_linear,
    theorem1_oracle,
)

EXCLUDE_REL = 1e-10


@dataclass
class BfnConfig:
    """One BFN experiment: equation, gain, initial guess and observation seed.

    ``u0`` and ``uobs0`` are named profiles, raw samples, or fields. The
    observation trajectory is always the unnudged forward solution from
    ``uobs0``.
    """

    spec: EquationSpec
    gain: Gain
    u0: ProfileLike
    uobs0: ProfileLike
    iterations: int = 1
    nt: int = 2048
    record_every: int = 1
    grid_n: int = 512
    cap: float = DEFAULT_CAP

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.nt < 1 or self.record_every < 1:
            raise ValueError("nt and record_every must be positive")

    @property
    def grid(self) -> Grid1D:
        return Grid1D(self.grid_n, self.spec.bc)

    @property
    def regime(self) -> str:
        visc = "viscous" if self.spec.viscous else "inviscid"
        kind = "burgers" if self.spec.burgers else "linear"
        return f"{visc}_{kind}"


@dataclass
class IterationRecord:
    w0_norm: float
    wT_norm: float
    wtilde0_norm: float

    @property
    def contraction(self) -> float:
        return self.wtilde0_norm / self.w0_norm if self.w0_norm > 0 else math.nan


@dataclass(eq=False)
class BfnReport:
    """Norms per iteration, the first-iteration rate profile, oracle
    deviations and flags. Trajectories are kept for inspection only."""

    regime: str
    grid: Grid1D
    T: float
    iterations: list = field(default_factory=list)
    w0: Optional[np.ndarray] = None
    wtilde0: Optional[np.ndarray] = None
    rate: Optional[np.ndarray] = None
    oracle: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    forward: list = field(default_factory=list)
    backward: list = field(default_factory=list)

    @property
    def contractions(self) -> np.ndarray:
        return np.array([r.contraction for r in self.iterations])

    @property
    def excluded(self) -> int:
        return 0 if self.rate is None else int(np.isnan(self.rate).sum())

    def to_dict(self) -> dict:
        return {
            "regime": self.regime,
            "grid_n": self.grid.n,
            "bc": self.grid.bc.value,
            "T": self.T,
            "iterations": [
                {"w0": r.w0_norm, "wT": r.wT_norm, "wtilde0": r.wtilde0_norm,
                 "contraction": r.contraction}
                for r in self.iterations
            ],
            "oracle_deviation": dict(self.oracle),
            "flags": dict(self.flags, excluded_nodes=self.excluded),
        }


def decrease_rate_profile(w0: Field, wt0: Field, rel: float = EXCLUDE_REL) -> np.ndarray:
    """``-log(w~(0, x) / w(0, x))`` per node; NaN where undefined.

    Nodes with ``|w0| < rel * max|w0|`` or a nonpositive ratio are excluded.
    """
    if w0.grid != wt0.grid:
        raise ValueError("fields must share a grid")
    a, b = w0.values, wt0.values
    scale = float(np.max(np.abs(a), initial=0.0))
    ok = np.abs(a) >= rel * scale if scale > 0 else np.zeros(a.shape, dtype=bool)
    ratio = np.divide(b, a, out=np.full(a.shape, np.nan), where=ok)
    ok &= ratio > 0
    return np.where(ok, -np.log(np.where(ok, ratio, 1.0)), np.nan)


def oracle_deviation(report: BfnReport, case: str) -> float:
    """Stored deviation of ``report`` from the closed form named ``case``."""
    try:
        return float(report.oracle[case])
    except KeyError:
        raise NoOracle(f"no {case!r} oracle for regime {report.regime}") from None


# -- dispatch -------------------------------------------------------------------


def run_bfn(cfg: BfnConfig) -> BfnReport:
    """Iterate forward and backward sweeps; ``w~(0)`` of sweep j seeds sweep j+1."""
    runner = {
        "viscous_linear": _run_viscous_linear,
        "inviscid_linear": _run_inviscid_linear,
        "inviscid_burgers": _run_inviscid_burgers,
        "viscous_burgers": _run_viscous_burgers,
    }[cfg.regime]
    return runner(cfg)


def _finish(report: BfnReport, w0: Field, wt0: Field):
    report.w0, report.wtilde0 = w0.values, wt0.values
    report.rate = decrease_rate_profile(w0, wt0)


def _relative(num: float, den: float, scale: float = 0.0) -> float:
    """``num / den``, or ``num`` itself when ``den`` is round-off next to ``scale``."""
    return num / den if den > NOISE_FLOOR * scale and den > 0 else num


def _run_viscous_linear(cfg: BfnConfig) -> BfnReport:
    spec, gain, grid = cfg.spec, cfg.gain, cfg.grid
    if not gain.full_support and gain.amplitude > 0:
        raise UnsupportedRegime(
            "Theorem 1 (case 2): with a spatially supported gain the viscous backward "
            "problem has no solution in general; use illposedness_diagnostic"
        )
    if not isinstance(spec.advection, ConstantAdvection):
        raise UnsupportedRegime("viscous transport is supported with constant advection only")
    common = dict(nt=cfg.nt, record_every=cfg.record_every)
    uobs = solve_forward_linear(spec, Gain(0.0), Sign.DAMPING, field_from(cfg.uobs0, grid), None, **common)
    report = BfnReport(cfg.regime, grid, spec.T)
    u = field_from(cfg.u0, grid)
    theo, final, truncated = 0.0, 0.0, 0
    for it in range(cfg.iterations):
        fwd = solve_forward_linear(spec, gain, Sign.DAMPING, u, uobs, **common)
        w0, wT = fwd.error_field(0), fwd.error_field(-1)
        if spec.advection.c == 0:
            rec = backward_solve_modal(spec, gain, wT, cfg.cap)
            wt0, truncated = rec.field, truncated + rec.truncated
            report.flags["backward"] = "modal division"
        else:
            wt0 = bfn_initial_error(gain, w0, spec.T)
            report.flags["backward"] = "closed form"
        bwd = solve_forward_linear(spec, gain, Sign.ANTIDAMPING, uobs[0] + wt0, uobs, **common)
        n0, scale = l2_norm(w0), l2_norm(u)
        for i, t in enumerate(fwd.times):
            gap = bwd.error[i] - theorem1_oracle(gain, spec.T, t) * fwd.error[i]
            theo = max(theo, _relative(l2_norm(Field(grid, gap)), n0, scale))
        final = max(final, _relative(l2_norm(bwd.error_field(-1) - wT), l2_norm(wT), scale))
        report.iterations.append(IterationRecord(n0, l2_norm(wT), l2_norm(bwd.error_field(0))))
        report.forward.append(fwd)
        report.backward.append(bwd)
        if it == 0:
            _finish(report, w0, bwd.error_field(0))
        u = bwd[0]
    report.oracle["theorem1"] = theo
    report.oracle["final_match"] = final
    report.flags["truncated_modes"] = truncated
    return report


def _velocity(spec: EquationSpec):
    adv = spec.advection
    if isinstance(adv, (ConstantAdvection, ProfileAdvection)):
        return adv
    raise ValueError("linear transport needs a prescribed velocity")


def _run_inviscid_linear(cfg: BfnConfig) -> BfnReport:
    spec, gain, grid = cfg.spec, cfg.gain, cfg.grid
    cf = trace(_velocity(spec), grid.x, spec.T, cfg.nt)
    uobs = solve_inviscid_linear(Gain(0.0), Direction.FORWARD, field_from(cfg.uobs0, grid), None, cf,
                                 record_every=cfg.record_every)
    cert = observability_certificate(gain, cf, M=0.0)
    report = BfnReport(cfg.regime, grid, spec.T)
    report.flags["observability"] = {"m": cert.m, "observable": cert.observable,
                                     "K_threshold": cert.K_threshold}
    cum = cumulative_gain_integral(gain, cf)
    predicted = np.exp(-(1.0 + gain.kappa) * (cum[-1][None, :] - cum))
    obs0 = uobs.value(0.0, cf.feet)
    u = field_from(cfg.u0, grid)
    dev = 0.0
    for it in range(cfg.iterations):
        fwd = solve_inviscid_linear(gain, Direction.FORWARD, u, uobs, cf, record_every=cfg.record_every)
        bwd = solve_inviscid_linear(gain, Direction.BACKWARD, fwd.chars, uobs, cf,
                                    record_every=cfg.record_every)
        w = fwd.chars.carried - obs0
        wt = bwd.chars.carried - obs0
        scale = float(np.max(np.abs(w[0])))
        dev = max(dev, _relative(float(np.max(np.abs(wt - predicted * w))), scale,
                                 float(np.max(np.abs(fwd.chars.carried[0])))))
        w0, wt0 = fwd.error_field(0), bwd.error_field(0)
        report.iterations.append(IterationRecord(l2_norm(w0), l2_norm(fwd.error_field(-1)), l2_norm(wt0)))
        report.forward.append(fwd)
        report.backward.append(bwd)
        if it == 0:
            _finish(report, w0, wt0)
            exponent = (1.0 + gain.kappa) * cum[-1]
            ok = ~np.isnan(report.rate)
            report.oracle["rate_profile"] = float(np.max(np.abs(report.rate[ok] - exponent[ok]), initial=0.0))
        u = bwd[0]
    report.oracle["theorem4"] = dev
    return report


def _burgers_observations(desc: ProfileLike, grid: Grid1D):
    if isinstance(desc, NamedProfile) and desc.name == "zero" and desc.offset == 0:
        return None
    f = field_from(desc, grid)
    if not np.any(f.values):
        return None
    return bg.BurgersObservations(desc if isinstance(desc, NamedProfile) else f)


def _run_inviscid_burgers(cfg: BfnConfig) -> BfnReport:
    spec, gain, grid = cfg.spec, cfg.gain, cfg.grid
    u = field_from(cfg.u0, grid)
    uobs = _burgers_observations(cfg.uobs0, grid)
    limit = min(shock_time(u), math.inf if uobs is None else uobs.shock_time)
    if spec.T >= limit:
        raise UnsupportedRegime(
            f"Theorem 6 assumes no shock on [0, T]; T={spec.T} reaches the crossing time {limit:.6g}"
        )
    report = BfnReport(cfg.regime, grid, spec.T)
    bound_gap, prop7, cert = 0.0, 0.0, None
    for it in range(cfg.iterations):
        fwd, fcf = bg.solve_inviscid_burgers(Direction.FORWARD, gain, u, uobs, spec.T, cfg.nt,
                                             record_every=cfg.record_every)
        bwd, _ = bg.solve_inviscid_burgers(Direction.BACKWARD, gain, fcf, uobs, spec.T, cfg.nt,
                                           grid=grid, record_every=cfg.record_every)
        w0, wt0 = fwd.error_field(0), bwd.error_field(0)
        M = bg.observation_slope_bound(uobs, grid, fwd.times)
        if it == 0:
            c = observability_certificate(gain, fcf, M)
            cert = {"m": c.m, "observable": c.observable, "K_threshold": c.K_threshold, "M": M}
        prop7 = max(prop7, float(np.max(bg.proposition7_check(gain, fwd, uobs))))
        if gain.full_support:
            chk = bg.theorem6_bound_check(gain, fwd, bwd, M)
            gap = float(np.max(chk.lhs - chk.rhs))
            bound_gap = max(bound_gap, _relative(max(gap, 0.0), l2_norm(w0), l2_norm(u)))
            report.flags.setdefault("theorem6_satisfied", True)
            report.flags["theorem6_satisfied"] &= chk.all_satisfied
        report.iterations.append(IterationRecord(l2_norm(w0), l2_norm(fwd.error_field(-1)), l2_norm(wt0)))
        report.forward.append(fwd)
        report.backward.append(bwd)
        if it == 0:
            _finish(report, w0, wt0)
        u = bwd[0]
    report.flags["observability"] = cert
    report.oracle["proposition7"] = prop7
    if gain.full_support:
        report.oracle["theorem6"] = bound_gap
    return report


def _run_viscous_burgers(cfg: BfnConfig) -> BfnReport:
    spec, gain, grid = cfg.spec, cfg.gain, cfg.grid
    if gain.amplitude > 0:
        raise UnsupportedRegime(
            "Theorem 2: nudged viscous Burgers has no backward solution in general "
            "(Fourier coefficients grow super-polynomially); see bn_sequence / bn-growth"
        )
    nu, T = spec.nu, spec.T
    n_modes = int(min(grid.n, math.floor(math.sqrt(cfg.cap / (nu * T)) / math.pi)))
    times = np.linspace(0.0, T, cfg.nt // cfg.record_every + 1)
    uobs = bg.cole_hopf_evolution(field_from(cfg.uobs0, grid), nu, times, n_modes)
    report = BfnReport(cfg.regime, grid, T)
    u = field_from(cfg.u0, grid)
    dev = 0.0
    for it in range(cfg.iterations):
        heat = bg.HeatModes(bg.to_heat(u, nu), nu, n_modes)
        back0 = heat.backward_from(heat.coeffs * np.exp(-heat.lam * T), T)
        fwd = Trajectory(spec, grid, times, np.array([bg.from_heat(heat.at(t), nu).values for t in times]),
                         observations=uobs.values)
        bwd = Trajectory(spec, grid, times,
                         np.array([bg.from_heat(heat.at(t, back0), nu).values for t in times]),
                         observations=uobs.values)
        dev = max(dev, float(np.max(np.abs(bwd.values - fwd.values))))
        w0, wt0 = Field(grid, u.values - uobs.values[0]), bwd.error_field(0)
        report.iterations.append(IterationRecord(l2_norm(w0), l2_norm(fwd.error_field(-1)), l2_norm(wt0)))
        report.forward.append(fwd)
        report.backward.append(bwd)
        if it == 0:
            _finish(report, w0, wt0)
        u = bwd[0]
    report.flags["heat_modes"] = n_modes
    report.oracle["proposition3"] = dev
    return report


# -- diagnostics -----------------------------------------------------------------


@dataclass(frozen=True)
class Illposedness:
    residual: float
    reference_residual: float
    ratio: float
    refused_modes: int


def _preimage_residual(spec, gain, w0: Field, nt: int, cap: float) -> tuple[float, int]:
    """Relative mismatch of the best capped preimage of ``w(T)`` under anti-damping."""
    grid = w0.grid
    fwd = solve_forward_linear(spec, gain, Sign.DAMPING, w0, None, nt=nt, record_every=nt)
    wT = fwd.final
    if gain.full_support:
        rec = backward_solve_modal(spec, gain, wT, cap)
        back = solve_forward_linear(spec, gain, Sign.ANTIDAMPING, rec.field, None, nt=nt, record_every=nt)
        return _relative(l2_norm(back.final - wT), l2_norm(wT)), rec.truncated + rec.floored
    S = sine_matrix(grid.n - 2)
    prop = _CoupledPropagator(spec.nu, gain, gain.backward_amplitude, grid)
    mu, V = prop.on
    y = V.T @ (S @ wT.values[1:-1])
    floor = NOISE_FLOOR * float(np.max(np.abs(y)))
    keep = (-mu * spec.T <= cap) & (np.abs(y) > floor)
    z = np.where(keep, y * np.exp(-np.where(keep, mu, 0.0) * spec.T), 0.0)
    # Evolve in eigen-coordinates: leaving them would mix round-off of the
    # amplified coefficients into the decaying ones.
    back = np.zeros(grid.n)
    back[1:-1] = S @ (V @ (np.exp(mu * spec.T) * z))
    return _relative(l2_norm(Field(grid, back) - wT), l2_norm(wT)), int((~keep).sum())


def illposedness_diagnostic(
    spec: EquationSpec, gain: Gain, w0: Field, nt: int = 64, cap: float = DEFAULT_CAP
) -> Illposedness:
    """Compare the preimage residual of a supported gain with the full-support one.

    The anti-damping evolution with ``K' 1_[a,b]`` is diagonalised once; the
    final error of the damped forward run is divided mode by mode (capped,
    round-off coefficients dropped), evolved forward again and compared with
    the target. The reference repeats this with the full-support gain of the
    same amplitude, for which an exact preimage exists.
    """
    if not spec.viscous or spec.advection != ConstantAdvection(0.0):
        raise ValueError("the diagnostic needs viscous transport with c = 0")
    if gain.window is not None:
        raise ValueError("the diagnostic takes a gain without temporal window")
    res, refused = _preimage_residual(spec, gain, w0, nt, cap)
    full = Gain(gain.amplitude, gain.kappa)
    ref, _ = _preimage_residual(spec, full, w0, nt, cap)
    ratio = res / ref if ref > 0 else math.inf
    return Illposedness(res, ref, ratio, refused)


# -- figure1 ------------------------------------------------------------------------


FIGURE1_T = (0.05, 0.1, 0.25, 0.5, 0.75, 1.0)


def figure1_alpha(variant: str, T_max: float, alpha: Optional[float] = None) -> float:
    """Amplitude of ``alpha sin(2 pi x)``; shrunk for Burgers so ``T_max`` stays pre-shock."""
    if variant == "linear":
        return 1.0 if alpha is None else alpha
    alpha = 0.2 if alpha is None else alpha
    limit = 1.0 / (2 * math.pi * alpha)
    if T_max >= limit:
        alpha = 0.9 / (2 * math.pi * T_max)
    return alpha


def figure1_config(variant: str, T: float, alpha: float, grid_n: int = 512, nt: int = 1024) -> BfnConfig:
    if variant == "linear":
        adv = ConstantAdvection(1.0)
    elif variant == "burgers":
        adv = SelfAdvection()
    else:
        raise ValueError(f"unknown figure1 variant {variant!r}")
    spec = EquationSpec(0.0, adv, BC.PERIODIC, T)
    return BfnConfig(spec, Gain(1.0, 1.0, support=(0.0, 0.5)), NamedProfile("sin2pi", alpha),
                     NamedProfile("zero"), 1, nt, nt, grid_n)


def figure1_rates(variant: str, Ts=FIGURE1_T, alpha: Optional[float] = None,
                  grid_n: int = 512, nt: int = 1024) -> tuple[np.ndarray, dict, float]:
    """Rate profiles ``{T: rate}`` on the periodic grid for one setup."""
    alpha = figure1_alpha(variant, max(Ts), alpha)
    rates = {}
    for T in Ts:
        rep = run_bfn(figure1_config(variant, T, alpha, grid_n, nt))
        rates[T] = rep.rate
    return Grid1D(grid_n).x, rates, alpha


def chi_profile(T: float, grid_n: int = 512, support=(0.0, 0.5), nt: int = 64) -> np.ndarray:
    """Occupation time of unit-speed characteristics, for reference curves."""
    g = Grid1D(grid_n)
    return chi(Gain(1.0, support=support), trace(1.0, g.x, T, nt))
