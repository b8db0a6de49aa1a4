"""Viscous linear transport with nudging.

Constant coefficients with ``c = 0`` are integrated exactly in the sine
basis; spatially supported gains use the exact exponential of the coupled
Galerkin generator; nonzero advection falls back to Crank-Nicolson.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy import fft, linalg

from .core import (
    BC,
    ConstantAdvection,
    EquationSpec,
    Field,
    Gain,
    Grid1D,
    NoOracle,
    ObsLike,
    Trajectory,
    TruncationError,
    as_observations,
    is_zero,
)

DEFAULT_CAP = 40.0
# Coefficients below this fraction of the largest one are pure round-off;
# dividing them by a decay factor only amplifies noise.
NOISE_FLOOR = 1e3 * np.finfo(float).eps


class Sign(str, enum.Enum):
    """Sign of the nudging term: ``-K`` (forward system) or ``+K'`` (backward)."""

    DAMPING = "damping"
    ANTIDAMPING = "antidamping"


# -- modal representation ----------------------------------------------------


@dataclass(frozen=True, eq=False)
class ModalRepr:
    """Orthonormal modal coefficients of a field.

    ``sine`` for Dirichlet grids (mode k is ``sin(k pi x)``, k >= 1),
    ``cosine`` for Neumann grids (``cos(k pi x)``, k >= 0) and ``fourier``
    (real FFT) for periodic grids.
    """

    basis: str
    coeffs: np.ndarray
    grid: Grid1D

    @property
    def n_modes(self) -> int:
        return self.coeffs.size

    @property
    def wavenumbers(self) -> np.ndarray:
        if self.basis == "sine":
            return np.arange(1, self.n_modes + 1)
        if self.basis == "cosine":
            return np.arange(self.n_modes)
        return np.arange(self.n_modes)

    @property
    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues of ``-d^2/dx^2`` for each stored mode."""
        k = self.wavenumbers.astype(float)
        if self.basis == "fourier":
            return (2 * math.pi * k) ** 2
        return (math.pi * k) ** 2

    def with_coeffs(self, coeffs) -> "ModalRepr":
        return ModalRepr(self.basis, np.asarray(coeffs), self.grid)


def to_modal(f: Field) -> ModalRepr:
    bc = f.grid.bc
    if bc is BC.DIRICHLET:
        return ModalRepr("sine", fft.dst(f.values[1:-1], type=1, norm="ortho"), f.grid)
    if bc is BC.NEUMANN:
        return ModalRepr("cosine", fft.dct(f.values, type=1), f.grid)
    return ModalRepr("fourier", np.fft.rfft(f.values), f.grid)


def from_modal(m: ModalRepr, time_tag: float = 0.0) -> Field:
    if m.basis == "sine":
        v = np.zeros(m.grid.n)
        v[1:-1] = fft.idst(m.coeffs, type=1, norm="ortho")
        return Field(m.grid, v, time_tag)
    if m.basis == "cosine":
        return Field(m.grid, fft.idct(m.coeffs, type=1), time_tag)
    return Field(m.grid, np.fft.irfft(m.coeffs, n=m.grid.n), time_tag)


def sine_matrix(m: int) -> np.ndarray:
    """Orthonormal DST-I matrix (symmetric and its own inverse)."""
    return fft.dst(np.eye(m), type=1, norm="ortho", axis=0)


# -- helpers -----------------------------------------------------------------


def _signed_gain(gain: Gain, sign: Sign) -> tuple[float, float]:
    """(sign factor, amplitude) of the nudging term in ``dw/dt = ... + s*g*w``."""
    if Sign(sign) is Sign.DAMPING:
        return -1.0, gain.amplitude
    return 1.0, gain.backward_amplitude


def _record_times(T: float, nt: int, record_every: int) -> tuple[np.ndarray, np.ndarray]:
    steps = np.arange(0, nt + 1, record_every)
    if steps[-1] != nt:
        steps = np.append(steps, nt)
    return steps, steps * (T / nt)


def _obs_snapshots(uobs: ObsLike, grid: Grid1D, times: np.ndarray) -> Optional[np.ndarray]:
    if is_zero(uobs):
        return None
    if isinstance(uobs, Trajectory) and uobs.times.shape == times.shape and np.allclose(
        uobs.times, times, rtol=0, atol=1e-12
    ):
        return uobs.values.copy()
    out = as_observations(uobs).sample(grid, times)
    if grid.bc is BC.DIRICHLET:
        out[:, 0] = out[:, -1] = 0.0
    return out


def _check_linear_spec(spec: EquationSpec, ic: Field):
    if not spec.viscous:
        raise ValueError("nu = 0 is handled by the characteristics module")
    if not isinstance(spec.advection, ConstantAdvection):
        raise ValueError("viscous solver supports constant advection only")
    if ic.grid.bc is not BC.DIRICHLET:
        raise ValueError("viscous linear solver needs a Dirichlet grid")


# -- forward solver ----------------------------------------------------------


def solve_forward_linear(
    spec: EquationSpec,
    gain: Gain,
    sign: Sign,
    ic: Field,
    uobs: ObsLike = None,
    nt: int = 256,
    record_every: int = 1,
    method: str = "auto",
) -> Trajectory:
    """Integrate ``u_t - nu u_xx + c u_x = -/+ K (u - u_obs)`` on [0, T].

    ``Sign.DAMPING`` uses ``-K``; ``Sign.ANTIDAMPING`` uses ``+K' = +kappa K``,
    i.e. the backward system run as a forward equation.

    Parameters
    ----------
    method
        ``"auto"`` picks the exact modal path when ``c == 0`` and Crank-Nicolson
        otherwise; ``"modal"`` and ``"cn"`` force one of them.
    """
    _check_linear_spec(spec, ic)
    c = spec.advection.c
    if method == "auto":
        method = "modal" if c == 0 else "cn"
    if method == "modal" and c != 0:
        raise ValueError("the modal path requires c = 0")
    steps, times = _record_times(spec.T, nt, record_every)
    obs = _obs_snapshots(uobs, ic.grid, times)
    w0 = ic.values - (obs[0] if obs is not None else 0.0)

    if method == "modal":
        werr = _modal_evolve(spec, gain, sign, w0, ic.grid, times)
    elif method == "cn":
        werr = _cn_evolve(spec, gain, sign, w0, ic.grid, nt, steps)
    else:
        raise ValueError(f"unknown method {method!r}")
    values = werr + (obs if obs is not None else 0.0)
    values[:, 0] = values[:, -1] = 0.0
    return Trajectory(spec, ic.grid, times, values, observations=obs, meta={"method": method})


def _modal_evolve(spec, gain, sign, w0, grid, times) -> np.ndarray:
    s, amp = _signed_gain(gain, sign)
    m = grid.n - 2
    lam = (math.pi * np.arange(1, m + 1)) ** 2
    c0 = fft.dst(w0[1:-1], type=1, norm="ortho")
    out = np.zeros((times.size, grid.n))
    if gain.full_support:
        for i, t in enumerate(times):
            expo = -spec.nu * lam * t + s * amp * gain.window_measure(0.0, t)
            out[i, 1:-1] = fft.idst(c0 * np.exp(expo), type=1, norm="ortho")
        # Keep the initial row bit-exact rather than a transform round trip.
        out[0] = w0
        return out
    prop = _CoupledPropagator(spec.nu, gain, s * amp, grid)
    c = c0
    out[0] = w0
    for i in range(1, times.size):
        c = prop.advance(c, times[i - 1], times[i])
        out[i, 1:-1] = fft.idst(c, type=1, norm="ortho")
    return out


class _CoupledPropagator:
    """Exact propagator of ``dc/dt = (-nu Lambda + s S diag(g) S) c`` in sine modes.

    The generator is symmetric, so each window state is diagonalised once.
    """

    def __init__(self, nu: float, gain: Gain, signed_amp: float, grid: Grid1D):
        m = grid.n - 2
        self.gain = gain
        lam = (math.pi * np.arange(1, m + 1)) ** 2
        S = sine_matrix(m)
        g = signed_amp * gain.in_support(grid.x[1:-1]).astype(float)
        gen = -nu * np.diag(lam) + S @ (g[:, None] * S)
        self.on = linalg.eigh(gen)
        self.off_rates = -nu * lam

    def _apply(self, c, dt, active: bool):
        if dt <= 0:
            return c
        if not active:
            return c * np.exp(self.off_rates * dt)
        mu, V = self.on
        return V @ (np.exp(mu * dt) * (V.T @ c))

    def advance(self, c, t0: float, t1: float):
        edges = [t0, *self.gain.window_breaks(t0, t1), t1]
        for a, b in zip(edges[:-1], edges[1:]):
            active = bool(self.gain.in_window(0.5 * (a + b)))
            c = self._apply(c, b - a, active)
        return c


def _cn_evolve(spec, gain, sign, w0, grid, nt, steps) -> np.ndarray:
    s, amp = _signed_gain(gain, sign)
    nu, c, h = spec.nu, spec.advection.c, grid.dx
    xi = grid.x[1:-1]
    m = xi.size
    g = s * amp * gain.in_support(xi).astype(float)
    diff = nu / h**2
    upper = np.full(m, diff - c / (2 * h))
    lower = np.full(m, diff + c / (2 * h))

    def step(w, dt, active: bool):
        main = np.full(m, -2 * diff) + (g if active else 0.0)
        rhs = w + 0.5 * dt * (main * w)
        rhs[:-1] += 0.5 * dt * upper[:-1] * w[1:]
        rhs[1:] += 0.5 * dt * lower[1:] * w[:-1]
        ab = np.zeros((3, m))
        ab[0, 1:] = -0.5 * dt * upper[:-1]
        ab[1] = 1 - 0.5 * dt * main
        ab[2, :-1] = -0.5 * dt * lower[1:]
        return linalg.solve_banded((1, 1), ab, rhs)

    dt = spec.T / nt
    w = w0[1:-1].copy()
    out = np.zeros((steps.size, grid.n))
    out[0, 1:-1] = w
    k = 1
    for n in range(1, nt + 1):
        t0, t1 = (n - 1) * dt, n * dt
        edges = [t0, *gain.window_breaks(t0, t1), t1]
        for a, b in zip(edges[:-1], edges[1:]):
            w = step(w, b - a, bool(gain.in_window(0.5 * (a + b))))
        if k < steps.size and n == steps[k]:
            out[k, 1:-1] = w
            k += 1
    return out


# -- backward recovery -------------------------------------------------------


class ModalRecovery(NamedTuple):
    field: Field
    truncated: int
    floored: int


def backward_solve_modal(
    spec: EquationSpec, gain: Gain, final: Field, amplification_cap: float = DEFAULT_CAP
) -> ModalRecovery:
    """Recover the initial field whose anti-damped evolution reaches ``final``.

    Each sine coefficient is divided by its anti-damping factor
    ``exp(kappa int K dt - nu (k pi)^2 T)``. Modes needing an amplification
    exponent ``nu (k pi)^2 T`` above ``amplification_cap`` are zeroed and
    counted in ``truncated``; coefficients at round-off level are zeroed and
    counted in ``floored``.

    Raises
    ------
    TruncationError
        If more than half of the energy of ``final`` sits in refused modes.
    """
    _check_linear_spec(spec, final)
    if spec.advection.c != 0 or not gain.full_support:
        raise ValueError("modal recovery needs c = 0 and a full-support gain")
    T = spec.T
    m = to_modal(final)
    lam = m.eigenvalues
    required = spec.nu * lam * T
    refused = required > amplification_cap
    total = float(np.sum(m.coeffs**2))
    if total > 0 and float(np.sum(m.coeffs[refused] ** 2)) > 0.5 * total:
        raise TruncationError(
            f"{int(refused.sum())} modes exceed the amplification cap "
            f"{amplification_cap} and hold most of the final energy"
        )
    floor = NOISE_FLOOR * float(np.max(np.abs(m.coeffs), initial=0.0))
    floored = (~refused) & (np.abs(m.coeffs) <= floor)
    keep = ~(refused | floored)
    expo = gain.backward_amplitude * gain.window_measure(0.0, T) - required
    rec = np.where(keep, m.coeffs * np.exp(-np.where(keep, expo, 0.0)), 0.0)
    return ModalRecovery(from_modal(m.with_coeffs(rec), 0.0), int(refused.sum()), int(floored.sum()))


# -- closed forms ------------------------------------------------------------


def theorem1_oracle(gain: Gain, T: float, t: float) -> float:
    """Predicted ratio ``w~(t) / w(t)`` for gains without spatial structure.

    ``exp(-(K + K') (T - t))`` for a constant gain; with a temporal window
    the exponent only counts the part of ``[t, T]`` inside the window, which
    gives ``exp(-(K + K') (t2 - t1))`` at ``t = 0``.
    """
    if not gain.full_support:
        raise NoOracle("spatially supported gains have no solution in general")
    if not 0.0 <= t <= T:
        raise ValueError("t must lie in [0, T]")
    return math.exp(-(1.0 + gain.kappa) * gain.time_integral(t, T))


def bfn_initial_error(gain: Gain, w0: Field, T: float) -> Field:
    """Closed-form initial error ``w~(0) = exp(-(K+K') |window|) w0`` of one sweep."""
    return w0 * theorem1_oracle(gain, T, 0.0)
