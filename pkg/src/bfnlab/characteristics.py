"""Characteristic curves for the inviscid equations on the torus.

Curves are stored unwrapped (positions may leave [0, 1)); ``positions``
gives the wrapped view. Gain integrals along a curve treat each stored step
as a straight segment, so occupation times are exact for straight
characteristics.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .core import (
    ConstantAdvection,
    CrossingError,
    Field,
    Gain,
    Grid1D,
    ObsLike,
    ProfileAdvection,
    Trajectory,
    as_observations,
    gradient,
    is_zero,
)

ORDER_TOL = 1e-12
# Below this displacement a segment is treated as a point for occupation.
_STATIC = 1e-9


class Direction(str, enum.Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


@dataclass(eq=False)
class CharField:
    """Bundle of characteristic curves ``psi(s, x)`` with optional carried values.

    ``unwrapped`` has shape ``(n_times, n_feet)``; ``carried`` (same shape)
    holds the solution values transported along each curve.
    """

    feet: np.ndarray
    times: np.ndarray
    unwrapped: np.ndarray
    carried: Optional[np.ndarray] = None

    def __post_init__(self):
        self.feet = np.asarray(self.feet, dtype=float)
        self.times = np.asarray(self.times, dtype=float)
        self.unwrapped = np.asarray(self.unwrapped, dtype=float)
        if self.unwrapped.shape != (self.times.size, self.feet.size):
            raise ValueError("positions must be (n_times, n_feet)")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must increase")

    @property
    def positions(self) -> np.ndarray:
        return np.mod(self.unwrapped, 1.0)

    @property
    def T(self) -> float:
        return float(self.times[-1] - self.times[0])

    def with_carried(self, carried) -> "CharField":
        return CharField(self.feet, self.times, self.unwrapped, np.asarray(carried, dtype=float))


def check_noncrossing(unwrapped: np.ndarray, times: Optional[np.ndarray] = None):
    """Raise :class:`CrossingError` if curve order is lost at any stored time.

    Feet are assumed sorted on one period, so at every time the unwrapped
    positions must increase strictly and span less than one period.
    """
    p = np.atleast_2d(unwrapped)
    gaps = np.diff(p, axis=1)
    wrap = p[:, 0] + 1.0 - p[:, -1]
    bad = (gaps < ORDER_TOL).any(axis=1) | (wrap < ORDER_TOL)
    if bad.any():
        k = int(np.argmax(bad))
        when = f" at t={times[k]:.6g}" if times is not None else ""
        raise CrossingError(f"characteristics intersect{when}: shock inside the interval")


# -- velocity fields ----------------------------------------------------------


def _velocity_fn(velocity) -> Callable:
    if isinstance(velocity, (int, float)):
        velocity = ConstantAdvection(float(velocity))
    if isinstance(velocity, ConstantAdvection):
        c = velocity.c
        return lambda t, x: np.full(np.shape(x), c)
    if isinstance(velocity, ProfileAdvection):
        return lambda t, x: velocity(x)
    if isinstance(velocity, Trajectory):
        return _frozen(velocity)
    if callable(velocity):
        return velocity
    raise TypeError(f"unsupported velocity {type(velocity).__name__}")


def _frozen(traj: Trajectory) -> Callable:
    """Linear interpolation of a stored trajectory in x (periodic) and t."""
    n = traj.grid.n
    xp = np.arange(n + 1) / n
    vals = np.concatenate([traj.values, traj.values[:, :1]], axis=1)

    def fn(t, x):
        xm = np.mod(x, 1.0)
        j = int(np.clip(np.searchsorted(traj.times, t) - 1, 0, len(traj) - 2))
        t0, t1 = traj.times[j], traj.times[j + 1]
        th = min(max((t - t0) / (t1 - t0), 0.0), 1.0)
        return (1 - th) * np.interp(xm, xp, vals[j]) + th * np.interp(xm, xp, vals[j + 1])

    return fn


def trace(velocity, feet, T: float, nt: int, check: bool = True) -> CharField:
    """Integrate ``d psi / ds = velocity(s, psi)`` from ``psi(0) = feet`` by RK4.

    ``velocity`` may be a constant, a :class:`ProfileAdvection` (linear in x),
    a frozen :class:`Trajectory` (linear in x and t) or a callable ``f(t, x)``.
    """
    if nt < 1:
        raise ValueError("nt must be >= 1")
    f = _velocity_fn(velocity)
    feet = np.asarray(feet, dtype=float)
    times = np.linspace(0.0, T, nt + 1)
    dt = T / nt
    out = np.empty((nt + 1, feet.size))
    out[0] = feet
    x = feet.copy()
    for k in range(nt):
        t = times[k]
        k1 = f(t, x)
        k2 = f(t + dt / 2, x + dt / 2 * k1)
        k3 = f(t + dt / 2, x + dt / 2 * k2)
        k4 = f(t + dt, x + dt * k3)
        x = x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        out[k + 1] = x
    if check:
        check_noncrossing(out, times)
    return CharField(feet, times, out)


# -- integrals along curves ---------------------------------------------------


def step_gain_integrals(
    gain: Gain, times, unwrapped, t0: Optional[float] = None, t1: Optional[float] = None,
    use_window: bool = True,
) -> np.ndarray:
    """Per-step integrals of the forward gain along straight segments.

    Returns an array of shape ``(n_steps, n_feet)``; only the part of each
    step inside ``[t0, t1]`` (and the temporal window) is counted.
    """
    times = np.asarray(times, dtype=float)
    p = np.asarray(unwrapped, dtype=float)
    s0, s1 = times[:-1, None], times[1:, None]
    lo = s0 if t0 is None else np.maximum(s0, t0)
    hi = s1 if t1 is None else np.minimum(s1, t1)
    if use_window and gain.window is not None:
        lo = np.maximum(lo, gain.window[0])
        hi = np.minimum(hi, gain.window[1])
    length = np.maximum(hi - lo, 0.0)
    dt = s1 - s0
    pa = p[:-1] + (p[1:] - p[:-1]) * (lo - s0) / dt
    pb = p[:-1] + (p[1:] - p[:-1]) * (hi - s0) / dt
    span = np.abs(pb - pa)
    moving = span > _STATIC
    occ = gain.support_measure(np.minimum(pa, pb), np.maximum(pa, pb))
    frac = np.where(moving, occ / np.where(moving, span, 1.0), gain.in_support(0.5 * (pa + pb)))
    return gain.amplitude * length * frac


def cumulative_gain_integral(gain: Gain, cf: CharField, use_window: bool = True) -> np.ndarray:
    """``int_0^{s_k} K(s, psi(s, x)) ds`` for every stored time (first row zero)."""
    steps = step_gain_integrals(gain, cf.times, cf.unwrapped, use_window=use_window)
    out = np.zeros_like(cf.unwrapped)
    np.cumsum(steps, axis=0, out=out[1:])
    return out


def chi(gain: Gain, cf: CharField) -> np.ndarray:
    """Occupation time of each curve inside the gain's spatial support."""
    unit = Gain(1.0, support=gain.support)
    return cumulative_gain_integral(unit, cf, use_window=False)[-1]


@dataclass(frozen=True)
class Certificate:
    m: float
    observable: bool
    K_threshold: float


def observability_certificate(gain: Gain, cf: CharField, M: float, tol_m: float = 1e-12) -> Certificate:
    """Minimum occupation ``m`` and the gain ``M T / m`` that guarantees decay."""
    m = float(np.min(chi(gain, cf)))
    observable = m > tol_m
    return Certificate(m, observable, M * cf.T / m if observable else math.inf)


def theorem4_oracle(gain: Gain, cf: CharField, t: float, T: Optional[float] = None) -> np.ndarray:
    """Predicted ``w~(t, psi(t,x)) / w(t, psi(t,x))`` per foot.

    ``exp(-(1 + kappa) int_t^T K(s, psi(s, x)) ds)``; reduces to the scalar
    exponentials for constant and windowed gains.
    """
    T = cf.times[-1] if T is None else T
    if not cf.times[0] <= t <= T:
        raise ValueError("t must lie in [0, T]")
    steps = step_gain_integrals(gain, cf.times, cf.unwrapped, t0=t, t1=T)
    return np.exp(-(1.0 + gain.kappa) * steps.sum(axis=0))


# -- resampling ---------------------------------------------------------------


def periodic_spline(x, y) -> CubicSpline:
    """Periodic cubic spline through samples on one period starting at x[0]."""
    x = np.append(np.asarray(x, dtype=float), x[0] + 1.0)
    y = np.append(np.asarray(y, dtype=float), y[0])
    return CubicSpline(x, y, bc_type="periodic", extrapolate="periodic")


def resample(feet, positions, values, grid: Grid1D, newton_iters: int = 8) -> np.ndarray:
    """Values carried on monotone curves, read back at the grid nodes.

    The foot-to-position map is inverted with a monotone (piecewise linear)
    first guess refined by Newton on the spline of the displacement, and the
    carried values are interpolated as a periodic spline in the foot.
    """
    feet = np.asarray(feet, dtype=float)
    p = np.asarray(positions, dtype=float)
    disp = periodic_spline(feet, p - feet)
    vals = periodic_spline(feet, values)
    y = p[0] + np.mod(grid.x - p[0], 1.0)
    p_ext = np.concatenate([p, p[:1] + 1.0])
    f_ext = np.concatenate([feet, feet[:1] + 1.0])
    xi = np.interp(y, p_ext, f_ext)
    for _ in range(newton_iters):
        xi = xi - (xi + disp(xi) - y) / (1.0 + disp(xi, 1))
    return vals(xi)


def resample_trajectory(cf: CharField, values: np.ndarray, grid: Grid1D, rows) -> np.ndarray:
    return np.array([resample(cf.feet, cf.unwrapped[k], values[k], grid) for k in rows])


# -- inviscid linear solver ----------------------------------------------------


def _feet_values(f: Field, feet: np.ndarray) -> np.ndarray:
    if f.values.size == feet.size and np.array_equal(f.grid.x, feet):
        return f.values.copy()
    return periodic_spline(f.grid.x, f.values)(feet)


def solve_inviscid_linear(
    gain: Gain,
    direction: Direction,
    boundary_data,
    uobs: ObsLike,
    cf: CharField,
    grid: Optional[Grid1D] = None,
    record_every: int = 1,
) -> Trajectory:
    """One sweep of ``u_t + a u_x = -/+ K (u - u_obs)`` along given characteristics.

    ``cf`` is the bundle traced with the unnudged velocity. Observations are
    constant along those curves, so the error obeys
    ``dw/ds = -K w`` (forward) or ``dw/ds = +K' w`` (backward) and is updated
    with the exact integrating factor of each segment.

    ``boundary_data`` is the initial field (forward) or the final condition
    (backward): either a :class:`Field`, read at the curve ends, or a
    :class:`CharField` whose last carried row sits on the same curves.
    The backward sweep returns the initial field whose anti-damped forward
    evolution reaches that final condition, together with the path.

    The returned trajectory holds grid snapshots; ``traj.chars`` carries the
    per-curve values.
    """
    direction = Direction(direction)
    if grid is None:
        grid = boundary_data.grid if isinstance(boundary_data, Field) else Grid1D(cf.feet.size)
    if not grid.periodic:
        raise ValueError("inviscid systems are posed on the torus")
    obs0 = as_observations(uobs).value(0.0, cf.feet)
    cum = cumulative_gain_integral(gain, cf)

    if direction is Direction.FORWARD:
        if not isinstance(boundary_data, Field):
            raise TypeError("forward sweep starts from a Field")
        w0 = _feet_values(boundary_data, cf.feet) - obs0
        w = w0[None, :] * np.exp(-cum)
    else:
        if isinstance(boundary_data, CharField):
            if boundary_data.carried is None or boundary_data.feet.size != cf.feet.size:
                raise ValueError("final CharField must carry values on the same curves")
            uT = boundary_data.carried[-1]
        else:
            uT = periodic_spline(boundary_data.grid.x, boundary_data.values)(cf.positions[-1])
        wT = uT - obs0
        w = wT[None, :] * np.exp(-gain.kappa * (cum[-1][None, :] - cum))

    carried = w + obs0[None, :]
    rows = list(range(0, cf.times.size, record_every))
    if rows[-1] != cf.times.size - 1:
        rows.append(cf.times.size - 1)
    values = resample_trajectory(cf, carried, grid, rows)
    obs = None
    if not is_zero(uobs):
        obs = resample_trajectory(cf, np.broadcast_to(obs0, carried.shape), grid, rows)
    return Trajectory(None, grid, cf.times[rows], values, observations=obs,
                      chars=cf.with_carried(carried), meta={"direction": direction.value})


def shock_time(u0: Field) -> float:
    """First crossing time ``-1 / min u0'`` of unnudged Burgers characteristics."""
    if not u0.grid.periodic:
        raise ValueError("shock_time expects a periodic field")
    s = float(np.min(gradient(u0)))
    return -1.0 / s if s < 0 else math.inf
