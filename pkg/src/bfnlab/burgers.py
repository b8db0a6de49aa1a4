"""Burgers solvers: inviscid nudging along characteristics, viscous forward
stepping, the Cole-Hopf route for ``K = 0`` and the Fourier coefficient
sequence that witnesses ill-posedness of the viscous backward problem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import sparse
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq
from scipy.sparse.linalg import splu

from .characteristics import (
    CharField,
    Direction,
    check_noncrossing,
    resample,
    shock_time,
    step_gain_integrals,
)
from .core import (
    BC,
    CrossingError,
    Field,
    Gain,
    Grid1D,
    NamedProfile,
    NoOracle,
    Observations,
    ObsLike,
    PositivityError,
    StabilityError,
    Trajectory,
    TruncationError,
    as_observations,
    is_zero,
    l2_norm,
    linf_grad,
)
from .linear_pde import DEFAULT_CAP, from_modal, to_modal

CFL_MAX = 0.5


# -- exact unnudged solution ---------------------------------------------------


class BurgersObservations(Observations):
    """Smooth solution of ``u_t + u u_x = 0`` on the torus from ``u(0) = g``.

    ``u(t, x) = g(xi)`` with ``xi + g(xi) t = x``; valid before the first
    crossing time. ``g`` is a :class:`NamedProfile` or a periodic
    :class:`Field` (read through a periodic cubic spline).
    """

    def __init__(self, initial: Union[NamedProfile, Field]):
        if isinstance(initial, Field):
            if not initial.grid.periodic:
                raise ValueError("Burgers observations live on the torus")
            x = np.append(initial.grid.x, 1.0)
            y = np.append(initial.values, initial.values[0])
            spl = CubicSpline(x, y, bc_type="periodic", extrapolate="periodic")
            self._g, self._dg = spl, spl.derivative()
            fine = np.linspace(0.0, 1.0, 8 * initial.grid.n + 1)
            self._bound = float(np.max(np.abs(spl(fine))))
            self.shock_time = shock_time(initial)
        else:
            self._g, self._dg = initial, initial.derivative
            self._bound = abs(initial.amplitude) + abs(initial.offset)
            slope = initial.max_slope()
            self.shock_time = math.inf if slope == 0 else 1.0 / slope
        self.initial = initial

    def foot(self, t: float, x) -> np.ndarray:
        """Solve ``xi + g(xi) t = x`` by safeguarded Newton."""
        x = np.asarray(x, dtype=float)
        if t == 0.0:
            return x.copy()
        if t >= self.shock_time:
            raise CrossingError(f"t={t:.6g} is past the shock time {self.shock_time:.6g}")
        tol = 4 * np.finfo(float).eps * (1.0 + np.abs(x))
        xi = x - self._g(x) * t
        for _ in range(8):
            f = xi + self._g(xi) * t - x
            if np.all(np.abs(f) <= tol):
                return xi
            xi = xi - f / (1.0 + self._dg(xi) * t)
        # Plain Newton stalled (close to the crossing time): bracket it.
        lo = x - self._bound * t - 1e-14
        hi = x + self._bound * t + 1e-14
        xi = x - self._g(x) * t
        for _ in range(100):
            f = xi + self._g(xi) * t - x
            if np.all(np.abs(f) <= tol):
                break
            lo = np.where(f < 0, xi, lo)
            hi = np.where(f > 0, xi, hi)
            new = xi - f / (1.0 + self._dg(xi) * t)
            xi = np.where((new <= lo) | (new >= hi), 0.5 * (lo + hi), new)
        return xi

    def value(self, t, x):
        return self._g(self.foot(t, x))

    def grad(self, t, x):
        d = self._dg(self.foot(t, x))
        return d / (1.0 + d * t)


# -- inviscid nudged Burgers along characteristics ----------------------------


def _between(gain: Gain, x0: float, x1: float) -> list[float]:
    """Support edges (unwrapped) strictly between two positions."""
    a, b = gain.support
    lo, hi = min(x0, x1), max(x0, x1)
    out = []
    for edge in (a, b):
        k = math.floor(lo - edge) + 1
        while edge + k < hi:
            e = edge + k
            if hi - e > 1e-13 and e - lo > 1e-13:
                out.append(e)
            k += 1
    return sorted(out, key=lambda e: abs(e - x0))


class _Integrator:
    """RK4 for ``X' = U, U' = -s k (U - u_obs(t, X))`` with ``k`` frozen per step."""

    def __init__(self, gain: Gain, direction: Direction, uobs: ObsLike):
        self.gain = gain
        self.s = 1.0 if direction is Direction.FORWARD else -1.0
        self.amp = gain.amplitude if direction is Direction.FORWARD else gain.backward_amplitude
        self.obs = as_observations(uobs)
        self.zero = is_zero(uobs)

    def step(self, t, X, U, h, k):
        rate = self.s * k
        if self.zero:
            decay = np.exp(-rate * h)
            safe = np.where(rate == 0, 1.0, rate)
            moved = np.where(rate == 0, h, -np.expm1(-rate * h) / safe)
            return X + U * moved, U * decay
        g = self.obs.value

        def f(tt, x, u):
            return u, -rate * (u - g(tt, x))

        a1, b1 = f(t, X, U)
        a2, b2 = f(t + h / 2, X + h / 2 * a1, U + h / 2 * b1)
        a3, b3 = f(t + h / 2, X + h / 2 * a2, U + h / 2 * b2)
        a4, b4 = f(t + h, X + h * a3, U + h * b3)
        return (X + h / 6 * (a1 + 2 * a2 + 2 * a3 + a4),
                U + h / 6 * (b1 + 2 * b2 + 2 * b3 + b4))

    def _k(self, x, kw):
        return kw * self.gain.in_support(x)

    def advance(self, t, X, U, h, kw):
        """One window-homogeneous step for all feet, split at support edges."""
        if kw == 0.0 or self.gain.support is None:
            return self.step(t, X, U, h, np.full(X.shape, kw))
        k = self._k(X + 0.5 * h * U, kw)
        X1, U1 = self.step(t, X, U, h, k)
        mid = _hermite(X, U, X1, U1, h, 0.5)
        a, b = self.gain.support
        crossed = (np.floor(X - a) != np.floor(X1 - a)) | (np.floor(X - b) != np.floor(X1 - b))
        crossed |= self._k(mid, kw) != k
        for j in np.flatnonzero(crossed):
            X1[j], U1[j] = self._foot(t, X[j], U[j], h, kw)
        return X1, U1

    def _foot(self, t, x, u, h, kw, depth=0):
        x0, u0 = np.array([x]), np.array([u])
        k = self._k(x0 + 0.5 * h * u0, kw)
        x1, u1 = self.step(t, x0, u0, h, k)
        edges = _between(self.gain, x, x1[0])
        if depth > 6 or abs(h) < 1e-15:
            return x1[0], u1[0]
        if not edges:
            km = self._k(_hermite(x0, u0, x1, u1, h, 0.5), kw)
            if km[0] == k[0]:
                return x1[0], u1[0]
            xs, us = self.step(t, x0, u0, h, km)
            return xs[0], us[0]
        e = edges[0]
        tau = brentq(lambda th: _hermite(x0, u0, x1, u1, h, th)[0] - e, 0.0, 1.0, xtol=1e-15)
        hm = tau * h
        km = self._k(_hermite(x0, u0, x1, u1, h, 0.5 * tau), kw)
        xs, us = self.step(t, x0, u0, hm, km)
        return self._foot(t + hm, xs[0], us[0], h - hm, kw, depth + 1)


def _hermite(x0, u0, x1, u1, h, th):
    h00 = 2 * th**3 - 3 * th**2 + 1
    h10 = th**3 - 2 * th**2 + th
    h01 = -2 * th**3 + 3 * th**2
    h11 = th**3 - th**2
    return h00 * x0 + h10 * h * u0 + h01 * x1 + h11 * h * u1


def _grid_rows(labels, unwrapped, carried, grid: Grid1D) -> np.ndarray:
    return np.array([resample(labels, p, v, grid) for p, v in zip(unwrapped, carried)])


def solve_inviscid_burgers(
    direction: Direction,
    gain: Gain,
    boundary_data,
    uobs: ObsLike,
    T: float,
    nt: int,
    grid: Optional[Grid1D] = None,
    record_every: int = 1,
) -> tuple[Trajectory, CharField]:
    """Nudged inviscid Burgers along its own characteristics.

    Each foot obeys ``dX/dt = u`` and ``du/dt = -K(X)(u - u_obs(t, X))``
    (forward) or ``+K'(X)(...)`` (backward). The gain indicator is frozen per
    step and steps are split where a curve meets a support edge or a window
    edge, so the piecewise-smooth right-hand side is integrated at full order.

    Forward: ``boundary_data`` is the initial :class:`Field` and the feet are
    the grid nodes. Backward: ``boundary_data`` is either the forward
    :class:`CharField` (with carried values) or a final :class:`Field`; the
    system is integrated from ``T`` down to 0 along the backward curves.
    Returned arrays are ordered by increasing time in both cases; the grid
    trajectory keeps every ``record_every``-th step (counted from ``t = 0``)
    while the bundle keeps all of them.
    """
    direction = Direction(direction)
    if nt < 1:
        raise ValueError("nt must be >= 1")
    integ = _Integrator(gain, direction, uobs)
    obs = as_observations(uobs)
    if isinstance(uobs, BurgersObservations) and T >= uobs.shock_time:
        raise CrossingError(f"T={T} is past the observation shock time {uobs.shock_time:.6g}")

    if direction is Direction.FORWARD:
        if not isinstance(boundary_data, Field):
            raise TypeError("forward sweep starts from a Field")
        grid = boundary_data.grid if grid is None else grid
        if T >= shock_time(boundary_data):
            raise CrossingError(f"T={T} is past the shock time of the initial data")
        labels = grid.x
        X, U = labels.copy(), boundary_data.values.copy()
        times = np.linspace(0.0, T, nt + 1)
    else:
        if isinstance(boundary_data, CharField):
            if boundary_data.carried is None:
                raise ValueError("final CharField must carry values")
            labels = boundary_data.feet
            X, U = boundary_data.unwrapped[-1].copy(), boundary_data.carried[-1].copy()
            if grid is None:
                grid = Grid1D(labels.size)
        else:
            grid = boundary_data.grid if grid is None else grid
            labels = grid.x
            X, U = labels.copy(), boundary_data.values.copy()
        times = np.linspace(T, 0.0, nt + 1)
    if not grid.periodic:
        raise ValueError("inviscid systems are posed on the torus")

    pos = np.empty((nt + 1, X.size))
    val = np.empty_like(pos)
    pos[0], val[0] = X, U
    for k in range(nt):
        t0, t1 = times[k], times[k + 1]
        edges = [t0] + sorted(gain.window_breaks(min(t0, t1), max(t0, t1)), reverse=bool(t1 < t0)) + [t1]
        for ta, tb in zip(edges[:-1], edges[1:]):
            kw = integ.amp * float(gain.in_window(0.5 * (ta + tb)))
            X, U = integ.advance(ta, X, U, tb - ta, kw)
        pos[k + 1], val[k + 1] = X, U
    check_noncrossing(pos, times)

    if direction is Direction.BACKWARD:
        times, pos, val = times[::-1], pos[::-1], val[::-1]
    rows = np.unique(np.r_[np.arange(0, nt + 1, record_every), nt])
    observations = None
    if is_zero(uobs):
        values = _grid_rows(labels, pos[rows], val[rows], grid)
    else:
        # Resample the error so that u = u_obs on the curves stays exact on the grid.
        observations = np.array([obs.value(t, grid.x) for t in times[rows]])
        err = val[rows] - np.array([obs.value(t, p) for t, p in zip(times[rows], pos[rows])])
        values = observations + _grid_rows(labels, pos[rows], err, grid)
    cf = CharField(pos[0], times, pos, val)
    traj = Trajectory(None, grid, times[rows], values, observations=observations, chars=cf,
                      meta={"direction": direction.value, "labels": labels})
    return traj, cf


def proposition7_check(gain: Gain, run: Trajectory, uobs: ObsLike) -> np.ndarray:
    """Per-foot ``|w(T, psi) - w(0, x) exp(-int K - int d_x u_obs)|`` along the run.

    ``int K`` is integrated exactly along the stored straight segments and
    ``int d_x u_obs`` by the trapezoid rule in time.
    """
    cf = run.chars
    obs = as_observations(uobs)
    w0 = cf.carried[0] - obs.value(cf.times[0], cf.unwrapped[0])
    wT = cf.carried[-1] - obs.value(cf.times[-1], cf.unwrapped[-1])
    int_k = step_gain_integrals(gain, cf.times, cf.unwrapped).sum(axis=0)
    if is_zero(uobs):
        int_g = 0.0
    else:
        g = np.array([obs.grad(t, p) for t, p in zip(cf.times, cf.unwrapped)])
        int_g = np.trapezoid(g, cf.times, axis=0)
    return np.abs(wT - w0 * np.exp(-int_k - int_g))


@dataclass
class BoundCheck:
    times: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray

    @property
    def satisfied(self) -> np.ndarray:
        return self.lhs <= self.rhs

    @property
    def all_satisfied(self) -> bool:
        return bool(np.all(self.satisfied))


def energy_bound_factor(gain: Gain, t: float, T: float, M: float) -> float:
    """``exp(-(K + K') |[t, T] cap window| + M (T - t))``."""
    if not gain.full_support:
        raise NoOracle("the energy bound covers constant and windowed gains only")
    return math.exp(-(1.0 + gain.kappa) * gain.time_integral(t, T) + M * (T - t))


def theorem6_bound_check(gain: Gain, forward_run: Trajectory, backward_run: Trajectory, M: float) -> BoundCheck:
    """``||w~(t)|| <= exp(-(K + K')(T - t) + M (T - t)) ||w(t)||`` at the shared times."""
    T = float(forward_run.times[-1])
    times, lhs, rhs = [], [], []
    for i, t in enumerate(forward_run.times):
        j = backward_run.index_of(t, atol=1e-9)
        times.append(t)
        lhs.append(l2_norm(backward_run.error_field(j)))
        rhs.append(energy_bound_factor(gain, t, T, M) * l2_norm(forward_run.error_field(i)))
    return BoundCheck(np.array(times), np.array(lhs), np.array(rhs))


def observation_slope_bound(uobs: ObsLike, grid: Grid1D, times) -> float:
    """``M``: the largest grid slope of the observation trajectory over ``times``."""
    if is_zero(uobs):
        return 0.0
    obs = as_observations(uobs)
    return max(linf_grad(Field(grid, obs.value(t, grid.x), t)) for t in times)


# -- viscous forward solver ----------------------------------------------------


def _obs_rows(uobs: ObsLike, grid: Grid1D, times: np.ndarray) -> np.ndarray:
    if is_zero(uobs):
        return np.zeros((times.size, grid.n))
    if isinstance(uobs, Trajectory) and uobs.times.size == times.size and np.allclose(uobs.times, times):
        return uobs.values
    return np.array([uobs.value(t, grid.x) for t in times])


def solve_viscous_burgers_forward(
    gain: Gain, ic: Field, uobs: ObsLike, nu: float, T: float, nt: int, record_every: int = 1
) -> Trajectory:
    """``u_t - nu u_xx + (u^2/2)_x = -K (u - u_obs)`` on [0, 1] with zero ends.

    Crank-Nicolson diffusion, second-order Adams-Bashforth for the centered
    conservative flux, and exact nudging relaxation in Strang half steps.
    """
    grid = ic.grid
    if grid.bc is not BC.DIRICHLET or not nu > 0:
        raise ValueError("viscous Burgers needs nu > 0 on a Dirichlet grid")
    times = np.linspace(0.0, T, nt + 1)
    dt, dx = T / nt, grid.dx
    obs = _obs_rows(uobs, grid, times)
    m = grid.n - 2
    lap = sparse.diags([np.ones(m - 1), -2 * np.ones(m), np.ones(m - 1)], [-1, 0, 1]) / dx**2
    eye = sparse.identity(m)
    lhs = splu((eye - 0.5 * dt * nu * lap).tocsc())
    rhs = (eye + 0.5 * dt * nu * lap).tocsr()
    kx = gain.amplitude * gain.in_support(grid.x)

    def flux(u):
        q = 0.5 * u**2
        return -(q[2:] - q[:-2]) / (2 * dx)

    def relax(u, k, t0, t1):
        if gain.amplitude == 0.0:
            return u
        f = np.exp(-kx * gain.window_measure(t0, t1))
        ob = obs[k]
        return ob + (u - ob) * f

    u = ic.values.copy()
    rows, keep = [u.copy()], [0]
    prev = None
    for k in range(nt):
        t0, t1 = times[k], times[k + 1]
        if np.max(np.abs(u)) * dt / dx > CFL_MAX:
            raise StabilityError(f"CFL guard max|u| dt/dx > {CFL_MAX} at t={t0:.6g}")
        u = relax(u, k, t0, t0 + dt / 2)
        n_now = flux(u)
        adv = n_now if prev is None else 1.5 * n_now - 0.5 * prev
        prev = n_now
        new = np.zeros_like(u)
        new[1:-1] = lhs.solve(rhs @ u[1:-1] + dt * adv)
        u = relax(new, k + 1, t0 + dt / 2, t1)
        if not np.all(np.isfinite(u)):
            raise StabilityError("non-finite values in viscous Burgers step")
        if (k + 1) % record_every == 0 or k + 1 == nt:
            rows.append(u.copy())
            keep.append(k + 1)
    keep = np.array(keep)
    observations = None if is_zero(uobs) else obs[keep]
    return Trajectory(None, grid, times[keep], np.array(rows), observations=observations)


# -- Cole-Hopf -----------------------------------------------------------------


def _d_log(v: np.ndarray, dx: float) -> np.ndarray:
    """Fourth-order first derivative of ``log v`` on a bounded uniform grid."""
    L = np.log(v)
    d = np.empty_like(L)
    d[2:-2] = (-L[4:] + 8 * L[3:-1] - 8 * L[1:-3] + L[:-4]) / 12
    d[0] = (-25 * L[0] + 48 * L[1] - 36 * L[2] + 16 * L[3] - 3 * L[4]) / 12
    d[1] = (-3 * L[0] - 10 * L[1] + 18 * L[2] - 6 * L[3] + L[4]) / 12
    d[-1] = (25 * L[-1] - 48 * L[-2] + 36 * L[-3] - 16 * L[-4] + 3 * L[-5]) / 12
    d[-2] = (3 * L[-1] + 10 * L[-2] - 18 * L[-3] + 6 * L[-4] - L[-5]) / 12
    return d / dx


def to_heat(u: Field, nu: float) -> Field:
    """``v = exp(-(1/2nu) int_0^x u)`` with ``v(0) = 1``; ``v`` has zero slope at the ends."""
    if u.grid.bc is not BC.DIRICHLET:
        raise ValueError("Cole-Hopf maps a Dirichlet velocity")
    prim = CubicSpline(u.grid.x, u.values).antiderivative()
    return Field(u.grid.with_bc(BC.NEUMANN), np.exp(-prim(u.grid.x) / (2 * nu)), u.time_tag)


def from_heat(v: Field, nu: float) -> Field:
    """``u = -2 nu v_x / v``, with the ends pinned to zero."""
    if np.any(v.values <= 0):
        raise PositivityError("Cole-Hopf inverse needs v > 0 everywhere")
    u = -2 * nu * _d_log(v.values, v.grid.dx)
    u[0] = u[-1] = 0.0
    return Field(v.grid.with_bc(BC.DIRICHLET), u, v.time_tag)


def cole_hopf(f: Field, nu: float, direction: str) -> Field:
    """``direction`` is ``"to_heat"`` or ``"from_heat"``."""
    if direction == "to_heat":
        return to_heat(f, nu)
    if direction == "from_heat":
        return from_heat(f, nu)
    raise ValueError(f"unknown direction {direction!r}")


class HeatModes:
    """Exact Neumann heat evolution of a truncated cosine expansion."""

    def __init__(self, v0: Field, nu: float, n_modes: Optional[int] = None):
        m = to_modal(v0)
        self.template = m
        n_modes = m.n_modes if n_modes is None else n_modes
        if not 1 <= n_modes <= m.n_modes:
            raise ValueError("n_modes out of range")
        self.lam = nu * m.eigenvalues
        self.coeffs = np.where(np.arange(m.n_modes) < n_modes, m.coeffs, 0.0)
        self.n_modes = n_modes

    def at(self, t: float, coeffs: Optional[np.ndarray] = None) -> Field:
        c = self.coeffs if coeffs is None else coeffs
        return from_modal(self.template.with_coeffs(c * np.exp(-self.lam * t)), t)

    def backward_from(self, final_coeffs: np.ndarray, T: float) -> np.ndarray:
        """Initial coefficients whose heat evolution ends at ``final_coeffs``."""
        out = np.zeros_like(final_coeffs)
        keep = slice(0, self.n_modes)
        out[keep] = final_coeffs[keep] * np.exp(self.lam[keep] * T)
        return out


def cole_hopf_evolution(ic: Field, nu: float, times, n_modes: Optional[int] = None) -> Trajectory:
    """Unnudged viscous Burgers via the heat equation, exact in time."""
    heat = HeatModes(to_heat(ic, nu), nu, n_modes)
    times = np.asarray(times, dtype=float)
    rows = [from_heat(heat.at(t), nu).values for t in times]
    return Trajectory(None, ic.grid, times, np.array(rows))


def k0_wellposedness_check(
    ic: Field, nu: float, T: float, n_modes: int, cap: float = DEFAULT_CAP, n_times: int = 11
) -> float:
    """Max relative ``||u~(t) - u(t)||`` of the unnudged forward/backward pair.

    Forward: Cole-Hopf, exact cosine-mode heat decay, inverse map. Backward:
    divide the heat coefficients of ``v(T)`` by their decay factors and map
    back. ``TruncationError`` when ``nu (pi n_modes)^2 T`` exceeds ``cap``.
    """
    need = nu * (math.pi * n_modes) ** 2 * T
    if need > cap:
        raise TruncationError(
            f"{n_modes} modes need amplification exp({need:.4g}) beyond cap exp({cap:g})"
        )
    heat = HeatModes(to_heat(ic, nu), nu, n_modes)
    final = heat.coeffs * np.exp(-heat.lam * T)
    back0 = heat.backward_from(final, T)
    worst = 0.0
    for t in np.linspace(0.0, T, n_times):
        u = from_heat(heat.at(t), nu)
        ub = from_heat(heat.at(t, back0), nu)
        scale = max(l2_norm(u), l2_norm(ic), np.finfo(float).tiny)
        worst = max(worst, l2_norm(ub - u) / scale)
    return worst


# -- Fourier coefficients of the backward final condition ----------------------


@dataclass(frozen=True)
class BnSequence:
    """Coefficients ``b_n`` and ``b_n`` (underlined form) in log-magnitude form.

    ``log_b[n-1]`` and ``arg_b[n-1]`` hold ``log|b_n|`` and its phase for
    ``n = 1..N``; ``-inf`` marks an exact zero. ``g[n-1] = log|b_n|/n^2`` for
    the underlined sequence (NaN at ``n = 1``).
    """

    a: np.ndarray
    log_b: np.ndarray
    arg_b: np.ndarray
    log_b_under: np.ndarray
    arg_b_under: np.ndarray
    g: np.ndarray
    params: tuple

    @property
    def n(self) -> np.ndarray:
        return np.arange(1, self.a.size + 1)

    @property
    def b(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_b + 1j * self.arg_b)

    @property
    def b_under(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_b_under + 1j * self.arg_b_under)

    @property
    def max_growth(self) -> float:
        """Largest ``g_n`` over the upper half ``n >= N/2`` (the asymptotic tail)."""
        tail = self.g[self.a.size // 2:]
        tail = tail[np.isfinite(tail)]
        return float(tail.max()) if tail.size else -math.inf


def _log_expm1_over(alpha: np.ndarray, T: float) -> np.ndarray:
    """``log((e^{alpha T} - 1) / alpha)``, with the limit ``log T`` at alpha = 0."""
    x = np.asarray(alpha * T, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < 1e-300
    big = x > 30
    mid = ~small & ~big
    out[small] = math.log(T) if T > 0 else -math.inf
    out[mid] = np.log(np.expm1(x[mid]) / alpha[mid])
    out[big] = x[big] + np.log1p(-np.exp(-x[big])) - np.log(alpha[big])
    return out


def _log_sum(logs: np.ndarray, phases: np.ndarray) -> tuple[float, float]:
    """``log|sum|`` and ``arg(sum)`` of ``exp(logs + i phases)``."""
    finite = np.isfinite(logs)
    if not finite.any():
        return -math.inf, 0.0
    top = logs[finite].max()
    s = np.sum(np.exp(logs[finite] - top + 1j * phases[finite]))
    if s == 0:
        return -math.inf, 0.0
    return top + math.log(abs(s)), float(np.angle(s))


def _log_prefactor(x: float) -> tuple[float, float]:
    """``log|e^{x} - 1|`` and its sign as a phase."""
    if x == 0:
        return -math.inf, 0.0
    m = math.expm1(x)
    return math.log(abs(m)), 0.0 if m > 0 else math.pi


def bn_sequence(a, K: float, Kp: float, nu: float, T: float) -> BnSequence:
    """``b_n`` from ``a_p a_q`` over ``p + q = n`` (``p, q >= 1``), in log form."""
    a = np.asarray(a, dtype=complex)
    N = a.size
    log_a = np.log(np.abs(a), where=a != 0, out=np.full(N, -np.inf))
    arg_a = np.angle(a)
    lpre, ppre = _log_prefactor(-2 * (K + Kp) * T)
    lshift = (K - Kp) * T
    log_b = np.full(N, -np.inf)
    arg_b = np.zeros(N)
    log_bu = np.full(N, -np.inf)
    arg_bu = np.zeros(N)
    for n in range(2, N + 1 if lpre > -math.inf else 2):
        p = np.arange(1, n)
        q = n - p
        alpha = (2 * Kp + K + 2 * nu * p * q).astype(float)
        la = log_a[p - 1] + log_a[q - 1]
        ph = arg_a[p - 1] + arg_a[q - 1]
        ls, ps = _log_sum(la + _log_expm1_over(alpha, T), ph)
        log_b[n - 1] = lshift + lpre + ls
        arg_b[n - 1] = ppre + ps
        with np.errstate(divide="ignore"):
            lu = alpha * T - np.log(alpha)
        lsu, psu = _log_sum(la + lu, ph)
        log_bu[n - 1] = lpre + lsu
        arg_bu[n - 1] = ppre + psu
    with np.errstate(invalid="ignore"):
        g = log_bu / np.arange(1, N + 1) ** 2
    g[0] = np.nan
    return BnSequence(a, log_b, arg_b, log_bu, arg_bu, g, (K, Kp, nu, T))


def growth_verdict(seq: BnSequence, threshold: float = 0.4) -> str:
    """Classify the coefficient growth: zero, super-polynomial or bounded."""
    K, Kp, nu, T = seq.params
    if K == 0 and Kp == 0:
        return "well-posed boundary case"
    if nu * T > 0 and seq.max_growth >= threshold * nu * T:
        return "super-polynomial"
    return "polynomial"
