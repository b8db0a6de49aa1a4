"""Shared vocabulary: grids, fields, gains, equation specs, norms and errors."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy.interpolate import CubicSpline


class BfnError(Exception):
    """Base class for all errors raised by this package."""


class CrossingError(BfnError):
    """Characteristic curves intersected (a shock formed) inside [0, T]."""


class TruncationError(BfnError):
    """Backward modal recovery lost most of the energy to refused modes."""


class StabilityError(BfnError):
    """A time stepper's stability guard failed."""


class PositivityError(BfnError):
    """A Cole-Hopf heat field was not strictly positive."""


class UnsupportedRegime(BfnError):
    """The (equation, gain) pairing has no solution in general."""


class NoOracle(BfnError, ValueError):
    """No closed-form prediction exists for the requested pairing."""


class BC(str, enum.Enum):
    DIRICHLET = "dirichlet"
    PERIODIC = "periodic"
    # Heat fields produced by the Cole-Hopf map live on the Dirichlet nodes
    # but carry homogeneous Neumann conditions instead of zero end values.
    NEUMANN = "neumann"


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid on [0, 1].

    Dirichlet and Neumann grids hold both end points; periodic grids store
    ``x_j = j / n`` for ``j = 0 .. n-1``.
    """

    n: int
    bc: BC = BC.PERIODIC

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 4:
            raise ValueError(f"grid needs n >= 4 nodes, got {self.n}")
        object.__setattr__(self, "bc", BC(self.bc))

    @property
    def periodic(self) -> bool:
        return self.bc is BC.PERIODIC

    @property
    def dx(self) -> float:
        return 1.0 / self.n if self.periodic else 1.0 / (self.n - 1)

    @property
    def x(self) -> np.ndarray:
        if self.periodic:
            return np.arange(self.n) / self.n
        return np.linspace(0.0, 1.0, self.n)

    def with_bc(self, bc: BC) -> "Grid1D":
        return Grid1D(self.n, bc)


@dataclass(frozen=True, eq=False)
class Field:
    """Snapshot of a scalar function on a grid at time ``time_tag``."""

    grid: Grid1D
    values: np.ndarray
    time_tag: float = 0.0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        if self.grid.bc is BC.DIRICHLET and (v[0] != 0.0 or v[-1] != 0.0):
            raise ValueError("Dirichlet field must vanish exactly at x=0 and x=1")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    def with_values(self, values, time_tag: Optional[float] = None) -> "Field":
        return Field(self.grid, values, self.time_tag if time_tag is None else time_tag)

    def __sub__(self, other: "Field") -> "Field":
        return self.with_values(self.values - other.values)

    def __add__(self, other: "Field") -> "Field":
        return self.with_values(self.values + other.values)

    def __mul__(self, scale: float) -> "Field":
        return self.with_values(scale * self.values)

    __rmul__ = __mul__

    @classmethod
    def zeros(cls, grid: Grid1D, time_tag: float = 0.0) -> "Field":
        return cls(grid, np.zeros(grid.n), time_tag)


def dirichlet_field(grid: Grid1D, values, time_tag: float = 0.0, atol: float = 1e-12) -> Field:
    """Build a Dirichlet field, snapping end values within ``atol`` to zero."""
    v = np.array(values, dtype=float)
    scale = max(1.0, float(np.max(np.abs(v)))) if v.size else 1.0
    if abs(v[0]) > atol * scale or abs(v[-1]) > atol * scale:
        raise ValueError("profile does not vanish at the Dirichlet end points")
    v[0] = v[-1] = 0.0
    return Field(grid, v, time_tag)


# -- norms -------------------------------------------------------------------


def l2_norm(f: Field) -> float:
    """Discrete L2 norm ``sqrt(dx * sum f_j**2)``."""
    return math.sqrt(f.grid.dx * float(np.sum(f.values**2)))


def gradient(f: Field) -> np.ndarray:
    """Second-order finite-difference derivative of a field.

    Centered in the interior, wrap-around on periodic grids and one-sided
    (second order) at the end points of bounded grids.
    """
    v, h = f.values, f.grid.dx
    if f.grid.periodic:
        return (np.roll(v, -1) - np.roll(v, 1)) / (2 * h)
    d = np.empty_like(v)
    d[1:-1] = (v[2:] - v[:-2]) / (2 * h)
    d[0] = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * h)
    d[-1] = (3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * h)
    return d


def linf_grad(f: Field) -> float:
    """Max-norm of the finite-difference slope: the estimator of the bound M."""
    return float(np.max(np.abs(gradient(f))))


# -- gains -------------------------------------------------------------------


def _interval(pair, name: str) -> Optional[tuple[float, float]]:
    if pair is None:
        return None
    lo, hi = (float(p) for p in pair)
    if not lo < hi:
        raise ValueError(f"{name} must satisfy lo < hi, got {pair}")
    return lo, hi


@dataclass(frozen=True)
class Gain:
    """Nudging gain ``K(t, x) = K 1_window(t) 1_support(x)`` with ``K' = kappa K``.

    ``support=None`` and ``window=None`` mean the full domain / full period.
    """

    amplitude: float
    kappa: float = 1.0
    support: Optional[tuple[float, float]] = None
    window: Optional[tuple[float, float]] = None

    def __post_init__(self):
        if not self.amplitude >= 0:
            raise ValueError("gain amplitude must be nonnegative")
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        support = _interval(self.support, "support")
        if support is not None and not (0.0 <= support[0] and support[1] <= 1.0):
            raise ValueError("spatial support must lie inside [0, 1]")
        if support == (0.0, 1.0):
            support = None
        window = _interval(self.window, "window")
        if window is not None and window[0] < 0:
            raise ValueError("temporal window must start at t >= 0")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "window", window)

    @property
    def full_support(self) -> bool:
        return self.support is None

    @property
    def full_window(self) -> bool:
        return self.window is None

    @property
    def backward_amplitude(self) -> float:
        return self.kappa * self.amplitude

    def with_amplitude(self, amplitude: float) -> "Gain":
        return Gain(amplitude, self.kappa, self.support, self.window)

    def in_window(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.window is None:
            return np.ones(t.shape, dtype=bool)
        return (t >= self.window[0]) & (t <= self.window[1])

    def in_support(self, x) -> np.ndarray:
        """Indicator of the closed support; positions outside [0, 1] wrap."""
        x = np.asarray(x, dtype=float)
        if self.support is None:
            return np.ones(x.shape, dtype=bool)
        a, b = self.support
        xm = np.where((x < 0.0) | (x > 1.0), x - np.floor(x), x)
        inside = (xm >= a) & (xm <= b)
        if b >= 1.0:
            inside |= xm <= b - 1.0
        return inside

    def evaluate(self, t, x) -> np.ndarray:
        t, x = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(x, dtype=float))
        return self.amplitude * (self.in_window(t) & self.in_support(x))

    def evaluate_backward(self, t, x) -> np.ndarray:
        return self.kappa * self.evaluate(t, x)

    def window_measure(self, t0: float, t1: float) -> float:
        """Length of ``[t0, t1]`` that lies inside the temporal window."""
        if self.window is None:
            return max(0.0, t1 - t0)
        lo, hi = max(t0, self.window[0]), min(t1, self.window[1])
        return max(0.0, hi - lo)

    def time_integral(self, t0: float, t1: float) -> float:
        """``int_{t0}^{t1} K(s) ds`` for gains without spatial structure."""
        return self.amplitude * self.window_measure(t0, t1)

    def window_breaks(self, t0: float, t1: float) -> list[float]:
        """Window edges strictly inside ``(t0, t1)``."""
        if self.window is None:
            return []
        return [e for e in self.window if t0 < e < t1]

    def support_measure(self, lo, hi) -> np.ndarray:
        """Measure of ``[lo, hi]`` covered by the periodically repeated support.

        Works elementwise on unwrapped positions with ``lo <= hi``.
        """
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if self.support is None:
            return hi - lo
        a, b = self.support
        width = b - a

        def cumulative(y):
            k = np.floor(y)
            return k * width + np.clip(y - k - a, 0.0, width)

        return cumulative(hi) - cumulative(lo)


# -- equations ---------------------------------------------------------------


@dataclass(frozen=True)
class ConstantAdvection:
    c: float = 1.0


@dataclass(frozen=True, eq=False)
class ProfileAdvection:
    """Velocity ``a(x)`` sampled on a uniform periodic grid, linear in between."""

    samples: np.ndarray

    def __post_init__(self):
        s = np.array(self.samples, dtype=float)
        if s.ndim != 1 or s.size < 4 or not np.all(np.isfinite(s)):
            raise ValueError("advection profile needs >= 4 finite samples")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    def __call__(self, x) -> np.ndarray:
        n = self.samples.size
        xp = np.arange(n + 1) / n
        fp = np.append(self.samples, self.samples[0])
        return np.interp(np.mod(x, 1.0), xp, fp)


@dataclass(frozen=True)
class SelfAdvection:
    """Burgers transport: the state advects itself."""


Advection = Union[ConstantAdvection, ProfileAdvection, SelfAdvection]


@dataclass(frozen=True)
class EquationSpec:
    """Which transport equation: viscosity, advection, boundary kind, horizon."""

    nu: float
    advection: Advection
    bc: BC
    T: float

    def __post_init__(self):
        object.__setattr__(self, "bc", BC(self.bc))
        if self.nu < 0:
            raise ValueError("viscosity must be nonnegative")
        if not self.T > 0:
            raise ValueError("final time T must be positive")
        if self.nu > 0 and self.bc is not BC.DIRICHLET:
            raise ValueError("viscous equations are posed with Dirichlet conditions")
        if self.nu == 0 and self.bc is not BC.PERIODIC:
            raise ValueError("inviscid equations are posed on the torus")

    @property
    def viscous(self) -> bool:
        return self.nu > 0

    @property
    def burgers(self) -> bool:
        return isinstance(self.advection, SelfAdvection)


# -- initial profiles and observations -----------------------------------------


_PROFILES = ("zero", "sin2pi", "sinpi")


_FREQ = {"zero": 0.0, "sin2pi": 2 * math.pi, "sinpi": math.pi}


@dataclass(frozen=True)
class NamedProfile:
    """Analytic initial data ``offset + amplitude * sin(freq * x + phase)``.

    ``sin2pi`` uses ``freq = 2 pi mode`` (periodic), ``sinpi`` uses
    ``freq = pi mode`` (vanishes at both ends for integer modes).
    """

    name: str
    amplitude: float = 1.0
    phase: float = 0.0
    mode: int = 1
    offset: float = 0.0

    def __post_init__(self):
        if self.name not in _PROFILES:
            raise ValueError(f"unknown profile {self.name!r}; choose from {_PROFILES}")

    @property
    def freq(self) -> float:
        return _FREQ[self.name] * self.mode

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.name == "zero":
            return np.full(x.shape, self.offset)
        return self.offset + self.amplitude * np.sin(self.freq * x + self.phase)

    def derivative(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.name == "zero":
            return np.zeros(x.shape)
        return self.amplitude * self.freq * np.cos(self.freq * x + self.phase)

    def max_slope(self) -> float:
        return abs(self.amplitude * self.freq)

    def field(self, grid: Grid1D, time_tag: float = 0.0) -> Field:
        v = self(grid.x)
        if grid.bc is BC.DIRICHLET:
            return dirichlet_field(grid, v, time_tag)
        return Field(grid, v, time_tag)


ProfileLike = Union[NamedProfile, Field, np.ndarray]


def field_from(desc: ProfileLike, grid: Grid1D, time_tag: float = 0.0) -> Field:
    """Field on ``grid`` from a named profile, raw samples, or a matching field."""
    if isinstance(desc, NamedProfile):
        return desc.field(grid, time_tag)
    if isinstance(desc, Field):
        if desc.grid != grid:
            raise ValueError("field lives on a different grid")
        return desc
    if grid.bc is BC.DIRICHLET:
        return dirichlet_field(grid, desc, time_tag)
    return Field(grid, desc, time_tag)


class Observations:
    """Observation trajectory ``u_obs(t, x)`` that can be probed anywhere."""

    def value(self, t: float, x) -> np.ndarray:
        raise NotImplementedError

    def grad(self, t: float, x) -> np.ndarray:
        raise NotImplementedError

    def field(self, grid: Grid1D, t: float) -> Field:
        v = self.value(t, grid.x)
        if grid.bc is BC.DIRICHLET:
            return dirichlet_field(grid, v, t, atol=1e-9)
        return Field(grid, v, t)

    def sample(self, grid: Grid1D, times) -> np.ndarray:
        return np.array([self.field(grid, t).values for t in times])


class ZeroObservations(Observations):
    def value(self, t, x):
        return np.zeros(np.shape(x))

    def grad(self, t, x):
        return np.zeros(np.shape(x))


@dataclass(eq=False)
class Trajectory(Observations):
    """Grid snapshots of a solution at increasing times.

    ``observations`` optionally holds the observation snapshots at the same
    times, so that ``error`` is the error field ``w = u - u_obs``.
    """

    spec: Optional[EquationSpec]
    grid: Grid1D
    times: np.ndarray
    values: np.ndarray
    observations: Optional[np.ndarray] = None
    chars: Optional[object] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.times.size, self.grid.n):
            raise ValueError("trajectory values must be (n_times, grid.n)")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must increase")
        if self.observations is not None:
            self.observations = np.asarray(self.observations, dtype=float)
            if self.observations.shape != self.values.shape:
                raise ValueError("observation snapshots must match the values")

    def __len__(self) -> int:
        return self.times.size

    def __getitem__(self, i: int) -> Field:
        return Field(self.grid, self.values[i], float(self.times[i]))

    @property
    def snapshots(self) -> list[Field]:
        return [self[i] for i in range(len(self))]

    @property
    def final(self) -> Field:
        return self[-1]

    @property
    def error(self) -> np.ndarray:
        if self.observations is None:
            return self.values
        return self.values - self.observations

    def error_field(self, i: int) -> Field:
        row = self.values[i] if self.observations is None else self.values[i] - self.observations[i]
        return Field(self.grid, row, float(self.times[i]))

    def obs_field(self, i: int) -> Field:
        if self.observations is None:
            return Field.zeros(self.grid, float(self.times[i]))
        return Field(self.grid, self.observations[i], float(self.times[i]))

    def index_of(self, t: float, atol: float = 1e-12) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > atol:
            raise KeyError(f"time {t} is not stored")
        return i

    # Used as observations: cubic in x, linear in t.
    def _splines(self, t: float):
        j = int(np.clip(np.searchsorted(self.times, t) - 1, 0, max(len(self) - 2, 0)))
        x = self.grid.x
        bc = "periodic" if self.grid.periodic else "not-a-knot"
        if self.grid.periodic:
            x = np.append(x, 1.0)
        pieces = []
        for i in {j, min(j + 1, len(self) - 1)}:
            y = self.values[i]
            if self.grid.periodic:
                y = np.append(y, y[0])
            pieces.append((i, CubicSpline(x, y, bc_type=bc)))
        pieces.sort(key=lambda p: p[0])
        if len(pieces) == 1:
            return pieces[0][1], pieces[0][1], 0.0
        (i0, s0), (i1, s1) = pieces
        theta = (t - self.times[i0]) / (self.times[i1] - self.times[i0])
        return s0, s1, float(np.clip(theta, 0.0, 1.0))

    def _wrap(self, x):
        x = np.asarray(x, dtype=float)
        return np.mod(x, 1.0) if self.grid.periodic else x

    def value(self, t, x):
        s0, s1, th = self._splines(t)
        x = self._wrap(x)
        return (1 - th) * s0(x) + th * s1(x)

    def grad(self, t, x):
        s0, s1, th = self._splines(t)
        x = self._wrap(x)
        return (1 - th) * s0(x, 1) + th * s1(x, 1)


ObsLike = Union[None, Observations]


def as_observations(uobs: ObsLike) -> Observations:
    return ZeroObservations() if uobs is None else uobs


def is_zero(uobs: ObsLike) -> bool:
    return uobs is None or isinstance(uobs, ZeroObservations)


VelocityLike = Union[float, ConstantAdvection, ProfileAdvection, Trajectory, Callable]
