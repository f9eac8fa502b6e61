"""Time profiles for rate and kernel coefficients.

Every built-in model factors its time dependence through one of these
profiles, all of which carry a closed-form antiderivative so survival
factors exp(-integral) are exact (no time-quadrature error, and the
two-parameter evolution family composes exactly).  A Gauss-Legendre
fallback handles user-supplied callables without an antiderivative.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ModelContractError, StructureError

# 8-point Gauss-Legendre nodes/weights on [-1, 1]
_GL8_X = np.array([
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
    -0.1834346424956498, 0.1834346424956498, 0.5255324099163290,
    0.7966664774136267, 0.9602898564975363,
])
_GL8_W = np.array([
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
    0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
    0.2223810344533745, 0.1012285362903763,
])


def gauss_legendre_integral(fn: Callable[[np.ndarray], np.ndarray], s: float, t: float,
                            panel_width: float = 0.25) -> float:
    """Composite 8-point Gauss-Legendre integral of ``fn`` over [s, t]."""
    if t == s:
        return 0.0
    sign = 1.0
    if t < s:
        s, t = t, s
        sign = -1.0
    n_panels = max(1, int(math.ceil((t - s) / panel_width)))
    edges = np.linspace(s, t, n_panels + 1)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        half = 0.5 * (b - a)
        mid = 0.5 * (a + b)
        total += half * float(np.dot(_GL8_W, fn(mid + half * _GL8_X)))
    return sign * total


@dataclass(frozen=True)
class TimeProfile:
    """Scalar time coefficient k(t) with exact antiderivative.

    Kinds
    -----
    constant   k(t) = c0
    affine     k(t) = c0 + c1*t
    power      k(t) = c0 * t**p          (p > -1, defined for t >= 0)
    pwlinear   piecewise-linear interpolant of (times, values), clamped
               to the end values outside the table range
    callable   arbitrary fn(t); antiderivative via composite Gauss-Legendre
    """

    kind: str = "constant"
    c0: float = 1.0
    c1: float = 0.0
    p: float = 0.0
    times: np.ndarray | None = None
    values: np.ndarray | None = None
    fn: Callable[[float], float] | None = None
    _cum: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("constant", "affine", "power", "pwlinear", "callable"):
            raise StructureError(f"unknown time profile kind {self.kind!r}")
        if self.kind == "power" and self.p <= -1.0:
            raise StructureError("power profile needs exponent > -1 for integrability")
        if self.kind == "pwlinear":
            if self.times is None or self.values is None:
                raise StructureError("pwlinear profile needs times and values")
            times = np.asarray(self.times, dtype=float)
            values = np.asarray(self.values, dtype=float)
            if times.ndim != 1 or times.shape != values.shape or times.size < 2:
                raise StructureError("pwlinear profile needs matching 1-d times/values, >= 2 knots")
            if np.any(np.diff(times) <= 0):
                raise StructureError("pwlinear knot times must be strictly increasing")
            object.__setattr__(self, "times", times)
            object.__setattr__(self, "values", values)
            # exact cumulative integral at the knots (trapezoid is exact
            # for a piecewise-linear function)
            seg = 0.5 * (values[1:] + values[:-1]) * np.diff(times)
            cum = np.concatenate([[0.0], np.cumsum(seg)])
            object.__setattr__(self, "_cum", cum)
        if self.kind == "callable" and self.fn is None:
            raise StructureError("callable profile needs fn")

    def value(self, t: float) -> float:
        if self.kind == "constant":
            return self.c0
        if self.kind == "affine":
            return self.c0 + self.c1 * t
        if self.kind == "power":
            if t < 0.0:
                raise ModelContractError("power profile evaluated at t < 0")
            return self.c0 * float(t) ** self.p if t > 0.0 else (self.c0 if self.p == 0.0 else 0.0)
        if self.kind == "pwlinear":
            return float(np.interp(t, self.times, self.values))
        return float(self.fn(t))

    def antiderivative(self, t: float) -> float:
        """F(t) with F(0) = 0 (pwlinear: F(times[0]) = 0)."""
        if self.kind == "constant":
            return self.c0 * t
        if self.kind == "affine":
            return self.c0 * t + 0.5 * self.c1 * t * t
        if self.kind == "power":
            if t < 0.0:
                raise ModelContractError("power profile integrated below t = 0")
            return self.c0 * float(t) ** (self.p + 1.0) / (self.p + 1.0)
        if self.kind == "pwlinear":
            times, values, cum = self.times, self.values, self._cum
            if t <= times[0]:
                return values[0] * (t - times[0])
            if t >= times[-1]:
                return float(cum[-1]) + values[-1] * (t - times[-1])
            i = int(np.searchsorted(times, t, side="right") - 1)
            vt = float(np.interp(t, times, values))
            return float(cum[i]) + 0.5 * (values[i] + vt) * (t - times[i])
        raise ModelContractError("callable profile has no closed antiderivative")

    def integral(self, s: float, t: float) -> float:
        """Integral of k over [s, t] (exact except for the callable kind)."""
        if self.kind == "callable":
            return gauss_legendre_integral(lambda x: np.asarray([self.fn(v) for v in np.atleast_1d(x)]), s, t)
        return self.antiderivative(t) - self.antiderivative(s)


@dataclass(frozen=True)
class SeparableCoefficient:
    """Nonnegative coefficient profile(t) * space(x) with exact time integral.

    ``value(t)`` returns the per-node coefficient array; ``integral(s, t)``
    the array of exact time integrals, so exponential flows built on it
    compose to rounding.
    """

    profile: TimeProfile
    space: np.ndarray

    def __post_init__(self):
        space = np.asarray(self.space, dtype=float)
        if space.ndim != 1 or space.size == 0:
            raise StructureError("separable coefficient needs a 1-d space factor")
        object.__setattr__(self, "space", space)

    def value(self, t: float) -> np.ndarray:
        return self.profile.value(t) * self.space

    def integral(self, s: float, t: float) -> np.ndarray:
        return self.profile.integral(s, t) * self.space


@dataclass(frozen=True)
class TabulatedCoefficient:
    """Per-node coefficient interpolated linearly in t from sampled rows.

    Constant extension outside the sampled window; the time integral is
    the exact integral of the interpolant.
    """

    times: np.ndarray
    values: np.ndarray
    _cum: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or times.size < 2:
            raise StructureError("tabulated coefficient needs >= 2 sample times")
        if values.shape != (times.size,) and (values.ndim != 2 or values.shape[0] != times.size):
            raise StructureError("coefficient table must have one row per sample time")
        if np.any(np.diff(times) <= 0):
            raise StructureError("coefficient sample times must be strictly increasing")
        if values.ndim == 1:
            values = values[:, None]
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        seg = 0.5 * (values[1:] + values[:-1]) * np.diff(times)[:, None]
        cum = np.vstack([np.zeros((1, values.shape[1])), np.cumsum(seg, axis=0)])
        object.__setattr__(self, "_cum", cum)

    def value(self, t: float) -> np.ndarray:
        times, values = self.times, self.values
        if t <= times[0]:
            return values[0].copy()
        if t >= times[-1]:
            return values[-1].copy()
        i = int(np.searchsorted(times, t, side="right") - 1)
        w = (t - times[i]) / (times[i + 1] - times[i])
        return (1.0 - w) * values[i] + w * values[i + 1]

    def _antiderivative(self, t: float) -> np.ndarray:
        times, values = self.times, self.values
        if t <= times[0]:
            return values[0] * (t - times[0])
        if t >= times[-1]:
            return self._cum[-1] + values[-1] * (t - times[-1])
        i = int(np.searchsorted(times, t, side="right") - 1)
        return self._cum[i] + 0.5 * (values[i] + self.value(t)) * (t - times[i])

    def integral(self, s: float, t: float) -> np.ndarray:
        return self._antiderivative(t) - self._antiderivative(s)


def time_profile_from_params(kind: str, params: dict) -> TimeProfile:
    """Build a TimeProfile from flat config parameters."""
    if kind == "constant":
        return TimeProfile(kind="constant", c0=float(params.get("value", 1.0)))
    if kind == "affine":
        return TimeProfile(kind="affine", c0=float(params.get("c0", 1.0)),
                           c1=float(params.get("c1", 0.0)))
    if kind == "power":
        return TimeProfile(kind="power", c0=float(params.get("scale", 1.0)),
                           p=float(params.get("exponent", 1.0)))
    if kind == "pwlinear":
        times = np.asarray(params["times"], dtype=float)
        values = np.asarray(params["values"], dtype=float)
        return TimeProfile(kind="pwlinear", times=times, values=values)
    raise StructureError(f"unknown time profile kind {kind!r}")
