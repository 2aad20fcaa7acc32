"""Continuous-time learning-rate schedules.

A schedule maps time ``t`` to a rate ``gamma(t)`` and provides the integral
``Gamma(t) = int_0^t gamma(u) du``. One SGD step corresponds to a time
increment of ``1/d`` and uses the discrete rate ``eta_k = gamma(k/d) / d``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

_QUAD_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class Schedule:
    kind: str
    rate: Optional[float] = None
    times: Optional[np.ndarray] = None
    values: Optional[np.ndarray] = None
    func: Optional[Callable[[float], float]] = field(default=None, repr=False)

    @classmethod
    def constant(cls, rate: float) -> "Schedule":
        if rate < 0:
            raise ValueError("learning rate must be nonnegative")
        return cls(kind="constant", rate=float(rate))

    @classmethod
    def from_learning_rate(cls, eta: float, d: int) -> "Schedule":
        """Constant schedule matching a discrete step size ``eta`` at dimension ``d``."""
        return cls.constant(eta * d)

    @classmethod
    def tabulated(cls, times, values) -> "Schedule":
        """Piecewise-linear schedule through ``(times, values)``.

        Held constant outside the tabulated range; ``times[0]`` must be 0.
        """
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if times.ndim != 1 or times.shape != values.shape or times.size < 1:
            raise ValueError("times and values must be equal-length 1-D arrays")
        if times[0] != 0.0:
            raise ValueError("tabulated schedule must start at t=0")
        if np.any(np.diff(times) <= 0):
            raise ValueError("tabulated times must be strictly increasing")
        if np.any(values < 0):
            raise ValueError("learning rates must be nonnegative")
        times.setflags(write=False)
        values.setflags(write=False)
        return cls(kind="tabulated", times=times, values=values)

    @classmethod
    def from_function(cls, func: Callable[[float], float]) -> "Schedule":
        """Arbitrary smooth, bounded, nonnegative schedule.

        ``Gamma`` is evaluated by adaptive quadrature.
        """
        return cls(kind="function", func=func)

    # -- evaluation -----------------------------------------------------

    def gamma(self, t):
        t_arr = np.asarray(t, dtype=float)
        if self.kind == "constant":
            out = np.full(t_arr.shape, self.rate)
        elif self.kind == "tabulated":
            out = np.interp(t_arr, self.times, self.values)
        else:
            out = np.vectorize(lambda u: float(self.func(u)), otypes=[float])(t_arr)
        return float(out) if out.ndim == 0 else out

    def gamma_integral(self, t):
        """``Gamma(t)`` for scalar or array ``t``."""
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < 0):
            raise ValueError("schedule integral requested at negative time")
        if self.kind == "constant":
            out = self.rate * t_arr
        elif self.kind == "tabulated":
            out = self._tabulated_integral(t_arr)
        else:
            flat = t_arr.ravel()
            order = np.argsort(flat)
            vals = np.empty_like(flat)
            acc, prev = 0.0, 0.0
            for idx in order:
                acc += self._quad(prev, flat[idx])
                prev = flat[idx]
                vals[idx] = acc
            out = vals.reshape(t_arr.shape)
        return float(out) if np.ndim(out) == 0 else out

    def _quad(self, lo: float, hi: float) -> float:
        if hi <= lo:
            return 0.0
        val, _ = integrate.quad(self.func, lo, hi, epsabs=_QUAD_TOL, epsrel=1e-12, limit=200)
        return val

    def _tabulated_integral(self, t: np.ndarray) -> np.ndarray:
        tk, vk = self.times, self.values
        seg = 0.5 * (vk[1:] + vk[:-1]) * np.diff(tk)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        t_flat = t.ravel()
        out = np.empty_like(t_flat)
        for i, ti in enumerate(t_flat):
            if ti >= tk[-1]:
                out[i] = cum[-1] + vk[-1] * (ti - tk[-1])
                continue
            j = int(np.searchsorted(tk, ti, side="right")) - 1
            gi = np.interp(ti, tk, vk)
            out[i] = cum[j] + 0.5 * (vk[j] + gi) * (ti - tk[j])
        return out.reshape(t.shape)

    def step_size(self, k: int, d: int) -> float:
        """Discrete SGD step ``eta_k = gamma(k/d)/d``."""
        return self.gamma(k / d) / d

    def describe(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "rate": self.rate}
        if self.kind == "tabulated":
            return {"kind": "tabulated", "times": self.times.tolist(), "values": self.values.tolist()}
        return {"kind": "function", "name": getattr(self.func, "__name__", repr(self.func))}
