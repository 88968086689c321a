"""Buchstab function omega(u) and its explicit lower/upper envelopes.

omega solves the delay equation (u*omega(u))' = omega(u - 1) with omega(u) = 1/u on [1, 2].
Past u = 3 the table is continued through the integral form

    u*omega(u) = 3*omega(3) + int_3^u omega(t - 1) dt

accumulated one unit segment at a time with the trapezoid rule, then read back with
linear interpolation between grid points.
"""
from __future__ import annotations

import logging
import math
import threading
from functools import lru_cache

import numpy as np
from scipy.integrate import cumulative_trapezoid, quad
from scipy.special import spence

from sievelab.core.config import get_settings
from sievelab.core.errors import DomainError

logger = logging.getLogger(__name__)

# --------------------------------------------------------------------------- #
# Envelope constants
# --------------------------------------------------------------------------- #
LOWER_FLOOR_3_4: float = 0.5607  # omega >= 0.5607 on [3, 4)
UPPER_CAP_3_4: float = 0.5644  # omega <= 0.5644 on [3, 4)
LOWER_TAIL: float = 0.5612  # u >= 4
UPPER_TAIL: float = 0.5617  # u >= 4
LOG_INTEGRAL_EPSABS: float = 1e-9


def _scalar_or_array(values: np.ndarray, scalar: bool) -> float | np.ndarray:
    return float(values) if scalar else values


def _as_checked_array(u) -> tuple[np.ndarray, bool]:
    arr = np.asarray(u, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 1.0):
        raise DomainError(f"omega is defined for u >= 1, got {u!r}")
    return arr, arr.ndim == 0


def omega_closed_form(u: np.ndarray) -> np.ndarray:
    """1/u on [1, 2], (1 + log(u - 1))/u on (2, 3]; NaN elsewhere."""
    u = np.asarray(u, dtype=float)
    out = np.full_like(u, np.nan)
    first = (u >= 1.0) & (u <= 2.0)
    second = (u > 2.0) & (u <= 3.0)
    out[first] = 1.0 / u[first]
    out[second] = (1.0 + np.log(u[second] - 1.0)) / u[second]
    return out


class BuchstabTable:
    """Samples of omega on the uniform grid 1, 1 + h, ..., u_max.

    Args:
        grid_step: requested spacing; snapped to h = 1/m so the integer points lie on the grid.
        u_max: right end of the table (at least 4). Larger arguments extend it lazily.
    """

    def __init__(self, grid_step: float = 1e-4, u_max: float = 64.0):
        if grid_step <= 0 or grid_step > 0.5:
            raise DomainError(f"grid_step must lie in (0, 0.5], got {grid_step}")
        if u_max < 4.0:
            raise DomainError(f"u_max must be >= 4, got {u_max}")
        self.steps_per_unit = max(2, round(1.0 / grid_step))
        self.grid_step = 1.0 / self.steps_per_unit
        self._lock = threading.Lock()
        self._build(u_max)

    def _build(self, u_max: float) -> None:
        m = self.steps_per_unit
        n_points = int(math.ceil((u_max - 1.0) * m)) + 1
        grid = 1.0 + np.arange(n_points) * self.grid_step
        values = np.empty(n_points)

        head = min(2 * m + 1, n_points)  # [1, 3] in closed form
        values[:head] = omega_closed_form(grid[:head])

        # running primitive u*omega(u), one unit segment at a time
        start = 2 * m
        primitive = 3.0 * values[start]
        while start < n_points - 1:
            stop = min(start + m, n_points - 1)
            delayed = values[start - m : stop - m + 1]
            steps = cumulative_trapezoid(delayed, dx=self.grid_step, initial=0.0)
            values[start + 1 : stop + 1] = (primitive + steps[1:]) / grid[start + 1 : stop + 1]
            primitive += steps[-1]
            start = stop

        self.grid = grid
        self.values = values
        self.u_max = float(grid[-1])
        logger.debug(
            "Buchstab table built: h=%g, u_max=%g, %d points", self.grid_step, self.u_max, n_points
        )

    def _ensure(self, u_top: float) -> None:
        if u_top <= self.u_max:
            return
        with self._lock:
            if u_top > self.u_max:
                target = max(2.0 * self.u_max, math.ceil(u_top) + 1.0)
                logger.info("extending Buchstab table from u_max=%g to %g", self.u_max, target)
                self._build(target)

    def omega(self, u) -> float | np.ndarray:
        """omega(u) for scalar or array u >= 1.

        Raises:
            DomainError: if any u < 1.
        """
        arr, scalar = _as_checked_array(u)
        flat = np.atleast_1d(arr)
        if flat.size:
            self._ensure(float(flat.max()))
        out = np.interp(flat, self.grid, self.values)
        exact = flat <= 3.0
        out[exact] = omega_closed_form(flat[exact])
        return _scalar_or_array(out.reshape(arr.shape), scalar)

    __call__ = omega


# --------------------------------------------------------------------------- #
# Envelopes omega_0 <= omega <= omega_1
# --------------------------------------------------------------------------- #
def log_integral_quad(u: float) -> float:
    """int_2^{u-1} log(t - 1)/t dt by adaptive quadrature."""
    value, _ = quad(lambda t: math.log(t - 1.0) / t, 2.0, u - 1.0, epsabs=LOG_INTEGRAL_EPSABS)
    return value


def log_integral_dilog(u: np.ndarray) -> np.ndarray:
    """Same integral in closed form: [log x log(1 + x) + Li2(-x)] from x = 1 to x = u - 2."""
    x = np.asarray(u, dtype=float) - 2.0

    def primitive(x):
        # Li2(-x) = spence(1 + x) in scipy's convention
        return np.log(x) * np.log1p(x) + spence(1.0 + x)

    return primitive(x) - primitive(np.ones_like(x))


def exact_branch_3_4(u) -> float | np.ndarray:
    """omega on [3, 4]: (1 + log(u - 1))/u + (1/u) int_2^{u-1} log(t - 1)/t dt."""
    arr = np.asarray(u, dtype=float)
    if arr.ndim == 0:
        v = float(arr)
        return (1.0 + math.log(v - 1.0) + log_integral_quad(v)) / v
    return (1.0 + np.log(arr - 1.0) + log_integral_dilog(arr)) / arr


def _envelope(u, *, clamp_3_4, bound_3_4: float, tail: float) -> float | np.ndarray:
    arr, scalar = _as_checked_array(u)
    flat = np.atleast_1d(arr)
    out = np.empty_like(flat)

    head = flat < 3.0
    out[head] = omega_closed_form(flat[head])
    mid = (flat >= 3.0) & (flat < 4.0)
    if mid.any():
        branch = (
            exact_branch_3_4(float(flat[mid][0]))
            if scalar
            else exact_branch_3_4(flat[mid])
        )
        out[mid] = clamp_3_4(branch, bound_3_4)
    out[flat >= 4.0] = tail
    return _scalar_or_array(out.reshape(arr.shape), scalar)


def omega_lower(u) -> float | np.ndarray:
    """omega_0(u): the printed lower envelope, clamped from below at 0.5607 on [3, 4)."""
    return _envelope(u, clamp_3_4=np.maximum, bound_3_4=LOWER_FLOOR_3_4, tail=LOWER_TAIL)


def omega_upper(u) -> float | np.ndarray:
    """omega_1(u): the printed upper envelope, capped at 0.5644 on [3, 4)."""
    return _envelope(u, clamp_3_4=np.minimum, bound_3_4=UPPER_CAP_3_4, tail=UPPER_TAIL)


# --------------------------------------------------------------------------- #
# Process-wide table
# --------------------------------------------------------------------------- #
@lru_cache(maxsize=8)
def get_table(grid_step: float | None = None, u_max: float | None = None) -> BuchstabTable:
    settings = get_settings()
    return BuchstabTable(
        grid_step=grid_step or settings.grid_step,
        u_max=u_max or settings.u_max,
    )


def omega(u) -> float | np.ndarray:
    """omega(u) from the shared default table."""
    return get_table().omega(u)
