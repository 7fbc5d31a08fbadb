"""Compartmental SIR models with lockdown stringency and vaccination.

One right-hand side covers all four variants:

    dS/dt = -beta * (1 - s(t)/100) * S * I / N - nu(t) * S
    dI/dt =  beta * (1 - s(t)/100) * S * I / N - gamma * I
    dR/dt =  gamma * I + nu(t) * S

With no stringency and ``nu = 0`` this is the plain SIR model. Integration is
classical RK4 with a one-day step; stringency and ``nu`` are held constant
within each day (the value at day ``t`` drives the step ``t -> t + 1``).
"""

from __future__ import annotations

import datetime as dt
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import CoverageError, DomainError, IntegrationError

log = logging.getLogger(__name__)

_CONSERVATION_RTOL = 1e-9


def _finite(*values):
    return all(math.isfinite(v) for v in values)


@dataclass(frozen=True)
class Compartments:
    """Susceptible / infected / recovered counts at one instant."""

    s: float
    i: float
    r: float
    n: float

    def __post_init__(self):
        if not _finite(self.s, self.i, self.r, self.n):
            raise DomainError(f"non-finite compartments: {self}")
        if self.s < 0 or self.i < 0 or self.r < 0 or self.n <= 0:
            raise DomainError(f"compartments must be non-negative with n > 0: {self}")
        if abs(self.s + self.i + self.r - self.n) > _CONSERVATION_RTOL * self.n:
            raise DomainError(f"s + i + r != n: {self}")

    @classmethod
    def from_counts(cls, s, i, r):
        return cls(float(s), float(i), float(r), float(s) + float(i) + float(r))

    def proportions(self):
        return self.s / self.n, self.i / self.n, self.r / self.n


@dataclass(frozen=True)
class SirParams:
    beta: float
    gamma: float

    def __post_init__(self):
        if not _finite(self.beta, self.gamma):
            raise DomainError(f"non-finite parameters: {self}")
        if self.beta < 0 or self.gamma <= 0:
            raise DomainError(f"need beta >= 0 and gamma > 0: {self}")

    @property
    def r0(self):
        return self.beta / self.gamma


@dataclass(frozen=True)
class StringencySeries:
    """Daily stringency index in [0, 100], piecewise constant per day."""

    start_date: dt.date
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if v.ndim != 1 or v.size == 0:
            raise DomainError("stringency series must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(v)) or v.min() < 0 or v.max() > 100:
            raise DomainError("stringency values must lie in [0, 100]")

    def __len__(self):
        return self.values.size

    @classmethod
    def constant(cls, value, length, start_date=dt.date(2020, 1, 1)):
        return cls(start_date, np.full(length, float(value)))


@dataclass(frozen=True)
class VaccinationSchedule:
    """Piecewise-constant vaccination rate; the last window runs to the horizon."""

    window_length: int
    rates: np.ndarray
    start_date: dt.date = dt.date(2020, 1, 1)

    def __post_init__(self):
        r = np.asarray(self.rates, dtype=np.float64)
        r.setflags(write=False)
        object.__setattr__(self, "rates", r)
        if self.window_length < 1:
            raise DomainError("window_length must be >= 1")
        if r.ndim != 1 or r.size == 0:
            raise DomainError("schedule needs at least one rate")
        if not np.all(np.isfinite(r)) or r.min() < 0:
            raise DomainError("vaccination rates must be finite and >= 0")

    def rate(self, day):
        k = min(int(day) // self.window_length, self.rates.size - 1)
        return float(self.rates[k])

    def daily(self, horizon):
        """Rates for days ``0 .. horizon - 1``."""
        idx = np.minimum(np.arange(horizon) // self.window_length, self.rates.size - 1)
        return self.rates[idx]

    @classmethod
    def constant(cls, nu, start_date=dt.date(2020, 1, 1)):
        return cls(1, np.array([float(nu)]), start_date)


@dataclass(frozen=True)
class Trajectory:
    """Daily solution; row ``t`` of ``states`` holds (S, I, R) on day ``t``."""

    states: np.ndarray
    n: float
    params_used: SirParams
    stringency_used: StringencySeries | None = None
    vaccination_used: VaccinationSchedule | None = None
    clamped_steps: int = field(default=0, compare=False)

    @property
    def days(self):
        return [(t, self[t]) for t in range(len(self))]

    def __len__(self):
        return self.states.shape[0]

    def __getitem__(self, t):
        s, i, r = self.states[t]
        return Compartments(float(s), float(i), float(r), self.n)

    @property
    def s(self):
        return self.states[:, 0]

    @property
    def i(self):
        return self.states[:, 1]

    @property
    def r(self):
        return self.states[:, 2]


def derivatives(c, p, stringency=None, nu=0.0):
    """Instantaneous (dS/dt, dI/dt, dR/dt).

    ``stringency=None`` means no lockdown factor at all, which reduces the
    system to the simple SIR model.
    """
    if not _finite(nu) or nu < 0:
        raise DomainError(f"nu must be finite and >= 0, got {nu}")
    if stringency is None:
        force = p.beta * c.s * c.i / c.n
    else:
        if not _finite(stringency) or not 0 <= stringency <= 100:
            raise DomainError(f"stringency must lie in [0, 100], got {stringency}")
        force = p.beta * (1 - stringency / 100) * c.s * c.i / c.n
    vax = nu * c.s
    recover = p.gamma * c.i
    return -force - vax, force - recover, recover + vax


def transmission_series(beta, stringency, horizon):
    """Per-day ``beta * (1 - s_t / 100)`` for days ``0 .. horizon - 1``."""
    if stringency is None:
        return np.full(horizon, float(beta))
    values = stringency.values if isinstance(stringency, StringencySeries) else np.asarray(stringency, float)
    if values.size < horizon:
        raise CoverageError(f"stringency covers {values.size} days, horizon needs {horizon}")
    return beta * (1.0 - values[:horizon] / 100.0)


def integrate(init, p, horizon, stringency=None, vax=None):
    """Integrate forward ``horizon`` days from ``init``.

    Args:
        init: starting Compartments (day 0).
        p: SirParams.
        horizon: number of one-day steps; the result has ``horizon + 1`` rows.
        stringency: StringencySeries with at least ``horizon`` values, or None.
        vax: VaccinationSchedule, a constant float rate, or None.

    Raises:
        CoverageError: stringency series shorter than the horizon.
        IntegrationError: the path became non-finite.
    """
    if horizon < 0:
        raise DomainError("horizon must be >= 0")
    trans = transmission_series(p.beta, stringency, horizon)
    if vax is None:
        nu = np.zeros(horizon)
    elif isinstance(vax, VaccinationSchedule):
        nu = vax.daily(horizon)
    else:
        vax = VaccinationSchedule.constant(float(vax))
        nu = vax.daily(horizon)
    path, nclamp = kernels.rk4_path(init.s, init.i, init.r, init.n, p.gamma, trans, nu)
    if not np.all(np.isfinite(path)):
        raise IntegrationError("integration produced non-finite states")
    if nclamp:
        log.warning("negative compartment clamped on %d of %d steps", nclamp, horizon)
    return Trajectory(path, init.n, p, stringency, vax, nclamp)


def effective_reproduction(p, stringency, s_count, n):
    """Lockdown-modulated effective reproduction number.

    ``(beta / gamma) * (1 - stringency / 100) * (s_count / n)``
    """
    if n == 0:
        raise DomainError("population must be non-zero")
    if not 0 <= s_count <= n:
        raise DomainError(f"s_count {s_count} outside [0, {n}]")
    if not 0 <= stringency <= 100:
        raise DomainError(f"stringency {stringency} outside [0, 100]")
    return p.beta / p.gamma * (1.0 - stringency / 100.0) * (s_count / n)


def histogram_mode(values, bins=100):
    """Midpoint of the most populated bin of an equal-width histogram."""
    values = np.asarray(values, dtype=np.float64)
    lo, hi = float(values.min()), float(values.max())
    if hi == lo:
        return lo
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    k = int(np.argmax(counts))
    return 0.5 * (edges[k] + edges[k + 1])


def r0_summary(p, stringency):
    """Summary statistics of the daily lockdown-modulated R0 series.

    Standard deviation is the population (ddof=0) value.
    """
    values = stringency.values if isinstance(stringency, StringencySeries) else np.asarray(stringency, float)
    if values.size == 0:
        raise DomainError("empty stringency series")
    r0 = p.beta / p.gamma * (1.0 - values / 100.0)
    return {
        "mean": float(np.mean(r0)),
        "median": float(np.median(r0)),
        "mode": histogram_mode(r0),
        "std": float(np.std(r0)),
        "min": float(np.min(r0)),
        "max": float(np.max(r0)),
    }
