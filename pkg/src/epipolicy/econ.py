"""Normalized GDP as a cubic function of stringency, plus correlation statistics."""

from __future__ import annotations

import datetime as dt
import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, FitError


@dataclass(frozen=True)
class GdpModel:
    """``gdp(s) = a s^3 + b s^2 + c s + d`` with fit statistics.

    ``r``/``r2``/``p_value`` describe the Pearson correlation between the
    stringency and GDP samples the model was fitted on; ``fit_r2`` is the
    coefficient of determination of the cubic itself.
    """

    a: float
    b: float
    c: float
    d: float
    r: float | None = None
    r2: float | None = None
    p_value: float | None = None
    n_points: int = 0
    fit_r2: float | None = None
    degenerate: bool = False

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.a, self.b, self.c, self.d)):
            raise DomainError("cubic coefficients must be finite")
        if self.r is not None and not -1.0 <= self.r <= 1.0:
            raise DomainError(f"r={self.r} outside [-1, 1]")
        if self.r2 is not None and not 0.0 <= self.r2 <= 1.0:
            raise DomainError(f"r2={self.r2} outside [0, 1]")
        if self.p_value is not None and not 0.0 <= self.p_value <= 1.0:
            raise DomainError(f"p_value={self.p_value} outside [0, 1]")

    @property
    def coefficients(self):
        return self.a, self.b, self.c, self.d

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


# Cubic reported for India, May 2020 - Oct 2022.
REFERENCE_IND = GdpModel(-5.96640236e-5, 6.65064332e-3, -2.23109924e-1, 1.01357226e2)


@dataclass(frozen=True)
class DailyGdpSeries:
    start_date: dt.date
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if v.ndim != 1 or v.size == 0 or not np.all(np.isfinite(v)) or v.min() <= 0:
            raise DomainError("daily GDP values must be finite and positive")

    def __len__(self):
        return self.values.size


_QUARTER_RE = re.compile(r"^\s*(\d{4})\s*-?\s*Q([1-4])\s*$", re.IGNORECASE)


def parse_quarter(label):
    """``"2020-Q2"`` / ``"2020Q2"`` / ``(2020, 2)`` -> ``(2020, 2)``."""
    if isinstance(label, tuple):
        year, q = label
        return int(year), int(q)
    m = _QUARTER_RE.match(str(label))
    if not m:
        raise DomainError(f"not a quarter label: {label!r}")
    return int(m.group(1)), int(m.group(2))


def quarter_bounds(year, q):
    first = dt.date(year, 3 * (q - 1) + 1, 1)
    nxt = dt.date(year + 1, 1, 1) if q == 4 else dt.date(year, 3 * q + 1, 1)
    return first, nxt - dt.timedelta(days=1)


def quarter_midpoint(year, q):
    """Midpoint of a quarter as a (possibly half-integer) proleptic ordinal."""
    first, last = quarter_bounds(year, q)
    return (first.toordinal() + last.toordinal()) / 2.0


def quarterly_to_daily(quarters, start=None, end=None, repeat=False):
    """Daily series from quarterly values.

    Values are anchored at quarter midpoints and linearly interpolated, with
    flat extrapolation before the first and after the last anchor. With
    ``repeat=True`` each day simply takes its own quarter's value (days
    outside every quarter take the nearest one).

    Args:
        quarters: sequence of ``(quarter, value)``; quarter as ``"2020-Q2"``
            or ``(2020, 2)``. Must be chronological.
        start, end: inclusive date range; defaults to the span of the quarters.
    """
    if not quarters:
        raise DomainError("no quarterly values given")
    keys = [parse_quarter(q) for q, _ in quarters]
    vals = np.array([float(v) for _, v in quarters])
    if any(b <= a for a, b in zip(keys, keys[1:])):
        raise DomainError("quarters must be strictly chronological")
    if start is None:
        start = quarter_bounds(*keys[0])[0]
    if end is None:
        end = quarter_bounds(*keys[-1])[1]
    if end < start:
        raise DomainError("end date precedes start date")
    days = np.arange(start.toordinal(), end.toordinal() + 1, dtype=np.float64)
    if repeat:
        firsts = np.array([quarter_bounds(*k)[0].toordinal() for k in keys])
        idx = np.clip(np.searchsorted(firsts, days, side="right") - 1, 0, len(keys) - 1)
        out = vals[idx]
    else:
        anchors = np.array([quarter_midpoint(*k) for k in keys])
        out = np.interp(days, anchors, vals)
    return DailyGdpSeries(start, out)


def quarterly_pairs(start_date, daily_stringency, quarters):
    """(mean stringency, GDP value) for every quarter the daily grid touches.

    The mean runs over the covered days only, so partial quarters at either
    end of the grid still contribute. Quarters outside the grid are dropped.
    """
    s = np.asarray(daily_stringency, dtype=np.float64)
    days = start_date.toordinal() + np.arange(s.size)
    xs, ys = [], []
    for label, value in quarters:
        first, last = quarter_bounds(*parse_quarter(label))
        mask = (days >= first.toordinal()) & (days <= last.toordinal())
        if mask.any():
            xs.append(float(s[mask].mean()))
            ys.append(float(value))
    if not xs:
        raise DomainError("no quarter overlaps the daily grid")
    return np.array(xs), np.array(ys)


def _betacf(a, b, x, max_iter=500, eps=3e-16):
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c, d = 1.0, 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > tiny else tiny)
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise FitError("incomplete beta continued fraction did not converge")


def betainc(a, b, x):
    """Regularized incomplete beta function I_x(a, b)."""
    if not 0.0 <= x <= 1.0:
        raise DomainError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    ln_front = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_two_sided(t, df):
    """Two-sided tail probability P(|T| >= |t|) for Student's t."""
    if math.isinf(t):
        return 0.0
    return min(1.0, betainc(df / 2.0, 0.5, df / (df + t * t)))


def pearson_stats(x, y):
    """Pearson r, r squared and the two-sided t-test p-value (n - 2 dof)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise DomainError("x and y must be 1-D and equally long")
    n = x.size
    if n < 3:
        raise DomainError("need at least 3 points")
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise DomainError("correlation undefined for a constant series")
    r = float(np.clip(dx @ dy / math.sqrt(sxx * syy), -1.0, 1.0))
    if abs(r) == 1.0:
        return r, 1.0, 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    return r, r * r, student_t_two_sided(t, n - 2)


def fit_cubic(stringency, gdp):
    """Least-squares cubic of GDP on stringency via the 4x4 normal equations.

    Stringency is scaled by 1/100 inside the solve; coefficients are returned
    in original units. A constant GDP series yields the flat model with
    ``r = 0``, ``p_value = 1`` and ``degenerate = True``.
    """
    s = np.asarray(stringency, dtype=np.float64)
    y = np.asarray(gdp, dtype=np.float64)
    if s.shape != y.shape or s.ndim != 1 or s.size < 4:
        raise DomainError("need equally long 1-D samples with at least 4 points")
    u = s / 100.0
    design = np.vander(u, 4)  # u^3, u^2, u, 1
    gram = design.T @ design
    if np.linalg.matrix_rank(design) < 4:
        raise FitError("rank-deficient cubic design (fewer than 4 distinct stringency values)")
    coef_u = np.linalg.solve(gram, design.T @ y)
    a, b, c, d = (float(v) for v in coef_u / np.array([1e6, 1e4, 1e2, 1.0]))
    resid = y - design @ coef_u
    syy = float(((y - y.mean()) ** 2).sum())
    if syy == 0:
        return GdpModel(0.0, 0.0, 0.0, float(y.mean()), 0.0, 0.0, 1.0, s.size, 1.0, True)
    fit_r2 = float(np.clip(1.0 - float(resid @ resid) / syy, 0.0, 1.0))
    r, r2, p = pearson_stats(s, y)
    return GdpModel(a, b, c, d, r, r2, p, s.size, fit_r2)


def predict_gdp(model, s):
    """Evaluate the cubic at stringency ``s`` in [0, 100] (Horner's rule)."""
    s_arr = np.asarray(s, dtype=np.float64)
    if not np.all(np.isfinite(s_arr)) or s_arr.min() < 0 or s_arr.max() > 100:
        raise DomainError("stringency must lie in [0, 100]")
    out = ((model.a * s_arr + model.b) * s_arr + model.c) * s_arr + model.d
    return float(out) if out.ndim == 0 else out


def gdp_bounds(model):
    """(min, max) of the model over integer stringency 0..100."""
    vals = predict_gdp(model, np.arange(101, dtype=np.float64))
    return float(vals.min()), float(vals.max())


def min_max_normalize(series, lo, hi):
    """``(v - lo) / (hi - lo)`` clipped to [0, 1]."""
    if not hi > lo:
        raise DomainError("need hi > lo")
    v = (np.asarray(series, dtype=np.float64) - lo) / (hi - lo)
    out = np.clip(v, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out
