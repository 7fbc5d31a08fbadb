"""Calibration of the SIR variants against observed compartment series.

All fits minimise the summed Huber loss (delta = 1) over S, I and R with a
multi-start Nelder-Mead search. Parameters outside the feasible box make the
objective return ``+inf``.
"""

from __future__ import annotations

import datetime as dt
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import AlignmentError, CoverageError, DomainError, FitError, SeedError
from .model import (
    Compartments,
    SirParams,
    StringencySeries,
    Trajectory,
    VaccinationSchedule,
    integrate,
)
from .optimize import NelderMeadOptions, halton, multi_start

log = logging.getLogger(__name__)

BETA_MAX = 10.0
# With one RK4 step per day an infectious period under a day is not resolved,
# and near gamma = 2.785 the step stops damping I altogether.
GAMMA_MAX = 1.0
NU_MAX = 1.0
WINDOW_NU_SEED_MAX = 0.01
WINDOW_LENGTHS = tuple(range(5, 55, 5))


@dataclass(frozen=True)
class ObservedSeries:
    start_date: dt.date
    s_obs: np.ndarray
    i_obs: np.ndarray
    r_obs: np.ndarray
    n: float

    def __post_init__(self):
        arrays = []
        for name in ("s_obs", "i_obs", "r_obs"):
            a = np.asarray(getattr(self, name), dtype=np.float64)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
            arrays.append(a)
        if len({a.size for a in arrays}) != 1 or arrays[0].size < 2:
            raise DomainError("observed series need equal lengths >= 2")
        if self.n <= 0:
            raise DomainError("population must be positive")
        for a in arrays:
            if not np.all(np.isfinite(a)) or a.min() < 0 or a.max() > self.n * (1 + 1e-9):
                raise DomainError("observed values must lie in [0, n]")

    def __len__(self):
        return self.s_obs.size

    @property
    def horizon(self):
        return len(self) - 1

    def initial(self):
        """Day-0 compartments, renormalised so that they sum to ``n``."""
        i, r = float(self.i_obs[0]), float(self.r_obs[0])
        return Compartments(max(self.n - i - r, 0.0), i, r, self.n)

    def window(self, start, stop):
        """Sub-series covering days ``start .. stop`` inclusive."""
        return ObservedSeries(
            self.start_date + dt.timedelta(days=start),
            self.s_obs[start : stop + 1],
            self.i_obs[start : stop + 1],
            self.r_obs[start : stop + 1],
            self.n,
        )


@dataclass(frozen=True)
class FitResult:
    model: str
    params: SirParams
    nu: float | VaccinationSchedule | None
    loss_sir: float
    loss_i: float
    iterations: int
    converged: bool
    trajectory: Trajectory = field(repr=False, compare=False, default=None)

    def as_dict(self):
        out = {
            "model": self.model,
            "beta": self.params.beta,
            "gamma": self.params.gamma,
            "r0": self.params.r0,
            "loss_sir": self.loss_sir,
            "loss_i": self.loss_i,
            "iterations": self.iterations,
            "converged": self.converged,
        }
        if isinstance(self.nu, VaccinationSchedule):
            out["nu_window_length"] = self.nu.window_length
            out["nu_schedule"] = self.nu.rates.tolist()
        elif self.nu is not None:
            out["nu"] = self.nu
        return out

    @classmethod
    def from_dict(cls, d):
        """Rebuild a fit from ``as_dict`` output (without its trajectory)."""
        if "nu_schedule" in d:
            nu = VaccinationSchedule(int(d["nu_window_length"]), np.array(d["nu_schedule"], dtype=float))
        else:
            nu = d.get("nu")
        return cls(
            d["model"],
            SirParams(float(d["beta"]), float(d["gamma"])),
            nu,
            float(d["loss_sir"]),
            float(d["loss_i"]),
            int(d["iterations"]),
            bool(d["converged"]),
        )

    def vaccination_schedule(self):
        """The fitted vaccination rate as a schedule (``None`` without one)."""
        if self.nu is None or isinstance(self.nu, VaccinationSchedule):
            return self.nu
        return VaccinationSchedule.constant(self.nu)


@dataclass(frozen=True)
class WindowFit:
    length: int
    schedule: VaccinationSchedule
    loss_sir: float
    loss_i: float


@dataclass(frozen=True)
class WindowSearchResult:
    fits: tuple
    chosen_length: int
    beta: float
    gamma: float

    def by_length(self, length):
        for f in self.fits:
            if f.length == length:
                return f
        raise KeyError(length)

    @property
    def lengths(self):
        return [f.length for f in self.fits]


def huber(y, f, delta=1.0):
    """Huber loss of a single residual: quadratic within ``delta``, linear outside."""
    if not (math.isfinite(y) and math.isfinite(f) and math.isfinite(delta)):
        raise DomainError("huber needs finite inputs")
    if delta <= 0:
        raise DomainError("delta must be positive")
    d = abs(y - f)
    if d <= delta:
        return 0.5 * d * d
    return delta * (d - 0.5 * delta)


def _check_aligned(traj, obs):
    if len(traj) != len(obs):
        raise AlignmentError(f"trajectory has {len(traj)} days, observations {len(obs)}")


def loss_i(traj, obs):
    _check_aligned(traj, obs)
    return kernels.huber_sum(obs.i_obs, traj.i, 1.0)


def loss_sir(traj, obs):
    _check_aligned(traj, obs)
    return (
        kernels.huber_sum(obs.s_obs, traj.s, 1.0)
        + kernels.huber_sum(obs.i_obs, traj.i, 1.0)
        + kernels.huber_sum(obs.r_obs, traj.r, 1.0)
    )


class _Problem:
    """Pre-extracted arrays so each objective call is a single kernel run."""

    def __init__(self, obs, stringency, init=None):
        self.obs = obs
        self.h = obs.horizon
        self.init = init or obs.initial()
        if stringency is None:
            self.lock = np.ones(self.h)
        else:
            values = stringency.values if isinstance(stringency, StringencySeries) else np.asarray(stringency, float)
            if values.size < self.h:
                raise CoverageError(f"stringency covers {values.size} days, fit needs {self.h}")
            self.lock = 1.0 - values[: self.h] / 100.0
        self.cols = (obs.s_obs, obs.i_obs, obs.r_obs)

    def path(self, beta, gamma, nu):
        c = self.init
        path, _ = kernels.rk4_path(c.s, c.i, c.r, c.n, gamma, beta * self.lock, nu)
        return path

    def loss(self, beta, gamma, nu):
        path = self.path(beta, gamma, nu)
        if not np.all(np.isfinite(path)):
            return math.inf
        return sum(kernels.huber_sum(col, path[:, j], 1.0) for j, col in enumerate(self.cols))


def _finish(model, prob, beta, gamma, nu, vax, best, stringency):
    params = SirParams(float(beta), float(gamma))
    traj = integrate(prob.init, params, prob.h, stringency, vax)
    converged = best.converged
    if not np.any(prob.obs.i_obs > 0):
        log.warning("observed I is identically zero: transmission rate is unidentifiable")
        converged = False
    return FitResult(
        model,
        params,
        vax,
        loss_sir(traj, prob.obs),
        loss_i(traj, prob.obs),
        best.iterations,
        converged,
        traj,
    )


def _run(objective, lower, upper, n_starts, options, model):
    try:
        best, _ = multi_start(objective, lower, upper, n_starts, options)
    except SeedError as exc:
        raise FitError(f"{model}: {exc}") from exc
    if not math.isfinite(best.fun):
        raise FitError(f"{model}: optimizer ended at a non-finite loss", best=best)
    return best


def _fit_beta_gamma(model, obs, stringency, nu_daily, vax, n_starts, options):
    prob = _Problem(obs, stringency)
    nu = np.zeros(prob.h) if nu_daily is None else nu_daily

    def objective(x):
        beta, gamma = x
        if not (0.0 <= beta <= BETA_MAX and 0.0 < gamma <= GAMMA_MAX):
            return math.inf
        return prob.loss(beta, gamma, nu)

    best = _run(objective, [0.0, 0.0], [1.0, 1.0], n_starts, options, model)
    return _finish(model, prob, best.x[0], best.x[1], None, vax, best, stringency)


def fit_simple_sir(obs, n_starts=8, options=None):
    """Fit (beta, gamma) of the plain SIR model.

    If the observed infected series is identically zero the loss does not
    depend on beta; the fit then returns the first seed with
    ``converged=False``.
    """
    return _fit_beta_gamma("simple", obs, None, None, None, n_starts, options)


def fit_lockdown_sir(obs, stringency, n_starts=8, options=None):
    return _fit_beta_gamma("lockdown", obs, stringency, None, None, n_starts, options)


def refit_with_schedule(obs, stringency, vax, n_starts=8, options=None):
    """Re-fit (beta, gamma) with the vaccination schedule held fixed."""
    prob_h = obs.horizon
    return _fit_beta_gamma("lockdown_tv_nu", obs, stringency, vax.daily(prob_h), vax, n_starts, options)


def fit_lockdown_vax_sir(obs, stringency, n_starts=8, options=None):
    """Fit (beta, gamma, nu) with a constant vaccination rate."""
    prob = _Problem(obs, stringency)
    ones = np.ones(prob.h)

    def objective(x):
        beta, gamma, nu = x
        if not (0.0 <= beta <= BETA_MAX and 0.0 < gamma <= GAMMA_MAX and 0.0 <= nu <= NU_MAX):
            return math.inf
        return prob.loss(beta, gamma, nu * ones)

    best = _run(objective, [0.0, 0.0, 0.0], [1.0, 1.0, 0.01], n_starts, options, "lockdown_nu")
    beta, gamma, nu = (float(v) for v in best.x)
    return _finish("lockdown_nu", prob, beta, gamma, nu, nu, best, stringency)


def _fit_window_nu(obs, lock, beta, gamma, state, start, stop, n_starts, options):
    """Best constant nu for days ``start .. stop`` starting from ``state``."""
    seeds = halton(n_starts, 1)[:, 0] * WINDOW_NU_SEED_MAX
    nu, _, end = kernels.fit_window_nu(
        *state,
        obs.n,
        gamma,
        beta * lock[start:stop],
        obs.s_obs[start : stop + 1],
        obs.i_obs[start : stop + 1],
        obs.r_obs[start : stop + 1],
        seeds,
        NU_MAX,
        options or NelderMeadOptions(),
    )
    if math.isnan(nu):
        raise SeedError(f"no feasible nu seed for days {start}..{stop}")
    return nu, end


def fit_schedule(obs, stringency, beta, gamma, window_length, n_starts=4, options=None):
    """Piecewise-constant nu schedule for one window length.

    Windows are fitted left to right; each starts from the model state at
    the end of the previous window. ``horizon // window_length`` windows are
    used and the last one absorbs the remaining days.
    """
    prob = _Problem(obs, stringency)
    h = prob.h
    m = h // window_length
    if m < 1:
        raise DomainError(f"window length {window_length} exceeds the {h}-day horizon")
    c = prob.init
    state = (c.s, c.i, c.r)
    rates = []
    for k in range(m):
        start = k * window_length
        stop = h if k == m - 1 else start + window_length
        nu, state = _fit_window_nu(obs, prob.lock, beta, gamma, state, start, stop, n_starts, options)
        rates.append(nu)
    return VaccinationSchedule(window_length, np.array(rates), obs.start_date)


def choose_window(losses_sir, losses_i, weight=0.5):
    """Index minimising the weighted sum of min-max scaled loss curves."""

    def scale(v):
        v = np.asarray(v, dtype=np.float64)
        span = v.max() - v.min()
        return np.zeros_like(v) if span == 0 else (v - v.min()) / span

    score = weight * scale(losses_sir) + (1 - weight) * scale(losses_i)
    return int(np.argmin(score))


def window_search(obs, stringency, beta, gamma, lengths=WINDOW_LENGTHS, n_starts=4, options=None):
    """Fit a nu schedule for every window length and score each on the full horizon."""
    params = SirParams(beta, gamma)
    init = obs.initial()
    fits = []
    for length in lengths:
        if length > obs.horizon:
            log.warning("window length %d longer than the %d-day data; skipped", length, obs.horizon)
            continue
        sched = fit_schedule(obs, stringency, beta, gamma, length, n_starts, options)
        traj = integrate(init, params, obs.horizon, stringency, sched)
        fits.append(WindowFit(length, sched, loss_sir(traj, obs), loss_i(traj, obs)))
    if not fits:
        raise FitError("no window length fits inside the data")
    k = choose_window([f.loss_sir for f in fits], [f.loss_i for f in fits])
    return WindowSearchResult(tuple(fits), fits[k].length, beta, gamma)


def fit_profiled(obs, stringency, window_length, n_starts=8, window_starts=4, options=None):
    """Fit (beta, gamma) with the nu schedule profiled out.

    Every candidate (beta, gamma) gets its own freshly fitted schedule of
    the given window length, so the loss compares each pair at its best
    schedule. Holding one schedule fixed instead ties (beta, gamma) to the
    values that schedule was fitted under.
    """
    prob = _Problem(obs, stringency)

    def schedule(beta, gamma):
        return fit_schedule(obs, stringency, beta, gamma, window_length, window_starts, options)

    def objective(x):
        beta, gamma = x
        if not (0.0 <= beta <= BETA_MAX and 0.0 < gamma <= GAMMA_MAX):
            return math.inf
        return prob.loss(beta, gamma, schedule(beta, gamma).daily(prob.h))

    best = _run(objective, [0.0, 0.0], [1.0, 1.0], n_starts, options, "lockdown_tv_nu")
    beta, gamma = (float(v) for v in best.x)
    vax = schedule(beta, gamma)
    return _finish("lockdown_tv_nu", prob, beta, gamma, None, vax, best, stringency)


@dataclass(frozen=True)
class FinalFit:
    fit: FitResult
    search: WindowSearchResult
    rounds: int


def fit_final(
    obs, stringency, beta, gamma, lengths=WINDOW_LENGTHS, n_starts=8, max_rounds=3, options=None, window_length=None
):
    """Time-varying vaccination model, starting from the constant-nu estimates.

    Alternates a window search at the current (beta, gamma) with a profiled
    refit at the chosen window length until the chosen length repeats. A
    fixed ``window_length`` skips the alternation; the search table is still
    computed at the refitted (beta, gamma).
    """
    search = window_search(obs, stringency, beta, gamma, lengths, options=options)
    length = window_length or search.chosen_length
    for rounds in range(1, max_rounds + 1):
        fit = fit_profiled(obs, stringency, length, n_starts, options=options)
        search = window_search(obs, stringency, fit.params.beta, fit.params.gamma, lengths, options=options)
        if window_length or search.chosen_length == length:
            break
        length = search.chosen_length
    return FinalFit(fit, search, rounds)


def simulate_observations(params, init, horizon, stringency=None, vax=None, start_date=dt.date(2020, 5, 1)):
    """Noise-free observations generated by the model itself."""
    traj = integrate(init, params, horizon, stringency, vax)
    s, i, r = (np.clip(col, 0.0, init.n) for col in (traj.s, traj.i, traj.r))
    return ObservedSeries(start_date, s, i, r, init.n)
