"""Episodic stringency-control environment built on the fitted epidemic and GDP models.

The environment is functional: ``reset()`` returns a state and ``step(state,
action)`` returns a new one, so a state can be stepped more than once and
rollouts are reproducible by construction.

Config file (JSON, ``format = "epipolicy-env"``, ``version = 1``)::

    {
      "format": "epipolicy-env", "version": 1,
      "start_date": "2020-05-01",
      "population": 1.38e9,
      "initial": {"s": ..., "i": ..., "r": ...},
      "initial_stringency": 96.3,
      "beta": 0.45, "gamma": 0.11,
      "vaccination": {"window_length": 5, "rates": [...]} | null,
      "gdp": {"a": ..., "b": ..., "c": ..., "d": ...},
      "horizon": 914,
      "history_length": 30,
      "reward": {"re_high": 1.5, ...}          # any subset of RewardConfig
    }
"""

from __future__ import annotations

import datetime as dt
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import kernels
from .econ import GdpModel, gdp_bounds, min_max_normalize, predict_gdp
from .errors import ConfigurationError, CoverageError, DomainError, EpisodeError, ParseError
from .model import Compartments, SirParams, StringencySeries, VaccinationSchedule, effective_reproduction

ACTION_DELTAS = (-10.0, -5.0, -2.5, 0.0, 2.5, 5.0, 10.0)
ENV_FORMAT = "epipolicy-env"
ENV_VERSION = 1
HISTORY_FEATURES = ("stringency", "norm_gdp", "r_eff", "delta")


@dataclass(frozen=True)
class Action:
    delta: float

    def __post_init__(self):
        if self.delta not in ACTION_DELTAS:
            raise DomainError(f"delta {self.delta} is not one of {ACTION_DELTAS}")

    @classmethod
    def from_index(cls, index):
        if not 0 <= int(index) < len(ACTION_DELTAS):
            raise DomainError(f"action index {index} outside 0..{len(ACTION_DELTAS) - 1}")
        return cls(ACTION_DELTAS[int(index)])

    @property
    def index(self):
        return ACTION_DELTAS.index(self.delta)


def nearest_action(want):
    """Action whose delta is closest to ``want``; ties go to the smaller move."""
    return Action(min(ACTION_DELTAS, key=lambda d: (abs(d - want), abs(d))))


@dataclass(frozen=True)
class RewardConfig:
    re_high: float = 1.5
    re_mid: float = 1.25
    penalty_re_coeff: float = -20.0
    gdp_mid_coeff: float = 100.0
    gdp_low_coeff: float = 200.0
    infect_threshold: float = 0.003
    infect_penalty: float = -2000.0
    infect_bonus: float = 50.0
    change_coeff: float = -12.0

    def __post_init__(self):
        if not all(math.isfinite(getattr(self, f.name)) for f in fields(self)):
            raise ConfigurationError("reward constants must be finite")
        if not self.re_high > self.re_mid > 0:
            raise ConfigurationError("need re_high > re_mid > 0")

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigurationError(f"unknown reward keys: {', '.join(sorted(unknown))}")
        return cls(**{k: float(v) for k, v in d.items()})


@dataclass(frozen=True)
class EnvState:
    compartments: Compartments
    stringency: float
    norm_gdp: float
    r_eff: float
    history: tuple = ()
    day_index: int = 0
    done: bool = False

    @property
    def s_prop(self):
        return self.compartments.s / self.compartments.n

    @property
    def i_prop(self):
        return self.compartments.i / self.compartments.n

    @property
    def r_prop(self):
        return self.compartments.r / self.compartments.n

    def history_array(self, k):
        """Last ``k`` history rows, oldest first, zero-padded at the front."""
        out = np.zeros((k, len(HISTORY_FEATURES)))
        rows = self.history[-k:] if k else ()
        if rows:
            out[k - len(rows) :] = rows
        return out


@dataclass(frozen=True)
class StepOutcome:
    state: EnvState
    reward: float
    reward_terms: tuple
    done: bool
    day_index: int
    delta: float


def reward(state_before, state_after, cfg=RewardConfig()):
    """Composite reward for one transition: ``(total, (re_gdp, infection, change))``."""
    re, g = state_after.r_eff, state_after.norm_gdp
    if re > cfg.re_high:
        term1 = cfg.penalty_re_coeff * re
    elif re >= cfg.re_mid:
        term1 = cfg.gdp_mid_coeff * g
    else:
        term1 = cfg.gdp_low_coeff * g
    term2 = cfg.infect_penalty if state_after.i_prop > cfg.infect_threshold else cfg.infect_bonus
    term3 = cfg.change_coeff * abs(state_after.stringency - state_before.stringency)
    return term1 + term2 + term3, (term1, term2, term3)


@dataclass(frozen=True)
class EnvConfig:
    params: SirParams
    gdp: GdpModel
    initial: Compartments
    initial_stringency: float
    horizon: int
    vaccination: VaccinationSchedule | None = None
    reward: RewardConfig = field(default_factory=RewardConfig)
    history_length: int = 30
    start_date: dt.date = dt.date(2020, 5, 1)

    def __post_init__(self):
        if self.horizon < 0:
            raise ConfigurationError("horizon must be >= 0")
        if self.history_length < 1:
            raise ConfigurationError("history_length must be >= 1")
        if not 0.0 <= self.initial_stringency <= 100.0:
            raise ConfigurationError("initial_stringency must lie in [0, 100]")

    def to_dict(self):
        c, g, v = self.initial, self.gdp, self.vaccination
        return {
            "format": ENV_FORMAT,
            "version": ENV_VERSION,
            "start_date": self.start_date.isoformat(),
            "population": c.n,
            "initial": {"s": c.s, "i": c.i, "r": c.r},
            "initial_stringency": self.initial_stringency,
            "beta": self.params.beta,
            "gamma": self.params.gamma,
            "vaccination": None if v is None else {"window_length": v.window_length, "rates": v.rates.tolist()},
            "gdp": {"a": g.a, "b": g.b, "c": g.c, "d": g.d},
            "horizon": self.horizon,
            "history_length": self.history_length,
            "reward": asdict(self.reward),
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != ENV_FORMAT:
            raise ConfigurationError("not an environment config")
        if d.get("version") != ENV_VERSION:
            raise ConfigurationError(f"unsupported environment config version {d.get('version')}")
        try:
            start = dt.date.fromisoformat(d.get("start_date", "2020-05-01"))
            ini = d["initial"]
            vax = d.get("vaccination")
            return cls(
                params=SirParams(float(d["beta"]), float(d["gamma"])),
                gdp=GdpModel(*(float(d["gdp"][k]) for k in "abcd")),
                initial=Compartments(float(ini["s"]), float(ini["i"]), float(ini["r"]), float(d["population"])),
                initial_stringency=float(d["initial_stringency"]),
                horizon=int(d["horizon"]),
                vaccination=None if vax is None else VaccinationSchedule(int(vax["window_length"]), np.array(vax["rates"], dtype=float), start),
                reward=RewardConfig.from_dict(d.get("reward", {})),
                history_length=int(d.get("history_length", 30)),
                start_date=start,
            )
        except (KeyError, TypeError) as exc:
            raise ConfigurationError(f"incomplete environment config: {exc}") from exc
        except DomainError as exc:
            raise ConfigurationError(f"invalid environment config: {exc}") from exc

    def with_reward(self, **overrides):
        return replace(self, reward=RewardConfig.from_dict({**asdict(self.reward), **overrides}))


def save_env_config(cfg, path):
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")


def load_env_config(path):
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON ({exc})") from exc
    return EnvConfig.from_dict(d)


class Environment:
    """Stringency-control MDP over one configured horizon."""

    n_actions = len(ACTION_DELTAS)

    def __init__(self, config):
        if not isinstance(config, EnvConfig):
            raise ConfigurationError("Environment needs an EnvConfig")
        self.config = config
        self.gdp_lo, self.gdp_hi = gdp_bounds(config.gdp)
        if not self.gdp_hi > self.gdp_lo:
            raise ConfigurationError("GDP model is flat over [0, 100]; reward normalization undefined")
        self.nu = np.zeros(config.horizon) if config.vaccination is None else config.vaccination.daily(config.horizon)

    @property
    def horizon(self):
        return self.config.horizon

    def norm_gdp(self, stringency):
        return min_max_normalize(predict_gdp(self.config.gdp, stringency), self.gdp_lo, self.gdp_hi)

    def reset(self):
        cfg = self.config
        c, s = cfg.initial, cfg.initial_stringency
        return EnvState(
            compartments=c,
            stringency=s,
            norm_gdp=self.norm_gdp(s),
            r_eff=effective_reproduction(cfg.params, s, c.s, c.n),
            history=(),
            day_index=0,
            done=cfg.horizon == 0,
        )

    def step(self, state, action):
        """Apply ``action`` (an Action or an index) and advance one day."""
        if state.done:
            raise EpisodeError(f"episode already finished at day {state.day_index}")
        if not isinstance(action, Action):
            action = Action.from_index(action)
        cfg = self.config
        s_new = min(100.0, max(0.0, state.stringency + action.delta))
        c = state.compartments
        trans = np.array([cfg.params.beta * (1.0 - s_new / 100.0)])
        nu = self.nu[state.day_index : state.day_index + 1]
        path, _ = kernels.rk4_path(c.s, c.i, c.r, c.n, cfg.params.gamma, trans, nu)
        s, i, r = (float(v) for v in path[1])
        comp = Compartments(s, i, r, c.n)
        g = self.norm_gdp(s_new)
        re = effective_reproduction(cfg.params, s_new, s, c.n)
        delta = s_new - state.stringency
        hist = (state.history + ((s_new, g, re, delta),))[-cfg.history_length :]
        day = state.day_index + 1
        after = EnvState(comp, s_new, g, re, hist, day, day >= cfg.horizon)
        total, terms = reward(state, after, cfg.reward)
        return StepOutcome(after, total, terms, after.done, day, delta)


def rollout_actions(env, actions):
    """Run a fixed action sequence from reset; returns (outcomes, cumulative reward)."""
    state = env.reset()
    outcomes = []
    for a in actions:
        out = env.step(state, a)
        outcomes.append(out)
        state = out.state
    return outcomes, float(sum(o.reward for o in outcomes))


def replay_historical(env, stringency):
    """Force a historical stringency series through the action set.

    At step ``t`` the target is the day-``t`` value (the day that drives the
    ``t -> t+1`` transition in the fitted model). Each day takes the action
    nearest to the remaining gap, so any shortfall carries into later days.
    Returns ``(outcomes, cumulative reward)``.
    """
    values = stringency.values if isinstance(stringency, StringencySeries) else np.asarray(stringency, float)
    if values.size < env.horizon:
        raise CoverageError(f"stringency covers {values.size} days, horizon needs {env.horizon}")
    state = env.reset()
    outcomes = []
    for t in range(env.horizon):
        out = env.step(state, nearest_action(values[t] - state.stringency))
        outcomes.append(out)
        state = out.state
    return outcomes, float(sum(o.reward for o in outcomes))


def config_from_fit(bundle, fit, gdp_model, reward_cfg=None, history_length=30):
    """Environment config for a bundle, a fitted epidemic model and a GDP model."""
    o = bundle.observed
    return EnvConfig(
        params=fit.params,
        gdp=gdp_model,
        initial=o.initial(),
        initial_stringency=float(bundle.stringency.values[0]),
        horizon=bundle.horizon,
        vaccination=fit.vaccination_schedule(),
        reward=reward_cfg or RewardConfig(),
        history_length=history_length,
        start_date=bundle.date_range[0],
    )
