import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from epipolicy.econ import GdpModel
from epipolicy.errors import ConfigurationError, DomainError, EpisodeError
from epipolicy.env import (
    ACTION_DELTAS,
    Action,
    EnvConfig,
    EnvState,
    Environment,
    RewardConfig,
    load_env_config,
    nearest_action,
    replay_historical,
    reward,
    rollout_actions,
    save_env_config,
)
from epipolicy.model import Compartments, SirParams, StringencySeries, integrate

CFG = RewardConfig()


def _state(re=1.0, g=0.5, i_prop=0.001, stringency=50.0):
    n = 1e6
    i = i_prop * n
    return EnvState(Compartments(n - i, i, 0.0, n), stringency, g, re)


def test_action_set():
    assert len(ACTION_DELTAS) == 7
    assert [Action.from_index(k).delta for k in range(7)] == [-10, -5, -2.5, 0, 2.5, 5, 10]
    assert Action(2.5).index == 4
    with pytest.raises(DomainError):
        Action(3.0)
    with pytest.raises(DomainError):
        Action.from_index(7)


def test_nearest_action():
    assert nearest_action(7.4).delta == 5.0
    assert nearest_action(7.5).delta == 5.0  # tie goes to the smaller move
    assert nearest_action(-40).delta == -10.0
    assert nearest_action(1.0).delta == 0.0


def test_reward_point_examples():
    total, terms = reward(_state(stringency=50), _state(re=2.0, i_prop=0.001, stringency=50), CFG)
    assert total == 10.0 and terms == (-40.0, 50.0, 0.0)
    total, _ = reward(_state(stringency=40), _state(re=1.0, g=0.5, i_prop=0.001, stringency=50), CFG)
    assert abs(total - 30.0) <= 1e-12
    total, _ = reward(_state(stringency=50), _state(re=1.3, g=1.0, i_prop=0.004, stringency=50), CFG)
    assert total == -1900.0


def test_reward_boundaries():
    before = _state(stringency=50)
    at_high = reward(before, _state(re=1.5, g=0.5), CFG)[1][0]
    assert at_high == 100 * 0.5
    at_mid = reward(before, _state(re=1.25, g=0.5), CFG)[1][0]
    assert at_mid == 100 * 0.5
    assert reward(before, _state(re=np.nextafter(1.5, 2), g=0.5), CFG)[1][0] == pytest.approx(-30.0)
    assert reward(before, _state(re=np.nextafter(1.25, 0), g=0.5), CFG)[1][0] == 200 * 0.5
    assert reward(before, _state(i_prop=0.003), CFG)[1][1] == 50.0


@given(
    re=st.floats(0.0, 5.0), g=st.floats(0.0, 1.0), i=st.floats(0.0, 0.01),
    s0=st.floats(0.0, 100.0), s1=st.floats(0.0, 100.0),
)
def test_reward_is_sum_of_terms(re, g, i, s0, s1):
    total, terms = reward(_state(stringency=s0), _state(re=re, g=g, i_prop=i, stringency=s1), CFG)
    assert total == terms[0] + terms[1] + terms[2]


def test_reward_config_validation():
    with pytest.raises(ConfigurationError):
        RewardConfig(re_high=1.0, re_mid=1.25)
    with pytest.raises(ConfigurationError):
        RewardConfig.from_dict({"bogus": 1})
    assert RewardConfig.from_dict({"infect_threshold": 0.01}).infect_threshold == 0.01


@pytest.fixture(scope="module")
def env(env_config):
    return Environment(env_config)


def test_reset_is_deterministic_and_matches_data(env, bundle):
    a, b = env.reset(), env.reset()
    assert a == b
    o = bundle.observed
    assert a.i_prop == o.i_obs[0] / o.n
    assert a.history == () and a.history_array(30).shape == (30, 4)
    assert not a.history_array(30).any()


def test_horizon_zero_starts_done(env_config):
    e = Environment(dataclasses.replace(env_config, horizon=0))
    s = e.reset()
    assert s.done
    with pytest.raises(EpisodeError):
        e.step(s, 3)


def test_unconfigured_environment():
    with pytest.raises(ConfigurationError):
        Environment(None)


def test_step_clamps_and_penalises_realised_change(env_config):
    e = Environment(dataclasses.replace(env_config, initial_stringency=96.3))
    out = e.step(e.reset(), Action(10.0))
    assert out.state.stringency == 100.0
    assert out.reward_terms[2] == pytest.approx(-12 * 3.7, abs=1e-12)
    assert out.delta == pytest.approx(3.7)
    hold = e.step(e.reset(), Action(0.0))
    assert hold.reward_terms[2] == 0.0


def test_step_all_susceptible():
    n = 1e6
    cfg = EnvConfig(
        params=SirParams(0.4, 0.1),
        gdp=GdpModel(0.0, 0.0, -0.05, 100.0),
        initial=Compartments(n, 0.0, 0.0, n),
        initial_stringency=40.0,
        horizon=3,
    )
    out = Environment(cfg).step(Environment(cfg).reset(), Action(10.0))
    assert out.state.r_eff == pytest.approx(0.4 / 0.1 * (1 - 50 / 100))
    assert out.reward_terms[1] == 50.0


def test_transition_matches_integrate(env, env_config):
    state = env.reset()
    out = env.step(state, Action(-5.0))
    s_new = state.stringency - 5.0
    sched = env_config.vaccination
    traj = integrate(
        state.compartments,
        env_config.params,
        1,
        StringencySeries(env_config.start_date, np.array([s_new])),
        sched,
    )
    assert out.state.compartments == traj[1]


def test_history_is_bounded_and_ordered(env_config):
    e = Environment(dataclasses.replace(env_config, history_length=5))
    s = e.reset()
    for k in range(8):
        s = e.step(s, k % 7).state
    assert len(s.history) == 5
    assert s.history[-1][0] == s.stringency
    arr = s.history_array(8)
    assert not arr[:3].any() and np.array_equal(arr[3:], np.array(s.history))


def test_state_proportions_sum_to_one(env):
    s = env.reset()
    for k in range(50):
        s = env.step(s, (k * 3) % 7).state
        assert abs(s.s_prop + s.i_prop + s.r_prop - 1) <= 1e-6


def test_determinism_of_action_sequences(env):
    actions = [(k * 5) % 7 for k in range(100)]
    a, ra = rollout_actions(env, actions)
    b, rb = rollout_actions(env, actions)
    assert a == b and ra == rb


def test_episode_ends_at_horizon(env_config):
    e = Environment(dataclasses.replace(env_config, horizon=4))
    outs, _ = rollout_actions(e, [3, 3, 3, 3])
    assert [o.done for o in outs] == [False, False, False, True]
    with pytest.raises(EpisodeError):
        e.step(outs[-1].state, 3)


def test_replay_constant_series(env, env_config):
    series = np.full(env.horizon, env_config.initial_stringency)
    outs, total = replay_historical(env, series)
    assert all(o.reward_terms[2] == 0.0 for o in outs)
    assert total == pytest.approx(sum(o.reward for o in outs))


def test_replay_tracks_target_and_penalises_outbreaks(env, bundle):
    outs, total = replay_historical(env, bundle.stringency)
    s = np.array([o.state.stringency for o in outs])
    assert np.abs(s - bundle.stringency.values[: env.horizon]).max() < 30
    hot = [o for o in outs if o.state.i_prop > env.config.reward.infect_threshold]
    assert all(o.reward_terms[1] == -2000.0 for o in hot)
    assert len(outs) == env.horizon


def test_env_config_round_trip(env_config, tmp_path):
    save_env_config(env_config, tmp_path / "e.json")
    back = load_env_config(tmp_path / "e.json")
    assert back.to_dict() == env_config.to_dict()
    (tmp_path / "bad.json").write_text('{"format": "epipolicy-env", "version": 1}')
    with pytest.raises(ConfigurationError):
        load_env_config(tmp_path / "bad.json")


def test_with_reward_override(env_config):
    cfg = env_config.with_reward(infect_penalty=-10.0)
    assert cfg.reward.infect_penalty == -10.0
    with pytest.raises(ConfigurationError):
        env_config.with_reward(nope=1.0)
