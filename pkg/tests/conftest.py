import os

import pytest
import torch
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

torch.set_num_threads(1)

_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_report():
    """Collects one line per acceptance criterion; printed in the terminal summary."""
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def bundle():
    from epipolicy.data import default_bundle

    return default_bundle()


@pytest.fixture(scope="session")
def timed_model_fits(bundle):
    """Simple, lockdown, constant-nu and final fits on the bundled data, plus wall time."""
    import time

    from epipolicy.calibration import fit_final, fit_lockdown_sir, fit_lockdown_vax_sir, fit_simple_sir

    t0 = time.perf_counter()
    obs, st = bundle.observed, bundle.stringency
    simple = fit_simple_sir(obs)
    lockdown = fit_lockdown_sir(obs, st)
    const_nu = fit_lockdown_vax_sir(obs, st)
    final = fit_final(obs, st, const_nu.params.beta, const_nu.params.gamma)
    fits = {"simple": simple, "lockdown": lockdown, "lockdown_nu": const_nu, "final": final}
    return fits, time.perf_counter() - t0


@pytest.fixture(scope="session")
def model_fits(timed_model_fits):
    return timed_model_fits[0]


@pytest.fixture(scope="session")
def gdp_model(bundle):
    from epipolicy.econ import fit_cubic, quarterly_pairs

    return fit_cubic(*quarterly_pairs(bundle.stringency.start_date, bundle.stringency.values, bundle.gdp_quarterly))


@pytest.fixture(scope="session")
def env_config(bundle, model_fits, gdp_model):
    from epipolicy.env import config_from_fit

    return config_from_fit(bundle, model_fits["final"].fit, gdp_model)


@pytest.fixture(scope="session")
def trained(env_config):
    """Default TrainConfig, seed 0: (QFunction, log, seconds)."""
    import time

    from epipolicy.agent import TrainConfig, train
    from epipolicy.env import Environment

    t0 = time.perf_counter()
    q, log = train(Environment(env_config), TrainConfig(seed=0))
    return q, log, time.perf_counter() - t0
