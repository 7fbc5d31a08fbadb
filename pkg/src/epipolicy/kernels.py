"""Backend selection for the numeric hot loops.

The compiled extension is preferred. Set ``EPIPOLICY_PURE_PYTHON=1`` to force
the fallback (useful for benchmarking and for checking the two agree).
"""

import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("EPIPOLICY_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"


def rk4_path(s0, i0, r0, n, gamma, trans, nu):
    """Daily RK4 path of the lockdown/vaccination SIR system.

    Args:
        s0, i0, r0: initial compartment counts.
        n: total population.
        gamma: recovery rate per day.
        trans: per-day effective transmission ``beta * (1 - s_t / 100)``.
        nu: per-day vaccination rate, same length as ``trans``.

    Returns:
        ``(path, nclamp)`` where ``path`` has shape ``(len(trans) + 1, 3)``
        and ``nclamp`` counts steps that needed the negative-state guard.
    """
    trans = np.ascontiguousarray(trans, dtype=np.float64)
    nu = np.ascontiguousarray(nu, dtype=np.float64)
    return _impl.rk4_path(float(s0), float(i0), float(r0), float(n), float(gamma), trans, nu)


def huber_sum(y, f, delta=1.0):
    """Sum of elementwise Huber losses between two 1-D arrays."""
    y = np.ascontiguousarray(y, dtype=np.float64)
    f = np.ascontiguousarray(f, dtype=np.float64)
    return _impl.huber_sum(y, f, float(delta))


def get_backend(name):
    """Return the raw kernel module for ``name`` ("cython" or "python")."""
    if name == "python":
        return _kernels_py
    from . import _kernels

    return _kernels


def fit_window_nu(s0, i0, r0, n, gamma, trans, obs_s, obs_i, obs_r, seeds, nu_max, options):
    """Best constant vaccination rate over one window (multi-start 1-D Nelder-Mead).

    ``trans`` covers the window's steps; the observation arrays are one
    longer and include the window's first day. ``options`` is a
    ``NelderMeadOptions``. Returns ``(nu, loss, (s, i, r) at window end)``
    with ``nu`` NaN if every seed is infeasible.
    """
    arr = [np.ascontiguousarray(a, dtype=np.float64) for a in (trans, obs_s, obs_i, obs_r, seeds)]
    o = options
    return _impl.fit_window_nu(
        float(s0), float(i0), float(r0), float(n), float(gamma), *arr, float(nu_max),
        o.reflect, o.expand, o.contract, o.shrink, o.rtol, o.atol, o.xrtol, o.xatol,
        int(o.max_iter), o.rel_step, o.zero_step,
    )
