"""Reference implementations used only by the tests.

None of these call into the package's kernels; each recomputes its quantity
by a different method (adaptive ODE solver, permutation resampling, direct
power sums, dynamic programming, brute-force grid search).
"""

import numpy as np
from scipy.integrate import solve_ivp


def sir_reference(s0, i0, r0, n, beta, gamma, stringency=None, nu=None, horizon=0, rtol=1e-11, atol=1e-6):
    """Daily SIR states from an adaptive RK45 solve, one day at a time.

    Stringency and nu are piecewise constant per day, matching the model's
    day-``t``-drives-step-``t`` convention.
    """
    out = np.empty((horizon + 1, 3))
    out[0] = (s0, i0, r0)
    y = np.array([s0, i0, r0], dtype=float)
    for t in range(horizon):
        lock = 1.0 if stringency is None else 1.0 - stringency[t] / 100.0
        v = 0.0 if nu is None else nu[t]

        def rhs(_, x, lock=lock, v=v):
            s, i, _r = x
            force = beta * lock * s * i / n
            return [-force - v * s, force - gamma * i, gamma * i + v * s]

        sol = solve_ivp(rhs, (0.0, 1.0), y, method="RK45", rtol=rtol, atol=atol)
        y = sol.y[:, -1]
        out[t + 1] = y
    return out


def rk4_fine(s0, i0, r0, n, beta, gamma, stringency, nu, horizon, substeps=100):
    """Hand-rolled RK4 with ``substeps`` steps per day (the 100x-finer oracle)."""
    h = 1.0 / substeps
    y = np.array([s0, i0, r0], dtype=float)
    out = [y.copy()]

    def f(x, lock, v):
        s, i, _ = x
        force = beta * lock * s * i / n
        return np.array([-force - v * s, force - gamma * i, gamma * i + v * s])

    for t in range(horizon):
        lock = 1.0 - stringency[t] / 100.0
        v = nu[t]
        for _ in range(substeps):
            k1 = f(y, lock, v)
            k2 = f(y + 0.5 * h * k1, lock, v)
            k3 = f(y + 0.5 * h * k2, lock, v)
            k4 = f(y + h * k3, lock, v)
            y = y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        out.append(y.copy())
    return np.array(out)


def permutation_p_value(x, y, n_perm, seed):
    """Two-sided permutation p-value for Pearson r (fraction of |r_perm| >= |r_obs|)."""
    rng = np.random.default_rng(seed)
    x = np.asarray(x, float) - np.mean(x)
    y = np.asarray(y, float) - np.mean(y)
    denom = np.sqrt((x @ x) * (y @ y))
    r_obs = abs(x @ y) / denom
    hits = 0
    chunk = 10000
    done = 0
    while done < n_perm:
        m = min(chunk, n_perm - done)
        perms = rng.permuted(np.tile(y, (m, 1)), axis=1)
        r = np.abs(perms @ x) / denom
        hits += int(np.count_nonzero(r >= r_obs - 1e-15))
        done += m
    return hits / n_perm


def power_sum(coeffs, s):
    """``a s^3 + b s^2 + c s + d`` evaluated term by term."""
    a, b, c, d = coeffs
    return a * s**3 + b * s**2 + c * s + d


def value_iteration(transitions, rewards, discount, tol=1e-13):
    """Exact Q* for a deterministic finite MDP.

    ``transitions[s][a]`` is the next state, ``rewards[s][a]`` the reward.
    """
    ns, na = len(transitions), len(transitions[0])
    q = np.zeros((ns, na))
    while True:
        v = q.max(axis=1)
        new = np.array([[rewards[s][a] + discount * v[transitions[s][a]] for a in range(na)] for s in range(ns)])
        if np.max(np.abs(new - q)) < tol:
            return new
        q = new


def grid_minimum(f, lo, hi, levels=12, points=41):
    """Successively refined grid search for a 2-D minimiser."""
    lo, hi = np.array(lo, float), np.array(hi, float)
    best = None
    for _ in range(levels):
        xs = np.linspace(lo[0], hi[0], points)
        ys = np.linspace(lo[1], hi[1], points)
        vals = np.array([[f(np.array([x, y])) for y in ys] for x in xs])
        i, j = np.unravel_index(np.argmin(vals), vals.shape)
        best = np.array([xs[i], ys[j]])
        span = (hi - lo) / (points - 1) * 2
        lo, hi = best - span, best + span
    return best
