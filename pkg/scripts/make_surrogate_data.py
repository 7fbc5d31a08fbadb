"""Regenerate the bundled synthetic surrogate CSVs under src/epipolicy/data/.

The surrogate stands in for the India/Mexico/Brazil snapshots, which are not
redistributable here. It is built to match the reference summary statistics
of the India stringency series (915 days, first value 96.3, last and minimum
31.48, mean 61.965) and is driven by the lockdown + time-varying vaccination
SIR model with beta=0.463, gamma=0.114.

    python scripts/make_surrogate_data.py
"""

import csv
import datetime as dt
from pathlib import Path

import numpy as np

from epipolicy.model import Compartments, SirParams, StringencySeries, VaccinationSchedule, integrate
from epipolicy.econ import REFERENCE_IND

OUT = Path(__file__).resolve().parents[1] / "src" / "epipolicy" / "data"
START = dt.date(2020, 5, 1)
DAYS = 915
N_IND = 1.38e9
BETA, GAMMA = 0.463, 0.114

# Target effective reproduction number during the epidemic phase (day, R_e).
IND_RE_TARGET = [
    (0, 0.15), (18, 0.2), (30, 1.55), (105, 1.52), (120, 0.95), (280, 0.97),
    (292, 1.42), (345, 1.4), (362, 0.45), (470, 0.45),
]
EPIDEMIC_DAYS = 470
MEX_KNOTS = [(0, 82), (60, 72), (150, 70), (250, 76), (330, 66), (420, 58), (520, 52), (640, 48), (760, 38), (914, 30)]
BRA_KNOTS = [(0, 78), (50, 80), (150, 68), (260, 62), (330, 74), (400, 66), (520, 52), (640, 44), (760, 34), (914, 24)]


def step_series(knots, rng, mean_step=12, jitter=2.0):
    """Step-like daily series following a piecewise-linear skeleton."""
    days = np.arange(DAYS)
    kx, ky = zip(*knots)
    base = np.interp(days, kx, ky)
    out = np.empty(DAYS)
    t = 0
    while t < DAYS:
        length = int(rng.integers(mean_step // 2, mean_step * 2))
        level = base[t] + rng.normal(0, jitter)
        out[t : t + length] = level
        t += length
    return out, base


def hold_index(size, rng, mean_step=10):
    """Index map holding values over random-length runs (policy-like jumps)."""
    idx = np.empty(size, dtype=int)
    t = 0
    while t < size:
        length = int(rng.integers(mean_step // 2, mean_step * 2))
        idx[t : t + length] = t
        t += length
    return idx


def late_decline(s_from, idx, target_sum, lo):
    """Held decline from ``s_from`` to ``lo`` whose values sum to ``target_sum``."""
    u = np.linspace(1.0, 0.0, idx.size)
    a, b = 0.02, 50.0
    for _ in range(200):
        q = np.sqrt(a * b)
        curve = (lo + (s_from - lo) * u**q)[idx]
        curve[-1] = lo
        a, b = (q, b) if curve.sum() > target_sum else (a, q)
    return curve


def true_nu():
    """Daily vaccination rate: zero before mid-January 2021, ramping to a sustained 0.0015.

    Chosen among campaign-shaped candidates as the one whose lockdown-only fit
    lands nearest the reference lockdown estimates.
    """
    kx = [0, 260, 380, DAYS - 2]
    ky = [0.0, 0.0, 0.0015, 0.0015]
    return np.interp(np.arange(DAYS - 1), kx, ky)


def india_stringency(rng, nu):
    """Stringency that realises the target R_e path, then a late decline fixing the mean."""
    r0 = BETA / GAMMA
    target = np.interp(np.arange(EPIDEMIC_DAYS), *zip(*IND_RE_TARGET))
    s_frac = 1.0
    raw = np.empty(EPIDEMIC_DAYS)
    for t in range(EPIDEMIC_DAYS):
        raw[t] = np.clip(100.0 * (1.0 - target[t] / (r0 * s_frac)), 31.48, 96.3)
        s_frac *= np.exp(-nu[t])  # infections deplete S far less than vaccination here
    early = np.round(raw[hold_index(EPIDEMIC_DAYS, rng)], 2)
    early[0] = 96.3
    idx = hold_index(DAYS - EPIDEMIC_DAYS, rng, 14)
    late = late_decline(early[-1], idx, 61.96505 * DAYS - early.sum(), 31.48)
    return np.concatenate([early, np.round(late, 2)])


def simulate_india(s_values, nu):
    init = Compartments(N_IND - 60_000 - 40_000, 60_000, 40_000, N_IND)
    series = StringencySeries(START, s_values)
    return integrate(init, SirParams(BETA, GAMMA), DAYS - 1, series, VaccinationSchedule(1, nu))


def ar1(rng, n, sigma, rho=0.9):
    e = rng.normal(0, sigma * np.sqrt(1 - rho**2), n)
    out = np.empty(n)
    out[0] = rng.normal(0, sigma)
    for k in range(1, n):
        out[k] = rho * out[k - 1] + e[k]
    return out


def quarters():
    q = []
    y, k = 2020, 2
    while (y, k) <= (2022, 4):
        q.append((y, k))
        k += 1
        if k == 5:
            y, k = y + 1, 1
    return q


def quarter_of(day):
    d = START + dt.timedelta(days=int(day))
    return d.year, (d.month - 1) // 3 + 1


def quarterly_gdp(s_values, coeffs, rng, noise):
    """Quarterly index: the cubic at the quarter's mean stringency plus noise."""
    a, b, c, d = coeffs
    out = []
    days = np.arange(DAYS)
    qs = np.array([quarter_of(t) for t in days])
    for y, k in quarters():
        mask = (qs[:, 0] == y) & (qs[:, 1] == k)
        s = s_values[mask].mean()
        val = a * s**3 + b * s**2 + c * s + d + rng.normal(0, noise)
        out.append((f"{y}-Q{k}", round(float(val), 4)))
    return out


def main():
    rng = np.random.default_rng(20240501)
    nu = true_nu()
    s_ind = india_stringency(rng, nu)
    s_mex = np.clip(np.round(step_series(MEX_KNOTS, rng)[0], 2), 0, 100)
    s_bra = np.clip(np.round(step_series(BRA_KNOTS, rng)[0], 2), 0, 100)

    traj = simulate_india(s_ind, nu)
    i_noisy = traj.i * np.exp(ar1(rng, DAYS, 0.04))
    r_noisy = traj.r * np.exp(ar1(rng, DAYS, 0.002, rho=0.98))
    total = np.round(i_noisy + r_noisy)
    recovered = np.round(r_noisy)

    OUT.mkdir(parents=True, exist_ok=True)
    with open(OUT / "owid_stringency_subset.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iso_code", "location", "date", "stringency_index"])
        for iso, loc, vals in (("IND", "India", s_ind), ("MEX", "Mexico", s_mex), ("BRA", "Brazil", s_bra)):
            for t, v in enumerate(vals):
                w.writerow([iso, loc, (START + dt.timedelta(days=t)).isoformat(), f"{v:.2f}"])

    with open(OUT / "worldometer_ind.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["date", "total_cases", "total_recovered"])
        for t in range(DAYS):
            w.writerow([(START + dt.timedelta(days=t)).isoformat(), int(total[t]), int(recovered[t])])

    ref = (REFERENCE_IND.a, REFERENCE_IND.b, REFERENCE_IND.c, REFERENCE_IND.d)
    gdp = {
        "IND": quarterly_gdp(s_ind, ref, rng, 0.005),
        "MEX": quarterly_gdp(s_mex, (0.0, -4e-4, -0.05, 101.0), rng, 0.3),
        "BRA": quarterly_gdp(s_bra, (0.0, -6e-4, 0.0, 100.5), rng, 0.3),
    }
    with open(OUT / "oecd_gdp_quarterly.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["LOCATION", "TIME", "Value"])
        for iso, rows in gdp.items():
            for q, v in rows:
                w.writerow([iso, q, f"{v:.4f}"])

    print("stringency mean/std/min/max", s_ind.mean(), s_ind.std(), s_ind.min(), s_ind.max())
    print("peak i_prop", traj.i.max() / N_IND, "at day", int(traj.i.argmax()))
    print("final s_prop", traj.s[-1] / N_IND)


if __name__ == "__main__":
    main()
