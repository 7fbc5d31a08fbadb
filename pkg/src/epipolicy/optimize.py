"""Nelder-Mead simplex minimizer and quasi-random multi-start seeding."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SeedError


@dataclass(frozen=True)
class NelderMeadOptions:
    reflect: float = 1.0
    expand: float = 2.0
    contract: float = 0.5
    shrink: float = 0.5
    rtol: float = 1e-8
    atol: float = 1e-14
    xrtol: float = 1e-8
    xatol: float = 1e-12
    max_iter: int = 2000
    # initial simplex edge: relative step, or absolute step for zero coordinates
    rel_step: float = 0.05
    zero_step: float = 2.5e-4


@dataclass(frozen=True)
class OptimizeResult:
    x: np.ndarray
    fun: float
    iterations: int
    converged: bool


def _initial_simplex(x0, opts, step):
    k = x0.size
    simplex = np.tile(x0, (k + 1, 1))
    for j in range(k):
        if step is not None:
            h = step[j]
        elif x0[j] != 0:
            h = opts.rel_step * x0[j]
        else:
            h = opts.zero_step
        simplex[j + 1, j] += h
    return simplex


def nelder_mead(objective, x0, options=None, step=None):
    """Minimize ``objective`` from ``x0``.

    Infeasible points should be reported by the objective as ``+inf``; the
    simplex then simply contracts away from them.

    Convergence is declared when the spread of function values over the
    simplex is at most ``rtol * |f_best| + atol`` and every vertex lies within
    ``xrtol * |x_best| + xatol`` of the best one, coordinate-wise. The second
    test stops a simplex that straddles the minimum with equal values from
    being reported as converged.

    Args:
        objective: callable taking a 1-D float array.
        x0: starting point (k >= 1).
        options: NelderMeadOptions.
        step: optional per-coordinate initial simplex edge lengths.

    Raises:
        SeedError: ``objective(x0)`` is not finite.
    """
    opts = options or NelderMeadOptions()
    x0 = np.atleast_1d(np.asarray(x0, dtype=np.float64))
    if x0.ndim != 1 or x0.size < 1:
        raise DomainError("x0 must be a non-empty vector")
    f0 = float(objective(x0))
    if not math.isfinite(f0):
        raise SeedError(f"objective is not finite at the seed {x0.tolist()}")

    k = x0.size
    simplex = _initial_simplex(x0, opts, step)
    fvals = np.empty(k + 1)
    fvals[0] = f0
    for j in range(1, k + 1):
        fvals[j] = objective(simplex[j])

    it = 0
    converged = False
    while True:
        order = np.argsort(fvals, kind="stable")
        simplex = simplex[order]
        fvals = fvals[order]
        if fvals[-1] - fvals[0] <= opts.rtol * abs(fvals[0]) + opts.atol:
            xtol = opts.xrtol * np.abs(simplex[0]) + opts.xatol
            if np.all(np.abs(simplex[1:] - simplex[0]) <= xtol):
                converged = True
                break
        if it >= opts.max_iter:
            break
        it += 1

        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        xr = centroid + opts.reflect * (centroid - worst)
        fr = objective(xr)
        if fr < fvals[0]:
            xe = centroid + opts.expand * (xr - centroid)
            fe = objective(xe)
            if fe < fr:
                simplex[-1], fvals[-1] = xe, fe
            else:
                simplex[-1], fvals[-1] = xr, fr
            continue
        if fr < fvals[-2]:
            simplex[-1], fvals[-1] = xr, fr
            continue
        if fr < fvals[-1]:
            xc = centroid + opts.contract * (xr - centroid)
            fc = objective(xc)
            if fc <= fr:
                simplex[-1], fvals[-1] = xc, fc
                continue
        else:
            xc = centroid + opts.contract * (worst - centroid)
            fc = objective(xc)
            if fc < fvals[-1]:
                simplex[-1], fvals[-1] = xc, fc
                continue
        best = simplex[0]
        for j in range(1, k + 1):
            simplex[j] = best + opts.shrink * (simplex[j] - best)
            fvals[j] = objective(simplex[j])

    return OptimizeResult(simplex[0].copy(), float(fvals[0]), it, converged)


def _radical_inverse(index, base):
    inv, f = 0.0, 1.0 / base
    while index > 0:
        inv += f * (index % base)
        index //= base
        f /= base
    return inv


_PRIMES = (2, 3, 5, 7, 11, 13)


def halton(count, dim, skip=1):
    """Unscrambled Halton points in the unit cube, skipping the origin."""
    if dim > len(_PRIMES):
        raise DomainError(f"halton supports up to {len(_PRIMES)} dimensions")
    return np.array(
        [[_radical_inverse(i + skip, _PRIMES[d]) for d in range(dim)] for i in range(count)]
    )


def multi_start(objective, lower, upper, n_starts=8, options=None):
    """Run Nelder-Mead from Halton seeds scaled into ``[lower, upper]``.

    Returns ``(best, all_results)``; ties are broken by seed index. Seeds at
    which the objective is not finite are skipped.
    """
    lower = np.asarray(lower, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    seeds = lower + halton(n_starts, lower.size) * (upper - lower)
    results = []
    for x0 in seeds:
        try:
            results.append(nelder_mead(objective, x0, options))
        except SeedError:
            continue
    if not results:
        raise SeedError("no multi-start seed gave a finite objective")
    best = min(range(len(results)), key=lambda j: (results[j].fun, j))
    return results[best], results
