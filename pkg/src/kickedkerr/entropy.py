"""Spectral-entropy indicator of irregular negativity dynamics.

The per-kick series delta_n(t) is Fourier transformed over a window
[t_min, t_max), the power spectrum |F|^2 is normalized to unit sum, and
its Shannon entropy E = -sum P ln P is the indicator: 0 for a constant
series, ln(window length) for spectrally flat changes.  Sweeping E over
the pulse strength maps out the regular (smooth E) and chaotic
(irregular E) regions.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import (IntegrationDiverged, KickSeriesRecord, ModelParams,
                       run_kicked_evolution)
from .fock import TruncationError
from .tsa import Series
from .wigner import DEFAULT_POINTS, MassDefect

WORKERS_ENV = "KICKEDKERR_WORKERS"
DEFAULT_WINDOW = (50, 500)   # drop the startup transient, keep the rest


class WindowTooShort(Exception):
    """The transform window holds fewer than 16 samples."""


@dataclass
class PowerSpectrum:
    frequencies: np.ndarray = field(repr=False)   # radians per kick period
    p_normalized: np.ndarray = field(repr=False)
    degenerate: bool = False   # all-zero window: no mass to normalize


@dataclass
class EntropySweepData:
    epsilons: np.ndarray
    entropies: np.ndarray = field(repr=False)
    ok: np.ndarray = field(repr=False)
    errors: list = field(repr=False)
    metadata: dict = field(default_factory=dict)


def power_spectrum(s: Series, t_min: int, t_max: int) -> PowerSpectrum:
    """Normalized DFT power of the window values[t_min:t_max]."""
    if t_min < 0 or t_max > len(s) or t_max - t_min < 16:
        raise WindowTooShort(
            f"window [{t_min}, {t_max}) invalid for series of length {len(s)}")
    w = s.values[t_min:t_max]
    f = np.fft.fft(w)
    p = np.abs(f) ** 2
    total = p.sum()
    freqs = 2.0 * np.pi * np.fft.fftfreq(len(w))
    if total == 0.0:
        return PowerSpectrum(frequencies=freqs, p_normalized=p, degenerate=True)
    return PowerSpectrum(frequencies=freqs, p_normalized=p / total)


def spectral_entropy(ps: PowerSpectrum) -> float:
    """Shannon entropy of the normalized spectrum, with 0 ln 0 := 0."""
    if ps.degenerate:
        return 0.0
    p = ps.p_normalized
    nz = p[p > 0.0]
    return float(-(nz * np.log(nz)).sum())


def normalized_entropy(ps: PowerSpectrum) -> float:
    """Entropy divided by its maximum ln(bins); in [0, 1]."""
    bins = len(ps.p_normalized)
    if bins < 2:
        return 0.0
    return spectral_entropy(ps) / float(np.log(bins))


def series_entropy(values: np.ndarray, window: tuple[int, int]) -> float:
    return spectral_entropy(power_spectrum(Series(values), *window))


def resolve_workers(workers: int | None) -> int:
    if workers is not None:
        return max(1, workers)
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def _sweep_one(args) -> tuple[int, float, str | None]:
    i, params, window, grid_points, guard_tol = args
    try:
        rec = run_kicked_evolution(params, grid_points=grid_points,
                                   cutoff_guard_tol=guard_tol)
        return i, series_entropy(rec.delta_n, window), None
    except (TruncationError, IntegrationDiverged, MassDefect) as exc:
        return i, float("nan"), f"{type(exc).__name__}: {exc}"


def entropy_sweep(eps_grid: np.ndarray, base: ModelParams,
                  window: tuple[int, int] = DEFAULT_WINDOW,
                  workers: int | None = None,
                  grid_points: int = DEFAULT_POINTS,
                  cutoff_guard_tol: float = 1e-6) -> EntropySweepData:
    """One entropy value per pulse strength; runs are independent.

    Failed runs are flagged (NaN entropy) and do not abort the sweep.
    Results are assembled in grid order, so worker scheduling cannot
    change the output.
    """
    eps_grid = np.asarray(eps_grid, dtype=np.float64)
    if eps_grid.size == 0:
        raise ValueError("epsilon grid is empty")
    if window[1] > base.kicks:
        raise WindowTooShort(f"window {window} exceeds kicks={base.kicks}")
    jobs = [(i, replace(base, epsilon=float(e)), window, grid_points,
             cutoff_guard_tol)
            for i, e in enumerate(eps_grid)]
    entropies = np.full(eps_grid.size, np.nan)
    errors: list = [None] * eps_grid.size
    n_workers = resolve_workers(workers)
    if n_workers == 1:
        results = map(_sweep_one, jobs)
        for i, e_val, err in results:
            entropies[i] = e_val
            errors[i] = err
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            for i, e_val, err in pool.map(_sweep_one, jobs):
                entropies[i] = e_val
                errors[i] = err
    ok = ~np.isnan(entropies)
    meta = dict(kicks=base.kicks, dim=base.dim, t_min=window[0], t_max=window[1],
                chi=base.chi, gamma=base.gamma, period=base.period,
                grid_points=grid_points, cutoff_guard_tol=cutoff_guard_tol)
    return EntropySweepData(epsilons=eps_grid.copy(), entropies=entropies,
                            ok=ok, errors=errors, metadata=meta)


def band_mean_abs_diff(data: EntropySweepData, lo: float, hi: float) -> float:
    """Mean |E(eps_{i+1}) - E(eps_i)| over adjacent pairs inside [lo, hi]."""
    e = data.epsilons
    inside = (e >= lo - 1e-12) & (e <= hi + 1e-12) & data.ok
    pair = inside[:-1] & inside[1:]
    if not pair.any():
        raise ValueError(f"no adjacent sweep points inside [{lo}, {hi}]")
    diffs = np.abs(np.diff(data.entropies))
    return float(diffs[pair].mean())
