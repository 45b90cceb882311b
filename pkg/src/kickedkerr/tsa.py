"""Nonlinear time-series analysis of the per-kick negativity series.

Pipeline: estimate the embedding delay from the first minimum of the
mutual-information function, the embedding dimension from false nearest
neighbours, reconstruct the trajectory by time-delay embedding, build the
recurrence matrix, and quantify its diagonal/vertical line structure
(recurrence quantification analysis).

The Theiler convention used throughout: matrix entries with
|i - j| < max(theiler, 1) are excluded from all counts, i.e. the main
diagonal is always excluded and theiler > 1 widens the excluded band.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

MIN_SERIES_LEN = 50
FNN_RATIO_TOL = 10.0     # Kennel distance-ratio threshold
FNN_SIZE_TOL = 2.0       # loneliness criterion, in units of the series std
FNN_THRESHOLD = 0.01     # embedding accepted when the FNN fraction drops below


class SeriesTooShort(Exception):
    """The series does not support the requested estimation."""


@dataclass(frozen=True)
class Series:
    """Scalar time series sampled once per kick (dt in time units)."""

    values: np.ndarray
    dt: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class EmbeddedTrajectory:
    points: np.ndarray   # (count, d)
    tau: int
    d: int


@dataclass
class RecurrenceMatrix:
    n: int
    bits: np.ndarray = field(repr=False)   # uint8, symmetric, unit diagonal
    eps_thr: float = 0.0
    norm_kind: str = "euclidean"


@dataclass
class RQAReport:
    recurrence_rate: float
    det: float
    l_max: int
    l_avg: float
    diag_histogram: dict[int, int]
    lam: float
    tt: float
    vert_histogram: dict[int, int]
    l_min: int
    theiler: int


@dataclass(frozen=True)
class DelayEstimate:
    tau: int
    found_minimum: bool
    mi: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class EmbeddingEstimate:
    dim: int
    converged: bool
    fractions: np.ndarray = field(repr=False)


def _require_length(s: Series, needed: int, what: str) -> None:
    if len(s) < needed:
        raise SeriesTooShort(f"{what} needs at least {needed} samples, got {len(s)}")


def freedman_diaconis_bins(values: np.ndarray, floor: int = 8) -> int:
    """Data-adaptive histogram bin count with a floor of 8 bins."""
    v = np.asarray(values, dtype=np.float64)
    iqr = float(np.subtract(*np.percentile(v, [75, 25])))
    rng = float(v.max() - v.min())
    if iqr <= 0.0 or rng <= 0.0:
        return floor
    width = 2.0 * iqr / len(v) ** (1.0 / 3.0)
    return max(floor, int(math.ceil(rng / width)))


def mutual_information(s: Series, max_lag: int, bins: int | None = None) -> np.ndarray:
    """Histogram mutual information I(lag) in nats for lag = 0 .. max_lag.

    I(0) equals the entropy of the marginal distribution.  A constant
    series (single occupied bin) yields 0 for every lag by convention.
    """
    _require_length(s, MIN_SERIES_LEN, "mutual_information")
    if len(s) <= max_lag + 10:
        raise SeriesTooShort(f"series of length {len(s)} too short for max_lag={max_lag}")
    v = s.values
    if v.max() == v.min():
        return np.zeros(max_lag + 1)
    nb = bins if bins is not None else freedman_diaconis_bins(v)
    edges = np.linspace(v.min(), v.max(), nb + 1)
    out = np.empty(max_lag + 1)
    for lag in range(max_lag + 1):
        x = v[:len(v) - lag] if lag else v
        y = v[lag:] if lag else v
        joint, _, _ = np.histogram2d(x, y, bins=[edges, edges])
        joint /= joint.sum()
        px = joint.sum(axis=1)
        py = joint.sum(axis=0)
        nzi, nzj = np.nonzero(joint)
        p = joint[nzi, nzj]
        out[lag] = float(np.sum(p * np.log(p / (px[nzi] * py[nzj]))))
    return out


def estimate_delay(s: Series, max_lag: int | None = None,
                   bins: int | None = None, horizon: int = 5) -> DelayEstimate:
    """First local minimum of the mutual information; 1 with a flag if none.

    A candidate minimum only counts when no lower value follows within
    `horizon` lags: this rejects the jitter-induced dips of monotonically
    decaying MI curves (where the estimate keeps falling afterwards)
    without affecting genuine minima.
    """
    if max_lag is None:
        max_lag = min(50, len(s) // 4)
    mi = mutual_information(s, max_lag, bins)
    for lag in range(1, max_lag):
        if mi[lag] < mi[lag - 1] and mi[lag] <= mi[lag + 1]:
            ahead = mi[lag + 1:min(lag + 1 + horizon, max_lag + 1)]
            if ahead.size == 0 or ahead.min() >= mi[lag]:
                return DelayEstimate(tau=lag, found_minimum=True, mi=mi)
    return DelayEstimate(tau=1, found_minimum=False, mi=mi)


def embed(s: Series, tau: int, d: int) -> EmbeddedTrajectory:
    """Time-delay embedding x_i = (s_i, s_{i+tau}, ..., s_{i+(d-1)tau})."""
    if tau < 1 or d < 1:
        raise ValueError("tau and d must be >= 1")
    count = len(s) - (d - 1) * tau
    if count < 1:
        raise SeriesTooShort(f"cannot embed {len(s)} samples with d={d}, tau={tau}")
    v = s.values
    pts = np.empty((count, d))
    for j in range(d):
        pts[:, j] = v[j * tau:j * tau + count]
    return EmbeddedTrajectory(points=pts, tau=tau, d=d)


def false_nearest_neighbors(s: Series, tau: int, max_dim: int) -> np.ndarray:
    """Fraction of false nearest neighbours for d = 1 .. max_dim.

    A neighbour is false when adding the (d+1)-th delay coordinate either
    stretches the pair by more than FNN_RATIO_TOL relative to its distance
    in d dimensions, or pushes the new distance beyond FNN_SIZE_TOL series
    standard deviations (loneliness criterion).
    """
    _require_length(s, MIN_SERIES_LEN, "false_nearest_neighbors")
    v = s.values
    sigma = float(v.std())
    fractions = np.empty(max_dim)
    for d in range(1, max_dim + 1):
        count = len(v) - d * tau   # points that still have a (d+1)-th coordinate
        if count < 2:
            raise SeriesTooShort(f"series too short for FNN at d={d}, tau={tau}")
        tr = embed(s, tau, d)
        pts = tr.points[:count]
        tree = cKDTree(pts)
        dist, idx = tree.query(pts, k=2)
        rd = dist[:, 1]
        nbr = idx[:, 1]
        extra = np.abs(v[np.arange(count) + d * tau] - v[nbr + d * tau])
        # floor against exact/near duplicates (e.g. strictly periodic data):
        # a ratio of round-off by round-off carries no geometric information
        floor = 1e-8 * sigma if sigma > 0 else 1e-300
        ratio = extra / np.maximum(rd, floor)
        rd1 = np.sqrt(rd ** 2 + extra ** 2)
        false = (ratio > FNN_RATIO_TOL)
        if sigma > 0:
            false |= (rd1 / sigma > FNN_SIZE_TOL)
        fractions[d - 1] = float(false.mean())
    return fractions


def estimate_embedding_dim(s: Series, tau: int, max_dim: int = 16,
                           threshold: float = FNN_THRESHOLD) -> EmbeddingEstimate:
    """Smallest dimension with FNN fraction below `threshold` (capped)."""
    fr = false_nearest_neighbors(s, tau, max_dim)
    below = np.nonzero(fr < threshold)[0]
    if below.size:
        return EmbeddingEstimate(dim=int(below[0]) + 1, converged=True, fractions=fr)
    return EmbeddingEstimate(dim=max_dim, converged=False, fractions=fr)


def _distances(tr: EmbeddedTrajectory, norm_kind: str) -> np.ndarray:
    metric = {"euclidean": "euclidean", "max": "chebyshev"}.get(norm_kind)
    if metric is None:
        raise ValueError(f"unknown norm {norm_kind!r} (use 'euclidean' or 'max')")
    return cdist(tr.points, tr.points, metric=metric)


def recurrence_matrix(tr: EmbeddedTrajectory, eps_thr: float,
                      norm_kind: str = "euclidean") -> RecurrenceMatrix:
    """R_ij = 1 iff ||x_i - x_j|| <= eps_thr."""
    if eps_thr <= 0:
        raise ValueError("eps_thr must be positive")
    dist = _distances(tr, norm_kind)
    bits = (dist <= eps_thr).astype(np.uint8)
    return RecurrenceMatrix(n=bits.shape[0], bits=bits, eps_thr=eps_thr,
                            norm_kind=norm_kind)


def threshold_for_recurrence_rate(tr: EmbeddedTrajectory, rate: float,
                                  norm_kind: str = "euclidean",
                                  theiler: int = 1) -> float:
    """Smallest threshold achieving at least the target recurrence rate.

    The rate is counted over pairs outside the Theiler band, which makes
    DET values comparable across series.
    """
    if not 0 < rate < 1:
        raise ValueError("rate must lie in (0, 1)")
    dist = _distances(tr, norm_kind)
    n = dist.shape[0]
    i, j = np.indices((n, n))
    off = np.abs(i - j) >= max(theiler, 1)
    d = np.sort(dist[off])
    k = max(int(math.ceil(rate * d.size)) - 1, 0)
    return float(d[k])


def _excluded_band(theiler: int) -> int:
    return max(theiler, 1)


def _line_lengths(bits_1d: np.ndarray) -> list[int]:
    """Lengths of maximal runs of ones in a 0/1 vector."""
    if bits_1d.size == 0:
        return []
    padded = np.concatenate(([0], bits_1d, [0]))
    diff = np.diff(padded.astype(np.int64))
    starts = np.nonzero(diff == 1)[0]
    ends = np.nonzero(diff == -1)[0]
    return list((ends - starts))


def diagonal_line_distribution(R: RecurrenceMatrix, l_min: int = 1,
                               theiler: int = 1) -> dict[int, int]:
    """Counts of maximal diagonal runs, by length, over both triangles.

    Diagonals with offset |i - j| < max(theiler, 1) are excluded (the main
    diagonal always is).  Only lengths >= l_min are reported.
    """
    if l_min < 1:
        raise ValueError("l_min must be >= 1")
    band = _excluded_band(theiler)
    hist: Counter[int] = Counter()
    for off in range(band, R.n):
        for diag in (np.diagonal(R.bits, offset=off), np.diagonal(R.bits, offset=-off)):
            for length in _line_lengths(np.asarray(diag)):
                if length >= l_min:
                    hist[int(length)] += 1
    return dict(sorted(hist.items()))


def vertical_line_distribution(R: RecurrenceMatrix, l_min: int = 1,
                               theiler: int = 1) -> dict[int, int]:
    """Counts of maximal vertical runs outside the Theiler band."""
    if l_min < 1:
        raise ValueError("l_min must be >= 1")
    band = _excluded_band(theiler)
    i, j = np.indices((R.n, R.n))
    masked = np.where(np.abs(i - j) >= band, R.bits, 0)
    hist: Counter[int] = Counter()
    for col in range(R.n):
        for length in _line_lengths(masked[:, col]):
            if length >= l_min:
                hist[int(length)] += 1
    return dict(sorted(hist.items()))


def rqa_measures(R: RecurrenceMatrix, l_min: int = 2, theiler: int = 1) -> RQAReport:
    """Determinism, line-length statistics and laminarity of the matrix."""
    band = _excluded_band(theiler)
    i, j = np.indices((R.n, R.n))
    off = np.abs(i - j) >= band
    total_points = int(R.bits[off].sum())
    rr = total_points / int(off.sum()) if off.sum() else 0.0

    diag_all = diagonal_line_distribution(R, l_min=1, theiler=theiler)
    diag = {l: c for l, c in diag_all.items() if l >= l_min}
    det_points = sum(l * c for l, c in diag.items())
    det = det_points / total_points if total_points else 0.0
    n_lines = sum(diag.values())
    l_avg = det_points / n_lines if n_lines else 0.0
    l_max = max(diag) if diag else 0

    vert_all = vertical_line_distribution(R, l_min=1, theiler=theiler)
    vert = {l: c for l, c in vert_all.items() if l >= l_min}
    lam_points = sum(l * c for l, c in vert.items())
    lam = lam_points / total_points if total_points else 0.0
    v_lines = sum(vert.values())
    tt = lam_points / v_lines if v_lines else 0.0

    return RQAReport(recurrence_rate=rr, det=det, l_max=int(l_max), l_avg=l_avg,
                     diag_histogram=diag, lam=lam, tt=tt, vert_histogram=vert,
                     l_min=l_min, theiler=theiler)


def recurrence_to_coordinates(R: RecurrenceMatrix) -> np.ndarray:
    """Sparse (i, j) coordinate list of the recurrence points."""
    i, j = np.nonzero(R.bits)
    return np.column_stack([i, j])


def recurrence_to_pbm(R: RecurrenceMatrix) -> str:
    """Plain PBM (P1) bitmap of the matrix, one row per line."""
    lines = [f"P1", f"{R.n} {R.n}"]
    for row in R.bits:
        lines.append(" ".join("1" if v else "0" for v in row))
    return "\n".join(lines) + "\n"


def report_to_text(report: RQAReport) -> str:
    """Flat key-value record of the scalar RQA measures."""
    items = [
        ("recurrence_rate", report.recurrence_rate),
        ("det", report.det),
        ("l_max", report.l_max),
        ("l_avg", report.l_avg),
        ("lam", report.lam),
        ("tt", report.tt),
        ("l_min", report.l_min),
        ("theiler", report.theiler),
    ]
    return "".join(f"{k} {v!r}\n" for k, v in items)
