"""Adaptive finite quadrature and semi-infinite oscillatory integration.

Two entry points:

* :func:`integrate_finite` -- globally adaptive Gauss-Kronrod (G7/K15)
  bisection on a finite interval.
* :func:`integrate_oscillatory_tail` -- partition-extrapolation for
  conditionally convergent oscillatory integrals on [b0, oo): integrate
  between caller-supplied break points (typically envelope zeros), then
  extrapolate the partial-sum sequence.  Three transforms run side by side
  (iterated averaging, a Levin u-transformation, and Wynn's epsilon
  algorithm); convergence is declared only when independent transforms agree
  and the answer is stable under adding further cells.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import InsufficientBreakPointsError, IntegrandEvaluationError

DEFAULT_FINITE_TOL = 1e-10
DEFAULT_OSCILLATORY_TOL = 1e-7
MAX_BISECTION_DEPTH = 50
MAX_OSCILLATORY_CELLS = 2000

# 15-point Kronrod nodes on [-1, 1] with Kronrod and embedded Gauss-7 weights.
_GK_NODES = np.array([
    -0.991455371120813, -0.949107912342759, -0.864864423359769,
    -0.741531185599394, -0.586087235467691, -0.405845151377397,
    -0.207784955007898, 0.0,
    0.207784955007898, 0.405845151377397, 0.586087235467691,
    0.741531185599394, 0.864864423359769, 0.949107912342759,
    0.991455371120813])
_GK_WEIGHTS = np.array([
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728,
    0.204432940075298, 0.190350578064785, 0.169004726639267,
    0.140653259715525, 0.104790010322250, 0.063092092629979,
    0.022935322010529])
_G7_WEIGHTS = np.array([
    0.0, 0.129484966168870, 0.0, 0.279705391489277,
    0.0, 0.381830050505119, 0.0, 0.417959183673469,
    0.0, 0.381830050505119, 0.0, 0.279705391489277,
    0.0, 0.129484966168870, 0.0])


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    abs_error_estimate: float
    evaluations: int
    converged: bool
    warnings: tuple = field(default_factory=tuple)


def kahan_sum(values) -> float:
    """Compensated (Kahan) summation in the given order."""
    total = 0.0
    comp = 0.0
    for v in np.asarray(values, dtype=float).ravel():
        y = v - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total


def _call(f: Callable, x: np.ndarray) -> np.ndarray:
    """Evaluate f on an abscissa array, falling back to scalar calls."""
    try:
        y = np.asarray(f(x), dtype=float)
        if y.shape != x.shape:
            raise TypeError
    except (TypeError, ValueError):
        y = np.array([float(f(float(xi))) for xi in x])
    if not np.all(np.isfinite(y)):
        bad = x[~np.isfinite(y)][0]
        raise IntegrandEvaluationError(bad)
    return y


def _gk15(f, a, b):
    x = 0.5 * (b - a) * (_GK_NODES + 1.0) + a
    y = _call(f, x)
    hw = 0.5 * (b - a)
    k15 = hw * float(np.dot(_GK_WEIGHTS, y))
    g7 = hw * float(np.dot(_G7_WEIGHTS, y))
    return k15, abs(k15 - g7)


def integrate_finite(f: Callable, a: float, b: float,
                     tol: float = DEFAULT_FINITE_TOL) -> QuadratureResult:
    """Globally adaptive G7/K15 quadrature of ``f`` on [a, b].

    The worst cell (largest |K15 - G7| discrepancy) is bisected until the
    summed discrepancy falls below ``max(tol, tol * |value|)`` or a cell
    reaches bisection depth 50, in which case the result is flagged
    unconverged but still returned.
    """
    a, b = float(a), float(b)
    if not (a <= b):
        raise ValueError(f"integration bounds out of order: [{a}, {b}]")
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    if a == b:
        return QuadratureResult(0.0, 0.0, 0, True)

    val, err = _gk15(f, a, b)
    evals = 15
    heap = [(-err, 0, a, b, 0, val)]
    counter = 1
    depth_hit = False
    while True:
        total = kahan_sum([c[5] for c in heap])
        total_err = sum(-c[0] for c in heap)
        goal = max(tol, tol * abs(total))
        if total_err <= goal:
            return QuadratureResult(total, total_err, evals, True)
        if depth_hit or len(heap) >= 16384:
            warn = ("bisection_depth_limit",) if depth_hit else ("cell_limit",)
            return QuadratureResult(total, total_err, evals, False, warn)
        neg_err, _, ca, cb, depth, _ = heapq.heappop(heap)
        if depth >= MAX_BISECTION_DEPTH:
            depth_hit = True
            heapq.heappush(heap, (neg_err, counter, ca, cb, depth, _))
            counter += 1
            continue
        mid = 0.5 * (ca + cb)
        for lo, hi in ((ca, mid), (mid, cb)):
            v, e = _gk15(f, lo, hi)
            evals += 15
            heapq.heappush(heap, (-e, counter, lo, hi, depth + 1, v))
            counter += 1


@lru_cache(maxsize=8)
def _leggauss(order):
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def composite_gauss_legendre(f: Callable, edges, order: int = 16) -> float:
    """Fixed composite Gauss-Legendre rule over consecutive ``edges``.

    No error estimate; meant for smooth integrands resolved by the cell
    structure (one oscillation half-period per cell or finer).
    """
    edges = np.asarray(edges, dtype=float)
    gx, gw = _leggauss(order)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = mid[:, None] + half[:, None] * gx[None, :]
    y = _call(f, x.ravel()).reshape(x.shape)
    return float(np.sum(half[:, None] * gw[None, :] * y))


# --------------------------------------------------------------------------
# partial-sum extrapolation machinery


def _adaptive_cell(f, a, b, tol, depth=0):
    k, e = _gk15(f, a, b)
    if e <= tol or depth >= 14:
        return k, e, 15
    m = 0.5 * (a + b)
    k1, e1, n1 = _adaptive_cell(f, a, m, tol / 2, depth + 1)
    k2, e2, n2 = _adaptive_cell(f, m, b, tol / 2, depth + 1)
    return k1 + k2, e1 + e2, n1 + n2 + 15


def _euler_average(sums, width=24):
    """Iterated pairwise averaging of the trailing partial sums."""
    w = min(len(sums), width)
    row = np.asarray(sums[-w:], dtype=float)
    prev = row[-1]
    while len(row) > 1:
        prev = row[-1]
        row = 0.5 * (row[:-1] + row[1:])
    return float(row[0]), abs(float(row[0]) - prev)


def _levin_u(sums, terms, window):
    """Levin u-transformation on the trailing window (global indexing).

    Tracks the most stable intermediate value; the raw transform degrades
    from rounding once the table grows, so the best-seen estimate is kept.
    """
    n0 = max(0, len(sums) - window)
    beta = 1.0 + n0
    num, den = [], []
    best, best_est, lastval = sums[-1], np.inf, None
    for n, (s, a) in enumerate(zip(sums[n0:], terms[n0:])):
        omega = (beta + n) * a
        if omega == 0.0:
            omega = 1e-300
        t0 = 1.0 / (beta + n)
        den.append(t0 / omega)
        num.append(s * den[-1])
        if n > 0:
            ratio = (beta + n - 1) * t0
            t = t0
            for j in range(1, n + 1):
                fact = (n - j + beta) * t
                num[n - j] = num[n - j + 1] - fact * num[n - j]
                den[n - j] = den[n - j + 1] - fact * den[n - j]
                t *= ratio
        if abs(den[0]) > 1e-300:
            v = num[0] / den[0]
            if lastval is not None and np.isfinite(v):
                est = abs(v - lastval)
                if est < best_est:
                    best_est, best = est, v
            lastval = v
    return best, best_est


def _wynn_epsilon(sums, window):
    """Wynn epsilon table on the trailing window; best even column kept."""
    sums = sums[max(0, len(sums) - window):]
    n = len(sums)
    if n < 4:
        return sums[-1], np.inf
    cur = np.asarray(sums, dtype=float)
    prev = np.zeros(n + 1)
    best, best_est = float(cur[-1]), abs(cur[-1] - cur[-2])
    last_even = float(cur[-1])
    col = 0
    while len(cur) >= 2 and col < 2 * n:
        d = np.diff(cur)
        if np.any(d == 0.0):
            stop = int(np.argmax(d == 0.0))
            if stop < 2:
                break
            d = d[:stop]
            cur = cur[:stop + 1]
        nxt = prev[1:len(cur)] + 1.0 / d
        finite = np.isfinite(nxt)
        if not finite.all():
            stop = int(np.argmax(~finite))
            if stop == 0:
                break
            nxt = nxt[:stop]
        prev = cur
        cur = nxt
        col += 1
        if col % 2 == 0 and len(cur) >= 2:
            est = abs(cur[-1] - cur[-2]) + abs(cur[-1] - last_even)
            if est < best_est:
                best_est, best = est, float(cur[-1])
            last_even = float(cur[-1])
    return best, best_est


def _portfolio(sums, terms, floor):
    """Best cross-validated accelerated limit from the transform portfolio."""
    cands = [_euler_average(sums),
             _levin_u(sums, terms, 36), _levin_u(sums, terms, 64),
             _wynn_epsilon(sums, 192), _wynn_epsilon(sums, 384)]
    best = None
    for i in range(len(cands)):
        for k in range(i + 1, len(cands)):
            gap = abs(cands[i][0] - cands[k][0])
            sel = min(cands[i], cands[k], key=lambda t: t[1])
            score = max(gap, sel[1], floor)
            if np.isfinite(sel[0]) and (best is None or score < best[1]):
                best = (sel[0], score)
    return best if best is not None else (sums[-1], np.inf)


def _alternation_fraction(cells):
    """Fraction of sign changes between consecutive non-negligible cells."""
    c = np.asarray(cells, dtype=float)
    c = c[np.abs(c) > 1e-3 * np.max(np.abs(c))] if np.max(np.abs(c)) > 0 else c
    if len(c) < 3:
        return 1.0
    flips = np.sum(np.sign(c[1:]) != np.sign(c[:-1]))
    return flips / (len(c) - 1)


def integrate_oscillatory_tail(f: Callable, break_points: Sequence[float],
                               tol: float = DEFAULT_OSCILLATORY_TOL,
                               max_intervals: int = MAX_OSCILLATORY_CELLS,
                               min_intervals: int = 12) -> QuadratureResult:
    """Integrate ``f`` across consecutive break points and extrapolate.

    Each cell [b_j, b_{j+1}] is integrated adaptively; the partial-sum
    sequence is extrapolated with the transform portfolio.  The result is
    accepted once the cross-transform agreement, the transform's own
    last-column difference, the accumulated cell error, and the
    checkpoint-to-checkpoint drift are all below ``tol``.

    ``min_intervals`` guards against declaring convergence before slow
    envelope components have completed a rotation; callers that know the
    integrand's frequency content (the flight modules) size it accordingly.
    """
    bp = np.asarray(break_points, dtype=float)
    if bp.ndim != 1 or len(bp) < 4:
        raise InsufficientBreakPointsError(
            "need at least 4 strictly increasing break points")
    if np.any(np.diff(bp) <= 0):
        raise InsufficientBreakPointsError("break points must be strictly increasing")
    if tol <= 0:
        raise ValueError("tolerance must be positive")

    limit = min(len(bp) - 1, max_intervals)
    min_intervals = max(8, min(min_intervals, limit))
    cell_tol = tol * 2e-4
    cells, sums, errs = [], [], []
    total = 0.0
    comp = 0.0
    evals = 0
    next_check = max(14, min_intervals)
    val, est = None, np.inf
    prev_checkpoint_val = None

    for j in range(limit):
        c, e, ev = _adaptive_cell(f, bp[j], bp[j + 1], cell_tol)
        evals += ev
        y = c - comp
        t = total + y
        comp = (t - total) - y
        total = t
        cells.append(c)
        sums.append(total)
        errs.append(e)
        if j + 1 < 8:
            continue
        floor = sum(errs)
        if (j + 1 >= min_intervals
                and all(abs(x) < 0.02 * tol for x in cells[-4:])
                and floor < 0.5 * tol):
            tail_est = sum(abs(x) for x in cells[-4:]) + floor
            return QuadratureResult(total, tail_est, evals, True)
        if (j + 1) >= next_check:
            next_check = int(next_check * 1.3) + 1
            val, est = _portfolio(sums, cells, floor)
            if prev_checkpoint_val is not None:
                est = max(est, 0.45 * abs(val - prev_checkpoint_val))
            else:
                est = np.inf  # require a second checkpoint for stability
            prev_checkpoint_val = val
            if est <= tol:
                return QuadratureResult(val, est, evals, True)

    warnings = []
    if _alternation_fraction(cells) < 0.4:
        warnings.append("non_alternating_cells")
    if val is None or not np.isfinite(est):
        val, est = _portfolio(sums, cells, sum(errs))
    if warnings and est > tol and abs(val - total) > tol:
        # acceleration never stabilized on a one-signed series: fall back to
        # the plain partial sum rather than an unvalidated extrapolation
        return QuadratureResult(total, max(est, abs(val - total)), evals,
                                False, tuple(warnings))
    return QuadratureResult(val, est, evals, False, tuple(warnings))
