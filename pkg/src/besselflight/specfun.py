"""Spherical Bessel functions, associated Legendre polynomials, and zeros.

Evaluation strategy for j_n(x):

* ``x < max(1, n/2)``    -- Taylor series around 0, summed to 1e-15.
* ``x >= n``             -- upward recurrence from j_0, j_1 (stable there).
* ``max(1, n/2) <= x < n`` -- ratio j_n/j_{n-1} by continued fraction
  (modified Lentz), then downward recurrence normalized by j_0.

The associated Legendre convention is fixed empirically: the plain Rodrigues
definition without the Condon-Shortley phase, extended to negative order by
``P_l^{-m} = (-1)^m (l-m)!/(l+m)! P_l^m``, is the unique choice (of the two
phase conventions) under which the spherical-Bessel addition theorem and the
contraction identity hold numerically.  With it, ``P_m^{-m}(cos a)`` equals
``(-1)^m sin^m(a) / (2^m m!)``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from . import quadrature
from .errors import (DomainError, SingularConfigurationError,
                     UnsupportedOrderError, ZeroFindingError)

ORDER_CAP = 200


@dataclass(frozen=True)
class LegendreConvention:
    """Sign convention for the associated Legendre polynomials."""
    condon_shortley: bool

    @property
    def name(self) -> str:
        return "condon-shortley" if self.condon_shortley else "rodrigues-plain"


#: Convention used process-wide, selected by the addition-theorem check
#: (see tests); recorded in all verification reports.
ACTIVE_CONVENTION = LegendreConvention(condon_shortley=False)


def _validate_order(n) -> int:
    if not isinstance(n, (int, np.integer)):
        raise DomainError(f"order must be an integer, got {n!r}")
    n = int(n)
    if n < 0:
        raise DomainError(f"order must be non-negative, got {n}")
    if n > ORDER_CAP:
        raise UnsupportedOrderError(f"order {n} exceeds the supported cap {ORDER_CAP}")
    return n


def _ln_double_factorial_odd(p: int) -> float:
    """ln p!! for odd p = 2n+1."""
    n = (p - 1) // 2
    return math.lgamma(2 * n + 2) - math.lgamma(n + 2 - 1) - n * math.log(2.0)


def _jn_series(n: int, x: np.ndarray) -> np.ndarray:
    """Taylor series j_n(x) = x^n/(2n+1)!! sum_k (-x^2/2)^k / (k! (2n+3)(2n+5)...)."""
    out = np.zeros_like(x)
    pos = x > 0.0
    xp = x[pos]
    if xp.size:
        if n == 0:
            lead = np.ones_like(xp)
        else:
            lead = np.exp(n * np.log(xp) - _ln_double_factorial_odd(2 * n + 1))
        u = 0.5 * xp * xp
        term = np.ones_like(xp)
        total = np.ones_like(xp)
        for k in range(1, 500):
            term *= -u / (k * (2 * n + 2 * k + 1))
            total += term
            if np.all(np.abs(term) <= 1e-17 * np.abs(total)):
                break
        out[pos] = lead * total
    if n == 0:
        out[~pos] = 1.0
    return out


def _jn_upward(n: int, x: np.ndarray) -> np.ndarray:
    jprev = np.sin(x) / x
    jcur = jprev / x - np.cos(x) / x
    for k in range(1, n):
        jprev, jcur = jcur, (2 * k + 1) / x * jcur - jprev
    return jcur


def _ratio_cf(n: int, x: np.ndarray) -> np.ndarray:
    """j_n(x)/j_{n-1}(x) = x/((2n+1) - x^2/((2n+3) - ...)), modified Lentz."""
    tiny = 1e-300
    f = np.full_like(x, tiny)
    c = np.full_like(x, tiny)
    d = np.zeros_like(x)
    x2 = x * x
    done = np.zeros(x.shape, dtype=bool)
    for j in range(1, 500):
        b = 2.0 * (n + j) - 1.0
        a = x if j == 1 else -x2
        d = b + a * d
        d[d == 0.0] = tiny
        c = b + a / c
        c[c == 0.0] = tiny
        d = 1.0 / d
        delta = c * d
        f = f * delta
        done |= np.abs(delta - 1.0) < 1e-16
        if done.all():
            break
    return f


def _jn_downward(n: int, x: np.ndarray) -> np.ndarray:
    rho = _ratio_cf(n, x)
    # unnormalized pair (j_k, j_{k+1}) seeded at k = n-1
    jk1 = rho.copy()
    jk = np.ones_like(x)
    scale = np.ones_like(x)
    for k in range(n - 1, 0, -1):
        jk1, jk = jk, (2 * k + 1) / x * jk - jk1
        big = np.abs(jk) > 1e250
        if big.any():
            jk[big] *= 1e-250
            jk1[big] *= 1e-250
            scale[big] *= 1e-250
    j0 = np.sin(x) / x
    return j0 * rho * scale / jk


def spherical_jn(n, x):
    """Spherical Bessel function j_n(x) for x >= 0 (scalar or ndarray)."""
    n = _validate_order(n)
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    if np.any(arr < 0.0):
        raise DomainError("spherical_jn requires x >= 0")
    out = np.empty_like(arr)
    small = arr < max(1.0, 0.5 * n)
    if small.any():
        out[small] = _jn_series(n, arr[small])
    big = ~small
    if big.any():
        xb = arr[big]
        if n == 0:
            vals = np.sin(xb) / xb
        elif n == 1:
            vals = np.sin(xb) / (xb * xb) - np.cos(xb) / xb
        else:
            vals = np.empty_like(xb)
            up = xb >= n
            if up.any():
                vals[up] = _jn_upward(n, xb[up])
            dn = ~up
            if dn.any():
                vals[dn] = _jn_downward(n, xb[dn])
        out[big] = vals
    return float(out[0]) if scalar else out


def spherical_jn_all(n_max, x):
    """j_0(x) .. j_{n_max}(x) at scalar x, filled by downward recurrence."""
    n_max = _validate_order(n_max)
    x = float(x)
    if x < 0:
        raise DomainError("spherical_jn_all requires x >= 0")
    out = np.zeros(n_max + 1)
    if x == 0.0:
        out[0] = 1.0
        return out
    out[n_max] = spherical_jn(n_max, x)
    if n_max == 0:
        return out
    out[n_max - 1] = spherical_jn(n_max - 1, x)
    if out[n_max] == 0.0 and out[n_max - 1] == 0.0:
        # deep-underflow regime: fill per order until values vanish
        for k in range(n_max + 1):
            v = spherical_jn(k, x)
            out[k] = v
            if k > x and v == 0.0:
                break
        return out
    for k in range(n_max - 1, 0, -1):
        out[k - 1] = (2 * k + 1) / x * out[k] - out[k + 1]
    return out


def spherical_jn_prime(n, x):
    """d j_n / dx, from j_n' = j_{n-1} - (n+1)/x j_n (n >= 1)."""
    n = _validate_order(n)
    if n == 0:
        arr = np.asarray(x, dtype=float)
        return -spherical_jn(1, arr) if arr.ndim else -spherical_jn(1, x)
    return spherical_jn(n - 1, x) - (n + 1) / np.asarray(x, dtype=float) * spherical_jn(n, x)


# --------------------------------------------------------------------------
# associated Legendre


def assoc_legendre(l, m, x, condon_shortley=None):
    """P_l^m(x) for |x| <= 1 and |m| <= l under the active convention.

    ``x`` may be a scalar or ndarray.  Negative orders use
    ``P_l^{-m} = (-1)^m (l-m)!/(l+m)! P_l^m`` (same relation in both
    conventions; the phase sits in the positive-order Rodrigues formula).
    """
    if not isinstance(l, (int, np.integer)) or not isinstance(m, (int, np.integer)):
        raise DomainError("degree and order must be integers")
    l, m = int(l), int(m)
    if l < 0 or abs(m) > l:
        raise DomainError(f"need 0 <= |m| <= l, got l={l}, m={m}")
    cs = ACTIVE_CONVENTION.condon_shortley if condon_shortley is None else condon_shortley
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    if np.any(np.abs(arr) > 1.0 + 4e-16):
        raise DomainError("assoc_legendre requires |x| <= 1")
    arr = np.clip(arr, -1.0, 1.0)

    am = abs(m)
    sin_theta = np.sqrt(np.maximum(0.0, (1.0 - arr) * (1.0 + arr)))
    p_mm = np.ones_like(arr)
    fact = 1.0
    for _ in range(am):
        p_mm *= fact * sin_theta
        fact += 2.0
    if cs and am % 2 == 1:
        p_mm = -p_mm
    if l == am:
        p = p_mm
    else:
        p_prev = p_mm
        p = arr * (2 * am + 1) * p_mm
        for ll in range(am + 2, l + 1):
            p_prev, p = p, (arr * (2 * ll - 1) * p - (ll + am - 1) * p_prev) / (ll - am)
    if m < 0:
        ratio = math.exp(math.lgamma(l - am + 1) - math.lgamma(l + am + 1))
        p = ((-1) ** am) * ratio * p
    return float(p[0]) if scalar else p


# --------------------------------------------------------------------------
# zeros of j_l


@dataclass(frozen=True)
class ZeroTable:
    """First zeros of j_order, strictly increasing, |j(zero)| < 1e-12."""
    order: int
    zeros: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.zeros, dtype=float)
        object.__setattr__(self, "zeros", z)
        if z.ndim != 1 or len(z) == 0:
            raise DomainError("zero table must hold at least one zero")
        if z[0] <= 0 or np.any(np.diff(z) <= 0):
            raise DomainError("zeros must be positive and strictly increasing")

    def __len__(self):
        return len(self.zeros)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "zero"])
        for i, z in enumerate(self.zeros, start=1):
            w.writerow([i, format(z, ".17g")])
        return buf.getvalue()


_ZERO_CACHE: dict[int, np.ndarray] = {}


def _refine_zero(l, lo, hi):
    """One zero of j_l inside (lo, hi): bisection bracket + Newton polish."""
    flo = spherical_jn(l, lo)
    fhi = spherical_jn(l, hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0:
        raise ZeroFindingError(f"bracket ({lo}, {hi}) does not straddle a zero of j_{l}")
    a, b, fa = lo, hi, flo
    for _ in range(8):
        mid = 0.5 * (a + b)
        fm = spherical_jn(l, mid)
        if fm == 0.0:
            return mid
        if fa * fm < 0:
            b = mid
        else:
            a, fa = mid, fm
    x = 0.5 * (a + b)
    for it in range(100):
        fx = spherical_jn(l, x)
        dfx = spherical_jn_prime(l, x)
        if dfx == 0.0:
            x = 0.5 * (a + b)
            continue
        step = fx / dfx
        xn = x - step
        if not (a <= xn <= b):
            # Newton left the bracket: bisect instead
            fm = fx
            if fa * fm < 0:
                b = x
            else:
                a, fa = x, fm
            xn = 0.5 * (a + b)
        if abs(xn - x) <= 1e-15 * max(1.0, abs(xn)):
            x = xn
            break
        x = xn
    else:
        raise ZeroFindingError(f"Newton did not converge for j_{l} in ({lo}, {hi})")
    if abs(spherical_jn(l, x)) >= 1e-12:
        raise ZeroFindingError(f"polished zero of j_{l} fails residual check at {x}")
    return x


def bessel_zeros(l, count) -> ZeroTable:
    """First ``count`` positive zeros of j_l.

    Order 0 zeros are exactly i*pi; higher orders are bracketed by the
    interlacing property against order l-1 and polished by Newton.
    Intermediate orders are cached.
    """
    l = _validate_order(l)
    if not isinstance(count, (int, np.integer)) or count < 1:
        raise DomainError(f"count must be a positive integer, got {count!r}")
    count = int(count)
    cached = _ZERO_CACHE.get(l)
    if cached is not None and len(cached) >= count:
        return ZeroTable(l, cached[:count].copy())

    need = count + l + 1
    prev = np.pi * np.arange(1, need + 1)
    if len(_ZERO_CACHE.get(0, ())) < len(prev):
        _ZERO_CACHE[0] = prev.copy()
    for order in range(1, l + 1):
        cached = _ZERO_CACHE.get(order)
        if cached is not None and len(cached) >= len(prev) - 1:
            prev = cached.copy()
            continue
        prev = np.array([_refine_zero(order, prev[i], prev[i + 1])
                         for i in range(len(prev) - 1)])
        _ZERO_CACHE[order] = prev.copy()
    return ZeroTable(l, prev[:count].copy())


# --------------------------------------------------------------------------
# identities


def addition_theorem_lhs_rhs(m, k, r1, r2, alpha, l_max):
    """Both sides of the spherical-Bessel addition theorem.

    Returns ``(j_m(kr)/(kr)^m, partial sum over l = m..l_max)`` with
    ``r^2 = r1^2 + r2^2 - 2 r1 r2 cos(alpha)``.
    """
    m = _validate_order(m)
    l_max = _validate_order(l_max)
    if l_max < m:
        raise DomainError("l_max must be >= m")
    if k <= 0 or r1 <= 0 or r2 <= 0:
        raise DomainError("k, r1, r2 must be positive")
    sin_a = math.sin(alpha)
    if m >= 1 and (alpha <= 0.0 or alpha >= math.pi or sin_a == 0.0):
        raise SingularConfigurationError(
            "addition theorem with m >= 1 is singular at alpha in {0, pi}")
    if not (0.0 <= alpha <= math.pi):
        raise DomainError("alpha must lie in [0, pi]")
    cos_a = math.cos(alpha)
    r = math.sqrt(max(0.0, r1 * r1 + r2 * r2 - 2 * r1 * r2 * cos_a))
    lhs = spherical_jn(m, k * r) / (k * r) ** m if r > 0 else 1.0 / _df_odd(m)
    j1 = spherical_jn_all(l_max, k * r1)
    j2 = spherical_jn_all(l_max, k * r2)
    denom = ((k * r1) * (k * r2) * sin_a) ** m if m else 1.0
    terms = [(2 * l + 1) * j1[l] * j2[l] * assoc_legendre(l, m, cos_a) / denom
             for l in range(m, l_max + 1)]
    return lhs, quadrature.kahan_sum(terms)


def _df_odd(m):
    """(2m+1)!! as a float."""
    return math.exp(_ln_double_factorial_odd(2 * m + 1))


def contraction_identity_check(l, m, k, r1, r2, tol=1e-9):
    """Residual of the two-Bessel contraction identity.

    |j_l(k r1) j_l(k r2) - ((-1)^m / 2) * integral| where the integral runs
    over the triangle diagonal r in [|r1-r2|, r1+r2] with weight
    ``k^m (r1 r2 / r)^(m-1) P_l^{-m}(cos a) sin^m(a) j_m(k r)`` and
    ``cos a = (r1^2 + r2^2 - r^2) / (2 r1 r2)``.
    """
    l = _validate_order(l)
    m = _validate_order(m)
    if l < m:
        raise DomainError("contraction identity requires l >= m")
    if k <= 0 or r1 <= 0 or r2 <= 0:
        raise DomainError("k, r1, r2 must be positive")
    direct = spherical_jn(l, k * r1) * spherical_jn(l, k * r2)

    def integrand(rho):
        rho = np.asarray(rho, dtype=float)
        cos_a = (r1 * r1 + r2 * r2 - rho * rho) / (2 * r1 * r2)
        cos_a = np.clip(cos_a, -1.0, 1.0)
        sin_a = np.sqrt(np.maximum(0.0, 1.0 - cos_a * cos_a))
        w = k ** m * (r1 * r2 / rho) ** (m - 1) * assoc_legendre(l, -m, cos_a)
        return w * sin_a ** m * spherical_jn(m, k * rho)

    res = quadrature.integrate_finite(integrand, abs(r1 - r2), r1 + r2,
                                      tol=tol * 0.02 * max(1.0, abs(direct)))
    return abs(direct - 0.5 * ((-1) ** m) * res.value)
