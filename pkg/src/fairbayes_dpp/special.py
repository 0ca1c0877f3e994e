"""Normal and Student-t distribution functions.

The error function family follows W. J. Cody's rational Chebyshev
approximations (Math. Comp. 23, 1969; SPECFUN ``CALERF``), which are accurate
to roughly double precision on the whole real line. Everything here accepts
scalars or numpy arrays.
"""

import math

import numpy as np

_THRESH = 0.46875
_XBIG = 26.543
_SQRPI = 5.6418958354775628695e-1  # 1/sqrt(pi)
_SQRT2 = math.sqrt(2.0)

_A = (3.16112374387056560e00, 1.13864154151050156e02, 3.77485237685302021e02,
      3.20937758913846947e03, 1.85777706184603153e-1)
_B = (2.36012909523441209e01, 2.44024637934444173e02, 1.28261652607737228e03,
      2.84423683343917062e03)
_C = (5.64188496988670089e-1, 8.88314979438837594e00, 6.61191906371416295e01,
      2.98635138197400131e02, 8.81952221241769090e02, 1.71204761263407058e03,
      2.05107837782607147e03, 1.23033935479799725e03, 2.15311535474403846e-8)
_D = (1.57449261107098347e01, 1.17693950891312499e02, 5.37181101862009858e02,
      1.62138957456669019e03, 3.29079923573345963e03, 4.36261909014324716e03,
      3.43936767414372164e03, 1.23033935480374942e03)
_P = (3.05326634961232344e-1, 3.60344899949804439e-1, 1.25781726111229246e-1,
      1.60837851487422766e-2, 6.58749161529837803e-4, 1.63153871373020978e-2)
_Q = (2.56852019228982242e00, 1.87295284992346725e00, 5.27905102951428412e-1,
      6.05183413124413191e-2, 2.33520497626869185e-3)


def _erf_small(x):
    # |x| <= 0.46875: erf(x) directly
    ysq = x * x
    xnum = _A[4] * ysq
    xden = ysq
    for i in range(3):
        xnum = (xnum + _A[i]) * ysq
        xden = (xden + _B[i]) * ysq
    return x * (xnum + _A[3]) / (xden + _B[3])


def _erfcx_mid(y):
    # 0.46875 < y <= 4
    xnum = _C[8] * y
    xden = y
    for i in range(7):
        xnum = (xnum + _C[i]) * y
        xden = (xden + _D[i]) * y
    return (xnum + _C[7]) / (xden + _D[7])


def _erfcx_tail(y):
    # y > 4
    ysq = 1.0 / (y * y)
    xnum = _P[5] * ysq
    xden = ysq
    for i in range(4):
        xnum = (xnum + _P[i]) * ysq
        xden = (xden + _Q[i]) * ysq
    r = ysq * (xnum + _P[4]) / (xden + _Q[4])
    return (_SQRPI - r) / y


def _erfcx_pos(y):
    """exp(y^2) * erfc(y) for y > 0.46875."""
    if isinstance(y, float):
        return _erfcx_mid(y) if y <= 4.0 else _erfcx_tail(y)
    y = np.asarray(y, dtype=float)
    return np.where(y <= 4.0, _erfcx_mid(np.minimum(y, 4.0)), _erfcx_tail(np.maximum(y, 4.0)))


def _exp_neg_sq(y):
    # exp(-y*y) with the argument split to limit cancellation error
    if isinstance(y, float):
        ysq = math.trunc(y * 16.0) / 16.0
        return math.exp(-ysq * ysq) * math.exp(-(y - ysq) * (y + ysq))
    ysq = np.trunc(y * 16.0) / 16.0
    delta = (y - ysq) * (y + ysq)
    return np.exp(-ysq * ysq) * np.exp(-delta)


def _erfc_float(x):
    y = abs(x)
    if y <= _THRESH:
        return 1.0 - _erf_small(x)
    if y != y:
        return math.nan
    val = 0.0 if y >= _XBIG else _exp_neg_sq(y) * _erfcx_pos(y)
    return 2.0 - val if x < 0 else val


def erfc(x):
    """Complementary error function."""
    x = np.asarray(x, dtype=float)
    if x.size == 1:
        v = np.float64(_erfc_float(float(x.reshape(()))))
        return v if x.ndim == 0 else np.full(x.shape, v)
    y = np.abs(x)
    small = 1.0 - _erf_small(np.clip(x, -_THRESH, _THRESH))
    yb = np.clip(y, _THRESH, _XBIG)
    with np.errstate(under="ignore"):
        val = np.where(y >= _XBIG, 0.0, _exp_neg_sq(yb) * _erfcx_pos(yb))
    out = np.where(y <= _THRESH, small, np.where(x < 0, 2.0 - val, val))
    out = np.where(np.isnan(x), np.nan, out)
    return out[()] if out.ndim == 0 else out


def erf(x):
    x = np.asarray(x, dtype=float)
    y = np.abs(x)
    out = np.empty_like(y)
    small = y <= _THRESH
    out[small] = _erf_small(x[small])
    out[~small] = np.copysign(1.0 - erfc(y[~small]), x[~small])
    return out[()] if out.ndim == 0 else out


def erfcx(x):
    """Scaled complementary error function exp(x^2) erfc(x), for x >= 0."""
    x = np.asarray(x, dtype=float)
    xs = np.minimum(x, _THRESH)
    small = np.exp(xs * xs) * (1.0 - _erf_small(xs))
    out = np.where(x <= _THRESH, small, _erfcx_pos(np.maximum(x, _THRESH)))
    return out[()] if out.ndim == 0 else out


def norm_cdf(x):
    """Standard normal CDF."""
    return 0.5 * erfc(-np.asarray(x, dtype=float) / _SQRT2)


def norm_sf(x):
    """Standard normal survival function 1 - Phi(x), accurate in the upper tail."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / _SQRT2)


def _log_norm_sf_float(v):
    if v > 5.0:
        return -0.5 * v * v + math.log(0.5 * _erfcx_pos(v / _SQRT2))
    sf = 0.5 * _erfc_float(v / _SQRT2)
    return math.log(sf) if sf > 0 else -math.inf


def log_norm_sf(x):
    """log(1 - Phi(x)) without underflow for large positive x."""
    x = np.asarray(x, dtype=float)
    if x.size == 1:
        v = _log_norm_sf_float(float(x.reshape(())))
        return np.float64(v) if x.ndim == 0 else np.full(x.shape, v)
    tail = x > 5.0
    near = np.log(norm_sf(np.minimum(x, 5.0)))
    xt = np.maximum(x, 5.0)
    far = -0.5 * xt * xt + np.log(0.5 * erfcx(xt / _SQRT2))
    out = np.where(tail, far, near)
    return out[()] if out.ndim == 0 else out


def _betacf(a, b, x, maxiter=300, eps=3e-16):
    # continued fraction for the incomplete beta, modified Lentz
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, maxiter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc(a, b, x):
    """Regularized incomplete beta function I_x(a, b) for scalar arguments."""
    if a <= 0 or b <= 0:
        raise ValueError("betainc requires a > 0 and b > 0")
    if not 0.0 <= x <= 1.0:
        raise ValueError("betainc requires 0 <= x <= 1")
    if x == 0.0 or x == 1.0:
        return float(x)
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_cdf(t, df):
    """P(T <= t) for Student's t with ``df`` degrees of freedom."""
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    if math.isinf(t):
        return 1.0 if t > 0 else 0.0
    tail = 0.5 * betainc(0.5 * df, 0.5, df / (df + t * t))
    return tail if t < 0 else 1.0 - tail


def t_pdf(t, df):
    log_norm = (math.lgamma(0.5 * (df + 1)) - math.lgamma(0.5 * df)
                - 0.5 * math.log(df * math.pi))
    return np.exp(log_norm - 0.5 * (df + 1) * np.log1p(np.asarray(t, dtype=float) ** 2 / df))
