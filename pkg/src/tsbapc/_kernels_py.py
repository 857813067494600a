"""Pure-Python numerical kernels.

Reference implementation of the routines in ``_ckernels.pyx``. Both modules
expose the same functions and must return bit-identical results: all sums
of alternating binomial terms are carried in double-double arithmetic built
from error-free transformations (TwoSum / TwoProd), so the only rounding
happens when the final double-double is collapsed to a float.
"""
import math
from functools import lru_cache

__all__ = [
    "phi_sum",
    "phi_recursion",
    "gamma_sum",
    "ar2_ig_sums",
    "ar2_value_grad",
    "nearest_index",
]

_SPLITTER = 134217729.0  # 2**27 + 1


def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _quick_two_sum(a, b):
    s = a + b
    return s, b - (s - a)


def _split(a):
    c = _SPLITTER * a
    hi = c - (c - a)
    return hi, a - hi


def _two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def _dd_add(ah, al, bh, bl):
    s, e = _two_sum(ah, bh)
    t, f = _two_sum(al, bl)
    e += t
    s, e = _quick_two_sum(s, e)
    e += f
    return _quick_two_sum(s, e)


def _dd_mul(ah, al, bh, bl):
    p, e = _two_prod(ah, bh)
    e += ah * bl + al * bh
    return _quick_two_sum(p, e)


def _dd_div_d(ah, al, b):
    q1 = ah / b
    p, e = _two_prod(q1, b)
    s, f = _two_sum(ah, -p)
    f -= e
    f += al
    q2 = (s + f) / b
    return _quick_two_sum(q1, q2)


def _dd_from_int(n):
    hi = float(n)
    return hi, float(n - int(hi))


@lru_cache(maxsize=16)
def _binomials(n):
    """Rows 0..n of Pascal's triangle as double-double pairs (shared, do not mutate)."""
    return tuple([tuple(_dd_from_int(math.comb(i, k)) for k in range(i + 1)) for i in range(n + 1)])


def _powers(x, n):
    out = [(1.0, 0.0)]
    hi, lo = 1.0, 0.0
    for _ in range(n):
        hi, lo = _dd_mul(hi, lo, x, 0.0)
        out.append((hi, lo))
    return out


def phi_sum(t, p1, p2):
    """Binomial sum ``sum_k C(t-k, k) p1**(t-2k) p2**k`` for integer ``t >= 0``."""
    t = int(t)
    if t < 0:
        raise ValueError("t must be non-negative")
    binom = _binomials(t)
    pw1 = _powers(p1, t)
    pw2 = _powers(p2, t // 2)
    sh, sl = 0.0, 0.0
    for k in range(t // 2 + 1):
        ch, cl = binom[t - k][k]
        th, tl = _dd_mul(ch, cl, *pw1[t - 2 * k])
        th, tl = _dd_mul(th, tl, *pw2[k])
        sh, sl = _dd_add(sh, sl, th, tl)
    return sh + sl


def phi_recursion(t, p1, p2):
    """Same quantity via ``x_t = p1 x_{t-1} + p2 x_{t-2}``, ``x_0 = 1``, ``x_1 = p1``."""
    t = int(t)
    if t < 0:
        raise ValueError("t must be non-negative")
    if t == 0:
        return 1.0
    ah, al = 1.0, 0.0
    bh, bl = p1, 0.0
    for _ in range(t - 1):
        xh, xl = _dd_mul(bh, bl, p1, 0.0)
        yh, yl = _dd_mul(ah, al, p2, 0.0)
        ah, al = bh, bl
        bh, bl = _dd_add(xh, xl, yh, yl)
    return bh + bl


def _gamma_dd(m, n, binom, pr1, pd1, pr2, pd2):
    # integral over h in [0, 1] of (r1 + h d1)**m (r2 + h d2)**n
    a_terms = []
    for a in range(m + 1):
        ch, cl = binom[m][a]
        th, tl = _dd_mul(ch, cl, *pr1[m - a])
        a_terms.append(_dd_mul(th, tl, *pd1[a]))
    b_terms = []
    for b in range(n + 1):
        ch, cl = binom[n][b]
        th, tl = _dd_mul(ch, cl, *pr2[n - b])
        b_terms.append(_dd_mul(th, tl, *pd2[b]))
    gh, gl = 0.0, 0.0
    for s in range(m + n + 1):
        sh, sl = 0.0, 0.0
        for a in range(max(0, s - n), min(m, s) + 1):
            ph, pl = _dd_mul(*a_terms[a], *b_terms[s - a])
            sh, sl = _dd_add(sh, sl, ph, pl)
        sh, sl = _dd_div_d(sh, sl, float(s + 1))
        gh, gl = _dd_add(gh, gl, sh, sl)
    return gh, gl


def _tables(size, r1, d1, r2, d2):
    return (
        _binomials(size),
        _powers(r1, size),
        _powers(d1, size),
        _powers(r2, size),
        _powers(d2, size),
    )


def gamma_sum(m, n, r1, d1, r2, d2):
    """``sum_j sum_k C(m,j) C(n,k) r1^(m-j) d1^j r2^(n-k) d2^k / (j+k+1)``."""
    m, n = int(m), int(n)
    if m < 0 or n < 0:
        raise ValueError("m and n must be non-negative")
    tabs = _tables(max(m, n), r1, d1, r2, d2)
    gh, gl = _gamma_dd(m, n, *tabs)
    return gh + gl


def _phibar1(T, j, tabs):
    binom = tabs[0]
    sh, sl = 0.0, 0.0
    for k in range(T // 2 + 1):
        w = T - 2 * k
        if w == 0:
            continue
        ch, cl = binom[T - k][k]
        ch, cl = _dd_mul(ch, cl, float(w), 0.0)
        gh, gl = _gamma_dd(T - 1 - 2 * k, k + j, *tabs)
        th, tl = _dd_mul(ch, cl, gh, gl)
        sh, sl = _dd_add(sh, sl, th, tl)
    return sh, sl


def _phibar2(T, j, tabs):
    binom = tabs[0]
    sh, sl = 0.0, 0.0
    for k in range(T // 2 + 1):
        w = k + j
        if w == 0:
            continue
        ch, cl = binom[T - k][k]
        ch, cl = _dd_mul(ch, cl, float(w), 0.0)
        gh, gl = _gamma_dd(T - 2 * k, k - 1 + j, *tabs)
        th, tl = _dd_mul(ch, cl, gh, gl)
        sh, sl = _dd_add(sh, sl, th, tl)
    return sh, sl


def ar2_ig_sums(t, r1, r2, d1, d2, y1, y2):
    """Closed-form AR(2) integrated gradients ``(IG_1, IG_2)`` at integer ``t``.

    ``(r1, r2)`` is the path start (refitted coefficients), ``(d1, d2)`` the
    coefficient shift towards the original fit.
    """
    t = int(t)
    if t <= 2:
        return 0.0, 0.0
    tabs = _tables(t, r1, d1, r2, d2)
    out = []
    for phibar, delta in ((_phibar1, d1), (_phibar2, d2)):
        ah, al = phibar(t - 2, 0, tabs)
        ah, al = _dd_mul(ah, al, y2, 0.0)
        bh, bl = phibar(t - 3, 1, tabs)
        bh, bl = _dd_mul(bh, bl, y1, 0.0)
        sh, sl = _dd_add(ah, al, bh, bl)
        sh, sl = _dd_mul(sh, sl, delta, 0.0)
        out.append(sh + sl)
    return out[0], out[1]


def ar2_value_grad(t, p1, p2, y1, y2):
    """Trajectory value ``y_t`` and its partials w.r.t. ``(p1, p2)``.

    Forward-mode differentiation of the recursion, ``t >= 1`` local index.
    """
    t = int(t)
    if t < 1:
        raise ValueError("t must be >= 1")
    if t == 1:
        return y1, 0.0, 0.0
    if t == 2:
        return y2, 0.0, 0.0
    ya, yb = y1, y2
    ga1, gb1 = 0.0, 0.0
    ga2, gb2 = 0.0, 0.0
    for _ in range(t - 2):
        yc = p1 * yb + p2 * ya
        gc1 = yb + p1 * gb1 + p2 * ga1
        gc2 = ya + p1 * gb2 + p2 * ga2
        ya, yb = yb, yc
        ga1, gb1 = gb1, gc1
        ga2, gb2 = gb2, gc2
    return yb, gb1, gb2


def nearest_index(positions, t):
    """Index into sorted ``positions`` closest to ``t``; ties go to the earlier one."""
    lo, hi = 0, len(positions)
    if hi == 0:
        raise ValueError("no stored positions")
    while lo < hi:
        mid = (lo + hi) // 2
        if positions[mid] < t:
            lo = mid + 1
        else:
            hi = mid
    if lo == 0:
        return 0
    if lo == len(positions):
        return lo - 1
    if t - positions[lo - 1] <= positions[lo] - t:
        return lo - 1
    return lo
