# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled numerical kernels; mirrors ``_kernels_py`` bit for bit."""
from libc.math cimport fma
from libc.stdlib cimport malloc, free

import math


cdef struct dd:
    double hi
    double lo


cdef inline dd _quick_two_sum(double a, double b) noexcept nogil:
    cdef dd r
    r.hi = a + b
    r.lo = b - (r.hi - a)
    return r


cdef inline dd _two_sum(double a, double b) noexcept nogil:
    cdef dd r
    cdef double bb
    r.hi = a + b
    bb = r.hi - a
    r.lo = (a - (r.hi - bb)) + (b - bb)
    return r


cdef inline dd _dd_add(dd a, dd b) noexcept nogil:
    cdef dd s = _two_sum(a.hi, b.hi)
    cdef dd t = _two_sum(a.lo, b.lo)
    cdef double e = s.lo + t.hi
    s = _quick_two_sum(s.hi, e)
    e = s.lo + t.lo
    return _quick_two_sum(s.hi, e)


cdef inline dd _dd_mul(dd a, dd b) noexcept nogil:
    cdef double p = a.hi * b.hi
    cdef double e = fma(a.hi, b.hi, -p)
    e += a.hi * b.lo + a.lo * b.hi
    return _quick_two_sum(p, e)


cdef inline dd _dd_div_d(dd a, double b) noexcept nogil:
    cdef double q1 = a.hi / b
    cdef double p = q1 * b
    cdef double e = fma(q1, b, -p)
    cdef dd s = _two_sum(a.hi, -p)
    cdef double f = s.lo - e
    f += a.lo
    cdef double q2 = (s.hi + f) / b
    return _quick_two_sum(q1, q2)


cdef inline dd _dd(double x) noexcept nogil:
    cdef dd r
    r.hi = x
    r.lo = 0.0
    return r


# Pascal rows shared by every call; grown on demand, never shrunk.
cdef dd* _binom = NULL
cdef int _binom_size = -1


cdef void _ensure_binomials(int size) except *:
    global _binom, _binom_size
    cdef int i, k
    cdef dd* table
    if size <= _binom_size:
        return
    size = max(size, 2 * _binom_size, 64)
    table = <dd*> malloc((size + 1) * (size + 1) * sizeof(dd))
    if not table:
        raise MemoryError()
    for i in range(size + 1):
        for k in range(i + 1):
            c = math.comb(i, k)
            hi = float(c)
            table[i * (size + 1) + k].hi = hi
            table[i * (size + 1) + k].lo = float(c - int(hi))
    free(_binom)
    _binom = table
    _binom_size = size


cdef class _Tables:
    """Binomial rows and power tables (all double-double) up to ``size``."""
    cdef int size
    cdef dd* pr1
    cdef dd* pd1
    cdef dd* pr2
    cdef dd* pd2

    def __cinit__(self, int size, double r1, double d1, double r2, double d2):
        _ensure_binomials(size)
        self.size = size
        self.pr1 = <dd*> malloc((size + 1) * sizeof(dd))
        self.pd1 = <dd*> malloc((size + 1) * sizeof(dd))
        self.pr2 = <dd*> malloc((size + 1) * sizeof(dd))
        self.pd2 = <dd*> malloc((size + 1) * sizeof(dd))
        if not (self.pr1 and self.pd1 and self.pr2 and self.pd2):
            raise MemoryError()
        _fill_powers(self.pr1, r1, size)
        _fill_powers(self.pd1, d1, size)
        _fill_powers(self.pr2, r2, size)
        _fill_powers(self.pd2, d2, size)

    def __dealloc__(self):
        free(self.pr1)
        free(self.pd1)
        free(self.pr2)
        free(self.pd2)

    cdef inline dd c(self, int n, int k) noexcept nogil:
        return _binom[n * (_binom_size + 1) + k]


cdef void _fill_powers(dd* out, double x, int n) noexcept nogil:
    cdef int i
    out[0] = _dd(1.0)
    for i in range(1, n + 1):
        out[i] = _dd_mul(out[i - 1], _dd(x))


cdef dd _gamma_dd(int m, int n, _Tables tb):
    cdef dd* at = <dd*> malloc((m + 1) * sizeof(dd))
    cdef dd* bt = <dd*> malloc((n + 1) * sizeof(dd))
    cdef int a, b, s, lo, hi
    cdef dd g = _dd(0.0)
    cdef dd acc
    if not at or not bt:
        free(at)
        free(bt)
        raise MemoryError()
    with nogil:
        for a in range(m + 1):
            at[a] = _dd_mul(_dd_mul(tb.c(m, a), tb.pr1[m - a]), tb.pd1[a])
        for b in range(n + 1):
            bt[b] = _dd_mul(_dd_mul(tb.c(n, b), tb.pr2[n - b]), tb.pd2[b])
        for s in range(m + n + 1):
            acc = _dd(0.0)
            lo = s - n if s - n > 0 else 0
            hi = m if m < s else s
            for a in range(lo, hi + 1):
                acc = _dd_add(acc, _dd_mul(at[a], bt[s - a]))
            g = _dd_add(g, _dd_div_d(acc, <double>(s + 1)))
    free(at)
    free(bt)
    return g


cdef dd _phibar1(int T, int j, _Tables tb):
    cdef dd s = _dd(0.0)
    cdef int k, w
    for k in range(T // 2 + 1):
        w = T - 2 * k
        if w == 0:
            continue
        s = _dd_add(s, _dd_mul(_dd_mul(tb.c(T - k, k), _dd(<double>w)),
                               _gamma_dd(T - 1 - 2 * k, k + j, tb)))
    return s


cdef dd _phibar2(int T, int j, _Tables tb):
    cdef dd s = _dd(0.0)
    cdef int k, w
    for k in range(T // 2 + 1):
        w = k + j
        if w == 0:
            continue
        s = _dd_add(s, _dd_mul(_dd_mul(tb.c(T - k, k), _dd(<double>w)),
                               _gamma_dd(T - 2 * k, k - 1 + j, tb)))
    return s


def phi_sum(t, double p1, double p2):
    """Binomial sum ``sum_k C(t-k, k) p1**(t-2k) p2**k`` for integer ``t >= 0``."""
    cdef int T = int(t)
    cdef int k
    cdef dd s = _dd(0.0)
    if T < 0:
        raise ValueError("t must be non-negative")
    cdef _Tables tb = _Tables(T, p1, 0.0, p2, 0.0)
    for k in range(T // 2 + 1):
        s = _dd_add(s, _dd_mul(_dd_mul(tb.c(T - k, k), tb.pr1[T - 2 * k]), tb.pr2[k]))
    return s.hi + s.lo


def phi_recursion(t, double p1, double p2):
    """Same quantity via ``x_t = p1 x_{t-1} + p2 x_{t-2}``, ``x_0 = 1``, ``x_1 = p1``."""
    cdef long T = int(t)
    cdef long i
    cdef dd a, b, x
    if T < 0:
        raise ValueError("t must be non-negative")
    if T == 0:
        return 1.0
    a = _dd(1.0)
    b = _dd(p1)
    for i in range(T - 1):
        x = _dd_add(_dd_mul(b, _dd(p1)), _dd_mul(a, _dd(p2)))
        a = b
        b = x
    return b.hi + b.lo


def gamma_sum(m, n, double r1, double d1, double r2, double d2):
    """``sum_j sum_k C(m,j) C(n,k) r1^(m-j) d1^j r2^(n-k) d2^k / (j+k+1)``."""
    cdef int M = int(m), N = int(n)
    if M < 0 or N < 0:
        raise ValueError("m and n must be non-negative")
    cdef _Tables tb = _Tables(M if M > N else N, r1, d1, r2, d2)
    cdef dd g = _gamma_dd(M, N, tb)
    return g.hi + g.lo


def ar2_ig_sums(t, double r1, double r2, double d1, double d2, double y1, double y2):
    """Closed-form AR(2) integrated gradients ``(IG_1, IG_2)`` at integer ``t``."""
    cdef int T = int(t)
    cdef dd a, b, s1, s2
    if T <= 2:
        return 0.0, 0.0
    cdef _Tables tb = _Tables(T, r1, d1, r2, d2)
    a = _dd_mul(_phibar1(T - 2, 0, tb), _dd(y2))
    b = _dd_mul(_phibar1(T - 3, 1, tb), _dd(y1))
    s1 = _dd_mul(_dd_add(a, b), _dd(d1))
    a = _dd_mul(_phibar2(T - 2, 0, tb), _dd(y2))
    b = _dd_mul(_phibar2(T - 3, 1, tb), _dd(y1))
    s2 = _dd_mul(_dd_add(a, b), _dd(d2))
    return s1.hi + s1.lo, s2.hi + s2.lo


def ar2_value_grad(t, double p1, double p2, double y1, double y2):
    """Trajectory value ``y_t`` and its partials w.r.t. ``(p1, p2)``."""
    cdef long T = int(t)
    cdef long i
    cdef double ya = y1, yb = y2, yc
    cdef double ga1 = 0.0, gb1 = 0.0, gc1
    cdef double ga2 = 0.0, gb2 = 0.0, gc2
    if T < 1:
        raise ValueError("t must be >= 1")
    if T == 1:
        return y1, 0.0, 0.0
    if T == 2:
        return y2, 0.0, 0.0
    for i in range(T - 2):
        yc = p1 * yb + p2 * ya
        gc1 = yb + p1 * gb1 + p2 * ga1
        gc2 = ya + p1 * gb2 + p2 * ga2
        ya = yb
        yb = yc
        ga1 = gb1
        gb1 = gc1
        ga2 = gb2
        gb2 = gc2
    return yb, gb1, gb2


def nearest_index(positions, double t):
    """Index into sorted ``positions`` closest to ``t``; ties go to the earlier one."""
    cdef Py_ssize_t lo = 0, hi = len(positions), mid
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
