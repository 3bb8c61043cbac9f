"""Hot inner loops over piecewise-affine cadlag path arrays.

A path is three float64 arrays (t, v, jump) of equal length n+1:
breakpoint times (t[0]=0, t[-1]=lifetime), values at breakpoints
(v[k] = f(t[k]) for k < n, v[-1] = terminal left limit) and upward jump
sizes at breakpoints (f(t[k]-) = v[k] - jump[k]).  Segment k is affine
on [t[k], t[k+1]) from v[k] to v[k+1] - jump[k+1].

All kernels are deterministic transforms of their inputs; randomness is
drawn by callers.  Compiled with numba unless SPLITLEVY_BACKEND=numpy.
"""

import numpy as np

from .backend import njit


@njit
def tc_below(t, v, jump, r):
    """Time-change the path to remain below r: excise {f > r}, close gaps.

    Returns (t2, v2, jump2, m) with m the number of valid entries.
    Excursions above r that start with a jump from w < r become a jump
    of size r - w in the output; excursions entered continuously glue
    seamlessly at value r.
    """
    n = t.shape[0]
    cap = 2 * n + 4
    ot = np.empty(cap)
    ov = np.empty(cap)
    oj = np.empty(cap)
    m = 0
    acc = 0.0  # accumulated kept time
    above = v[0] > r
    w = r  # last kept value before an excised excursion
    if not above:
        ot[0] = 0.0
        ov[0] = v[0]
        oj[0] = jump[0]
        m = 1
    for k in range(n - 1):
        a = v[k]
        b = v[k + 1] - jump[k + 1]
        dt = t[k + 1] - t[k]
        if not above:
            if b <= r:
                acc += dt
            else:
                # upcrossing inside the segment: cut at r
                frac = (r - a) / (b - a)
                acc += frac * dt
                ot[m] = acc
                ov[m] = r
                oj[m] = 0.0
                m += 1
                above = True
                w = r
        else:
            if b <= r and a > r:
                # continuous downcrossing: resume at r
                frac = (a - r) / (a - b)
                if w < r:
                    ot[m] = acc
                    ov[m] = r
                    oj[m] = r - w
                    m += 1
                elif m == 0:
                    # the path began above r: the output starts at r
                    ot[m] = acc
                    ov[m] = r
                    oj[m] = 0.0
                    m += 1
                above = False
                acc += (1.0 - frac) * dt
        # jump arrival at breakpoint k+1 (skip the terminal one)
        if k + 1 < n - 1:
            if not above:
                post = v[k + 1]
                if post <= r:
                    ot[m] = acc
                    ov[m] = post
                    oj[m] = jump[k + 1]
                    m += 1
                else:
                    above = True
                    w = b
            # while above, further jumps keep the path above r
    if above:
        ot[m] = acc
        ov[m] = w if w < r else r
        oj[m] = 0.0
        m += 1
    else:
        term = v[n - 1] - jump[n - 1]
        ot[m] = acc
        ov[m] = term if term <= r else r
        oj[m] = 0.0
        m += 1
    return ot[:m], ov[:m], oj[:m], m


@njit
def occupation_bins(t, v, jump, lo, h, nbins):
    """Exact Lebesgue time spent in each level bin [lo + i*h, lo + (i+1)*h)."""
    out = np.zeros(nbins)
    n = t.shape[0]
    hi = lo + h * nbins
    for k in range(n - 1):
        a = v[k]
        b = v[k + 1] - jump[k + 1]
        dt = t[k + 1] - t[k]
        if dt <= 0.0:
            continue
        if a == b:
            if lo <= a < hi:
                out[int((a - lo) / h)] += dt
            continue
        vmin = a if a < b else b
        vmax = a + b - vmin
        dens = dt / (vmax - vmin)  # time per unit level
        c0 = vmin if vmin > lo else lo
        c1 = vmax if vmax < hi else hi
        if c1 <= c0:
            continue
        i0 = int((c0 - lo) / h)
        i1 = int((c1 - lo) / h)
        if i1 >= nbins:
            i1 = nbins - 1
        for i in range(i0, i1 + 1):
            e0 = lo + i * h
            e1 = e0 + h
            seg0 = c0 if c0 > e0 else e0
            seg1 = c1 if c1 < e1 else e1
            if seg1 > seg0:
                out[i] += dens * (seg1 - seg0)
    return out


@njit
def last_passage(t, v, jump, levels):
    """Last time the path takes each value in `levels` (ascending array).

    Scans from the path end; returns (times, found).  Values attained
    only as jump endpoints (measure-zero for the simulated laws) resolve
    to the breakpoint time.
    """
    nl = levels.shape[0]
    times = np.full(nl, -1.0)
    found = np.zeros(nl, np.uint8)
    li = 0  # next (lowest) level still unresolved
    n = t.shape[0]
    for k in range(n - 2, -1, -1):
        if li >= nl:
            break
        a = v[k]
        b = v[k + 1] - jump[k + 1]
        smin = a if a < b else b
        smax = a + b - smin
        while li < nl and smin <= levels[li] <= smax:
            s = levels[li]
            if b == a:
                times[li] = t[k + 1]
            else:
                times[li] = t[k] + (s - a) / (b - a) * (t[k + 1] - t[k])
            found[li] = 1
            li += 1
    return times, found


@njit
def upcrossings(t, v, jump, level):
    """Number of passages of the path from below `level` to (at or) above it."""
    n = t.shape[0]
    count = 0
    below = v[0] < level
    if not below and v[0] >= level:
        count = 1  # starts at or above
    for k in range(n - 1):
        a = v[k]
        b = v[k + 1] - jump[k + 1]
        if below and b >= level:
            count += 1
            below = False
        elif b < level:
            below = True
        if k + 1 < n - 1:
            post = v[k + 1]
            if below and post >= level:
                count += 1
                below = False
    return count


@njit
def running_min(t, v, jump):
    """Running minimum of f over [0, t[k]] evaluated at each breakpoint."""
    n = t.shape[0]
    out = np.empty(n)
    cur = v[0]
    out[0] = cur
    for k in range(1, n):
        pre = v[k] - jump[k]
        if pre < cur:
            cur = pre
        out[k] = cur
        if v[k] < cur:
            cur = v[k]
    return out


@njit
def hcirc_occupation(t, v, jump, kend, eps):
    """Occupation integrals for the height estimator at eval index kend.

    For each epsilon in `eps` returns
        integral_0^{t[kend]} 1{f(s) - inf_{[s, t_kend]} f <= eps} ds,
    computed exactly on the piecewise-affine path.
    """
    ne = eps.shape[0]
    out = np.zeros(ne)
    mnext = v[kend]  # running inf of f over [t[k+1], t_kend]
    for k in range(kend - 1, -1, -1):
        a = v[k]
        b = v[k + 1] - jump[k + 1]
        dt = t[k + 1] - t[k]
        mseg = b if b < mnext else mnext
        if dt > 0.0:
            for j in range(ne):
                c = mseg + eps[j]
                if a <= c and b <= c:
                    out[j] += dt
                elif a > c and b > c:
                    pass
                elif b > a:
                    out[j] += dt * (c - a) / (b - a)
                else:
                    out[j] += dt * (c - b) / (a - b)
        if a < mnext:
            mnext = a
        if b < mnext:
            mnext = b
    return out


@njit
def generations_from_contour(t, v, jump, tol):
    """Generation of each individual of a finite-variation contour.

    Individuals are the initial lifeline plus one per upward jump; the
    generation of a jump-born individual is one more than that of the
    lifeline the jump interrupts, tracked with a birth-height stack.
    Returns (births array, generations array, count)."""
    n = t.shape[0]
    births = np.empty(n)
    gens = np.empty(n, np.int64)
    stack = np.empty(n + 1)
    stack[0] = 0.0  # root lifeline starts at height 0
    depth = 1
    births[0] = 0.0
    gens[0] = 0
    m = 1
    for k in range(1, n):
        if jump[k] <= 0.0:
            continue
        birth = v[k] - jump[k]
        while depth > 0 and stack[depth - 1] > birth + tol:
            depth -= 1
        births[m] = birth
        gens[m] = depth  # parent generation is depth - 1
        m += 1
        stack[depth] = birth
        depth += 1
    return births[:m], gens[:m], m
