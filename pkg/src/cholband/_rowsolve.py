"""Jitted inner loops of the shooting solver.

One coordinate update minimizes the exact piecewise-convex 1-D objective

    (1/sigma2) * rss(u) + a |u| + b / |u|

over the floored domain {0} union {|u| >= floor}, with the reciprocal term
coming from the ratio chain of the nested penalties.  The whole per-row
iteration (sweeps alternating with the closed-form variance update) runs
inside numba; statuses are returned instead of raising: 0 ok, 1 descent
violation, 2 cascade violation.
"""

import math

import numpy as np
from numba import njit

KIND_LASSO = 0
KIND_J0 = 1
KIND_J1 = 2
KIND_J2 = 3

_TWO_THIRDS_PI = 2.0 * math.pi / 3.0


@njit(cache=True)
def _bracketed_root(c3, c2, c0, u):
    lo = 0.0 if c2 >= 0.0 else -2.0 * c2 / (3.0 * c3)
    hi = max(u, lo, 1e-300)
    for _ in range(400):
        if (c3 * hi + c2) * hi * hi + c0 > 0.0:
            break
        hi *= 4.0
    u = min(max(u, lo), hi)
    for _ in range(80):
        h = (c3 * u + c2) * u * u + c0
        if h > 0.0:
            hi = u
        else:
            lo = u
        d = (3.0 * c3 * u + 2.0 * c2) * u
        step = u - h / d if d > 0.0 else 0.5 * (lo + hi)
        if not lo < step < hi:
            step = 0.5 * (lo + hi)
        if abs(step - u) <= 1e-14 * max(abs(u), 1e-300):
            return step
        u = step
    return u


@njit(cache=True)
def _cbrt(x):
    if x >= 0.0:
        return x ** (1.0 / 3.0)
    return -((-x) ** (1.0 / 3.0))


@njit(cache=True)
def _positive_root(c3, c2, c0):
    """Unique positive root of c3 u^3 + c2 u^2 + c0 with c3 > 0, c0 < 0."""
    big_p = c2 / c3
    big_r = c0 / c3
    p = -big_p * big_p / 3.0
    q = big_p * big_p * big_p * (2.0 / 27.0) + big_r
    shift = big_p / 3.0
    disc = 0.25 * q * q + p * p * p / 27.0
    u = -1.0
    if disc >= 0.0:
        s = math.sqrt(disc)
        u = _cbrt(-0.5 * q + s) + _cbrt(-0.5 * q - s) - shift
    else:
        mfac = 2.0 * math.sqrt(-p / 3.0)
        arg = 3.0 * q / (p * mfac)
        if arg > 1.0:
            arg = 1.0
        elif arg < -1.0:
            arg = -1.0
        theta = math.acos(arg) / 3.0
        for k in range(3):
            w = mfac * math.cos(theta - _TWO_THIRDS_PI * k) - shift
            if w > u:
                u = w
    if u > 0.0:
        for _ in range(2):
            h = (c3 * u + c2) * u * u + c0
            d = (3.0 * c3 * u + 2.0 * c2) * u
            if d <= 0.0:
                break
            u -= h / d
        if u > 0.0:
            h = (c3 * u + c2) * u * u + c0
            if abs(h) <= 1e-6 * (abs(c0) + abs(c3 * u * u * u)):
                return u
    return _bracketed_root(c3, c2, c0, u if u > 0.0 else 1.0)


@njit(cache=True)
def _coord_value(a2, a1, a, b, u):
    if u == 0.0:
        return 0.0 if b == 0.0 else math.inf
    au = abs(u)
    return a2 * u * u - 2.0 * a1 * u + a * au + b / au


@njit(cache=True)
def _minimize_coordinate(a2, a1, a, b, floor):
    """Exact minimizer over {0 when admissible} union {|u| >= floor}; each
    half-line is unimodal, so its constrained minimum sits at the stationary
    point or at the floor boundary."""
    if a2 <= 0.0:
        return 0.0
    if b == 0.0:
        up = (2.0 * a1 - a) / (2.0 * a2)
        un = (2.0 * a1 + a) / (2.0 * a2)
        best = 0.0
        best_val = 0.0
    else:
        up = _positive_root(2.0 * a2, a - 2.0 * a1, -b)
        un = -_positive_root(2.0 * a2, a + 2.0 * a1, -b)
        best = math.inf
        best_val = math.inf
    if up <= floor:
        up = floor
    if un >= -floor:
        un = -floor
    val = _coord_value(a2, a1, a, b, up)
    if val < best_val:
        best, best_val = up, val
    val = _coord_value(a2, a1, a, b, un)
    if val < best_val:
        best = un
    return best


@njit(cache=True)
def _eval_penalty(kind, lam, lam2, phi, lead_abs):
    m = phi.shape[0]
    if m == 0:
        return 0.0
    total_abs = 0.0
    for t in range(m):
        total_abs += abs(phi[t])
    if kind == KIND_LASSO:
        return lam * total_abs
    if kind == KIND_J2:
        total = lam * total_abs
        if lam2 > 0.0:
            for t in range(m - 1):
                num = abs(phi[t])
                if num > 0.0:
                    den = abs(phi[t + 1])
                    if den == 0.0:
                        return math.inf
                    total += lam2 * num / den
        return total
    if lam == 0.0:
        return 0.0
    lead = abs(phi[m - 1])
    if kind == KIND_J1:
        lead /= lead_abs
    total = lead
    for t in range(m - 1):
        num = abs(phi[t])
        if num > 0.0:
            den = abs(phi[t + 1])
            if den == 0.0:
                return math.inf
            total += num / den
    return lam * total


@njit(cache=True)
def sweep(gsub, g, s, phi, sigma2, kind, lam, lam2, lead_abs, floor):
    """One in-place coordinate pass; ``s`` must enter as gsub @ phi.

    Returns (max_move, status).
    """
    m = phi.shape[0]
    max_move = 0.0
    for i in range(m):
        old = phi[i]
        gii = gsub[i, i]
        c1 = g[i] - s[i] + gii * old
        a = 0.0
        b = 0.0
        forced = False
        if kind == KIND_LASSO:
            a = lam
        else:
            if kind == KIND_J2:
                ratio_coef = lam2
                a = lam
            elif lam == 0.0:
                ratio_coef = 0.0
            else:
                ratio_coef = lam
            if i < m - 1:
                if ratio_coef > 0.0:
                    nxt = abs(phi[i + 1])
                    if nxt == 0.0:
                        forced = True
                    else:
                        a += ratio_coef / nxt
            else:
                if kind == KIND_J1:
                    a = lam / lead_abs
                elif kind == KIND_J0:
                    a = lam
            if i > 0 and ratio_coef > 0.0:
                b = ratio_coef * abs(phi[i - 1])
            if forced and b > 0.0:
                return max_move, 2
        if forced:
            new = 0.0
        else:
            new = _minimize_coordinate(gii / sigma2, c1 / sigma2, a, b, floor)
        if new != old:
            delta = new - old
            for t in range(m):
                s[t] += gsub[i, t] * delta
            phi[i] = new
            if abs(delta) > max_move:
                max_move = abs(delta)
    return max_move, 0


@njit(cache=True)
def fit_row(gsub, g, yy, phi0, n, var_floor, kind, lam, lam2, lead_abs,
            floor, rel_tol, zero_threshold, max_iters):
    """Full alternating iteration for one row; final hard thresholding
    applied, contiguity left to the caller.  Returns (phi, sigma2, status)."""
    m = phi0.shape[0]
    phi = phi0.copy()
    s = gsub @ phi
    rss = yy - 2.0 * np.dot(g, phi) + np.dot(phi, s)
    if rss < 0.0:
        rss = 0.0
    sigma2 = rss / n
    if sigma2 < var_floor:
        sigma2 = var_floor
    obj = n * math.log(sigma2) + rss / sigma2 + _eval_penalty(kind, lam, lam2, phi, lead_abs)
    for _ in range(max_iters):
        s = gsub @ phi
        max_move, status = sweep(gsub, g, s, phi, sigma2, kind, lam, lam2, lead_abs, floor)
        if status != 0:
            return phi, sigma2, status
        rss = yy - 2.0 * np.dot(g, phi) + np.dot(phi, s)
        if rss < 0.0:
            rss = 0.0
        sigma2_new = rss / n
        if sigma2_new < var_floor:
            sigma2_new = var_floor
        obj_new = n * math.log(sigma2_new) + rss / sigma2_new \
            + _eval_penalty(kind, lam, lam2, phi, lead_abs)
        if math.isfinite(obj) and obj_new > obj + 1e-9 * max(1.0, abs(obj)):
            return phi, sigma2_new, 1
        scale = 1.0
        for t in range(m):
            if abs(phi[t]) > scale:
                scale = abs(phi[t])
        coef_ok = max_move <= rel_tol * scale
        obj_ok = (math.isfinite(obj) and math.isfinite(obj_new)
                  and abs(obj_new - obj) < rel_tol * max(1.0, abs(obj)))
        sigma2 = sigma2_new
        obj = obj_new
        if coef_ok and obj_ok:
            break
    for t in range(m):
        if abs(phi[t]) <= zero_threshold:
            phi[t] = 0.0
    return phi, sigma2, 0
