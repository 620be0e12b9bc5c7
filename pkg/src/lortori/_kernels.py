"""Compiled inner loops. Metrics arrive packed as (kinds, scales, terms).

kinds[c]: 0 Fourier series, 1 scale*exp(2 f), 2 scale/cos(x)^2 (test hook)
terms rows: (component, m, n, a, b)
"""
import math

import numpy as np
from numba import njit

TWO_PI = 2.0 * math.pi


@njit(cache=True)
def comp_jet(kinds, scales, terms, c, x, y):
    f = fx = fy = fxx = fxy = fyy = 0.0
    kind = kinds[c]
    if kind == 2:
        cx = math.cos(x)
        tx = math.tan(x)
        s = scales[c] / (cx * cx)
        return s, 2.0 * s * tx, 0.0, s * (2.0 + 6.0 * tx * tx), 0.0, 0.0
    for r in range(terms.shape[0]):
        if int(terms[r, 0]) != c:
            continue
        m = terms[r, 1]
        n = terms[r, 2]
        a = terms[r, 3]
        b = terms[r, 4]
        if m == 0.0 and n == 0.0:
            f += a
            continue
        ph = m * x + n * y
        ph = TWO_PI * (ph - math.floor(ph))
        co = math.cos(ph)
        si = math.sin(ph)
        km = TWO_PI * m
        kn = TWO_PI * n
        val = a * co + b * si
        d1 = -a * si + b * co
        f += val
        fx += km * d1
        fy += kn * d1
        fxx -= km * km * val
        fxy -= km * kn * val
        fyy -= kn * kn * val
    if kind == 1:
        e = scales[c] * math.exp(2.0 * f)
        return (e, 2.0 * fx * e, 2.0 * fy * e, (2.0 * fxx + 4.0 * fx * fx) * e,
                (2.0 * fxy + 4.0 * fx * fy) * e, (2.0 * fyy + 4.0 * fy * fy) * e)
    return f, fx, fy, fxx, fxy, fyy


@njit(cache=True)
def _post(kind, scale, f, fx, fy, x):
    if kind == 1:
        e = scale * math.exp(2.0 * f)
        return e, 2.0 * fx * e, 2.0 * fy * e
    if kind == 2:
        cx = math.cos(x)
        s = scale / (cx * cx)
        return s, 2.0 * s * math.tan(x), 0.0
    return f, fx, fy


@njit(cache=True)
def metric_first(kinds, scales, terms, x, y):
    """Values and first derivatives of all three components in one pass."""
    g0 = g1 = g2 = 0.0
    x0 = x1 = x2 = 0.0
    y0 = y1 = y2 = 0.0
    for r in range(terms.shape[0]):
        c = terms[r, 0]
        m = terms[r, 1]
        n = terms[r, 2]
        a = terms[r, 3]
        if m == 0.0 and n == 0.0:
            v = a
            dx = 0.0
            dy = 0.0
        else:
            b = terms[r, 4]
            ph = m * x + n * y
            ph = TWO_PI * (ph - math.floor(ph))
            co = math.cos(ph)
            si = math.sin(ph)
            d1 = -a * si + b * co
            v = a * co + b * si
            dx = TWO_PI * m * d1
            dy = TWO_PI * n * d1
        if c == 0.0:
            g0 += v
            x0 += dx
            y0 += dy
        elif c == 1.0:
            g1 += v
            x1 += dx
            y1 += dy
        else:
            g2 += v
            x2 += dx
            y2 += dy
    if kinds[0] != 0:
        g0, x0, y0 = _post(kinds[0], scales[0], g0, x0, y0, x)
    if kinds[1] != 0:
        g1, x1, y1 = _post(kinds[1], scales[1], g1, x1, y1, x)
    if kinds[2] != 0:
        g2, x2, y2 = _post(kinds[2], scales[2], g2, x2, y2, x)
    return g0, g1, g2, x0, x1, x2, y0, y1, y2


@njit(cache=True)
def accel(kinds, scales, terms, x, y, vx, vy):
    """-Gamma^a_{bc} v^b v^c."""
    g11, g12, g22, g11x, g12x, g22x, g11y, g12y, g22y = metric_first(
        kinds, scales, terms, x, y)
    # (d_x g) v and (d_y g) v
    ax0 = g11x * vx + g12x * vy
    ax1 = g12x * vx + g22x * vy
    ay0 = g11y * vx + g12y * vy
    ay1 = g12y * vx + g22y * vy
    qx = vx * ax0 + vy * ax1
    qy = vx * ay0 + vy * ay1
    l0 = vx * ax0 + vy * ay0 - 0.5 * qx
    l1 = vx * ax1 + vy * ay1 - 0.5 * qy
    det = g11 * g22 - g12 * g12
    return -(g22 * l0 - g12 * l1) / det, -(-g12 * l0 + g11 * l1) / det


@njit(cache=True)
def curvature(kinds, scales, terms, x, y):
    """Gauss curvature by the Brioschi formula."""
    E, Eu, Ev, Euu, Euv, Evv = comp_jet(kinds, scales, terms, 0, x, y)
    F, Fu, Fv, Fuu, Fuv, Fvv = comp_jet(kinds, scales, terms, 1, x, y)
    G, Gu, Gv, Guu, Guv, Gvv = comp_jet(kinds, scales, terms, 2, x, y)
    a11 = -0.5 * Evv + Fuv - 0.5 * Guu
    a12 = 0.5 * Eu
    a13 = Fu - 0.5 * Ev
    a21 = Fv - 0.5 * Gu
    a31 = 0.5 * Gv
    detA = (a11 * (E * G - F * F) - a12 * (a21 * G - F * a31)
            + a13 * (a21 * F - E * a31))
    b12 = 0.5 * Ev
    b13 = 0.5 * Gu
    detB = -b12 * (b12 * G - F * b13) + b13 * (b12 * F - E * b13)
    w = E * G - F * F
    return (detA - detB) / (w * w)


@njit(cache=True)
def rk4_step(kinds, scales, terms, x, y, vx, vy, h):
    k1x, k1y = vx, vy
    k1u, k1v = accel(kinds, scales, terms, x, y, vx, vy)
    k2x, k2y = vx + 0.5 * h * k1u, vy + 0.5 * h * k1v
    k2u, k2v = accel(kinds, scales, terms, x + 0.5 * h * k1x, y + 0.5 * h * k1y,
                     k2x, k2y)
    k3x, k3y = vx + 0.5 * h * k2u, vy + 0.5 * h * k2v
    k3u, k3v = accel(kinds, scales, terms, x + 0.5 * h * k2x, y + 0.5 * h * k2y,
                     k3x, k3y)
    k4x, k4y = vx + h * k3u, vy + h * k3v
    k4u, k4v = accel(kinds, scales, terms, x + h * k3x, y + h * k3y, k4x, k4y)
    h6 = h / 6.0
    return (x + h6 * (k1x + 2 * k2x + 2 * k3x + k4x),
            y + h6 * (k1y + 2 * k2y + 2 * k3y + k4y),
            vx + h6 * (k1u + 2 * k2u + 2 * k3u + k4u),
            vy + h6 * (k1v + 2 * k2v + 2 * k3v + k4v))


@njit(cache=True)
def integrate_path(kinds, scales, terms, x, y, vx, vy, h, n, out):
    """n fixed RK4 steps; out has shape (n + 1, 4)."""
    out[0, 0] = x
    out[0, 1] = y
    out[0, 2] = vx
    out[0, 3] = vy
    for i in range(n):
        x, y, vx, vy = rk4_step(kinds, scales, terms, x, y, vx, vy, h)
        out[i + 1, 0] = x
        out[i + 1, 1] = y
        out[i + 1, 2] = vx
        out[i + 1, 3] = vy


@njit(cache=True)
def integrate_final(kinds, scales, terms, x, y, vx, vy, h, n):
    for i in range(n):
        x, y, vx, vy = rk4_step(kinds, scales, terms, x, y, vx, vy, h)
    return x, y, vx, vy


@njit(cache=True)
def batch_final(kinds, scales, terms, states, hs, ns, out):
    for k in range(states.shape[0]):
        r = integrate_final(kinds, scales, terms, states[k, 0], states[k, 1],
                            states[k, 2], states[k, 3], hs[k], ns[k])
        for j in range(4):
            out[k, j] = r[j]


@njit(cache=True)
def to_level(kinds, scales, terms, x, y, vx, vy, h, ylev, max_steps):
    """Integrate until y reaches ylev; the last step is shortened to land on it.

    Returns (x, y, vx, vy, t, ok).
    """
    t = 0.0
    for i in range(max_steps):
        nx, ny, nvx, nvy = rk4_step(kinds, scales, terms, x, y, vx, vy, h)
        if ny >= ylev:
            # secant/Newton on the partial step length s in (0, h]
            s = h * (ylev - y) / (ny - y)
            for it in range(30):
                px, py, pvx, pvy = rk4_step(kinds, scales, terms, x, y, vx, vy, s)
                r = py - ylev
                if abs(r) < 1e-15:
                    break
                ds = r / pvy
                s -= ds
                if abs(ds) < 1e-16 * (1.0 + s):
                    px, py, pvx, pvy = rk4_step(kinds, scales, terms, x, y, vx, vy, s)
                    break
            return px, py, pvx, pvy, t + s, True
        if ny <= y and vy <= 0.0:
            return nx, ny, nvx, nvy, t + h, False
        x, y, vx, vy = nx, ny, nvx, nvy
        t += h
    return x, y, vx, vy, t, False


@njit(cache=True)
def batch_to_level(kinds, scales, terms, states, hs, ylev, max_steps, out):
    for k in range(states.shape[0]):
        x, y, vx, vy, t, ok = to_level(kinds, scales, terms, states[k, 0],
                                       states[k, 1], states[k, 2], states[k, 3],
                                       hs[k], ylev, max_steps)
        out[k, 0] = x
        out[k, 1] = y
        out[k, 2] = vx
        out[k, 3] = vy
        out[k, 4] = t
        out[k, 5] = 1.0 if ok else 0.0


@njit(cache=True)
def _jacobi_rhs(kinds, scales, terms, x, y, vx, vy, J, dJ, sigma, k_const, use_const):
    ax, ay = accel(kinds, scales, terms, x, y, vx, vy)
    if use_const:
        coef = k_const
    else:
        coef = sigma * curvature(kinds, scales, terms, x, y)
    return vx, vy, ax, ay, dJ, -coef * J


@njit(cache=True)
def jacobi_path(kinds, scales, terms, x, y, vx, vy, h, n, sigma, k_const,
                use_const, out):
    """RK4 for (geodesic, J, J') with J'' + coef J = 0, J(0)=0, J'(0)=1."""
    s = np.empty(6)
    s[0] = x
    s[1] = y
    s[2] = vx
    s[3] = vy
    s[4] = 0.0
    s[5] = 1.0
    out[0, :] = s
    k1 = np.empty(6)
    k2 = np.empty(6)
    k3 = np.empty(6)
    k4 = np.empty(6)
    tmp = np.empty(6)
    for i in range(n):
        r = _jacobi_rhs(kinds, scales, terms, s[0], s[1], s[2], s[3], s[4], s[5],
                        sigma, k_const, use_const)
        for j in range(6):
            k1[j] = r[j]
            tmp[j] = s[j] + 0.5 * h * k1[j]
        r = _jacobi_rhs(kinds, scales, terms, tmp[0], tmp[1], tmp[2], tmp[3], tmp[4],
                        tmp[5], sigma, k_const, use_const)
        for j in range(6):
            k2[j] = r[j]
            tmp[j] = s[j] + 0.5 * h * k2[j]
        r = _jacobi_rhs(kinds, scales, terms, tmp[0], tmp[1], tmp[2], tmp[3], tmp[4],
                        tmp[5], sigma, k_const, use_const)
        for j in range(6):
            k3[j] = r[j]
            tmp[j] = s[j] + h * k3[j]
        r = _jacobi_rhs(kinds, scales, terms, tmp[0], tmp[1], tmp[2], tmp[3], tmp[4],
                        tmp[5], sigma, k_const, use_const)
        for j in range(6):
            k4[j] = r[j]
            s[j] += h / 6.0 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j])
        out[i + 1, :] = s


@njit(cache=True)
def null_dir(kinds, scales, terms, x, y, family):
    """Euclidean-unit future null direction; family 0 = minus, 1 = plus."""
    a = comp_jet(kinds, scales, terms, 0, x, y)[0]
    b = comp_jet(kinds, scales, terms, 1, x, y)[0]
    c = comp_jet(kinds, scales, terms, 2, x, y)[0]
    # null (s, 1): a s^2 + 2 b s + c = 0
    disc = math.sqrt(b * b - a * c)
    q = -(b + math.copysign(disc, b))
    r1 = q / a
    r2 = c / q
    if family == 0:
        s = max(r1, r2)
    else:
        s = min(r1, r2)
    nrm = math.sqrt(s * s + 1.0)
    return s / nrm, 1.0 / nrm


@njit(cache=True)
def null_path(kinds, scales, terms, x, y, family, h, n, out):
    out[0, 0] = x
    out[0, 1] = y
    for i in range(n):
        k1x, k1y = null_dir(kinds, scales, terms, x, y, family)
        k2x, k2y = null_dir(kinds, scales, terms, x + 0.5 * h * k1x,
                            y + 0.5 * h * k1y, family)
        k3x, k3y = null_dir(kinds, scales, terms, x + 0.5 * h * k2x,
                            y + 0.5 * h * k2y, family)
        k4x, k4y = null_dir(kinds, scales, terms, x + h * k3x, y + h * k3y, family)
        x += h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
        y += h / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y)
        out[i + 1, 0] = x
        out[i + 1, 1] = y


@njit(cache=True)
def _land(kinds, scales, terms, x, y, vx, vy, h, nx_, ny_, ylev):
    s = h * (ylev - y) / (ny_ - y)
    px, py, pvx, pvy = x, y, vx, vy
    for it in range(40):
        px, py, pvx, pvy = rk4_step(kinds, scales, terms, x, y, vx, vy, s)
        r = py - ylev
        if abs(r) < 1e-15:
            break
        s -= r / pvy
    return px, pvx, pvy, s


@njit(cache=True)
def fan_levels(kinds, scales, terms, states, hs, levels, max_steps, out):
    """Record (x, vx, vy, t, ok) where each ray crosses each level y = levels[j].

    levels must be increasing; out has shape (n_rays, n_levels, 5).
    """
    nl = levels.shape[0]
    for k in range(states.shape[0]):
        x = states[k, 0]
        y = states[k, 1]
        vx = states[k, 2]
        vy = states[k, 3]
        h = hs[k]
        t = 0.0
        j = 0
        for j0 in range(nl):
            out[k, j0, 4] = 0.0
        while j < nl and levels[j] <= y:
            j += 1
        steps = 0
        while j < nl and steps < max_steps:
            nx_, ny_, nvx, nvy = rk4_step(kinds, scales, terms, x, y, vx, vy, h)
            while j < nl and ny_ >= levels[j]:
                px, pvx, pvy, s = _land(kinds, scales, terms, x, y, vx, vy, h,
                                        nx_, ny_, levels[j])
                out[k, j, 0] = px
                out[k, j, 1] = pvx
                out[k, j, 2] = pvy
                out[k, j, 3] = t + s
                out[k, j, 4] = 1.0
                j += 1
            if ny_ <= y:
                break
            x, y, vx, vy = nx_, ny_, nvx, nvy
            t += h
            steps += 1
