"""Compiled scalar kernels for the simulator and DS modulation hot path.

Everything here works on plain float64 arrays so it can be called from
numba-compiled loops; the public wrappers live in ``env2d`` and ``ds``.
"""

import math

import numpy as np
from numba import njit

TWO_PI = 2.0 * math.pi
FD_STEP = 1e-4


@njit(cache=True)
def rbf_field(pts, gamma, x, y):
    s = 0.0
    for i in range(pts.shape[0]):
        dx = x - pts[i, 0]
        dy = y - pts[i, 1]
        s += math.exp(-gamma * (dx * dx + dy * dy))
    return s


@njit(cache=True)
def rbf_grad(pts, gamma, x, y):
    gx = 0.0
    gy = 0.0
    for i in range(pts.shape[0]):
        dx = x - pts[i, 0]
        dy = y - pts[i, 1]
        w = math.exp(-gamma * (dx * dx + dy * dy))
        gx -= 2.0 * gamma * w * dx
        gy -= 2.0 * gamma * w * dy
    return gx, gy


@njit(cache=True)
def norm2(x, y):
    return math.hypot(x, y)


@njit(cache=True)
def cap_speed(vx, vy, max_speed):
    sp = math.hypot(vx, vy)
    if sp > max_speed:
        return vx * (max_speed / sp), vy * (max_speed / sp)
    return vx, vy


@njit(cache=True)
def _clip(v, lo, hi):
    return min(max(v, lo), hi)


@njit(cache=True)
def sim_step(pts, gamma, eta, lo, hi, clamp, nsub, x, y, ax, ay):
    ax = _clip(ax, -clamp, clamp)
    ay = _clip(ay, -clamp, clamp)
    tx = _clip(x + ax, lo, hi)
    ty = _clip(y + ay, lo, hi)
    if rbf_field(pts, gamma, tx, ty) <= eta:
        return tx, ty
    mx = ax / nsub
    my = ay / nsub
    for _ in range(nsub):
        cx = _clip(x + mx, lo, hi)
        cy = _clip(y + my, lo, hi)
        if rbf_field(pts, gamma, cx, cy) <= eta:
            x = cx
            y = cy
            continue
        nx, ny = rbf_grad(pts, gamma, x, y)
        n = math.hypot(nx, ny)
        if n == 0.0:
            continue
        nx /= n
        ny /= n
        dot = mx * nx + my * ny
        tx = mx - dot * nx
        ty = my - dot * ny
        # projection can grow one axis; rescale to keep the per-axis bound
        big = max(abs(tx), abs(ty))
        lim = clamp / nsub
        if big > lim:
            tx *= lim / big
            ty *= lim / big
        cx = _clip(x + tx, lo, hi)
        cy = _clip(y + ty, lo, hi)
        if rbf_field(pts, gamma, cx, cy) <= eta:
            x = cx
            y = cy
    return x, y


@njit(cache=True)
def star_gamma(ref, radii, x, y):
    dx = x - ref[0]
    dy = y - ref[1]
    rho = math.hypot(dx, dy)
    if rho == 0.0:
        return 0.0
    n = radii.shape[0]
    t = (math.atan2(dy, dx) % TWO_PI) * (n / TWO_PI)
    k0 = math.floor(t)
    f = t - k0
    k = int(k0) % n
    r = (1.0 - f) * radii[k] + f * radii[(k + 1) % n]
    return rho / r


@njit(cache=True)
def modulate_one(ref, radii, x, y, ux, uy):
    """Returns the modulated velocity and Gamma at (x, y)."""
    g = star_gamma(ref, radii, x, y)
    dx = x - ref[0]
    dy = y - ref[1]
    rho = math.hypot(dx, dy)
    if rho > 0.0:
        sx = dx / rho
        sy = dy / rho
    else:
        sx = 1.0
        sy = 0.0
    if g <= 1.0:
        un = math.hypot(ux, uy)
        return sx * un, sy * un, g

    h = FD_STEP
    gx = (star_gamma(ref, radii, x + h, y) - star_gamma(ref, radii, x - h, y)) / (2.0 * h)
    gy = (star_gamma(ref, radii, x, y + h) - star_gamma(ref, radii, x, y - h)) / (2.0 * h)
    gn = math.hypot(gx, gy)
    if gn > 0.0:
        ex = -gy / gn
        ey = gx / gn
    else:
        ex = -sy
        ey = sx
    det = sx * ey - ex * sy
    if det == 0.0:
        return ux, uy, g
    cs = (ux * ey - ex * uy) / det
    ce = (sx * uy - ux * sy) / det
    ls = 1.0 - 1.0 / g
    le = 1.0 + 1.0 / g
    return ls * cs * sx + le * ce * ex, ls * cs * sy + le * ce * ey, g


@njit(cache=True)
def obstacle_weights(gammas):
    k = gammas.shape[0]
    w = np.empty(k)
    if k == 1:
        w[0] = 1.0
        return w
    m = np.empty(k)
    for i in range(k):
        m[i] = max(gammas[i] - 1.0, 0.0)
    total = 0.0
    for i in range(k):
        b = 1.0
        for j in range(k):
            if j != i:
                b *= m[j]
        w[i] = b
        total += b
    if total > 0.0:
        for i in range(k):
            w[i] /= total
        return w
    n_touch = 0
    for i in range(k):
        if m[i] == 0.0:
            n_touch += 1
    for i in range(k):
        w[i] = 1.0 / n_touch if m[i] == 0.0 else 0.0
    return w


@njit(cache=True)
def modulate_all(refs, radii, x, y, ux, uy):
    k = refs.shape[0]
    mods = np.empty((k, 2))
    gams = np.empty(k)
    for i in range(k):
        mx, my, g = modulate_one(refs[i], radii[i], x, y, ux, uy)
        mods[i, 0] = mx
        mods[i, 1] = my
        gams[i] = g
    return mods, gams


@njit(cache=True)
def aggregate_velocity(refs, radii, x, y, gx, gy):
    ux = gx - x
    uy = gy - y
    n0 = math.hypot(ux, uy)
    k = refs.shape[0]
    if k == 0 or n0 == 0.0:
        return ux, uy
    mods, gams = modulate_all(refs, radii, x, y, ux, uy)
    w = obstacle_weights(gams)
    best = 0
    for i in range(k):
        if w[i] > w[best]:
            best = i
    if w[best] == 1.0:
        return mods[best, 0], mods[best, 1]

    e0x = ux / n0
    e0y = uy / n0
    px = -e0y
    py = e0x
    na = 0.0
    ka = 0.0
    for i in range(k):
        ni = math.hypot(mods[i, 0], mods[i, 1])
        na += w[i] * ni
        if ni > 0.0:
            c = (mods[i, 0] * e0x + mods[i, 1] * e0y) / ni
            s = (mods[i, 0] * px + mods[i, 1] * py) / ni
            if s != 0.0:
                # arccos(c) * sign(s), via atan2 to keep precision near 0
                sgn = 1.0 if s > 0.0 else -1.0
                ka += w[i] * math.atan2(abs(s), c) * sgn
    c = math.cos(ka)
    s = math.sin(ka)
    return na * (c * e0x + s * px), na * (c * e0y + s * py)


@njit(cache=True)
def ds_rollout(pts, gamma, eta, lo, hi, clamp, nsub, refs, radii,
               sx, sy, gx, gy, goal_tol, max_steps, max_speed):
    out = np.empty((max_steps + 1, 2))
    x = sx
    y = sy
    out[0, 0] = x
    out[0, 1] = y
    n = 1
    for _ in range(max_steps):
        if math.hypot(x - gx, y - gy) <= goal_tol:
            break
        vx, vy = aggregate_velocity(refs, radii, x, y, gx, gy)
        vx, vy = cap_speed(vx, vy, max_speed)
        x, y = sim_step(pts, gamma, eta, lo, hi, clamp, nsub, x, y, vx, vy)
        out[n, 0] = x
        out[n, 1] = y
        n += 1
    return out[:n].copy()
