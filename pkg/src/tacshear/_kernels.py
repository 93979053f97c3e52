"""Compiled inner loops shared by the single-environment API and the batch engine.

Every kernel processes environments independently and reduces in a fixed
order with compensated summation, so one environment's output does not
depend on how many other environments share the call.
"""

import math
import os

import numba
import numpy as np
from numba import njit, prange

if "NUMBA_THREADING_LAYER" not in os.environ:
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]

MODE_VECTOR = 0
MODE_RADIAL = 1
MODE_SWIRL = 2

FLAG_FORCE_CLIP = 1
FLAG_OFFSET_CLIP = 2
FLAG_NORMAL_CLAMP = 4


@njit(cache=True)
def contact_fraction(phi_now, phi_prev):
    if phi_now == phi_prev:
        return 1.0 if phi_now < 0.0 else 0.0
    a = max(-phi_now, 0.0) - max(-phi_prev, 0.0)
    return a / (phi_prev - phi_now)


@njit(cache=True)
def _quat_mat(q, R):
    w, x, y, z = q[0], q[1], q[2], q[3]
    R[0, 0] = 1.0 - 2.0 * (y * y + z * z)
    R[0, 1] = 2.0 * (x * y - w * z)
    R[0, 2] = 2.0 * (x * z + w * y)
    R[1, 0] = 2.0 * (x * y + w * z)
    R[1, 1] = 1.0 - 2.0 * (x * x + z * z)
    R[1, 2] = 2.0 * (y * z - w * x)
    R[2, 0] = 2.0 * (x * z - w * y)
    R[2, 1] = 2.0 * (y * z + w * x)
    R[2, 2] = 1.0 - 2.0 * (x * x + y * y)


@njit(cache=True)
def _slerp(q0, t0, q1, t1, s, q, t):
    d = q0[0] * q1[0] + q0[1] * q1[1] + q0[2] * q1[2] + q0[3] * q1[3]
    sign = 1.0
    if d < 0.0:
        sign = -1.0
        d = -d
    if d > 0.9995:
        a = 1.0 - s
        b = s * sign
    else:
        th = math.acos(d)
        st = math.sin(th)
        a = math.sin((1.0 - s) * th) / st
        b = sign * math.sin(s * th) / st
    n = 0.0
    for i in range(4):
        q[i] = a * q0[i] + b * q1[i]
        n += q[i] * q[i]
    n = math.sqrt(n)
    for i in range(4):
        q[i] /= n
    for i in range(3):
        t[i] = t0[i] + s * (t1[i] - t0[i])


@njit(cache=True)
def _track_points(R, t, local_pts, local_nrm, area, plane_h, E, K, mu, mu_hat,
                  forces, offsets, prev_pts, prev_phi, flags):
    """One tracker update of every surface point of one environment (in place)."""
    M = local_pts.shape[0]
    for j in range(M):
        lx, ly, lz = local_pts[j, 0], local_pts[j, 1], local_pts[j, 2]
        ox = R[0, 0] * lx + R[0, 1] * ly + R[0, 2] * lz + t[0]
        oy = R[1, 0] * lx + R[1, 1] * ly + R[1, 2] * lz + t[1]
        oz = R[2, 0] * lx + R[2, 1] * ly + R[2, 2] * lz + t[2]
        ax, ay, az = local_nrm[j, 0], local_nrm[j, 1], local_nrm[j, 2]
        nx = R[0, 0] * ax + R[0, 1] * ay + R[0, 2] * az
        ny = R[1, 0] * ax + R[1, 1] * ay + R[1, 2] * az
        nz = R[2, 0] * ax + R[2, 1] * ay + R[2, 2] * az

        phi = oz - plane_h
        alpha = contact_fraction(phi, prev_phi[j])
        dx = alpha * (ox - prev_pts[j, 0])
        dy = alpha * (oy - prev_pts[j, 1])
        dz = alpha * (oz - prev_pts[j, 2])
        dn = dx * nx + dy * ny + dz * nz
        tx = dx - dn * nx
        ty = dy - dn * ny
        tz = dz - dn * nz

        flag = 0
        keep = phi < 0.0
        for which in range(2):
            if which == 0:
                buf = forces
                kn = E * area[j]
                kt = K * area[j]
                fr = mu
            else:
                buf = offsets
                kn = 1.0
                kt = 1.0
                fr = mu_hat
            gx, gy, gz = buf[j, 0], buf[j, 1], buf[j, 2]
            gn = gx * nx + gy * ny + gz * nz
            # stored vectors are restoring: normal part points against the outward normal
            fn = -gn + kn * dn
            sx = gx - gn * nx - kt * tx
            sy = gy - gn * ny - kt * ty
            sz = gz - gn * nz - kt * tz
            if fn < 0.0:
                fn = 0.0
                flag |= FLAG_NORMAL_CLAMP
            s2 = sx * sx + sy * sy + sz * sz
            if s2 > 0.0:
                sn = math.sqrt(s2)
                lim = fr * fn
                if sn > lim:
                    sc = lim / sn
                    sx *= sc
                    sy *= sc
                    sz *= sc
                    flag |= FLAG_FORCE_CLIP if which == 0 else FLAG_OFFSET_CLIP
            if keep:
                buf[j, 0] = sx - fn * nx
                buf[j, 1] = sy - fn * ny
                buf[j, 2] = sz - fn * nz
            else:
                buf[j, 0] = 0.0
                buf[j, 1] = 0.0
                buf[j, 2] = 0.0
        flags[j] = flag if keep else 0
        prev_pts[j, 0] = ox
        prev_pts[j, 1] = oy
        prev_pts[j, 2] = oz
        prev_phi[j] = phi


@njit(cache=True)
def _max_disp(R, t, local_pts, prev_pts):
    m = 0.0
    for j in range(local_pts.shape[0]):
        lx, ly, lz = local_pts[j, 0], local_pts[j, 1], local_pts[j, 2]
        ox = R[0, 0] * lx + R[0, 1] * ly + R[0, 2] * lz + t[0] - prev_pts[j, 0]
        oy = R[1, 0] * lx + R[1, 1] * ly + R[1, 2] * lz + t[1] - prev_pts[j, 1]
        oz = R[2, 0] * lx + R[2, 1] * ly + R[2, 2] * lz + t[2] - prev_pts[j, 2]
        d = ox * ox + oy * oy + oz * oz
        if d > m:
            m = d
    return math.sqrt(m)


@njit(cache=True)
def _step_env(q_prev, t_prev, q_now, t_now, local_pts, local_nrm, area, plane_h,
              E, K, mu, mu_hat, max_step, forces, offsets, prev_pts, prev_phi, flags):
    R = np.empty((3, 3))
    _quat_mat(q_now, R)
    n_sub = 1
    if max_step > 0.0:
        dmax = _max_disp(R, t_now, local_pts, prev_pts)
        if dmax > max_step:
            n_sub = int(math.ceil(dmax / max_step))
    q = np.empty(4)
    t = np.empty(3)
    for s in range(1, n_sub):
        _slerp(q_prev, t_prev, q_now, t_now, s / n_sub, q, t)
        _quat_mat(q, R)
        _track_points(R, t, local_pts, local_nrm, area, plane_h, E, K, mu, mu_hat,
                      forces, offsets, prev_pts, prev_phi, flags)
    _quat_mat(q_now, R)
    _track_points(R, t_now, local_pts, local_nrm, area, plane_h, E, K, mu, mu_hat,
                  forces, offsets, prev_pts, prev_phi, flags)
    return n_sub


@njit(cache=True, parallel=True)
def track_step(q_prev, t_prev, q_now, t_now, active, local_pts, local_nrm, area, plane_h,
               E, K, mu, mu_hat, max_step, forces, offsets, prev_pts, prev_phi, flags, n_sub):
    """Advance every active environment by one pose (arrays mutated in place)."""
    B = q_now.shape[0]
    for b in prange(B):
        if active[b]:
            n_sub[b] = _step_env(q_prev[b], t_prev[b], q_now[b], t_now[b], local_pts, local_nrm,
                                 area, plane_h, E, K, mu, mu_hat, max_step, forces[b],
                                 offsets[b], prev_pts[b], prev_phi[b], flags[b])


@njit(cache=True, parallel=True)
def place_points(q, t, local_pts, plane_h, prev_pts, prev_phi, active):
    """Initialise world points and elastomer SDF values without tracking."""
    B = q.shape[0]
    for b in prange(B):
        if not active[b]:
            continue
        R = np.empty((3, 3))
        _quat_mat(q[b], R)
        for j in range(local_pts.shape[0]):
            lx, ly, lz = local_pts[j, 0], local_pts[j, 1], local_pts[j, 2]
            for i in range(3):
                prev_pts[b, j, i] = R[i, 0] * lx + R[i, 1] * ly + R[i, 2] * lz + t[b, i]
            prev_phi[b, j] = prev_pts[b, j, 2] - plane_h


@njit(cache=True)
def _gauss_env(qxy, w, mx, my, cx, cy, mode, lam, out):
    N = qxy.shape[0]
    K = w.shape[0]
    for n in range(N):
        x = qxy[n, 0]
        y = qxy[n, 1]
        sx = 0.0
        sy = 0.0
        ex = 0.0
        ey = 0.0
        for k in range(K):
            wk = w[k]
            if wk == 0.0:
                continue
            vx = x - cx[k]
            vy = y - cy[k]
            g = wk * math.exp(-lam * (vx * vx + vy * vy))
            if mode == MODE_RADIAL:
                ux = g * vx
                uy = g * vy
            elif mode == MODE_SWIRL:
                ux = -g * vy
                uy = g * vx
            else:
                ux = g * mx[k]
                uy = g * my[k]
            # Kahan summation
            yx = ux - ex
            tx = sx + yx
            ex = (tx - sx) - yx
            sx = tx
            yy = uy - ey
            ty = sy + yy
            ey = (ty - sy) - yy
            sy = ty
        out[n, 0] = sx
        out[n, 1] = sy


@njit(cache=True, parallel=True)
def gauss_sum(qxy, w, mx, my, cx, cy, mode, lam, out):
    """out[b, n] = sum_k w[b,k] * m * exp(-lam * |q_n - c[b,k]|^2).

    ``m`` is ``(mx, my)[b,k]`` for MODE_VECTOR, ``v = q_n - c[b,k]`` for
    MODE_RADIAL and ``v`` turned 90 degrees counter-clockwise for MODE_SWIRL.
    Zero weights are skipped.
    """
    B = w.shape[0]
    for b in prange(B):
        _gauss_env(qxy, w[b], mx[b], my[b], cx[b], cy[b], mode, lam, out[b])


@njit(cache=True)
def kahan_sum(values):
    s = 0.0
    c = 0.0
    for i in range(values.shape[0]):
        y = values[i] - c
        t = s + y
        c = (t - s) - y
        s = t
    return s


@njit(cache=True)
def _fots_env(qxy, w, q, t, patch_mode, lam_d, lam_s, lam_t, shear_max, twist_max,
              has_contact, cq, ct, ref, out):
    N = qxy.shape[0]
    any_contact = False
    for n in range(N):
        if w[n] > 0.0:
            any_contact = True
            break
    for n in range(N):
        out[n, 0] = 0.0
        out[n, 1] = 0.0
    if not any_contact:
        has_contact[0] = False
        return
    if not has_contact[0]:
        has_contact[0] = True
        for i in range(4):
            cq[i] = q[i]
        for i in range(3):
            ct[i] = t[i]
        if patch_mode:
            sx = 0.0
            sy = 0.0
            sw = 0.0
            ex = 0.0
            ey = 0.0
            ew = 0.0
            for n in range(N):
                if w[n] > 0.0:
                    # compensated sums of w, w*x, w*y
                    y1 = w[n] * qxy[n, 0] - ex
                    t1 = sx + y1
                    ex = (t1 - sx) - y1
                    sx = t1
                    y2 = w[n] * qxy[n, 1] - ey
                    t2 = sy + y2
                    ey = (t2 - sy) - y2
                    sy = t2
                    y3 = w[n] - ew
                    t3 = sw + y3
                    ew = (t3 - sw) - y3
                    sw = t3
            ref[0] = sx / sw
            ref[1] = sy / sw
    if not patch_mode:
        ref[0] = t[0]
        ref[1] = t[1]

    ds_x = t[0] - ct[0]
    ds_y = t[1] - ct[1]
    R = np.empty((3, 3))
    R0 = np.empty((3, 3))
    _quat_mat(q, R)
    _quat_mat(cq, R0)
    # relative rotation R R0^T, entries (0,0) and (1,0)
    r00 = R[0, 0] * R0[0, 0] + R[0, 1] * R0[0, 1] + R[0, 2] * R0[0, 2]
    r10 = R[1, 0] * R0[0, 0] + R[1, 1] * R0[0, 1] + R[1, 2] * R0[0, 2]
    th = math.atan2(r10, r00)
    dn = math.sqrt(ds_x * ds_x + ds_y * ds_y)
    if dn > shear_max:
        sc = shear_max / dn
        ds_x *= sc
        ds_y *= sc
    if th > twist_max:
        th = twist_max
    elif th < -twist_max:
        th = -twist_max

    tmp = np.zeros((N, 2))
    cxy = np.empty(N)
    _gauss_env(qxy, w, cxy, cxy, qxy[:, 0].copy(), qxy[:, 1].copy(), MODE_RADIAL, lam_d, out)
    one = np.ones(1)
    mx = np.empty(1)
    my = np.empty(1)
    gx = np.empty(1)
    gy = np.empty(1)
    gx[0] = ref[0]
    gy[0] = ref[1]
    if ds_x != 0.0 or ds_y != 0.0:
        mx[0] = ds_x
        my[0] = ds_y
        _gauss_env(qxy, one, mx, my, gx, gy, MODE_VECTOR, lam_s, tmp)
        for n in range(N):
            out[n, 0] += tmp[n, 0]
            out[n, 1] += tmp[n, 1]
    if th != 0.0:
        tw = np.empty(1)
        tw[0] = th
        _gauss_env(qxy, tw, mx, my, gx, gy, MODE_SWIRL, lam_t, tmp)
        for n in range(N):
            out[n, 0] += tmp[n, 0]
            out[n, 1] += tmp[n, 1]


@njit(cache=True, parallel=True)
def fots_batch(qxy, w, q, t, active, patch_mode, lam_d, lam_s, lam_t, shear_max, twist_max,
               has_contact, cq, ct, ref, out):
    """One SE(2) marker-model step for every active environment (state mutated in place)."""
    B = w.shape[0]
    for b in prange(B):
        if active[b]:
            _fots_env(qxy, w[b], q[b], t[b], patch_mode, lam_d, lam_s, lam_t, shear_max, twist_max,
                      has_contact[b:b + 1], cq[b], ct[b], ref[b], out[b])


@njit(cache=True)
def _tri_dist2(px, py, pz, ax, ay, az, bx, by, bz, cx, cy, cz):
    # closest point on a triangle by Voronoi region (Ericson, Real-Time Collision Detection 5.1.5)
    abx, aby, abz = bx - ax, by - ay, bz - az
    acx, acy, acz = cx - ax, cy - ay, cz - az
    apx, apy, apz = px - ax, py - ay, pz - az
    d1 = abx * apx + aby * apy + abz * apz
    d2 = acx * apx + acy * apy + acz * apz
    if d1 <= 0.0 and d2 <= 0.0:
        qx, qy, qz = ax, ay, az
    else:
        bpx, bpy, bpz = px - bx, py - by, pz - bz
        d3 = abx * bpx + aby * bpy + abz * bpz
        d4 = acx * bpx + acy * bpy + acz * bpz
        cpx, cpy, cpz = px - cx, py - cy, pz - cz
        d5 = abx * cpx + aby * cpy + abz * cpz
        d6 = acx * cpx + acy * cpy + acz * cpz
        vc = d1 * d4 - d3 * d2
        vb = d5 * d2 - d1 * d6
        va = d3 * d6 - d5 * d4
        if d3 >= 0.0 and d4 <= d3:
            qx, qy, qz = bx, by, bz
        elif d6 >= 0.0 and d5 <= d6:
            qx, qy, qz = cx, cy, cz
        elif vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
            v = d1 / (d1 - d3)
            qx, qy, qz = ax + v * abx, ay + v * aby, az + v * abz
        elif vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
            w = d2 / (d2 - d6)
            qx, qy, qz = ax + w * acx, ay + w * acy, az + w * acz
        elif va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
            w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
            qx, qy, qz = bx + w * (cx - bx), by + w * (cy - by), bz + w * (cz - bz)
        else:
            den = 1.0 / (va + vb + vc)
            v = vb * den
            w = vc * den
            qx = ax + abx * v + acx * w
            qy = ay + aby * v + acy * w
            qz = az + abz * v + acz * w
    dx, dy, dz = px - qx, py - qy, pz - qz
    return dx * dx + dy * dy + dz * dz


@njit(cache=True, parallel=True)
def mesh_sdf(P, V, F, out):
    """Signed distance of points P to a closed triangle mesh; sign from the generalized winding number."""
    n = P.shape[0]
    m = F.shape[0]
    for i in prange(n):
        px, py, pz = P[i, 0], P[i, 1], P[i, 2]
        best = np.inf
        wind = 0.0
        for f in range(m):
            a = F[f, 0]
            b = F[f, 1]
            c = F[f, 2]
            d2 = _tri_dist2(px, py, pz, V[a, 0], V[a, 1], V[a, 2], V[b, 0], V[b, 1], V[b, 2],
                            V[c, 0], V[c, 1], V[c, 2])
            if d2 < best:
                best = d2
            ax, ay, az = V[a, 0] - px, V[a, 1] - py, V[a, 2] - pz
            bx, by, bz = V[b, 0] - px, V[b, 1] - py, V[b, 2] - pz
            cx, cy, cz = V[c, 0] - px, V[c, 1] - py, V[c, 2] - pz
            la = math.sqrt(ax * ax + ay * ay + az * az)
            lb = math.sqrt(bx * bx + by * by + bz * bz)
            lc = math.sqrt(cx * cx + cy * cy + cz * cz)
            det = ax * (by * cz - bz * cy) + ay * (bz * cx - bx * cz) + az * (bx * cy - by * cx)
            den = (la * lb * lc + (ax * bx + ay * by + az * bz) * lc + (bx * cx + by * cy + bz * cz) * la
                   + (cx * ax + cy * ay + cz * az) * lb)
            wind += 2.0 * math.atan2(det, den)
        d = math.sqrt(best)
        out[i] = -d if abs(wind / (4.0 * math.pi)) > 0.5 else d
