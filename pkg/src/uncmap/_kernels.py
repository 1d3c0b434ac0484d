"""Hot numeric kernels.

Every kernel has a pure-Python/numpy implementation; when numba is
available (and UNCMAP_NO_NUMBA is unset) the same functions are compiled
with @njit. Public code imports the names from here and stays agnostic.
"""

import math
import os

import numpy as np

_SQRT2 = math.sqrt(2.0)
_TWOPI = 2.0 * math.pi

# Gauss-Legendre abscissae/weights used by the bivariate normal routine
# (Genz's BVND node sets for |r| < 0.3, < 0.75, and the rest).
_GL6_X = np.array((-0.9324695142031522, -0.6612093864662647, -0.2386191860831970))
_GL6_W = np.array((0.1713244923791705, 0.3607615730481384, 0.4679139345726904))
_GL12_X = np.array((-0.9815606342467191, -0.9041172563704750, -0.7699026741943050,
           -0.5873179542866171, -0.3678314989981802, -0.1252334085114692))
_GL12_W = np.array((0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
           0.2031674267230659, 0.2334925365383547, 0.2491470458134029))
_GL20_X = np.array((-0.9931285991850949, -0.9639719272779138, -0.9122344282513259,
           -0.8391169718222188, -0.7463319064601508, -0.6360536807265150,
           -0.5108670019508271, -0.3737060887154196, -0.2277858511416451,
           -0.07652652113349733))
_GL20_W = np.array((0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
           0.08327674157670475, 0.1019301198172404, 0.1181945319615184,
           0.1316886384491766, 0.1420961093183821, 0.1491729864726037,
           0.1527533871307259))


def _phid(x):
    """Standard normal CDF."""
    return 0.5 * math.erfc(-x / _SQRT2)


def _bvnu(dh, dk, r):
    """P(X > dh, Y > dk) for standard bivariate normal with correlation r.

    Port of Genz's BVND (Drezner & Wesolowsky refinement); absolute
    accuracy better than 5e-16 away from r = +-1.
    """
    if dh == np.inf or dk == np.inf:
        return 0.0
    if dh == -np.inf:
        return 1.0 if dk == -np.inf else _phid(-dk)
    if dk == -np.inf:
        return _phid(-dh)

    if abs(r) < 0.3:
        xs, ws = _GL6_X, _GL6_W
    elif abs(r) < 0.75:
        xs, ws = _GL12_X, _GL12_W
    else:
        xs, ws = _GL20_X, _GL20_W

    h = dh
    k = dk
    hk = h * k
    bvn = 0.0
    if abs(r) < 0.925:
        hs = (h * h + k * k) / 2.0
        asr = math.asin(r)
        for i in range(len(xs)):
            for sgn in (-1.0, 1.0):
                sn = math.sin(asr * (sgn * xs[i] + 1.0) / 2.0)
                bvn += ws[i] * math.exp((sn * hk - hs) / (1.0 - sn * sn))
        bvn = bvn * asr / (2.0 * _TWOPI) + _phid(-h) * _phid(-k)
    else:
        if r < 0.0:
            k = -k
            hk = -hk
        if abs(r) < 1.0:
            ass = (1.0 - r) * (1.0 + r)
            a = math.sqrt(ass)
            bs = (h - k) * (h - k)
            c = (4.0 - hk) / 8.0
            d = (12.0 - hk) / 16.0
            asr = -(bs / ass + hk) / 2.0
            if asr > -100.0:
                bvn = (a * math.exp(asr)
                       * (1.0 - c * (bs - ass) * (1.0 - d * bs / 5.0) / 3.0
                          + c * d * ass * ass / 5.0))
            if -hk < 100.0:
                b = math.sqrt(bs)
                sp = math.sqrt(_TWOPI) * _phid(-b / a)
                bvn -= (math.exp(-hk / 2.0) * sp * b
                        * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0))
            a /= 2.0
            for i in range(len(xs)):
                for sgn in (-1.0, 1.0):
                    x = a * (sgn * xs[i] + 1.0)
                    xsq = x * x
                    rs = math.sqrt(1.0 - xsq)
                    asr = -(bs / xsq + hk) / 2.0
                    if asr > -100.0:
                        sp = 1.0 + c * xsq * (1.0 + d * xsq)
                        ep = math.exp(-hk * (1.0 - rs)
                                      / (2.0 * (1.0 + rs))) / rs
                        bvn += a * ws[i] * math.exp(asr) * (ep - sp)
            bvn = -bvn / _TWOPI
        if r > 0.0:
            bvn += _phid(-max(h, k))
        else:
            bvn = -bvn
            if k > h:
                bvn += _phid(k) - _phid(h)
    if bvn < 0.0:
        bvn = 0.0
    elif bvn > 1.0:
        bvn = 1.0
    return bvn


def _rect_prob_2d(sx, sy, rho, hx, hy):
    """P(|X| < hx, |Y| < hy) for zero-mean bivariate normal.

    sx, sy are the marginal standard deviations, rho the correlation.
    """
    h = hx / sx
    k = hy / sy
    return (_bvnu(-h, -k, rho) - _bvnu(h, -k, rho)
            - _bvnu(-h, k, rho) + _bvnu(h, k, rho))


def _rect_prob_2d_batch(c11, c22, c12, hx, hy, out):
    """Vector form of _rect_prob_2d over covariance entries."""
    for i in range(c11.shape[0]):
        sx = math.sqrt(c11[i])
        sy = math.sqrt(c22[i])
        rho = c12[i] / (sx * sy)
        if rho > 0.999999:
            rho = 0.999999
        elif rho < -0.999999:
            rho = -0.999999
        out[i] = _rect_prob_2d(sx, sy, rho, hx, hy)


def _raycast(px, py, angles, segs, max_range, ranges, hits):
    """Nearest ray/segment intersection per beam.

    segs is (M,4) float64 [ax, ay, bx, by]; writes range (capped at
    max_range) and a hit flag per beam.
    """
    n = angles.shape[0]
    m = segs.shape[0]
    for i in range(n):
        dx = math.cos(angles[i])
        dy = math.sin(angles[i])
        best = max_range
        hit = False
        for j in range(m):
            ex = segs[j, 2] - segs[j, 0]
            ey = segs[j, 3] - segs[j, 1]
            denom = dx * ey - dy * ex
            if abs(denom) < 1e-15:
                continue
            fx = segs[j, 0] - px
            fy = segs[j, 1] - py
            t = (fx * ey - fy * ex) / denom
            u = (fx * dy - fy * dx) / denom
            if t >= 0.0 and 0.0 <= u <= 1.0 and t < best:
                best = t
                hit = True
        ranges[i] = best
        hits[i] = hit


def _traverse_ray(x0, y0, x1, y1, ox, oy, res, width, height, cols, rows):
    """Amanatides-Woo voxel traversal from (x0,y0) to (x1,y1).

    Writes visited cell indices into cols/rows and returns the count.
    Ties on shared edges resolve toward +x/+y, matching world_to_cell.
    """
    cx = int(math.floor((x0 - ox) / res))
    cy = int(math.floor((y0 - oy) / res))
    ex = int(math.floor((x1 - ox) / res))
    ey = int(math.floor((y1 - oy) / res))
    dx = x1 - x0
    dy = y1 - y0
    step_x = 1 if dx > 0.0 else (-1 if dx < 0.0 else 0)
    step_y = 1 if dy > 0.0 else (-1 if dy < 0.0 else 0)
    if step_x != 0:
        nbx = ox + (cx + (1 if step_x > 0 else 0)) * res
        tmax_x = (nbx - x0) / dx
        tdx = res / abs(dx)
    else:
        tmax_x = np.inf
        tdx = np.inf
    if step_y != 0:
        nby = oy + (cy + (1 if step_y > 0 else 0)) * res
        tmax_y = (nby - y0) / dy
        tdy = res / abs(dy)
    else:
        tmax_y = np.inf
        tdy = np.inf

    count = 0
    max_cells = cols.shape[0]
    while count < max_cells:
        if 0 <= cx < width and 0 <= cy < height:
            cols[count] = cx
            rows[count] = cy
            count += 1
        if cx == ex and cy == ey:
            break
        if tmax_x > 1.0 and tmax_y > 1.0:
            break
        if tmax_x < tmax_y:
            cx += step_x
            tmax_x += tdx
        else:
            cy += step_y
            tmax_y += tdy
    return count


def _apply_fov(logodds, occupancy, stamp, stamp_id, best_lnew,
               touched_cols, touched_rows,
               px, py, phi, pcov, rngs, brgs, hit_flags,
               ncov00, ncov01, ncov11,
               ox, oy, res, width, height,
               sx_half, sy_half, kappa, ell_beta, ell_floor):
    """One full scan applied to the log-odds grid with the gated rule.

    First pass collects, per touched cell, the best (largest) candidate
    log-odds over all beams crossing it; second pass applies the gated
    blend once per cell. Hit cells are marked in the occupancy layer.
    Returns the number of touched cells.
    """
    nbeams = rngs.shape[0]
    ntouched = 0
    max_cells = touched_cols.shape[0]
    col_buf = np.empty(4 * (width + height), dtype=np.int64)
    row_buf = np.empty(4 * (width + height), dtype=np.int64)
    for b in range(nbeams):
        ang = brgs[b] + phi
        wx = px + rngs[b] * math.cos(ang)
        wy = py + rngs[b] * math.sin(ang)
        ncells = _traverse_ray(px, py, wx, wy, ox, oy, res,
                               width, height, col_buf, row_buf)
        for ci in range(ncells):
            col = col_buf[ci]
            row = row_buf[ci]
            # range/bearing of this cell's center relative to the pose
            mx = ox + (col + 0.5) * res - px
            my = oy + (row + 0.5) * res - py
            rho = math.sqrt(mx * mx + my * my)
            if rho < 1e-9:
                rho = 1e-9
            gamma = math.atan2(my, mx)  # = theta + phi
            cg = math.cos(gamma)
            sg = math.sin(gamma)
            # J_pose = [[1,0,-rho*sg],[0,1,rho*cg]] on the 3x3 pose cov
            # J_meas = [[cg,-rho*sg],[sg,rho*cg]] on the 2x2 sensor cov
            a02 = -rho * sg
            a12 = rho * cg
            c00 = (pcov[0, 0] + 2.0 * a02 * pcov[0, 2]
                   + a02 * a02 * pcov[2, 2])
            c01 = (pcov[0, 1] + a12 * pcov[0, 2] + a02 * pcov[1, 2]
                   + a02 * a12 * pcov[2, 2])
            c11 = (pcov[1, 1] + 2.0 * a12 * pcov[1, 2]
                   + a12 * a12 * pcov[2, 2])
            c00 += (cg * cg * ncov00 - 2.0 * cg * rho * sg * ncov01
                    + rho * rho * sg * sg * ncov11)
            c01 += (cg * sg * ncov00 + rho * (cg * cg - sg * sg) * ncov01
                    - rho * rho * sg * cg * ncov11)
            c11 += (sg * sg * ncov00 + 2.0 * sg * rho * cg * ncov01
                    + rho * rho * cg * cg * ncov11)
            # dispersion bound p = (a / sigma~)^2, clamped to its domain
            det = c00 * c11 - c01 * c01
            if det < 1e-300:
                det = 1e-300
            sigma_t = det ** 0.25
            a2 = math.sqrt(sx_half * sy_half) / math.sqrt(3.0)
            sigma_lo = math.sqrt(3.0) * max(sx_half, sy_half) / 2.0
            if sigma_t < sigma_lo:
                sigma_t = sigma_lo
            p = (a2 / sigma_t) ** 2
            if p < 1e-300:
                p = 1e-300
            elif p > 1.0 - 1e-12:
                p = 1.0 - 1e-12
            lnew = math.log(p / (1.0 - p))
            if lnew < ell_floor:
                lnew = ell_floor
            idx = row * width + col
            if stamp[idx] != stamp_id:
                stamp[idx] = stamp_id
                best_lnew[idx] = lnew
                if ntouched < max_cells:
                    touched_cols[ntouched] = col
                    touched_rows[ntouched] = row
                    ntouched += 1
            elif lnew > best_lnew[idx]:
                best_lnew[idx] = lnew
        if hit_flags[b] and ncells > 0:
            occupancy[row_buf[ncells - 1] * width + col_buf[ncells - 1]] = 1
    for t in range(ntouched):
        idx = touched_rows[t] * width + touched_cols[t]
        prev = logodds[idx]
        lnew = best_lnew[idx]
        if not (prev > ell_beta and prev > lnew):
            logodds[idx] = prev + kappa * (lnew - prev)
    return ntouched


def _siren_accumulate(ell, ell_beta, beta, n_dim, c2):
    """Single-pass signed-KL accumulation over a flat log-odds array.

    Cells whose log-odds equal ell_beta exactly are unknown and skipped.
    Returns (total, positive, negative, n_explored).
    """
    total = 0.0
    pos = 0.0
    neg = 0.0
    count = 0
    half_n = n_dim / 2.0
    expo = 2.0 / n_dim
    planar = expo == 1.0  # skip libm pow in the common 2-D case
    for i in range(ell.shape[0]):
        val = ell[i]
        if val == ell_beta:
            continue
        count += 1
        p = 1.0 - 1.0 / (1.0 + math.exp(val))
        if p == beta:
            continue
        ratio = beta / p if planar else (beta / p) ** expo
        kl = math.log(p / beta) - half_n + half_n * ratio
        s = c2 * kl
        if p < beta:
            s = -s
        total += s
        if s > 0.0:
            pos += s
        elif s < 0.0:
            neg += s
    return total, pos, neg, count


def _frontier_jump_mask(v, clear, t_h, u_beta, inv_c, scale, mask, jump):
    """Fused gradient-magnitude threshold over an uncertainty field.

    Interior cells use central differences over 2c, borders one-sided
    over c. Writes mask and (masked cells only) the jump magnitude.
    """
    h, w = v.shape
    for r in range(h):
        for q in range(w):
            if q == 0:
                gx = (v[r, 1] - v[r, 0]) * inv_c
            elif q == w - 1:
                gx = (v[r, w - 1] - v[r, w - 2]) * inv_c
            else:
                gx = (v[r, q + 1] - v[r, q - 1]) * inv_c * 0.5
            if r == 0:
                gy = (v[1, q] - v[0, q]) * inv_c
            elif r == h - 1:
                gy = (v[h - 1, q] - v[h - 2, q]) * inv_c
            else:
                gy = (v[r + 1, q] - v[r - 1, q]) * inv_c * 0.5
            j = math.sqrt(gx * gx + gy * gy) * scale
            if j > t_h and v[r, q] < u_beta and clear[r, q]:
                mask[r, q] = True
                jump[r, q] = j


USING_NUMBA = False

if os.environ.get("UNCMAP_NO_NUMBA", "") not in ("1", "true", "yes"):
    try:
        from numba import njit

        _phid = njit(cache=True)(_phid)
        _bvnu = njit(cache=True)(_bvnu)
        _rect_prob_2d = njit(cache=True)(_rect_prob_2d)
        _rect_prob_2d_batch = njit(cache=True)(_rect_prob_2d_batch)
        _raycast = njit(cache=True)(_raycast)
        _traverse_ray = njit(cache=True)(_traverse_ray)
        _apply_fov = njit(cache=True)(_apply_fov)
        _siren_accumulate = njit(cache=True)(_siren_accumulate)
        _frontier_jump_mask = njit(cache=True)(_frontier_jump_mask)
        USING_NUMBA = True
    except ImportError:
        pass


def bvn_cdf(h, k, rho):
    """Standard bivariate normal CDF P(X <= h, Y <= k)."""
    return _bvnu(-h, -k, rho)


def rect_prob_2d(sx, sy, rho, hx, hy):
    return _rect_prob_2d(sx, sy, rho, hx, hy)


def rect_prob_2d_batch(c11, c22, c12, hx, hy):
    out = np.empty_like(np.asarray(c11, dtype=np.float64))
    _rect_prob_2d_batch(np.asarray(c11, dtype=np.float64),
                        np.asarray(c22, dtype=np.float64),
                        np.asarray(c12, dtype=np.float64),
                        float(hx), float(hy), out)
    return out


def raycast(px, py, angles, segs, max_range):
    angles = np.asarray(angles, dtype=np.float64)
    segs = np.asarray(segs, dtype=np.float64).reshape(-1, 4)
    ranges = np.empty(angles.shape[0], dtype=np.float64)
    hits = np.zeros(angles.shape[0], dtype=np.bool_)
    _raycast(float(px), float(py), angles, segs, float(max_range),
             ranges, hits)
    return ranges, hits


def siren_accumulate(ell, ell_beta, beta, n_dim, c2):
    """Signed-KL sums over explored cells: (total, positive, negative, n)."""
    ell = np.ascontiguousarray(ell, dtype=np.float64).reshape(-1)
    if USING_NUMBA:
        return _siren_accumulate(ell, float(ell_beta), float(beta),
                                 int(n_dim), float(c2))
    # Vectorized path: the per-cell loop is only worthwhile when compiled.
    known = ell != ell_beta
    count = int(known.sum())
    if count == 0:
        return 0.0, 0.0, 0.0, 0
    p = 1.0 - 1.0 / (1.0 + np.exp(ell[known]))
    kl = np.log(p / beta) - n_dim / 2.0 \
        + (n_dim / 2.0) * np.power(beta / p, 2.0 / n_dim)
    signed = c2 * kl * np.sign(p - beta)
    pos = float(signed[signed > 0.0].sum())
    neg = float(signed[signed < 0.0].sum())
    return float(signed.sum()), pos, neg, count


def frontier_jump_mask(v, clear, t_h, u_beta, c, scale):
    """Threshold mask + per-cell jump magnitudes; jumps are zero off-mask."""
    v = np.ascontiguousarray(v, dtype=np.float64)
    clear = np.ascontiguousarray(clear, dtype=np.bool_)
    mask = np.zeros(v.shape, dtype=np.bool_)
    jump = np.zeros(v.shape, dtype=np.float64)
    if USING_NUMBA:
        _frontier_jump_mask(v, clear, float(t_h), float(u_beta),
                            1.0 / float(c), float(scale), mask, jump)
        return mask, jump
    inv_c = 1.0 / float(c)
    gx = np.empty_like(v)
    gy = np.empty_like(v)
    gx[:, 1:-1] = (v[:, 2:] - v[:, :-2]) * (inv_c * 0.5)
    gx[:, 0] = (v[:, 1] - v[:, 0]) * inv_c
    gx[:, -1] = (v[:, -1] - v[:, -2]) * inv_c
    gy[1:-1, :] = (v[2:, :] - v[:-2, :]) * (inv_c * 0.5)
    gy[0, :] = (v[1, :] - v[0, :]) * inv_c
    gy[-1, :] = (v[-1, :] - v[-2, :]) * inv_c
    j = np.sqrt(gx * gx + gy * gy) * scale
    mask = (j > t_h) & (v < u_beta) & clear
    jump[mask] = j[mask]
    return mask, jump


def traverse_ray(x0, y0, x1, y1, ox, oy, res, width, height):
    cap = 4 * (width + height)
    cols = np.empty(cap, dtype=np.int64)
    rows = np.empty(cap, dtype=np.int64)
    n = _traverse_ray(float(x0), float(y0), float(x1), float(y1),
                      float(ox), float(oy), float(res),
                      int(width), int(height), cols, rows)
    return cols[:n].copy(), rows[:n].copy()
