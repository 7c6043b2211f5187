"""Numba fragment kernels for the software rasterizer.

One kernel serves both render modes: prebaked mode passes a single blended
map per layer with weight 1.0, fused mode passes the whole basis stack with
the frame's weights (the texture basis stays uint8 and is dequantized by
``tex_scale``).  Loops are sequential, so output is bit-deterministic.

Coverage uses a top-left fill rule on exact edge hits so adjacent triangles
never double-composite a pixel.  Per-pixel transmittance below 1/512 skips
further shading (below 8-bit significance).
"""

import numpy as np
from numba import njit

EARLY_OUT_TRANSMITTANCE = 1.0 / 512.0

# Real SH band-1/2 constants (same values as lavatar.sh).
_C1 = 0.4886025119029199
_C2_0 = 1.0925484305920792
_C2_1 = 0.31539156525252005
_C2_2 = 0.5462742152960396


@njit(cache=True)
def _edge_accepts(w, dxe, dye):
    # w is the orientation-adjusted edge value; boundary pixels belong to the
    # triangle whose adjusted edge points "up" (screen y grows downward), or
    # exactly horizontal pointing left.
    if w > 0.0:
        return True
    if w < 0.0:
        return False
    if dye > 0.0:
        return True
    return dye == 0.0 and dxe < 0.0


@njit(cache=True)
def _sample2(map3, u, v, out):
    """Bilinear fetch of a (rows, cols, C) map at uv in [-1, 1] into out[:C]."""
    rows, cols = map3.shape[0], map3.shape[1]
    x = (u + 1.0) * 0.5 * (cols - 1)
    y = (v + 1.0) * 0.5 * (rows - 1)
    if x < 0.0:
        x = 0.0
    elif x > cols - 1.0:
        x = cols - 1.0
    if y < 0.0:
        y = 0.0
    elif y > rows - 1.0:
        y = rows - 1.0
    x0 = int(x)
    y0 = int(y)
    x1 = x0 + 1 if x0 + 1 < cols else cols - 1
    y1 = y0 + 1 if y0 + 1 < rows else rows - 1
    fx = x - x0
    fy = y - y0
    w00 = (1.0 - fx) * (1.0 - fy)
    w01 = fx * (1.0 - fy)
    w10 = (1.0 - fx) * fy
    w11 = fx * fy
    for c in range(map3.shape[2]):
        out[c] = (
            w00 * map3[y0, x0, c]
            + w01 * map3[y0, x1, c]
            + w10 * map3[y1, x0, c]
            + w11 * map3[y1, x1, c]
        )


@njit(cache=True)
def rasterize_layer(
    tris,
    vx,
    vy,
    inv_w,
    uv,
    wpos,
    warp_basis,
    gamma,
    tex_basis,
    beta,
    tex_scale,
    spec_basis,
    spec_weights,
    has_spec,
    cam,
    near,
    far,
    rgb_acc,
    weight_acc,
    trans,
):
    height, width = trans.shape
    num_warp = warp_basis.shape[0]
    num_tex = tex_basis.shape[0]
    num_spec = spec_basis.shape[0]
    duv = np.empty(2, dtype=np.float64)
    texel = np.empty(4, dtype=np.float64)
    spec_tex = np.empty(24, dtype=np.float64)
    spec_sum = np.empty(24, dtype=np.float64)

    for f in range(tris.shape[0]):
        i0 = tris[f, 0]
        i1 = tris[f, 1]
        i2 = tris[f, 2]
        x0, y0 = vx[i0], vy[i0]
        x1, y1 = vx[i1], vy[i1]
        x2, y2 = vx[i2], vy[i2]

        area2 = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        if area2 == 0.0:
            continue
        orient = 1.0 if area2 > 0.0 else -1.0

        xmin = min(x0, min(x1, x2))
        xmax = max(x0, max(x1, x2))
        ymin = min(y0, min(y1, y2))
        ymax = max(y0, max(y1, y2))
        col0 = int(np.ceil(xmin - 0.5))
        col1 = int(np.floor(xmax - 0.5))
        row0 = int(np.ceil(ymin - 0.5))
        row1 = int(np.floor(ymax - 0.5))
        if col0 < 0:
            col0 = 0
        if row0 < 0:
            row0 = 0
        if col1 > width - 1:
            col1 = width - 1
        if row1 > height - 1:
            row1 = height - 1
        if col0 > col1 or row0 > row1:
            continue

        # Edge k is opposite vertex k; e(p) = A*px + B*py + C.
        a0 = -(y2 - y1)
        b0 = x2 - x1
        c0 = (y2 - y1) * x1 - (x2 - x1) * y1
        a1 = -(y0 - y2)
        b1 = x0 - x2
        c1 = (y0 - y2) * x2 - (x0 - x2) * y2
        a2 = -(y1 - y0)
        b2 = x1 - x0
        c2 = (y1 - y0) * x0 - (x1 - x0) * y0

        # Orientation-adjusted edge directions for the fill rule.
        d0x, d0y = (x2 - x1) * orient, (y2 - y1) * orient
        d1x, d1y = (x0 - x2) * orient, (y0 - y2) * orient
        d2x, d2y = (x1 - x0) * orient, (y1 - y0) * orient

        iw0, iw1, iw2 = inv_w[i0], inv_w[i1], inv_w[i2]
        inv_area = 1.0 / area2

        for row in range(row0, row1 + 1):
            py = row + 0.5
            px = col0 + 0.5
            e0 = a0 * px + b0 * py + c0
            e1 = a1 * px + b1 * py + c1
            e2 = a2 * px + b2 * py + c2
            for col in range(col0, col1 + 1):
                w0 = e0 * orient
                w1 = e1 * orient
                w2 = e2 * orient
                if (
                    _edge_accepts(w0, d0x, d0y)
                    and _edge_accepts(w1, d1x, d1y)
                    and _edge_accepts(w2, d2x, d2y)
                ):
                    tr = trans[row, col]
                    if tr >= EARLY_OUT_TRANSMITTANCE:
                        l0 = (e0 * inv_area) * iw0
                        l1 = (e1 * inv_area) * iw1
                        l2 = (e2 * inv_area) * iw2
                        s = l0 + l1 + l2
                        if s > 0.0:
                            wf = 1.0 / s
                            if near <= wf <= far:
                                l0 /= s
                                l1 /= s
                                l2 /= s
                                uf = l0 * uv[i0, 0] + l1 * uv[i1, 0] + l2 * uv[i2, 0]
                                vf = l0 * uv[i0, 1] + l1 * uv[i1, 1] + l2 * uv[i2, 1]

                                du = 0.0
                                dv = 0.0
                                for j in range(num_warp):
                                    g = gamma[j]
                                    if g != 0.0:
                                        _sample2(warp_basis[j], uf, vf, duv)
                                        du += g * duv[0]
                                        dv += g * duv[1]
                                uw = uf + du
                                vw = vf + dv

                                r = 0.0
                                g_ = 0.0
                                b = 0.0
                                a = 0.0
                                for k in range(num_tex):
                                    bk = beta[k]
                                    if bk != 0.0:
                                        _sample2(tex_basis[k], uw, vw, texel)
                                        r += bk * texel[0]
                                        g_ += bk * texel[1]
                                        b += bk * texel[2]
                                        a += bk * texel[3]
                                r *= tex_scale
                                g_ *= tex_scale
                                b *= tex_scale
                                a *= tex_scale
                                if a > 1.0:
                                    a = 1.0
                                if a > 0.0:
                                    if has_spec:
                                        wpx = l0 * wpos[i0, 0] + l1 * wpos[i1, 0] + l2 * wpos[i2, 0]
                                        wpy = l0 * wpos[i0, 1] + l1 * wpos[i1, 1] + l2 * wpos[i2, 1]
                                        wpz = l0 * wpos[i0, 2] + l1 * wpos[i1, 2] + l2 * wpos[i2, 2]
                                        dx = wpx - cam[0]
                                        dy = wpy - cam[1]
                                        dz = wpz - cam[2]
                                        inv_n = 1.0 / np.sqrt(dx * dx + dy * dy + dz * dz)
                                        dx *= inv_n
                                        dy *= inv_n
                                        dz *= inv_n
                                        for c in range(24):
                                            spec_sum[c] = 0.0
                                        for m in range(num_spec):
                                            sw = spec_weights[m]
                                            if sw != 0.0:
                                                _sample2(spec_basis[m], uw, vw, spec_tex)
                                                for c in range(24):
                                                    spec_sum[c] += sw * spec_tex[c]
                                        y0b = -_C1 * dy
                                        y1b = _C1 * dz
                                        y2b = -_C1 * dx
                                        y3b = _C2_0 * dx * dy
                                        y4b = -_C2_0 * dy * dz
                                        y5b = _C2_1 * (3.0 * dz * dz - 1.0)
                                        y6b = -_C2_0 * dx * dz
                                        y7b = _C2_2 * (dx * dx - dy * dy)
                                        r += (
                                            y0b * spec_sum[0]
                                            + y1b * spec_sum[3]
                                            + y2b * spec_sum[6]
                                            + y3b * spec_sum[9]
                                            + y4b * spec_sum[12]
                                            + y5b * spec_sum[15]
                                            + y6b * spec_sum[18]
                                            + y7b * spec_sum[21]
                                        )
                                        g_ += (
                                            y0b * spec_sum[1]
                                            + y1b * spec_sum[4]
                                            + y2b * spec_sum[7]
                                            + y3b * spec_sum[10]
                                            + y4b * spec_sum[13]
                                            + y5b * spec_sum[16]
                                            + y6b * spec_sum[19]
                                            + y7b * spec_sum[22]
                                        )
                                        b += (
                                            y0b * spec_sum[2]
                                            + y1b * spec_sum[5]
                                            + y2b * spec_sum[8]
                                            + y3b * spec_sum[11]
                                            + y4b * spec_sum[14]
                                            + y5b * spec_sum[17]
                                            + y6b * spec_sum[20]
                                            + y7b * spec_sum[23]
                                        )
                                    contrib = tr * a
                                    rgb_acc[row, col, 0] += contrib * r
                                    rgb_acc[row, col, 1] += contrib * g_
                                    rgb_acc[row, col, 2] += contrib * b
                                    weight_acc[row, col] += contrib
                                    trans[row, col] = tr * (1.0 - a)
                e0 += a0
                e1 += a1
                e2 += a2


@njit(cache=True)
def rasterize_depth(tris, vx, vy, inv_w, near, far, depth):
    """Min view-depth per pixel for one layer (same coverage rule as shading)."""
    height, width = depth.shape
    for f in range(tris.shape[0]):
        i0 = tris[f, 0]
        i1 = tris[f, 1]
        i2 = tris[f, 2]
        x0, y0 = vx[i0], vy[i0]
        x1, y1 = vx[i1], vy[i1]
        x2, y2 = vx[i2], vy[i2]
        area2 = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        if area2 == 0.0:
            continue
        orient = 1.0 if area2 > 0.0 else -1.0
        col0 = int(np.ceil(min(x0, min(x1, x2)) - 0.5))
        col1 = int(np.floor(max(x0, max(x1, x2)) - 0.5))
        row0 = int(np.ceil(min(y0, min(y1, y2)) - 0.5))
        row1 = int(np.floor(max(y0, max(y1, y2)) - 0.5))
        if col0 < 0:
            col0 = 0
        if row0 < 0:
            row0 = 0
        if col1 > width - 1:
            col1 = width - 1
        if row1 > height - 1:
            row1 = height - 1
        if col0 > col1 or row0 > row1:
            continue
        a0 = -(y2 - y1)
        b0 = x2 - x1
        c0 = (y2 - y1) * x1 - (x2 - x1) * y1
        a1 = -(y0 - y2)
        b1 = x0 - x2
        c1 = (y0 - y2) * x2 - (x0 - x2) * y2
        a2 = -(y1 - y0)
        b2 = x1 - x0
        c2 = (y1 - y0) * x0 - (x1 - x0) * y0
        d0x, d0y = (x2 - x1) * orient, (y2 - y1) * orient
        d1x, d1y = (x0 - x2) * orient, (y0 - y2) * orient
        d2x, d2y = (x1 - x0) * orient, (y1 - y0) * orient
        iw0, iw1, iw2 = inv_w[i0], inv_w[i1], inv_w[i2]
        inv_area = 1.0 / area2
        for row in range(row0, row1 + 1):
            py = row + 0.5
            px = col0 + 0.5
            e0 = a0 * px + b0 * py + c0
            e1 = a1 * px + b1 * py + c1
            e2 = a2 * px + b2 * py + c2
            for col in range(col0, col1 + 1):
                w0 = e0 * orient
                w1 = e1 * orient
                w2 = e2 * orient
                if (
                    _edge_accepts(w0, d0x, d0y)
                    and _edge_accepts(w1, d1x, d1y)
                    and _edge_accepts(w2, d2x, d2y)
                ):
                    s = (e0 * inv_area) * iw0 + (e1 * inv_area) * iw1 + (e2 * inv_area) * iw2
                    if s > 0.0:
                        wf = 1.0 / s
                        if near <= wf <= far and wf < depth[row, col]:
                            depth[row, col] = wf
                e0 += a0
                e1 += a1
                e2 += a2
